//! Resource accounting for iterated fusion.
//!
//! A *run* builds one W state of `target_size` from Bell pairs (`W₂`). It
//! holds an inventory of intermediate W states and repeatedly fuses the
//! largest held piece with the largest partners that keep the product at or
//! below the target, topping up with fresh Bell pairs. Branch probabilities
//! come from [`crate::protocol::fuse`] at `λt = 2π/9`.
//!
//! What a branch does to the inventory:
//!
//! * `Success`: the fused state is kept, or ends the run if it has the target size.
//! * `ByproductSuccess`, `Recyclable`: the smaller W states re-enter the
//!   inventory when recycling is on, else they are discarded.
//! * `HardFailure`: the inputs are lost.
//!
//! Pieces of size 1 carry no entanglement and are always dropped.
//!
//! The inventory is the whole state of a run, so the run is a finite Markov
//! chain. [`expected_resources`] solves it exactly; [`simulate_pipeline`]
//! samples it.

mod feasibility;
mod monte_carlo;

use std::collections::{HashMap, VecDeque};
use std::fmt;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::cavity::magic_time;
use crate::error::{Error, Result};
use crate::protocol::{fuse, OutcomeClass, Protocol};

pub use feasibility::{feasibility_report, FeasibilityReport, QUOTED_OPERATION_TIME};
pub use monte_carlo::{
    simulate_pipeline, write_sweep_csv, BranchTally, RunOutcome, SweepRow, YieldStats, MC_WORKERS, RNG_ALGORITHM,
    SWEEP_CSV_HEADER,
};

/// Largest number of distinct inventories the exact solver will handle.
pub const MAX_STATES: usize = 20_000;

/// Smallest W state a piece must have to be worth keeping.
const MIN_USEFUL_SIZE: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct StrategyConfig {
    pub primitive: Protocol,
    pub recycle: bool,
    /// Fusion attempts after which a run is abandoned; `None` for unbounded.
    pub max_rounds: Option<u32>,
    pub target_size: usize,
}

impl StrategyConfig {
    pub fn new(primitive: Protocol, target_size: usize, recycle: bool) -> Result<Self> {
        if target_size < 2 {
            return Err(Error::Unreachable(target_size));
        }
        Ok(StrategyConfig { primitive, recycle, max_rounds: None, target_size })
    }

    pub fn with_max_rounds(mut self, max_rounds: Option<u32>) -> Self {
        self.max_rounds = max_rounds;
        self
    }
}

impl fmt::Display for StrategyConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.primitive)?;
        if self.recycle {
            f.write_str("+recycle")?;
        }
        if let Some(r) = self.max_rounds {
            write!(f, "+rounds={r}")?;
        }
        Ok(())
    }
}

/// Held W sizes, sorted largest first.
pub type Inventory = Vec<usize>;

/// The inputs chosen for one attempt.
#[derive(Debug, Clone, PartialEq)]
pub struct Attempt {
    pub inputs: Vec<usize>,
    /// Fresh Bell pairs drawn for this attempt.
    pub fresh_pairs: u32,
    /// Inventory left untouched by the attempt.
    pub rest: Inventory,
}

/// Greedy input selection: the largest held piece, then for each remaining
/// input the largest held piece that still leaves room for Bell pairs in the
/// inputs after it, else a fresh Bell pair.
pub fn plan_attempt(strategy: &StrategyConfig, inventory: &[usize]) -> Attempt {
    let k = strategy.primitive.arity();
    let loss = match strategy.primitive {
        Protocol::TwoFusion => 1,
        Protocol::ThreeFusion => 3,
    };
    let mut pool: Vec<usize> = inventory.to_vec();
    pool.sort_unstable_by(|a, b| b.cmp(a));
    let mut inputs = Vec::with_capacity(k);
    let mut fresh_pairs = 0;
    while inputs.len() < k {
        let placeholders = 2 * (k - inputs.len() - 1);
        let used: usize = inputs.iter().sum();
        let pick = pool.iter().position(|&s| used + s + placeholders <= strategy.target_size + loss);
        match pick {
            Some(i) => inputs.push(pool.remove(i)),
            None => {
                inputs.push(2);
                fresh_pairs += 1;
            }
        }
    }
    Attempt { inputs, fresh_pairs, rest: pool }
}

/// One possible result of an attempt.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub outcome: String,
    pub class: OutcomeClass,
    pub probability: f64,
    /// Inventory afterwards, or `None` when the target was produced.
    pub next: Option<Inventory>,
}

/// Everything that can happen from one inventory.
#[derive(Debug, Clone, PartialEq)]
pub struct Step {
    pub attempt: Attempt,
    pub ancilla_atoms: u32,
    pub transitions: Vec<Transition>,
}

/// Reachable inventories of a strategy and their transitions.
#[derive(Debug, Clone)]
pub struct PipelineModel {
    strategy: StrategyConfig,
    states: Vec<Inventory>,
    index: HashMap<Inventory, usize>,
    steps: Vec<Step>,
}

impl PipelineModel {
    /// Enumerates every inventory reachable from an empty start.
    pub fn build(strategy: &StrategyConfig) -> Result<Self> {
        if strategy.target_size < 2 {
            return Err(Error::Unreachable(strategy.target_size));
        }
        let mut model = PipelineModel { strategy: *strategy, states: vec![], index: HashMap::new(), steps: vec![] };
        if strategy.target_size == 2 {
            return Ok(model);
        }
        let mut reports = HashMap::new();
        let mut queue = VecDeque::from([Inventory::new()]);
        model.index.insert(Inventory::new(), 0);
        model.states.push(Inventory::new());
        while let Some(inv) = queue.pop_front() {
            let step = model.step_for(&inv, &mut reports)?;
            for next in step.transitions.iter().filter_map(|t| t.next.as_ref()) {
                if !model.index.contains_key(next) {
                    if model.states.len() >= MAX_STATES {
                        return Err(Error::InvalidParameter(format!(
                            "more than {MAX_STATES} inventories reachable for target {}",
                            strategy.target_size
                        )));
                    }
                    model.index.insert(next.clone(), model.states.len());
                    model.states.push(next.clone());
                    queue.push_back(next.clone());
                }
            }
            model.steps.push(step);
        }
        model.check_progress()?;
        Ok(model)
    }

    fn step_for(
        &self,
        inventory: &[usize],
        reports: &mut HashMap<Vec<usize>, crate::protocol::BranchReport>,
    ) -> Result<Step> {
        let s = &self.strategy;
        let attempt = plan_attempt(s, inventory);
        if !reports.contains_key(&attempt.inputs) {
            reports.insert(attempt.inputs.clone(), fuse(s.primitive, &attempt.inputs, magic_time())?);
        }
        let report = &reports[&attempt.inputs];
        let mut transitions = Vec::new();
        for b in report.branches.iter().filter(|b| b.probability > 0.0) {
            let mut next = attempt.rest.clone();
            let mut produced = false;
            match b.class {
                OutcomeClass::Success => {
                    let size = s.primitive.fused_size(&attempt.inputs);
                    if size == s.target_size {
                        produced = true;
                    } else {
                        next.push(size);
                    }
                }
                OutcomeClass::ByproductSuccess | OutcomeClass::Recyclable if s.recycle => {
                    next.extend(b.residual_sizes.iter().copied().filter(|&k| k >= MIN_USEFUL_SIZE));
                }
                _ => {}
            }
            next.sort_unstable_by(|a, b| b.cmp(a));
            transitions.push(Transition {
                outcome: b.outcome.to_string(),
                class: b.class,
                probability: b.probability,
                next: (!produced).then_some(next),
            });
        }
        let ancilla_atoms = u32::from(s.primitive == Protocol::TwoFusion);
        Ok(Step { attempt, ancilla_atoms, transitions })
    }

    /// Every reachable inventory must be able to reach the target.
    fn check_progress(&self) -> Result<()> {
        let n = self.states.len();
        let mut preds: Vec<Vec<usize>> = vec![vec![]; n];
        let mut done = vec![false; n];
        let mut queue = VecDeque::new();
        for (i, step) in self.steps.iter().enumerate() {
            for t in &step.transitions {
                match &t.next {
                    None => {
                        if !done[i] {
                            done[i] = true;
                            queue.push_back(i);
                        }
                    }
                    Some(inv) => preds[self.index[inv]].push(i),
                }
            }
        }
        while let Some(j) = queue.pop_front() {
            for &i in &preds[j] {
                if !done[i] {
                    done[i] = true;
                    queue.push_back(i);
                }
            }
        }
        match done.iter().position(|d| !d) {
            None => Ok(()),
            Some(i) => Err(Error::NonTerminating(format!("inventory {:?} can never reach the target", self.states[i]))),
        }
    }

    pub fn strategy(&self) -> &StrategyConfig {
        &self.strategy
    }

    pub fn states(&self) -> &[Inventory] {
        &self.states
    }

    /// Transitions out of `inventory`, if it is reachable.
    pub fn step(&self, inventory: &[usize]) -> Option<&Step> {
        self.index.get(inventory).map(|&i| &self.steps[i])
    }

    pub(crate) fn step_at(&self, i: usize) -> &Step {
        &self.steps[i]
    }

    pub(crate) fn index_of(&self, inventory: &[usize]) -> usize {
        self.index[inventory]
    }
}

/// Exact expectations per target W state produced.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CostEstimate {
    pub bell_pairs: f64,
    pub ancilla_atoms: f64,
    /// Probability that a single run produces the target (1 when unbounded).
    pub run_success_probability: f64,
    pub states: usize,
}

/// Mean Bell pairs consumed per target state.
pub fn expected_cost(strategy: &StrategyConfig) -> Result<f64> {
    Ok(expected_resources(strategy)?.bell_pairs)
}

/// Exact expected Bell-pair and ancilla cost per target state.
///
/// Unbounded runs solve the linear system `E[s] = c(s) + Σ p·E[s']`. With a
/// round limit the chain is unrolled over the attempt counter, abandoned runs
/// restart from scratch, and the cost per target is
/// `E[cost of a run] / P(run succeeds)`.
pub fn expected_resources(strategy: &StrategyConfig) -> Result<CostEstimate> {
    let model = PipelineModel::build(strategy)?;
    if strategy.target_size == 2 {
        return Ok(CostEstimate { bell_pairs: 1.0, ancilla_atoms: 0.0, run_success_probability: 1.0, states: 0 });
    }
    match strategy.max_rounds {
        None => solve_unbounded(&model),
        Some(rounds) => solve_bounded(&model, rounds),
    }
}

fn solve_unbounded(model: &PipelineModel) -> Result<CostEstimate> {
    let n = model.states.len();
    let mut system = DMatrix::<f64>::identity(n, n);
    let mut rhs = DMatrix::<f64>::zeros(n, 2);
    for (i, step) in model.steps.iter().enumerate() {
        rhs[(i, 0)] = step.attempt.fresh_pairs as f64;
        rhs[(i, 1)] = step.ancilla_atoms as f64;
        for t in &step.transitions {
            if let Some(next) = &t.next {
                system[(i, model.index[next])] -= t.probability;
            }
        }
    }
    let solution =
        system.lu().solve(&rhs).ok_or_else(|| Error::NonTerminating("singular expected-cost system".into()))?;
    let start = model.index[&Inventory::new()];
    let bell_pairs = solution[(start, 0)];
    if !bell_pairs.is_finite() {
        return Err(Error::NonTerminating("expected cost diverges".into()));
    }
    Ok(CostEstimate { bell_pairs, ancilla_atoms: solution[(start, 1)], run_success_probability: 1.0, states: n })
}

fn solve_bounded(model: &PipelineModel, rounds: u32) -> Result<CostEstimate> {
    let n = model.states.len();
    // value[s] = (cost, ancilla, success) with `r` rounds still available.
    let mut value = DVector::<f64>::zeros(3 * n);
    for _ in 0..rounds {
        let mut next_value = DVector::<f64>::zeros(3 * n);
        for (i, step) in model.steps.iter().enumerate() {
            let mut cost = step.attempt.fresh_pairs as f64;
            let mut ancilla = step.ancilla_atoms as f64;
            let mut success = 0.0;
            for t in &step.transitions {
                match &t.next {
                    None => success += t.probability,
                    Some(inv) => {
                        let j = model.index[inv];
                        cost += t.probability * value[3 * j];
                        ancilla += t.probability * value[3 * j + 1];
                        success += t.probability * value[3 * j + 2];
                    }
                }
            }
            next_value[3 * i] = cost;
            next_value[3 * i + 1] = ancilla;
            next_value[3 * i + 2] = success;
        }
        value = next_value;
    }
    let start = model.index[&Inventory::new()];
    let p = value[3 * start + 2];
    if p.is_nan() || p <= 0.0 {
        return Err(Error::NonTerminating(format!("no run succeeds within {rounds} rounds")));
    }
    Ok(CostEstimate {
        bell_pairs: value[3 * start] / p,
        ancilla_atoms: value[3 * start + 1] / p,
        run_success_probability: p,
        states: n,
    })
}

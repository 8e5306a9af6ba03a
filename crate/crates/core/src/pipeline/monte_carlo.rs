//! Sampled runs of the fusion pipeline.

use std::collections::BTreeMap;
use std::io::{self, Write};

use rand_core::{RngCore, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;
use rayon::prelude::*;
use serde::{Serialize, Serializer};

use super::{Inventory, PipelineModel, StrategyConfig};
use crate::error::{Error, Result};
use crate::format::format_number;
use crate::protocol::OutcomeClass;

/// Generator used by every worker, seeded through `seed_from_u64` (SplitMix64).
pub const RNG_ALGORITHM: &str = "xoshiro256++/splitmix64";

/// Fixed worker count. Worker `k` draws from the stream seeded with `seed + k`
/// and runs trials `k, k + MC_WORKERS, ...`, so results do not depend on how
/// many threads are available.
pub const MC_WORKERS: u64 = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum RunOutcome {
    /// The target state was made.
    Produced,
    /// The round limit ran out first.
    Abandoned,
}

/// How often one detector record was seen for one choice of inputs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BranchTally {
    pub inputs: Vec<usize>,
    pub outcome: String,
    pub class: OutcomeClass,
    pub count: u64,
}

#[derive(Debug, Clone, PartialEq, Default)]
struct Sums {
    produced: u64,
    abandoned: u64,
    attempts: u64,
    pairs: u64,
    pairs_sq: u128,
    pairs_produced: u64,
    ancilla: u64,
    ancilla_sq: u128,
    ancilla_produced: u64,
    branches: BTreeMap<(Vec<usize>, String), (OutcomeClass, u64)>,
}

impl Sums {
    fn merge(mut self, other: Sums) -> Sums {
        self.produced += other.produced;
        self.abandoned += other.abandoned;
        self.attempts += other.attempts;
        self.pairs += other.pairs;
        self.pairs_sq += other.pairs_sq;
        self.pairs_produced += other.pairs_produced;
        self.ancilla += other.ancilla;
        self.ancilla_sq += other.ancilla_sq;
        self.ancilla_produced += other.ancilla_produced;
        for (key, (class, count)) in other.branches {
            self.branches.entry(key).or_insert((class, 0)).1 += count;
        }
        self
    }
}

/// Outcome of [`simulate_pipeline`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct YieldStats {
    pub strategy: StrategyConfig,
    pub trials: u64,
    pub seed: u64,
    pub rng_algorithm: &'static str,
    pub workers: u64,
    /// Bell pairs consumed per target state, `None` if nothing was produced.
    #[serde(serialize_with = "rounded_option")]
    pub expected_bell_pairs: Option<f64>,
    #[serde(serialize_with = "rounded_option")]
    pub bell_pairs_stderr: Option<f64>,
    /// Ancilla atoms per target state (always zero for three-fusion).
    #[serde(serialize_with = "rounded_option")]
    pub ancilla_atoms: Option<f64>,
    #[serde(serialize_with = "rounded_option")]
    pub ancilla_stderr: Option<f64>,
    /// Runs by how they ended. Sums to `trials`.
    pub outcome_histogram: BTreeMap<RunOutcome, u64>,
    pub total_bell_pairs: u64,
    pub total_attempts: u64,
    pub branch_counts: Vec<BranchTally>,
}

fn rounded_option<S: Serializer>(x: &Option<f64>, s: S) -> std::result::Result<S::Ok, S::Error> {
    match x {
        Some(v) => s.serialize_f64(crate::format::round_sig(*v)),
        None => s.serialize_none(),
    }
}

impl YieldStats {
    pub fn produced(&self) -> u64 {
        self.outcome_histogram.get(&RunOutcome::Produced).copied().unwrap_or(0)
    }

    /// Sampled counts for one input choice, in first-seen key order.
    pub fn branch_counts_for(&self, inputs: &[usize]) -> Vec<&BranchTally> {
        self.branch_counts.iter().filter(|t| t.inputs == inputs).collect()
    }
}

/// Runs `trials` independent pipeline runs.
///
/// A run starts with an empty inventory and ends when the target is made or,
/// with a round limit, when the limit is reached. Costs are ratio estimates
/// (total consumed over targets produced) with delta-method standard errors.
pub fn simulate_pipeline(strategy: &StrategyConfig, trials: u64, seed: u64) -> Result<YieldStats> {
    if trials == 0 {
        return Err(Error::InvalidParameter("trials must be at least 1".into()));
    }
    let model = if strategy.target_size > 2 { Some(PipelineModel::build(strategy)?) } else { None };
    let sums = (0..MC_WORKERS)
        .into_par_iter()
        .map(|k| {
            let n = trials / MC_WORKERS + u64::from(k < trials % MC_WORKERS);
            let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed.wrapping_add(k));
            let mut sums = Sums::default();
            for _ in 0..n {
                match &model {
                    Some(m) => run_once(m, &mut rng, &mut sums),
                    None => record_run(&mut sums, true, 1, 0),
                }
            }
            sums
        })
        .collect::<Vec<_>>()
        .into_iter()
        .fold(Sums::default(), Sums::merge);
    Ok(finish(strategy, trials, seed, sums))
}

fn uniform(rng: &mut Xoshiro256PlusPlus) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

fn run_once(model: &PipelineModel, rng: &mut Xoshiro256PlusPlus, sums: &mut Sums) {
    let limit = model.strategy().max_rounds;
    let mut state = model.index_of(&Inventory::new());
    let mut pairs = 0u64;
    let mut ancilla = 0u64;
    let mut rounds = 0u32;
    loop {
        if limit.is_some_and(|l| rounds >= l) {
            record_run(sums, false, pairs, ancilla);
            return;
        }
        let step = model.step_at(state);
        rounds += 1;
        sums.attempts += 1;
        pairs += u64::from(step.attempt.fresh_pairs);
        ancilla += u64::from(step.ancilla_atoms);
        let u = uniform(rng);
        let mut acc = 0.0;
        let last = step.transitions.len() - 1;
        let t = step
            .transitions
            .iter()
            .enumerate()
            .find(|(i, t)| {
                acc += t.probability;
                u < acc || *i == last
            })
            .map(|(_, t)| t)
            .expect("at least one branch");
        sums.branches.entry((step.attempt.inputs.clone(), t.outcome.clone())).or_insert((t.class, 0)).1 += 1;
        match &t.next {
            None => {
                record_run(sums, true, pairs, ancilla);
                return;
            }
            Some(inv) => state = model.index_of(inv),
        }
    }
}

fn record_run(sums: &mut Sums, produced: bool, pairs: u64, ancilla: u64) {
    if produced {
        sums.produced += 1;
        sums.pairs_produced += pairs;
        sums.ancilla_produced += ancilla;
    } else {
        sums.abandoned += 1;
    }
    sums.pairs += pairs;
    sums.pairs_sq += u128::from(pairs) * u128::from(pairs);
    sums.ancilla += ancilla;
    sums.ancilla_sq += u128::from(ancilla) * u128::from(ancilla);
}

/// Ratio `Σx / Σy` with y the 0/1 success indicator, and its delta-method
/// standard error.
fn ratio_estimate(n: u64, sx: u64, sxx: u128, sy: u64, sxy: u64) -> (Option<f64>, Option<f64>) {
    if sy == 0 {
        return (None, None);
    }
    let nf = n as f64;
    let r = sx as f64 / sy as f64;
    if n < 2 {
        return (Some(r), None);
    }
    let (mx, my) = (sx as f64 / nf, sy as f64 / nf);
    let var_x = (sxx as f64 - nf * mx * mx) / (nf - 1.0);
    let var_y = (sy as f64 - nf * my * my) / (nf - 1.0);
    let cov = (sxy as f64 - nf * mx * my) / (nf - 1.0);
    let var = (var_x - 2.0 * r * cov + r * r * var_y).max(0.0) / (nf * my * my);
    (Some(r), Some(var.sqrt()))
}

fn finish(strategy: &StrategyConfig, trials: u64, seed: u64, sums: Sums) -> YieldStats {
    let (expected_bell_pairs, bell_pairs_stderr) =
        ratio_estimate(trials, sums.pairs, sums.pairs_sq, sums.produced, sums.pairs_produced);
    let (ancilla_atoms, ancilla_stderr) =
        ratio_estimate(trials, sums.ancilla, sums.ancilla_sq, sums.produced, sums.ancilla_produced);
    let mut outcome_histogram = BTreeMap::new();
    if sums.produced > 0 {
        outcome_histogram.insert(RunOutcome::Produced, sums.produced);
    }
    if sums.abandoned > 0 {
        outcome_histogram.insert(RunOutcome::Abandoned, sums.abandoned);
    }
    let branch_counts = sums
        .branches
        .into_iter()
        .map(|((inputs, outcome), (class, count))| BranchTally { inputs, outcome, class, count })
        .collect();
    YieldStats {
        strategy: *strategy,
        trials,
        seed,
        rng_algorithm: RNG_ALGORITHM,
        workers: MC_WORKERS,
        expected_bell_pairs,
        bell_pairs_stderr,
        ancilla_atoms,
        ancilla_stderr,
        outcome_histogram,
        total_bell_pairs: sums.pairs,
        total_attempts: sums.attempts,
        branch_counts,
    }
}

pub const SWEEP_CSV_HEADER: &str = "target,strategy,expected_cost,mc_mean,mc_stderr,trials,seed";

/// One line of a cost sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub target: usize,
    pub strategy: String,
    pub expected_cost: f64,
    pub mc_mean: Option<f64>,
    pub mc_stderr: Option<f64>,
    pub trials: u64,
    pub seed: u64,
}

impl SweepRow {
    /// Exact cost plus, when `trials > 0`, a sampled estimate.
    pub fn compute(strategy: &StrategyConfig, trials: u64, seed: u64) -> Result<Self> {
        let expected_cost = super::expected_cost(strategy)?;
        let (mc_mean, mc_stderr) = if trials > 0 {
            let stats = simulate_pipeline(strategy, trials, seed)?;
            (stats.expected_bell_pairs, stats.bell_pairs_stderr)
        } else {
            (None, None)
        };
        Ok(SweepRow {
            target: strategy.target_size,
            strategy: strategy.to_string(),
            expected_cost,
            mc_mean,
            mc_stderr,
            trials,
            seed,
        })
    }
}

pub fn write_sweep_csv<W: Write>(mut out: W, rows: &[SweepRow]) -> io::Result<()> {
    let opt = |x: Option<f64>| x.map_or_else(|| "NA".to_string(), format_number);
    writeln!(out, "{SWEEP_CSV_HEADER}")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.target,
            r.strategy,
            format_number(r.expected_cost),
            opt(r.mc_mean),
            opt(r.mc_stderr),
            r.trials,
            r.seed
        )?;
    }
    Ok(())
}

//! The two fusion protocols.
//!
//! **Two-fusion.** One atom from `|W_N⟩`, one from `|W_M⟩` and a ground-state
//! ancilla cross the cavity together. Atoms 1 and 2 are then detected:
//!
//! | readout | result |
//! |---------|--------|
//! | `ge`, `eg` | `|W_{N+M-1}⟩` up to local phases |
//! | `ee` | failure |
//! | `gg`, then ancilla `e` | `|W_{N+M-2}⟩` |
//! | `gg`, then ancilla `g` | `|W_{N-1}⟩ ⊗ |W_{M-1}⟩`, fusable again |
//!
//! **Three-fusion.** One atom from each of `|W_N⟩`, `|W_M⟩`, `|W_T⟩`, all
//! three detected. Two excitations leave `|W_{N+M+T-3}⟩` up to local phases;
//! `ggg` leaves `|W_{N-1}⟩ ⊗ |W_{M-1}⟩ ⊗ |W_{T-1}⟩`; every other readout is a
//! failure.
//!
//! The success branches have W-like weights only when `|A| = |B|`, i.e. at
//! `λt = 2π/9` (see [`crate::cavity::magic_time`]).

use std::fmt;
use std::io::{self, Write};
use std::str::FromStr;

use serde::Serialize;

use crate::cavity::effective_propagator;
use crate::error::{Error, Result};
use crate::format::format_number;
use crate::register::{initial_three_fusion_state, initial_two_fusion_state, Bitstring, CompactFusionState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Protocol {
    TwoFusion,
    ThreeFusion,
}

impl Protocol {
    /// Number of input W states consumed per attempt.
    pub fn arity(self) -> usize {
        match self {
            Protocol::TwoFusion => 2,
            Protocol::ThreeFusion => 3,
        }
    }

    /// Size of the W state a successful attempt produces.
    pub fn fused_size(self, sizes: &[usize]) -> usize {
        let total: usize = sizes.iter().sum();
        match self {
            Protocol::TwoFusion => total - 1,
            Protocol::ThreeFusion => total - 3,
        }
    }
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Protocol::TwoFusion => "two-fusion",
            Protocol::ThreeFusion => "three-fusion",
        })
    }
}

impl FromStr for Protocol {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "two" | "two-fusion" | "2" => Ok(Protocol::TwoFusion),
            "three" | "three-fusion" | "3" => Ok(Protocol::ThreeFusion),
            other => Err(Error::InvalidParameter(format!("unknown protocol {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum OutcomeClass {
    /// The fused W state was produced.
    Success,
    /// A smaller W state was produced (two-fusion `gg` then `e`).
    ByproductSuccess,
    /// A product of smaller W states that can be fused again.
    Recyclable,
    HardFailure,
}

impl OutcomeClass {
    pub fn as_str(self) -> &'static str {
        match self {
            OutcomeClass::Success => "Success",
            OutcomeClass::ByproductSuccess => "ByproductSuccess",
            OutcomeClass::Recyclable => "Recyclable",
            OutcomeClass::HardFailure => "HardFailure",
        }
    }
}

impl fmt::Display for OutcomeClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Classifies a complete detector record.
///
/// Two-fusion records are `ge`, `eg`, `ee` (atoms 1, 2) or `ggg`, `gge`
/// (atoms 1, 2, then the ancilla). Three-fusion records have three letters.
/// Three-fusion readouts with a single excitation leave the spectators
/// entangled across groups and are counted as failures.
pub fn classify_outcome(protocol: Protocol, outcome: &Bitstring) -> Result<OutcomeClass> {
    let b = outcome.bits();
    match (protocol, b.len()) {
        (Protocol::TwoFusion, 2) => match (b[0], b[1]) {
            (true, true) => Ok(OutcomeClass::HardFailure),
            (false, false) => {
                Err(Error::MalformedOutcome("two-fusion readout gg is incomplete; the ancilla must be detected".into()))
            }
            _ => Ok(OutcomeClass::Success),
        },
        (Protocol::TwoFusion, 3) if !b[0] && !b[1] => {
            Ok(if b[2] { OutcomeClass::ByproductSuccess } else { OutcomeClass::Recyclable })
        }
        (Protocol::ThreeFusion, 3) => Ok(match outcome.excitations() {
            2 => OutcomeClass::Success,
            0 => OutcomeClass::Recyclable,
            _ => OutcomeClass::HardFailure,
        }),
        _ => Err(Error::MalformedOutcome(format!("{outcome} is not a {protocol} readout"))),
    }
}

/// Local phase correction of a success residual; see
/// [`CompactFusionState::phase_corrected`].
pub fn phase_correction(state: &CompactFusionState, class: OutcomeClass) -> Result<CompactFusionState> {
    match class {
        OutcomeClass::Success | OutcomeClass::ByproductSuccess => state.phase_corrected(),
        other => Err(Error::NotSuccessBranch(format!("{other} branch"))),
    }
}

/// One leaf of the measurement tree.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Branch {
    pub outcome: Bitstring,
    pub probability: f64,
    pub class: OutcomeClass,
    /// Sizes of the W states left behind; empty for failures.
    pub residual_sizes: Vec<usize>,
    /// Fidelity to the ideal product of `residual_sizes` W states, after
    /// phase correction for success classes. `None` for failures and for
    /// branches that cannot occur.
    pub post_correction_fidelity: Option<f64>,
    pub residual: Option<CompactFusionState>,
}

/// Every outcome of one fusion attempt.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BranchReport {
    pub protocol: Protocol,
    pub sizes: Vec<usize>,
    pub lambda_t: f64,
    pub branches: Vec<Branch>,
}

impl BranchReport {
    pub fn probability_of(&self, class: OutcomeClass) -> f64 {
        self.branches.iter().filter(|b| b.class == class).map(|b| b.probability).sum()
    }

    /// Probability of producing the fused W state.
    pub fn success_probability(&self) -> f64 {
        self.probability_of(OutcomeClass::Success)
    }

    pub fn total_probability(&self) -> f64 {
        self.branches.iter().map(|b| b.probability).sum()
    }

    pub fn branch(&self, outcome: &str) -> Option<&Branch> {
        self.branches.iter().find(|b| b.outcome.to_string() == outcome)
    }

    pub const CSV_HEADER: &'static str = "protocol,sizes,lambda_t,outcome,probability,class,residual_sizes,fidelity";

    /// One row per branch; list-valued columns are `;`-separated and a
    /// missing fidelity is written as `NA`.
    pub fn write_csv<W: Write>(&self, mut out: W, header: bool) -> io::Result<()> {
        if header {
            writeln!(out, "{}", Self::CSV_HEADER)?;
        }
        let sizes = join(&self.sizes);
        for b in &self.branches {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                self.protocol,
                sizes,
                format_number(self.lambda_t),
                b.outcome,
                format_number(b.probability),
                b.class,
                join(&b.residual_sizes),
                b.post_correction_fidelity.map_or("NA".to_string(), format_number),
            )?;
        }
        Ok(())
    }
}

fn join(xs: &[usize]) -> String {
    xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(";")
}

/// Closed-form two-fusion success probability `2(N+M-1)/(3NM)`.
pub fn success_probability_two(n: usize, m: usize) -> f64 {
    2.0 * (n + m - 1) as f64 / (3 * n * m) as f64
}

/// Closed-form three-fusion success probability `(N+M+T-3)/(NMT)`.
pub fn success_probability_three(n: usize, m: usize, t: usize) -> f64 {
    (n + m + t - 3) as f64 / (n * m * t) as f64
}

fn make_branch(
    protocol: Protocol,
    outcome: Bitstring,
    probability: f64,
    residual: Option<CompactFusionState>,
) -> Result<Branch> {
    let class = classify_outcome(protocol, &outcome)?;
    let (residual_sizes, post_correction_fidelity) = match (&residual, class) {
        (_, OutcomeClass::HardFailure) => (vec![], None),
        (Some(r), OutcomeClass::Success | OutcomeClass::ByproductSuccess) => {
            let corrected = phase_correction(r, class)?;
            let ideal = CompactFusionState::uniform_w(r.spec().clone())?;
            (vec![r.spec().total_atoms()], Some(corrected.fidelity(&ideal)?))
        }
        (Some(r), OutcomeClass::Recyclable) => {
            let ideal = CompactFusionState::w_product(r.spec().clone())?;
            (r.spec().sizes().to_vec(), Some(r.fidelity(&ideal)?))
        }
        (None, _) => (vec![], None),
    };
    Ok(Branch { outcome, probability, class, residual_sizes, post_correction_fidelity, residual })
}

/// Runs two-fusion of `|W_N⟩` and `|W_M⟩` at interaction strength
/// `lambda_t`. Branches come out as `ge, eg, ee, gge, ggg`.
pub fn fuse_two(n: usize, m: usize, lambda_t: f64) -> Result<BranchReport> {
    check_lambda_t(lambda_t)?;
    let evolved = initial_two_fusion_state(n, m)?.apply_extracted_propagator(&effective_propagator(lambda_t))?;

    let mut branches = Vec::with_capacity(5);
    for label in ["ge", "eg", "ee"] {
        let outcome: Bitstring = label.parse()?;
        let (p, residual) = evolved.project(&[0, 1], &outcome)?;
        branches.push(make_branch(Protocol::TwoFusion, outcome, p, residual)?);
    }

    let (p_gg, after_gg) = evolved.project(&[0, 1], &"gg".parse()?)?;
    for label in ["gge", "ggg"] {
        let outcome: Bitstring = label.parse()?;
        let ancilla = Bitstring::new(vec![outcome.bits()[2]]);
        let (p, residual) = match &after_gg {
            Some(state) => {
                let (p_cond, residual) = state.project(&[0], &ancilla)?;
                (p_gg * p_cond, residual)
            }
            None => (p_gg, None),
        };
        branches.push(make_branch(Protocol::TwoFusion, outcome, p, residual)?);
    }

    Ok(BranchReport { protocol: Protocol::TwoFusion, sizes: vec![n, m], lambda_t, branches })
}

/// Runs three-fusion of `|W_N⟩`, `|W_M⟩`, `|W_T⟩`. Branches come out in
/// binary order `ggg, gge, …, eee`.
pub fn fuse_three(n: usize, m: usize, t: usize, lambda_t: f64) -> Result<BranchReport> {
    check_lambda_t(lambda_t)?;
    let evolved = initial_three_fusion_state(n, m, t)?.apply_extracted_propagator(&effective_propagator(lambda_t))?;
    let branches = Bitstring::all(3)
        .map(|outcome| {
            let (p, residual) = evolved.project(&[0, 1, 2], &outcome)?;
            make_branch(Protocol::ThreeFusion, outcome, p, residual)
        })
        .collect::<Result<_>>()?;
    Ok(BranchReport { protocol: Protocol::ThreeFusion, sizes: vec![n, m, t], lambda_t, branches })
}

/// Dispatches on `protocol`; `sizes` must have the protocol's arity.
pub fn fuse(protocol: Protocol, sizes: &[usize], lambda_t: f64) -> Result<BranchReport> {
    match (protocol, sizes) {
        (Protocol::TwoFusion, &[n, m]) => fuse_two(n, m, lambda_t),
        (Protocol::ThreeFusion, &[n, m, t]) => fuse_three(n, m, t, lambda_t),
        _ => Err(Error::DimensionMismatch { expected: protocol.arity(), found: sizes.len() }),
    }
}

fn check_lambda_t(lambda_t: f64) -> Result<()> {
    if lambda_t.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("λt must be finite, got {lambda_t}")))
    }
}

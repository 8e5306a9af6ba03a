//! Independent reference constructions shared by the integration tests.
#![allow(dead_code)]

use wfusion::cavity::{build_effective_hamiltonian, coeff_ab};
use wfusion::linalg::{matrix_exponential, SquareOperator, StateVector, C64};
use wfusion::register::{Bitstring, CompactFusionState, FullRegisterState, GroupSpec, QubitRole};

/// Slot bits from a `g`/`e` string.
pub fn bits(s: &str) -> Vec<bool> {
    s.chars().map(|c| c == 'e').collect()
}

/// Compact amplitude for a hand-written term: `coeff / √(Π sizes)` times
/// `√(size-1)` for every group ket `|(size-2)_g, e⟩`.
fn term(sizes: &[usize], classes: &[u8], slots: &str, coeff: C64) -> (Vec<bool>, Vec<bool>, C64) {
    let norm: f64 = sizes.iter().map(|&s| s as f64).product::<f64>().sqrt();
    let weight: f64 =
        sizes.iter().zip(classes).map(|(&s, &c)| if c == 1 { ((s - 1) as f64).sqrt() } else { 1.0 }).product();
    (classes.iter().map(|&c| c == 1).collect(), bits(slots), coeff * weight / norm)
}

/// The evolved two-fusion state expanded term by term by hand.
pub fn hand_two_fusion(n: usize, m: usize, lambda_t: f64) -> CompactFusionState {
    let c = coeff_ab(lambda_t);
    let (a, b, p1) = (c.a, c.b, c.phase_one);
    let s = [n, m];
    let one = C64::from(1.0);
    let terms = vec![
        term(&s, &[0, 0], "gee", p1 * a),
        term(&s, &[0, 0], "ege", p1 * a),
        term(&s, &[0, 0], "eeg", p1 * b),
        term(&s, &[0, 1], "gge", a),
        term(&s, &[0, 1], "geg", a),
        term(&s, &[0, 1], "egg", b),
        term(&s, &[1, 0], "gge", a),
        term(&s, &[1, 0], "geg", b),
        term(&s, &[1, 0], "egg", a),
        term(&s, &[1, 1], "ggg", one),
    ];
    let spec = GroupSpec::new(vec![n - 1, m - 1], vec![1, 2, 3]).unwrap();
    CompactFusionState::from_terms(spec, terms).unwrap()
}

/// The evolved three-fusion state expanded term by term by hand.
pub fn hand_three_fusion(n: usize, m: usize, t: usize, lambda_t: f64) -> CompactFusionState {
    let c = coeff_ab(lambda_t);
    let (a, b, p1, p3) = (c.a, c.b, c.phase_one, c.phase_three);
    let s = [n, m, t];
    let one = C64::from(1.0);
    let terms = vec![
        term(&s, &[0, 0, 0], "eee", p3),
        term(&s, &[0, 1, 0], "gee", p1 * a),
        term(&s, &[0, 1, 0], "ege", p1 * b),
        term(&s, &[0, 1, 0], "eeg", p1 * a),
        term(&s, &[1, 0, 0], "gee", p1 * b),
        term(&s, &[1, 0, 0], "ege", p1 * a),
        term(&s, &[1, 0, 0], "eeg", p1 * a),
        term(&s, &[1, 1, 0], "gge", b),
        term(&s, &[1, 1, 0], "geg", a),
        term(&s, &[1, 1, 0], "egg", a),
        term(&s, &[0, 0, 1], "gee", p1 * a),
        term(&s, &[0, 0, 1], "ege", p1 * a),
        term(&s, &[0, 0, 1], "eeg", p1 * b),
        term(&s, &[0, 1, 1], "gge", a),
        term(&s, &[0, 1, 1], "geg", a),
        term(&s, &[0, 1, 1], "egg", b),
        term(&s, &[1, 0, 1], "gge", a),
        term(&s, &[1, 0, 1], "geg", b),
        term(&s, &[1, 0, 1], "egg", a),
        term(&s, &[1, 1, 1], "ggg", one),
    ];
    let spec = GroupSpec::new(vec![n - 1, m - 1, t - 1], vec![1, 2, 3]).unwrap();
    CompactFusionState::from_terms(spec, terms).unwrap()
}

/// Qubit layout used by the oracle: every spectator group in order, then
/// slots 1, 2, 3. Matches `CompactFusionState::expand_to_full`.
pub fn oracle_layout(sizes: &[usize]) -> Vec<QubitRole> {
    let mut layout = Vec::new();
    for (group, &s) in sizes.iter().enumerate() {
        layout.extend((0..s - 1).map(|member| QubitRole::Group { group, member }));
    }
    layout.extend((1..=3).map(QubitRole::Slot));
    layout
}

/// Input product of W states built amplitude by amplitude: each input owns
/// its group qubits plus slot `i + 1` and holds exactly one excitation.
/// A two-fusion input leaves slot 3 (the ancilla) in `|g⟩`.
pub fn oracle_input(sizes: &[usize]) -> FullRegisterState {
    let layout = oracle_layout(sizes);
    let q = layout.len();
    let owner = |role: &QubitRole| match *role {
        QubitRole::Group { group, .. } => Some(group),
        QubitRole::Slot(l) if l <= sizes.len() => Some(l - 1),
        QubitRole::Slot(_) => None,
    };
    let amps = (0..1usize << q)
        .map(|x| {
            let mut counts = vec![0usize; sizes.len()];
            for (k, role) in layout.iter().enumerate() {
                if x & (1 << (q - 1 - k)) != 0 {
                    match owner(role) {
                        Some(i) => counts[i] += 1,
                        None => return C64::from(0.0),
                    }
                }
            }
            if counts.iter().all(|&c| c == 1) {
                C64::from(1.0 / sizes.iter().map(|&s| s as f64).product::<f64>().sqrt())
            } else {
                C64::from(0.0)
            }
        })
        .collect();
    FullRegisterState::new(StateVector::from_vec(amps), layout).unwrap()
}

/// Effective propagator from the spectral exponential of the Hamiltonian,
/// not the closed form.
pub fn spectral_propagator(lambda_t: f64) -> SquareOperator {
    matrix_exponential(&build_effective_hamiltonian(), lambda_t).unwrap()
}

/// Applies an 8×8 operator to the last three qubits by direct index
/// arithmetic, without building the embedded matrix.
pub fn apply_to_last_three(u: &SquareOperator, state: &FullRegisterState) -> FullRegisterState {
    let amps = state.state().amplitudes();
    let mut out = vec![C64::from(0.0); amps.len()];
    for (x, &a) in amps.iter().enumerate() {
        if a == C64::from(0.0) {
            continue;
        }
        let (high, col) = (x & !7, x & 7);
        for row in 0..8 {
            out[high | row] += u.entry(row, col) * a;
        }
    }
    FullRegisterState::new(StateVector::from_vec(out), state.layout().to_vec()).unwrap()
}

/// Every branch of a fusion computed on the full register.
pub struct OracleBranch {
    pub outcome: String,
    pub probability: f64,
    pub residual: Option<FullRegisterState>,
}

pub fn oracle_branches(sizes: &[usize], lambda_t: f64) -> Vec<OracleBranch> {
    let evolved = apply_to_last_three(&spectral_propagator(lambda_t), &oracle_input(sizes));
    let q = evolved.qubit_count();
    let labels: Vec<&str> = if sizes.len() == 2 {
        vec!["ge", "eg", "ee", "gge", "ggg"]
    } else {
        vec!["ggg", "gge", "geg", "gee", "egg", "ege", "eeg", "eee"]
    };
    labels
        .into_iter()
        .map(|label| {
            let positions: Vec<usize> = (0..label.len()).map(|i| q - 3 + i).collect();
            let outcome: Bitstring = label.parse().unwrap();
            let (probability, residual) = evolved.project(&positions, &outcome).unwrap();
            OracleBranch { outcome: label.to_string(), probability, residual }
        })
        .collect()
}

/// `|W_n⟩` on `n` qubits built directly.
pub fn direct_w(n: usize) -> StateVector {
    let mut amps = vec![C64::from(0.0); 1 << n];
    for k in 0..n {
        amps[1 << k] = C64::from(1.0 / (n as f64).sqrt());
    }
    StateVector::from_vec(amps)
}

/// Largest amplitude difference after aligning global phases.
pub fn phase_aligned_diff(a: &StateVector, b: &StateVector) -> f64 {
    let overlap = b.inner(a);
    let phase = if overlap.norm() > 0.0 { overlap / overlap.norm() } else { C64::from(1.0) };
    a.amplitudes().iter().zip(b.amplitudes()).map(|(x, y)| (x - y * phase).norm()).fold(0.0, f64::max)
}

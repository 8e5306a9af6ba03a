//! Three atoms in a detuned cavity mode.
//!
//! Two descriptions are provided. The full interaction-picture Hamiltonian
//! couples every atom to the cavity mode with strength `g` and detuning
//! `delta`, on the space `atoms ⊗ Fock(0..=n_max)`. When `delta ≫ g` and the
//! mode starts in vacuum, photons are only virtually exchanged and the atoms
//! evolve under an exchange Hamiltonian with rate `λ = g²/δ`:
//!
//! ```text
//! H_eff / λ = Σ_j |e⟩⟨e|_j + Σ_{i≠j} S⁺_j S⁻_i
//! ```
//!
//! That operator is block diagonal in the number of excited atoms. Writing
//! `A = (e^{-3iλt} - 1)/3` and `B = (e^{-3iλt} + 2)/3`, its propagator keeps
//! an excitation in place with amplitude `B` and hops it to each other atom
//! with amplitude `A`; the two-excitation block picks up an extra `e^{-iλt}`
//! and `|eee⟩` picks up `e^{-3iλt}`.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{integrate_schrodinger, phase, SquareOperator, StateVector, C64, ONE};

/// Atoms sent through the cavity in either protocol.
pub const N_ATOMS: usize = 3;

/// Basis size of the three extracted atoms.
pub const ATOM_DIM: usize = 1 << N_ATOMS;

/// Ratio `delta / g` from which the dispersive regime is assumed.
pub const DISPERSIVE_RATIO: f64 = 10.0;

/// Default RK4 steps per detuning period `2π/δ`.
pub const DEFAULT_STEPS_PER_PERIOD: usize = 64;

/// Interaction duration `λt = 2π/9` at which `|A| = |B| = 1/√3`.
pub fn magic_time() -> f64 {
    2.0 * PI / 9.0
}

/// Coupling and detuning of the three-atom cavity system.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CavityParams {
    /// Atom-cavity coupling, rad/s.
    pub g: f64,
    /// Detuning `ω₀ - ω`, rad/s.
    pub delta: f64,
    /// Photon number cutoff.
    pub n_max: usize,
}

impl CavityParams {
    pub fn new(g: f64, delta: f64, n_max: usize) -> Result<Self> {
        if !(g > 0.0 && g.is_finite()) {
            return Err(Error::InvalidParameter(format!("coupling g must be positive, got {g}")));
        }
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(Error::InvalidParameter(format!("detuning must be positive, got {delta}")));
        }
        if n_max < 3 {
            return Err(Error::InvalidParameter(format!("photon cutoff must be at least 3, got {n_max}")));
        }
        Ok(CavityParams { g, delta, n_max })
    }

    /// Parameters with `delta = ratio · g` and the default cutoff of 3.
    pub fn with_ratio(g: f64, ratio: f64) -> Result<Self> {
        Self::new(g, ratio * g, 3)
    }

    pub fn delta_over_g(&self) -> f64 {
        self.delta / self.g
    }

    pub fn is_dispersive(&self) -> bool {
        self.delta_over_g() >= DISPERSIVE_RATIO
    }

    /// Dimension of `atoms ⊗ Fock(0..=n_max)`.
    pub fn dim(&self) -> usize {
        ATOM_DIM * (self.n_max + 1)
    }

    /// Index of `|atoms; n⟩` in the full space.
    pub fn index(&self, atoms: usize, photons: usize) -> usize {
        atoms * (self.n_max + 1) + photons
    }
}

/// Effective exchange rate `λ = g²/δ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EffectiveParams {
    /// rad/s
    pub lambda: f64,
}

impl EffectiveParams {
    /// Dimensionless interaction strength after time `t`.
    pub fn lambda_t(&self, t: f64) -> f64 {
        self.lambda * t
    }

    /// Physical time needed to reach `lambda_t`.
    pub fn time_for(&self, lambda_t: f64) -> f64 {
        lambda_t / self.lambda
    }
}

pub fn lambda_from(params: &CavityParams) -> EffectiveParams {
    EffectiveParams { lambda: params.g * params.g / params.delta }
}

/// Closed-form amplitudes of the effective propagator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SectorCoefficients {
    /// Hop amplitude `(e^{-3iλt} - 1)/3`.
    pub a: C64,
    /// Stay amplitude `(e^{-3iλt} + 2)/3`.
    pub b: C64,
    /// `e^{-iλt}`, common factor of the two-excitation sector.
    pub phase_one: C64,
    /// `e^{-3iλt}`.
    pub phase_three: C64,
}

pub fn coeff_ab(lambda_t: f64) -> SectorCoefficients {
    let phase_three = phase(3.0 * lambda_t);
    SectorCoefficients {
        a: (phase_three - 1.0) / 3.0,
        b: (phase_three + 2.0) / 3.0,
        phase_one: phase(lambda_t),
        phase_three,
    }
}

fn popcount(x: usize) -> u32 {
    x.count_ones()
}

/// Bit of atom `j` (0-based, atom 0 most significant) in a three-atom index.
fn atom_bit(j: usize) -> usize {
    1 << (N_ATOMS - 1 - j)
}

/// `H_eff / λ` on the three extracted atoms.
pub fn build_effective_hamiltonian() -> SquareOperator {
    let mut h = DMatrix::<C64>::zeros(ATOM_DIM, ATOM_DIM);
    for x in 0..ATOM_DIM {
        h[(x, x)] = C64::from(popcount(x) as f64);
        for i in (0..N_ATOMS).filter(|&i| x & atom_bit(i) != 0) {
            for j in (0..N_ATOMS).filter(|&j| x & atom_bit(j) == 0) {
                // S⁺_j S⁻_i moves the excitation from i to j.
                h[(x ^ atom_bit(i) ^ atom_bit(j), x)] += ONE;
            }
        }
    }
    SquareOperator::hermitian(h).expect("exchange Hamiltonian is real symmetric")
}

/// Closed-form `exp(-i H_eff t)` at `λt = lambda_t`.
pub fn effective_propagator(lambda_t: f64) -> SquareOperator {
    let c = coeff_ab(lambda_t);
    let mut u = DMatrix::<C64>::zeros(ATOM_DIM, ATOM_DIM);
    for col in 0..ATOM_DIM {
        let k = popcount(col);
        let sector = match k {
            0 => ONE,
            1 => ONE,
            2 => c.phase_one,
            _ => c.phase_three,
        };
        for row in (0..ATOM_DIM).filter(|&r| popcount(r) == k) {
            let amp = match k {
                0 | 3 => ONE,
                _ if row == col => c.b,
                _ => c.a,
            };
            u[(row, col)] = sector * amp;
        }
    }
    SquareOperator::new(u)
}

/// Interaction-picture Hamiltonian at time `t`:
/// `g Σ_j (e^{-iδt} a† S⁻_j + e^{iδt} a S⁺_j)` over all three atoms.
pub fn build_full_hamiltonian(params: &CavityParams, t: f64) -> SquareOperator {
    let lowering = emission_operator(params);
    let coupling = C64::from_polar(params.g, -params.delta * t);
    let h = &lowering * coupling + lowering.adjoint() * coupling.conj();
    SquareOperator::hermitian(h).expect("sum of an operator and its adjoint")
}

/// `Σ_j a† S⁻_j`.
fn emission_operator(params: &CavityParams) -> DMatrix<C64> {
    let dim = params.dim();
    let mut m = DMatrix::<C64>::zeros(dim, dim);
    for x in 0..ATOM_DIM {
        for j in (0..N_ATOMS).filter(|&j| x & atom_bit(j) != 0) {
            for n in 0..params.n_max {
                let from = params.index(x, n);
                let to = params.index(x ^ atom_bit(j), n + 1);
                m[(to, from)] += C64::from(((n + 1) as f64).sqrt());
            }
        }
    }
    m
}

/// Atomic excitations plus photon number, diagonal on the full space.
pub fn total_excitation_operator(params: &CavityParams) -> SquareOperator {
    let dim = params.dim();
    let mut m = DMatrix::<C64>::zeros(dim, dim);
    for x in 0..ATOM_DIM {
        for n in 0..=params.n_max {
            let i = params.index(x, n);
            m[(i, i)] = C64::from(popcount(x) as f64 + n as f64);
        }
    }
    SquareOperator::hermitian(m).expect("real diagonal")
}

/// Worst-case deviation of the full dynamics from the effective propagator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DispersiveError {
    pub delta_over_g: f64,
    pub lambda_t: f64,
    /// Physical interaction time `λt·δ/g²`, seconds.
    pub interaction_time: f64,
    /// Smallest `|⟨U_eff x | P_vac ψ_x(T)⟩|²` over atomic basis states `x`.
    pub atomic_fidelity: f64,
    /// Largest probability of at least one photon at `T`.
    pub photon_leakage: f64,
    /// Atomic basis index (atom 1 most significant) attaining the fidelity.
    pub worst_fidelity_state: usize,
    pub worst_leakage_state: usize,
}

impl DispersiveError {
    pub fn infidelity(&self) -> f64 {
        1.0 - self.atomic_fidelity
    }
}

/// Integrates the full Hamiltonian from each `|x⟩ ⊗ |0⟩` for the time that
/// gives `lambda_t_target`, and compares against [`effective_propagator`].
///
/// Uses [`DEFAULT_STEPS_PER_PERIOD`] RK4 steps per detuning period.
pub fn dispersive_error(params: &CavityParams, lambda_t_target: f64) -> Result<DispersiveError> {
    dispersive_error_with(params, lambda_t_target, DEFAULT_STEPS_PER_PERIOD)
}

pub fn dispersive_error_with(
    params: &CavityParams,
    lambda_t_target: f64,
    steps_per_period: usize,
) -> Result<DispersiveError> {
    if steps_per_period == 0 {
        return Err(Error::InvalidParameter("steps per period must be positive".into()));
    }
    if !(lambda_t_target >= 0.0 && lambda_t_target.is_finite()) {
        return Err(Error::InvalidParameter(format!("λt must be non-negative, got {lambda_t_target}")));
    }
    let t_final = lambda_from(params).time_for(lambda_t_target);
    let dt = 2.0 * PI / params.delta / steps_per_period as f64;
    let predicted = effective_propagator(lambda_t_target);

    let lowering = emission_operator(params);
    let raising = lowering.adjoint();
    let hamiltonian = |t: f64| {
        let c = C64::from_polar(params.g, -params.delta * t);
        SquareOperator::hermitian(&lowering * c + &raising * c.conj()).expect("sum of an operator and its adjoint")
    };

    let per_state: Vec<(f64, f64)> = (0..ATOM_DIM)
        .into_par_iter()
        .map(|x| {
            let psi0 = StateVector::basis(params.dim(), params.index(x, 0));
            let psi = integrate_schrodinger(hamiltonian, &psi0, t_final, dt)?;
            let amps = psi.amplitudes();
            let overlap = (0..ATOM_DIM).map(|y| predicted.entry(y, x).conj() * amps[params.index(y, 0)]).sum::<C64>();
            let vacuum: f64 = (0..ATOM_DIM).map(|y| amps[params.index(y, 0)].norm_sqr()).sum();
            Ok((overlap.norm_sqr(), psi.norm_sqr() - vacuum))
        })
        .collect::<Result<_>>()?;

    let (worst_fidelity_state, &(atomic_fidelity, _)) =
        per_state.iter().enumerate().min_by(|a, b| a.1 .0.total_cmp(&b.1 .0)).expect("eight basis states");
    let (worst_leakage_state, &(_, photon_leakage)) =
        per_state.iter().enumerate().max_by(|a, b| a.1 .1.total_cmp(&b.1 .1)).expect("eight basis states");

    Ok(DispersiveError {
        delta_over_g: params.delta_over_g(),
        lambda_t: lambda_t_target,
        interaction_time: t_final,
        atomic_fidelity,
        photon_leakage: photon_leakage.max(0.0),
        worst_fidelity_state,
        worst_leakage_state,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{matrix_exponential, max_modulus, ZERO};

    const EGG: usize = 0b100;
    const GEG: usize = 0b010;
    const GGE: usize = 0b001;
    const EEG: usize = 0b110;
    const EGE: usize = 0b101;
    const GEE: usize = 0b011;

    #[test]
    fn lambda_at_operating_point() {
        let g = 2.0 * PI * 24e3;
        let p = CavityParams::with_ratio(g, 10.0).unwrap();
        let l = lambda_from(&p).lambda;
        assert!((l - 2.0 * PI * 2400.0).abs() < 1e-9);
        assert!(p.is_dispersive());

        assert_eq!(lambda_from(&CavityParams::new(1.0, 1.0, 3).unwrap()).lambda, 1.0);
        let doubled = lambda_from(&CavityParams::new(2.0 * g, 10.0 * g, 3).unwrap()).lambda;
        assert!((doubled / l - 4.0).abs() < 1e-12);
    }

    #[test]
    fn params_are_validated() {
        assert!(CavityParams::new(0.0, 1.0, 3).is_err());
        assert!(CavityParams::new(1.0, -1.0, 3).is_err());
        assert!(CavityParams::new(1.0, 1.0, 2).is_err());
        assert!(!CavityParams::with_ratio(1.0, 9.99).unwrap().is_dispersive());
    }

    #[test]
    fn coefficients_at_special_times() {
        let c = coeff_ab(0.0);
        assert!(c.a.norm() < 1e-15 && (c.b - 1.0).norm() < 1e-15);

        let c = coeff_ab(magic_time());
        let s = 1.0 / 3f64.sqrt();
        assert!((c.a.norm() - s).abs() < 1e-12);
        assert!((c.b.norm() - s).abs() < 1e-12);
        assert!((c.a.arg() + 5.0 * PI / 6.0).abs() < 1e-12);

        let c = coeff_ab(2.0 * PI / 3.0);
        assert!(c.a.norm() < 1e-12 && (c.b - 1.0).norm() < 1e-12);
    }

    #[test]
    fn magic_time_value() {
        assert!((magic_time() - 0.6981317007977318).abs() < 1e-15);
    }

    #[test]
    fn effective_hamiltonian_structure() {
        let h = build_effective_hamiltonian();
        assert_eq!(h.entry(0, 0), ZERO);
        assert_eq!(h.entry(0b111, 0b111), C64::from(3.0));
        // One-excitation block is the all-ones matrix.
        for &r in &[EGG, GEG, GGE] {
            for &c in &[EGG, GEG, GGE] {
                assert_eq!(h.entry(r, c), ONE);
            }
        }
        // Two-excitation block is 2I + (J - I).
        for &r in &[EEG, EGE, GEE] {
            for &c in &[EEG, EGE, GEE] {
                assert_eq!(h.entry(r, c), C64::from(if r == c { 2.0 } else { 1.0 }));
            }
        }
    }

    #[test]
    fn one_excitation_block_spectrum() {
        let h = build_effective_hamiltonian();
        let block = DMatrix::from_fn(3, 3, |r, c| {
            let idx = [EGG, GEG, GGE];
            h.entry(idx[r], idx[c]).re
        });
        let mut eig: Vec<f64> = block.symmetric_eigenvalues().iter().copied().collect();
        eig.sort_by(f64::total_cmp);
        assert!(eig[0].abs() < 1e-12 && eig[1].abs() < 1e-12 && (eig[2] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn closed_form_propagator_matches_exponential() {
        let h = build_effective_hamiltonian();
        for &lt in &[0.0, 0.3, magic_time(), 1.9, 5.0] {
            let closed = effective_propagator(lt);
            let numeric = matrix_exponential(&h, lt).unwrap();
            assert!(closed.max_abs_diff(&numeric) < 1e-12, "λt = {lt}");
        }
        assert!(effective_propagator(0.0).max_abs_diff(&SquareOperator::identity(8)) < 1e-15);
    }

    #[test]
    fn propagator_acts_like_sector_maps() {
        let lt = 0.37;
        let c = coeff_ab(lt);
        let u = effective_propagator(lt);
        let out = u.apply(&StateVector::basis(8, EGG)).unwrap();
        let a = out.amplitudes();
        assert!((a[EGG] - c.b).norm() < 1e-15);
        assert!((a[GEG] - c.a).norm() < 1e-15 && (a[GGE] - c.a).norm() < 1e-15);

        let out = u.apply(&StateVector::basis(8, EEG)).unwrap();
        let a = out.amplitudes();
        let p = c.phase_one;
        assert!((a[EEG] - p * c.b).norm() < 1e-15);
        assert!((a[GEE] - p * c.a).norm() < 1e-15 && (a[EGE] - p * c.a).norm() < 1e-15);

        let out = u.apply(&StateVector::basis(8, 0b111)).unwrap();
        assert!((out.amplitudes()[0b111] - c.phase_three).norm() < 1e-15);
    }

    #[test]
    fn full_hamiltonian_elements() {
        let p = CavityParams::new(0.7, 7.0, 3).unwrap();
        for &t in &[0.0, 0.41, 3.3] {
            let h = build_full_hamiltonian(&p, t);
            assert!(h.is_hermitian());
            assert_eq!(h.entry(p.index(0, 0), p.index(0, 0)), ZERO);
            let want = C64::from_polar(0.7, -7.0 * t);
            assert!((h.entry(p.index(0, 1), p.index(EGG, 0)) - want).norm() < 1e-15);
        }
    }

    #[test]
    fn full_hamiltonian_conserves_total_excitation() {
        let p = CavityParams::new(1.0, 5.0, 4).unwrap();
        let n = total_excitation_operator(&p);
        for &t in &[0.0, 0.2, 1.7] {
            let h = build_full_hamiltonian(&p, t);
            let comm = h.matrix() * n.matrix() - n.matrix() * h.matrix();
            assert!(max_modulus(comm.iter()) < 1e-12);
        }
    }

    #[test]
    fn dispersive_error_regression_at_ratio_ten() {
        // Anchors from an independent adaptive RK45 integration (rtol 1e-10).
        let p = CavityParams::with_ratio(1.0, 10.0).unwrap();
        let e = dispersive_error(&p, magic_time()).unwrap();
        assert!((e.infidelity() - 0.058698514592513).abs() < 1e-5, "{e:?}");
        assert!((e.photon_leakage - 0.057806583219099).abs() < 1e-5, "{e:?}");
        assert_eq!(e.worst_leakage_state.count_ones(), 2);
    }

    #[test]
    fn dispersive_error_is_scale_free() {
        let a = dispersive_error(&CavityParams::with_ratio(1.0, 5.0).unwrap(), magic_time()).unwrap();
        let b = dispersive_error(&CavityParams::with_ratio(2.0 * PI * 24e3, 5.0).unwrap(), magic_time()).unwrap();
        assert!((a.atomic_fidelity - b.atomic_fidelity).abs() < 1e-9);
        assert!((a.photon_leakage - b.photon_leakage).abs() < 1e-9);
    }

    #[test]
    fn zero_duration_has_no_error() {
        let e = dispersive_error(&CavityParams::with_ratio(1.0, 5.0).unwrap(), 0.0).unwrap();
        assert!((e.atomic_fidelity - 1.0).abs() < 1e-15 && e.photon_leakage < 1e-15);
    }

    #[test]
    fn sector_identities_hold() {
        for k in 0..50 {
            let lt = 0.13 * k as f64;
            let c = coeff_ab(lt);
            assert!((c.b - c.a - 1.0).norm() < 1e-15);
            assert!((c.b + c.a * 2.0 - c.phase_three).norm() < 1e-12);
        }
    }
}

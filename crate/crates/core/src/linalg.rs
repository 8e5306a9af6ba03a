//! Small dense complex linear algebra.
//!
//! Everything here works on explicit `dim × dim` matrices. The Hilbert spaces
//! in this crate are at most a few thousand dimensions (a 13-qubit register in
//! the brute-force oracle), so no sparse storage is needed.
//!
//! Qubit ordering: in a register of `n` qubits, qubit 0 is the most
//! significant bit of the basis index, and bit value 1 means the atom is
//! excited. `|e g g⟩` is therefore index `0b100`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Absolute tolerance on `|H - H†|` for an operator to count as Hermitian.
pub const HERMITIAN_TOL: f64 = 1e-12;

/// Norm drift at which time integration is declared a numerical failure.
pub const NORM_DRIFT_TOL: f64 = 1e-6;

pub(crate) const ZERO: C64 = C64::new(0.0, 0.0);
pub(crate) const ONE: C64 = C64::new(1.0, 0.0);

/// `e^{-iθ}`.
pub fn phase(theta: f64) -> C64 {
    C64::from_polar(1.0, -theta)
}

/// A ket in a finite-dimensional Hilbert space.
///
/// Nothing forces normalization; physical states are normalized by the code
/// that creates them and intermediates say so where they are not.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector(DVector<C64>);

impl StateVector {
    pub fn from_vec(amplitudes: Vec<C64>) -> Self {
        StateVector(DVector::from_vec(amplitudes))
    }

    pub fn zeros(dim: usize) -> Self {
        StateVector(DVector::zeros(dim))
    }

    /// Computational basis state `|index⟩`.
    pub fn basis(dim: usize, index: usize) -> Self {
        let mut v = DVector::zeros(dim);
        v[index] = ONE;
        StateVector(v)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn amplitudes(&self) -> &[C64] {
        self.0.as_slice()
    }

    pub fn as_vector(&self) -> &DVector<C64> {
        &self.0
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.0.iter().map(|a| a.norm_sqr()).sum()
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &StateVector) -> C64 {
        self.0.dotc(&other.0)
    }

    pub fn normalized(&self) -> StateVector {
        StateVector(&self.0 / C64::from(self.norm()))
    }

    /// Largest entrywise distance to `other`.
    pub fn max_abs_diff(&self, other: &StateVector) -> f64 {
        max_modulus((&self.0 - &other.0).iter())
    }

    /// Kronecker product, `self` on the more significant qubits.
    pub fn kron(&self, other: &StateVector) -> StateVector {
        StateVector(self.0.kronecker(&other.0))
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|a| a.re.is_finite() && a.im.is_finite())
    }
}

impl From<DVector<C64>> for StateVector {
    fn from(v: DVector<C64>) -> Self {
        StateVector(v)
    }
}

/// A square complex matrix, optionally certified Hermitian.
#[derive(Debug, Clone, PartialEq)]
pub struct SquareOperator {
    matrix: DMatrix<C64>,
    hermitian: bool,
}

impl SquareOperator {
    /// Wraps a general square matrix. Panics if `matrix` is not square.
    pub fn new(matrix: DMatrix<C64>) -> Self {
        assert!(matrix.is_square(), "operator must be square");
        SquareOperator { matrix, hermitian: false }
    }

    /// Wraps `matrix` after checking it is Hermitian within [`HERMITIAN_TOL`].
    pub fn hermitian(matrix: DMatrix<C64>) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::DimensionMismatch { expected: matrix.nrows(), found: matrix.ncols() });
        }
        let deviation = hermitian_deviation(&matrix);
        if deviation > HERMITIAN_TOL {
            return Err(Error::NotHermitian { deviation });
        }
        Ok(SquareOperator { matrix, hermitian: true })
    }

    pub fn identity(dim: usize) -> Self {
        SquareOperator { matrix: DMatrix::identity(dim, dim), hermitian: true }
    }

    pub fn zeros(dim: usize) -> Self {
        SquareOperator { matrix: DMatrix::zeros(dim, dim), hermitian: true }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn is_hermitian(&self) -> bool {
        self.hermitian
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> DMatrix<C64> {
        self.matrix
    }

    pub fn entry(&self, row: usize, col: usize) -> C64 {
        self.matrix[(row, col)]
    }

    pub fn adjoint(&self) -> SquareOperator {
        SquareOperator { matrix: self.matrix.adjoint(), hermitian: self.hermitian }
    }

    pub fn compose(&self, rhs: &SquareOperator) -> SquareOperator {
        SquareOperator::new(&self.matrix * &rhs.matrix)
    }

    pub fn apply(&self, psi: &StateVector) -> Result<StateVector> {
        if psi.dim() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: psi.dim() });
        }
        Ok(StateVector(&self.matrix * &psi.0))
    }

    /// Largest entrywise distance to `other`.
    pub fn max_abs_diff(&self, other: &SquareOperator) -> f64 {
        max_modulus((&self.matrix - &other.matrix).iter())
    }

    /// Largest entry of `|U†U - I|`.
    pub fn unitarity_defect(&self) -> f64 {
        let n = self.dim();
        max_modulus((self.matrix.adjoint() * &self.matrix - DMatrix::<C64>::identity(n, n)).iter())
    }
}

fn hermitian_deviation(m: &DMatrix<C64>) -> f64 {
    max_modulus((m - m.adjoint()).iter())
}

/// Largest `|z|` over the entries, 0 when empty.
pub fn max_modulus<'a>(entries: impl IntoIterator<Item = &'a C64>) -> f64 {
    entries.into_iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// `U = exp(-i·H·t)` for Hermitian `H`, via the spectral decomposition
/// `H = V diag(ε) V†`, so `U = V diag(e^{-iεt}) V†`.
///
/// The flag on `h` is not trusted; hermiticity is re-checked.
pub fn matrix_exponential(h: &SquareOperator, t: f64) -> Result<SquareOperator> {
    let deviation = hermitian_deviation(&h.matrix);
    if deviation > HERMITIAN_TOL {
        return Err(Error::NotHermitian { deviation });
    }
    // Symmetrize so the eigensolver sees an exactly Hermitian matrix.
    let sym = (&h.matrix + h.matrix.adjoint()) * C64::from(0.5);
    let eig = SymmetricEigen::new(sym);
    let v = &eig.eigenvectors;
    let mut scaled = v.clone();
    for (k, &eps) in eig.eigenvalues.iter().enumerate() {
        let ph = phase(eps * t);
        scaled.column_mut(k).iter_mut().for_each(|x| *x *= ph);
    }
    Ok(SquareOperator::new(scaled * v.adjoint()))
}

/// Integrates `i dψ/dt = H(t) ψ` from 0 to `t_final` with classical
/// fourth-order Runge-Kutta.
///
/// The step is shrunk from `dt` so that an integer number of steps lands
/// exactly on `t_final`. The norm is monitored but never corrected; drift
/// beyond [`NORM_DRIFT_TOL`] aborts with [`Error::NormDrift`].
pub fn integrate_schrodinger<F>(hamiltonian: F, psi0: &StateVector, t_final: f64, dt: f64) -> Result<StateVector>
where
    F: Fn(f64) -> SquareOperator,
{
    if dt <= 0.0 || !dt.is_finite() {
        return Err(Error::InvalidParameter(format!("time step must be positive, got {dt}")));
    }
    if t_final < 0.0 || !t_final.is_finite() {
        return Err(Error::InvalidParameter(format!("final time must be non-negative, got {t_final}")));
    }
    let steps = (t_final / dt).ceil().max(if t_final > 0.0 { 1.0 } else { 0.0 }) as usize;
    if steps == 0 {
        return Ok(psi0.clone());
    }
    let h = t_final / steps as f64;
    let norm0 = psi0.norm();
    let minus_i = C64::new(0.0, -1.0);

    let deriv = |t: f64, y: &DVector<C64>| -> Result<DVector<C64>> {
        let op = hamiltonian(t);
        if !op.is_hermitian() {
            return Err(Error::NotHermitian { deviation: hermitian_deviation(&op.matrix) });
        }
        if op.dim() != y.len() {
            return Err(Error::DimensionMismatch { expected: y.len(), found: op.dim() });
        }
        Ok((&op.matrix * y) * minus_i)
    };

    let mut y = psi0.0.clone();
    let half = C64::from(h / 2.0);
    let full = C64::from(h);
    let sixth = C64::from(h / 6.0);
    for step in 0..steps {
        let t = step as f64 * h;
        let k1 = deriv(t, &y)?;
        let k2 = deriv(t + h / 2.0, &(&y + &k1 * half))?;
        let k3 = deriv(t + h / 2.0, &(&y + &k2 * half))?;
        let k4 = deriv(t + h, &(&y + &k3 * full))?;
        y += (k1 + k2 * C64::from(2.0) + k3 * C64::from(2.0) + k4) * sixth;

        let drift = (y.norm() - norm0).abs();
        if drift > NORM_DRIFT_TOL || !drift.is_finite() {
            return Err(Error::NormDrift { drift, time: t + h });
        }
    }
    Ok(StateVector(y))
}

/// Lifts a `k`-qubit operator onto `total_qubits`, acting on `positions`
/// (listed most significant first) and as the identity elsewhere.
pub fn embed_operator(u: &SquareOperator, positions: &[usize], total_qubits: usize) -> Result<SquareOperator> {
    let k = positions.len();
    if u.dim() != 1 << k {
        return Err(Error::DimensionMismatch { expected: 1 << k, found: u.dim() });
    }
    let mut seen = vec![false; total_qubits];
    for &p in positions {
        if p >= total_qubits {
            return Err(Error::InvalidPositions(format!("qubit {p} out of range for {total_qubits} qubits")));
        }
        if std::mem::replace(&mut seen[p], true) {
            return Err(Error::InvalidPositions(format!("qubit {p} listed twice")));
        }
    }

    let dim = 1usize << total_qubits;
    let masks: Vec<usize> = positions.iter().map(|&p| 1 << (total_qubits - 1 - p)).collect();
    let all: usize = masks.iter().sum();
    let sub_index = |x: usize| masks.iter().fold(0usize, |acc, &m| (acc << 1) | usize::from(x & m != 0));
    let scatter = |rest: usize, sub: usize| {
        masks.iter().enumerate().fold(rest, |acc, (i, &m)| if sub & (1 << (k - 1 - i)) != 0 { acc | m } else { acc })
    };

    let mut out = DMatrix::<C64>::zeros(dim, dim);
    for col in 0..dim {
        let rest = col & !all;
        let sc = sub_index(col);
        for sr in 0..(1 << k) {
            let val = u.matrix[(sr, sc)];
            if val != ZERO {
                out[(scatter(rest, sr), col)] = val;
            }
        }
    }
    Ok(SquareOperator { matrix: out, hermitian: u.hermitian })
}

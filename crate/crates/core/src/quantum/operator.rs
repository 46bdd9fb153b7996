use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use super::state::PureState;
use crate::{Error, Result};

const HERMITIAN_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

/// 2×2 matrix of a single Pauli operator.
pub fn pauli(p: Pauli) -> DMatrix<Complex64> {
    let o = Complex64::new(0.0, 0.0);
    let l = Complex64::new(1.0, 0.0);
    let i = Complex64::new(0.0, 1.0);
    let entries = match p {
        Pauli::I => [l, o, o, l],
        Pauli::X => [o, l, l, o],
        Pauli::Y => [o, -i, i, o],
        Pauli::Z => [l, o, o, -l],
    };
    DMatrix::from_row_slice(2, 2, &entries)
}

/// `I ⊗ … ⊗ P ⊗ … ⊗ I` with `P` acting on `site` (0-based, leftmost first).
pub fn site_operator(p: Pauli, site: usize, n_spins: usize) -> DMatrix<Complex64> {
    let id = pauli(Pauli::I);
    let mut out = DMatrix::from_element(1, 1, Complex64::new(1.0, 0.0));
    for k in 0..n_spins {
        let factor = if k == site { pauli(p) } else { id.clone() };
        out = out.kronecker(&factor);
    }
    out
}

/// `Σₙ σᶻₙ` as a Hermitian operator.
pub fn total_magnetization(n_spins: usize) -> HermitianOperator {
    let dim = 1 << n_spins;
    let mut m = DMatrix::<Complex64>::zeros(dim, dim);
    for site in 0..n_spins {
        m += site_operator(Pauli::Z, site, n_spins);
    }
    HermitianOperator { matrix: m }
}

/// Expected number of excitations (`1` bits) in `state`.
pub fn excitation_number(state: &PureState) -> f64 {
    state
        .amplitudes()
        .iter()
        .enumerate()
        .map(|(k, a)| a.norm_sqr() * k.count_ones() as f64)
        .sum()
}

/// A square complex matrix that equals its conjugate transpose.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianOperator {
    matrix: DMatrix<Complex64>,
}

impl HermitianOperator {
    /// Validates Hermiticity within `1e-12` (scaled by the largest entry
    /// when that exceeds one) and stores the exactly symmetrised matrix.
    pub fn new(matrix: DMatrix<Complex64>) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::DimensionMismatch {
                expected: matrix.nrows(),
                actual: matrix.ncols(),
            });
        }
        if matrix.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite("operator"));
        }
        let adjoint = matrix.adjoint();
        let deviation = matrix
            .iter()
            .zip(adjoint.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        let scale = matrix.iter().map(|z| z.norm()).fold(1.0, f64::max);
        if deviation > HERMITIAN_TOL * scale {
            return Err(Error::NotHermitian(deviation));
        }
        let matrix = (&matrix + adjoint) * Complex64::new(0.5, 0.0);
        Ok(Self { matrix })
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn expectation(&self, state: &PureState) -> Result<f64> {
        check_dim(self.dim(), state.dim())?;
        let v = state.as_vector();
        Ok(v.dotc(&(&self.matrix * v)).re)
    }
}

/// Precomputed `exp(-i H dt)` from a Hermitian eigendecomposition
/// `H = V Λ V†`.
#[derive(Debug, Clone)]
pub struct Propagator {
    unitary: DMatrix<Complex64>,
}

impl Propagator {
    pub fn new(hamiltonian: &HermitianOperator, dt: f64) -> Self {
        let eig = SymmetricEigen::new(hamiltonian.matrix.clone());
        let v = eig.eigenvectors;
        let phases = DVector::from_iterator(
            eig.eigenvalues.len(),
            eig.eigenvalues
                .iter()
                .map(|&lambda| Complex64::from_polar(1.0, -lambda * dt)),
        );
        let mut scaled = v.clone();
        for (mut col, phase) in scaled.column_iter_mut().zip(phases.iter()) {
            col *= *phase;
        }
        Self {
            unitary: scaled * v.adjoint(),
        }
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.unitary
    }

    pub fn dim(&self) -> usize {
        self.unitary.nrows()
    }

    /// `U|ψ⟩`, renormalised to absorb floating-point drift.
    pub fn apply(&self, state: &PureState) -> Result<PureState> {
        check_dim(self.dim(), state.dim())?;
        Ok(PureState::renormalized(&self.unitary * state.as_vector()))
    }

    /// `U†|ψ⟩`.
    pub fn apply_adjoint(&self, state: &PureState) -> Result<PureState> {
        check_dim(self.dim(), state.dim())?;
        Ok(PureState::renormalized(self.unitary.adjoint() * state.as_vector()))
    }
}

/// `exp(-i H dt)|ψ⟩`.
pub fn evolve(state: &PureState, hamiltonian: &HermitianOperator, dt: f64) -> Result<PureState> {
    check_dim(hamiltonian.dim(), state.dim())?;
    if !dt.is_finite() {
        return Err(Error::NonFinite("evolution time"));
    }
    Propagator::new(hamiltonian, dt).apply(state)
}

fn check_dim(expected: usize, actual: usize) -> Result<()> {
    if expected != actual {
        return Err(Error::DimensionMismatch { expected, actual });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantum::{make_basis_state, make_w_state};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn random_hermitian(dim: usize, rng: &mut ChaCha8Rng) -> HermitianOperator {
        let a = DMatrix::from_fn(dim, dim, |_, _| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
        HermitianOperator::new((&a + a.adjoint()) * c(0.5, 0.0)).unwrap()
    }

    fn random_state(dim: usize, rng: &mut ChaCha8Rng) -> PureState {
        let v = DVector::from_fn(dim, |_, _| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
        PureState::renormalized(v)
    }

    /// Six-term Taylor series of `exp(-i H dt)` applied to `ψ`.
    fn taylor_oracle(h: &DMatrix<Complex64>, psi: &DVector<Complex64>, dt: f64) -> DVector<Complex64> {
        let mut term = psi.clone();
        let mut sum = psi.clone();
        for k in 1..6 {
            term = (h * term) * c(0.0, -dt / k as f64);
            sum += &term;
        }
        sum
    }

    #[test]
    fn zero_hamiltonian_is_identity() {
        let h = HermitianOperator::new(DMatrix::zeros(4, 4)).unwrap();
        let psi = make_w_state(2).unwrap();
        let out = evolve(&psi, &h, 3.0).unwrap();
        assert!((out.as_vector() - psi.as_vector()).norm() < 1e-15);
    }

    #[test]
    fn single_spin_phase_evolution() {
        let b = 0.8;
        let t = 1.7;
        let h = HermitianOperator::new(DMatrix::from_row_slice(2, 2, &[c(b, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(-b, 0.0)]))
            .unwrap();
        let plus = PureState::from_amplitudes(vec![c(1.0, 0.0), c(1.0, 0.0)].into_iter().map(|z| z / 2f64.sqrt()).collect())
            .unwrap();
        let out = evolve(&plus, &h, t).unwrap();
        let s = 2f64.sqrt();
        assert!((out.amplitudes()[0] - Complex64::from_polar(1.0, -b * t) / s).norm() < 1e-12);
        assert!((out.amplitudes()[1] - Complex64::from_polar(1.0, b * t) / s).norm() < 1e-12);
    }

    #[test]
    fn matches_taylor_oracle_for_short_times() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let h = random_hermitian(4, &mut rng);
            let psi = random_state(4, &mut rng);
            let out = evolve(&psi, &h, 0.01).unwrap();
            let oracle = taylor_oracle(h.matrix(), psi.as_vector(), 0.01);
            assert!((out.as_vector() - oracle).norm() < 1e-8);
        }
    }

    #[test]
    fn rejects_non_hermitian() {
        let m = DMatrix::from_row_slice(2, 2, &[c(0.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]);
        assert!(matches!(HermitianOperator::new(m), Err(Error::NotHermitian(_))));
    }

    #[test]
    fn dimension_mismatch_on_evolve() {
        let h = HermitianOperator::new(DMatrix::zeros(4, 4)).unwrap();
        let psi = make_basis_state(1, 0).unwrap();
        assert!(matches!(evolve(&psi, &h, 1.0), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn site_operator_matches_bit_convention() {
        // Z on the leftmost spin of two: +1 on |00>,|01>, -1 on |10>,|11>.
        let z0 = site_operator(Pauli::Z, 0, 2);
        let diag: Vec<f64> = (0..4).map(|k| z0[(k, k)].re).collect();
        assert_eq!(diag, vec![1.0, 1.0, -1.0, -1.0]);
    }

    #[test]
    fn magnetization_and_excitations_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let psi = random_state(8, &mut rng);
        let mz = total_magnetization(3).expectation(&psi).unwrap();
        assert!((mz - (3.0 - 2.0 * excitation_number(&psi))).abs() < 1e-12);
    }
}

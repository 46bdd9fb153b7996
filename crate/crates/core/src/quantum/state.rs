use nalgebra::DVector;
use num_complex::Complex64;

use crate::{Error, Result};

const NORM_TOL: f64 = 1e-9;

/// Unit-norm state vector of dimension `2^N`.
#[derive(Debug, Clone, PartialEq)]
pub struct PureState {
    amplitudes: DVector<Complex64>,
}

impl PureState {
    /// Accepts amplitudes whose norm is 1 within `1e-9`.
    pub fn from_amplitudes(amplitudes: Vec<Complex64>) -> Result<Self> {
        let v = DVector::from_vec(amplitudes);
        check_power_of_two(v.len())?;
        let norm = v.norm();
        if !norm.is_finite() {
            return Err(Error::NonFinite("state amplitudes"));
        }
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(Error::NotNormalized(norm));
        }
        Ok(Self { amplitudes: v })
    }

    /// Scales an arbitrary non-zero vector to unit norm.
    pub fn normalize(v: DVector<Complex64>) -> Result<Self> {
        check_power_of_two(v.len())?;
        let norm = v.norm();
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(Error::NotNormalized(norm));
        }
        Ok(Self { amplitudes: v / Complex64::new(norm, 0.0) })
    }

    /// Divides by the norm; callers guarantee the input came from a
    /// unitary image of a valid state.
    pub(crate) fn renormalized(v: DVector<Complex64>) -> Self {
        let norm = v.norm();
        Self { amplitudes: v / Complex64::new(norm, 0.0) }
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        self.amplitudes.as_slice()
    }

    pub fn as_vector(&self) -> &DVector<Complex64> {
        &self.amplitudes
    }

    pub(crate) fn amplitudes_mut(&mut self) -> &mut [Complex64] {
        self.amplitudes.as_mut_slice()
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn n_spins(&self) -> usize {
        self.dim().trailing_zeros() as usize
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.norm()
    }

    /// `e^{iθ}|ψ⟩`.
    pub fn with_global_phase(&self, theta: f64) -> Self {
        Self { amplitudes: &self.amplitudes * Complex64::from_polar(1.0, theta) }
    }

    pub fn inner(&self, other: &PureState) -> Result<Complex64> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), actual: other.dim() });
        }
        Ok(self.amplitudes.dotc(&other.amplitudes))
    }
}

fn check_power_of_two(len: usize) -> Result<()> {
    if len == 0 || !len.is_power_of_two() {
        return Err(Error::InvalidConfig(format!("state dimension {len} is not a power of two")));
    }
    Ok(())
}

/// `|index⟩` in the computational basis of `n_spins` qubits.
pub fn make_basis_state(n_spins: usize, index: usize) -> Result<PureState> {
    let dim = 1usize << n_spins;
    if index >= dim {
        return Err(Error::IndexOutOfRange { index, dim });
    }
    let mut v = DVector::zeros(dim);
    v[index] = Complex64::new(1.0, 0.0);
    Ok(PureState { amplitudes: v })
}

/// Equal superposition of all single-excitation basis states.
pub fn make_w_state(n_spins: usize) -> Result<PureState> {
    if n_spins == 0 {
        return Err(Error::InvalidConfig("W state needs at least one spin".into()));
    }
    let dim = 1usize << n_spins;
    let amp = Complex64::new(1.0 / (n_spins as f64).sqrt(), 0.0);
    let mut v = DVector::zeros(dim);
    for n in 0..n_spins {
        v[1 << n] = amp;
    }
    Ok(PureState { amplitudes: v })
}

/// `|⟨b|a⟩|²`, clamped to `[0, 1]`.
pub fn fidelity(a: &PureState, b: &PureState) -> Result<f64> {
    Ok(b.inner(a)?.norm_sqr().clamp(0.0, 1.0))
}

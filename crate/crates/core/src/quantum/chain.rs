use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::operator::{site_operator, HermitianOperator, Pauli};
use crate::{Error, Result};

/// Largest supported chain; keeps the state dimension at or below 256.
pub const MAX_SPINS: usize = 8;

/// Physical parameters of the chain (ħ = 1).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpinChainSpec {
    pub n_spins: usize,
    pub coupling: f64,
    pub field_on_strength: f64,
    /// Standard deviation of the additive field noise, as a fraction of
    /// `field_on_strength`.
    pub noise_level: f64,
    /// Evolution time per environment step.
    pub dt: f64,
}

impl Default for SpinChainSpec {
    fn default() -> Self {
        Self {
            n_spins: 3,
            coupling: 1.0,
            field_on_strength: 5.0,
            noise_level: 0.05,
            dt: 1.0,
        }
    }
}

impl SpinChainSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_spins < 1 || self.n_spins > MAX_SPINS {
            return Err(Error::InvalidConfig(format!(
                "n_spins must be in [1, {MAX_SPINS}], got {}",
                self.n_spins
            )));
        }
        if !self.coupling.is_finite() {
            return Err(Error::InvalidConfig("coupling must be finite".into()));
        }
        if !self.field_on_strength.is_finite() {
            return Err(Error::InvalidConfig("field_on_strength must be finite".into()));
        }
        if !(0.0..=1.0).contains(&self.noise_level) {
            return Err(Error::InvalidConfig(format!(
                "noise_level must be in [0, 1], got {}",
                self.noise_level
            )));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidConfig(format!("dt must be > 0, got {}", self.dt)));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        1 << self.n_spins
    }

    /// Noise standard deviation applied to each local field.
    pub fn noise_std(&self) -> f64 {
        self.noise_level * self.field_on_strength
    }
}

/// Local z-field strengths `B_n`, one per spin.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldConfig(Vec<f64>);

impl FieldConfig {
    pub fn new(fields: Vec<f64>) -> Result<Self> {
        if fields.iter().any(|b| !b.is_finite()) {
            return Err(Error::NonFinite("field configuration"));
        }
        Ok(Self(fields))
    }

    pub fn zeros(n_spins: usize) -> Self {
        Self(vec![0.0; n_spins])
    }

    /// Fields for an on/off mask: bit `n` (0-based from spin 1) switches
    /// spin `n + 1` to `strength`.
    pub fn from_mask(mask: u32, n_spins: usize, strength: f64) -> Self {
        Self(
            (0..n_spins)
                .map(|n| if mask >> n & 1 == 1 { strength } else { 0.0 })
                .collect(),
        )
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// `H = (J/2) Σ_{n<N} (XₙXₙ₊₁ + YₙYₙ₊₁) + Σₙ Bₙ Zₙ`, open boundaries.
pub fn build_hamiltonian(spec: &SpinChainSpec, fields: &FieldConfig) -> Result<HermitianOperator> {
    let n = spec.n_spins;
    if fields.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: fields.len(),
        });
    }
    let dim = spec.dim();
    let mut h = DMatrix::<Complex64>::zeros(dim, dim);
    let half_j = Complex64::new(spec.coupling / 2.0, 0.0);
    for site in 0..n.saturating_sub(1) {
        let xx = site_operator(Pauli::X, site, n) * site_operator(Pauli::X, site + 1, n);
        let yy = site_operator(Pauli::Y, site, n) * site_operator(Pauli::Y, site + 1, n);
        h += (xx + yy) * half_j;
    }
    for (site, &b) in fields.values().iter().enumerate() {
        if b != 0.0 {
            h += site_operator(Pauli::Z, site, n) * Complex64::new(b, 0.0);
        }
    }
    HermitianOperator::new(h)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(n: usize, j: f64) -> SpinChainSpec {
        SpinChainSpec {
            n_spins: n,
            coupling: j,
            ..Default::default()
        }
    }

    #[test]
    fn single_spin_is_diagonal_field() {
        let h = build_hamiltonian(&spec(1, 1.0), &FieldConfig::new(vec![0.7]).unwrap()).unwrap();
        let m = h.matrix();
        assert_eq!(m[(0, 0)], Complex64::new(0.7, 0.0));
        assert_eq!(m[(1, 1)], Complex64::new(-0.7, 0.0));
        assert_eq!(m[(0, 1)], Complex64::new(0.0, 0.0));
    }

    #[test]
    fn two_spin_hopping_term() {
        let h = build_hamiltonian(&spec(2, 1.0), &FieldConfig::zeros(2)).unwrap();
        let m = h.matrix();
        for r in 0..4 {
            for c in 0..4 {
                let expected = if (r, c) == (1, 2) || (r, c) == (2, 1) { 1.0 } else { 0.0 };
                assert!((m[(r, c)] - Complex64::new(expected, 0.0)).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn zero_coupling_zero_fields_is_zero() {
        for n in 1..=4 {
            let h = build_hamiltonian(&spec(n, 0.0), &FieldConfig::zeros(n)).unwrap();
            assert!(h.matrix().iter().all(|z| z.norm() == 0.0));
        }
    }

    #[test]
    fn field_length_mismatch() {
        let err = build_hamiltonian(&spec(3, 1.0), &FieldConfig::zeros(2)).unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch { expected: 3, actual: 2 }));
    }

    #[test]
    fn spec_validation() {
        assert!(spec(0, 1.0).validate().is_err());
        assert!(spec(9, 1.0).validate().is_err());
        assert!(SpinChainSpec { noise_level: 1.5, ..Default::default() }.validate().is_err());
        assert!(SpinChainSpec { dt: 0.0, ..Default::default() }.validate().is_err());
        assert!(SpinChainSpec::default().validate().is_ok());
    }

    #[test]
    fn mask_to_fields() {
        let f = FieldConfig::from_mask(0b101, 3, 5.0);
        assert_eq!(f.values(), &[5.0, 0.0, 5.0]);
    }
}

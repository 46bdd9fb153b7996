use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::chain::{FieldConfig, SpinChainSpec};
use super::state::PureState;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    None,
    BitFlip,
    Depolarizing,
    PhaseFlip,
}

impl NoiseKind {
    pub const CHANNELS: [NoiseKind; 3] = [NoiseKind::BitFlip, NoiseKind::Depolarizing, NoiseKind::PhaseFlip];

    pub fn name(self) -> &'static str {
        match self {
            NoiseKind::None => "none",
            NoiseKind::BitFlip => "bit_flip",
            NoiseKind::Depolarizing => "depolarizing",
            NoiseKind::PhaseFlip => "phase_flip",
        }
    }
}

/// Per-qubit Pauli channel applied once per environment step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseChannelSpec {
    pub kind: NoiseKind,
    pub probability: f64,
}

impl Default for NoiseChannelSpec {
    fn default() -> Self {
        Self::none()
    }
}

impl NoiseChannelSpec {
    pub fn none() -> Self {
        Self { kind: NoiseKind::None, probability: 0.0 }
    }

    pub fn new(kind: NoiseKind, probability: f64) -> Result<Self> {
        let spec = Self { kind, probability };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.probability) {
            return Err(Error::InvalidConfig(format!(
                "channel probability must be in [0, 1], got {}",
                self.probability
            )));
        }
        Ok(())
    }
}

/// Adds independent `N(0, (noise_level · field_on_strength)²)` samples to
/// every field. One normal draw is consumed per spin regardless of the
/// noise level, so equal seeds give common random numbers across levels.
pub fn perturb_fields<R: Rng + ?Sized>(fields: &FieldConfig, spec: &SpinChainSpec, rng: &mut R) -> FieldConfig {
    let std = spec.noise_std();
    let perturbed = fields
        .values()
        .iter()
        .map(|&b| {
            let z: f64 = StandardNormal.sample(rng);
            if std == 0.0 { b } else { b + std * z }
        })
        .collect();
    FieldConfig::new(perturbed).expect("finite fields plus finite noise")
}

/// Quantum-trajectory sampling of the channel on a pure state.
///
/// Each qubit draws two uniforms (error?, which Pauli?) whatever the
/// channel, keeping random streams aligned across probabilities.
pub fn apply_noise_channel<R: Rng + ?Sized>(state: &PureState, channel: &NoiseChannelSpec, rng: &mut R) -> PureState {
    let mut out = state.clone();
    if channel.kind == NoiseKind::None {
        return out;
    }
    let n = state.n_spins();
    for site in 0..n {
        let hit = rng.random::<f64>() < channel.probability;
        let which = rng.random_range(0..3u8);
        if !hit {
            continue;
        }
        let bit = 1usize << (n - 1 - site);
        match channel.kind {
            NoiseKind::BitFlip => apply_x(&mut out, bit),
            NoiseKind::PhaseFlip => apply_z(&mut out, bit),
            NoiseKind::Depolarizing => match which {
                0 => apply_x(&mut out, bit),
                1 => apply_y(&mut out, bit),
                _ => apply_z(&mut out, bit),
            },
            NoiseKind::None => unreachable!(),
        }
    }
    out
}

fn apply_x(state: &mut PureState, bit: usize) {
    let amps = state.amplitudes_mut();
    for k in 0..amps.len() {
        if k & bit == 0 {
            amps.swap(k, k | bit);
        }
    }
}

fn apply_z(state: &mut PureState, bit: usize) {
    for (k, a) in state.amplitudes_mut().iter_mut().enumerate() {
        if k & bit != 0 {
            *a = -*a;
        }
    }
}

// Y|0⟩ = i|1⟩, Y|1⟩ = -i|0⟩
fn apply_y(state: &mut PureState, bit: usize) {
    let i = Complex64::new(0.0, 1.0);
    let amps = state.amplitudes_mut();
    for k in 0..amps.len() {
        if k & bit == 0 {
            let a0 = amps[k];
            let a1 = amps[k | bit];
            amps[k] = -i * a1;
            amps[k | bit] = i * a0;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantum::{fidelity, make_basis_state, make_w_state, pauli, site_operator, Pauli};
    use nalgebra::DVector;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_noise_level_is_exact() {
        let spec = SpinChainSpec { noise_level: 0.0, ..Default::default() };
        let f = FieldConfig::new(vec![5.0, 0.0, 5.0]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(perturb_fields(&f, &spec, &mut rng), f);
    }

    #[test]
    fn field_noise_std_matches_parameterization() {
        let spec = SpinChainSpec { n_spins: 1, noise_level: 0.05, field_on_strength: 5.0, ..Default::default() };
        let base = FieldConfig::new(vec![5.0]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let draws: Vec<f64> = (0..100_000).map(|_| perturb_fields(&base, &spec, &mut rng).values()[0] - 5.0).collect();
        let mean = draws.iter().sum::<f64>() / draws.len() as f64;
        let var = draws.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (draws.len() - 1) as f64;
        assert!((var.sqrt() - 0.25).abs() / 0.25 < 0.02, "std = {}", var.sqrt());
    }

    #[test]
    fn perturbation_is_seed_deterministic() {
        let spec = SpinChainSpec::default();
        let base = FieldConfig::from_mask(0b011, 3, 5.0);
        let a = perturb_fields(&base, &spec, &mut ChaCha8Rng::seed_from_u64(3));
        let b = perturb_fields(&base, &spec, &mut ChaCha8Rng::seed_from_u64(3));
        assert_eq!(a, b);
        assert_ne!(a, base);
    }

    #[test]
    fn zero_probability_is_identity() {
        let psi = make_w_state(3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for kind in NoiseKind::CHANNELS {
            let out = apply_noise_channel(&psi, &NoiseChannelSpec::new(kind, 0.0).unwrap(), &mut rng);
            assert_eq!(out, psi);
        }
    }

    #[test]
    fn certain_bit_flip() {
        let zero = make_basis_state(1, 0).unwrap();
        let ch = NoiseChannelSpec::new(NoiseKind::BitFlip, 1.0).unwrap();
        let out = apply_noise_channel(&zero, &ch, &mut ChaCha8Rng::seed_from_u64(0));
        assert_eq!(out, make_basis_state(1, 1).unwrap());
    }

    #[test]
    fn pauli_kernels_match_kronecker_operators() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let v = DVector::from_fn(8, |_, _| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
        let psi = PureState::normalize(v).unwrap();
        for site in 0..3 {
            let bit = 1 << (2 - site);
            for (p, kernel) in [(Pauli::X, apply_x as fn(&mut PureState, usize)), (Pauli::Y, apply_y), (Pauli::Z, apply_z)] {
                let mut fast = psi.clone();
                kernel(&mut fast, bit);
                let dense = site_operator(p, site, 3) * psi.as_vector();
                assert!((fast.as_vector() - dense).norm() < 1e-14);
            }
        }
        assert_eq!(pauli(Pauli::I).trace(), Complex64::new(2.0, 0.0));
    }

    #[test]
    fn trajectories_preserve_norm() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut psi = make_w_state(4).unwrap();
        for step in 0..500 {
            let kind = NoiseKind::CHANNELS[step % 3];
            psi = apply_noise_channel(&psi, &NoiseChannelSpec::new(kind, 0.4).unwrap(), &mut rng);
            assert!((psi.norm() - 1.0).abs() < 1e-12);
        }
    }

    /// Kraus oracle: ρ' = (1-p)ρ + (p/3)(XρX + YρY + ZρZ); returns ⟨0|ρ'|0⟩.
    fn depolarizing_density_oracle(p: f64) -> f64 {
        let rho = nalgebra::DMatrix::from_row_slice(2, 2, &[
            Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0),
            Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0),
        ]);
        let mut out = &rho * Complex64::new(1.0 - p, 0.0);
        for q in [Pauli::X, Pauli::Y, Pauli::Z] {
            let k = pauli(q);
            out += (&k * &rho * k.adjoint()) * Complex64::new(p / 3.0, 0.0);
        }
        out[(0, 0)].re
    }

    #[test]
    fn depolarizing_average_matches_kraus_channel() {
        let p = 0.3;
        let oracle = depolarizing_density_oracle(p);
        assert!((oracle - (1.0 - 2.0 * p / 3.0)).abs() < 1e-15);
        let zero = make_basis_state(1, 0).unwrap();
        let ch = NoiseChannelSpec::new(NoiseKind::Depolarizing, p).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let trials = 100_000;
        let mean = (0..trials)
            .map(|_| fidelity(&apply_noise_channel(&zero, &ch, &mut rng), &zero).unwrap())
            .sum::<f64>()
            / trials as f64;
        assert!((mean - oracle).abs() / oracle < 0.01, "mean fidelity {mean}");
    }
}

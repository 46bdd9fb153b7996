use std::collections::VecDeque;

use rand::Rng;

use super::policy::{argmax, log_softmax, sample_categorical, softmax};
use crate::env::Observation;
use crate::neural::MlpParams;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleConfig {
    /// Episodes remembered per sub-agent.
    pub window: usize,
    pub omega_min: f64,
    pub omega_max: f64,
    /// Uniform mass mixed into the greedy DQN distribution.
    pub smoothing: f64,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        Self { window: 20, omega_min: 0.1, omega_max: 0.9, smoothing: 0.05 }
    }
}

impl EnsembleConfig {
    pub fn validate(&self) -> Result<()> {
        if self.window == 0 {
            return Err(Error::InvalidConfig("ensemble window must be >= 1".into()));
        }
        if !(0.0 <= self.omega_min && self.omega_min <= 0.5 && self.omega_max == 1.0 - self.omega_min) {
            return Err(Error::InvalidConfig("omega bounds must be symmetric around 0.5".into()));
        }
        if !(0.0..=1.0).contains(&self.smoothing) {
            return Err(Error::InvalidConfig("smoothing must be in [0, 1]".into()));
        }
        Ok(())
    }
}

/// Mixing weight plus the recent returns that drive it.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleState {
    config: EnsembleConfig,
    dqn_returns: VecDeque<f64>,
    ppo_returns: VecDeque<f64>,
    omega_dqn: f64,
}

impl EnsembleState {
    pub fn new(config: EnsembleConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self { config, dqn_returns: VecDeque::new(), ppo_returns: VecDeque::new(), omega_dqn: 0.5 })
    }

    pub fn config(&self) -> &EnsembleConfig {
        &self.config
    }

    pub fn omega_dqn(&self) -> f64 {
        self.omega_dqn
    }

    pub fn omega_ppo(&self) -> f64 {
        1.0 - self.omega_dqn
    }

    /// Records one return per sub-agent and recomputes `ω_dqn` from the
    /// positive-shifted window means.
    pub fn reweight(&mut self, dqn_return: f64, ppo_return: f64) -> Result<f64> {
        if !dqn_return.is_finite() || !ppo_return.is_finite() {
            return Err(Error::NonFinite("ensemble return"));
        }
        for (buf, r) in [(&mut self.dqn_returns, dqn_return), (&mut self.ppo_returns, ppo_return)] {
            if buf.len() == self.config.window {
                buf.pop_front();
            }
            buf.push_back(r);
        }
        let mean = |b: &VecDeque<f64>| b.iter().sum::<f64>() / b.len() as f64;
        let global_min = self.dqn_returns.iter().chain(&self.ppo_returns).copied().fold(f64::INFINITY, f64::min);
        let m_dqn = mean(&self.dqn_returns) - global_min + 1.0;
        let m_ppo = mean(&self.ppo_returns) - global_min + 1.0;
        self.omega_dqn = (m_dqn / (m_dqn + m_ppo)).clamp(self.config.omega_min, self.config.omega_max);
        Ok(self.omega_dqn)
    }
}

/// `(1 − ε)·onehot(argmax q) + ε/|A|`.
pub fn softened_greedy(q: &[f64], smoothing: f64) -> Vec<f64> {
    let best = argmax(q);
    let floor = smoothing / q.len() as f64;
    (0..q.len()).map(|a| floor + if a == best { 1.0 - smoothing } else { 0.0 }).collect()
}

/// `ω·p + (1 − ω)·q`.
pub fn mixture(omega: f64, p: &[f64], q: &[f64]) -> Vec<f64> {
    p.iter().zip(q).map(|(a, b)| omega * a + (1.0 - omega) * b).collect()
}

pub fn ensemble_distribution(omega_dqn: f64, q_values: &[f64], ppo_logits: &[f64], smoothing: f64) -> Vec<f64> {
    mixture(omega_dqn, &softened_greedy(q_values, smoothing), &softmax(ppo_logits))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Source {
    Dqn,
    Ppo,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnsembleChoice {
    pub action: usize,
    /// Which component the action was drawn from.
    pub source: Source,
    /// PPO's log-probability of `action`, whatever the source.
    pub ppo_log_prob: f64,
    pub ppo_value: f64,
}

/// Draws from the mixture by first picking a component with probability
/// `ω_dqn`, then an action from that component. The marginal is exactly
/// [`ensemble_distribution`]; the component label is kept for credit.
pub fn ensemble_act<R: Rng + ?Sized>(
    obs: &Observation,
    q_net: &MlpParams,
    policy: &MlpParams,
    value: &MlpParams,
    state: &EnsembleState,
    rng: &mut R,
) -> Result<EnsembleChoice> {
    let logits = policy.forward(obs.features())?;
    let (source, probs) = if rng.random::<f64>() < state.omega_dqn {
        (Source::Dqn, softened_greedy(&q_net.forward(obs.features())?, state.config.smoothing))
    } else {
        (Source::Ppo, softmax(&logits))
    };
    let action = sample_categorical(&probs, rng);
    Ok(EnsembleChoice {
        action,
        source,
        ppo_log_prob: log_softmax(&logits)[action],
        ppo_value: value.forward(obs.features())?[0],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::MlpSpec;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn bias_net(out: &[f64]) -> MlpParams {
        let mut p = MlpParams::zeros(&MlpSpec::new(vec![1, out.len()], 0)).unwrap();
        p.layer_mut(0).1.copy_from_slice(out);
        p
    }

    #[test]
    fn mixture_arithmetic() {
        let mut q = vec![0.0; 8];
        q[0] = 1.0;
        let d = ensemble_distribution(0.5, &q, &[0.0; 8], 0.05);
        let expected = 0.5 * (0.95 + 0.05 / 8.0) + 0.5 * 0.125;
        assert!((d[0] - expected).abs() < 1e-15);
        assert!((expected - 0.540_625).abs() < 1e-15);

        let full = ensemble_distribution(1.0, &q, &[3.0, -1.0, 0.0, 0.0, 2.0, 0.0, 0.0, 0.0], 0.05);
        assert_eq!(full, softened_greedy(&q, 0.05));
    }

    #[test]
    fn distributions_are_valid() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..1000 {
            let n = rng.random_range(2..33);
            let q: Vec<f64> = (0..n).map(|_| rng.random_range(-5.0..5.0)).collect();
            let z: Vec<f64> = (0..n).map(|_| rng.random_range(-50.0..50.0)).collect();
            let d = ensemble_distribution(rng.random(), &q, &z, 0.05);
            assert!(d.iter().all(|&p| p >= 0.0));
            assert!((d.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert!((softened_greedy(&q, 0.05).iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn reweight_contracts() {
        let mut s = EnsembleState::new(EnsembleConfig::default()).unwrap();
        assert_eq!(s.omega_dqn(), 0.5);
        for r in [3.0, -2.0, 7.5] {
            assert_eq!(s.reweight(r, r).unwrap(), 0.5);
        }
        let mut s = EnsembleState::new(EnsembleConfig::default()).unwrap();
        for _ in 0..20 {
            s.reweight(1000.0, 0.0).unwrap();
        }
        assert_eq!(s.omega_dqn(), 0.9);
        assert_eq!(s.omega_dqn() + s.omega_ppo(), 1.0);
        s.reweight(0.0, 0.0).unwrap();
        assert!((0.1..=0.9).contains(&s.omega_dqn()));
        assert!(s.reweight(f64::NAN, 0.0).is_err());
    }

    #[test]
    fn window_forgets_old_returns() {
        let mut s = EnsembleState::new(EnsembleConfig { window: 2, ..Default::default() }).unwrap();
        s.reweight(100.0, 0.0).unwrap();
        s.reweight(5.0, 5.0).unwrap();
        s.reweight(5.0, 5.0).unwrap();
        assert_eq!(s.omega_dqn(), 0.5);
    }

    #[test]
    fn sampled_marginal_matches_mixture() {
        let mut q = vec![0.0; 4];
        q[2] = 1.0;
        let logits = [1.0, 0.0, -1.0, 0.5];
        let q_net = bias_net(&q);
        let policy = bias_net(&logits);
        let value = bias_net(&[0.0]);
        let state = EnsembleState::new(EnsembleConfig::default()).unwrap();
        let expected = ensemble_distribution(0.5, &q, &logits, 0.05);
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let n = 20_000;
        let mut counts = [0usize; 4];
        for _ in 0..n {
            let c = ensemble_act(&Observation::new(vec![0.0]), &q_net, &policy, &value, &state, &mut rng).unwrap();
            assert!((c.ppo_log_prob - log_softmax(&logits)[c.action]).abs() < 1e-12);
            counts[c.action] += 1;
        }
        let chi2: f64 = counts
            .iter()
            .zip(&expected)
            .map(|(&c, &p)| (c as f64 - n as f64 * p).powi(2) / (n as f64 * p))
            .sum();
        // 3 degrees of freedom, p = 0.01
        assert!(chi2 < 11.345, "chi2 = {chi2}");
    }
}

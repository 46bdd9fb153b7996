use rand::seq::SliceRandom;
use rand::Rng;

use super::policy::{log_softmax, sample_categorical, softmax};
use crate::env::Observation;
use crate::neural::{clip_grad_norm, AdamState, MlpParams, MlpSpec};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct PpoConfig {
    pub clip: f64,
    pub gae_lambda: f64,
    pub gamma: f64,
    pub epochs: usize,
    pub minibatch: usize,
    pub entropy_coef: f64,
    pub value_coef: f64,
    pub lr: f64,
    pub grad_clip: f64,
    pub hidden: Vec<usize>,
}

impl Default for PpoConfig {
    fn default() -> Self {
        Self {
            clip: 0.2,
            gae_lambda: 0.95,
            gamma: 0.95,
            epochs: 4,
            minibatch: 25,
            entropy_coef: 0.01,
            value_coef: 0.5,
            lr: 5e-4,
            grad_clip: 10.0,
            hidden: vec![64, 64],
        }
    }
}

impl PpoConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.clip > 0.0 && self.clip < 1.0) {
            return Err(Error::InvalidConfig(format!("clip must be in (0, 1), got {}", self.clip)));
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) || !(0.0..=1.0).contains(&self.gae_lambda) {
            return Err(Error::InvalidConfig("gamma must be in (0, 1) and lambda in [0, 1]".into()));
        }
        if self.epochs == 0 || self.minibatch == 0 {
            return Err(Error::InvalidConfig("epochs and minibatch must be >= 1".into()));
        }
        Ok(())
    }
}

/// One recorded interaction. `on_policy` marks steps whose action was
/// drawn from this agent's own policy; only those enter the surrogate.
#[derive(Debug, Clone, PartialEq)]
pub struct PpoStep {
    pub obs: Observation,
    pub action: usize,
    pub log_prob: f64,
    pub value: f64,
    pub reward: f64,
    pub done: bool,
    pub on_policy: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PpoStats {
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
}

/// Samples from the softmax policy; returns `(action, log π(action), V(obs))`.
pub fn ppo_act<R: Rng + ?Sized>(
    obs: &[f64],
    policy: &MlpParams,
    value: &MlpParams,
    rng: &mut R,
) -> Result<(usize, f64, f64)> {
    let logits = policy.forward(obs)?;
    let action = sample_categorical(&softmax(&logits), rng);
    let log_prob = log_softmax(&logits)[action];
    Ok((action, log_prob, value.forward(obs)?[0]))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gae {
    /// `Â_t` before normalisation.
    pub raw_advantages: Vec<f64>,
    /// Zero-mean, unit-variance advantages (std floored at `1e-8`).
    pub advantages: Vec<f64>,
    /// `raw_advantages + values`.
    pub returns: Vec<f64>,
}

/// Generalised advantage estimation over `(reward, value, done)` triples.
/// A `done` step cuts both bootstrapping and the λ-trace.
pub fn gae_advantages(rollout: &[(f64, f64, bool)], gamma: f64, lambda: f64, bootstrap_value: f64) -> Result<Gae> {
    if rollout.is_empty() {
        return Err(Error::Empty("rollout"));
    }
    let n = rollout.len();
    let mut raw = vec![0.0; n];
    let mut next_value = bootstrap_value;
    let mut running = 0.0;
    for t in (0..n).rev() {
        let (r, v, done) = rollout[t];
        let live = if done { 0.0 } else { 1.0 };
        let delta = r + gamma * next_value * live - v;
        running = delta + gamma * lambda * live * running;
        raw[t] = running;
        next_value = v;
    }
    let returns = raw.iter().zip(rollout).map(|(a, (_, v, _))| a + v).collect();
    let mean = raw.iter().sum::<f64>() / n as f64;
    let var = raw.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / n as f64;
    let std = var.sqrt().max(1e-8);
    let advantages = raw.iter().map(|a| (a - mean) / std).collect();
    Ok(Gae { raw_advantages: raw, advantages, returns })
}

/// `min(ρÂ, clip(ρ, 1−ε, 1+ε)Â)`.
pub fn clipped_surrogate(ratio: f64, advantage: f64, clip: f64) -> f64 {
    (ratio * advantage).min(ratio.clamp(1.0 - clip, 1.0 + clip) * advantage)
}

/// Gradient of [`clipped_surrogate`] with respect to the policy logits.
/// Zero whenever the clipped branch is the active minimum.
pub fn surrogate_logit_grad(probs: &[f64], action: usize, ratio: f64, advantage: f64, clip: f64) -> Vec<f64> {
    let clipped = (advantage > 0.0 && ratio > 1.0 + clip) || (advantage < 0.0 && ratio < 1.0 - clip);
    if clipped {
        return vec![0.0; probs.len()];
    }
    probs
        .iter()
        .enumerate()
        .map(|(j, &p)| advantage * ratio * ((j == action) as u8 as f64 - p))
        .collect()
}

/// Separate policy and value networks, each with its own Adam state.
#[derive(Debug, Clone)]
pub struct PpoAgent {
    config: PpoConfig,
    policy: MlpParams,
    value: MlpParams,
    policy_opt: AdamState,
    value_opt: AdamState,
}

impl PpoAgent {
    pub fn new(obs_dim: usize, n_actions: usize, config: PpoConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let layers = |out: usize| {
            let mut s = vec![obs_dim];
            s.extend(&config.hidden);
            s.push(out);
            s
        };
        let policy = MlpParams::init(&MlpSpec::new(layers(n_actions), seed))?;
        let value = MlpParams::init(&MlpSpec::new(layers(1), seed.wrapping_add(0x9E37_79B9)))?;
        Ok(Self {
            policy_opt: AdamState::new(policy.n_params(), config.lr),
            value_opt: AdamState::new(value.n_params(), config.lr),
            policy,
            value,
            config,
        })
    }

    pub fn config(&self) -> &PpoConfig {
        &self.config
    }

    pub fn policy(&self) -> &MlpParams {
        &self.policy
    }

    pub fn policy_mut(&mut self) -> &mut MlpParams {
        &mut self.policy
    }

    pub fn value_net(&self) -> &MlpParams {
        &self.value
    }

    pub fn probs(&self, obs: &Observation) -> Result<Vec<f64>> {
        Ok(softmax(&self.policy.forward(obs.features())?))
    }

    pub fn log_prob(&self, obs: &Observation, action: usize) -> Result<f64> {
        Ok(log_softmax(&self.policy.forward(obs.features())?)[action])
    }

    pub fn value_of(&self, obs: &Observation) -> Result<f64> {
        Ok(self.value.forward(obs.features())?[0])
    }

    pub fn act<R: Rng + ?Sized>(&self, obs: &Observation, rng: &mut R) -> Result<(usize, f64, f64)> {
        ppo_act(obs.features(), &self.policy, &self.value, rng)
    }

    pub fn advantages(&self, steps: &[PpoStep], bootstrap_value: f64) -> Result<Gae> {
        let triples: Vec<_> = steps.iter().map(|s| (s.reward, s.value, s.done)).collect();
        gae_advantages(&triples, self.config.gamma, self.config.gae_lambda, bootstrap_value)
    }

    /// Mean clipped surrogate over on-policy steps under the current policy.
    pub fn surrogate_objective(&self, steps: &[PpoStep], advantages: &[f64]) -> Result<f64> {
        let mut total = 0.0;
        let mut count = 0;
        for (s, &a) in steps.iter().zip(advantages).filter(|(s, _)| s.on_policy) {
            let ratio = (self.log_prob(&s.obs, s.action)? - s.log_prob).exp();
            total += clipped_surrogate(ratio, a, self.config.clip);
            count += 1;
        }
        Ok(if count == 0 { 0.0 } else { total / count as f64 })
    }

    /// Several epochs of shuffled minibatch Adam steps on
    /// `−surrogate − c_H·entropy` (policy) and `c_V·(V − R)²` (value).
    pub fn update<R: Rng + ?Sized>(&mut self, steps: &[PpoStep], bootstrap_value: f64, rng: &mut R) -> Result<PpoStats> {
        let gae = self.advantages(steps, bootstrap_value)?;
        let c = self.config.clone();
        let mut order: Vec<usize> = (0..steps.len()).collect();
        let mut stats = PpoStats::default();
        let mut evaluations = 0usize;
        let n_actions = self.policy.output_dim();
        for _ in 0..c.epochs {
            order.shuffle(rng);
            for chunk in order.chunks(c.minibatch) {
                let mut pgrad = vec![0.0; self.policy.n_params()];
                let mut vgrad = vec![0.0; self.value.n_params()];
                let own = chunk.iter().filter(|&&i| steps[i].on_policy).count();
                let mut mb = PpoStats::default();
                for &i in chunk {
                    let s = &steps[i];
                    if s.on_policy {
                        let trace = self.policy.forward_trace(s.obs.features())?;
                        let logp = log_softmax(trace.output());
                        let probs: Vec<f64> = logp.iter().map(|l| l.exp()).collect();
                        let ratio = (logp[s.action] - s.log_prob).exp();
                        let adv = gae.advantages[i];
                        let entropy = -probs.iter().zip(&logp).map(|(p, l)| p * l).sum::<f64>();
                        mb.policy_loss -= clipped_surrogate(ratio, adv, c.clip) / own as f64;
                        mb.entropy += entropy / own as f64;
                        let surr = surrogate_logit_grad(&probs, s.action, ratio, adv, c.clip);
                        let mut out_grad = vec![0.0; n_actions];
                        for j in 0..n_actions {
                            let d_entropy = -probs[j] * (logp[j] + entropy);
                            out_grad[j] = -(surr[j] + c.entropy_coef * d_entropy) / own as f64;
                        }
                        self.policy.accumulate_gradient(&trace, &out_grad, 1.0, &mut pgrad)?;
                    }
                    let vtrace = self.value.forward_trace(s.obs.features())?;
                    let err = vtrace.output()[0] - gae.returns[i];
                    mb.value_loss += err * err / chunk.len() as f64;
                    let g = [2.0 * c.value_coef * err / chunk.len() as f64];
                    self.value.accumulate_gradient(&vtrace, &g, 1.0, &mut vgrad)?;
                }
                if own > 0 {
                    clip_grad_norm(&mut pgrad, c.grad_clip);
                    self.policy_opt.step(&mut self.policy, &pgrad)?;
                }
                clip_grad_norm(&mut vgrad, c.grad_clip);
                self.value_opt.step(&mut self.value, &vgrad)?;
                stats.policy_loss += mb.policy_loss;
                stats.value_loss += mb.value_loss;
                stats.entropy += mb.entropy;
                evaluations += 1;
            }
        }
        let k = evaluations.max(1) as f64;
        Ok(PpoStats { policy_loss: stats.policy_loss / k, value_loss: stats.value_loss / k, entropy: stats.entropy / k })
    }
}

use rand::Rng;

use super::policy::argmax;
use super::replay::{ReplayBuffer, Transition};
use crate::env::Observation;
use crate::neural::{clip_grad_norm, hard_update, AdamState, MlpParams, MlpSpec};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct DqnConfig {
    pub gamma: f64,
    pub lr: f64,
    pub epsilon_start: f64,
    pub epsilon_min: f64,
    /// Multiplicative decay applied once per finished episode.
    pub epsilon_decay: f64,
    /// Learner steps between hard target updates.
    pub target_update_every: u64,
    pub batch_size: usize,
    pub buffer_capacity: usize,
    pub double_dqn: bool,
    pub grad_clip: f64,
    pub hidden: Vec<usize>,
}

impl Default for DqnConfig {
    fn default() -> Self {
        Self {
            gamma: 0.95,
            lr: 5e-4,
            epsilon_start: 1.0,
            epsilon_min: 0.01,
            epsilon_decay: 0.995,
            target_update_every: 200,
            batch_size: 64,
            buffer_capacity: 10_000,
            double_dqn: true,
            grad_clip: 10.0,
            hidden: vec![64, 64],
        }
    }
}

impl DqnConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(Error::InvalidConfig(format!("gamma must be in (0, 1), got {}", self.gamma)));
        }
        if !(0.0..=1.0).contains(&self.epsilon_min) || self.epsilon_min > self.epsilon_start || self.epsilon_start > 1.0 {
            return Err(Error::InvalidConfig("need 0 <= epsilon_min <= epsilon_start <= 1".into()));
        }
        if self.batch_size == 0 || self.batch_size > self.buffer_capacity || self.target_update_every == 0 {
            return Err(Error::InvalidConfig("invalid batch/buffer/target-update sizes".into()));
        }
        Ok(())
    }
}

/// `max(ε_min, ε₀ · decay^episodes)`.
pub fn epsilon_after(config: &DqnConfig, episodes: u32) -> f64 {
    (config.epsilon_start * config.epsilon_decay.powi(episodes as i32)).max(config.epsilon_min)
}

/// ε-greedy over `Q(obs, ·)` with lowest-index tie-breaking.
pub fn dqn_act<R: Rng + ?Sized>(obs: &[f64], epsilon: f64, q_net: &MlpParams, rng: &mut R) -> Result<usize> {
    let n_actions = q_net.output_dim();
    if rng.random::<f64>() < epsilon {
        return Ok(rng.random_range(0..n_actions));
    }
    Ok(argmax(&q_net.forward(obs)?))
}

/// `y = r` on terminal transitions, otherwise `r + γ Q_target(s′, a*)` with
/// `a* = argmax Q_online(s′, ·)` (or `argmax Q_target` when `double` is off).
pub fn dqn_targets(
    batch: &[&Transition],
    online: &MlpParams,
    target: &MlpParams,
    gamma: f64,
    double: bool,
) -> Result<Vec<f64>> {
    if batch.is_empty() {
        return Err(Error::Empty("transition batch"));
    }
    batch
        .iter()
        .map(|t| {
            if t.done {
                return Ok(t.r);
            }
            let q_target = target.forward(t.s_next.features())?;
            let a_star = if double { argmax(&online.forward(t.s_next.features())?) } else { argmax(&q_target) };
            Ok(t.r + gamma * q_target[a_star])
        })
        .collect()
}

/// Double-DQN learner with replay and hard target updates.
#[derive(Debug, Clone)]
pub struct DqnAgent {
    config: DqnConfig,
    online: MlpParams,
    target: MlpParams,
    opt: AdamState,
    buffer: ReplayBuffer,
    learner_steps: u64,
    episodes: u32,
}

impl DqnAgent {
    pub fn new(obs_dim: usize, n_actions: usize, config: DqnConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut sizes = vec![obs_dim];
        sizes.extend(&config.hidden);
        sizes.push(n_actions);
        let online = MlpParams::init(&MlpSpec::new(sizes, seed))?;
        Ok(Self {
            target: online.clone(),
            opt: AdamState::new(online.n_params(), config.lr),
            buffer: ReplayBuffer::new(config.buffer_capacity),
            online,
            config,
            learner_steps: 0,
            episodes: 0,
        })
    }

    pub fn config(&self) -> &DqnConfig {
        &self.config
    }

    pub fn online(&self) -> &MlpParams {
        &self.online
    }

    pub fn online_mut(&mut self) -> &mut MlpParams {
        &mut self.online
    }

    pub fn target(&self) -> &MlpParams {
        &self.target
    }

    pub fn buffer(&self) -> &ReplayBuffer {
        &self.buffer
    }

    pub fn learner_steps(&self) -> u64 {
        self.learner_steps
    }

    pub fn n_actions(&self) -> usize {
        self.online.output_dim()
    }

    pub fn epsilon(&self) -> f64 {
        epsilon_after(&self.config, self.episodes)
    }

    pub fn q_values(&self, obs: &Observation) -> Result<Vec<f64>> {
        self.online.forward(obs.features())
    }

    pub fn act<R: Rng + ?Sized>(&self, obs: &Observation, rng: &mut R) -> Result<usize> {
        dqn_act(obs.features(), self.epsilon(), &self.online, rng)
    }

    pub fn greedy(&self, obs: &Observation) -> Result<usize> {
        Ok(argmax(&self.q_values(obs)?))
    }

    pub fn remember(&mut self, t: Transition) {
        self.buffer.push(t);
    }

    /// Decays exploration; call once per finished episode.
    pub fn end_episode(&mut self) {
        self.episodes += 1;
    }

    /// One Adam step on the mean squared TD error of a replay batch.
    /// Returns the pre-step loss, or `None` while the buffer is underfull.
    pub fn learn<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<Option<f64>> {
        let Some(batch) = self.buffer.sample(self.config.batch_size, rng) else {
            return Ok(None);
        };
        let targets = dqn_targets(&batch, &self.online, &self.target, self.config.gamma, self.config.double_dqn)?;
        let n = batch.len() as f64;
        let mut grad = vec![0.0; self.online.n_params()];
        let mut out_grad = vec![0.0; self.n_actions()];
        let mut loss = 0.0;
        for (t, y) in batch.iter().zip(&targets) {
            let trace = self.online.forward_trace(t.s.features())?;
            let err = trace.output()[t.a] - y;
            loss += err * err / n;
            out_grad.iter_mut().for_each(|g| *g = 0.0);
            out_grad[t.a] = 2.0 * err / n;
            self.online.accumulate_gradient(&trace, &out_grad, 1.0, &mut grad)?;
        }
        clip_grad_norm(&mut grad, self.config.grad_clip);
        self.opt.step(&mut self.online, &grad)?;
        self.learner_steps += 1;
        if self.learner_steps % self.config.target_update_every == 0 {
            hard_update(&mut self.target, &self.online)?;
        }
        Ok(Some(loss))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn obs(v: &[f64]) -> Observation {
        Observation::new(v.to_vec())
    }

    /// Linear net whose output equals its bias vector for a zero input.
    fn constant_net(values: &[f64]) -> MlpParams {
        let mut p = MlpParams::zeros(&MlpSpec::new(vec![1, values.len()], 0)).unwrap();
        let (_, b) = p.layer_mut(0);
        b.copy_from_slice(values);
        p
    }

    #[test]
    fn epsilon_schedule_closed_form() {
        let c = DqnConfig::default();
        assert_eq!(epsilon_after(&c, 0), 1.0);
        assert!((epsilon_after(&c, 10) - 0.995f64.powi(10)).abs() < 1e-15);
        let first = (0..2000).find(|&k| epsilon_after(&c, k) <= 0.01).unwrap();
        let closed = ((0.01f64).ln() / 0.995f64.ln()).ceil() as u32;
        assert_eq!(closed, 919);
        assert_eq!(first, closed);
    }

    #[test]
    fn greedy_action_uses_first_maximum_and_is_scale_invariant() {
        let q = constant_net(&[0.1, 0.9, 0.9, 0.3]);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(dqn_act(&[0.0], 0.0, &q, &mut rng).unwrap(), 1);
        let scaled = constant_net(&[0.1 * 3.0 + 2.0, 0.9 * 3.0 + 2.0, 0.9 * 3.0 + 2.0, 0.3 * 3.0 + 2.0]);
        assert_eq!(dqn_act(&[0.0], 0.0, &scaled, &mut rng).unwrap(), 1);
    }

    #[test]
    fn terminal_target_is_reward() {
        let net = constant_net(&[5.0, 7.0]);
        let t = Transition { s: obs(&[0.0]), a: 0, r: 1.0, s_next: obs(&[0.0]), done: true };
        assert_eq!(dqn_targets(&[&t], &net, &net, 0.95, true).unwrap(), vec![1.0]);
    }

    #[test]
    fn double_dqn_selects_with_online_and_evaluates_with_target() {
        let online = constant_net(&[0.2, 0.5]);
        let target = constant_net(&[1.0, 2.0]);
        let t = Transition { s: obs(&[0.0]), a: 0, r: 1.0, s_next: obs(&[0.0]), done: false };
        let y = dqn_targets(&[&t], &online, &target, 0.95, true).unwrap()[0];
        assert!((y - 2.9).abs() < 1e-12);

        // nets disagree: online prefers 0, target prefers 1
        let online = constant_net(&[3.0, 0.0]);
        let y = dqn_targets(&[&t], &online, &target, 0.95, true).unwrap()[0];
        assert!((y - (1.0 + 0.95 * 1.0)).abs() < 1e-12);
        let y_vanilla = dqn_targets(&[&t], &online, &target, 0.95, false).unwrap()[0];
        assert!((y_vanilla - (1.0 + 0.95 * 2.0)).abs() < 1e-12);
        assert!(dqn_targets(&[], &online, &target, 0.95, true).is_err());
    }

    fn small_config() -> DqnConfig {
        DqnConfig { batch_size: 4, buffer_capacity: 100, target_update_every: 3, hidden: vec![8], ..Default::default() }
    }

    #[test]
    fn learn_is_noop_until_buffer_fills() {
        let mut agent = DqnAgent::new(2, 2, small_config(), 0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(agent.learn(&mut rng).unwrap(), None);
        assert_eq!(agent.learner_steps(), 0);
    }

    #[test]
    fn perfectly_fit_batch_has_zero_loss_and_no_motion() {
        let cfg = small_config();
        let mut agent = DqnAgent::new(2, 2, cfg, 0).unwrap();
        agent.online_mut().flat_mut().iter_mut().for_each(|p| *p = 0.0);
        let before = agent.online().clone();
        for _ in 0..10 {
            agent.remember(Transition { s: obs(&[1.0, 0.0]), a: 1, r: 0.0, s_next: obs(&[0.0, 1.0]), done: true });
        }
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let loss = agent.learn(&mut rng).unwrap().unwrap();
        assert!(loss.abs() < 1e-15);
        let moved: f64 = agent.online().flat().iter().zip(before.flat()).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        assert!(moved < 1e-6);
    }

    #[test]
    fn target_syncs_on_schedule_and_loss_is_non_negative() {
        let mut agent = DqnAgent::new(2, 2, small_config(), 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for k in 0..20 {
            let x = k as f64 / 20.0;
            agent.remember(Transition { s: obs(&[x, 1.0 - x]), a: k % 2, r: x, s_next: obs(&[1.0 - x, x]), done: k % 5 == 0 });
        }
        for step in 1..=9u64 {
            let loss = agent.learn(&mut rng).unwrap().unwrap();
            assert!(loss >= 0.0);
            if step % 3 == 0 {
                assert_eq!(agent.target().flat(), agent.online().flat());
            } else {
                assert_ne!(agent.target().flat(), agent.online().flat());
            }
        }
    }

    #[test]
    fn uniform_exploration_chi_square() {
        let q = constant_net(&[0.0; 8]);
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let mut counts = [0usize; 8];
        let n = 10_000;
        for _ in 0..n {
            counts[dqn_act(&[0.0], 1.0, &q, &mut rng).unwrap()] += 1;
        }
        let e = n as f64 / 8.0;
        let chi2: f64 = counts.iter().map(|&c| (c as f64 - e).powi(2) / e).sum();
        // 7 dof, p = 0.01 critical value
        assert!(chi2 < 18.475, "chi2 = {chi2}");
    }
}

//! The secured/green supply-chain environment around the spin chain.
//!
//! Spin `n` gates warehouse `n`: switching its field on replenishes the
//! warehouse, raises the security score and costs CO₂. Each step also
//! evolves the chain under the (noisy) Hamiltonian and scores the new state
//! against the target with a window-normalised multi-objective reward.

use std::collections::VecDeque;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::quantum::{
    apply_noise_channel, build_hamiltonian, evolve, fidelity, make_basis_state, make_w_state, perturb_fields,
    FieldConfig, NoiseChannelSpec, Propagator, PureState, SpinChainSpec,
};
use crate::{Error, Result};

/// `(α₁, α₂, α₃)`; serialised as a three-element array.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 3]", into = "[f64; 3]")]
pub struct RewardWeights {
    pub fidelity: f64,
    pub security: f64,
    pub co2: f64,
}

impl RewardWeights {
    pub const fn new(fidelity: f64, security: f64, co2: f64) -> Self {
        Self { fidelity, security, co2 }
    }
}

impl Default for RewardWeights {
    fn default() -> Self {
        Self::new(1.0, 1.0, 0.5)
    }
}

impl From<[f64; 3]> for RewardWeights {
    fn from(a: [f64; 3]) -> Self {
        Self::new(a[0], a[1], a[2])
    }
}

impl From<RewardWeights> for [f64; 3] {
    fn from(w: RewardWeights) -> Self {
        [w.fidelity, w.security, w.co2]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnvConfig {
    pub spin_spec: SpinChainSpec,
    pub n_warehouses: usize,
    pub max_capacity: u32,
    pub initial_inventory: u32,
    pub timesteps: usize,
    /// Mean Poisson demand per warehouse per step.
    pub demand_rate: f64,
    pub replenish_amount: u32,
    pub reward_weights: RewardWeights,
    pub window: usize,
    pub noise_channel: NoiseChannelSpec,
    pub security_gain: f64,
    pub security_decay: f64,
    pub co2_per_field: f64,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            spin_spec: SpinChainSpec::default(),
            n_warehouses: 3,
            max_capacity: 100,
            initial_inventory: 50,
            timesteps: 50,
            demand_rate: 5.0,
            replenish_amount: 10,
            reward_weights: RewardWeights::default(),
            window: 100,
            noise_channel: NoiseChannelSpec::none(),
            security_gain: 0.05,
            security_decay: 0.02,
            co2_per_field: 0.2,
        }
    }
}

impl EnvConfig {
    /// Default configuration with `n` spins and `n` warehouses.
    pub fn with_spins(n: usize) -> Self {
        let mut c = Self::default();
        c.spin_spec.n_spins = n;
        c.n_warehouses = n;
        c
    }

    pub fn validate(&self) -> Result<()> {
        self.spin_spec.validate()?;
        self.noise_channel.validate()?;
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.n_warehouses != self.spin_spec.n_spins {
            return bad(format!(
                "n_warehouses ({}) must equal spin_spec.n_spins ({})",
                self.n_warehouses, self.spin_spec.n_spins
            ));
        }
        if self.timesteps == 0 {
            return bad("timesteps must be > 0".into());
        }
        if self.initial_inventory > self.max_capacity {
            return bad("initial_inventory exceeds max_capacity".into());
        }
        let w = self.reward_weights;
        if [w.fidelity, w.security, w.co2].iter().any(|a| !(a.is_finite() && *a >= 0.0)) {
            return bad("reward weights must be finite and non-negative".into());
        }
        if self.window == 0 || self.window > self.timesteps * 10 {
            return bad(format!("window must be in [1, {}], got {}", self.timesteps * 10, self.window));
        }
        if !(self.demand_rate.is_finite() && self.demand_rate >= 0.0) {
            return bad("demand_rate must be finite and non-negative".into());
        }
        for (name, v) in [
            ("security_gain", self.security_gain),
            ("security_decay", self.security_decay),
            ("co2_per_field", self.co2_per_field),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return bad(format!("{name} must be finite and non-negative"));
            }
        }
        Ok(())
    }

    pub fn n_actions(&self) -> usize {
        1 << self.spin_spec.n_spins
    }

    /// Length of the flattened observation: `2·2^N + N_w + 2`.
    pub fn observation_dim(&self) -> usize {
        2 * self.spin_spec.dim() + self.n_warehouses + 2
    }

    /// Largest per-step emission; normalises `co2_step` into `[0, 1]`.
    pub fn co2_scale(&self) -> f64 {
        self.co2_per_field * self.spin_spec.n_spins as f64
    }
}

/// `|10…0⟩`: one excitation on the first spin.
pub fn initial_state(n_spins: usize) -> Result<PureState> {
    make_basis_state(n_spins, 1 << (n_spins - 1))
}

/// The W state, in the same excitation sector as [`initial_state`].
pub fn target_state(n_spins: usize) -> Result<PureState> {
    make_w_state(n_spins)
}

/// On/off mask over the spins; bit `n` drives spin `n + 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Action(u32);

impl Action {
    pub fn new(mask: u32, n_spins: usize) -> Result<Self> {
        if (mask as usize) >= 1 << n_spins {
            return Err(Error::IndexOutOfRange { index: mask as usize, dim: 1 << n_spins });
        }
        Ok(Self(mask))
    }

    pub fn all_off() -> Self {
        Self(0)
    }

    pub fn all_on(n_spins: usize) -> Self {
        Self((1u32 << n_spins) - 1)
    }

    pub fn mask(self) -> u32 {
        self.0
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn is_on(self, spin: usize) -> bool {
        self.0 >> spin & 1 == 1
    }

    pub fn active_fields(self) -> u32 {
        self.0.count_ones()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnvState {
    pub psi: PureState,
    pub inventories: Vec<u32>,
    pub security_score: f64,
    pub co2_cum: f64,
    pub co2_step: f64,
    pub t: usize,
}

/// Flattened features: `[Re ψ, Im ψ, inventories / capacity, security, co2_step / scale]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation(Vec<f64>);

impl Observation {
    pub fn new(features: Vec<f64>) -> Self {
        Self(features)
    }

    pub fn features(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

pub fn observation_of(state: &EnvState, config: &EnvConfig) -> Observation {
    let amps = state.psi.amplitudes();
    let mut f = Vec::with_capacity(config.observation_dim());
    f.extend(amps.iter().map(|a| a.re));
    f.extend(amps.iter().map(|a| a.im));
    let cap = config.max_capacity.max(1) as f64;
    f.extend(state.inventories.iter().map(|&i| i as f64 / cap));
    f.push(state.security_score);
    let scale = config.co2_scale();
    f.push(if scale > 0.0 { state.co2_step / scale } else { 0.0 });
    Observation(f)
}

/// Un-normalised reward components of one step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RawComponents {
    pub fidelity: f64,
    pub security: f64,
    pub co2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RewardBreakdown {
    pub raw_f: f64,
    pub raw_sec: f64,
    pub raw_co2: f64,
    pub norm_f: f64,
    pub norm_sec: f64,
    pub norm_co2: f64,
    pub total: f64,
}

/// Sliding min–max normaliser over the last `W` raw components.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizationWindow {
    capacity: usize,
    fidelity: VecDeque<f64>,
    security: VecDeque<f64>,
    co2: VecDeque<f64>,
}

/// Normalised value reported when the window has no spread.
pub const DEGENERATE_WINDOW_VALUE: f64 = 0.5;

impl NormalizationWindow {
    pub fn new(capacity: usize) -> Self {
        let capacity = capacity.max(1);
        Self {
            capacity,
            fidelity: VecDeque::with_capacity(capacity),
            security: VecDeque::with_capacity(capacity),
            co2: VecDeque::with_capacity(capacity),
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.fidelity.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fidelity.is_empty()
    }

    pub fn clear(&mut self) {
        self.fidelity.clear();
        self.security.clear();
        self.co2.clear();
    }

    pub fn push(&mut self, raw: RawComponents) {
        for (buf, v) in [
            (&mut self.fidelity, raw.fidelity),
            (&mut self.security, raw.security),
            (&mut self.co2, raw.co2),
        ] {
            if buf.len() == self.capacity {
                buf.pop_front();
            }
            buf.push_back(v);
        }
    }

    /// Min–max normalises `raw` against the window contents.
    pub fn normalize(&self, raw: RawComponents) -> (f64, f64, f64) {
        (
            min_max(&self.fidelity, raw.fidelity),
            min_max(&self.security, raw.security),
            min_max(&self.co2, raw.co2),
        )
    }
}

fn min_max(buf: &VecDeque<f64>, x: f64) -> f64 {
    let (lo, hi) = buf
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    if buf.is_empty() || hi <= lo {
        return DEGENERATE_WINDOW_VALUE;
    }
    ((x - lo) / (hi - lo)).clamp(0.0, 1.0)
}

/// `α₁F̂ + α₂R̂ − α₃Ĉ` with each component normalised over `window`, which
/// must already contain the current raw values.
pub fn compute_reward(raw: RawComponents, window: &NormalizationWindow, weights: RewardWeights) -> RewardBreakdown {
    let (norm_f, norm_sec, norm_co2) = window.normalize(raw);
    RewardBreakdown {
        raw_f: raw.fidelity,
        raw_sec: raw.security,
        raw_co2: raw.co2,
        norm_f,
        norm_sec,
        norm_co2,
        total: weights.fidelity * norm_f + weights.security * norm_sec - weights.co2 * norm_co2,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub observation: Observation,
    pub reward: RewardBreakdown,
    pub done: bool,
}

/// Demand, replenishment, security and emission updates (steps 1–3).
fn apply_supply(state: &mut EnvState, action: Action, demand: &[u32], config: &EnvConfig) {
    for (inv, &d) in state.inventories.iter_mut().zip(demand) {
        *inv -= d.min(*inv);
    }
    for (n, inv) in state.inventories.iter_mut().enumerate() {
        if action.is_on(n) {
            *inv = inv.saturating_add(config.replenish_amount).min(config.max_capacity);
            state.security_score += config.security_gain;
        } else {
            state.security_score -= config.security_decay;
        }
    }
    state.security_score = state.security_score.clamp(0.0, 1.0);
    state.co2_step = config.co2_per_field * action.active_fields() as f64;
    state.co2_cum += state.co2_step;
}

fn fresh_state(config: &EnvConfig, psi: PureState) -> EnvState {
    EnvState {
        psi,
        inventories: vec![config.initial_inventory; config.n_warehouses],
        security_score: 0.5,
        co2_cum: 0.0,
        co2_step: 0.0,
        t: 0,
    }
}

/// Stochastic environment: Poisson demand, Gaussian field noise and the
/// configured Pauli channel, all drawn from one seeded stream.
#[derive(Debug, Clone)]
pub struct ScsEnv {
    config: EnvConfig,
    init: PureState,
    target: PureState,
    state: EnvState,
    window: NormalizationWindow,
    rng: ChaCha8Rng,
    demand: Option<Poisson<f64>>,
}

impl ScsEnv {
    pub fn new(config: EnvConfig) -> Result<Self> {
        config.validate()?;
        let n = config.spin_spec.n_spins;
        let init = initial_state(n)?;
        let target = target_state(n)?;
        let demand = if config.demand_rate > 0.0 {
            Some(Poisson::new(config.demand_rate).map_err(|e| Error::InvalidConfig(e.to_string()))?)
        } else {
            None
        };
        Ok(Self {
            state: fresh_state(&config, init.clone()),
            window: NormalizationWindow::new(config.window),
            rng: ChaCha8Rng::seed_from_u64(0),
            config,
            init,
            target,
            demand,
        })
    }

    pub fn config(&self) -> &EnvConfig {
        &self.config
    }

    pub fn state(&self) -> &EnvState {
        &self.state
    }

    pub fn target(&self) -> &PureState {
        &self.target
    }

    pub fn window(&self) -> &NormalizationWindow {
        &self.window
    }

    pub fn observation(&self) -> Observation {
        observation_of(&self.state, &self.config)
    }

    pub fn is_done(&self) -> bool {
        self.state.t >= self.config.timesteps
    }

    /// Restarts the episode and reseeds the environment stream.
    pub fn reset(&mut self, seed: u64) -> Observation {
        self.rng = ChaCha8Rng::seed_from_u64(seed);
        self.state = fresh_state(&self.config, self.init.clone());
        self.window.clear();
        self.observation()
    }

    pub fn step(&mut self, action: Action) -> Result<StepOutcome> {
        if self.is_done() {
            return Err(Error::EpisodeFinished(self.state.t));
        }
        let n = self.config.spin_spec.n_spins;
        let action = Action::new(action.mask(), n)?;

        let demand: Vec<u32> = (0..self.config.n_warehouses)
            .map(|_| match &self.demand {
                Some(p) => p.sample(&mut self.rng) as u32,
                None => 0,
            })
            .collect();
        apply_supply(&mut self.state, action, &demand, &self.config);

        let spec = &self.config.spin_spec;
        let fields = FieldConfig::from_mask(action.mask(), n, spec.field_on_strength);
        let noisy = perturb_fields(&fields, spec, &mut self.rng);
        let h = build_hamiltonian(spec, &noisy)?;
        let evolved = evolve(&self.state.psi, &h, spec.dt)?;
        self.state.psi = apply_noise_channel(&evolved, &self.config.noise_channel, &mut self.rng);

        let raw = RawComponents {
            fidelity: fidelity(&self.state.psi, &self.target)?,
            security: self.state.security_score,
            co2: self.state.co2_step,
        };
        self.window.push(raw);
        let reward = compute_reward(raw, &self.window, self.config.reward_weights);
        self.state.t += 1;
        Ok(StepOutcome {
            observation: self.observation(),
            reward,
            done: self.is_done(),
        })
    }
}

/// Certainty-equivalent model: mean demand (rounded), no field noise, no
/// channel. Propagators for every mask are cached.
#[derive(Debug, Clone)]
pub struct DeterministicTwin {
    config: EnvConfig,
    target: PureState,
    demand: Vec<u32>,
    propagators: Vec<Propagator>,
}

impl DeterministicTwin {
    pub fn new(config: &EnvConfig) -> Result<Self> {
        config.validate()?;
        let spec = &config.spin_spec;
        let n = spec.n_spins;
        let propagators = (0..1u32 << n)
            .map(|mask| {
                let fields = FieldConfig::from_mask(mask, n, spec.field_on_strength);
                Ok(Propagator::new(&build_hamiltonian(spec, &fields)?, spec.dt))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            config: config.clone(),
            target: target_state(n)?,
            demand: vec![config.demand_rate.round() as u32; config.n_warehouses],
            propagators,
        })
    }

    pub fn config(&self) -> &EnvConfig {
        &self.config
    }

    pub fn initial(&self) -> Result<EnvState> {
        Ok(fresh_state(&self.config, initial_state(self.config.spin_spec.n_spins)?))
    }

    pub fn step(&self, state: &EnvState, action: Action) -> Result<(EnvState, RawComponents)> {
        let action = Action::new(action.mask(), self.config.spin_spec.n_spins)?;
        let mut next = state.clone();
        apply_supply(&mut next, action, &self.demand, &self.config);
        next.psi = self.propagators[action.index()].apply(&state.psi)?;
        next.t += 1;
        let raw = RawComponents {
            fidelity: fidelity(&next.psi, &self.target)?,
            security: next.security_score,
            co2: next.co2_step,
        };
        Ok((next, raw))
    }

    /// `α₁F + α₂γ_sec − α₃ĉ` with `ĉ = co2_step / co2_scale`.
    pub fn raw_reward(&self, raw: RawComponents) -> f64 {
        let w = self.config.reward_weights;
        let scale = self.config.co2_scale();
        let c = if scale > 0.0 { raw.co2 / scale } else { 0.0 };
        w.fidelity * raw.fidelity + w.security * raw.security - w.co2 * c
    }

    /// Total raw reward of a fixed action applied for a whole episode.
    pub fn constant_policy_return(&self, action: Action) -> Result<f64> {
        let mut state = self.initial()?;
        let mut total = 0.0;
        for _ in 0..self.config.timesteps {
            let (next, raw) = self.step(&state, action)?;
            total += self.raw_reward(raw);
            state = next;
        }
        Ok(total)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantum::NoiseKind;
    use rand::Rng;

    fn table_one() -> EnvConfig {
        EnvConfig::default()
    }

    #[test]
    fn reset_matches_table_one() {
        let mut env = ScsEnv::new(table_one()).unwrap();
        let obs = env.reset(1);
        assert_eq!(env.state().inventories, vec![50, 50, 50]);
        assert_eq!(env.state().t, 0);
        assert_eq!(obs.len(), 21);
        let f = obs.features();
        let quantum: f64 = f[..16].iter().map(|x| x * x).sum();
        assert!((quantum - 1.0).abs() < 1e-12);
        assert_eq!(&f[16..19], &[0.5, 0.5, 0.5]);
        assert_eq!(f[19], env.state().security_score);
    }

    #[test]
    fn reset_is_deterministic() {
        let mut a = ScsEnv::new(table_one()).unwrap();
        let mut b = ScsEnv::new(table_one()).unwrap();
        a.reset(9);
        b.reset(9);
        for k in 0..10u32 {
            a.step(Action(k % 8)).unwrap();
        }
        a.reset(9);
        assert_eq!(a.state(), b.state());
    }

    #[test]
    fn all_off_keeps_co2_zero_and_decays_security() {
        let mut env = ScsEnv::new(table_one()).unwrap();
        env.reset(3);
        let mut last = env.state().security_score;
        while !env.is_done() {
            env.step(Action::all_off()).unwrap();
            assert_eq!(env.state().co2_cum, 0.0);
            assert!(env.state().security_score <= last);
            last = env.state().security_score;
        }
        assert_eq!(last, 0.0);
    }

    #[test]
    fn all_on_emits_fixed_co2() {
        let mut env = ScsEnv::new(table_one()).unwrap();
        env.reset(3);
        for _ in 0..5 {
            env.step(Action::all_on(3)).unwrap();
            assert!((env.state().co2_step - 0.6).abs() < 1e-15);
        }
        assert!((env.state().co2_cum - 3.0).abs() < 1e-12);
    }

    #[test]
    fn stepping_finished_episode_fails() {
        let mut cfg = table_one();
        cfg.timesteps = 2;
        cfg.window = 20;
        let mut env = ScsEnv::new(cfg).unwrap();
        env.reset(0);
        assert!(!env.step(Action(1)).unwrap().done);
        assert!(env.step(Action(1)).unwrap().done);
        assert!(matches!(env.step(Action(1)), Err(Error::EpisodeFinished(2))));
    }

    #[test]
    fn noiseless_trajectory_matches_standalone_propagation() {
        let mut cfg = table_one();
        cfg.spin_spec.noise_level = 0.0;
        let mut env = ScsEnv::new(cfg.clone()).unwrap();
        env.reset(17);
        let spec = &cfg.spin_spec;
        let target = make_w_state(3).unwrap();
        let mut psi = make_basis_state(3, 4).unwrap();
        for k in 0..cfg.timesteps {
            let mask = ((k * 5 + 3) % 8) as u32;
            let out = env.step(Action(mask)).unwrap();
            let h = build_hamiltonian(spec, &FieldConfig::from_mask(mask, 3, 5.0)).unwrap();
            psi = evolve(&psi, &h, 1.0).unwrap();
            let f = fidelity(&psi, &target).unwrap();
            assert!((out.reward.raw_f - f).abs() < 1e-10);
        }
    }

    #[test]
    fn degenerate_window_reward() {
        let mut w = NormalizationWindow::new(100);
        let raw = RawComponents { fidelity: 0.3, security: 0.5, co2: 0.2 };
        w.push(raw);
        let r = compute_reward(raw, &w, RewardWeights::default());
        assert_eq!((r.norm_f, r.norm_sec, r.norm_co2), (0.5, 0.5, 0.5));
        assert!((r.total - 0.75).abs() < 1e-15);
    }

    #[test]
    fn reward_extremes() {
        let mut w = NormalizationWindow::new(10);
        let lo = RawComponents { fidelity: 0.0, security: 0.0, co2: 0.0 };
        let hi = RawComponents { fidelity: 1.0, security: 1.0, co2: 1.0 };
        w.push(lo);
        w.push(hi);
        let best = RawComponents { fidelity: 1.0, security: 1.0, co2: 0.0 };
        let worst = RawComponents { fidelity: 0.0, security: 0.0, co2: 1.0 };
        assert!((compute_reward(best, &w, RewardWeights::default()).total - 2.0).abs() < 1e-15);
        assert!((compute_reward(worst, &w, RewardWeights::default()).total + 0.5).abs() < 1e-15);
    }

    #[test]
    fn window_evicts_oldest() {
        let mut w = NormalizationWindow::new(2);
        for f in [0.0, 0.5, 1.0] {
            w.push(RawComponents { fidelity: f, security: 0.0, co2: 0.0 });
        }
        assert_eq!(w.len(), 2);
        let (nf, _, _) = w.normalize(RawComponents { fidelity: 0.5, security: 0.0, co2: 0.0 });
        assert_eq!(nf, 0.0);
    }

    #[test]
    fn config_json_round_trip_and_unknown_keys() {
        let cfg = table_one();
        let json = serde_json::to_string(&cfg).unwrap();
        assert!(json.contains("\"reward_weights\":[1.0,1.0,0.5]"));
        let back: EnvConfig = serde_json::from_str(&json).unwrap();
        assert_eq!(back, cfg);
        let err = serde_json::from_str::<EnvConfig>(r#"{"timesteps": 10, "bogus": 1}"#).unwrap_err();
        assert!(err.to_string().contains("bogus"));
    }

    #[test]
    fn config_validation() {
        let mut c = table_one();
        c.n_warehouses = 2;
        assert!(c.validate().is_err());
        let mut c = table_one();
        c.window = 501;
        assert!(c.validate().is_err());
        let mut c = table_one();
        c.reward_weights = RewardWeights::new(1.0, -1.0, 0.0);
        assert!(c.validate().is_err());
        assert!(ScsEnv::new(EnvConfig::with_spins(5)).is_ok());
    }

    #[test]
    fn invariants_over_random_action_sequences() {
        let mut cfg = table_one();
        cfg.noise_channel = NoiseChannelSpec::new(NoiseKind::Depolarizing, 0.1).unwrap();
        let mut env = ScsEnv::new(cfg.clone()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let w = cfg.reward_weights;
        for episode in 0..200 {
            env.reset(episode);
            let mut steps = 0;
            let mut co2 = 0.0;
            loop {
                let out = env.step(Action(rng.random_range(0..8))).unwrap();
                steps += 1;
                let s = env.state();
                assert!(s.inventories.iter().all(|&i| i <= cfg.max_capacity));
                assert!((0.0..=1.0).contains(&s.security_score));
                assert!(s.co2_cum >= co2);
                co2 = s.co2_cum;
                assert!(out.reward.total >= -w.co2 - 1e-12 && out.reward.total <= w.fidelity + w.security + 1e-12);
                assert!(out.observation.features().iter().all(|x| x.is_finite()));
                if out.done {
                    break;
                }
            }
            assert_eq!(steps, cfg.timesteps);
        }
    }

    #[test]
    fn twin_matches_noiseless_env_fidelity() {
        let mut cfg = table_one();
        cfg.spin_spec.noise_level = 0.0;
        cfg.demand_rate = 0.0;
        let twin = DeterministicTwin::new(&cfg).unwrap();
        let mut env = ScsEnv::new(cfg).unwrap();
        env.reset(0);
        let mut s = twin.initial().unwrap();
        for k in 0..20u32 {
            let (next, raw) = twin.step(&s, Action(k % 8)).unwrap();
            let out = env.step(Action(k % 8)).unwrap();
            assert!((raw.fidelity - out.reward.raw_f).abs() < 1e-10);
            assert_eq!(next.inventories, env.state().inventories);
            assert_eq!(next.security_score, env.state().security_score);
            s = next;
        }
    }
}

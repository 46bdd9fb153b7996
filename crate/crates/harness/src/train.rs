use std::fs::{self, File};
use std::path::{Path, PathBuf};

use qscs_core::agents::{
    ensemble_act, DqnAgent, DqnConfig, EnsembleConfig, EnsembleState, PpoAgent, PpoConfig, PpoStep, Source, Transition,
};
use qscs_core::baselines::{MpcConfig, MpcPlanner};
use qscs_core::env::{Action, EnvConfig, ScsEnv};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::{derive_seed, AgentKind, RunConfig};
use crate::error::Result;

/// One row of the per-episode CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub episode: usize,
    #[serde(rename = "return")]
    pub episode_return: f64,
    pub mean_fidelity: f64,
    pub final_security: f64,
    pub episode_co2: f64,
    pub epsilon: Option<f64>,
    pub omega_dqn: Option<f64>,
}

pub const EPISODE_COLUMNS: [&str; 7] =
    ["episode", "return", "mean_fidelity", "final_security", "episode_co2", "epsilon", "omega_dqn"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Explore and update parameters.
    Train,
    /// Frozen parameters; DQN acts greedily.
    Evaluate,
}

/// A policy together with whatever it needs to keep learning.
#[derive(Debug, Clone)]
pub enum Learner {
    Dqn(DqnAgent),
    Ppo(PpoAgent),
    Ensemble { dqn: DqnAgent, ppo: PpoAgent, state: EnsembleState, last_returns: [f64; 2] },
    Mpc(Box<MpcPlanner>),
    Random,
    Constant(Action),
}

impl Learner {
    pub fn new(kind: AgentKind, env: &EnvConfig, lr: f64, seed: u64) -> Result<Self> {
        let (obs, acts) = (env.observation_dim(), env.n_actions());
        let dqn = || DqnAgent::new(obs, acts, DqnConfig { lr, ..DqnConfig::default() }, seed);
        let ppo = || PpoAgent::new(obs, acts, PpoConfig { lr, ..PpoConfig::default() }, derive_seed(seed, 1));
        Ok(match kind {
            AgentKind::Dqn => Learner::Dqn(dqn()?),
            AgentKind::Ppo => Learner::Ppo(ppo()?),
            AgentKind::Ensemble => Learner::Ensemble {
                dqn: dqn()?,
                ppo: ppo()?,
                state: EnsembleState::new(EnsembleConfig::default())?,
                last_returns: [0.0; 2],
            },
            AgentKind::Mpc => Learner::Mpc(Box::new(MpcPlanner::new(env, MpcConfig::default())?)),
            AgentKind::Random => Learner::Random,
            AgentKind::AlwaysOff => Learner::Constant(Action::all_off()),
            AgentKind::AlwaysOn => Learner::Constant(Action::all_on(env.spin_spec.n_spins)),
        })
    }

    /// Plays one full episode from `env.reset(episode_seed)`.
    pub fn run_episode<R: Rng + ?Sized>(
        &mut self,
        env: &mut ScsEnv,
        episode: usize,
        episode_seed: u64,
        mode: Mode,
        rng: &mut R,
    ) -> Result<EpisodeRecord> {
        let n = env.config().spin_spec.n_spins;
        let horizon = env.config().timesteps;
        let train = mode == Mode::Train;
        let mut obs = env.reset(episode_seed);
        let mut totals = Totals::default();
        let mut epsilon = None;
        let mut omega = None;
        let mut rollout: Vec<PpoStep> = Vec::new();
        let mut credit = [(0.0, 0usize); 2];

        while !env.is_done() {
            let (action, ppo_info) = match self {
                Learner::Dqn(agent) => {
                    let eps = if train { agent.epsilon() } else { 0.0 };
                    epsilon = Some(eps);
                    (qscs_core::agents::dqn_act(obs.features(), eps, agent.online(), rng)?, None)
                }
                Learner::Ppo(agent) => {
                    let (a, lp, v) = agent.act(&obs, rng)?;
                    (a, Some((lp, v, true)))
                }
                Learner::Ensemble { dqn, ppo, state, .. } => {
                    omega = Some(state.omega_dqn());
                    let c = ensemble_act(&obs, dqn.online(), ppo.policy(), ppo.value_net(), state, rng)?;
                    (c.action, Some((c.ppo_log_prob, c.ppo_value, c.source == Source::Ppo)))
                }
                Learner::Mpc(planner) => (planner.plan(env.state())?.index(), None),
                Learner::Random => (rng.random_range(0..1usize << n), None),
                Learner::Constant(a) => (a.index(), None),
            };
            let outcome = env.step(Action::new(action as u32, n)?)?;
            let r = outcome.reward.total;
            totals.add(r, outcome.reward.raw_f);

            if let Some((_, _, on_policy)) = ppo_info {
                credit[usize::from(on_policy)].0 += r;
                credit[usize::from(on_policy)].1 += 1;
            }
            if train {
                match self {
                    Learner::Dqn(agent) | Learner::Ensemble { dqn: agent, .. } => {
                        agent.remember(Transition {
                            s: obs.clone(),
                            a: action,
                            r,
                            s_next: outcome.observation.clone(),
                            done: outcome.done,
                        });
                        agent.learn(rng)?;
                    }
                    _ => {}
                }
                if let Some((log_prob, value, on_policy)) = ppo_info {
                    rollout.push(PpoStep {
                        obs: obs.clone(),
                        action,
                        log_prob,
                        value,
                        reward: r,
                        done: outcome.done,
                        on_policy,
                    });
                }
            }
            obs = outcome.observation;
        }

        if train {
            match self {
                Learner::Dqn(agent) => agent.end_episode(),
                Learner::Ppo(agent) => {
                    agent.update(&rollout, 0.0, rng)?;
                }
                Learner::Ensemble { dqn, ppo, state, last_returns } => {
                    dqn.end_episode();
                    ppo.update(&rollout, 0.0, rng)?;
                    // index 0: DQN-sourced steps, 1: PPO-sourced steps
                    for (k, &(sum, count)) in credit.iter().enumerate() {
                        if count > 0 {
                            last_returns[k] = sum / count as f64 * horizon as f64;
                        }
                    }
                    state.reweight(last_returns[0], last_returns[1])?;
                }
                _ => {}
            }
        }

        let s = env.state();
        Ok(EpisodeRecord {
            episode,
            episode_return: totals.reward,
            mean_fidelity: totals.fidelity / totals.steps as f64,
            final_security: s.security_score,
            episode_co2: s.co2_cum,
            epsilon,
            omega_dqn: omega,
        })
    }
}

#[derive(Default)]
struct Totals {
    reward: f64,
    fidelity: f64,
    steps: usize,
}

impl Totals {
    fn add(&mut self, reward: f64, fidelity: f64) {
        self.reward += reward;
        self.fidelity += fidelity;
        self.steps += 1;
    }
}

/// Seed of episode `k` of a run; shared by every agent so that runs with the
/// same base seed face identical demand and noise draws.
pub fn episode_seed(run_seed: u64, episode: usize) -> u64 {
    derive_seed(run_seed, episode as u64)
}

fn agent_rng(run_seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(run_seed, u64::MAX))
}

/// Writes rows to `<path>.partial` and renames to `path` only once the run
/// has finished; an aborted run leaves the flushed `.partial` file behind.
pub struct IncrementalCsv {
    writer: csv::Writer<File>,
    partial: PathBuf,
    path: PathBuf,
}

impl IncrementalCsv {
    pub fn create(path: &Path) -> Result<Self> {
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir)?;
        }
        let mut partial = path.as_os_str().to_owned();
        partial.push(".partial");
        let partial = PathBuf::from(partial);
        Ok(Self { writer: csv::Writer::from_path(&partial)?, partial, path: path.to_owned() })
    }

    pub fn push<T: Serialize>(&mut self, row: &T) -> Result<()> {
        self.writer.serialize(row)?;
        self.writer.flush()?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<()> {
        self.writer.flush()?;
        drop(self.writer);
        fs::rename(&self.partial, &self.path)?;
        Ok(())
    }
}

/// Trains `config.agent` for `config.episodes` episodes, optionally streaming
/// the per-episode CSV, and returns the records with the trained learner.
pub fn train(config: &RunConfig, csv_path: Option<&Path>) -> Result<(Vec<EpisodeRecord>, Learner)> {
    config.validate()?;
    let mut env = ScsEnv::new(config.env.clone())?;
    let mut learner = Learner::new(config.agent, &config.env, config.lr, derive_seed(config.seed, u64::MAX - 1))?;
    let mut rng = agent_rng(config.seed);
    let mut sink = csv_path.map(IncrementalCsv::create).transpose()?;
    let mut records = Vec::with_capacity(config.episodes);
    for k in 0..config.episodes {
        let record = learner.run_episode(&mut env, k, episode_seed(config.seed, k), Mode::Train, &mut rng)?;
        if let Some(s) = sink.as_mut() {
            s.push(&record)?;
        }
        records.push(record);
    }
    if let Some(s) = sink {
        s.finish()?;
    }
    Ok((records, learner))
}

/// Algorithm-1 training loop writing `<out_dir>/episodes.csv`.
pub fn run_training(config: &RunConfig) -> Result<Vec<EpisodeRecord>> {
    Ok(train(config, Some(&config.out_dir.join("episodes.csv")))?.0)
}

/// Frozen-policy evaluation on `env`, one episode per seed in `seeds`.
pub fn evaluate(learner: &mut Learner, env: &EnvConfig, seeds: &[u64], rng_seed: u64) -> Result<Vec<EpisodeRecord>> {
    let mut env = ScsEnv::new(env.clone())?;
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    seeds
        .iter()
        .enumerate()
        .map(|(k, &s)| learner.run_episode(&mut env, k, s, Mode::Evaluate, &mut rng))
        .collect()
}

pub fn read_episode_csv(path: &Path) -> Result<Vec<EpisodeRecord>> {
    let mut reader = csv::Reader::from_path(path)?;
    Ok(reader.deserialize().collect::<std::result::Result<_, _>>()?)
}

use crate::env::{Action, DeterministicTwin, EnvConfig, EnvState};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MpcConfig {
    pub horizon: usize,
    /// Maximum number of enumerated action sequences.
    pub budget: u128,
}

impl Default for MpcConfig {
    fn default() -> Self {
        Self { horizon: 3, budget: 1_000_000 }
    }
}

impl MpcConfig {
    pub fn validate(&self, n_spins: usize) -> Result<()> {
        if self.horizon == 0 {
            return Err(Error::InvalidConfig("MPC horizon must be >= 1".into()));
        }
        let size = (1u128 << n_spins).checked_pow(self.horizon as u32).unwrap_or(u128::MAX);
        if size > self.budget {
            return Err(Error::BudgetExceeded { size, budget: self.budget });
        }
        Ok(())
    }
}

/// Receding-horizon planner that scores raw rewards on the deterministic twin.
#[derive(Debug, Clone)]
pub struct MpcPlanner {
    twin: DeterministicTwin,
    config: MpcConfig,
}

impl MpcPlanner {
    pub fn new(env: &EnvConfig, config: MpcConfig) -> Result<Self> {
        config.validate(env.spin_spec.n_spins)?;
        Ok(Self { twin: DeterministicTwin::new(env)?, config })
    }

    pub fn twin(&self) -> &DeterministicTwin {
        &self.twin
    }

    /// First action of the best sequence over the remaining horizon. Among
    /// equal totals the lexicographically smallest sequence wins.
    pub fn plan(&self, state: &EnvState) -> Result<Action> {
        let remaining = self.twin.config().timesteps.saturating_sub(state.t);
        if remaining == 0 {
            return Err(Error::EpisodeFinished(state.t));
        }
        let depth = self.config.horizon.min(remaining);
        let n = self.twin.config().spin_spec.n_spins;
        let mut best: Option<(f64, u32)> = None;
        for mask in 0..1u32 << n {
            let action = Action::new(mask, n)?;
            let (next, raw) = self.twin.step(state, action)?;
            let value = self.twin.raw_reward(raw) + self.best_value(&next, depth - 1)?;
            if best.is_none_or(|(v, _)| value > v) {
                best = Some((value, mask));
            }
        }
        let (_, mask) = best.expect("at least one action");
        Action::new(mask, n)
    }

    fn best_value(&self, state: &EnvState, depth: usize) -> Result<f64> {
        if depth == 0 {
            return Ok(0.0);
        }
        let n = self.twin.config().spin_spec.n_spins;
        let mut best = f64::NEG_INFINITY;
        for mask in 0..1u32 << n {
            let (next, raw) = self.twin.step(state, Action::new(mask, n)?)?;
            best = best.max(self.twin.raw_reward(raw) + self.best_value(&next, depth - 1)?);
        }
        Ok(best)
    }

    /// Raw-reward return of closed-loop MPC over one twin episode.
    pub fn twin_episode_return(&self) -> Result<f64> {
        let mut state = self.twin.initial()?;
        let mut total = 0.0;
        while state.t < self.twin.config().timesteps {
            let (next, raw) = self.twin.step(&state, self.plan(&state)?)?;
            total += self.twin.raw_reward(raw);
            state = next;
        }
        Ok(total)
    }
}

/// One-shot planning call; builds the twin each time, so prefer
/// [`MpcPlanner`] inside loops.
pub fn mpc_plan(state: &EnvState, env: &EnvConfig, config: &MpcConfig) -> Result<Action> {
    MpcPlanner::new(env, *config)?.plan(state)
}

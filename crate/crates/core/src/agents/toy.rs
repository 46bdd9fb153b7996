//! Small environments with known optima, used to check the learners.

use rand::Rng;

use crate::env::Observation;

/// Five-state corridor. Action 1 moves right, action 0 moves left (state 0
/// stays put). Moving right from the last state pays 1 and terminates.
#[derive(Debug, Clone)]
pub struct ChainMdp {
    n_states: usize,
    state: usize,
    steps: usize,
    step_cap: usize,
}

/// Result of one [`ChainMdp::step`].
#[derive(Debug, Clone, PartialEq)]
pub struct ToyStep {
    pub observation: Observation,
    pub reward: f64,
    /// True terminal (no bootstrap).
    pub terminal: bool,
    /// Step cap hit; the episode ends but the state is not terminal.
    pub truncated: bool,
}

impl Default for ChainMdp {
    fn default() -> Self {
        Self::new(5, 20)
    }
}

impl ChainMdp {
    pub fn new(n_states: usize, step_cap: usize) -> Self {
        Self { n_states, state: 0, steps: 0, step_cap }
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn state(&self) -> usize {
        self.state
    }

    pub fn encode(&self, state: usize) -> Observation {
        let mut v = vec![0.0; self.n_states];
        v[state] = 1.0;
        Observation::new(v)
    }

    /// Uniformly random start state.
    pub fn reset<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Observation {
        self.state = rng.random_range(0..self.n_states);
        self.steps = 0;
        self.encode(self.state)
    }

    pub fn step(&mut self, action: usize) -> ToyStep {
        self.steps += 1;
        let (next, reward, terminal) = self.transition(self.state, action);
        self.state = next;
        ToyStep {
            observation: self.encode(next),
            reward,
            terminal,
            truncated: !terminal && self.steps >= self.step_cap,
        }
    }

    fn transition(&self, s: usize, action: usize) -> (usize, f64, bool) {
        match action {
            0 => (s.saturating_sub(1), 0.0, false),
            _ if s + 1 == self.n_states => (s, 1.0, true),
            _ => (s + 1, 0.0, false),
        }
    }

    /// Tabular `Q*` by value iteration.
    pub fn optimal_q(&self, gamma: f64) -> Vec<[f64; 2]> {
        let mut q = vec![[0.0f64; 2]; self.n_states];
        loop {
            let mut delta = 0.0f64;
            let v: Vec<f64> = q.iter().map(|r| r[0].max(r[1])).collect();
            for s in 0..self.n_states {
                for a in 0..2 {
                    let (next, r, terminal) = self.transition(s, a);
                    let backup = r + if terminal { 0.0 } else { gamma * v[next] };
                    delta = delta.max((backup - q[s][a]).abs());
                    q[s][a] = backup;
                }
            }
            if delta < 1e-14 {
                return q;
            }
        }
    }
}

/// One-step bandit with a constant observation: arm 1 pays 1, arm 0 pays 0.
#[derive(Debug, Clone, Copy, Default)]
pub struct TwoArmedBandit;

impl TwoArmedBandit {
    pub const BEST_ARM: usize = 1;

    pub fn observation(&self) -> Observation {
        Observation::new(vec![1.0])
    }

    pub fn pull(&self, arm: usize) -> f64 {
        if arm == Self::BEST_ARM {
            1.0
        } else {
            0.0
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn value_iteration_closed_form() {
        let q = ChainMdp::default().optimal_q(0.95);
        for (s, row) in q.iter().enumerate() {
            assert!((row[1] - 0.95f64.powi(4 - s as i32)).abs() < 1e-12);
        }
        assert!((q[0][0] - 0.95f64.powi(5)).abs() < 1e-12);
    }

    #[test]
    fn chain_dynamics() {
        let mut m = ChainMdp::new(5, 3);
        m.state = 3;
        assert_eq!(m.step(1).reward, 0.0);
        let last = m.step(1);
        assert!(last.terminal && last.reward == 1.0);
        let mut m = ChainMdp::new(5, 2);
        m.step(0);
        assert!(m.step(0).truncated);
        assert_eq!(m.state(), 0);
    }
}

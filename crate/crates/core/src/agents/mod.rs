//! Value-based, policy-gradient and mixture agents over discrete actions.

mod dqn;
mod ensemble;
mod policy;
mod ppo;
mod replay;
pub mod toy;

pub use dqn::{dqn_act, dqn_targets, epsilon_after, DqnAgent, DqnConfig};
pub use ensemble::{
    ensemble_act, ensemble_distribution, mixture, softened_greedy, EnsembleChoice, EnsembleConfig, EnsembleState,
    Source,
};
pub use policy::{argmax, log_softmax, sample_categorical, softmax};
pub use ppo::{
    clipped_surrogate, gae_advantages, ppo_act, surrogate_logit_grad, Gae, PpoAgent, PpoConfig, PpoStats, PpoStep,
};
pub use replay::{ReplayBuffer, Transition};

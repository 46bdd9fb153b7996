//! Seeded training runs and the four parameter studies over the
//! supply-chain environment, with CSV summaries and SVG learning curves.

pub mod config;
mod error;
pub mod plot;
pub mod stats;
pub mod studies;
pub mod train;

pub use config::{derive_seed, AgentKind, RunConfig};
pub use error::{HarnessError, Result};
pub use train::{evaluate, read_episode_csv, run_training, train, EpisodeRecord, Learner, Mode};

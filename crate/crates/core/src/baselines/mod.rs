//! Model-based comparison points: GRAPE pulse shaping, receding-horizon
//! MPC on the deterministic twin, and fixed published reference values.

mod grape;
mod mpc;

pub use grape::{grape_gradient, grape_optimize, schedule_fidelity, write_schedule_csv, GrapeConfig, GrapeResult};
pub use mpc::{mpc_plan, MpcConfig, MpcPlanner};

/// Published episode-return levels, for plot overlays only.
pub fn reference_lines() -> [(&'static str, f64); 3] {
    [("GRAPE", 13.00), ("MPC", 12.20), ("Human", 13.10)]
}

//! Exact simulation of the controlled XY spin chain.
//!
//! Basis convention: computational basis index `k` has spin `n` (1-based,
//! leftmost) encoded in bit `N - n` of `k`, so for two spins the ordering
//! is `|00⟩, |01⟩, |10⟩, |11⟩`. A `1` bit is an excitation and
//! `σᶻ|0⟩ = +|0⟩`.

mod chain;
mod lie;
mod noise;
mod operator;
mod state;

pub use chain::{build_hamiltonian, FieldConfig, SpinChainSpec, MAX_SPINS};
pub use lie::{lie_algebra_rank, DEFAULT_CLOSURE_TOLERANCE};
pub use noise::{apply_noise_channel, perturb_fields, NoiseChannelSpec, NoiseKind};
pub use operator::{
    evolve, excitation_number, pauli, site_operator, total_magnetization, HermitianOperator, Pauli,
    Propagator,
};
pub use state::{fidelity, make_basis_state, make_w_state, PureState};

pub use num_complex::Complex64;

//! Comparison methods: softmin consensus-based optimization and particle
//! swarm optimization.

pub mod pso;
pub mod softmin;

pub use pso::{Pso, PsoParams, PsoState};
pub use softmin::{softmin_consensus, NoiseMode, SoftminCbo, SoftminCboParams, SoftminState};

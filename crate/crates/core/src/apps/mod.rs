//! Application harnesses: Sharpe-ratio portfolio selection on the simplex
//! and sparse recovery on an ℓ^½ ball.

pub mod portfolio;
pub mod sensing;

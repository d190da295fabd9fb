//! Discrete consensus-based optimization.
//!
//! A swarm of agents explores the search space with two stochastic update
//! maps that pull every agent toward the current best agent (the *hardmin*
//! consensus point). The best objective value is monotone by construction,
//! and the swarm collapses onto a single point when the best value stops
//! improving.
//!
//! The crate provides:
//!
//! - [`dynamics`]: swarm state, the anisotropic and isotropic update maps,
//!   consensus-point selection and the single-run driver.
//! - [`restart`]: repeated rounds that carry the best point forward.
//! - [`analysis`]: closed-form and Monte-Carlo checks of the parameter
//!   conditions under which the swarm contracts.
//! - [`objectives`] and [`envelope`]: the benchmark suite and the
//!   modulus-of-continuity machinery for success-probability bounds.
//! - [`domain`]: boxes, the probability simplex and ℓᵖ quasi-norm balls.
//! - [`baselines`]: softmin CBO and particle swarm optimizers.
//! - [`registry`]: every optimizer behind one trait, selected by name.
//! - [`apps`]: portfolio Sharpe-ratio maximization and compressed sensing.
//! - [`experiment`]: multi-trial orchestration and aggregate statistics.
//!
//! # Example
//!
//! ```
//! use dcbo::{
//!     dynamics::{Dcbo, DcboParams},
//!     objectives::ObjectiveRegistry,
//!     report::StoppingCriteria,
//!     rng::RngPolicy,
//! };
//!
//! let objective = ObjectiveRegistry::standard().build("sphere", 4).unwrap();
//! let dcbo = Dcbo::new(DcboParams::default(), 20).unwrap();
//! let stop = StoppingCriteria::new(2_000, 1e-7).unwrap();
//! let streams = RngPolicy::new(7).trial(0);
//! let report = dcbo
//!     .run(&objective, objective.domain(), &objective.default_init(), &stop, &streams)
//!     .unwrap();
//! assert!(report.final_fp < 1e-6);
//! ```

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod apps;
pub mod baselines;
pub mod domain;
pub mod dynamics;
pub mod envelope;
pub mod error;
pub mod experiment;
pub mod objectives;
pub mod registry;
pub mod report;
pub mod restart;
pub mod rng;

pub use error::{Error, Result};

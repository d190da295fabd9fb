use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Why a run stopped.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Termination {
    /// `maxᵢ ‖xⁱ - p‖ < max_dist`.
    Consensus,
    MaxIter,
    /// The best value changed by less than the stall tolerance for a full
    /// window (particle swarm only).
    Stalled,
}

impl Termination {
    pub fn as_str(&self) -> &'static str {
        match self {
            Termination::Consensus => "consensus",
            Termination::MaxIter => "max-iter",
            Termination::Stalled => "stalled",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StoppingCriteria {
    pub max_iter: usize,
    pub max_dist: f64,
}

impl StoppingCriteria {
    /// `max_iter = 0` is accepted and yields a report of the initial state.
    pub fn new(max_iter: usize, max_dist: f64) -> Result<Self> {
        if !(max_dist > 0.0) {
            return Err(Error::invalid(format!(
                "max_dist must be positive, got {max_dist}"
            )));
        }
        Ok(Self { max_iter, max_dist })
    }
}

impl Default for StoppingCriteria {
    fn default() -> Self {
        Self {
            max_iter: 10_000,
            max_dist: 1e-7,
        }
    }
}

/// Trajectory summary of a single run.
///
/// Entry `n` of `fp_trace` and `diameter_trace` describes the state after
/// `n` steps, so both have `iterations + 1` entries. `p_jump_trace[n]` is
/// `‖pₙ₊₁ - pₙ‖` and has `iterations` entries.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialReport {
    pub fp_trace: Vec<f64>,
    pub p_jump_trace: Vec<f64>,
    pub diameter_trace: Vec<f64>,
    pub iterations: usize,
    pub termination: Termination,
    pub final_p: Vec<f64>,
    pub final_fp: f64,
    pub evaluations: u64,
}

impl TrialReport {
    /// `Σₙ ‖pₙ₊₁ - pₙ‖`.
    pub fn p_path_length(&self) -> f64 {
        self.p_jump_trace.iter().sum()
    }
}

pub(crate) fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

pub(crate) fn max_distance_to(points: &[Vec<f64>], center: &[f64]) -> f64 {
    points
        .iter()
        .map(|x| distance(x, center))
        .fold(0.0, f64::max)
}

//! Hardmin consensus dynamics.
//!
//! Each step moves every agent toward the consensus point `p`, the
//! lowest-index agent holding the smallest objective value:
//!
//! - anisotropic map: `x + γ¹(p - x) + γ²(p - x) ⊙ η`
//! - isotropic map:   `x + γ̄¹(p - x) + γ̄²‖p - x‖ η / √d`
//!
//! with `η` a vector of independent standard normals. The agent holding
//! `p` sees zero drift and zero noise, so it never moves and the best
//! value can only decrease.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::Domain;
use crate::error::{Error, Result};
use crate::objectives::{InitDistribution, ObjectiveSpec};
use crate::report::{distance, max_distance_to, StoppingCriteria, Termination, TrialReport};
use crate::rng::{Purpose, Streams};

/// Draws allowed per agent before initialization gives up.
pub const INIT_RETRY_BUDGET: usize = 10_000;

/// The four drift/noise coefficients.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Coefficients {
    pub gamma1: f64,
    pub gamma2: f64,
    pub gbar1: f64,
    pub gbar2: f64,
}

impl Coefficients {
    /// `(γ¹, γ², γ̄¹, γ̄²) = (0.5, 1, 0.4, 0.7)`, used for the benchmark,
    /// portfolio and compressed sensing experiments.
    pub const BENCHMARK: Coefficients = Coefficients {
        gamma1: 0.5,
        gamma2: 1.0,
        gbar1: 0.4,
        gbar2: 0.7,
    };
}

impl Default for Coefficients {
    fn default() -> Self {
        Self::BENCHMARK
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DcboParams {
    coefficients: Coefficients,
    mix_count: Option<usize>,
}

impl DcboParams {
    pub fn new(gamma1: f64, gamma2: f64, gbar1: f64, gbar2: f64) -> Result<Self> {
        Self::from_coefficients(Coefficients {
            gamma1,
            gamma2,
            gbar1,
            gbar2,
        })
    }

    pub fn from_coefficients(c: Coefficients) -> Result<Self> {
        let unit = |v: f64| v > 0.0 && v < 1.0;
        if !unit(c.gamma1) {
            return Err(Error::invalid(format!(
                "gamma1 must lie in (0,1), got {}",
                c.gamma1
            )));
        }
        if !unit(c.gbar1) {
            return Err(Error::invalid(format!(
                "gbar1 must lie in (0,1), got {}",
                c.gbar1
            )));
        }
        if !(c.gamma2 >= 0.0 && c.gamma2.is_finite()) {
            return Err(Error::invalid(format!(
                "gamma2 must be ≥ 0, got {}",
                c.gamma2
            )));
        }
        if !(c.gbar2 >= 0.0 && c.gbar2.is_finite()) {
            return Err(Error::invalid(format!(
                "gbar2 must be ≥ 0, got {}",
                c.gbar2
            )));
        }
        Ok(Self {
            coefficients: c,
            mix_count: None,
        })
    }

    /// Number of agents (the first ones) that use the anisotropic map.
    /// Defaults to `⌊N/2⌋`.
    pub fn with_mix_count(mut self, mix_count: usize) -> Self {
        self.mix_count = Some(mix_count);
        self
    }

    pub fn coefficients(&self) -> &Coefficients {
        &self.coefficients
    }

    pub fn mix_count(&self) -> Option<usize> {
        self.mix_count
    }

    pub fn anisotropic_count(&self, n_agents: usize) -> Result<usize> {
        let k = self.mix_count.unwrap_or(n_agents / 2);
        if k > n_agents {
            return Err(Error::invalid(format!(
                "mix_count {k} exceeds the number of agents {n_agents}"
            )));
        }
        Ok(k)
    }
}

impl Default for DcboParams {
    fn default() -> Self {
        Self {
            coefficients: Coefficients::BENCHMARK,
            mix_count: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DiffusionMap {
    Anisotropic,
    Isotropic,
}

impl DiffusionMap {
    /// Apply the map to `x` in place.
    #[inline]
    pub fn apply(self, x: &mut [f64], p: &[f64], eta: &[f64], c: &Coefficients) {
        match self {
            DiffusionMap::Anisotropic => {
                for ((xk, pk), ek) in x.iter_mut().zip(p).zip(eta) {
                    let diff = pk - *xk;
                    *xk += c.gamma1 * diff + c.gamma2 * diff * ek;
                }
            }
            DiffusionMap::Isotropic => {
                let scale = c.gbar2 * distance(p, x) / (x.len() as f64).sqrt();
                for ((xk, pk), ek) in x.iter_mut().zip(p).zip(eta) {
                    *xk += c.gbar1 * (pk - *xk) + scale * ek;
                }
            }
        }
    }
}

/// `x + γ¹(p - x) + γ²(p - x) ⊙ η`.
pub fn step_anisotropic(x: &[f64], p: &[f64], eta: &[f64], params: &DcboParams) -> Vec<f64> {
    let mut out = x.to_vec();
    DiffusionMap::Anisotropic.apply(&mut out, p, eta, params.coefficients());
    out
}

/// `x + γ̄¹(p - x) + γ̄²‖p - x‖ η / √d`.
pub fn step_isotropic(x: &[f64], p: &[f64], eta: &[f64], params: &DcboParams) -> Vec<f64> {
    let mut out = x.to_vec();
    DiffusionMap::Isotropic.apply(&mut out, p, eta, params.coefficients());
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConsensusChoice {
    /// Zero-based index of the consensus agent.
    pub index: usize,
    /// More than one agent attains the minimum.
    pub is_tie: bool,
}

/// Smallest index attaining the minimum value.
pub fn select_consensus_point(values: &[f64]) -> Result<ConsensusChoice> {
    let mut best: Option<(usize, f64)> = None;
    let mut ties = 0usize;
    for (i, &v) in values.iter().enumerate() {
        if v == f64::INFINITY {
            continue;
        }
        match best {
            Some((_, bv)) if v > bv => {}
            Some((_, bv)) if v == bv => ties += 1,
            _ => {
                best = Some((i, v));
                ties = 0;
            }
        }
    }
    best.map(|(index, _)| ConsensusChoice {
        index,
        is_tie: ties > 0,
    })
    .ok_or(Error::NoFeasibleAgent)
}

/// Positions, cached values and the consensus point of a swarm.
#[derive(Clone, Debug, PartialEq)]
pub struct SwarmState {
    pub positions: Vec<Vec<f64>>,
    pub values: Vec<f64>,
    pub best_index: usize,
    pub p: Vec<f64>,
    pub fp: f64,
    pub iteration: usize,
}

impl SwarmState {
    /// Evaluate `positions` and pick the consensus point.
    pub fn from_positions(positions: Vec<Vec<f64>>, objective: &ObjectiveSpec) -> Result<Self> {
        if positions.is_empty() {
            return Err(Error::invalid("swarm needs at least one agent"));
        }
        let mut values = Vec::with_capacity(positions.len());
        for (agent, x) in positions.iter().enumerate() {
            if x.len() != objective.dim() {
                return Err(Error::DimensionMismatch {
                    expected: objective.dim(),
                    got: x.len(),
                });
            }
            let v = objective.eval(x);
            if v.is_nan() {
                return Err(Error::NanObjective {
                    agent,
                    iteration: 0,
                });
            }
            values.push(v);
        }
        let choice = select_consensus_point(&values)?;
        Ok(Self {
            p: positions[choice.index].clone(),
            fp: values[choice.index],
            best_index: choice.index,
            positions,
            values,
            iteration: 0,
        })
    }

    pub fn n_agents(&self) -> usize {
        self.positions.len()
    }

    pub fn dim(&self) -> usize {
        self.p.len()
    }

    fn reselect(&mut self) -> Result<()> {
        let choice = select_consensus_point(&self.values)?;
        self.best_index = choice.index;
        self.p.clone_from(&self.positions[choice.index]);
        self.fp = self.values[choice.index];
        Ok(())
    }
}

/// `maxᵢ ‖xⁱ - p‖`, the quantity the stopping rule compares to `max_dist`.
pub fn swarm_diameter(state: &SwarmState) -> f64 {
    max_distance_to(&state.positions, &state.p)
}

/// `max_{i,j} ‖xⁱ - xʲ‖`. Always between `swarm_diameter` and twice it.
pub fn pairwise_diameter(state: &SwarmState) -> f64 {
    let xs = &state.positions;
    let mut best = 0.0f64;
    for i in 0..xs.len() {
        for j in (i + 1)..xs.len() {
            best = best.max(distance(&xs[i], &xs[j]));
        }
    }
    best
}

/// Draw `n_agents` i.i.d. positions from `init` and evaluate them.
///
/// Draws outside the objective's domain are rejected and redrawn, at most
/// [`INIT_RETRY_BUDGET`] times per agent.
pub fn init_swarm(
    objective: &ObjectiveSpec,
    n_agents: usize,
    init: &InitDistribution,
    streams: &Streams,
) -> Result<SwarmState> {
    init_swarm_carrying(objective, n_agents, init, streams, None)
}

/// Like [`init_swarm`], but agent 0 starts at `carried` when given.
pub(crate) fn init_swarm_carrying(
    objective: &ObjectiveSpec,
    n_agents: usize,
    init: &InitDistribution,
    streams: &Streams,
    carried: Option<&[f64]>,
) -> Result<SwarmState> {
    if n_agents == 0 {
        return Err(Error::invalid("n_agents must be positive"));
    }
    if init.dim() != objective.dim() {
        return Err(Error::DimensionMismatch {
            expected: objective.dim(),
            got: init.dim(),
        });
    }
    let domain = objective.domain();
    let mut positions = Vec::with_capacity(n_agents);
    for agent in 0..n_agents {
        if agent == 0 {
            if let Some(x) = carried {
                positions.push(x.to_vec());
                continue;
            }
        }
        let mut rng = streams.rng(Purpose::Init, agent as u64, 0);
        let mut drawn = None;
        for _ in 0..INIT_RETRY_BUDGET {
            let x = init.sample(&mut rng);
            if domain.contains(&x) {
                drawn = Some(x);
                break;
            }
        }
        positions.push(drawn.ok_or(Error::InitializationFailed {
            agent,
            attempts: INIT_RETRY_BUDGET,
        })?);
    }
    SwarmState::from_positions(positions, objective)
}

/// One step of the dynamics (see [`Dcbo::step`]).
pub fn step_swarm(
    state: &mut SwarmState,
    objective: &ObjectiveSpec,
    params: &DcboParams,
    domain: &Domain,
    streams: &Streams,
) -> Result<()> {
    Dcbo {
        params: *params,
        n_agents: state.n_agents(),
        parallel: false,
    }
    .step(state, objective, domain, streams)
}

/// Single-run driver with the four-coefficient hardmin dynamics.
#[derive(Clone, Debug, PartialEq)]
pub struct Dcbo {
    pub params: DcboParams,
    pub n_agents: usize,
    /// Evaluate agents of one step on the rayon pool. The trajectory is the
    /// same either way.
    pub parallel: bool,
}

impl Dcbo {
    pub fn new(params: DcboParams, n_agents: usize) -> Result<Self> {
        if n_agents == 0 {
            return Err(Error::invalid("n_agents must be positive"));
        }
        params.anisotropic_count(n_agents)?;
        Ok(Self {
            params,
            n_agents,
            parallel: false,
        })
    }

    pub fn with_parallel(mut self, parallel: bool) -> Self {
        self.parallel = parallel;
        self
    }

    /// Move every agent except the consensus agent, project onto the
    /// domain when it has a projection, re-evaluate, and reselect `p`.
    pub fn step(
        &self,
        state: &mut SwarmState,
        objective: &ObjectiveSpec,
        domain: &Domain,
        streams: &Streams,
    ) -> Result<()> {
        let n_aniso = self.params.anisotropic_count(state.n_agents())?;
        let coeffs = *self.params.coefficients();
        let iteration = state.iteration;
        let best = state.best_index;
        let previous_fp = state.fp;
        let dim = state.dim();

        let SwarmState {
            positions,
            values,
            p,
            ..
        } = state;
        let p: &[f64] = p;

        let update = |i: usize, x: &mut Vec<f64>, v: &mut f64, eta: &mut Vec<f64>| -> Result<()> {
            if i == best {
                return Ok(());
            }
            streams.fill_normals(Purpose::Noise, i as u64, iteration as u64, eta);
            let map = if i < n_aniso {
                DiffusionMap::Anisotropic
            } else {
                DiffusionMap::Isotropic
            };
            map.apply(x, p, eta, &coeffs);
            domain.project_in_place(x);
            let f = objective.eval(x);
            if f.is_nan() {
                return Err(Error::NanObjective {
                    agent: i,
                    iteration: iteration + 1,
                });
            }
            *v = f;
            Ok(())
        };

        if self.parallel {
            positions
                .par_iter_mut()
                .zip(values.par_iter_mut())
                .enumerate()
                .try_for_each_init(|| vec![0.0; dim], |eta, (i, (x, v))| update(i, x, v, eta))?;
        } else {
            let mut eta = vec![0.0; dim];
            for (i, (x, v)) in positions.iter_mut().zip(values.iter_mut()).enumerate() {
                update(i, x, v, &mut eta)?;
            }
        }

        state.iteration += 1;
        state.reselect()?;
        debug_assert!(state.fp <= previous_fp, "best value increased");
        Ok(())
    }

    /// Initialize a swarm from `init` and run it to termination.
    pub fn run(
        &self,
        objective: &ObjectiveSpec,
        domain: &Domain,
        init: &InitDistribution,
        stop: &StoppingCriteria,
        streams: &Streams,
    ) -> Result<TrialReport> {
        let state = init_swarm(objective, self.n_agents, init, streams)?;
        self.run_from(state, objective, domain, stop, streams)
    }

    /// Run an already-initialized swarm until `maxᵢ‖xⁱ - p‖ < max_dist` or
    /// `max_iter` steps have been taken.
    pub fn run_from(
        &self,
        mut state: SwarmState,
        objective: &ObjectiveSpec,
        domain: &Domain,
        stop: &StoppingCriteria,
        streams: &Streams,
    ) -> Result<TrialReport> {
        let n = state.n_agents() as u64;
        let mut evaluations = n;
        let mut fp_trace = vec![state.fp];
        let mut p_jump_trace = Vec::new();
        let mut diameter = swarm_diameter(&state);
        let mut diameter_trace = vec![diameter];
        let mut steps = 0usize;

        while steps < stop.max_iter && diameter >= stop.max_dist {
            let previous_p = state.p.clone();
            self.step(&mut state, objective, domain, streams)?;
            steps += 1;
            evaluations += n - 1;
            fp_trace.push(state.fp);
            p_jump_trace.push(distance(&state.p, &previous_p));
            diameter = swarm_diameter(&state);
            diameter_trace.push(diameter);
        }

        let termination = if diameter < stop.max_dist {
            Termination::Consensus
        } else {
            Termination::MaxIter
        };
        Ok(TrialReport {
            fp_trace,
            p_jump_trace,
            diameter_trace,
            iterations: steps,
            termination,
            final_fp: state.fp,
            final_p: state.p,
            evaluations,
        })
    }
}

/// Initialize and run in one call.
pub fn run_dcbo(
    objective: &ObjectiveSpec,
    params: &DcboParams,
    domain: &Domain,
    n_agents: usize,
    init: &InitDistribution,
    stop: &StoppingCriteria,
    streams: &Streams,
) -> Result<TrialReport> {
    Dcbo::new(*params, n_agents)?.run(objective, domain, init, stop, streams)
}

//! Consensus-based optimization with a Gibbs-weighted (softmin) consensus
//! point, discretized by Euler–Maruyama:
//!
//! `x ← x + hλ(x̄ - x) + √h·σ·G(x̄ - x)·η`
//!
//! where `x̄ = Σ xⁱ exp(-βf(xⁱ)) / Σ exp(-βf(xⁱ))`, `G` is either the
//! coordinate-wise (anisotropic) or norm-scaled (isotropic) diffusion, and
//! `η` is standard normal, per agent or shared across the swarm.

use serde::{Deserialize, Serialize};

use crate::domain::Domain;
use crate::dynamics::{init_swarm, DiffusionMap};
use crate::error::{Error, Result};
use crate::objectives::{InitDistribution, ObjectiveSpec};
use crate::report::{distance, max_distance_to, StoppingCriteria, Termination, TrialReport};
use crate::rng::{Purpose, Streams};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseMode {
    /// Independent noise per agent.
    Heterogeneous,
    /// One draw per step shared by all agents.
    Homogeneous,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SoftminCboParams {
    pub h: f64,
    pub lambda: f64,
    pub sigma: f64,
    pub beta: f64,
    pub noise: NoiseMode,
    pub diffusion: DiffusionMap,
}

impl SoftminCboParams {
    pub fn new(h: f64, lambda: f64, sigma: f64, beta: f64) -> Result<Self> {
        let p = Self {
            h,
            lambda,
            sigma,
            beta,
            ..Self::default()
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_noise(mut self, noise: NoiseMode) -> Self {
        self.noise = noise;
        self
    }

    pub fn with_diffusion(mut self, diffusion: DiffusionMap) -> Self {
        self.diffusion = diffusion;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.h > 0.0 && self.lambda > 0.0) {
            return Err(Error::invalid("softmin CBO needs h > 0 and λ > 0"));
        }
        if !(self.sigma >= 0.0) {
            return Err(Error::invalid("softmin CBO needs σ ≥ 0"));
        }
        if !(self.beta > 0.0) || self.beta.is_infinite() {
            return Err(Error::invalid("softmin CBO needs a finite β > 0"));
        }
        Ok(())
    }
}

impl Default for SoftminCboParams {
    fn default() -> Self {
        Self {
            h: 0.01,
            lambda: 0.5,
            sigma: 1.0,
            beta: 1e4,
            noise: NoiseMode::Heterogeneous,
            diffusion: DiffusionMap::Anisotropic,
        }
    }
}

/// Weighted mean with weights `exp(-β(f(xⁱ) - min f))`. The shift leaves
/// the result unchanged but keeps the largest weight at one. Infinite
/// values get weight zero and `β = 0` gives the plain centroid.
pub fn softmin_consensus(positions: &[Vec<f64>], values: &[f64], beta: f64) -> Result<Vec<f64>> {
    if positions.is_empty() || positions.len() != values.len() {
        return Err(Error::invalid("softmin needs one value per position"));
    }
    if !(beta >= 0.0) {
        return Err(Error::invalid("softmin needs β ≥ 0"));
    }
    if let Some(agent) = values.iter().position(|v| v.is_nan()) {
        return Err(Error::NanObjective {
            agent,
            iteration: 0,
        });
    }
    let fmin = values.iter().copied().fold(f64::INFINITY, f64::min);
    if fmin == f64::INFINITY {
        return Err(Error::NoFeasibleAgent);
    }
    let weights: Vec<f64> = values
        .iter()
        .map(|&v| {
            if v == f64::INFINITY {
                0.0
            } else {
                (-beta * (v - fmin)).exp()
            }
        })
        .collect();
    let total: f64 = weights.iter().sum();
    let mut out = vec![0.0; positions[0].len()];
    for (x, w) in positions.iter().zip(&weights) {
        if *w == 0.0 {
            continue;
        }
        for (o, v) in out.iter_mut().zip(x) {
            *o += w * v;
        }
    }
    out.iter_mut().for_each(|o| *o /= total);
    Ok(out)
}

#[derive(Clone, Debug, PartialEq)]
pub struct SoftminState {
    pub positions: Vec<Vec<f64>>,
    pub values: Vec<f64>,
    /// Softmin consensus of the current positions.
    pub consensus: Vec<f64>,
    pub iteration: usize,
}

impl SoftminState {
    pub fn new(positions: Vec<Vec<f64>>, values: Vec<f64>, beta: f64) -> Result<Self> {
        let consensus = softmin_consensus(&positions, &values, beta)?;
        Ok(Self {
            positions,
            values,
            consensus,
            iteration: 0,
        })
    }

    pub fn n_agents(&self) -> usize {
        self.positions.len()
    }

    pub fn dim(&self) -> usize {
        self.consensus.len()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SoftminCbo {
    pub params: SoftminCboParams,
    pub n_agents: usize,
}

impl SoftminCbo {
    pub fn new(params: SoftminCboParams, n_agents: usize) -> Result<Self> {
        params.validate()?;
        if n_agents == 0 {
            return Err(Error::invalid("n_agents must be positive"));
        }
        Ok(Self { params, n_agents })
    }

    pub fn init(
        &self,
        objective: &ObjectiveSpec,
        init: &InitDistribution,
        streams: &Streams,
    ) -> Result<SoftminState> {
        let swarm = init_swarm(objective, self.n_agents, init, streams)?;
        SoftminState::new(swarm.positions, swarm.values, self.params.beta)
    }

    /// Move every agent, project, re-evaluate and recompute the consensus.
    pub fn step(
        &self,
        state: &mut SoftminState,
        objective: &ObjectiveSpec,
        domain: &Domain,
        streams: &Streams,
    ) -> Result<()> {
        let p = &self.params;
        let dim = state.dim();
        let n = state.iteration as u64;
        let drift = p.h * p.lambda;
        let scale = p.h.sqrt() * p.sigma;
        let mut eta = vec![0.0; dim];
        if p.noise == NoiseMode::Homogeneous {
            streams.fill_normals(Purpose::SharedNoise, 0, n, &mut eta);
        }
        let xbar = &state.consensus;
        for (i, (x, v)) in state
            .positions
            .iter_mut()
            .zip(state.values.iter_mut())
            .enumerate()
        {
            if p.noise == NoiseMode::Heterogeneous {
                streams.fill_normals(Purpose::Noise, i as u64, n, &mut eta);
            }
            let gap_norm = distance(xbar, x);
            for k in 0..dim {
                let diff = xbar[k] - x[k];
                let g = match p.diffusion {
                    DiffusionMap::Anisotropic => diff,
                    DiffusionMap::Isotropic => gap_norm,
                };
                x[k] += drift * diff + scale * g * eta[k];
            }
            domain.project_in_place(x);
            let f = objective.eval(x);
            if f.is_nan() {
                return Err(Error::NanObjective {
                    agent: i,
                    iteration: state.iteration + 1,
                });
            }
            *v = f;
        }
        state.iteration += 1;
        state.consensus = softmin_consensus(&state.positions, &state.values, p.beta)?;
        Ok(())
    }

    /// The report's `fp_trace` records `f(x̄)`, which need not be monotone.
    pub fn run(
        &self,
        objective: &ObjectiveSpec,
        domain: &Domain,
        init: &InitDistribution,
        stop: &StoppingCriteria,
        streams: &Streams,
    ) -> Result<TrialReport> {
        let mut state = self.init(objective, init, streams)?;
        let n = state.n_agents() as u64;
        let mut evaluations = n + 1;
        let mut fp_trace = vec![objective.eval(&state.consensus)];
        let mut p_jump_trace = Vec::new();
        let mut diameter = max_distance_to(&state.positions, &state.consensus);
        let mut diameter_trace = vec![diameter];
        let mut steps = 0;
        while steps < stop.max_iter && diameter >= stop.max_dist {
            let previous = state.consensus.clone();
            self.step(&mut state, objective, domain, streams)?;
            steps += 1;
            evaluations += n + 1;
            fp_trace.push(objective.eval(&state.consensus));
            p_jump_trace.push(distance(&state.consensus, &previous));
            diameter = max_distance_to(&state.positions, &state.consensus);
            diameter_trace.push(diameter);
        }
        let termination = if diameter < stop.max_dist {
            Termination::Consensus
        } else {
            Termination::MaxIter
        };
        Ok(TrialReport {
            final_fp: *fp_trace.last().unwrap(),
            fp_trace,
            p_jump_trace,
            diameter_trace,
            iterations: steps,
            termination,
            final_p: state.consensus,
            evaluations,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objectives::ObjectiveRegistry;
    use crate::rng::RngPolicy;
    use proptest::prelude::*;

    #[test]
    fn beta_zero_is_the_centroid() {
        let xs = vec![vec![0.0, 1.0], vec![2.0, 3.0], vec![4.0, -1.0]];
        let c = softmin_consensus(&xs, &[5.0, 1.0, 3.0], 0.0).unwrap();
        assert!((c[0] - 2.0).abs() < 1e-15 && (c[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn large_beta_picks_the_minimum() {
        let xs = vec![vec![0.0], vec![1.0], vec![2.0]];
        let c = softmin_consensus(&xs, &[1.0, 0.5, 0.9], 1e6).unwrap();
        assert_eq!(c, vec![1.0]);
    }

    #[test]
    fn infinite_values_get_no_weight() {
        let xs = vec![vec![0.0], vec![10.0]];
        let c = softmin_consensus(&xs, &[2.0, f64::INFINITY], 0.0).unwrap();
        assert_eq!(c, vec![0.0]);
        assert!(matches!(
            softmin_consensus(&xs, &[f64::INFINITY; 2], 1.0),
            Err(Error::NoFeasibleAgent)
        ));
        assert!(softmin_consensus(&xs, &[f64::NAN, 1.0], 1.0).is_err());
    }

    #[test]
    fn full_drift_without_noise_collapses_in_one_step() {
        let sphere = ObjectiveRegistry::standard().build("sphere", 3).unwrap();
        let params = SoftminCboParams {
            h: 0.5,
            lambda: 2.0,
            sigma: 0.0,
            ..SoftminCboParams::default()
        };
        let cbo = SoftminCbo::new(params, 10).unwrap();
        let s = RngPolicy::new(3).trial(0);
        let mut state = cbo.init(&sphere, &sphere.default_init(), &s).unwrap();
        let xbar = state.consensus.clone();
        cbo.step(&mut state, &sphere, sphere.domain(), &s).unwrap();
        for x in &state.positions {
            assert!(distance(x, &xbar) < 1e-12);
        }
    }

    #[test]
    fn homogeneous_noise_is_shared() {
        let sphere = ObjectiveRegistry::standard().build("sphere", 2).unwrap();
        let params = SoftminCboParams {
            noise: NoiseMode::Homogeneous,
            diffusion: DiffusionMap::Isotropic,
            ..SoftminCboParams::default()
        };
        let cbo = SoftminCbo::new(params, 5).unwrap();
        let s = RngPolicy::new(3).trial(0);
        let mut state = cbo.init(&sphere, &sphere.default_init(), &s).unwrap();
        let before = state.clone();
        cbo.step(&mut state, &sphere, sphere.domain(), &s).unwrap();
        let mut eta = vec![0.0; 2];
        s.fill_normals(Purpose::SharedNoise, 0, 0, &mut eta);
        let p = &params;
        for (x0, x1) in before.positions.iter().zip(&state.positions) {
            let g = distance(&before.consensus, x0);
            for k in 0..2 {
                let diff = before.consensus[k] - x0[k];
                let want = x0[k] + p.h * p.lambda * diff + p.h.sqrt() * p.sigma * g * eta[k];
                assert!((x1[k] - want).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn converges_on_sphere() {
        let sphere = ObjectiveRegistry::standard().build("sphere", 4).unwrap();
        let cbo = SoftminCbo::new(SoftminCboParams::default(), 50).unwrap();
        let stop = StoppingCriteria::new(5_000, 1e-6).unwrap();
        let r = cbo
            .run(
                &sphere,
                sphere.domain(),
                &sphere.default_init(),
                &stop,
                &RngPolicy::new(4).trial(0),
            )
            .unwrap();
        assert_eq!(r.termination, Termination::Consensus);
        assert!(r.final_fp < 1e-2, "{}", r.final_fp);
        assert_eq!(r.fp_trace.len(), r.iterations + 1);
    }

    #[test]
    fn rejects_bad_params() {
        assert!(SoftminCboParams::new(0.0, 1.0, 1.0, 1.0).is_err());
        assert!(SoftminCboParams::new(0.1, 1.0, -1.0, 1.0).is_err());
        assert!(SoftminCboParams::new(0.1, 1.0, 1.0, 0.0).is_err());
        assert!(SoftminCboParams::new(0.1, 1.0, 1.0, 1.0).is_ok());
    }

    proptest! {
        #[test]
        fn consensus_lies_in_the_bounding_box(
            pts in prop::collection::vec((-10.0f64..10.0, -10.0f64..10.0, 0.0f64..5.0), 1..20),
            beta in 0.0f64..1e3,
        ) {
            let xs: Vec<Vec<f64>> = pts.iter().map(|t| vec![t.0, t.1]).collect();
            let vals: Vec<f64> = pts.iter().map(|t| t.2).collect();
            let c = softmin_consensus(&xs, &vals, beta).unwrap();
            for k in 0..2 {
                let lo = xs.iter().map(|x| x[k]).fold(f64::INFINITY, f64::min);
                let hi = xs.iter().map(|x| x[k]).fold(f64::NEG_INFINITY, f64::max);
                prop_assert!(c[k] >= lo - 1e-9 && c[k] <= hi + 1e-9);
            }
        }
    }
}

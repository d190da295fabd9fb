//! Particle swarm optimization with inertia weight, and the hybrid variant
//! that adds a small Gaussian perturbation to every particle each step.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::domain::Domain;
use crate::dynamics::{init_swarm, select_consensus_point};
use crate::error::{Error, Result};
use crate::objectives::{InitDistribution, ObjectiveSpec};
use crate::report::{distance, max_distance_to, StoppingCriteria, Termination, TrialReport};
use crate::rng::{Purpose, Streams};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PsoParams {
    /// Inertia weight.
    pub w: f64,
    pub c1: f64,
    pub c2: f64,
    /// Standard deviation of the per-coordinate perturbation; zero disables it.
    pub perturb_std: f64,
    pub stall_tol: f64,
    /// Consecutive steps with `|Δ gbest| < stall_tol` before stopping; zero
    /// disables the stall rule.
    pub stall_window: usize,
}

impl PsoParams {
    /// Constriction-equivalent coefficients `w = 0.729`, `c₁ = c₂ = 1.5`.
    pub fn standard() -> Self {
        Self {
            w: 0.729,
            c1: 1.5,
            c2: 1.5,
            perturb_std: 0.0,
            stall_tol: 1e-10,
            stall_window: 200,
        }
    }

    /// Hybrid variant: perturbation with standard deviation 0.005, run to
    /// the iteration cap.
    pub fn hm() -> Self {
        Self {
            perturb_std: 0.005,
            stall_window: 0,
            ..Self::standard()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = [self.w, self.c1, self.c2, self.perturb_std, self.stall_tol]
            .iter()
            .all(|v| v.is_finite() && *v >= 0.0);
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(
                "PSO coefficients must be finite and non-negative",
            ))
        }
    }
}

impl Default for PsoParams {
    fn default() -> Self {
        Self::standard()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PsoState {
    pub positions: Vec<Vec<f64>>,
    pub velocities: Vec<Vec<f64>>,
    pub values: Vec<f64>,
    pub pbest: Vec<Vec<f64>>,
    pub pbest_values: Vec<f64>,
    pub gbest: Vec<f64>,
    pub gbest_value: f64,
    pub iteration: usize,
}

impl PsoState {
    /// Zero velocities; personal bests start at the initial positions.
    pub fn new(positions: Vec<Vec<f64>>, values: Vec<f64>) -> Result<Self> {
        let choice = select_consensus_point(&values)?;
        let dim = positions[0].len();
        Ok(Self {
            velocities: vec![vec![0.0; dim]; positions.len()],
            pbest: positions.clone(),
            pbest_values: values.clone(),
            gbest: positions[choice.index].clone(),
            gbest_value: values[choice.index],
            positions,
            values,
            iteration: 0,
        })
    }

    pub fn n_agents(&self) -> usize {
        self.positions.len()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Pso {
    pub params: PsoParams,
    pub n_agents: usize,
}

impl Pso {
    pub fn new(params: PsoParams, n_agents: usize) -> Result<Self> {
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
    ) -> Result<PsoState> {
        let swarm = init_swarm(objective, self.n_agents, init, streams)?;
        PsoState::new(swarm.positions, swarm.values)
    }

    /// Velocity and position update, optional perturbation and projection,
    /// then strict-improvement updates of personal and global bests.
    pub fn step(
        &self,
        state: &mut PsoState,
        objective: &ObjectiveSpec,
        domain: &Domain,
        streams: &Streams,
    ) -> Result<()> {
        let p = &self.params;
        let n = state.iteration as u64;
        let perturb = if p.perturb_std > 0.0 {
            Some(Normal::new(0.0, p.perturb_std).map_err(|e| Error::invalid(e.to_string()))?)
        } else {
            None
        };
        let gbest = &state.gbest;
        for i in 0..state.n_agents() {
            let mut u1 = streams.rng(Purpose::PsoCognitive, i as u64, n);
            let mut u2 = streams.rng(Purpose::PsoSocial, i as u64, n);
            let x = &mut state.positions[i];
            let v = &mut state.velocities[i];
            let pb = &state.pbest[i];
            for k in 0..x.len() {
                let r1: f64 = u1.random();
                let r2: f64 = u2.random();
                v[k] = p.w * v[k] + p.c1 * r1 * (pb[k] - x[k]) + p.c2 * r2 * (gbest[k] - x[k]);
                x[k] += v[k];
            }
            if let Some(dist) = &perturb {
                let mut rng = streams.rng(Purpose::Perturbation, i as u64, n);
                x.iter_mut().for_each(|xk| *xk += dist.sample(&mut rng));
            }
            domain.project_in_place(x);
            let f = objective.eval(x);
            if f.is_nan() {
                return Err(Error::NanObjective {
                    agent: i,
                    iteration: state.iteration + 1,
                });
            }
            state.values[i] = f;
        }
        for i in 0..state.n_agents() {
            if state.values[i] < state.pbest_values[i] {
                state.pbest_values[i] = state.values[i];
                state.pbest[i].clone_from(&state.positions[i]);
            }
        }
        let choice = select_consensus_point(&state.pbest_values)?;
        if state.pbest_values[choice.index] < state.gbest_value {
            state.gbest_value = state.pbest_values[choice.index];
            state.gbest.clone_from(&state.pbest[choice.index]);
        }
        state.iteration += 1;
        Ok(())
    }

    /// Runs until `max_iter` or, when enabled, the stall rule. The swarm
    /// diameter is traced but does not stop the run.
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
        let mut evaluations = n;
        let mut fp_trace = vec![state.gbest_value];
        let mut p_jump_trace = Vec::new();
        let mut diameter_trace = vec![max_distance_to(&state.positions, &state.gbest)];
        let mut stalled_for = 0usize;
        let mut termination = Termination::MaxIter;
        while state.iteration < stop.max_iter {
            let previous = state.gbest.clone();
            let previous_value = state.gbest_value;
            self.step(&mut state, objective, domain, streams)?;
            evaluations += n;
            fp_trace.push(state.gbest_value);
            p_jump_trace.push(distance(&state.gbest, &previous));
            diameter_trace.push(max_distance_to(&state.positions, &state.gbest));
            if (previous_value - state.gbest_value).abs() < self.params.stall_tol {
                stalled_for += 1;
            } else {
                stalled_for = 0;
            }
            if self.params.stall_window > 0 && stalled_for >= self.params.stall_window {
                termination = Termination::Stalled;
                break;
            }
        }
        Ok(TrialReport {
            fp_trace,
            p_jump_trace,
            diameter_trace,
            iterations: state.iteration,
            termination,
            final_p: state.gbest,
            final_fp: state.gbest_value,
            evaluations,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objectives::ObjectiveRegistry;
    use crate::rng::RngPolicy;

    fn sphere(d: usize) -> ObjectiveSpec {
        ObjectiveRegistry::standard().build("sphere", d).unwrap()
    }

    #[test]
    fn zero_coefficients_freeze_the_swarm() {
        let f = sphere(3);
        let params = PsoParams {
            w: 0.0,
            c1: 0.0,
            c2: 0.0,
            perturb_std: 0.0,
            ..PsoParams::standard()
        };
        let pso = Pso::new(params, 8).unwrap();
        let s = RngPolicy::new(1).trial(0);
        let mut state = pso.init(&f, &f.default_init(), &s).unwrap();
        let before = state.positions.clone();
        for _ in 0..5 {
            pso.step(&mut state, &f, f.domain(), &s).unwrap();
        }
        assert_eq!(state.positions, before);
    }

    #[test]
    fn gbest_is_monotone_and_matches_pbest() {
        let f = ObjectiveRegistry::standard().build("rastrigin", 5).unwrap();
        for params in [PsoParams::standard(), PsoParams::hm()] {
            let pso = Pso::new(params, 20).unwrap();
            let s = RngPolicy::new(2).trial(0);
            let mut state = pso.init(&f, &f.default_init(), &s).unwrap();
            let mut prev = state.gbest_value;
            for _ in 0..200 {
                pso.step(&mut state, &f, f.domain(), &s).unwrap();
                assert!(state.gbest_value <= prev);
                prev = state.gbest_value;
                let best = state
                    .pbest_values
                    .iter()
                    .copied()
                    .fold(f64::INFINITY, f64::min);
                assert_eq!(best, state.gbest_value);
                assert_eq!(f.eval(&state.gbest), state.gbest_value);
            }
        }
    }

    #[test]
    fn plain_pso_stalls_on_sphere() {
        let f = sphere(2);
        let pso = Pso::new(PsoParams::standard(), 20).unwrap();
        let stop = StoppingCriteria::new(100_000, 1e-7).unwrap();
        let r = pso
            .run(
                &f,
                f.domain(),
                &f.default_init(),
                &stop,
                &RngPolicy::new(5).trial(0),
            )
            .unwrap();
        assert_eq!(r.termination, Termination::Stalled);
        assert!(r.final_fp < 1e-8);
        assert_eq!(r.fp_trace.len(), r.iterations + 1);
    }

    #[test]
    fn hybrid_runs_to_the_cap() {
        let f = sphere(2);
        let pso = Pso::new(PsoParams::hm(), 10).unwrap();
        let stop = StoppingCriteria::new(300, 1e-7).unwrap();
        let r = pso
            .run(
                &f,
                f.domain(),
                &f.default_init(),
                &stop,
                &RngPolicy::new(5).trial(0),
            )
            .unwrap();
        assert_eq!(r.termination, Termination::MaxIter);
        assert_eq!(r.iterations, 300);
    }

    #[test]
    fn projection_keeps_particles_on_the_simplex() {
        let f = ObjectiveSpec::new(
            "lin",
            4,
            crate::domain::BoxBounds::cube(4, 0.0, 1.0).unwrap(),
            |x| x[0] - x[3],
        )
        .unwrap()
        .with_domain(Domain::Simplex);
        let pso = Pso::new(PsoParams::hm(), 10).unwrap();
        let s = RngPolicy::new(9).trial(0);
        let mut state = pso
            .init(&f, &InitDistribution::UniformSimplex { dim: 4 }, &s)
            .unwrap();
        for _ in 0..50 {
            pso.step(&mut state, &f, f.domain(), &s).unwrap();
            for x in &state.positions {
                assert!(Domain::Simplex.contains(x));
            }
        }
        assert!(state.gbest[3] > 0.9);
    }

    #[test]
    fn rejects_negative_coefficients() {
        let bad = PsoParams {
            c1: -1.0,
            ..PsoParams::standard()
        };
        assert!(Pso::new(bad, 5).is_err());
    }
}

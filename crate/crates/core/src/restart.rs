//! Repeated rounds that carry the best point forward.
//!
//! Round 1 draws every agent from the initial distribution. Every later
//! round places the previous round's consensus point at agent 0 and
//! redraws the others, so the best value is non-increasing across rounds.

use serde::Serialize;

use crate::domain::Domain;
use crate::dynamics::{init_swarm_carrying, Dcbo};
use crate::error::{Error, Result};
use crate::objectives::{InitDistribution, ObjectiveSpec};
use crate::report::{StoppingCriteria, TrialReport};
use crate::rng::Streams;

/// When to stop starting new rounds.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RestartSchedule {
    /// Upper bound on the number of rounds.
    pub max_rounds: usize,
    /// Stopping rule of a single round.
    pub per_round: StoppingCriteria,
    /// Total step budget across rounds. The last round is truncated to fit.
    pub total_iterations: Option<usize>,
}

impl RestartSchedule {
    pub fn rounds(max_rounds: usize, per_round: StoppingCriteria) -> Result<Self> {
        if max_rounds == 0 {
            return Err(Error::invalid("at least one round is required"));
        }
        Ok(Self {
            max_rounds,
            per_round,
            total_iterations: None,
        })
    }

    /// Rounds capped at `100·d` steps each, restarting until `budget` steps
    /// have been spent.
    pub fn budgeted(dim: usize, budget: usize, max_dist: f64) -> Result<Self> {
        Ok(Self {
            max_rounds: usize::MAX,
            per_round: StoppingCriteria::new(100 * dim, max_dist)?,
            total_iterations: Some(budget),
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RestartReport {
    pub rounds: Vec<TrialReport>,
    /// `f(p)` at the end of each round.
    pub round_best_values: Vec<f64>,
    pub total_evaluations: u64,
}

impl RestartReport {
    pub fn total_iterations(&self) -> usize {
        self.rounds.iter().map(|r| r.iterations).sum()
    }

    pub fn last(&self) -> &TrialReport {
        self.rounds
            .last()
            .expect("restart report has at least one round")
    }

    /// All rounds stitched into one trace. The first entry of every round
    /// after the first is dropped, so `fp_trace.len() == iterations + 1`.
    pub fn merged(&self) -> TrialReport {
        let mut out = self.rounds[0].clone();
        for r in &self.rounds[1..] {
            out.fp_trace.extend_from_slice(&r.fp_trace[1..]);
            out.diameter_trace.extend_from_slice(&r.diameter_trace[1..]);
            out.p_jump_trace.extend_from_slice(&r.p_jump_trace);
            out.iterations += r.iterations;
        }
        let last = self.last();
        out.termination = last.termination;
        out.final_p.clone_from(&last.final_p);
        out.final_fp = last.final_fp;
        out.evaluations = self.total_evaluations;
        out
    }
}

/// Round `m` (zero-based) draws from `streams` itself when `m == 0`, so a
/// single round reproduces a plain run.
fn round_streams(streams: &Streams, round: usize) -> Streams {
    if round == 0 {
        *streams
    } else {
        streams.child(round as u64)
    }
}

pub fn run_with_restart(
    objective: &ObjectiveSpec,
    dcbo: &Dcbo,
    domain: &Domain,
    init: &InitDistribution,
    schedule: &RestartSchedule,
    streams: &Streams,
) -> Result<RestartReport> {
    if schedule.max_rounds == 0 {
        return Err(Error::invalid("at least one round is required"));
    }
    let mut rounds: Vec<TrialReport> = Vec::new();
    let mut spent = 0usize;
    let mut total_evaluations = 0u64;

    for m in 0..schedule.max_rounds {
        let mut stop = schedule.per_round;
        if let Some(budget) = schedule.total_iterations {
            if m > 0 && spent >= budget {
                break;
            }
            stop.max_iter = stop.max_iter.min(budget.saturating_sub(spent));
        }
        let s = round_streams(streams, m);
        let carried = rounds.last().map(|r| r.final_p.as_slice());
        let state = init_swarm_carrying(objective, dcbo.n_agents, init, &s, carried)?;
        let report = dcbo.run_from(state, objective, domain, &stop, &s)?;
        // Rounds that end immediately still count against the budget.
        spent += report.iterations.max(1);
        total_evaluations += report.evaluations;
        rounds.push(report);
    }

    let round_best_values = rounds.iter().map(|r| r.final_fp).collect();
    Ok(RestartReport {
        rounds,
        round_best_values,
        total_evaluations,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RoundDiagnostics {
    /// One-based round index.
    pub round: usize,
    pub iterations: usize,
    /// `Σₙ ‖pₙ₊₁ - pₙ‖` over the round.
    pub p_path_length: f64,
    pub final_fp: f64,
}

pub fn emit_round_diagnostics(report: &RestartReport) -> Vec<RoundDiagnostics> {
    report
        .rounds
        .iter()
        .enumerate()
        .map(|(m, r)| RoundDiagnostics {
            round: m + 1,
            iterations: r.iterations,
            p_path_length: r.p_path_length(),
            final_fp: r.final_fp,
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::DcboParams;
    use crate::objectives::ObjectiveRegistry;
    use crate::rng::RngPolicy;

    #[test]
    fn one_round_equals_plain_run() {
        let f = ObjectiveRegistry::standard().build("rastrigin", 5).unwrap();
        let dcbo = Dcbo::new(DcboParams::default(), 20).unwrap();
        let stop = StoppingCriteria::new(2_000, 1e-7).unwrap();
        let streams = RngPolicy::new(4).trial(9);
        let plain = dcbo
            .run(&f, &Domain::Unbounded, &f.default_init(), &stop, &streams)
            .unwrap();
        let schedule = RestartSchedule::rounds(1, stop).unwrap();
        let rr = run_with_restart(
            &f,
            &dcbo,
            &Domain::Unbounded,
            &f.default_init(),
            &schedule,
            &streams,
        )
        .unwrap();
        assert_eq!(rr.rounds.len(), 1);
        assert_eq!(rr.rounds[0], plain);
        assert_eq!(rr.merged(), plain);
    }

    #[test]
    fn rounds_carry_the_best_point() {
        let f = ObjectiveRegistry::standard().build("rastrigin", 8).unwrap();
        let dcbo = Dcbo::new(DcboParams::default(), 10).unwrap();
        let stop = StoppingCriteria::new(400, 1e-7).unwrap();
        let schedule = RestartSchedule::rounds(8, stop).unwrap();
        let rr = run_with_restart(
            &f,
            &dcbo,
            &Domain::Unbounded,
            &f.default_init(),
            &schedule,
            &RngPolicy::new(1).trial(0),
        )
        .unwrap();
        assert_eq!(rr.rounds.len(), 8);
        assert!(rr.round_best_values.windows(2).all(|w| w[1] <= w[0]));
        for m in 1..rr.rounds.len() {
            assert!(rr.rounds[m].fp_trace[0] <= rr.rounds[m - 1].final_fp);
        }
        let merged = rr.merged();
        assert_eq!(merged.fp_trace.len(), merged.iterations + 1);
        assert!(merged.fp_trace.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn budget_truncates_rounds() {
        let f = ObjectiveRegistry::standard().build("rastrigin", 4).unwrap();
        let dcbo = Dcbo::new(DcboParams::default(), 10).unwrap();
        let schedule = RestartSchedule::budgeted(4, 1_000, 1e-7).unwrap();
        let rr = run_with_restart(
            &f,
            &dcbo,
            &Domain::Unbounded,
            &f.default_init(),
            &schedule,
            &RngPolicy::new(2).trial(0),
        )
        .unwrap();
        assert!(rr.total_iterations() <= 1_000);
        assert!(rr.rounds.iter().all(|r| r.iterations <= 400));
        assert!(rr.rounds.len() >= 3);
    }

    #[test]
    fn diagnostics_sum_jumps() {
        let f = ObjectiveRegistry::standard().build("ackley", 6).unwrap();
        let dcbo = Dcbo::new(DcboParams::default(), 12).unwrap();
        let schedule =
            RestartSchedule::rounds(4, StoppingCriteria::new(600, 1e-7).unwrap()).unwrap();
        let rr = run_with_restart(
            &f,
            &dcbo,
            &Domain::Unbounded,
            &f.default_init(),
            &schedule,
            &RngPolicy::new(3).trial(0),
        )
        .unwrap();
        let rows = emit_round_diagnostics(&rr);
        assert_eq!(rows.len(), 4);
        for (row, r) in rows.iter().zip(&rr.rounds) {
            assert_eq!(row.p_path_length, r.p_jump_trace.iter().sum::<f64>());
            assert_eq!(row.iterations, r.iterations);
            if r.iterations == 0 {
                assert_eq!(row.p_path_length, 0.0);
            }
        }
    }
}

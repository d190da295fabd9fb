//! Name-keyed registry of optimizers behind a common trait, so drivers and
//! the command line can pick a method by string.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::baselines::{Pso, PsoParams, SoftminCbo, SoftminCboParams};
use crate::domain::Domain;
use crate::dynamics::{Coefficients, Dcbo, DcboParams};
use crate::error::{Error, Result};
use crate::objectives::{InitDistribution, ObjectiveSpec};
use crate::report::{StoppingCriteria, TrialReport};
use crate::restart::{run_with_restart, RestartSchedule};
use crate::rng::Streams;

/// What to minimize, where, and how to initialize.
#[derive(Clone, Debug)]
pub struct Problem<'a> {
    pub objective: &'a ObjectiveSpec,
    pub domain: &'a Domain,
    pub init: &'a InitDistribution,
}

impl<'a> Problem<'a> {
    pub fn new(
        objective: &'a ObjectiveSpec,
        domain: &'a Domain,
        init: &'a InitDistribution,
    ) -> Self {
        Self {
            objective,
            domain,
            init,
        }
    }
}

pub trait Optimizer: Send + Sync + fmt::Debug {
    fn name(&self) -> &str;
    fn n_agents(&self) -> usize;
    fn optimize(
        &self,
        problem: &Problem<'_>,
        stop: &StoppingCriteria,
        streams: &Streams,
    ) -> Result<TrialReport>;
}

impl Optimizer for Dcbo {
    fn name(&self) -> &str {
        "dcbo"
    }

    fn n_agents(&self) -> usize {
        self.n_agents
    }

    fn optimize(
        &self,
        problem: &Problem<'_>,
        stop: &StoppingCriteria,
        streams: &Streams,
    ) -> Result<TrialReport> {
        self.run(
            problem.objective,
            problem.domain,
            problem.init,
            stop,
            streams,
        )
    }
}

/// DCBO with restarts. Each round is capped at `round_max_iter` steps
/// (default `100·d`) and all rounds together at the caller's `max_iter`.
#[derive(Clone, Debug, PartialEq)]
pub struct RestartedDcbo {
    pub dcbo: Dcbo,
    /// `None` restarts until the budget is spent.
    pub max_rounds: Option<usize>,
    pub round_max_iter: Option<usize>,
}

impl RestartedDcbo {
    pub fn schedule(&self, dim: usize, stop: &StoppingCriteria) -> Result<RestartSchedule> {
        let per_round =
            StoppingCriteria::new(self.round_max_iter.unwrap_or(100 * dim), stop.max_dist)?;
        let mut schedule =
            RestartSchedule::rounds(self.max_rounds.unwrap_or(usize::MAX), per_round)?;
        schedule.total_iterations = Some(stop.max_iter);
        Ok(schedule)
    }
}

impl Optimizer for RestartedDcbo {
    fn name(&self) -> &str {
        "dcbo-restart"
    }

    fn n_agents(&self) -> usize {
        self.dcbo.n_agents
    }

    fn optimize(
        &self,
        problem: &Problem<'_>,
        stop: &StoppingCriteria,
        streams: &Streams,
    ) -> Result<TrialReport> {
        let schedule = self.schedule(problem.objective.dim(), stop)?;
        let report = run_with_restart(
            problem.objective,
            &self.dcbo,
            problem.domain,
            problem.init,
            &schedule,
            streams,
        )?;
        Ok(report.merged())
    }
}

impl Optimizer for SoftminCbo {
    fn name(&self) -> &str {
        "softmin-cbo"
    }

    fn n_agents(&self) -> usize {
        self.n_agents
    }

    fn optimize(
        &self,
        problem: &Problem<'_>,
        stop: &StoppingCriteria,
        streams: &Streams,
    ) -> Result<TrialReport> {
        self.run(
            problem.objective,
            problem.domain,
            problem.init,
            stop,
            streams,
        )
    }
}

impl Optimizer for Pso {
    fn name(&self) -> &str {
        if self.params.perturb_std > 0.0 {
            "hmpso"
        } else {
            "pso"
        }
    }

    fn n_agents(&self) -> usize {
        self.n_agents
    }

    fn optimize(
        &self,
        problem: &Problem<'_>,
        stop: &StoppingCriteria,
        streams: &Streams,
    ) -> Result<TrialReport> {
        self.run(
            problem.objective,
            problem.domain,
            problem.init,
            stop,
            streams,
        )
    }
}

/// Everything a factory may need to build any registered optimizer.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AlgorithmSettings {
    pub n_agents: usize,
    pub dcbo: Coefficients,
    pub mix_count: Option<usize>,
    pub parallel_agents: bool,
    /// Extra rounds after the first; `0` means a single plain run for
    /// `"dcbo"`.
    pub restarts: usize,
    pub round_max_iter: Option<usize>,
    pub softmin: SoftminCboParams,
    /// Overrides the variant's own defaults for `"pso"` and `"hmpso"`.
    pub pso: Option<PsoParams>,
}

impl Default for AlgorithmSettings {
    fn default() -> Self {
        Self {
            n_agents: 50,
            dcbo: Coefficients::BENCHMARK,
            mix_count: None,
            parallel_agents: false,
            restarts: 0,
            round_max_iter: None,
            softmin: SoftminCboParams::default(),
            pso: None,
        }
    }
}

impl AlgorithmSettings {
    fn dcbo(&self) -> Result<Dcbo> {
        let mut params = DcboParams::from_coefficients(self.dcbo)?;
        if let Some(m) = self.mix_count {
            params = params.with_mix_count(m);
        }
        Ok(Dcbo::new(params, self.n_agents)?.with_parallel(self.parallel_agents))
    }
}

pub type OptimizerFactory =
    Box<dyn Fn(&AlgorithmSettings) -> Result<Box<dyn Optimizer>> + Send + Sync>;

pub struct OptimizerRegistry {
    factories: BTreeMap<String, OptimizerFactory>,
}

impl fmt::Debug for OptimizerRegistry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.factories.keys()).finish()
    }
}

impl Default for OptimizerRegistry {
    fn default() -> Self {
        Self::standard()
    }
}

impl OptimizerRegistry {
    pub fn new() -> Self {
        Self {
            factories: BTreeMap::new(),
        }
    }

    /// `dcbo`, `dcbo-restart`, `softmin-cbo`, `pso` and `hmpso`.
    pub fn standard() -> Self {
        let mut r = Self::new();
        r.register("dcbo", |s| {
            let dcbo = s.dcbo()?;
            Ok(if s.restarts > 0 {
                Box::new(RestartedDcbo {
                    dcbo,
                    max_rounds: Some(s.restarts + 1),
                    round_max_iter: s.round_max_iter,
                })
            } else {
                Box::new(dcbo)
            })
        });
        r.register("dcbo-restart", |s| {
            Ok(Box::new(RestartedDcbo {
                dcbo: s.dcbo()?,
                max_rounds: (s.restarts > 0).then_some(s.restarts + 1),
                round_max_iter: s.round_max_iter,
            }))
        });
        r.register("softmin-cbo", |s| {
            Ok(Box::new(SoftminCbo::new(s.softmin, s.n_agents)?))
        });
        r.register("pso", |s| {
            Ok(Box::new(Pso::new(
                s.pso.unwrap_or_else(PsoParams::standard),
                s.n_agents,
            )?))
        });
        r.register("hmpso", |s| {
            Ok(Box::new(Pso::new(
                s.pso.unwrap_or_else(PsoParams::hm),
                s.n_agents,
            )?))
        });
        r
    }

    pub fn register<F>(&mut self, name: &str, factory: F)
    where
        F: Fn(&AlgorithmSettings) -> Result<Box<dyn Optimizer>> + Send + Sync + 'static,
    {
        self.factories.insert(name.to_string(), Box::new(factory));
    }

    pub fn build(&self, name: &str, settings: &AlgorithmSettings) -> Result<Box<dyn Optimizer>> {
        let factory = self
            .factories
            .get(name)
            .ok_or_else(|| Error::UnknownAlgorithm(name.to_string()))?;
        factory(settings)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.factories.keys().map(String::as_str)
    }
}

//! Multi-trial experiments: declarative configuration, parallel trial
//! execution, aggregation and CSV/JSON output.

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{PsoParams, SoftminCboParams};
use crate::domain::{BoxBounds, Domain};
use crate::dynamics::Coefficients;
use crate::error::{Error, Result};
use crate::objectives::{ObjectiveRegistry, ObjectiveSpec};
use crate::registry::{AlgorithmSettings, OptimizerRegistry, Problem};
use crate::report::{StoppingCriteria, Termination, TrialReport};
use crate::rng::RngPolicy;

/// Feasible set of an experiment.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DomainSpec {
    /// Whatever the objective declares (unbounded for the benchmarks).
    #[default]
    Objective,
    Unbounded,
    /// The objective's default search box.
    InitBox,
    Box {
        lo: f64,
        hi: f64,
    },
    Simplex,
    LpBall {
        p: f64,
        r: f64,
    },
}

impl DomainSpec {
    pub fn resolve(&self, objective: &ObjectiveSpec) -> Result<Domain> {
        let d = objective.dim();
        Ok(match self {
            DomainSpec::Objective => objective.domain().clone(),
            DomainSpec::Unbounded => Domain::Unbounded,
            DomainSpec::InitBox => Domain::Box(objective.init_box().clone()),
            DomainSpec::Box { lo, hi } => Domain::Box(BoxBounds::cube(d, *lo, *hi)?),
            DomainSpec::Simplex => Domain::Simplex,
            DomainSpec::LpBall { p, r } => Domain::lp_ball(*p, *r)?,
        })
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

impl std::str::FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            _ => Err(Error::Config(format!(
                "unknown output format `{s}` (csv or json)"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub algorithm: String,
    pub objective: String,
    pub dim: usize,
    pub domain: DomainSpec,
    pub agents: usize,
    pub dcbo: Coefficients,
    pub mix_count: Option<usize>,
    pub softmin: SoftminCboParams,
    /// Replaces the defaults of the chosen PSO variant as a whole.
    pub pso: Option<PsoParams>,
    /// Defaults to `500·dim`.
    pub max_iter: Option<usize>,
    pub max_dist: f64,
    pub restarts: usize,
    pub round_max_iter: Option<usize>,
    pub trials: usize,
    pub seed: u64,
    /// Worker threads for trials; all cores when unset.
    pub workers: Option<usize>,
    pub output: Option<PathBuf>,
    pub format: OutputFormat,
    pub traces: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            algorithm: "dcbo".into(),
            objective: "sphere".into(),
            dim: 10,
            domain: DomainSpec::default(),
            agents: 50,
            dcbo: Coefficients::BENCHMARK,
            mix_count: None,
            softmin: SoftminCboParams::default(),
            pso: None,
            max_iter: None,
            max_dist: 1e-7,
            restarts: 0,
            round_max_iter: None,
            trials: 1,
            seed: 0,
            workers: None,
            output: None,
            format: OutputFormat::Csv,
            traces: false,
        }
    }
}

impl ExperimentConfig {
    /// Parse TOML; errors carry the offending line and column.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)?;
        Self::from_toml_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn stopping(&self) -> Result<StoppingCriteria> {
        StoppingCriteria::new(self.max_iter.unwrap_or(500 * self.dim), self.max_dist)
    }

    pub fn settings(&self) -> AlgorithmSettings {
        AlgorithmSettings {
            n_agents: self.agents,
            dcbo: self.dcbo,
            mix_count: self.mix_count,
            parallel_agents: false,
            restarts: self.restarts,
            round_max_iter: self.round_max_iter,
            softmin: self.softmin,
            pso: self.pso,
        }
    }

    /// Checks everything that can be checked without running: trial count,
    /// names, parameter ranges and the domain.
    pub fn validate(
        &self,
        objectives: &ObjectiveRegistry,
        optimizers: &OptimizerRegistry,
    ) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        if self.workers == Some(0) {
            return Err(Error::Config("workers must be at least 1".into()));
        }
        let objective = objectives.build(&self.objective, self.dim)?;
        self.domain.resolve(&objective)?;
        self.stopping()?;
        optimizers.build(&self.algorithm, &self.settings())?;
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial_id: u64,
    pub seed: u64,
    pub final_f: f64,
    /// `f - min f` when the minimum is known, else `f`.
    pub f_minus_min: f64,
    pub iterations: usize,
    pub termination: Termination,
    pub wall_ms: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AggregateStats {
    pub algorithm: String,
    pub objective: String,
    pub dim: usize,
    pub known_min: Option<f64>,
    /// Statistics of `f_minus_min`.
    pub min: f64,
    pub mean: f64,
    /// Mean of the two middle values for an even trial count.
    pub median: f64,
    pub mean_iterations: f64,
    pub trials: usize,
}

impl AggregateStats {
    pub fn from_records(
        algorithm: &str,
        objective: &ObjectiveSpec,
        records: &[TrialRecord],
    ) -> Result<Self> {
        if records.is_empty() {
            return Err(Error::invalid("no trials to aggregate"));
        }
        let mut gaps: Vec<f64> = records.iter().map(|r| r.f_minus_min).collect();
        gaps.sort_by(f64::total_cmp);
        let n = gaps.len();
        let median = if n % 2 == 1 {
            gaps[n / 2]
        } else {
            0.5 * (gaps[n / 2 - 1] + gaps[n / 2])
        };
        Ok(Self {
            algorithm: algorithm.to_string(),
            objective: objective.name().to_string(),
            dim: objective.dim(),
            known_min: objective.known_min(),
            min: gaps[0],
            mean: gaps.iter().sum::<f64>() / n as f64,
            median,
            mean_iterations: records.iter().map(|r| r.iterations as f64).sum::<f64>() / n as f64,
            trials: n,
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentOutcome {
    pub stats: AggregateStats,
    pub records: Vec<TrialRecord>,
    /// Full per-trial reports when traces were requested.
    pub reports: Option<Vec<TrialReport>>,
}

/// Run `config.trials` independent trials. Trial `t` draws from
/// `RngPolicy::new(seed).trial(t)`, so results do not depend on the
/// number of workers or their scheduling.
pub fn run_experiment(
    config: &ExperimentConfig,
    objectives: &ObjectiveRegistry,
    optimizers: &OptimizerRegistry,
) -> Result<ExperimentOutcome> {
    config.validate(objectives, optimizers)?;
    let objective = objectives.build(&config.objective, config.dim)?;
    let domain = config.domain.resolve(&objective)?;
    let init = match config.domain {
        DomainSpec::Objective => objective.default_init(),
        _ => objective.clone().with_domain(domain.clone()).default_init(),
    };
    let objective = objective.with_domain(domain.clone());
    let optimizer = optimizers.build(&config.algorithm, &config.settings())?;
    let stop = config.stopping()?;
    let policy = RngPolicy::new(config.seed);

    let run_trial = |t: u64| -> Result<(TrialRecord, TrialReport)> {
        let started = Instant::now();
        let problem = Problem::new(&objective, &domain, &init);
        let report = optimizer.optimize(&problem, &stop, &policy.trial(t))?;
        let record = TrialRecord {
            trial_id: t,
            seed: config.seed,
            final_f: report.final_fp,
            f_minus_min: objective.gap(report.final_fp),
            iterations: report.iterations,
            termination: report.termination,
            wall_ms: started.elapsed().as_secs_f64() * 1e3,
        };
        Ok((record, report))
    };
    let ids: Vec<u64> = (0..config.trials as u64).collect();
    let results: Vec<(TrialRecord, TrialReport)> = match config.workers {
        Some(w) => rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build()
            .map_err(|e| Error::Config(e.to_string()))?
            .install(|| ids.par_iter().map(|&t| run_trial(t)).collect::<Result<_>>())?,
        None => ids
            .par_iter()
            .map(|&t| run_trial(t))
            .collect::<Result<_>>()?,
    };
    let (records, reports): (Vec<_>, Vec<_>) = results.into_iter().unzip();
    let stats = AggregateStats::from_records(optimizer.name(), &objective, &records)?;
    Ok(ExperimentOutcome {
        stats,
        records,
        reports: config.traces.then_some(reports),
    })
}

/// Outcome of comparing one statistic of A against B.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Comparison {
    /// A is better (lower).
    #[serde(rename = "A>B")]
    ABetter,
    #[serde(rename = "A=B")]
    Tie,
    #[serde(rename = "A<B")]
    BBetter,
}

impl fmt::Display for Comparison {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Comparison::ABetter => "A>B",
            Comparison::Tie => "A=B",
            Comparison::BBetter => "A<B",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StatComparison {
    pub min: Comparison,
    pub mean: Comparison,
    pub median: Comparison,
}

fn round_to(x: f64, decimals: u32) -> f64 {
    if !x.is_finite() {
        return x;
    }
    let scale = 10f64.powi(decimals as i32);
    (x * scale).round() / scale
}

fn compare_value(a: f64, b: f64, decimals: u32) -> Comparison {
    let (a, b) = (round_to(a, decimals), round_to(b, decimals));
    if a < b {
        Comparison::ABetter
    } else if a > b {
        Comparison::BBetter
    } else {
        Comparison::Tie
    }
}

/// Compare min, mean and median after rounding both sides to `decimals`
/// places. Lower is better.
pub fn compare_report(
    a: &AggregateStats,
    b: &AggregateStats,
    decimals: u32,
) -> Result<StatComparison> {
    if a.objective != b.objective || a.dim != b.dim || a.known_min != b.known_min {
        return Err(Error::MismatchedBasis(format!(
            "{} (d={}) vs {} (d={})",
            a.objective, a.dim, b.objective, b.dim
        )));
    }
    Ok(StatComparison {
        min: compare_value(a.min, b.min, decimals),
        mean: compare_value(a.mean, b.mean, decimals),
        median: compare_value(a.median, b.median, decimals),
    })
}

/// Counts of wins, ties and losses per statistic across many comparisons.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct Tally {
    pub min: [usize; 3],
    pub mean: [usize; 3],
    pub median: [usize; 3],
}

impl Tally {
    pub fn add(&mut self, c: &StatComparison) {
        let slot = |c: Comparison| match c {
            Comparison::ABetter => 0,
            Comparison::Tie => 1,
            Comparison::BBetter => 2,
        };
        self.min[slot(c.min)] += 1;
        self.mean[slot(c.mean)] += 1;
        self.median[slot(c.median)] += 1;
    }
}

pub fn write_records_csv<W: Write>(records: &[TrialRecord], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record([
        "trial_id",
        "seed",
        "final_f",
        "f_minus_min",
        "iterations",
        "termination",
        "wall_ms",
    ])?;
    for r in records {
        w.write_record([
            r.trial_id.to_string(),
            r.seed.to_string(),
            r.final_f.to_string(),
            r.f_minus_min.to_string(),
            r.iterations.to_string(),
            r.termination.as_str().to_string(),
            format!("{:.3}", r.wall_ms),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Long-format trace table: one row per trial and step.
pub fn write_traces_csv<W: Write>(reports: &[TrialReport], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["trial_id", "iteration", "fp", "diameter", "p_jump"])?;
    for (t, r) in reports.iter().enumerate() {
        for n in 0..r.fp_trace.len() {
            let jump = if n == 0 {
                String::new()
            } else {
                r.p_jump_trace[n - 1].to_string()
            };
            w.write_record([
                t.to_string(),
                n.to_string(),
                r.fp_trace[n].to_string(),
                r.diameter_trace[n].to_string(),
                jump,
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct JsonOutput<'a> {
    config: &'a ExperimentConfig,
    stats: &'a AggregateStats,
    records: &'a [TrialRecord],
}

/// Write the outcome to `path`. CSV output puts per-trial rows at `path`
/// and the summary next to it as `<stem>.summary.json`; JSON output holds
/// config, summary and records in one file. Traces, when present, go to
/// `<stem>.traces.csv`. Returns the files written.
pub fn write_outcome(
    config: &ExperimentConfig,
    outcome: &ExperimentOutcome,
    path: &Path,
) -> Result<Vec<PathBuf>> {
    let mut written = vec![path.to_path_buf()];
    match config.format {
        OutputFormat::Csv => {
            write_records_csv(&outcome.records, fs::File::create(path)?)?;
            let summary = path.with_extension("summary.json");
            fs::write(
                &summary,
                serde_json::to_string_pretty(&outcome.stats)? + "\n",
            )?;
            written.push(summary);
        }
        OutputFormat::Json => {
            let out = JsonOutput {
                config,
                stats: &outcome.stats,
                records: &outcome.records,
            };
            fs::write(path, serde_json::to_string_pretty(&out)? + "\n")?;
        }
    }
    if let Some(reports) = &outcome.reports {
        let traces = path.with_extension("traces.csv");
        write_traces_csv(reports, fs::File::create(&traces)?)?;
        written.push(traces);
    }
    Ok(written)
}

//! `dcbo`: run consensus-based optimization experiments from the shell.
//!
//! Exit status is 0 on success, 1 for configuration errors and 2 for
//! failures while running.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand};
use dcbo::analysis::{check_conditions, AnalysisConfig};
use dcbo::apps::portfolio::{
    ingest_returns_path, reference_optimum, run_portfolio_experiment, synthetic_instance,
    PortfolioSetup,
};
use dcbo::apps::sensing::{run_cs_experiment, CsConfig, DEFAULT_THRESHOLD};
use dcbo::dynamics::{Coefficients, Dcbo, DcboParams};
use dcbo::experiment::{
    compare_report, run_experiment, write_outcome, ExperimentConfig, OutputFormat, Tally,
};
use dcbo::objectives::{ObjectiveRegistry, TABLE_FUNCTIONS};
use dcbo::registry::OptimizerRegistry;
use dcbo::report::StoppingCriteria;
use dcbo::restart::{emit_round_diagnostics, run_with_restart, RestartSchedule};
use dcbo::rng::RngPolicy;

#[derive(Parser, Debug)]
#[command(
    name = "dcbo",
    version,
    about = "Discrete consensus-based optimization experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run one configured experiment over several trials.
    Run(RunArgs),
    /// Run the benchmark battery for several algorithms and tally the
    /// pairwise comparison of the first two.
    Sweep(SweepArgs),
    /// Evaluate the parameter conditions for a coefficient set.
    CheckParams(CheckArgs),
    /// Sharpe-ratio portfolio: DCBO against softmin CBO.
    Portfolio(PortfolioArgs),
    /// Compressed sensing on the ℓ^½ ball.
    Compsense(CompsenseArgs),
    /// Per-round diagnostics of a restarted run.
    RestartDemo(RestartArgs),
}

#[derive(Args, Debug, Default)]
struct ExperimentFlags {
    /// TOML experiment file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    algorithm: Option<String>,
    #[arg(long)]
    objective: Option<String>,
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    agents: Option<usize>,
    /// Coefficients as `g1,g2,gb1,gb2`.
    #[arg(long)]
    params: Option<String>,
    #[arg(long)]
    mix_count: Option<usize>,
    #[arg(long)]
    max_iter: Option<usize>,
    #[arg(long)]
    max_dist: Option<f64>,
    #[arg(long)]
    restarts: Option<usize>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    output: Option<PathBuf>,
    /// `csv` or `json`.
    #[arg(long)]
    format: Option<String>,
    #[arg(long)]
    workers: Option<usize>,
    /// Also write per-step traces.
    #[arg(long)]
    traces: bool,
}

#[derive(Args, Debug)]
struct RunArgs {
    #[command(flatten)]
    flags: ExperimentFlags,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[command(flatten)]
    flags: ExperimentFlags,
    /// Comma-separated algorithm names.
    #[arg(long, default_value = "dcbo,pso")]
    algorithms: String,
    /// Comma-separated objective names; the eight table functions when unset.
    #[arg(long)]
    objectives: Option<String>,
    /// Comma-separated dimensions; `--dim` when unset.
    #[arg(long)]
    dims: Option<String>,
    /// Decimal places used when comparing statistics.
    #[arg(long, default_value_t = 6)]
    decimals: u32,
}

#[derive(Args, Debug)]
struct CheckArgs {
    #[arg(long, default_value = "0.5,1,0.4,0.7")]
    params: String,
    #[arg(long, default_value_t = 10)]
    dim: usize,
    #[arg(long, default_value_t = 1_000_000)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args, Debug)]
struct PortfolioArgs {
    /// Price table: header of asset names, one row of prices per period.
    /// A synthetic instance is used when absent.
    #[arg(long)]
    prices: Option<PathBuf>,
    #[arg(long, default_value_t = 6)]
    assets: usize,
    #[arg(long, default_value_t = 100)]
    agents: usize,
    #[arg(long, default_value_t = 10_000)]
    max_iter: usize,
    #[arg(long, default_value_t = 1e-5)]
    max_dist: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct CompsenseArgs {
    #[arg(long, default_value_t = 30)]
    dim: usize,
    #[arg(long, default_value_t = 15)]
    measurements: usize,
    #[arg(long, default_value = "2")]
    sparsity: String,
    #[arg(long, default_value = "4,8,16")]
    radii: String,
    #[arg(long, default_value_t = 50)]
    trials: usize,
    #[arg(long, default_value_t = 500)]
    agents: usize,
    #[arg(long, default_value = "0.5,1,0.4,0.7")]
    params: String,
    #[arg(long, default_value_t = 3_000)]
    max_iter: usize,
    #[arg(long, default_value_t = 1e-7)]
    max_dist: f64,
    #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
    threshold: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct RestartArgs {
    #[arg(long, default_value = "ackley")]
    objective: String,
    #[arg(long, default_value_t = 100)]
    dim: usize,
    #[arg(long, default_value_t = 50)]
    agents: usize,
    #[arg(long, default_value_t = 30)]
    rounds: usize,
    /// Step cap per round; `100·dim` when unset.
    #[arg(long)]
    round_max_iter: Option<usize>,
    #[arg(long, default_value_t = 1e-7)]
    max_dist: f64,
    #[arg(long, default_value = "0.5,1,0.4,0.7")]
    params: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    output: Option<PathBuf>,
}

/// A problem with the user's input, as opposed to a failure while running.
#[derive(Debug)]
struct ConfigError(anyhow::Error);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:#}", self.0)
    }
}

impl std::error::Error for ConfigError {}

fn config_err(e: impl Into<anyhow::Error>) -> anyhow::Error {
    anyhow::Error::new(ConfigError(e.into()))
}

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<ConfigError>().is_some() {
        return 1;
    }
    match err.downcast_ref::<dcbo::Error>() {
        Some(
            dcbo::Error::Config(_)
            | dcbo::Error::InvalidParameter(_)
            | dcbo::Error::UnknownObjective(_)
            | dcbo::Error::UnknownAlgorithm(_)
            | dcbo::Error::DimensionMismatch { .. },
        ) => 1,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if is_broken_pipe(&e) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn is_broken_pipe(err: &anyhow::Error) -> bool {
    err.chain().any(|c| {
        c.downcast_ref::<io::Error>()
            .is_some_and(|e| e.kind() == io::ErrorKind::BrokenPipe)
    })
}

fn dispatch(command: Command) -> anyhow::Result<()> {
    match command {
        Command::Run(args) => cmd_run(args),
        Command::Sweep(args) => cmd_sweep(args),
        Command::CheckParams(args) => cmd_check(args),
        Command::Portfolio(args) => cmd_portfolio(args),
        Command::Compsense(args) => cmd_compsense(args),
        Command::RestartDemo(args) => cmd_restart(args),
    }
}

fn parse_list<T: std::str::FromStr>(text: &str, what: &str) -> anyhow::Result<Vec<T>> {
    text.split(',')
        .map(|s| {
            s.trim()
                .parse::<T>()
                .map_err(|_| config_err(anyhow!("bad {what} `{s}`")))
        })
        .collect()
}

fn parse_coefficients(text: &str) -> anyhow::Result<Coefficients> {
    let v: Vec<f64> = parse_list(text, "coefficient")?;
    if v.len() != 4 {
        return Err(config_err(anyhow!(
            "--params needs four values g1,g2,gb1,gb2, got {}",
            v.len()
        )));
    }
    let c = Coefficients {
        gamma1: v[0],
        gamma2: v[1],
        gbar1: v[2],
        gbar2: v[3],
    };
    DcboParams::from_coefficients(c).map_err(config_err)?;
    Ok(c)
}

fn build_config(flags: &ExperimentFlags) -> anyhow::Result<ExperimentConfig> {
    let mut cfg = match &flags.config {
        Some(path) => ExperimentConfig::from_path(path).map_err(config_err)?,
        None => ExperimentConfig::default(),
    };
    if let Some(v) = &flags.algorithm {
        cfg.algorithm.clone_from(v);
    }
    if let Some(v) = &flags.objective {
        cfg.objective.clone_from(v);
    }
    if let Some(v) = flags.dim {
        cfg.dim = v;
    }
    if let Some(v) = flags.agents {
        cfg.agents = v;
    }
    if let Some(v) = &flags.params {
        cfg.dcbo = parse_coefficients(v)?;
    }
    if flags.mix_count.is_some() {
        cfg.mix_count = flags.mix_count;
    }
    if flags.max_iter.is_some() {
        cfg.max_iter = flags.max_iter;
    }
    if let Some(v) = flags.max_dist {
        cfg.max_dist = v;
    }
    if let Some(v) = flags.restarts {
        cfg.restarts = v;
    }
    if let Some(v) = flags.trials {
        cfg.trials = v;
    }
    if let Some(v) = flags.seed {
        cfg.seed = v;
    }
    if flags.output.is_some() {
        cfg.output.clone_from(&flags.output);
    }
    if let Some(v) = &flags.format {
        cfg.format = v.parse::<OutputFormat>().map_err(config_err)?;
    }
    if flags.workers.is_some() {
        cfg.workers = flags.workers;
    }
    cfg.traces |= flags.traces;
    cfg.validate(
        &ObjectiveRegistry::standard(),
        &OptimizerRegistry::standard(),
    )
    .map_err(config_err)?;
    Ok(cfg)
}

fn cmd_run(args: RunArgs) -> anyhow::Result<()> {
    let cfg = build_config(&args.flags)?;
    let outcome = run_experiment(
        &cfg,
        &ObjectiveRegistry::standard(),
        &OptimizerRegistry::standard(),
    )?;
    if let Some(path) = &cfg.output {
        let files = write_outcome(&cfg, &outcome, path)
            .with_context(|| format!("writing {}", path.display()))?;
        for f in files {
            eprintln!("wrote {}", f.display());
        }
    }
    writeln!(
        io::stdout(),
        "{}",
        serde_json::to_string_pretty(&outcome.stats)?
    )?;
    Ok(())
}

fn cmd_sweep(args: SweepArgs) -> anyhow::Result<()> {
    let base = build_config(&args.flags)?;
    let algorithms: Vec<String> = parse_list(&args.algorithms, "algorithm")?;
    let objectives: Vec<String> = match &args.objectives {
        Some(s) => parse_list(s, "objective")?,
        None => TABLE_FUNCTIONS.iter().map(|s| s.to_string()).collect(),
    };
    let dims: Vec<usize> = match &args.dims {
        Some(s) => parse_list(s, "dimension")?,
        None => vec![base.dim],
    };
    let objective_registry = ObjectiveRegistry::standard();
    let optimizer_registry = OptimizerRegistry::standard();
    for a in &algorithms {
        optimizer_registry
            .build(a, &base.settings())
            .map_err(config_err)?;
    }

    let mut out: Box<dyn Write> = match &base.output {
        Some(p) => {
            Box::new(fs::File::create(p).with_context(|| format!("creating {}", p.display()))?)
        }
        None => Box::new(io::stdout()),
    };
    writeln!(
        out,
        "objective,dim,algorithm,min,mean,median,mean_iterations,trials"
    )?;
    let mut tally = Tally::default();
    for &dim in &dims {
        for name in &objectives {
            if objective_registry.build(name, dim).is_err() {
                eprintln!("skipping {name} at d={dim}");
                continue;
            }
            let mut stats = Vec::new();
            for alg in &algorithms {
                let cfg = ExperimentConfig {
                    algorithm: alg.clone(),
                    objective: name.clone(),
                    dim,
                    output: None,
                    traces: false,
                    ..base.clone()
                };
                let outcome = run_experiment(&cfg, &objective_registry, &optimizer_registry)?;
                let s = outcome.stats;
                writeln!(
                    out,
                    "{},{},{},{},{},{},{},{}",
                    s.objective, s.dim, alg, s.min, s.mean, s.median, s.mean_iterations, s.trials
                )?;
                stats.push(s);
            }
            if stats.len() >= 2 {
                tally.add(&compare_report(&stats[0], &stats[1], args.decimals)?);
            }
        }
    }
    out.flush()?;
    if algorithms.len() >= 2 {
        eprintln!(
            "{} vs {} (better/tie/worse): min {:?}, mean {:?}, median {:?}",
            algorithms[0], algorithms[1], tally.min, tally.mean, tally.median
        );
    }
    Ok(())
}

fn cmd_check(args: CheckArgs) -> anyhow::Result<()> {
    let c = parse_coefficients(&args.params)?;
    if args.dim == 0 {
        return Err(config_err(anyhow!("--dim must be positive")));
    }
    let config = AnalysisConfig {
        samples: args.samples,
        ..AnalysisConfig::default()
    };
    let report = check_conditions(&c, args.dim, &RngPolicy::new(args.seed).trial(0), &config)
        .map_err(config_err)?;
    writeln!(io::stdout(), "{}", serde_json::to_string_pretty(&report)?)?;
    Ok(())
}

fn open_output(path: &Option<PathBuf>) -> anyhow::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => {
            Box::new(fs::File::create(p).with_context(|| format!("creating {}", p.display()))?)
        }
        None => Box::new(io::stdout()),
    })
}

fn cmd_portfolio(args: PortfolioArgs) -> anyhow::Result<()> {
    let streams = RngPolicy::new(args.seed).trial(0);
    let instance = match &args.prices {
        Some(p) => ingest_returns_path(p)
            .map_err(config_err)
            .with_context(|| format!("reading {}", p.display()))?,
        None => synthetic_instance(args.assets, &streams, 0).map_err(config_err)?,
    };
    let setup = PortfolioSetup {
        n_agents: args.agents,
        stop: StoppingCriteria::new(args.max_iter, args.max_dist).map_err(config_err)?,
        ..PortfolioSetup::default()
    };
    let rows = run_portfolio_experiment(&instance, &setup, &streams)?;
    let (oracle, _) = reference_optimum(&instance, 20, &streams);
    let mut out = open_output(&args.output)?;
    writeln!(out, "method,beta,value,iterations,weights")?;
    for r in rows {
        let beta = r.beta.map(|b| b.to_string()).unwrap_or_default();
        let w: Vec<String> = r.weights.iter().map(|v| format!("{v:.6}")).collect();
        writeln!(
            out,
            "{},{},{},{},{}",
            r.method,
            beta,
            r.value,
            r.iterations,
            w.join(" ")
        )?;
    }
    writeln!(out, "projected-gradient,,{oracle},,")?;
    Ok(())
}

fn cmd_compsense(args: CompsenseArgs) -> anyhow::Result<()> {
    let params =
        DcboParams::from_coefficients(parse_coefficients(&args.params)?).map_err(config_err)?;
    let config = CsConfig {
        d: args.dim,
        m: args.measurements,
        sparsities: parse_list(&args.sparsity, "sparsity")?,
        radii: parse_list(&args.radii, "radius")?,
        trials: args.trials,
        dcbo: Dcbo::new(params, args.agents).map_err(config_err)?,
        stop: StoppingCriteria::new(args.max_iter, args.max_dist).map_err(config_err)?,
        threshold: args.threshold,
        seed: args.seed,
    };
    let rows = run_cs_experiment(&config)?;
    let mut out = open_output(&args.output)?;
    writeln!(
        out,
        "s,r,signal_quasi_norm,trials,tpr_mean,tpr_se,fpr_mean,fpr_se,feasible_trials"
    )?;
    for r in rows {
        writeln!(
            out,
            "{},{},{:.4},{},{},{},{},{},{}",
            r.s,
            r.r,
            r.signal_quasi_norm,
            r.trials,
            r.tpr_mean,
            r.tpr_se,
            r.fpr_mean,
            r.fpr_se,
            r.feasible_trials
        )?;
    }
    Ok(())
}

fn cmd_restart(args: RestartArgs) -> anyhow::Result<()> {
    let objective = ObjectiveRegistry::standard()
        .build(&args.objective, args.dim)
        .map_err(config_err)?;
    let params =
        DcboParams::from_coefficients(parse_coefficients(&args.params)?).map_err(config_err)?;
    let dcbo = Dcbo::new(params, args.agents).map_err(config_err)?;
    let per_round =
        StoppingCriteria::new(args.round_max_iter.unwrap_or(100 * args.dim), args.max_dist)
            .map_err(config_err)?;
    if args.rounds == 0 {
        bail!(ConfigError(anyhow!("--rounds must be positive")));
    }
    let schedule = RestartSchedule::rounds(args.rounds, per_round).map_err(config_err)?;
    let report = run_with_restart(
        &objective,
        &dcbo,
        objective.domain(),
        &objective.default_init(),
        &schedule,
        &RngPolicy::new(args.seed).trial(0),
    )?;
    let mut out = open_output(&args.output)?;
    writeln!(out, "round,iterations,p_path_length,final_fp")?;
    for r in emit_round_diagnostics(&report) {
        writeln!(
            out,
            "{},{},{},{}",
            r.round, r.iterations, r.p_path_length, r.final_fp
        )?;
    }
    Ok(())
}

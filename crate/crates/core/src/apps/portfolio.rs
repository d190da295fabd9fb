//! Long-only portfolio selection by minimizing the negative Sharpe ratio
//! `-wᵀμ / √(wᵀΣw)` over the probability simplex.

use std::io::Read;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::baselines::{SoftminCbo, SoftminCboParams};
use crate::domain::{project_simplex, BoxBounds, Domain};
use crate::dynamics::{Coefficients, Dcbo, DcboParams};
use crate::error::{Error, Result};
use crate::objectives::{InitDistribution, ObjectiveSpec};
use crate::report::{StoppingCriteria, TrialReport};
use crate::rng::{Purpose, Streams};

#[derive(Clone, Debug, PartialEq)]
pub struct PortfolioInstance {
    pub assets: Vec<String>,
    pub mu: DVector<f64>,
    pub sigma: DMatrix<f64>,
}

impl PortfolioInstance {
    /// Checks shapes, symmetry of `sigma` within 1e-12 and eigenvalues
    /// no lower than -1e-10.
    pub fn new(assets: Vec<String>, mu: DVector<f64>, sigma: DMatrix<f64>) -> Result<Self> {
        let d = mu.len();
        if d == 0 {
            return Err(Error::Data("portfolio needs at least one asset".into()));
        }
        if sigma.nrows() != d || sigma.ncols() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: sigma.nrows(),
            });
        }
        if assets.len() != d {
            return Err(Error::Data(format!(
                "{} asset names for {d} assets",
                assets.len()
            )));
        }
        if (&sigma - sigma.transpose()).amax() > 1e-12 {
            return Err(Error::Data("covariance is not symmetric".into()));
        }
        let min_eig = sigma.clone().symmetric_eigenvalues().min();
        if min_eig < -1e-10 {
            return Err(Error::Data(format!(
                "covariance is not positive semidefinite (eigenvalue {min_eig})"
            )));
        }
        Ok(Self { assets, mu, sigma })
    }

    pub fn dim(&self) -> usize {
        self.mu.len()
    }

    /// `-wᵀμ / √(wᵀΣw)`; `+∞` when the variance is not positive.
    pub fn negative_sharpe(&self, w: &[f64]) -> f64 {
        let w = DVector::from_column_slice(w);
        let var = w.dot(&(&self.sigma * &w));
        if !(var > 0.0) {
            return f64::INFINITY;
        }
        -w.dot(&self.mu) / var.sqrt()
    }
}

pub fn sharpe_objective(instance: &PortfolioInstance) -> Result<ObjectiveSpec> {
    let d = instance.dim();
    let inst = instance.clone();
    Ok(
        ObjectiveSpec::new("sharpe", d, BoxBounds::cube(d, 0.0, 1.0)?, move |w| {
            inst.negative_sharpe(w)
        })?
        .with_domain(Domain::Simplex),
    )
}

/// Parse a price table (header of asset names, one row per period) into
/// log-return mean and unbiased sample covariance.
pub fn ingest_returns<R: Read>(reader: R) -> Result<PortfolioInstance> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let assets: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if assets.is_empty() || assets.iter().all(String::is_empty) {
        return Err(Error::Data("price table has no asset columns".into()));
    }
    let d = assets.len();
    let mut prices: Vec<Vec<f64>> = Vec::new();
    for (row, record) in rdr.records().enumerate() {
        let record = record?;
        if record.len() != d {
            return Err(Error::Data(format!(
                "row {} has {} cells, expected {d}",
                row + 2,
                record.len()
            )));
        }
        let mut line = Vec::with_capacity(d);
        for (col, cell) in record.iter().enumerate() {
            let v: f64 = cell.parse().map_err(|_| {
                Error::Data(format!(
                    "row {}, column `{}`: `{cell}` is not a number",
                    row + 2,
                    assets[col]
                ))
            })?;
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Data(format!(
                    "row {}, column `{}`: price {v} is not strictly positive",
                    row + 2,
                    assets[col]
                )));
            }
            line.push(v);
        }
        prices.push(line);
    }
    if prices.len() < 2 {
        return Err(Error::Data("need at least two rows of prices".into()));
    }
    let t = prices.len() - 1;
    let returns = DMatrix::from_fn(t, d, |i, j| (prices[i + 1][j] / prices[i][j]).ln());
    let mu = DVector::from_fn(d, |j, _| returns.column(j).mean());
    let sigma = if t < 2 {
        DMatrix::zeros(d, d)
    } else {
        let centered = DMatrix::from_fn(t, d, |i, j| returns[(i, j)] - mu[j]);
        let mut s = centered.transpose() * &centered / (t - 1) as f64;
        s = (&s + s.transpose()) * 0.5;
        s
    };
    PortfolioInstance::new(assets, mu, sigma)
}

pub fn ingest_returns_path(path: impl AsRef<Path>) -> Result<PortfolioInstance> {
    ingest_returns(std::fs::File::open(path)?)
}

/// Two-factor model with positive expected returns:
/// `Σ = BBᵀ + diag(s²)`, `B` entries `N(0, 0.1²)`, `s ∈ [0.05, 0.2]`,
/// `μᵢ ∈ [0.02, 0.15]`.
pub fn synthetic_instance(d: usize, streams: &Streams, index: u64) -> Result<PortfolioInstance> {
    if d == 0 {
        return Err(Error::invalid("portfolio needs at least one asset"));
    }
    let mut rng = streams.rng(Purpose::Instance, index, 0);
    let b = DMatrix::from_fn(d, 2, |_, _| 0.1 * rng.sample::<f64, _>(StandardNormal));
    let spec = DVector::from_fn(d, |_, _| rng.random_range(0.05..0.2));
    let mut sigma = &b * b.transpose();
    for i in 0..d {
        sigma[(i, i)] += spec[i] * spec[i];
    }
    let mu = DVector::from_fn(d, |_, _| rng.random_range(0.02..0.15));
    let assets = (0..d).map(|i| format!("asset{i}")).collect();
    PortfolioInstance::new(assets, mu, sigma)
}

/// Negative Sharpe value and weights of the best point found by
/// projected-gradient ascent on the Sharpe ratio with Armijo backtracking,
/// started from the barycenter, every vertex and `random_starts` uniform
/// simplex points.
pub fn reference_optimum(
    instance: &PortfolioInstance,
    random_starts: usize,
    streams: &Streams,
) -> (f64, Vec<f64>) {
    let d = instance.dim();
    let mut starts = vec![vec![1.0 / d as f64; d]];
    for i in 0..d {
        let mut e = vec![0.0; d];
        e[i] = 1.0;
        starts.push(e);
    }
    let init = InitDistribution::UniformSimplex { dim: d };
    let mut rng = streams.rng(Purpose::MonteCarlo, 0, 0);
    starts.extend((0..random_starts).map(|_| init.sample(&mut rng)));

    let mut best = (f64::INFINITY, starts[0].clone());
    for w0 in starts {
        let (v, w) = projected_ascent(instance, w0);
        if v < best.0 {
            best = (v, w);
        }
    }
    best
}

fn sharpe_gradient(instance: &PortfolioInstance, w: &[f64]) -> Option<Vec<f64>> {
    let wv = DVector::from_column_slice(w);
    let sw = &instance.sigma * &wv;
    let var = wv.dot(&sw);
    if !(var > 0.0) {
        return None;
    }
    let sd = var.sqrt();
    let ret = wv.dot(&instance.mu);
    Some(
        (0..w.len())
            .map(|i| instance.mu[i] / sd - ret * sw[i] / (var * sd))
            .collect(),
    )
}

fn projected_ascent(instance: &PortfolioInstance, mut w: Vec<f64>) -> (f64, Vec<f64>) {
    let mut value = instance.negative_sharpe(&w);
    let mut step = 1.0;
    for _ in 0..20_000 {
        let Some(g) = sharpe_gradient(instance, &w) else {
            break;
        };
        let mut accepted = None;
        let mut t = step * 4.0;
        while t > 1e-16 {
            let trial: Vec<f64> = w.iter().zip(&g).map(|(x, gi)| x + t * gi).collect();
            let cand = project_simplex(&trial);
            let ascent: f64 = g
                .iter()
                .zip(cand.iter().zip(&w))
                .map(|(gi, (c, x))| gi * (c - x))
                .sum();
            let v = instance.negative_sharpe(&cand);
            if v <= value - 1e-4 * ascent {
                accepted = Some((cand, v, t));
                break;
            }
            t *= 0.5;
        }
        let Some((cand, v, t)) = accepted else {
            break;
        };
        let moved = cand
            .iter()
            .zip(&w)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        w = cand;
        value = v;
        step = t;
        if moved < 1e-15 {
            break;
        }
    }
    (value, w)
}

/// The comparison protocol: DCBO against softmin CBO at several inverse
/// temperatures, all from the same initial swarm distribution.
#[derive(Clone, Debug, PartialEq)]
pub struct PortfolioSetup {
    pub n_agents: usize,
    pub coefficients: Coefficients,
    pub softmin: SoftminCboParams,
    pub betas: Vec<f64>,
    pub stop: StoppingCriteria,
}

impl Default for PortfolioSetup {
    fn default() -> Self {
        Self {
            n_agents: 100,
            coefficients: Coefficients::BENCHMARK,
            softmin: SoftminCboParams {
                h: 0.01,
                lambda: 0.5,
                sigma: 1.0,
                ..SoftminCboParams::default()
            },
            betas: vec![10.0, 1e2, 1e4, 1e6],
            stop: StoppingCriteria {
                max_iter: 10_000,
                max_dist: 1e-5,
            },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PortfolioRow {
    pub method: String,
    pub beta: Option<f64>,
    pub value: f64,
    pub iterations: usize,
    pub weights: Vec<f64>,
}

fn row(method: &str, beta: Option<f64>, report: TrialReport) -> PortfolioRow {
    PortfolioRow {
        method: method.to_string(),
        beta,
        value: report.final_fp,
        iterations: report.iterations,
        weights: report.final_p,
    }
}

pub fn run_portfolio_experiment(
    instance: &PortfolioInstance,
    setup: &PortfolioSetup,
    streams: &Streams,
) -> Result<Vec<PortfolioRow>> {
    let objective = sharpe_objective(instance)?;
    let init = InitDistribution::UniformSimplex {
        dim: instance.dim(),
    };
    let dcbo = Dcbo::new(
        DcboParams::from_coefficients(setup.coefficients)?,
        setup.n_agents,
    )?;
    let mut rows = vec![row(
        "dcbo",
        None,
        dcbo.run(&objective, objective.domain(), &init, &setup.stop, streams)?,
    )];
    for &beta in &setup.betas {
        let cbo = SoftminCbo::new(
            SoftminCboParams {
                beta,
                ..setup.softmin
            },
            setup.n_agents,
        )?;
        let report = cbo.run(&objective, objective.domain(), &init, &setup.stop, streams)?;
        rows.push(row("softmin-cbo", Some(beta), report));
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngPolicy;

    fn diag_instance(mu: &[f64], var: &[f64]) -> PortfolioInstance {
        let d = mu.len();
        PortfolioInstance::new(
            (0..d).map(|i| i.to_string()).collect(),
            DVector::from_column_slice(mu),
            DMatrix::from_diagonal(&DVector::from_column_slice(var)),
        )
        .unwrap()
    }

    #[test]
    fn single_asset_value() {
        let inst = diag_instance(&[0.3], &[0.04]);
        let f = sharpe_objective(&inst).unwrap();
        assert!((f.eval(&[1.0]) + 0.3 / 0.2).abs() < 1e-15);
    }

    #[test]
    fn symmetric_instance_has_uniform_optimum() {
        let inst = diag_instance(&[0.1; 4], &[0.2; 4]);
        let (v, w) = reference_optimum(&inst, 5, &RngPolicy::new(0).trial(0));
        for wi in &w {
            assert!((wi - 0.25).abs() < 1e-6);
        }
        assert!((v + 0.1 / (0.2f64 / 4.0).sqrt()).abs() < 1e-10);
    }

    #[test]
    fn sharpe_is_scale_invariant() {
        let inst = synthetic_instance(5, &RngPolicy::new(3).trial(0), 0).unwrap();
        let w = [0.1, 0.3, 0.2, 0.15, 0.25];
        let scaled: Vec<f64> = w.iter().map(|v| 3.7 * v).collect();
        assert!((inst.negative_sharpe(&w) - inst.negative_sharpe(&scaled)).abs() < 1e-12);
    }

    #[test]
    fn degenerate_variance_is_infeasible() {
        let inst = diag_instance(&[0.1, 0.2], &[0.0, 0.0]);
        assert_eq!(inst.negative_sharpe(&[0.5, 0.5]), f64::INFINITY);
    }

    #[test]
    fn rejects_bad_covariances() {
        let mu = DVector::from_column_slice(&[0.1, 0.1]);
        let names = vec!["a".to_string(), "b".to_string()];
        let asym = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.4, 1.0]);
        assert!(PortfolioInstance::new(names.clone(), mu.clone(), asym).is_err());
        let indefinite = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(PortfolioInstance::new(names, mu, indefinite).is_err());
    }

    #[test]
    fn ingest_simple_tables() {
        let inst = ingest_returns("a,b\n1,2\n1,2\n1,2\n".as_bytes()).unwrap();
        assert_eq!(inst.assets, ["a", "b"]);
        assert_eq!(inst.mu.as_slice(), &[0.0, 0.0]);
        assert_eq!(inst.sigma.amax(), 0.0);

        let e = std::f64::consts::E;
        let inst = ingest_returns(format!("x\n1\n{e}\n").as_bytes()).unwrap();
        assert!((inst.mu[0] - 1.0).abs() < 1e-15);
        assert_eq!(inst.sigma[(0, 0)], 0.0);
    }

    #[test]
    fn ingest_matches_direct_statistics() {
        let table = "a,b\n100,50\n110,45\n99,47\n120,52\n";
        let inst = ingest_returns(table.as_bytes()).unwrap();
        let p: [[f64; 2]; 4] = [[100.0, 50.0], [110.0, 45.0], [99.0, 47.0], [120.0, 52.0]];
        let r: Vec<[f64; 2]> = (0..3)
            .map(|t| [(p[t + 1][0] / p[t][0]).ln(), (p[t + 1][1] / p[t][1]).ln()])
            .collect();
        let m = [0, 1].map(|j| r.iter().map(|x| x[j]).sum::<f64>() / 3.0);
        for j in 0..2 {
            assert!((inst.mu[j] - m[j]).abs() < 1e-15);
            for k in 0..2 {
                let c: f64 = r.iter().map(|x| (x[j] - m[j]) * (x[k] - m[k])).sum::<f64>() / 2.0;
                assert!((inst.sigma[(j, k)] - c).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn ingest_errors() {
        assert!(ingest_returns("a\n1\n".as_bytes()).is_err());
        assert!(ingest_returns("a\n1\nfoo\n".as_bytes()).is_err());
        assert!(ingest_returns("a\n1\n0\n".as_bytes()).is_err());
        assert!(ingest_returns("a\n1\n-2\n".as_bytes()).is_err());
        assert!(ingest_returns("a,b\n1,2\n3\n".as_bytes()).is_err());
    }

    #[test]
    fn oracle_is_a_constrained_stationary_point() {
        let s = RngPolicy::new(8).trial(0);
        for k in 0..5 {
            let inst = synthetic_instance(6, &s, k).unwrap();
            let (v, w) = reference_optimum(&inst, 10, &s);
            assert!(Domain::Simplex.contains(&w));
            // No simplex direction improves: the gradient is maximal and equal on the support.
            let g = sharpe_gradient(&inst, &w).unwrap();
            let top = g.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            for (gi, wi) in g.iter().zip(&w) {
                if *wi > 1e-8 {
                    assert!(top - gi < 1e-6, "{g:?} {w:?}");
                }
            }
            let init = InitDistribution::UniformSimplex { dim: 6 };
            let mut rng = s.rng(Purpose::Init, k, 1);
            for _ in 0..2000 {
                assert!(inst.negative_sharpe(&init.sample(&mut rng)) >= v - 1e-12);
            }
        }
    }
}

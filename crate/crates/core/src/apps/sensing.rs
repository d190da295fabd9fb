//! Sparse recovery: minimize `½‖Ax - b‖²` over the ℓ^½ quasi-norm ball,
//! then hard-threshold and refit on the detected support.

use std::collections::BTreeSet;

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::domain::{lp_quasi_norm, BoxBounds, Domain};
use crate::dynamics::Dcbo;
use crate::error::{Error, Result};
use crate::objectives::{InitDistribution, ObjectiveSpec};
use crate::report::{StoppingCriteria, TrialReport};
use crate::rng::{Purpose, RngPolicy, Streams};

/// Exponent of the constraint quasi-norm.
pub const QUASI_NORM_P: f64 = 0.5;

pub const DEFAULT_THRESHOLD: f64 = 0.01;

#[derive(Clone, Debug, PartialEq)]
pub struct SensingInstance {
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    pub x_true: DVector<f64>,
    pub support: Vec<usize>,
}

impl SensingInstance {
    pub fn dim(&self) -> usize {
        self.a.ncols()
    }

    pub fn measurements(&self) -> usize {
        self.a.nrows()
    }

    pub fn residual(&self, x: &[f64]) -> f64 {
        (&self.a * DVector::from_column_slice(x) - &self.b).norm()
    }
}

/// `A` has i.i.d. standard normal entries drawn from the instance stream
/// `index`; `b = A·x_true`.
pub fn make_sensing_instance(
    d: usize,
    m: usize,
    support: &[usize],
    values: &[f64],
    streams: &Streams,
    index: u64,
) -> Result<SensingInstance> {
    if m == 0 || m >= d {
        return Err(Error::invalid(format!("need 0 < m < d, got m={m}, d={d}")));
    }
    if support.len() != values.len() {
        return Err(Error::invalid("support and values differ in length"));
    }
    let unique: BTreeSet<usize> = support.iter().copied().collect();
    if unique.len() != support.len() {
        return Err(Error::invalid("duplicate support index"));
    }
    if let Some(&i) = unique.iter().find(|&&i| i >= d) {
        return Err(Error::invalid(format!(
            "support index {i} out of range for d={d}"
        )));
    }
    let mut rng = streams.rng(Purpose::Instance, index, 0);
    let a = DMatrix::from_fn(m, d, |_, _| StandardNormal.sample(&mut rng));
    let mut x_true = DVector::zeros(d);
    for (&i, &v) in support.iter().zip(values) {
        x_true[i] = v;
    }
    let b = &a * &x_true;
    Ok(SensingInstance {
        a,
        b,
        x_true,
        support: unique.into_iter().collect(),
    })
}

/// `½‖Ax - b‖²` inside `{‖x‖_½ ≤ r}`, `+∞` outside.
pub fn cs_objective(instance: &SensingInstance, r: f64) -> Result<ObjectiveSpec> {
    let domain = Domain::lp_ball(QUASI_NORM_P, r)?;
    let d = instance.dim();
    let a = instance.a.clone();
    let b = instance.b.clone();
    let feasible = domain.clone();
    Ok(ObjectiveSpec::new(
        "compressed-sensing",
        d,
        BoxBounds::cube(d, -1.0, 1.0)?,
        move |x| {
            if !feasible.contains(x) {
                return f64::INFINITY;
            }
            0.5 * (&a * DVector::from_column_slice(x) - &b).norm_squared()
        },
    )?
    .with_domain(domain)
    .with_known_min(0.0, None))
}

/// Uniform on `[-1, 1]^d`, shrunk into the ball when outside it.
pub fn cs_init(d: usize, r: f64) -> Result<InitDistribution> {
    Ok(InitDistribution::UniformShrunkToLpBall {
        bounds: BoxBounds::cube(d, -1.0, 1.0)?,
        p: QUASI_NORM_P,
        r,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RecoveryMetrics {
    pub tpr: f64,
    pub fpr: f64,
    /// `‖A x_refit - b‖₂`.
    pub residual: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Recovery {
    pub x_refit: Vec<f64>,
    pub detected: Vec<usize>,
    pub metrics: RecoveryMetrics,
    /// The detected support exceeded `m`; the refit is the least-norm
    /// least-squares solution.
    pub least_norm: bool,
}

/// Keep entries with `|x̂ᵢ| ≥ threshold`, then solve `min ‖A_Ŝ z - b‖₂`
/// by QR (SVD when `|Ŝ| > m` or `A_Ŝ` is rank deficient).
///
/// With an empty true support the true positive rate is reported as 1.
pub fn postprocess_recovery(
    x_hat: &[f64],
    instance: &SensingInstance,
    threshold: f64,
) -> Result<Recovery> {
    let d = instance.dim();
    if x_hat.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: x_hat.len(),
        });
    }
    if !(threshold > 0.0) {
        return Err(Error::invalid("threshold must be positive"));
    }
    let detected: Vec<usize> = (0..d).filter(|&i| x_hat[i].abs() >= threshold).collect();
    let m = instance.measurements();
    let mut x_refit = vec![0.0; d];
    let mut least_norm = false;
    if !detected.is_empty() {
        let a_s = instance.a.select_columns(&detected);
        let z = if detected.len() <= m {
            solve_qr(&a_s, &instance.b)
        } else {
            None
        };
        let z = match z {
            Some(z) => z,
            None => {
                least_norm = detected.len() > m;
                a_s.svd(true, true)
                    .solve(&instance.b, 1e-12)
                    .map_err(|e| Error::Data(e.to_string()))?
            }
        };
        for (k, &i) in detected.iter().enumerate() {
            x_refit[i] = z[k];
        }
    }
    let metrics = recovery_metrics(&detected, &instance.support, d, instance.residual(&x_refit));
    Ok(Recovery {
        x_refit,
        detected,
        metrics,
        least_norm,
    })
}

fn solve_qr(a: &DMatrix<f64>, b: &DVector<f64>) -> Option<DVector<f64>> {
    let qr = a.clone().qr();
    let r = qr.r();
    let scale = r.diagonal().amax();
    if r.diagonal()
        .iter()
        .any(|v| v.abs() <= 1e-12 * scale.max(1.0))
    {
        return None;
    }
    let qtb = qr.q().transpose() * b;
    r.solve_upper_triangular(&qtb)
}

fn recovery_metrics(
    detected: &[usize],
    truth: &[usize],
    d: usize,
    residual: f64,
) -> RecoveryMetrics {
    let truth: BTreeSet<usize> = truth.iter().copied().collect();
    let hits = detected.iter().filter(|i| truth.contains(i)).count();
    let false_pos = detected.len() - hits;
    let tpr = if truth.is_empty() {
        1.0
    } else {
        hits as f64 / truth.len() as f64
    };
    let negatives = d - truth.len();
    let fpr = if negatives == 0 {
        0.0
    } else {
        false_pos as f64 / negatives as f64
    };
    RecoveryMetrics { tpr, fpr, residual }
}

/// Test signal with `s ∈ {2, 4, 6}` nonzeros of alternating sign, spread
/// over `0..d` and scaled to ℓ^½ quasi-norm 3.4655, 12.9132 or 21.3583.
pub fn fixed_signal(s: usize, d: usize) -> Result<(Vec<usize>, Vec<f64>)> {
    let (pattern, target): (&[f64], f64) = match s {
        2 => (&[1.0, -0.6], 3.4655),
        4 => (&[1.0, -0.8, 0.6, -0.4], 12.9132),
        6 => (&[1.0, -0.9, 0.8, -0.7, 0.6, -0.5], 21.3583),
        _ => return Err(Error::invalid(format!("no fixed signal with {s} nonzeros"))),
    };
    if d < 2 * s {
        return Err(Error::invalid(format!(
            "d={d} too small for a {s}-sparse signal"
        )));
    }
    let scale = target / lp_quasi_norm(pattern, QUASI_NORM_P);
    let stride = d / s;
    let support = (0..s).map(|k| k * stride + stride / 2).collect();
    Ok((support, pattern.iter().map(|v| v * scale).collect()))
}

#[derive(Clone, Debug, PartialEq)]
pub struct CsTrial {
    pub report: TrialReport,
    pub recovery: Recovery,
    /// Every recorded `f(p)` was finite, so `p` stayed in the ball.
    pub feasible_throughout: bool,
}

pub fn run_cs_trial(
    instance: &SensingInstance,
    r: f64,
    dcbo: &Dcbo,
    stop: &StoppingCriteria,
    threshold: f64,
    streams: &Streams,
) -> Result<CsTrial> {
    let objective = cs_objective(instance, r)?;
    let init = cs_init(instance.dim(), r)?;
    let report = dcbo.run(&objective, objective.domain(), &init, stop, streams)?;
    let feasible_throughout = report.fp_trace.iter().all(|v| v.is_finite())
        && objective.domain().contains(&report.final_p);
    let recovery = postprocess_recovery(&report.final_p, instance, threshold)?;
    Ok(CsTrial {
        report,
        recovery,
        feasible_throughout,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct CsConfig {
    pub d: usize,
    pub m: usize,
    pub sparsities: Vec<usize>,
    pub radii: Vec<f64>,
    pub trials: usize,
    pub dcbo: Dcbo,
    pub stop: StoppingCriteria,
    pub threshold: f64,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CsRow {
    pub s: usize,
    pub r: f64,
    pub signal_quasi_norm: f64,
    pub trials: usize,
    pub tpr_mean: f64,
    pub tpr_se: f64,
    pub fpr_mean: f64,
    pub fpr_se: f64,
    pub feasible_trials: usize,
}

fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// One row per `(s, r)`. Trial `t` uses the same sensing matrix for every
/// radius, so rows with equal `s` are paired.
pub fn run_cs_experiment(config: &CsConfig) -> Result<Vec<CsRow>> {
    if config.trials == 0 {
        return Err(Error::invalid("trials must be positive"));
    }
    let policy = RngPolicy::new(config.seed);
    let mut rows = Vec::new();
    for &s in &config.sparsities {
        let (support, values) = fixed_signal(s, config.d)?;
        let quasi = lp_quasi_norm(&values, QUASI_NORM_P);
        for &r in &config.radii {
            let trials: Vec<CsTrial> = (0..config.trials)
                .into_par_iter()
                .map(|t| {
                    let streams = policy.trial(t as u64);
                    let inst = make_sensing_instance(
                        config.d, config.m, &support, &values, &streams, s as u64,
                    )?;
                    run_cs_trial(
                        &inst,
                        r,
                        &config.dcbo,
                        &config.stop,
                        config.threshold,
                        &streams,
                    )
                })
                .collect::<Result<_>>()?;
            let tpr: Vec<f64> = trials.iter().map(|t| t.recovery.metrics.tpr).collect();
            let fpr: Vec<f64> = trials.iter().map(|t| t.recovery.metrics.fpr).collect();
            let (tpr_mean, tpr_se) = mean_se(&tpr);
            let (fpr_mean, fpr_se) = mean_se(&fpr);
            rows.push(CsRow {
                s,
                r,
                signal_quasi_norm: quasi,
                trials: trials.len(),
                tpr_mean,
                tpr_se,
                fpr_mean,
                fpr_se,
                feasible_trials: trials.iter().filter(|t| t.feasible_throughout).count(),
            });
        }
    }
    Ok(rows)
}

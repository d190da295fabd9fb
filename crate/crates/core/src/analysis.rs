//! Parameter conditions for contraction of the update maps.
//!
//! The anisotropic map contracts each coordinate toward a frozen consensus
//! point by the random factor `X = |1 - γ¹ + γ²η|`, `η ~ N(0,1)`. The swarm
//! collapses when `inf_{α>0} E[Xᵅ] < 1`. That holds if the first moment
//! (folded-normal mean) or the second moment is below one; otherwise a
//! Monte-Carlo sweep over small `α` can certify it. By Jensen,
//! `E[Xᵅ] ≥ exp(α E[log X])`, so `E[log X] ≥ 0` refutes it.
//!
//! Note that the exact second moment is `(1-γ¹)² + (γ²)²`, and the exact
//! first moment uses `μ = 1-γ¹` in both terms of the folded-normal mean.
//!
//! The isotropic map is covered by `γ̄¹ ≥ γ̄²` together with the expected
//! squared contraction factor computed in [`isotropic_contraction`].

use libm::{erfc, lgamma as ln_gamma};
use serde::Serialize;

use crate::dynamics::Coefficients;
use crate::error::{Error, Result};
use crate::rng::{Purpose, Streams};

/// Standard normal CDF `Ψ`.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// `E|μ + ση|` for `η ~ N(0,1)`.
pub fn folded_normal_abs_mean(mu: f64, sigma: f64) -> f64 {
    if sigma == 0.0 {
        return mu.abs();
    }
    let two_over_pi = 2.0 / std::f64::consts::PI;
    sigma * two_over_pi.sqrt() * (-mu * mu / (2.0 * sigma * sigma)).exp()
        + mu * (1.0 - 2.0 * normal_cdf(-mu / sigma))
}

/// `E|1 - γ¹ + γ²η|²`.
pub fn second_abs_moment(gamma1: f64, gamma2: f64) -> f64 {
    (1.0 - gamma1).powi(2) + gamma2 * gamma2
}

/// `√(2/d) Γ((d+1)/2) / Γ(d/2)`, i.e. `E‖η‖ / √d` for `η ~ N(0, I_d)`.
pub fn chi_mean_ratio(d: usize) -> f64 {
    let d = d as f64;
    (2.0 / d).sqrt() * (ln_gamma((d + 1.0) / 2.0) - ln_gamma(d / 2.0)).exp()
}

/// `E[Y] = (1-γ̄¹+γ̄²)² - 2(1-γ̄¹)γ̄²(1 - √(2/d)Γ((d+1)/2)/Γ(d/2))`, the expected
/// squared contraction factor of the isotropic map.
pub fn isotropic_contraction(gbar1: f64, gbar2: f64, d: usize) -> f64 {
    (1.0 - gbar1 + gbar2).powi(2) - 2.0 * (1.0 - gbar1) * gbar2 * (1.0 - chi_mean_ratio(d))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct AlphaMoment {
    pub alpha: f64,
    pub estimate: f64,
    pub stderr: f64,
}

pub const MIN_MC_SAMPLES: usize = 10_000;

fn anisotropic_factors(gamma1: f64, gamma2: f64, samples: usize, streams: &Streams) -> Vec<f64> {
    let mut eta = vec![0.0; samples];
    streams.fill_normals(Purpose::MonteCarlo, 0, 0, &mut eta);
    let mu = 1.0 - gamma1;
    eta.iter().map(|e| (mu + gamma2 * e).abs()).collect()
}

fn mean_and_stderr(xs: impl Iterator<Item = f64>, n: usize) -> (f64, f64) {
    // Welford.
    let mut mean = 0.0;
    let mut m2 = 0.0;
    for (k, x) in xs.enumerate() {
        let delta = x - mean;
        mean += delta / (k + 1) as f64;
        m2 += delta * (x - mean);
    }
    let var = if n > 1 { m2 / (n - 1) as f64 } else { 0.0 };
    (mean, (var / n as f64).sqrt())
}

/// Monte-Carlo estimates of `E|1 - γ¹ + γ²η|ᵅ` for each `α`, all from the
/// same draws.
pub fn mc_alpha_moment(
    gamma1: f64,
    gamma2: f64,
    alphas: &[f64],
    samples: usize,
    streams: &Streams,
) -> Result<Vec<AlphaMoment>> {
    if samples < MIN_MC_SAMPLES {
        return Err(Error::invalid(format!(
            "at least {MIN_MC_SAMPLES} samples are required, got {samples}"
        )));
    }
    if let Some(a) = alphas.iter().find(|a| !(**a > 0.0)) {
        return Err(Error::invalid(format!("α must be positive, got {a}")));
    }
    let xs = anisotropic_factors(gamma1, gamma2, samples, streams);
    Ok(alphas
        .iter()
        .map(|&alpha| {
            let (estimate, stderr) = mean_and_stderr(xs.iter().map(|x| x.powf(alpha)), samples);
            AlphaMoment {
                alpha,
                estimate,
                stderr,
            }
        })
        .collect())
}

/// Monte-Carlo estimate of `E[log|1 - γ¹ + γ²η|]` with its standard error.
pub fn mc_log_moment(gamma1: f64, gamma2: f64, samples: usize, streams: &Streams) -> (f64, f64) {
    if gamma2 == 0.0 {
        return ((1.0 - gamma1).abs().ln(), 0.0);
    }
    let xs = anisotropic_factors(gamma1, gamma2, samples, streams);
    mean_and_stderr(xs.iter().map(|x| x.ln()), samples)
}

/// `n` log-spaced points in `[lo, hi]`.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|k| (a + (b - a) * k as f64 / (n - 1) as f64).exp())
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    ProvenTrue,
    ProvenFalse,
    Undetermined,
}

/// What settled the anisotropic condition.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Certificate {
    ParameterRange,
    FirstMoment,
    SecondMoment,
    AlphaSweep,
    LogMoment,
    None,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AnalysisConfig {
    pub alphas: Vec<f64>,
    pub samples: usize,
}

impl Default for AnalysisConfig {
    /// 20 log-spaced `α` in `[0.05, 2]`, 10⁶ samples.
    fn default() -> Self {
        Self {
            alphas: log_grid(0.05, 2.0, 20),
            samples: 1_000_000,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConditionReport {
    pub coefficients: Coefficients,
    pub dimension: usize,
    pub b1a_holds: Verdict,
    pub b1a_certificate: Certificate,
    /// `E|1 - γ¹ + γ²η|`.
    pub b2_value: f64,
    /// `E|1 - γ¹ + γ²η|²`.
    pub b3_value: f64,
    pub alpha_sweep: Vec<AlphaMoment>,
    /// `(E[log X], stderr)`.
    pub log_moment: (f64, f64),
    pub b1b_holds: bool,
    pub isotropic_contraction: f64,
    /// `(1 - γ̄¹ + γ̄²)² ≤ 1/2`.
    pub prop34_ok: bool,
}

/// Evaluate every condition for `coefficients` in dimension `d`.
///
/// The anisotropic verdict is settled by, in order: the parameter range,
/// the first moment, the second moment, the `α` sweep (estimate + 3·SE
/// below one), and the log-moment refutation (estimate - 3·SE ≥ 0).
/// `γ¹ = 1` is admitted: every moment vanishes when `γ² = 0`.
pub fn check_conditions(
    coefficients: &Coefficients,
    d: usize,
    streams: &Streams,
    config: &AnalysisConfig,
) -> Result<ConditionReport> {
    if d == 0 {
        return Err(Error::invalid("dimension must be positive"));
    }
    let Coefficients {
        gamma1,
        gamma2,
        gbar1,
        gbar2,
    } = *coefficients;

    let b2_value = folded_normal_abs_mean(1.0 - gamma1, gamma2);
    let b3_value = second_abs_moment(gamma1, gamma2);
    let alpha_sweep = mc_alpha_moment(gamma1, gamma2, &config.alphas, config.samples, streams)?;
    let log_moment = mc_log_moment(gamma1, gamma2, config.samples, streams);

    let in_range = gamma1 > 0.0 && gamma1 <= 1.0 && gamma2 >= 0.0 && gamma2.is_finite();
    let (b1a_holds, b1a_certificate) = if !in_range {
        (Verdict::ProvenFalse, Certificate::ParameterRange)
    } else if b2_value < 1.0 {
        (Verdict::ProvenTrue, Certificate::FirstMoment)
    } else if b3_value < 1.0 {
        (Verdict::ProvenTrue, Certificate::SecondMoment)
    } else if alpha_sweep
        .iter()
        .any(|m| m.estimate + 3.0 * m.stderr < 1.0)
    {
        (Verdict::ProvenTrue, Certificate::AlphaSweep)
    } else if log_moment.0 - 3.0 * log_moment.1 >= 0.0 {
        (Verdict::ProvenFalse, Certificate::LogMoment)
    } else {
        (Verdict::Undetermined, Certificate::None)
    };

    let b1b_holds = gbar1 > 0.0 && gbar1 < 1.0 && gbar2 >= 0.0 && gbar1 >= gbar2;
    let prop34_ok = (1.0 - gbar1 + gbar2).powi(2) <= 0.5;

    Ok(ConditionReport {
        coefficients: *coefficients,
        dimension: d,
        b1a_holds,
        b1a_certificate,
        b2_value,
        b3_value,
        alpha_sweep,
        log_moment,
        b1b_holds,
        isotropic_contraction: isotropic_contraction(gbar1, gbar2, d),
        prop34_ok,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngPolicy;

    fn coeffs(gamma1: f64, gamma2: f64, gbar1: f64, gbar2: f64) -> Coefficients {
        Coefficients {
            gamma1,
            gamma2,
            gbar1,
            gbar2,
        }
    }

    fn small() -> AnalysisConfig {
        AnalysisConfig {
            alphas: log_grid(0.05, 2.0, 20),
            samples: 200_000,
        }
    }

    #[test]
    fn normal_cdf_reference_points() {
        assert_eq!(normal_cdf(0.0), 0.5);
        assert!(
            (normal_cdf(1.0) - 0.841_344_746_068_542_9).abs() < 1e-13,
            "{}",
            normal_cdf(1.0)
        );
        assert!((normal_cdf(-2.0) - 0.022_750_131_948_179_2).abs() < 1e-13);
    }

    #[test]
    fn folded_mean_edge_cases() {
        assert!((folded_normal_abs_mean(0.0, 1.0) - 0.797_884_560_8).abs() < 1e-10);
        assert_eq!(folded_normal_abs_mean(1.0, 0.0), 1.0);
        assert_eq!(folded_normal_abs_mean(-2.5, 0.0), 2.5);
    }

    #[test]
    fn folded_mean_against_monte_carlo() {
        let mut eta = vec![0.0; 1_000_000];
        RngPolicy::new(12)
            .trial(0)
            .fill_normals(Purpose::MonteCarlo, 0, 0, &mut eta);
        let (est, se) = mean_and_stderr(eta.iter().map(|e| (0.5 + e).abs()), eta.len());
        let exact = folded_normal_abs_mean(0.5, 1.0);
        assert!((est - exact).abs() < 3.0 * se, "{est} vs {exact} (se {se})");
    }

    #[test]
    fn second_moment_values() {
        assert_eq!(second_abs_moment(1.0, 0.0), 0.0);
        assert_eq!(second_abs_moment(0.5, 0.5), 0.5);
        assert_eq!(second_abs_moment(0.5, 1.0), 1.25);
    }

    #[test]
    fn alpha_moments() {
        let s = RngPolicy::new(3).trial(0);
        let m = mc_alpha_moment(1.0, 0.0, &[0.3, 1.0, 2.0], 10_000, &s).unwrap();
        assert!(m.iter().all(|a| a.estimate == 0.0 && a.stderr == 0.0));
        let m = mc_alpha_moment(0.5, 0.5, &[2.0], 400_000, &s).unwrap();
        assert!((m[0].estimate - 0.5).abs() < 3.0 * m[0].stderr);
        assert!(mc_alpha_moment(0.5, 0.5, &[2.0], 100, &s).is_err());
        assert!(mc_alpha_moment(0.5, 0.5, &[0.0], 10_000, &s).is_err());
    }

    #[test]
    fn chi_ratio_monotone_below_one() {
        assert!((chi_mean_ratio(1) - (2.0 / std::f64::consts::PI).sqrt()).abs() < 1e-14);
        let mut prev = 0.0;
        for d in 1..=2000 {
            let r = chi_mean_ratio(d);
            assert!(r < 1.0 && r > prev, "d={d}");
            prev = r;
        }
    }

    #[test]
    fn isotropic_contraction_values() {
        assert!((isotropic_contraction(0.3, 0.0, 7) - 0.49).abs() < 1e-15);
        // d = 1 plug-in: (0.6)² + (0.3)² + 2·0.6·0.3·√(2/π).
        let expected = 0.36 + 0.09 + 0.36 * (2.0 / std::f64::consts::PI).sqrt();
        assert!((isotropic_contraction(0.4, 0.3, 1) - expected).abs() < 1e-14);
        // Monte Carlo of Y = (1-a)² + b²η² + 2(1-a)b|η| at d = 1.
        let mut eta = vec![0.0; 1_000_000];
        RngPolicy::new(8)
            .trial(0)
            .fill_normals(Purpose::MonteCarlo, 0, 0, &mut eta);
        let (est, se) = mean_and_stderr(
            eta.iter().map(|e| 0.36 + 0.09 * e * e + 0.36 * e.abs()),
            eta.len(),
        );
        assert!((est - expected).abs() < 3.0 * se);
    }

    #[test]
    fn classification_examples() {
        let s = RngPolicy::new(1).trial(0);
        let r = check_conditions(&coeffs(0.5, 1.0, 0.4, 0.7), 10, &s, &small()).unwrap();
        assert!(!r.b1b_holds);
        assert_eq!(r.b1a_holds, Verdict::ProvenTrue);
        let r = check_conditions(&coeffs(0.5, 1.0, 0.5, 0.2), 10, &s, &small()).unwrap();
        assert!(r.b1b_holds);
        assert!(r.prop34_ok);
        let r = check_conditions(&coeffs(1.0, 0.0, 0.5, 0.2), 3, &s, &small()).unwrap();
        assert_eq!(r.b1a_holds, Verdict::ProvenTrue);
        assert_eq!(r.b2_value, 0.0);
        assert_eq!(r.b3_value, 0.0);
    }

    #[test]
    fn huge_noise_is_refuted() {
        // E log|0.5 + 5η| ≈ log 5 - 0.64 > 0.
        let s = RngPolicy::new(2).trial(0);
        let r = check_conditions(&coeffs(0.5, 5.0, 0.4, 0.7), 2, &s, &small()).unwrap();
        assert_eq!(r.b1a_holds, Verdict::ProvenFalse);
        assert_eq!(r.b1a_certificate, Certificate::LogMoment);
        let r = check_conditions(&coeffs(1.5, 0.0, 0.4, 0.7), 2, &s, &small()).unwrap();
        assert_eq!(r.b1a_certificate, Certificate::ParameterRange);
    }

    #[test]
    fn report_is_deterministic() {
        let s = RngPolicy::new(5).trial(0);
        let c = coeffs(0.3, 1.4, 0.4, 0.7);
        assert_eq!(
            check_conditions(&c, 4, &s, &small()).unwrap(),
            check_conditions(&c, 4, &s, &small()).unwrap()
        );
    }
}

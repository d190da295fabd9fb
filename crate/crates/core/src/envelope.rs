//! Modulus-of-continuity envelopes and the success-probability bounds
//! they yield.
//!
//! If `f(x) - f(x*) ≤ k(‖x - x*‖)`, every initial draw inside the ball of
//! radius `k⁻¹(ε)` around `x*` is already ε-optimal, and since the best
//! value never increases the run ends ε-optimal too. With `N` independent
//! uniform draws on `[-L, L]^d` this happens with probability at least
//! `1 - (1 - vol(ball)/(2L)^d)^N`.
//!
//! A radial lower envelope `f(x) - f(x*) ≥ g(‖x - x*‖)` confines every
//! ε-optimal point to the ball of radius `sup{t : g(t) < ε}`.

use std::f64::consts::{E, PI};
use std::fmt;
use std::sync::Arc;

use libm::lgamma as ln_gamma;
use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::rng::{Purpose, Streams};

pub type RadialFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Monte-Carlo draws used when the ball sticks out of the box.
pub const INTERSECTION_SAMPLES: usize = 1_000_000;

#[derive(Clone)]
pub struct ModulusEnvelope {
    center: Vec<f64>,
    upper: RadialFn,
    upper_sup: f64,
    lower: Option<(RadialFn, f64)>,
}

impl fmt::Debug for ModulusEnvelope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ModulusEnvelope")
            .field("dim", &self.center.len())
            .field("upper_sup", &self.upper_sup)
            .field("has_lower", &self.lower.is_some())
            .finish()
    }
}

impl ModulusEnvelope {
    /// `upper` is the modulus `k`, non-decreasing with `k(0) = 0`, and
    /// `upper_sup` its limit at infinity.
    pub fn new<K>(center: Vec<f64>, upper: K, upper_sup: f64) -> Self
    where
        K: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        Self {
            center,
            upper: Arc::new(upper),
            upper_sup,
            lower: None,
        }
    }

    /// Radial lower envelope `f_m(v) = g(‖v‖)` with `g(0) = 0`, increasing
    /// to `sup`.
    pub fn with_lower<G>(mut self, g: G, sup: f64) -> Self
    where
        G: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        self.lower = Some((Arc::new(g), sup));
        self
    }

    pub fn center(&self) -> &[f64] {
        &self.center
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn k(&self, t: f64) -> f64 {
        (self.upper)(t)
    }

    /// `f_M(v) = k(‖v‖)`.
    pub fn f_upper(&self, v: &[f64]) -> f64 {
        self.k(norm(v))
    }

    /// `f_m(v)`, when a lower envelope is present.
    pub fn f_lower(&self, v: &[f64]) -> Option<f64> {
        self.lower.as_ref().map(|(g, _)| g(norm(v)))
    }

    /// `sup{t : k(t) ≤ ε}`, to 1e-12; infinite when `ε ≥ sup k`.
    pub fn k_inverse(&self, epsilon: f64) -> f64 {
        if epsilon < 0.0 {
            return 0.0;
        }
        if epsilon >= self.upper_sup {
            return f64::INFINITY;
        }
        sup_below(&*self.upper, epsilon, |v, e| v <= e)
    }

    /// `sup{t : g(t) < ε}` for the lower envelope.
    pub fn lower_radius(&self, epsilon: f64) -> Result<f64> {
        let (g, sup) = self
            .lower
            .as_ref()
            .ok_or_else(|| Error::invalid("envelope has no lower bound"))?;
        if epsilon <= 0.0 {
            return Ok(0.0);
        }
        if epsilon >= *sup {
            return Err(Error::UnboundedSublevelSet { epsilon });
        }
        Ok(sup_below(&**g, epsilon, |v, e| v < e))
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Largest `t` with `accept(g(t), ε)` for non-decreasing `g`, by bracketing
/// and bisection.
fn sup_below(g: &dyn Fn(f64) -> f64, epsilon: f64, accept: impl Fn(f64, f64) -> bool) -> f64 {
    let mut lo = 0.0;
    let mut hi = 1.0;
    while accept(g(hi), epsilon) {
        lo = hi;
        hi *= 2.0;
        if hi > 1e300 {
            return f64::INFINITY;
        }
    }
    while hi - lo > 1e-12 * lo.max(1.0) {
        let mid = 0.5 * (lo + hi);
        if accept(g(mid), epsilon) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

/// Modulus of the Ackley function `-a·exp(-b‖x‖/√d) - exp(Σcos(cxᵢ)/d) + a + e`:
///
/// `k(t) = a(1 - exp(-bt/√d)) + e(1 - exp(-ct/√d))`, with lower envelope
/// `f_m(x) = a - a·exp(-b‖x‖/√d)`, both centered at the origin.
pub fn ackley_modulus(a: f64, b: f64, c: f64, d: usize) -> Result<ModulusEnvelope> {
    if !(a > 0.0 && b > 0.0 && c > 0.0) || d == 0 {
        return Err(Error::invalid("ackley modulus needs a, b, c > 0 and d ≥ 1"));
    }
    let sd = (d as f64).sqrt();
    Ok(ModulusEnvelope::new(
        vec![0.0; d],
        move |t| a * (1.0 - (-b * t / sd).exp()) + E * (1.0 - (-c * t / sd).exp()),
        a + E,
    )
    .with_lower(move |t| a - a * (-b * t / sd).exp(), a))
}

/// Closed form of the Ackley lower-envelope diameter:
/// `2√d/b · log(a/(a - ε))`.
pub fn ackley_distance_bound(a: f64, b: f64, d: usize, epsilon: f64) -> Result<f64> {
    if epsilon >= a {
        return Err(Error::UnboundedSublevelSet { epsilon });
    }
    if epsilon <= 0.0 {
        return Ok(0.0);
    }
    Ok(2.0 * (d as f64).sqrt() / b * (a / (a - epsilon)).ln())
}

/// `diam(S_ε^m)`: an upper bound on the eventual distance between the
/// consensus point and the minimizer whenever the run ends ε-optimal.
pub fn minimizer_distance_bound(envelope: &ModulusEnvelope, epsilon: f64) -> Result<f64> {
    Ok(2.0 * envelope.lower_radius(epsilon)?)
}

/// Volume of the `d`-ball of radius `r`, `π^{d/2} r^d / Γ(d/2 + 1)`.
pub fn ball_volume(d: usize, r: f64) -> f64 {
    let df = d as f64;
    (0.5 * df * PI.ln() + df * r.ln() - ln_gamma(0.5 * df + 1.0)).exp()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ProbabilityBound {
    pub probability: f64,
    /// `k⁻¹(ε)`.
    pub radius: f64,
    /// `ρ_in(ball)`, the chance a single draw lands in the ball.
    pub single_draw: f64,
    /// The ball was not inside the box; `single_draw` is a Monte-Carlo
    /// lower confidence bound (estimate - 3·SE) on the intersection.
    pub monte_carlo: bool,
}

/// `1 - (1 - ρ_in(B(x*, k⁻¹(ε))))^N` for `N` uniform draws on `[-L, L]^d`.
pub fn success_probability_lower_bound(
    envelope: &ModulusEnvelope,
    epsilon: f64,
    half_width: f64,
    n_agents: usize,
    streams: &Streams,
) -> Result<ProbabilityBound> {
    if !(epsilon > 0.0) {
        return Err(Error::invalid("ε must be positive"));
    }
    if !(half_width > 0.0) {
        return Err(Error::invalid("box half-width must be positive"));
    }
    let d = envelope.dim();
    let radius = envelope.k_inverse(epsilon);
    if radius == 0.0 {
        return Ok(ProbabilityBound {
            probability: 0.0,
            radius,
            single_draw: 0.0,
            monte_carlo: false,
        });
    }
    let inside = envelope
        .center()
        .iter()
        .all(|c| c.abs() + radius <= half_width);
    let (single_draw, monte_carlo) = if inside {
        let frac = (ball_volume(d, radius).ln() - d as f64 * (2.0 * half_width).ln()).exp();
        (frac, false)
    } else {
        let mut rng = streams.rng(Purpose::MonteCarlo, 0, 0);
        let mut x = vec![0.0; d];
        let mut hits = 0usize;
        for _ in 0..INTERSECTION_SAMPLES {
            for v in x.iter_mut() {
                *v = rng.random_range(-half_width..half_width);
            }
            let dist2: f64 = x
                .iter()
                .zip(envelope.center())
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            if dist2.sqrt() < radius {
                hits += 1;
            }
        }
        let n = INTERSECTION_SAMPLES as f64;
        let p = hits as f64 / n;
        ((p - 3.0 * (p * (1.0 - p) / n).sqrt()).max(0.0), true)
    };
    let single_draw = single_draw.clamp(0.0, 1.0);
    let probability = if single_draw >= 1.0 {
        1.0
    } else {
        (-(n_agents as f64 * (-single_draw).ln_1p()).exp_m1()).clamp(0.0, 1.0)
    };
    Ok(ProbabilityBound {
        probability,
        radius,
        single_draw,
        monte_carlo,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objectives::ackley_with;
    use crate::rng::RngPolicy;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const A: f64 = 20.0;
    const B: f64 = 0.2;
    const C: f64 = 2.0 * PI;

    #[test]
    fn k_is_a_modulus_for_ackley() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        for d in [2usize, 10] {
            let env = ackley_modulus(A, B, C, d).unwrap();
            assert_eq!(env.k(0.0), 0.0);
            for _ in 0..10_000 {
                let x: Vec<f64> = (0..d).map(|_| rng.random_range(-32.768..32.768)).collect();
                let y: Vec<f64> = (0..d).map(|_| rng.random_range(-32.768..32.768)).collect();
                let dist = norm(&x.iter().zip(&y).map(|(a, b)| a - b).collect::<Vec<_>>());
                let fx = ackley_with(&x, A, B, C);
                let fy = ackley_with(&y, A, B, C);
                assert!((fx - fy).abs() <= env.k(dist) + 1e-12);
                // Envelope sandwich around x* = 0.
                assert!(env.f_lower(&x).unwrap() <= fx + 1e-12);
                assert!(fx <= env.f_upper(&x) + 1e-12);
                let (t1, t2) = (rng.random_range(0.0..50.0), rng.random_range(0.0..50.0));
                let (lo, hi) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
                assert!(env.k(lo) <= env.k(hi));
            }
        }
    }

    #[test]
    fn k_inverse_is_a_right_inverse() {
        let env = ackley_modulus(A, B, C, 5).unwrap();
        for t in [0.0, 1e-6, 0.01, 0.3, 1.0, 7.0, 40.0] {
            let inv = env.k_inverse(env.k(t));
            assert!(inv >= t - 1e-12 * t.max(1.0), "t={t} inv={inv}");
        }
        for eps in [1e-9, 1e-3, 0.5, 3.0, 20.0] {
            assert!(env.k(env.k_inverse(eps)) <= eps + 1e-9);
        }
        assert_eq!(env.k_inverse(A + E), f64::INFINITY);
    }

    #[test]
    fn ackley_distance_bound_values() {
        let got = ackley_distance_bound(A, B, 100, 1.0).unwrap();
        assert!((got - 100.0 * (20.0f64 / 19.0).ln()).abs() < 1e-12);
        assert!((got - 5.1293).abs() < 1e-4);
        assert_eq!(ackley_distance_bound(A, B, 100, 0.0).unwrap(), 0.0);
        assert!(ackley_distance_bound(A, B, 100, 20.0).is_err());
        let env = ackley_modulus(A, B, C, 100).unwrap();
        let mut prev = 0.0;
        for eps in [0.01, 0.1, 1.0, 5.0, 19.0] {
            let closed = ackley_distance_bound(A, B, 100, eps).unwrap();
            let numeric = minimizer_distance_bound(&env, eps).unwrap();
            assert!((closed - numeric).abs() < 1e-9 * closed.max(1.0));
            assert!(closed > prev);
            prev = closed;
        }
        assert!(matches!(
            minimizer_distance_bound(&env, 25.0),
            Err(Error::UnboundedSublevelSet { .. })
        ));
    }

    #[test]
    fn ball_volume_low_dims() {
        assert!((ball_volume(1, 0.5) - 1.0).abs() < 1e-14);
        assert!((ball_volume(2, 0.5) - PI * 0.25).abs() < 1e-14);
        assert!((ball_volume(3, 2.0) - 4.0 / 3.0 * PI * 8.0).abs() < 1e-12);
    }

    #[test]
    fn bound_matches_monte_carlo_of_random_search() {
        let env = ackley_modulus(A, B, C, 2).unwrap();
        let s = RngPolicy::new(1).trial(0);
        let bound = success_probability_lower_bound(&env, 0.5, 5.0, 50, &s).unwrap();
        assert!(!bound.monte_carlo);
        // Oracle: 10⁶ draws of a single point; P[hit among N] = 1-(1-q)^N.
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let draws = 1_000_000;
        let hits = (0..draws)
            .filter(|_| {
                let x: [f64; 2] = [rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0)];
                env.f_upper(&x) < 0.5
            })
            .count();
        let q = hits as f64 / draws as f64;
        let se = (q * (1.0 - q) / draws as f64).sqrt();
        assert!(
            (q - bound.single_draw).abs() < 4.0 * se,
            "{q} vs {}",
            bound.single_draw
        );
        let oracle = 1.0 - (1.0 - q).powi(50);
        assert!(
            (oracle - bound.probability).abs() < 0.01,
            "{oracle} vs {}",
            bound.probability
        );
    }

    #[test]
    fn bound_limits_and_monotonicity() {
        let env = ackley_modulus(A, B, C, 2).unwrap();
        let s = RngPolicy::new(1).trial(0);
        let tiny = success_probability_lower_bound(&env, 1e-12, 5.0, 50, &s).unwrap();
        assert!(tiny.probability < 1e-10);
        let mut prev = 0.0;
        for n in [1, 10, 100, 1_000, 100_000, 1_000_000] {
            let p = success_probability_lower_bound(&env, 0.5, 5.0, n, &s)
                .unwrap()
                .probability;
            assert!(p >= prev && p <= 1.0);
            prev = p;
        }
        assert!(prev > 0.999);
        let mut prev = 0.0;
        for eps in [0.01, 0.1, 0.5, 1.0, 2.0] {
            let p = success_probability_lower_bound(&env, eps, 5.0, 20, &s)
                .unwrap()
                .probability;
            assert!(p >= prev);
            prev = p;
        }
    }

    #[test]
    fn ball_outside_box_falls_back_to_monte_carlo() {
        let env = ackley_modulus(A, B, C, 2).unwrap();
        let s = RngPolicy::new(1).trial(0);
        let eps = env.k(2.0);
        let b = success_probability_lower_bound(&env, eps, 1.0, 5, &s).unwrap();
        assert!(b.monte_carlo);
        // Ball of radius 2 covers the box [-1,1]² up to its corners.
        assert!(b.single_draw > 0.99 && b.single_draw <= 1.0);
    }
}

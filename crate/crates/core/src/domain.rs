//! Feasible regions: unbounded space, boxes, the probability simplex and
//! ℓᵖ quasi-norm balls.
//!
//! Convex regions carry a Euclidean projection that the optimizers apply
//! after every update. The ℓᵖ ball with `p < 1` is not convex and has no
//! unique projection, so it only offers a membership test; infeasibility
//! is then signalled through an objective value of `+∞`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Absolute slack for post-projection membership checks.
pub const MEMBERSHIP_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoxBounds {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl BoxBounds {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() {
            return Err(Error::DimensionMismatch {
                expected: lo.len(),
                got: hi.len(),
            });
        }
        if lo.is_empty() {
            return Err(Error::invalid("box must have at least one dimension"));
        }
        if let Some(k) = (0..lo.len()).find(|&k| !(lo[k] <= hi[k])) {
            return Err(Error::invalid(format!(
                "box bounds inverted at coordinate {k}: {} > {}",
                lo[k], hi[k]
            )));
        }
        Ok(Self { lo, hi })
    }

    /// `[lo, hi]^dim`.
    pub fn cube(dim: usize, lo: f64, hi: f64) -> Result<Self> {
        Self::new(vec![lo; dim], vec![hi; dim])
    }

    /// `[-half_width, half_width]^dim`.
    pub fn symmetric(dim: usize, half_width: f64) -> Result<Self> {
        Self::cube(dim, -half_width, half_width)
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x.iter()
                .zip(self.lo.iter().zip(&self.hi))
                .all(|(v, (l, h))| *l <= *v && *v <= *h)
    }

    pub fn volume(&self) -> f64 {
        self.lo.iter().zip(&self.hi).map(|(l, h)| h - l).product()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Domain {
    Unbounded,
    Box(BoxBounds),
    Simplex,
    IndicatorLpBall { p: f64, r: f64 },
}

impl Domain {
    pub fn lp_ball(p: f64, r: f64) -> Result<Self> {
        if !(p > 0.0 && p <= 1.0) {
            return Err(Error::invalid(format!(
                "ℓᵖ exponent must lie in (0, 1], got {p}"
            )));
        }
        if !(r > 0.0) {
            return Err(Error::invalid(format!(
                "ℓᵖ radius must be positive, got {r}"
            )));
        }
        Ok(Domain::IndicatorLpBall { p, r })
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        match self {
            Domain::Unbounded => true,
            Domain::Box(b) => b.contains(x),
            Domain::Simplex => {
                x.iter().all(|v| *v >= 0.0) && (x.iter().sum::<f64>() - 1.0).abs() <= MEMBERSHIP_TOL
            }
            Domain::IndicatorLpBall { p, r } => lp_ball_membership(x, *p, *r),
        }
    }

    pub fn has_projection(&self) -> bool {
        matches!(self, Domain::Box(_) | Domain::Simplex)
    }

    /// Project `x` in place. Returns `false` when the domain has no
    /// projection, leaving `x` untouched.
    pub fn project_in_place(&self, x: &mut [f64]) -> bool {
        match self {
            Domain::Box(b) => {
                project_box_in_place(x, &b.lo, &b.hi);
                true
            }
            Domain::Simplex => {
                project_simplex_in_place(x);
                true
            }
            Domain::Unbounded | Domain::IndicatorLpBall { .. } => false,
        }
    }
}

pub fn project_box_in_place(x: &mut [f64], lo: &[f64], hi: &[f64]) {
    for ((v, l), h) in x.iter_mut().zip(lo).zip(hi) {
        *v = v.max(*l).min(*h);
    }
}

/// Component-wise median of `(lo, x, hi)`.
pub fn project_box(x: &[f64], lo: &[f64], hi: &[f64]) -> Vec<f64> {
    let mut out = x.to_vec();
    project_box_in_place(&mut out, lo, hi);
    out
}

/// Euclidean projection onto `{w : w ≥ 0, Σ w = 1}` by sorting and
/// thresholding. Points already on the simplex (within
/// [`MEMBERSHIP_TOL`]) are returned unchanged, which makes the map
/// idempotent in floating point.
pub fn project_simplex_in_place(x: &mut [f64]) {
    if x.is_empty() {
        return;
    }
    if x.iter().all(|v| *v >= 0.0) && (x.iter().sum::<f64>() - 1.0).abs() <= MEMBERSHIP_TOL {
        return;
    }
    let mut u = x.to_vec();
    u.sort_unstable_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (k, uk) in u.iter().enumerate() {
        cumsum += uk;
        let t = (cumsum - 1.0) / (k + 1) as f64;
        if uk - t > 0.0 {
            theta = t;
        }
    }
    for v in x.iter_mut() {
        *v = (*v - theta).max(0.0);
    }
}

pub fn project_simplex(x: &[f64]) -> Vec<f64> {
    let mut out = x.to_vec();
    project_simplex_in_place(&mut out);
    out
}

/// `(Σ |xᵢ|ᵖ)^{1/p}`.
pub fn lp_quasi_norm(x: &[f64], p: f64) -> f64 {
    let s: f64 = x.iter().map(|v| v.abs().powf(p)).sum();
    s.powf(1.0 / p)
}

pub fn lp_ball_membership(x: &[f64], p: f64, r: f64) -> bool {
    lp_quasi_norm(x, p) <= r
}

//! Objective functions, initial distributions and the benchmark registry.

use std::collections::BTreeMap;
use std::f64::consts::{E, PI};
use std::fmt;
use std::sync::Arc;

use rand::Rng;
use rand_distr::{Distribution, Exp1};

use crate::domain::{lp_quasi_norm, BoxBounds, Domain};
use crate::error::{Error, Result};

pub type EvalFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// A function to minimize together with its metadata.
///
/// `eval` returns `+∞` for infeasible inputs when the feasible set is
/// only known through membership (see [`Domain::IndicatorLpBall`]).
#[derive(Clone)]
pub struct ObjectiveSpec {
    name: String,
    dim: usize,
    eval: EvalFn,
    domain: Domain,
    known_min: Option<f64>,
    known_minimizer: Option<Vec<f64>>,
    init_box: BoxBounds,
}

impl fmt::Debug for ObjectiveSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ObjectiveSpec")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("domain", &self.domain)
            .field("known_min", &self.known_min)
            .finish_non_exhaustive()
    }
}

impl ObjectiveSpec {
    pub fn new<F>(name: impl Into<String>, dim: usize, init_box: BoxBounds, eval: F) -> Result<Self>
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        if dim == 0 {
            return Err(Error::invalid("objective dimension must be positive"));
        }
        if init_box.dim() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: init_box.dim(),
            });
        }
        Ok(Self {
            name: name.into(),
            dim,
            eval: Arc::new(eval),
            domain: Domain::Unbounded,
            known_min: None,
            known_minimizer: None,
            init_box,
        })
    }

    pub fn with_domain(mut self, domain: Domain) -> Self {
        self.domain = domain;
        self
    }

    pub fn with_known_min(mut self, min: f64, minimizer: Option<Vec<f64>>) -> Self {
        self.known_min = Some(min);
        self.known_minimizer = minimizer;
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn known_min(&self) -> Option<f64> {
        self.known_min
    }

    pub fn known_minimizer(&self) -> Option<&[f64]> {
        self.known_minimizer.as_deref()
    }

    pub fn init_box(&self) -> &BoxBounds {
        &self.init_box
    }

    #[inline]
    pub fn eval(&self, x: &[f64]) -> f64 {
        (self.eval)(x)
    }

    /// `f - min f` when the minimum is known, else `f`.
    pub fn gap(&self, value: f64) -> f64 {
        match self.known_min {
            Some(m) => value - m,
            None => value,
        }
    }

    /// Uniform over the default search box, adapted to the domain: the box
    /// itself, uniform on the simplex, or shrunk into an ℓᵖ ball.
    pub fn default_init(&self) -> InitDistribution {
        match &self.domain {
            Domain::Simplex => InitDistribution::UniformSimplex { dim: self.dim },
            Domain::IndicatorLpBall { p, r } => InitDistribution::UniformShrunkToLpBall {
                bounds: self.init_box.clone(),
                p: *p,
                r: *r,
            },
            Domain::Box(b) => InitDistribution::Uniform(b.clone()),
            Domain::Unbounded => InitDistribution::Uniform(self.init_box.clone()),
        }
    }
}

/// Distribution of the initial agent positions.
#[derive(Clone, Debug, PartialEq)]
pub enum InitDistribution {
    Uniform(BoxBounds),
    PointMass(Vec<f64>),
    /// Uniform on the probability simplex of the given dimension.
    UniformSimplex {
        dim: usize,
    },
    /// Uniform on a box, then radially shrunk into the ℓᵖ ball when
    /// outside it. The quasi-norm is absolutely homogeneous of degree
    /// one, so the shrink lands strictly inside the ball.
    UniformShrunkToLpBall {
        bounds: BoxBounds,
        p: f64,
        r: f64,
    },
}

impl InitDistribution {
    pub fn dim(&self) -> usize {
        match self {
            InitDistribution::Uniform(b) => b.dim(),
            InitDistribution::PointMass(x) => x.len(),
            InitDistribution::UniformSimplex { dim } => *dim,
            InitDistribution::UniformShrunkToLpBall { bounds, .. } => bounds.dim(),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        match self {
            InitDistribution::Uniform(b) => sample_box(b, rng),
            InitDistribution::PointMass(x) => x.clone(),
            InitDistribution::UniformSimplex { dim } => {
                let mut w: Vec<f64> = (0..*dim).map(|_| Exp1.sample(rng)).collect();
                let s: f64 = w.iter().sum();
                w.iter_mut().for_each(|v| *v /= s);
                crate::domain::project_simplex_in_place(&mut w);
                w
            }
            InitDistribution::UniformShrunkToLpBall { bounds, p, r } => {
                let mut x = sample_box(bounds, rng);
                let q = lp_quasi_norm(&x, *p);
                if q > *r {
                    let scale = (*r / q) * (1.0 - 1e-9);
                    x.iter_mut().for_each(|v| *v *= scale);
                }
                x
            }
        }
    }
}

fn sample_box<R: Rng + ?Sized>(b: &BoxBounds, rng: &mut R) -> Vec<f64> {
    b.lo.iter()
        .zip(&b.hi)
        .map(|(l, h)| if l == h { *l } else { rng.random_range(*l..*h) })
        .collect()
}

// ---------------------------------------------------------------------------
// Benchmark functions

pub fn sphere(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

pub fn ackley_with(x: &[f64], a: f64, b: f64, c: f64) -> f64 {
    let d = x.len() as f64;
    let norm = sphere(x).sqrt();
    let cos_mean = x.iter().map(|v| (c * v).cos()).sum::<f64>() / d;
    -a * (-b * norm / d.sqrt()).exp() - cos_mean.exp() + a + E
}

pub fn ackley(x: &[f64]) -> f64 {
    ackley_with(x, 20.0, 0.2, 2.0 * PI)
}

pub fn griewank(x: &[f64]) -> f64 {
    let s: f64 = x.iter().map(|v| v * v).sum::<f64>() / 4000.0;
    let p: f64 = x
        .iter()
        .enumerate()
        .map(|(i, v)| (v / ((i + 1) as f64).sqrt()).cos())
        .product();
    s - p + 1.0
}

pub fn rastrigin(x: &[f64]) -> f64 {
    10.0 * x.len() as f64
        + x.iter()
            .map(|v| v * v - 10.0 * (2.0 * PI * v).cos())
            .sum::<f64>()
}

pub fn trid(x: &[f64]) -> f64 {
    let a: f64 = x.iter().map(|v| (v - 1.0).powi(2)).sum();
    let b: f64 = x.windows(2).map(|w| w[0] * w[1]).sum();
    a - b
}

pub fn zakharov(x: &[f64]) -> f64 {
    let s1: f64 = x.iter().map(|v| v * v).sum();
    let s2: f64 = x
        .iter()
        .enumerate()
        .map(|(i, v)| 0.5 * (i + 1) as f64 * v)
        .sum();
    s1 + s2.powi(2) + s2.powi(4)
}

pub fn rosenbrock(x: &[f64]) -> f64 {
    x.windows(2)
        .map(|w| 100.0 * (w[1] - w[0] * w[0]).powi(2) + (w[0] - 1.0).powi(2))
        .sum()
}

/// Requires `x.len()` to be a multiple of four.
pub fn powell(x: &[f64]) -> f64 {
    x.chunks_exact(4)
        .map(|c| {
            (c[0] + 10.0 * c[1]).powi(2)
                + 5.0 * (c[2] - c[3]).powi(2)
                + (c[1] - 2.0 * c[2]).powi(4)
                + 10.0 * (c[0] - c[3]).powi(4)
        })
        .sum()
}

pub fn styblinski_tang(x: &[f64]) -> f64 {
    0.5 * x
        .iter()
        .map(|v| v.powi(4) - 16.0 * v * v + 5.0 * v)
        .sum::<f64>()
}

/// The coordinate of the Styblinski-Tang minimizer: the root of
/// `4t³ - 32t + 5` near `-2.9035`.
pub fn styblinski_tang_argmin() -> f64 {
    let mut t: f64 = -2.903534;
    for _ in 0..50 {
        let g = 4.0 * t.powi(3) - 32.0 * t + 5.0;
        let h = 12.0 * t * t - 32.0;
        let next = t - g / h;
        if next == t {
            break;
        }
        t = next;
    }
    t
}

/// Names of the eight functions in the high-dimensional comparison tables.
pub const TABLE_FUNCTIONS: [&str; 8] = [
    "ackley",
    "griewank",
    "rastrigin",
    "trid",
    "zakharov",
    "rosenbrock",
    "powell",
    "styblinski-tang",
];

fn build_ackley(d: usize) -> Result<ObjectiveSpec> {
    Ok(
        ObjectiveSpec::new("ackley", d, BoxBounds::symmetric(d, 32.768)?, ackley)?
            .with_known_min(0.0, Some(vec![0.0; d])),
    )
}

fn build_sphere(d: usize) -> Result<ObjectiveSpec> {
    Ok(
        ObjectiveSpec::new("sphere", d, BoxBounds::symmetric(d, 5.12)?, sphere)?
            .with_known_min(0.0, Some(vec![0.0; d])),
    )
}

fn build_griewank(d: usize) -> Result<ObjectiveSpec> {
    Ok(
        ObjectiveSpec::new("griewank", d, BoxBounds::symmetric(d, 600.0)?, griewank)?
            .with_known_min(0.0, Some(vec![0.0; d])),
    )
}

fn build_rastrigin(d: usize) -> Result<ObjectiveSpec> {
    Ok(
        ObjectiveSpec::new("rastrigin", d, BoxBounds::symmetric(d, 5.12)?, rastrigin)?
            .with_known_min(0.0, Some(vec![0.0; d])),
    )
}

fn build_trid(d: usize) -> Result<ObjectiveSpec> {
    let df = d as f64;
    let min = -df * (df + 4.0) * (df - 1.0) / 6.0;
    let argmin = (1..=d).map(|i| (i * (d + 1 - i)) as f64).collect();
    Ok(
        ObjectiveSpec::new("trid", d, BoxBounds::symmetric(d, df * df)?, trid)?
            .with_known_min(min, Some(argmin)),
    )
}

fn build_zakharov(d: usize) -> Result<ObjectiveSpec> {
    Ok(
        ObjectiveSpec::new("zakharov", d, BoxBounds::cube(d, -5.0, 10.0)?, zakharov)?
            .with_known_min(0.0, Some(vec![0.0; d])),
    )
}

fn build_rosenbrock(d: usize) -> Result<ObjectiveSpec> {
    if d < 2 {
        return Err(Error::invalid("rosenbrock needs dimension ≥ 2"));
    }
    Ok(
        ObjectiveSpec::new("rosenbrock", d, BoxBounds::cube(d, -5.0, 10.0)?, rosenbrock)?
            .with_known_min(0.0, Some(vec![1.0; d])),
    )
}

fn build_powell(d: usize) -> Result<ObjectiveSpec> {
    if !d.is_multiple_of(4) {
        return Err(Error::invalid(format!(
            "powell needs a dimension divisible by 4, got {d}"
        )));
    }
    Ok(
        ObjectiveSpec::new("powell", d, BoxBounds::cube(d, -4.0, 5.0)?, powell)?
            .with_known_min(0.0, Some(vec![0.0; d])),
    )
}

fn build_styblinski_tang(d: usize) -> Result<ObjectiveSpec> {
    let argmin = vec![styblinski_tang_argmin(); d];
    let min = styblinski_tang(&argmin);
    Ok(ObjectiveSpec::new(
        "styblinski-tang",
        d,
        BoxBounds::symmetric(d, 5.0)?,
        styblinski_tang,
    )?
    .with_known_min(min, Some(argmin)))
}

pub type ObjectiveFactory = fn(usize) -> Result<ObjectiveSpec>;

/// Objectives addressable by name and dimension.
#[derive(Clone, Default)]
pub struct ObjectiveRegistry {
    factories: BTreeMap<String, ObjectiveFactory>,
}

impl ObjectiveRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    /// Sphere plus the eight table functions.
    pub fn standard() -> Self {
        let mut r = Self::new();
        r.register("sphere", build_sphere);
        r.register("ackley", build_ackley);
        r.register("griewank", build_griewank);
        r.register("rastrigin", build_rastrigin);
        r.register("trid", build_trid);
        r.register("zakharov", build_zakharov);
        r.register("rosenbrock", build_rosenbrock);
        r.register("powell", build_powell);
        r.register("styblinski-tang", build_styblinski_tang);
        r
    }

    pub fn register(&mut self, name: &str, factory: ObjectiveFactory) {
        self.factories.insert(name.to_string(), factory);
    }

    pub fn build(&self, name: &str, dim: usize) -> Result<ObjectiveSpec> {
        let factory = self
            .factories
            .get(name)
            .ok_or_else(|| Error::UnknownObjective(name.to_string()))?;
        factory(dim)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.factories.keys().map(String::as_str)
    }
}

/// The eight table functions at dimension `dim`, skipping those not
/// defined there (Powell needs a multiple of four, Rosenbrock `dim ≥ 2`).
pub fn benchmark_suite(dim: usize) -> Vec<ObjectiveSpec> {
    let registry = ObjectiveRegistry::standard();
    TABLE_FUNCTIONS
        .iter()
        .filter_map(|name| registry.build(name, dim).ok())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn ackley_vanishes_at_origin() {
        for d in [1, 2, 10, 80, 100] {
            assert!(ackley(&vec![0.0; d]).abs() < 1e-12);
        }
    }

    #[test]
    fn rosenbrock_at_ones() {
        assert_eq!(rosenbrock(&[1.0; 7]), 0.0);
    }

    #[test]
    fn trid_closed_form_minimum_at_80() {
        let spec = ObjectiveRegistry::standard().build("trid", 80).unwrap();
        assert_eq!(spec.known_min(), Some(-88_480.0));
        // Direct summation at xᵢ = i(d+1-i).
        let x: Vec<f64> = (1..=80).map(|i| (i * (81 - i)) as f64).collect();
        let mut direct = 0.0;
        for i in 0..80 {
            direct += (x[i] - 1.0) * (x[i] - 1.0);
            if i > 0 {
                direct -= x[i] * x[i - 1];
            }
        }
        assert_eq!(direct, -88_480.0);
        assert_eq!(spec.eval(spec.known_minimizer().unwrap()), -88_480.0);
    }

    #[test]
    fn styblinski_tang_constant() {
        let t = styblinski_tang_argmin();
        assert!((t + 2.903534).abs() < 1e-6);
        let per_dim = styblinski_tang(&[t]);
        assert!((per_dim + 39.16599).abs() < 2e-4, "{per_dim}");
    }

    #[test]
    fn every_suite_function_hits_its_known_minimum() {
        let registry = ObjectiveRegistry::standard();
        for name in registry.names() {
            for d in [4, 8, 20, 80] {
                let f = registry.build(name, d).unwrap();
                let x = f.known_minimizer().unwrap();
                assert!(
                    (f.eval(x) - f.known_min().unwrap()).abs() < 1e-9,
                    "{name} at d={d}"
                );
            }
        }
    }

    #[test]
    fn known_minimum_is_not_beaten_by_random_points() {
        let registry = ObjectiveRegistry::standard();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for name in TABLE_FUNCTIONS {
            let f = registry.build(name, 4).unwrap();
            let init = f.default_init();
            for _ in 0..2000 {
                let x = init.sample(&mut rng);
                assert!(f.eval(&x) >= f.known_min().unwrap() - 1e-9, "{name}");
            }
        }
    }

    #[test]
    fn unknown_name_and_bad_dimension() {
        let registry = ObjectiveRegistry::standard();
        assert!(matches!(
            registry.build("nope", 3),
            Err(Error::UnknownObjective(_))
        ));
        assert!(registry.build("powell", 6).is_err());
        assert_eq!(benchmark_suite(6).len(), 7);
        assert_eq!(benchmark_suite(80).len(), 8);
    }

    #[test]
    fn shrunk_init_is_feasible() {
        let init = InitDistribution::UniformShrunkToLpBall {
            bounds: BoxBounds::symmetric(30, 1.0).unwrap(),
            p: 0.5,
            r: 4.0,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..500 {
            let x = init.sample(&mut rng);
            assert!(lp_quasi_norm(&x, 0.5) <= 4.0);
        }
    }

    #[test]
    fn simplex_init_is_on_simplex() {
        let init = InitDistribution::UniformSimplex { dim: 6 };
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..500 {
            assert!(Domain::Simplex.contains(&init.sample(&mut rng)));
        }
    }
}

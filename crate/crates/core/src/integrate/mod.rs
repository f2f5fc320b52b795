//! Haar-measure integration on the Heisenberg group.

pub mod gauss;
pub mod mc;
pub mod polar;

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Mutex, OnceLock};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::Region;
use crate::group::{Dimension, GroupPoint, KoranyiBall};

pub use mc::sample_ball;
pub use polar::{NodeSet, Resolution, SphereRule};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IntegrationMethod {
    GridQuadrature,
    MonteCarlo,
    StratifiedMc,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", try_from = "RawSpec")]
pub struct IntegrationSpec {
    pub method: IntegrationMethod,
    pub tolerance: f64,
    pub max_evaluations: u64,
    pub seed: u64,
}

#[derive(Deserialize)]
#[serde(rename_all = "kebab-case")]
struct RawSpec {
    method: IntegrationMethod,
    tolerance: f64,
    max_evaluations: u64,
    #[serde(default)]
    seed: u64,
}

impl TryFrom<RawSpec> for IntegrationSpec {
    type Error = Error;
    fn try_from(r: RawSpec) -> Result<Self> {
        IntegrationSpec::new(r.method, r.tolerance, r.max_evaluations, r.seed)
    }
}

impl Default for IntegrationSpec {
    fn default() -> Self {
        IntegrationSpec {
            method: IntegrationMethod::GridQuadrature,
            tolerance: 1e-6,
            max_evaluations: 50_000_000,
            seed: 0,
        }
    }
}

impl IntegrationSpec {
    pub fn new(
        method: IntegrationMethod,
        tolerance: f64,
        max_evaluations: u64,
        seed: u64,
    ) -> Result<Self> {
        if !(tolerance > 0.0) || !tolerance.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "tolerance must be positive, got {tolerance}"
            )));
        }
        if max_evaluations < 1 {
            return Err(Error::InvalidParameter(
                "max-evaluations must be at least 1".into(),
            ));
        }
        Ok(IntegrationSpec {
            method,
            tolerance,
            max_evaluations,
            seed,
        })
    }

    pub fn grid(tolerance: f64) -> Self {
        IntegrationSpec {
            tolerance,
            ..Default::default()
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_method(mut self, method: IntegrationMethod) -> Self {
        self.method = method;
        self
    }

    pub fn resolution(&self) -> Resolution {
        Resolution::for_tolerance(self.tolerance)
    }
}

/// A value with an error estimate (quadrature difference or Monte Carlo
/// standard error).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
    pub evaluations: u64,
}

impl Estimate {
    pub fn exact(value: f64) -> Self {
        Estimate {
            value,
            error: 0.0,
            evaluations: 0,
        }
    }
}

/// Gamma(m/2) for a positive integer m.
pub fn gamma_half(m: usize) -> f64 {
    assert!(m >= 1);
    if m % 2 == 0 {
        (1..m / 2).map(|k| k as f64).product()
    } else {
        let mut g = PI.sqrt();
        let mut a = 0.5;
        while a < m as f64 / 2.0 - 0.25 {
            g *= a;
            a += 1.0;
        }
        g
    }
}

/// Closed-form volume of the unit Koranyi ball,
/// pi^n Gamma(n/2) Gamma(3/2) / (4 Gamma(n) Gamma(n/2 + 3/2)).
pub fn unit_ball_volume_exact(dim: Dimension) -> f64 {
    let n = dim.n();
    PI.powi(n as i32) * gamma_half(n) * gamma_half(3)
        / (4.0 * gamma_half(2 * n) * gamma_half(n + 3))
}

/// Measure of the unit sphere {rho = 1} in polar coordinates, Q * c0.
pub fn sphere_measure(dim: Dimension) -> f64 {
    dim.qf() * unit_ball_volume_exact(dim)
}

/// Numerically computed c0 = |B_1(e)|, cached per (n, spec).
pub fn unit_ball_volume(dim: Dimension, spec: &IntegrationSpec) -> Result<Estimate> {
    type Key = (usize, IntegrationMethod, u64, u64, u64);
    static CACHE: OnceLock<Mutex<HashMap<Key, Estimate>>> = OnceLock::new();
    let key = (
        dim.n(),
        spec.method,
        spec.tolerance.to_bits(),
        spec.max_evaluations,
        spec.seed,
    );
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(v) = cache.lock().expect("volume cache poisoned").get(&key) {
        return Ok(*v);
    }
    let ball = KoranyiBall::centered(dim, 1.0)?;
    let est = haar_integrate(&|_: &GroupPoint| 1.0, &Region::Ball(ball), &[], spec)?;
    cache
        .lock()
        .expect("volume cache poisoned")
        .insert(key, est);
    Ok(est)
}

/// Integral of `g` over `region`. `breaks` are radial breakpoints (fractions
/// of the radius) for ball regions under grid quadrature.
pub fn haar_integrate<F: Fn(&GroupPoint) -> f64 + Sync + ?Sized>(
    g: &F,
    region: &Region,
    breaks: &[f64],
    spec: &IntegrationSpec,
) -> Result<Estimate> {
    match spec.method {
        IntegrationMethod::GridQuadrature => grid_integrate(g, region, breaks, spec),
        IntegrationMethod::MonteCarlo => mc_integrate(g, region, spec, false),
        IntegrationMethod::StratifiedMc => mc_integrate(g, region, spec, true),
    }
}

fn region_nodes(region: &Region, breaks: &[f64], res: Resolution) -> Result<NodeSet> {
    match region {
        Region::Ball(b) => Ok(NodeSet::ball(b, breaks, res)),
        Region::Union(balls) => Ok(NodeSet::union(balls, breaks, res)),
        Region::Exterior { dim, balls, decay } => NodeSet::exterior(*dim, balls, *decay, res),
    }
}

fn grid_integrate<F: Fn(&GroupPoint) -> f64 + Sync + ?Sized>(
    g: &F,
    region: &Region,
    breaks: &[f64],
    spec: &IntegrationSpec,
) -> Result<Estimate> {
    let mut level = Resolution::start_level(spec.tolerance);
    let nodes = region_nodes(region, breaks, Resolution::level(level))?;
    let mut evaluations = nodes.len() as u64;
    let (mut prev, _) = nodes.integrate_with_abs(g);
    loop {
        level += 1;
        let nodes = region_nodes(region, breaks, Resolution::level(level))?;
        if evaluations + nodes.len() as u64 > spec.max_evaluations {
            return Err(Error::BudgetExhausted {
                evaluations,
                estimate: prev,
                error: f64::NAN,
            });
        }
        evaluations += nodes.len() as u64;
        let (cur, abs) = nodes.integrate_with_abs(g);
        if !cur.is_finite() {
            return Err(Error::NonIntegrable("non-finite quadrature value".into()));
        }
        let error = (cur - prev).abs();
        if error <= spec.tolerance * abs || abs == 0.0 {
            return Ok(Estimate {
                value: cur,
                error: error.max(4.0 * f64::EPSILON * abs),
                evaluations,
            });
        }
        if level >= polar::MAX_LEVEL {
            return Err(Error::BudgetExhausted {
                evaluations,
                estimate: cur,
                error,
            });
        }
        prev = cur;
    }
}

fn mc_integrate<F: Fn(&GroupPoint) -> f64 + Sync + ?Sized>(
    g: &F,
    region: &Region,
    spec: &IntegrationSpec,
    stratified: bool,
) -> Result<Estimate> {
    let strata = |dim: Dimension, budget: u64| {
        if stratified {
            mc::strata_for_budget(dim, budget)
        } else {
            1
        }
    };
    match region {
        Region::Ball(b) => {
            let r = mc::mc_ball(
                g,
                b,
                strata(b.dim(), spec.max_evaluations),
                spec.tolerance,
                spec.max_evaluations,
                spec.seed,
                0,
            )?;
            Ok(Estimate {
                value: r.value,
                error: r.std_error,
                evaluations: r.evaluations,
            })
        }
        Region::Union(balls) => {
            let share = (spec.max_evaluations / balls.len().max(1) as u64).max(1);
            let mut value = 0.0;
            let mut var = 0.0;
            let mut evaluations = 0;
            for (i, b) in balls.iter().enumerate() {
                let h = |z: &GroupPoint| {
                    let mult = balls.iter().filter(|c| c.contains(z)).count().max(1);
                    g(z) / mult as f64
                };
                let r = mc::mc_ball(
                    &h,
                    b,
                    strata(b.dim(), share),
                    spec.tolerance,
                    share,
                    spec.seed,
                    (i as u64) << 32,
                )?;
                value += r.value;
                var += r.std_error * r.std_error;
                evaluations += r.evaluations;
            }
            Ok(Estimate {
                value,
                error: var.sqrt(),
                evaluations,
            })
        }
        Region::Exterior { dim, balls, decay } => {
            let (core, _) = polar::core_radius(*dim, balls);
            let e = GroupPoint::identity(*dim);
            let tail = NodeSet::tail(&e, core, *decay, spec.resolution())?;
            let tail_value = tail.integrate(g);
            let h = |z: &GroupPoint| {
                if balls.iter().any(|b| b.contains(z)) {
                    0.0
                } else {
                    g(z)
                }
            };
            let core_ball = KoranyiBall::new(e.clone(), core)?;
            let budget = spec
                .max_evaluations
                .saturating_sub(tail.len() as u64)
                .max(1);
            let r = mc::mc_ball(
                &h,
                &core_ball,
                strata(*dim, budget),
                spec.tolerance,
                budget,
                spec.seed,
                0,
            )?;
            let refined = NodeSet::tail(&e, core, *decay, spec.resolution().refined())?;
            let tail_err = (refined.integrate(g) - tail_value).abs();
            Ok(Estimate {
                value: r.value + tail_value,
                error: (r.std_error * r.std_error + tail_err * tail_err).sqrt(),
                evaluations: r.evaluations + (tail.len() + refined.len()) as u64,
            })
        }
    }
}

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::calculus::{derivative_at_scale, DerivativeSpec, MultiIndex};
use crate::error::{Error, Result};
use crate::field::Field;
use crate::group::{Dimension, GroupPoint, KoranyiBall};
use crate::integrate::{sample_ball, IntegrationSpec, NodeSet, Resolution};

/// Off-center balls tried per radius.
const OFF_CENTER: usize = 4;

/// min * 2^{k / per_octave} for k = 0, 1, ... up to max.
pub fn geometric_radii(min: f64, max: f64, per_octave: usize) -> Vec<f64> {
    let per = per_octave.max(1) as f64;
    let mut out = Vec::new();
    let mut k = 0;
    loop {
        let r = min * 2f64.powf(k as f64 / per);
        if r > max * (1.0 + 1e-12) {
            break;
        }
        out.push(r);
        k += 1;
    }
    out
}

fn random_direction(dim: Dimension, rng: &mut ChaCha8Rng) -> GroupPoint {
    loop {
        let x: Vec<f64> = (0..dim.horizontal())
            .map(|_| rng.random_range(-1.0..1.0))
            .collect();
        let w = GroupPoint::new(&x, rng.random_range(-0.25..0.25)).expect("finite");
        let r = w.koranyi_norm();
        if r > 1e-3 && r <= 1.0 {
            return w.dilate_unchecked(1.0 / r);
        }
    }
}

/// Integral of |f| over `ball`, with radial breaks where the field's support
/// balls start and stop.
fn ball_integral(f: &dyn Field, ball: &KoranyiBall, res: Resolution) -> f64 {
    let r = ball.radius();
    let mut breaks = Vec::new();
    for b in f.support().balls() {
        let d = ball.center().dist(b.center());
        if d >= r + b.radius() {
            continue;
        }
        for v in [d - b.radius(), d, d + b.radius()] {
            if v > 0.0 && v < r {
                breaks.push(v / r);
            }
        }
    }
    if f.support().is_bounded()
        && f.support()
            .balls()
            .iter()
            .all(|b| ball.center().dist(b.center()) >= r + b.radius())
    {
        return 0.0;
    }
    NodeSet::ball(ball, &breaks, res).integrate(&|y: &GroupPoint| f.eval(y).abs())
}

/// sup over balls B containing z of |B|^{alpha/Q - 1} int_B |f|, over
/// centered balls with the given radii, balls shifted towards each support
/// ball, and a few random off-center balls per radius. A lower bound for the true supremum; adding radii never
/// decreases it.
pub fn fractional_maximal(
    alpha: f64,
    f: &dyn Field,
    z: &GroupPoint,
    radii: &[f64],
    spec: &IntegrationSpec,
) -> Result<f64> {
    let dim = f.dim();
    if z.dim() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim.n(),
            found: z.dim().n(),
        });
    }
    if !(alpha >= 0.0 && alpha < dim.qf()) {
        return Err(Error::InvalidParameter(format!(
            "alpha = {alpha} outside [0, Q)"
        )));
    }
    let res = spec.resolution();
    let q = dim.qf();
    let best = radii
        .par_iter()
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(spec.seed ^ r.to_bits());
            let mut best: f64 = 0.0;
            let mut centers = vec![z.clone()];
            // Balls containing z pushed as far as possible towards each
            // support ball: w = z delta_theta(z^{-1} b) has rho(z^{-1} w) = theta rho(z^{-1} b).
            for b in f.support().balls() {
                let to = z.inv().mul_unchecked(b.center());
                let d = to.koranyi_norm();
                if d > 0.0 {
                    let theta = (0.999 * r / d).min(1.0);
                    centers.push(z.mul_unchecked(&to.dilate_unchecked(theta)));
                }
            }
            for _ in 0..OFF_CENTER {
                let u: f64 = rng.random_range(0.0..0.999);
                centers.push(
                    z.mul_unchecked(&random_direction(dim, &mut rng).dilate_unchecked(u * r)),
                );
            }
            for center in centers {
                let ball = KoranyiBall::new(center, *r)?;
                let avg = ball.volume().powf(alpha / q - 1.0) * ball_integral(f, &ball, res);
                best = best.max(avg);
            }
            Ok(best)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(best.into_iter().fold(0.0, f64::max))
}

/// c (1 - rho(center^{-1} w)^4 / radius^4)^6 normalized to unit seminorm.
#[derive(Clone, Debug, PartialEq)]
pub struct Mollifier {
    pub center: GroupPoint,
    pub radius: f64,
    pub amplitude: f64,
}

const MOLLIFIER_POWER: i32 = 6;

impl Mollifier {
    pub fn eval(&self, w: &GroupPoint) -> f64 {
        let u = self.center.dist4(w) / self.radius.powi(4);
        if u < 1.0 {
            self.amplitude * (1.0 - u).powi(MOLLIFIER_POWER)
        } else {
            0.0
        }
    }

    /// max over d(I) <= order and a sample cloud of (1 + rho(w))^order |X^I phi(w)|.
    fn seminorm(&self, order: u32, seed: u64) -> Result<f64> {
        let dim = self.center.dim();
        let ball = KoranyiBall::new(self.center.clone(), 0.95 * self.radius)?;
        let mut cloud = sample_ball(&ball, 48, seed);
        cloud.push(self.center.clone());
        let dspec = DerivativeSpec::default();
        let f = |w: &GroupPoint| self.eval(w);
        let mut best: f64 = 0.0;
        for w in &cloud {
            let weight = (1.0 + w.koranyi_norm()).powi(order as i32);
            for i in MultiIndex::up_to_degree(dim, order) {
                let d = derivative_at_scale(&i, &f, w, &dspec, 0.25 * self.radius)?;
                best = best.max(weight * d.value.abs());
            }
        }
        Ok(best)
    }
}

/// A deterministic finite family of normalized mollifiers; a larger size
/// extends a smaller one with the same seed.
#[derive(Clone, Debug, PartialEq)]
pub struct MollifierDictionary {
    pub order: u32,
    pub members: Vec<Mollifier>,
}

impl MollifierDictionary {
    pub fn new(dim: Dimension, size: usize, order: u32, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut members = Vec::with_capacity(size);
        for i in 0..size {
            let (center, radius) = if i == 0 {
                (GroupPoint::identity(dim), 1.0)
            } else {
                let r: f64 = rng.random_range(0.0..0.3);
                let c = random_direction(dim, &mut rng).dilate_unchecked(r);
                (c, rng.random_range(0.5..1.0))
            };
            let mut m = Mollifier {
                center,
                radius,
                amplitude: 1.0,
            };
            // Safety factor over the sampled supremum.
            m.amplitude = 1.0 / (1.25 * m.seminorm(order, seed.wrapping_add(i as u64))?);
            members.push(m);
        }
        Ok(MollifierDictionary { order, members })
    }
}

/// max over the dictionary and the s-grid of |(f * phi_s)(z)| with
/// phi_s(w) = s^{-Q} phi(delta_{1/s} w); a lower bound for the grand maximal
/// function at z.
pub fn grand_maximal_proxy(
    f: &dyn Field,
    z: &GroupPoint,
    dictionary: &MollifierDictionary,
    s_grid: &[f64],
    spec: &IntegrationSpec,
) -> Result<f64> {
    let dim = f.dim();
    if z.dim() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim.n(),
            found: z.dim().n(),
        });
    }
    let res = spec.resolution();
    let qf = dim.qf();
    let pairs: Vec<(&Mollifier, f64)> = dictionary
        .members
        .iter()
        .flat_map(|m| s_grid.iter().map(move |s| (m, *s)))
        .collect();
    let best = pairs
        .par_iter()
        .map(|(m, s)| {
            // (f * phi_s)(z) = int f(z w^{-1}) phi_s(w) dw over supp phi_s.
            let ball = KoranyiBall::new(m.center.dilate_unchecked(*s), s * m.radius)?;
            let v = NodeSet::ball(&ball, &[], res).integrate(&|w: &GroupPoint| {
                let phi = m.eval(&w.dilate_unchecked(1.0 / s)) * s.powf(-qf);
                if phi == 0.0 {
                    0.0
                } else {
                    f.eval(&z.mul_unchecked(&w.inv())) * phi
                }
            });
            Ok(v.abs())
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(best.into_iter().fold(0.0, f64::max))
}

//! Monte Carlo integration over Koranyi balls by sampling the bounding box
//! [-d, d]^{2n} x [-d^2/4, d^2/4] translated to the center.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use smallvec::SmallVec;

use crate::error::{Error, Result};
use crate::field::Region;
use crate::group::{Coords, Dimension, GroupPoint, KoranyiBall};
use crate::integrate::polar::{core_radius, NodeSet, Resolution};

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn box_volume(dim: Dimension, radius: f64) -> f64 {
    (2.0 * radius).powi(dim.horizontal() as i32) * radius * radius / 2.0
}

/// Uniform Haar samples from the ball, by rejection from the bounding box.
pub fn sample_ball(ball: &KoranyiBall, count: usize, seed: u64) -> Vec<GroupPoint> {
    let dim = ball.dim();
    let d = ball.radius();
    let d4 = d.powi(4);
    let mut rng = rng_for(seed, 0);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let x: Coords = (0..dim.horizontal())
            .map(|_| rng.random_range(-d..d))
            .collect();
        let t = rng.random_range(-d * d / 4.0..d * d / 4.0);
        let w = GroupPoint::raw(x, t);
        if w.norm4() < d4 {
            out.push(ball.center().mul_unchecked(&w));
        }
    }
    out
}

fn box_nodes(ball: &KoranyiBall, count: usize, rng: &mut ChaCha8Rng, out: &mut NodeSet) {
    let dim = ball.dim();
    let d = ball.radius();
    let d4 = d.powi(4);
    let w = box_volume(dim, d) / count.max(1) as f64;
    for _ in 0..count {
        let x: Coords = (0..dim.horizontal())
            .map(|_| rng.random_range(-d..d))
            .collect();
        let t = rng.random_range(-d * d / 4.0..d * d / 4.0);
        let p = GroupPoint::raw(x, t);
        if p.norm4() < d4 {
            out.push(ball.center().mul_unchecked(&p), w);
        }
    }
}

/// A fixed Monte Carlo node set for `region`: `count` box samples split over
/// the balls (overlaps weighted by multiplicity). Exteriors sample the masked
/// core ball and use the grid rule for the tail with the given decay.
pub fn mc_nodes(
    region: &Region,
    count: usize,
    seed: u64,
    decay: f64,
    res: Resolution,
) -> Result<NodeSet> {
    let mut out = NodeSet::default();
    match region {
        Region::Ball(b) => box_nodes(b, count, &mut rng_for(seed, 0), &mut out),
        Region::Union(balls) => {
            let share = count / balls.len().max(1);
            for (i, b) in balls.iter().enumerate() {
                let mut part = NodeSet::default();
                box_nodes(b, share, &mut rng_for(seed, (i as u64) << 32), &mut part);
                for (p, w) in part.points.into_iter().zip(part.weights) {
                    let mult = balls.iter().filter(|c| c.contains(&p)).count().max(1);
                    out.push(p, w / mult as f64);
                }
            }
        }
        Region::Exterior { dim, balls, .. } => {
            let (core, _) = core_radius(*dim, balls);
            let e = GroupPoint::identity(*dim);
            let mut part = NodeSet::default();
            box_nodes(
                &KoranyiBall::new(e.clone(), core)?,
                count,
                &mut rng_for(seed, 0),
                &mut part,
            );
            for (p, w) in part.points.into_iter().zip(part.weights) {
                if !balls.iter().any(|b| b.contains(&p)) {
                    out.push(p, w);
                }
            }
            out.extend(NodeSet::tail(&e, core, decay, res)?);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct McResult {
    pub value: f64,
    pub std_error: f64,
    pub evaluations: u64,
}

struct Stratum {
    rng: ChaCha8Rng,
    lo: Coords,
    hi: Coords,
    count: u64,
    mean: f64,
    m2: f64,
    abs_mean: f64,
}

/// Estimates the integral of `g` over the ball with `strata_per_axis` strata
/// along each of the 2n+1 box axes. Sample counts double per stratum until the
/// standard error is below `tol` times the integral of |g|.
const MIN_FIRST_PASS: u64 = 4096;

pub(crate) fn mc_ball<F: Fn(&GroupPoint) -> f64 + Sync + ?Sized>(
    g: &F,
    ball: &KoranyiBall,
    strata_per_axis: usize,
    tol: f64,
    max_evaluations: u64,
    seed: u64,
    stream_base: u64,
) -> Result<McResult> {
    let dim = ball.dim();
    let d = ball.radius();
    let axes = dim.coords();
    let k = strata_per_axis.max(1);
    let total = k.pow(axes as u32);
    let half: Vec<f64> = (0..axes)
        .map(|a| if a < dim.horizontal() { d } else { d * d / 4.0 })
        .collect();
    let mut strata: Vec<Stratum> = (0..total)
        .map(|s| {
            let mut lo: Coords = SmallVec::new();
            let mut hi: Coords = SmallVec::new();
            let mut rem = s;
            for h in &half {
                let i = rem % k;
                rem /= k;
                let width = 2.0 * h / k as f64;
                lo.push(-h + width * i as f64);
                hi.push(-h + width * (i + 1) as f64);
            }
            Stratum {
                rng: rng_for(seed, stream_base + s as u64),
                lo,
                hi,
                count: 0,
                mean: 0.0,
                m2: 0.0,
                abs_mean: 0.0,
            }
        })
        .collect();
    let vol = box_volume(dim, d) / total as f64;
    let d4 = d.powi(4);
    let center = ball.center();
    let mut batch: u64 = (MIN_FIRST_PASS / total as u64).max(8);
    let mut evaluations = 0u64;
    loop {
        strata.par_iter_mut().for_each(|st| {
            for _ in 0..batch {
                let c: Coords = st
                    .lo
                    .iter()
                    .zip(st.hi.iter())
                    .map(|(l, h)| st.rng.random_range(*l..*h))
                    .collect();
                let t = c[axes - 1];
                let x: Coords = c[..axes - 1].iter().copied().collect();
                let w = GroupPoint::raw(x, t);
                let v = if w.norm4() < d4 {
                    g(&center.mul_unchecked(&w))
                } else {
                    0.0
                };
                st.count += 1;
                let delta = v - st.mean;
                st.mean += delta / st.count as f64;
                st.m2 += delta * (v - st.mean);
                st.abs_mean += (v.abs() - st.abs_mean) / st.count as f64;
            }
        });
        evaluations += batch * total as u64;
        let value: f64 = strata.iter().map(|s| vol * s.mean).sum();
        let abs_value: f64 = strata.iter().map(|s| vol * s.abs_mean).sum();
        let var: f64 = strata
            .iter()
            .map(|s| {
                let n = s.count as f64;
                vol * vol * (s.m2 / (n - 1.0)) / n
            })
            .sum();
        let std_error = var.sqrt();
        if !value.is_finite() {
            return Err(Error::NonIntegrable("non-finite Monte Carlo sample".into()));
        }
        if std_error <= tol * abs_value || abs_value == 0.0 {
            return Ok(McResult {
                value,
                std_error,
                evaluations,
            });
        }
        if evaluations + 2 * batch * total as u64 > max_evaluations {
            return Err(Error::BudgetExhausted {
                evaluations,
                estimate: value,
                error: std_error,
            });
        }
        batch *= 2;
    }
}

/// Strata per axis so that the initial pass uses a fraction of the budget.
pub(crate) fn strata_for_budget(dim: Dimension, max_evaluations: u64) -> usize {
    let axes = dim.coords() as f64;
    let k = ((max_evaluations as f64 / 256.0).powf(1.0 / axes)).floor() as usize;
    let cap = (1e5f64.powf(1.0 / axes)).floor() as usize;
    k.clamp(1, cap.max(1))
}

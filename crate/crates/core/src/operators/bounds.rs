use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::apply::{Evaluator, RuleChoice};
use super::maximal::{fractional_maximal, geometric_radii};
use super::{separation_constants, KernelSpec};
use crate::atoms::Atom;
use crate::calculus::{derivative_at_scale, DerivativeSpec, MultiIndex};
use crate::error::{Error, Result};
use crate::field::{Field, IndicatorSum};
use crate::group::{GroupPoint, KoranyiBall};
use crate::integrate::{IntegrationSpec, NodeSet, Resolution};
use crate::varexp::{Discretization, ExponentFunction};

/// Balls B_{delta / r_j}((A_j x0, r_j^{-2} t0)): the z for which the j-th
/// singular preimage lies in `ball`.
pub fn preimage_balls(kernel: &KernelSpec, ball: &KoranyiBall) -> Result<Vec<KoranyiBall>> {
    (0..kernel.m())
        .map(|j| {
            KoranyiBall::new(
                kernel.factor_point(j, ball.center()),
                ball.radius() / kernel.radii()[j],
            )
        })
        .collect()
}

/// Balls B_{factor delta}((A_i x0, r_i^{-2} t0)).
pub fn expanded_balls(
    kernel: &KernelSpec,
    ball: &KoranyiBall,
    factor: f64,
) -> Result<Vec<KoranyiBall>> {
    (0..kernel.m())
        .map(|j| {
            KoranyiBall::new(
                kernel.factor_point(j, ball.center()),
                factor * ball.radius(),
            )
        })
        .collect()
}

/// (1 + max r_i) / min r_i.
fn gamma_star(kernel: &KernelSpec) -> f64 {
    let max = kernel.radii().iter().copied().fold(0.0, f64::max);
    let min = kernel.radii().iter().copied().fold(f64::INFINITY, f64::min);
    (1.0 + max) / min
}

/// Expansion factor 2 beta^N gamma* of the balls outside which the
/// far-field estimate applies.
pub fn expansion_factor(kernel: &KernelSpec, beta: f64, order: u32) -> f64 {
    2.0 * beta.powi(order as i32) * gamma_star(kernel)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelDerivativeReport {
    /// Largest ratio per homogeneous degree 0..=N.
    pub per_degree: Vec<f64>,
    pub max_ratio: f64,
    pub pairs_used: usize,
    pub pairs_skipped: usize,
    /// Per pair: ratios by degree, or None when the pair was skipped.
    pub per_pair: Vec<Option<Vec<f64>>>,
}

/// max over pairs and d(I) <= N of |X^I K(y, .)(z)| / (K(y, z) (sum_j 1/rho_j)^{d(I)}),
/// rho_j = rho((A_j y, r_j^{-2} s)^{-1} z). Pairs with some rho_j below
/// 10 h are skipped.
pub fn kernel_derivative_bound(
    kernel: &KernelSpec,
    order: u32,
    pairs: &[(GroupPoint, GroupPoint)],
    dspec: &DerivativeSpec,
) -> Result<KernelDerivativeReport> {
    let dim = kernel.dim();
    let indices = MultiIndex::up_to_degree(dim, order);
    let rows: Vec<Option<Vec<f64>>> = pairs
        .par_iter()
        .map(|(y, z)| {
            let factors: Vec<GroupPoint> =
                (0..kernel.m()).map(|j| kernel.factor_point(j, y)).collect();
            let dists: Vec<f64> = factors.iter().map(|w| w.dist(z)).collect();
            let min = dists.iter().copied().fold(f64::INFINITY, f64::min);
            if min < 10.0 * dspec.step {
                return Ok(None);
            }
            let inv_sum: f64 = dists.iter().map(|d| 1.0 / d).sum();
            let k = |w: &GroupPoint| {
                let mut log = 0.0;
                for (f, a) in factors.iter().zip(kernel.alphas()) {
                    log += a * f.dist4(w).ln();
                }
                (-0.25 * log).exp()
            };
            let kz = k(z);
            let mut per = vec![0.0f64; order as usize + 1];
            for i in &indices {
                let d = derivative_at_scale(i, &k, z, dspec, min)?;
                let deg = i.degree();
                let ratio = d.value.abs() / (kz * inv_sum.powi(deg as i32));
                per[deg as usize] = per[deg as usize].max(ratio);
            }
            Ok(Some(per))
        })
        .collect::<Result<_>>()?;
    let mut per_degree = vec![0.0f64; order as usize + 1];
    let mut used = 0;
    for r in rows.iter().flatten() {
        used += 1;
        for (a, b) in per_degree.iter_mut().zip(r.iter()) {
            *a = a.max(*b);
        }
    }
    Ok(KernelDerivativeReport {
        max_ratio: per_degree.iter().copied().fold(0.0, f64::max),
        per_degree,
        pairs_used: used,
        pairs_skipped: pairs.len() - used,
        per_pair: rows,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FarFieldReport {
    pub max_ratio: f64,
    pub ratios: Vec<f64>,
    /// |T a(z)| per sample.
    pub values: Vec<f64>,
    /// Region index k chosen per sample (0-based).
    pub regions: Vec<usize>,
}

/// |T a(z)| / [ (M_{alpha Q/(Q+N)} chi_B(p_k(z)))^{(Q+N)/Q} / ||chi_B||_{p(.)} ]
/// at samples outside the expanded balls, with k minimizing rho(p_k(z)^{-1} c).
pub fn far_field_atom_bound(
    kernel: &KernelSpec,
    atom: &Atom,
    order: u32,
    beta: f64,
    samples: &[GroupPoint],
    spec: &IntegrationSpec,
) -> Result<FarFieldReport> {
    let dim = kernel.dim();
    let ball = atom.ball();
    let expanded = expanded_balls(kernel, ball, expansion_factor(kernel, beta, order))?;
    if let Some(z) = samples
        .iter()
        .find(|z| expanded.iter().any(|b| b.contains(z)))
    {
        return Err(Error::InsideExpandedBall(format!("{z}")));
    }
    let q = dim.qf();
    let nq = q + order as f64;
    let alpha_m = kernel.alpha() * q / nq;
    let chi = IndicatorSum::ball(ball.clone());
    let chi_norm = atom.certificate().indicator_norm;
    let res = Resolution::for_tolerance(spec.tolerance);
    let eval = Evaluator::new(
        kernel,
        atom,
        res,
        spec.tolerance,
        RuleChoice::Fixed(atom.rule()),
    )?;
    let c = ball.center();
    let rows: Vec<(f64, f64, usize)> = samples
        .par_iter()
        .map(|z| {
            let (k, _) = (0..kernel.m())
                .map(|j| (j, kernel.singular_point(j, z).dist(c)))
                .fold((0, f64::INFINITY), |a, b| if b.1 < a.1 { b } else { a });
            let value = eval.eval(z)?.abs();
            let w = kernel.singular_point(k, z);
            let d = w.dist(c);
            let radii = geometric_radii(0.25 * ball.radius(), 4.0 * (d + ball.radius()), 4);
            let m = fractional_maximal(alpha_m, &chi, &w, &radii, spec)?;
            let denom = m.powf(nq / q) / chi_norm;
            let ratio = if value == 0.0 { 0.0 } else { value / denom };
            Ok((ratio, value, k))
        })
        .collect::<Result<_>>()?;
    Ok(FarFieldReport {
        max_ratio: rows.iter().map(|r| r.0).fold(0.0, f64::max),
        ratios: rows.iter().map(|r| r.0).collect(),
        values: rows.iter().map(|r| r.1).collect(),
        regions: rows.iter().map(|r| r.2).collect(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImageNorm {
    pub norm: f64,
    pub nodes: usize,
}

/// ||T f||_{q(.)} from an evaluator: the union of `balls` (radial breaks at
/// dyadic fractions) plus the exterior, which is covered by shells and tails
/// about each ball center with a smooth partition. |T f| is declared to decay
/// like rho^{-decay}.
pub fn image_norm(
    eval: &Evaluator,
    q: &ExponentFunction,
    balls: &[KoranyiBall],
    decay: f64,
    res: Resolution,
) -> Result<ImageNorm> {
    let qf = q.dim().qf();
    if !(decay * q.p_minus() > qf) {
        return Err(Error::NonIntegrable(format!(
            "|T f|^q decays like rho^-{} which does not exceed Q",
            decay * q.p_minus()
        )));
    }
    let breaks: Vec<f64> = (1..=6).map(|k| 0.5f64.powi(k)).collect();
    let mut nodes = NodeSet::union(balls, &breaks, res);
    let power = 2.0 * qf;
    for b in balls {
        let r = b.radius();
        let mut outer = NodeSet::shell(b.center(), r, 16.0 * r, &[2.0 * r, 4.0 * r, 8.0 * r], res);
        outer.extend(NodeSet::tail(
            b.center(),
            16.0 * r,
            decay * q.p_minus(),
            res,
        )?);
        let kept: Vec<(GroupPoint, f64)> = outer
            .points
            .into_par_iter()
            .zip(outer.weights.into_par_iter())
            .filter_map(|(p, w)| {
                if balls.iter().any(|c| c.contains(&p)) {
                    return None;
                }
                let own = b.center().dist(&p).powf(-power);
                let total: f64 = balls.iter().map(|c| c.center().dist(&p).powf(-power)).sum();
                Some((p, w * own / total))
            })
            .collect();
        for (p, w) in kept {
            nodes.push(p, w);
        }
    }
    let values = eval.eval_many(&nodes.points)?;
    let disc = Discretization {
        exponents: nodes.points.par_iter().map(|z| q.eval(z)).collect(),
        values: values.into_iter().map(f64::abs).collect(),
        weights: nodes.weights,
    };
    Ok(ImageNorm {
        norm: disc.luxemburg()?,
        nodes: disc.len(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DominationReport {
    /// Fitted C_j with |T(chi_{Omega_j} f)(z)| <= C_j M_0 f((r_j x, r_j^2 t)).
    pub c_near: Vec<f64>,
    /// Fitted C with |T(chi_{Omega_{m+1}} f)(z)| <= C M_0 f(z).
    pub c_middle: f64,
    pub samples: usize,
    /// Per evaluation point: (near ratios, middle ratio).
    pub per_sample: Vec<(Vec<f64>, f64)>,
}

/// Fits the pointwise domination constants of the near regions and the
/// middle region for an alpha = 0 kernel over the evaluation points `zs`.
pub fn domination_constants(
    kernel: &KernelSpec,
    f: &dyn Field,
    zs: &[GroupPoint],
    radii: &[f64],
    res: Resolution,
    spec: &IntegrationSpec,
) -> Result<DominationReport> {
    if !kernel.is_dilational() {
        return Err(Error::InvariantViolation(
            "pointwise domination is fitted for alpha = 0 kernels".into(),
        ));
    }
    let sep = separation_constants(kernel.radii())?;
    let m = kernel.m();
    let eval = Evaluator::new(kernel, f, res, spec.tolerance, RuleChoice::Support)?;
    let rows: Vec<(Vec<f64>, f64)> = zs
        .par_iter()
        .map(|z| {
            let rz = z.koranyi_norm();
            if rz == 0.0 {
                return Err(Error::InvalidParameter(
                    "evaluation point must not be e".into(),
                ));
            }
            let near_r = 0.5 * sep.beta * rz;
            let mut near = Vec::with_capacity(m);
            for j in 0..m {
                let t = eval.singular_ball_integral(z, j, near_r)?.value.abs();
                let mf = fractional_maximal(0.0, f, &kernel.singular_point(j, z), radii, spec)?;
                near.push(if t == 0.0 { 0.0 } else { t / mf });
            }
            let points = kernel.singular_points(z);
            let outer = (1.0 + sep.gamma_proof) * rz;
            let t = eval
                .masked_integral(z, |y| {
                    y.koranyi_norm() <= outer && points.iter().all(|p| p.dist(y) >= near_r)
                })
                .abs();
            let mf = fractional_maximal(0.0, f, z, radii, spec)?;
            Ok((near, if t == 0.0 { 0.0 } else { t / mf }))
        })
        .collect::<Result<_>>()?;
    let mut c_near = vec![0.0f64; m];
    let mut c_middle: f64 = 0.0;
    for (near, mid) in &rows {
        for (a, b) in c_near.iter_mut().zip(near.iter()) {
            *a = a.max(*b);
        }
        c_middle = c_middle.max(*mid);
    }
    Ok(DominationReport {
        c_near,
        c_middle,
        samples: zs.len(),
        per_sample: rows,
    })
}

/// Least-squares slope of log y against log x over positive pairs.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let pts: Vec<(f64, f64)> = xs
        .iter()
        .zip(ys.iter())
        .filter(|(x, y)| **x > 0.0 && **y > 0.0)
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

use rayon::prelude::*;

use super::KernelSpec;
use crate::error::{Error, Result};
use crate::field::{Field, Region};
use crate::group::{GroupPoint, KoranyiBall};
use crate::integrate::gauss::gauss_legendre;
use crate::integrate::{Estimate, IntegrationSpec, NodeSet, Resolution, SphereRule};

/// Dyadic annuli per singular point are capped at this count.
pub const MAX_ANNULI: usize = 40;
/// Singular points closer than this fraction of the support radius are merged.
const MERGE_FRACTION: f64 = 1e-12;
/// Singular points within this many support radii of a support ball get
/// their own polar rule.
const RELEVANCE: f64 = 2.0;

/// Quadrature rule for the field away from the singular points.
#[derive(Clone, Debug)]
pub enum RuleChoice {
    /// Polar rule of the field's support at the evaluator's resolution.
    Support,
    /// A caller-supplied rule (e.g. an atom's moment-exact rule).
    Fixed(NodeSet),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) struct Eval {
    pub value: f64,
    pub abs: f64,
    pub nodes: u64,
}

impl std::ops::AddAssign for Eval {
    fn add_assign(&mut self, o: Eval) {
        self.value += o.value;
        self.abs += o.abs;
        self.nodes += o.nodes;
    }
}

struct Group {
    point: GroupPoint,
    alpha: f64,
}

/// Evaluates T f(z) for a fixed field f at many points z.
///
/// T f(z) is split with the partition of unity phi_0 + sum_k phi_k, where
/// phi_k = w_k / (1 + sum w), w_k = (s / rho(p_k^{-1} y))^P around the singular
/// preimages p_k of z near the support. Each phi_k K f is integrated in polar
/// coordinates about p_k on dyadic annuli; phi_0 K f is smooth and uses the
/// support rule.
pub struct Evaluator<'a> {
    kernel: &'a KernelSpec,
    field: &'a dyn Field,
    balls: Vec<KoranyiBall>,
    scale: f64,
    base: Vec<(GroupPoint, f64)>,
    res: Resolution,
    tol: f64,
    power: f64,
}

impl<'a> Evaluator<'a> {
    pub fn new(
        kernel: &'a KernelSpec,
        field: &'a dyn Field,
        res: Resolution,
        tol: f64,
        rule: RuleChoice,
    ) -> Result<Self> {
        if field.dim() != kernel.dim() {
            return Err(Error::DimensionMismatch {
                expected: kernel.dim().n(),
                found: field.dim().n(),
            });
        }
        let support = field.support();
        let balls = match &support {
            Region::Ball(b) => vec![b.clone()],
            Region::Union(bs) => bs.clone(),
            Region::Exterior { .. } => {
                return Err(Error::InvalidParameter(
                    "T is evaluated only for fields with bounded support".into(),
                ))
            }
        };
        let nodes = match rule {
            RuleChoice::Support => match &support {
                Region::Ball(b) => NodeSet::ball(b, &field.radial_breaks(), res),
                _ => NodeSet::union(&balls, &field.radial_breaks(), res),
            },
            RuleChoice::Fixed(n) => n,
        };
        let base: Vec<(GroupPoint, f64)> = nodes
            .points
            .into_par_iter()
            .zip(nodes.weights.into_par_iter())
            .filter_map(|(p, w)| {
                let v = field.eval(&p);
                (v != 0.0).then_some((p, w * v))
            })
            .collect();
        let scale = balls
            .iter()
            .map(|b| b.radius())
            .fold(f64::INFINITY, f64::min);
        Ok(Evaluator {
            kernel,
            field,
            balls,
            scale,
            base,
            res,
            tol,
            power: 2.0 * kernel.dim().qf(),
        })
    }

    pub fn kernel(&self) -> &KernelSpec {
        self.kernel
    }

    pub fn balls(&self) -> &[KoranyiBall] {
        &self.balls
    }

    pub fn base_len(&self) -> usize {
        self.base.len()
    }

    fn groups(&self, points: &[GroupPoint]) -> Result<Vec<Group>> {
        let mut groups: Vec<Group> = Vec::new();
        for (p, a) in points.iter().zip(self.kernel.alphas()) {
            let relevant = self
                .balls
                .iter()
                .any(|b| p.dist(b.center()) < b.radius() + RELEVANCE * self.scale);
            if !relevant {
                continue;
            }
            match groups
                .iter_mut()
                .find(|g| g.point.dist(p) <= MERGE_FRACTION * self.scale)
            {
                Some(g) => g.alpha += a,
                None => groups.push(Group {
                    point: p.clone(),
                    alpha: *a,
                }),
            }
        }
        let q = self.kernel.dim().qf();
        if let Some(g) = groups.iter().find(|g| g.alpha >= q - 1e-12) {
            return Err(Error::NonIntegrable(format!(
                "coinciding singularities of total order {} at {}",
                g.alpha, g.point
            )));
        }
        Ok(groups)
    }

    /// Partition weight of group `k` (None for phi_0) at squared-squared
    /// distances d4 to the groups.
    #[inline]
    fn partition(&self, d4: &[f64], k: Option<usize>) -> f64 {
        let s4 = self.scale.powi(4);
        let e = self.power / 4.0;
        match k {
            None => {
                let sum: f64 = d4.iter().map(|d| (s4 / d).powf(e)).sum();
                1.0 / (1.0 + sum)
            }
            Some(k) => {
                let dk = d4[k];
                let mut denom = (dk / s4).powf(e);
                for (i, d) in d4.iter().enumerate() {
                    denom += if i == k { 1.0 } else { (dk / d).powf(e) };
                }
                1.0 / denom
            }
        }
    }

    pub(crate) fn eval_parts(&self, z: &GroupPoint) -> Result<Eval> {
        let points = self.kernel.singular_points(z);
        let groups = self.groups(&points)?;
        let mut d4 = vec![0.0; groups.len()];
        let mut out = Eval {
            value: 0.0,
            abs: 0.0,
            nodes: self.base.len() as u64,
        };
        for (y, wf) in &self.base {
            let mut skip = false;
            for (g, d) in groups.iter().zip(d4.iter_mut()) {
                *d = g.point.dist4(y);
                skip |= *d == 0.0;
            }
            if skip {
                continue;
            }
            let k = self.kernel.eval_from_points(&points, y);
            let v = wf * k * self.partition(&d4, None);
            out.value += v;
            out.abs += v.abs();
        }
        for gi in 0..groups.len() {
            out += self.polar_part(&points, &groups, gi)?;
        }
        if !out.value.is_finite() {
            return Err(Error::NonIntegrable(format!(
                "non-finite value of T f at {z}"
            )));
        }
        Ok(out)
    }

    fn polar_part(&self, points: &[GroupPoint], groups: &[Group], gi: usize) -> Result<Eval> {
        let center = &groups[gi].point;
        let reach = self
            .balls
            .iter()
            .map(|b| center.dist(b.center()) + b.radius())
            .fold(0.0, f64::max);
        let radial = |r0: f64, r1: f64, d4: &mut [f64]| -> (f64, f64) {
            self.annulus(points, groups, gi, r0, r1, d4)
        };
        self.dyadic(reach, groups[gi].alpha, groups.len(), radial)
    }

    /// Sum over dyadic annuli [R 2^{-i-1}, R 2^{-i}] with a geometric tail
    /// once an annulus is negligible.
    fn dyadic(
        &self,
        reach: f64,
        alpha: f64,
        groups: usize,
        mut annulus: impl FnMut(f64, f64, &mut [f64]) -> (f64, f64),
    ) -> Result<Eval> {
        let sphere = SphereRule::new(self.kernel.dim(), self.res);
        let per_annulus = (self.res.radial * sphere.len()) as u64;
        let ratio = 2f64.powf(-(self.kernel.dim().qf() - alpha));
        let mut d4 = vec![0.0; groups];
        let mut out = Eval {
            value: 0.0,
            abs: 0.0,
            nodes: 0,
        };
        for i in 0..MAX_ANNULI {
            let r1 = reach * 0.5f64.powi(i as i32);
            let (v, a) = annulus(0.5 * r1, r1, &mut d4);
            out.value += v;
            out.abs += a;
            out.nodes += per_annulus;
            if i >= 2 && a <= self.tol * out.abs {
                out.value += v * ratio / (1.0 - ratio);
                out.abs += a * ratio / (1.0 - ratio);
                return Ok(out);
            }
        }
        Ok(out)
    }

    fn annulus(
        &self,
        points: &[GroupPoint],
        groups: &[Group],
        gi: usize,
        r0: f64,
        r1: f64,
        d4: &mut [f64],
    ) -> (f64, f64) {
        let center = &groups[gi].point;
        let dim = self.kernel.dim();
        let sphere = SphereRule::new(dim, self.res);
        let gl = gauss_legendre(self.res.radial);
        let q1 = dim.q() as i32 - 1;
        let (mut value, mut abs) = (0.0, 0.0);
        for (r, wr) in gl.mapped(r0, r1) {
            let rw = wr * r.powi(q1);
            for (d, wd) in sphere.dirs.iter().zip(sphere.weights.iter()) {
                let y = center.mul_unchecked(&d.dilate_unchecked(r));
                let f = self.field.eval(&y);
                if f == 0.0 {
                    continue;
                }
                for (g, dd) in groups.iter().zip(d4.iter_mut()) {
                    *dd = g.point.dist4(&y);
                }
                if d4.iter().enumerate().any(|(i, v)| i != gi && *v == 0.0) {
                    continue;
                }
                let v = rw
                    * wd
                    * f
                    * self.kernel.eval_from_points(points, &y)
                    * self.partition(d4, Some(gi));
                value += v;
                abs += v.abs();
            }
        }
        (value, abs)
    }

    /// T f(z) at the evaluator's resolution.
    pub fn eval(&self, z: &GroupPoint) -> Result<f64> {
        self.eval_parts(z).map(|e| e.value)
    }

    /// T f at many points, in parallel.
    pub fn eval_many(&self, zs: &[GroupPoint]) -> Result<Vec<f64>> {
        zs.par_iter().map(|z| self.eval(z)).collect()
    }

    /// Integral of f K(., z) over B_radius(p_j(z)) with dyadic annuli about
    /// p_j(z); the other singular points must lie outside the ball.
    pub fn singular_ball_integral(
        &self,
        z: &GroupPoint,
        j: usize,
        radius: f64,
    ) -> Result<Estimate> {
        let points = self.kernel.singular_points(z);
        let center = points[j].clone();
        let alpha = points
            .iter()
            .zip(self.kernel.alphas())
            .filter(|(p, _)| p.dist(&center) < radius)
            .map(|(_, a)| a)
            .sum::<f64>();
        let groups = [Group {
            point: center.clone(),
            alpha,
        }];
        let dim = self.kernel.dim();
        let gl = gauss_legendre(self.res.radial);
        let sphere = SphereRule::new(dim, self.res);
        let q1 = dim.q() as i32 - 1;
        let annulus = |r0: f64, r1: f64, _: &mut [f64]| -> (f64, f64) {
            let (mut value, mut abs) = (0.0, 0.0);
            for (r, wr) in gl.mapped(r0, r1) {
                let rw = wr * r.powi(q1);
                for (d, wd) in sphere.dirs.iter().zip(sphere.weights.iter()) {
                    let y = center.mul_unchecked(&d.dilate_unchecked(r));
                    let f = self.field.eval(&y);
                    if f != 0.0 {
                        let v = rw * wd * f * self.kernel.eval_from_points(&points, &y);
                        value += v;
                        abs += v.abs();
                    }
                }
            }
            (value, abs)
        };
        let e = self.dyadic(radius, groups[0].alpha, 1, annulus)?;
        Ok(Estimate {
            value: e.value,
            error: 1e-13 * e.abs,
            evaluations: e.nodes,
        })
    }

    /// sum over the support rule of w f(y) K(y, z) mask(y); for regions where
    /// the kernel is bounded.
    pub fn masked_integral(&self, z: &GroupPoint, mask: impl Fn(&GroupPoint) -> bool) -> f64 {
        let points = self.kernel.singular_points(z);
        self.base
            .iter()
            .filter(|(y, _)| mask(y))
            .map(|(y, wf)| wf * self.kernel.eval_from_points(&points, y))
            .filter(|v| v.is_finite())
            .sum()
    }
}

fn bounded_check(f: &dyn Field) -> Result<()> {
    if !f.support().is_bounded() {
        return Err(Error::InvalidParameter(
            "T is evaluated only for fields with bounded support".into(),
        ));
    }
    Ok(())
}

/// T_{alpha,m} f(z) with an error estimate from one refinement of every rule.
pub fn apply_t(
    kernel: &KernelSpec,
    f: &dyn Field,
    z: &GroupPoint,
    spec: &IntegrationSpec,
) -> Result<Estimate> {
    bounded_check(f)?;
    if z.dim() != kernel.dim() {
        return Err(Error::DimensionMismatch {
            expected: kernel.dim().n(),
            found: z.dim().n(),
        });
    }
    let res = Resolution::for_tolerance(spec.tolerance);
    let coarse = Evaluator::new(kernel, f, res, spec.tolerance, RuleChoice::Support)?;
    let a = coarse.eval_parts(z)?;
    if a.nodes > spec.max_evaluations {
        return Err(Error::BudgetExhausted {
            evaluations: 0,
            estimate: a.value,
            error: f64::NAN,
        });
    }
    let fine = Evaluator::new(
        kernel,
        f,
        res.refined(),
        0.1 * spec.tolerance,
        RuleChoice::Support,
    )?;
    let b = fine.eval_parts(z)?;
    if a.nodes + b.nodes > spec.max_evaluations {
        return Err(Error::BudgetExhausted {
            evaluations: a.nodes,
            estimate: a.value,
            error: f64::NAN,
        });
    }
    Ok(Estimate {
        value: b.value,
        error: (b.value - a.value).abs() + 1e-13 * b.abs,
        evaluations: a.nodes + b.nodes,
    })
}

/// The Riesz potential: T with m = 1, A = I, r = 1.
pub fn apply_riesz(
    alpha: f64,
    f: &dyn Field,
    z: &GroupPoint,
    spec: &IntegrationSpec,
) -> Result<Estimate> {
    let kernel = KernelSpec::riesz(f.dim(), alpha)?;
    apply_t(&kernel, f, z, spec)
}

//! Koranyi polar coordinates: tensor rules on the unit sphere {rho = 1} and
//! node sets for balls, unions of balls and exterior regions.
//!
//! A point of the unit sphere is written (sqrt(cos phi) * theta, sin(phi) / 4)
//! with phi in [-pi/2, pi/2] and theta on the Euclidean sphere S^{2n-1}, and
//! dx dt = r^{Q-1} cos(phi)^{n-1} / 4 dr dphi dsigma(theta).

use std::collections::HashMap;
use std::f64::consts::{FRAC_PI_2, PI};
use std::sync::{Arc, Mutex, OnceLock};

use rayon::prelude::*;
use smallvec::SmallVec;

use super::gauss::gauss_legendre;
use crate::error::{Error, Result};
use crate::group::{Coords, Dimension, GroupPoint, KoranyiBall};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Resolution {
    /// Gauss-Legendre nodes per radial panel.
    pub radial: usize,
    /// Gauss-Legendre nodes in phi.
    pub polar: usize,
    /// Trapezoid nodes per phase angle.
    pub azimuthal: usize,
    /// Gauss-Legendre nodes per collapsed simplex coordinate (n >= 2 only).
    pub simplex: usize,
}

pub const MAX_LEVEL: usize = 8;

impl Resolution {
    pub fn level(k: usize) -> Self {
        Resolution {
            radial: 4 + 2 * k,
            polar: 6 + 4 * k,
            azimuthal: 8 + 8 * k,
            simplex: 3 + k,
        }
    }

    /// Starting level for a relative tolerance.
    pub fn start_level(tol: f64) -> usize {
        match tol {
            t if t >= 1e-2 => 0,
            t if t >= 1e-3 => 1,
            t if t >= 1e-4 => 2,
            t if t >= 1e-6 => 3,
            t if t >= 1e-8 => 4,
            _ => 5,
        }
    }

    pub fn for_tolerance(tol: f64) -> Self {
        Resolution::level(Resolution::start_level(tol))
    }

    pub fn refined(self) -> Self {
        Resolution {
            radial: self.radial + 2,
            polar: self.polar + 4,
            azimuthal: self.azimuthal + 8,
            simplex: self.simplex + 1,
        }
    }
}

/// Quadrature rule on the unit Koranyi sphere; weights sum to the sphere measure.
#[derive(Debug, Clone)]
pub struct SphereRule {
    pub dim: Dimension,
    pub dirs: Vec<GroupPoint>,
    pub weights: Vec<f64>,
}

impl SphereRule {
    pub fn new(dim: Dimension, res: Resolution) -> Arc<SphereRule> {
        type Key = (usize, usize, usize, usize);
        static CACHE: OnceLock<Mutex<HashMap<Key, Arc<SphereRule>>>> = OnceLock::new();
        let key = (dim.n(), res.polar, res.azimuthal.max(1), res.simplex.max(1));
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        if let Some(rule) = cache.lock().expect("sphere cache poisoned").get(&key) {
            return rule.clone();
        }
        let rule = Arc::new(build_sphere_rule(dim, res));
        cache
            .lock()
            .expect("sphere cache poisoned")
            .insert(key, rule.clone());
        rule
    }

    pub fn len(&self) -> usize {
        self.dirs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dirs.is_empty()
    }

    pub fn total(&self) -> f64 {
        self.weights.iter().sum()
    }
}

/// Points of the Euclidean sphere S^{2n-1} with weights for its surface measure.
fn euclidean_sphere(n: usize, azimuthal: usize, simplex: usize) -> Vec<(Coords, f64)> {
    let m = azimuthal.max(1);
    let phases: Vec<f64> = (0..m)
        .map(|b| 2.0 * PI * (b as f64 + 0.5) / m as f64)
        .collect();
    let wphase = 2.0 * PI / m as f64;

    // simplex points s in the standard (n-1)-simplex with weights summing to 1/(n-1)!
    let mut simplex_pts: Vec<(Vec<f64>, f64)> = vec![(vec![], 1.0)];
    if n >= 2 {
        let gl = gauss_legendre(simplex.max(1));
        let unit: Vec<(f64, f64)> = gl.mapped(0.0, 1.0).collect();
        let mut collapsed: Vec<(Vec<f64>, f64)> = vec![(vec![], 1.0)];
        for _ in 0..n - 1 {
            let mut next = Vec::with_capacity(collapsed.len() * unit.len());
            for (u, w) in &collapsed {
                for (x, wx) in &unit {
                    let mut v = u.clone();
                    v.push(*x);
                    next.push((v, w * wx));
                }
            }
            collapsed = next;
        }
        simplex_pts = collapsed
            .into_iter()
            .map(|(u, w)| {
                let mut s = Vec::with_capacity(n);
                let mut rest = 1.0;
                let mut jac = 1.0;
                for (k, uk) in u.iter().enumerate() {
                    s.push(rest * uk);
                    jac *= (1.0 - uk).powi((n - 2 - k) as i32);
                    rest *= 1.0 - uk;
                }
                s.push(rest);
                (s, w * jac)
            })
            .collect();
    }
    let prefactor = 2f64.powi(1 - n as i32);

    let mut out = Vec::new();
    let mut idx = vec![0usize; n];
    for (s, ws) in &simplex_pts {
        let s_full: Vec<f64> = if n == 1 { vec![1.0] } else { s.clone() };
        idx.iter_mut().for_each(|v| *v = 0);
        loop {
            let mut x: Coords = SmallVec::from_elem(0.0, 2 * n);
            for i in 0..n {
                let amp = s_full[i].max(0.0).sqrt();
                let (sn, cs) = phases[idx[i]].sin_cos();
                x[i] = amp * cs;
                x[i + n] = amp * sn;
            }
            out.push((x, prefactor * ws * wphase.powi(n as i32)));
            let mut k = 0;
            loop {
                if k == n {
                    break;
                }
                idx[k] += 1;
                if idx[k] < m {
                    break;
                }
                idx[k] = 0;
                k += 1;
            }
            if k == n {
                break;
            }
        }
    }
    out
}

fn build_sphere_rule(dim: Dimension, res: Resolution) -> SphereRule {
    let n = dim.n();
    let base = euclidean_sphere(n, res.azimuthal, res.simplex);
    let gl = gauss_legendre(res.polar.max(1));
    let mut dirs = Vec::with_capacity(base.len() * gl.nodes.len());
    let mut weights = Vec::with_capacity(base.len() * gl.nodes.len());
    for (phi, wphi) in gl.mapped(-FRAC_PI_2, FRAC_PI_2) {
        let (sp, cp) = phi.sin_cos();
        let cp = cp.max(0.0);
        let amp = cp.sqrt();
        let wj = wphi * cp.powi(n as i32 - 1) / 4.0;
        for (theta, wt) in &base {
            let x: Coords = theta.iter().map(|v| amp * v).collect();
            dirs.push(GroupPoint::raw(x, sp / 4.0));
            weights.push(wj * wt);
        }
    }
    SphereRule { dim, dirs, weights }
}

/// Quadrature nodes and weights for a Haar integral over some region.
#[derive(Debug, Clone, Default)]
pub struct NodeSet {
    pub points: Vec<GroupPoint>,
    pub weights: Vec<f64>,
}

fn panel_edges(breaks: &[f64], lo: f64, hi: f64) -> Vec<f64> {
    let mut edges = vec![lo];
    let mut inner: Vec<f64> = breaks
        .iter()
        .copied()
        .filter(|b| *b > lo && *b < hi && b.is_finite())
        .collect();
    inner.sort_by(f64::total_cmp);
    inner.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * hi);
    edges.extend(inner);
    edges.push(hi);
    edges
}

impl NodeSet {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn push(&mut self, p: GroupPoint, w: f64) {
        self.points.push(p);
        self.weights.push(w);
    }

    pub fn extend(&mut self, other: NodeSet) {
        self.points.extend(other.points);
        self.weights.extend(other.weights);
    }

    pub fn scale_weights(&mut self, factor: f64) {
        self.weights.iter_mut().for_each(|w| *w *= factor);
    }

    /// Nodes of the shell {r0 <= rho(center^{-1} y) < r1} with radial break
    /// radii (absolute) splitting the Gauss-Legendre panels.
    pub fn shell(
        center: &GroupPoint,
        r0: f64,
        r1: f64,
        breaks: &[f64],
        res: Resolution,
    ) -> NodeSet {
        let dim = center.dim();
        let sphere = SphereRule::new(dim, res);
        let q = dim.q() as i32;
        let gl = gauss_legendre(res.radial.max(1));
        let edges = panel_edges(breaks, r0, r1);
        let mut out = NodeSet::default();
        for w in edges.windows(2) {
            for (r, wr) in gl.mapped(w[0], w[1]) {
                let rw = wr * r.powi(q - 1);
                for (d, wd) in sphere.dirs.iter().zip(sphere.weights.iter()) {
                    out.push(center.mul_unchecked(&d.dilate_unchecked(r)), rw * wd);
                }
            }
        }
        out
    }

    /// Nodes for a ball; `breaks` are fractions of the radius in (0, 1).
    pub fn ball(ball: &KoranyiBall, breaks: &[f64], res: Resolution) -> NodeSet {
        let abs: Vec<f64> = breaks.iter().map(|b| b * ball.radius()).collect();
        NodeSet::shell(ball.center(), 0.0, ball.radius(), &abs, res)
    }

    /// Nodes for a union of balls; overlapping parts are weighted by the
    /// reciprocal of their multiplicity.
    pub fn union(balls: &[KoranyiBall], breaks: &[f64], res: Resolution) -> NodeSet {
        let mut out = NodeSet::default();
        for ball in balls {
            let mut part = NodeSet::ball(ball, breaks, res);
            if balls.len() > 1 {
                part.weights
                    .par_iter_mut()
                    .zip(part.points.par_iter())
                    .for_each(|(w, p)| {
                        let mult = balls.iter().filter(|b| b.contains(p)).count().max(1);
                        *w /= mult as f64;
                    });
            }
            out.extend(part);
        }
        out
    }

    /// Nodes for the exterior {rho(center^{-1} y) >= radius} of an integrand
    /// declared to decay like rho^{-decay}. Requires decay > Q.
    pub fn tail(center: &GroupPoint, radius: f64, decay: f64, res: Resolution) -> Result<NodeSet> {
        let dim = center.dim();
        let qf = dim.qf();
        if !(decay > qf) {
            return Err(Error::NonIntegrable(format!(
                "declared decay exponent {decay} does not exceed Q = {qf}"
            )));
        }
        let sphere = SphereRule::new(dim, res);
        let gl = gauss_legendre((2 * res.radial).max(2));
        let kappa = 1.0 / (decay - qf);
        let mut out = NodeSet::default();
        for (u, wu) in gl.mapped(0.0, 1.0) {
            let r = radius * u.powf(-kappa);
            // r^{Q-1} dr/du
            let jac = r.powi(dim.q() as i32 - 1) * radius * kappa * u.powf(-kappa - 1.0);
            for (d, wd) in sphere.dirs.iter().zip(sphere.weights.iter()) {
                out.push(center.mul_unchecked(&d.dilate_unchecked(r)), wu * jac * wd);
            }
        }
        Ok(out)
    }

    /// Nodes for the complement of a union of balls: a core ball around the
    /// identity with the union removed, plus a tail.
    pub fn exterior(
        dim: Dimension,
        balls: &[KoranyiBall],
        decay: f64,
        res: Resolution,
    ) -> Result<NodeSet> {
        let (core, breaks) = core_radius(dim, balls);
        let e = GroupPoint::identity(dim);
        let mut out = NodeSet::shell(&e, 0.0, core, &breaks, res);
        if !balls.is_empty() {
            let keep: Vec<bool> = out
                .points
                .par_iter()
                .map(|p| !balls.iter().any(|b| b.contains(p)))
                .collect();
            let mut kept = NodeSet::default();
            for ((p, w), k) in out.points.into_iter().zip(out.weights).zip(keep) {
                if k {
                    kept.push(p, w);
                }
            }
            out = kept;
        }
        out.extend(NodeSet::tail(&e, core, decay, res)?);
        Ok(out)
    }

    pub fn integrate<F: Fn(&GroupPoint) -> f64 + Sync + ?Sized>(&self, g: &F) -> f64 {
        let terms: Vec<f64> = self
            .points
            .par_iter()
            .zip(self.weights.par_iter())
            .map(|(p, w)| w * g(p))
            .collect();
        terms.iter().sum()
    }

    /// Returns (integral of g, integral of |g|).
    pub fn integrate_with_abs<F: Fn(&GroupPoint) -> f64 + Sync + ?Sized>(
        &self,
        g: &F,
    ) -> (f64, f64) {
        let terms: Vec<f64> = self
            .points
            .par_iter()
            .zip(self.weights.par_iter())
            .map(|(p, w)| w * g(p))
            .collect();
        terms
            .iter()
            .fold((0.0, 0.0), |(s, a), v| (s + v, a + v.abs()))
    }

    pub fn values<F: Fn(&GroupPoint) -> f64 + Sync + ?Sized>(&self, g: &F) -> Vec<f64> {
        self.points.par_iter().map(|p| g(p)).collect()
    }
}

/// Radius of an identity-centered ball containing all `balls`, with radial
/// breakpoints at the inner and outer reach of each ball.
pub(crate) fn core_radius(dim: Dimension, balls: &[KoranyiBall]) -> (f64, Vec<f64>) {
    let _ = dim;
    let mut core: f64 = 1.0;
    let mut breaks = Vec::new();
    for b in balls {
        let c = b.center().koranyi_norm();
        core = core.max(c + b.radius());
        if c > b.radius() {
            breaks.push(c - b.radius());
        }
        breaks.push(c + b.radius());
        if c > 0.0 {
            breaks.push(c);
        }
    }
    (core, breaks)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sphere_points_have_unit_norm() {
        for n in 1..=3 {
            let dim = Dimension::new(n).unwrap();
            let rule = SphereRule::new(dim, Resolution::level(0));
            for d in &rule.dirs {
                assert!((d.koranyi_norm() - 1.0).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn shell_measure_matches_power_law() {
        let dim = Dimension::new(1).unwrap();
        let e = GroupPoint::identity(dim);
        let sphere = SphereRule::new(dim, Resolution::level(2)).total();
        let nodes = NodeSet::shell(&e, 0.5, 2.0, &[1.0], Resolution::level(2));
        let total: f64 = nodes.weights.iter().sum();
        let exact = sphere * (2f64.powi(4) - 0.5f64.powi(4)) / 4.0;
        assert!((total - exact).abs() < 1e-12 * exact);
    }
}

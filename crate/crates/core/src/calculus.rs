//! Multiindex calculus, left-invariant vector fields and left Taylor
//! polynomials.
//!
//! X_k = d/dx_k + (x_{k+n}/2) d/dt for k <= n, X_k = d/dx_k - (x_{k-n}/2) d/dt
//! for n < k <= 2n, and X_{2n+1} = d/dt. X^I is X_1^{i_1} ... X_{2n+1}^{i_{2n+1}},
//! so X_{2n+1} acts first.

use std::collections::BTreeMap;
use std::fmt;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use smallvec::SmallVec;

use crate::error::{Error, Result};
use crate::group::{Coords, Dimension, GroupPoint};
use crate::integrate::sample_ball;
use crate::KoranyiBall;

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "Vec<u32>", into = "Vec<u32>")]
pub struct MultiIndex(SmallVec<[u32; 5]>);

impl MultiIndex {
    pub fn new(entries: &[u32]) -> Result<Self> {
        if entries.len() < 3 || entries.len() % 2 == 0 {
            return Err(Error::InvalidParameter(format!(
                "a multiindex has 2n+1 entries, got {}",
                entries.len()
            )));
        }
        Ok(MultiIndex(SmallVec::from_slice(entries)))
    }

    pub fn zero(dim: Dimension) -> Self {
        MultiIndex(SmallVec::from_elem(0, dim.coords()))
    }

    /// The index with a single 1 at axis `k` (0-based, `k = 2n` is t).
    pub fn unit(dim: Dimension, k: usize) -> Self {
        let mut m = MultiIndex::zero(dim);
        m.0[k] = 1;
        m
    }

    pub fn dim(&self) -> Dimension {
        Dimension::new(self.0.len() / 2).expect("multiindex has at least 3 entries")
    }

    pub fn entries(&self) -> &[u32] {
        &self.0
    }

    pub fn get(&self, k: usize) -> u32 {
        self.0[k]
    }

    /// |I| = sum of entries.
    pub fn length(&self) -> u32 {
        self.0.iter().sum()
    }

    /// d(I) = i_1 + ... + i_{2n} + 2 i_{2n+1}.
    pub fn degree(&self) -> u32 {
        let last = self.0.len() - 1;
        self.0[..last].iter().sum::<u32>() + 2 * self.0[last]
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|v| *v == 0)
    }

    fn shifted(&self, k: usize, delta: i32) -> Option<MultiIndex> {
        let v = self.0[k] as i32 + delta;
        if v < 0 {
            return None;
        }
        let mut m = self.clone();
        m.0[k] = v as u32;
        Some(m)
    }

    /// All multiindices with d(I) <= max_degree, ordered by degree and then
    /// lexicographically descending.
    pub fn up_to_degree(dim: Dimension, max_degree: u32) -> Vec<MultiIndex> {
        let mut out = Vec::new();
        for d in 0..=max_degree {
            out.extend(MultiIndex::with_degree(dim, d));
        }
        out
    }

    pub fn with_degree(dim: Dimension, degree: u32) -> Vec<MultiIndex> {
        let k = dim.coords();
        let mut out = Vec::new();
        let mut cur = vec![0u32; k];
        fn rec(pos: usize, left: u32, cur: &mut Vec<u32>, out: &mut Vec<MultiIndex>) {
            let k = cur.len();
            if pos == k - 1 {
                if left % 2 == 0 {
                    cur[pos] = left / 2;
                    out.push(MultiIndex(SmallVec::from_slice(cur)));
                }
                return;
            }
            for v in (0..=left).rev() {
                cur[pos] = v;
                rec(pos + 1, left - v, cur, out);
            }
            cur[pos] = 0;
        }
        rec(0, degree, &mut cur, &mut out);
        out
    }
}

impl TryFrom<Vec<u32>> for MultiIndex {
    type Error = Error;
    fn try_from(v: Vec<u32>) -> Result<Self> {
        MultiIndex::new(&v)
    }
}

impl From<MultiIndex> for Vec<u32> {
    fn from(m: MultiIndex) -> Self {
        m.0.to_vec()
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, v) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{v}")?;
        }
        write!(f, ")")
    }
}

pub fn homogeneous_degree(i: &MultiIndex) -> u32 {
    i.degree()
}

/// z^I = x_1^{i_1} ... x_{2n}^{i_{2n}} t^{i_{2n+1}}.
pub fn monomial_eval(i: &MultiIndex, z: &GroupPoint) -> f64 {
    i.0.iter()
        .enumerate()
        .map(|(k, e)| z.coord(k).powi(*e as i32))
        .product()
}

/// Number of multiindices with d(I) <= D.
pub fn count_up_to_degree(dim: Dimension, max_degree: u32) -> usize {
    MultiIndex::up_to_degree(dim, max_degree).len()
}

/// A polynomial in the coordinates (x, t) of bounded homogeneous degree.
#[derive(Clone, Debug, PartialEq)]
pub struct PolynomialHG {
    dim: Dimension,
    max_degree: u32,
    terms: BTreeMap<MultiIndex, f64>,
}

impl PolynomialHG {
    pub fn zero(dim: Dimension, max_degree: u32) -> Self {
        PolynomialHG {
            dim,
            max_degree,
            terms: BTreeMap::new(),
        }
    }

    pub fn from_terms(
        dim: Dimension,
        max_degree: u32,
        terms: impl IntoIterator<Item = (MultiIndex, f64)>,
    ) -> Result<Self> {
        let mut p = PolynomialHG::zero(dim, max_degree);
        for (i, c) in terms {
            if i.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim.n(),
                    found: i.dim().n(),
                });
            }
            if i.degree() > max_degree && c != 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "term {i} has degree {} above the maximum {max_degree}",
                    i.degree()
                )));
            }
            p.add_term(i, c);
        }
        Ok(p)
    }

    pub fn monomial(i: MultiIndex, coefficient: f64) -> Self {
        let dim = i.dim();
        let d = i.degree();
        let mut p = PolynomialHG::zero(dim, d);
        p.add_term(i, coefficient);
        p
    }

    fn add_term(&mut self, i: MultiIndex, c: f64) {
        if c == 0.0 {
            return;
        }
        let e = self.terms.entry(i.clone()).or_insert(0.0);
        *e += c;
        if *e == 0.0 {
            self.terms.remove(&i);
        }
    }

    pub fn dim(&self) -> Dimension {
        self.dim
    }

    pub fn max_degree(&self) -> u32 {
        self.max_degree
    }

    pub fn coefficient(&self, i: &MultiIndex) -> f64 {
        self.terms.get(i).copied().unwrap_or(0.0)
    }

    pub fn terms(&self) -> impl Iterator<Item = (&MultiIndex, &f64)> {
        self.terms.iter()
    }

    pub fn eval(&self, z: &GroupPoint) -> f64 {
        self.terms
            .iter()
            .map(|(i, c)| c * monomial_eval(i, z))
            .sum()
    }

    /// Largest |coefficient difference| with another polynomial.
    pub fn max_coefficient_diff(&self, other: &PolynomialHG) -> f64 {
        let mut keys: Vec<&MultiIndex> = self.terms.keys().chain(other.terms.keys()).collect();
        keys.sort();
        keys.dedup();
        keys.into_iter()
            .map(|k| (self.coefficient(k) - other.coefficient(k)).abs())
            .fold(0.0, f64::max)
    }

    /// Exact action of the vector field X_{k+1} (k is 0-based).
    pub fn apply_vector_field(&self, k: usize) -> PolynomialHG {
        let n = self.dim.n();
        let tk = 2 * n;
        let mut out = PolynomialHG::zero(self.dim, self.max_degree);
        for (i, c) in &self.terms {
            let ik = i.get(k) as f64;
            if let Some(j) = i.shifted(k, -1) {
                out.add_term(j, c * ik);
            }
            if k < tk {
                let (partner, sign) = if k < n { (k + n, 0.5) } else { (k - n, -0.5) };
                let it = i.get(tk) as f64;
                if let Some(j) = i.shifted(tk, -1) {
                    let j = j.shifted(partner, 1).expect("increment never fails");
                    out.add_term(j, sign * c * it);
                }
            }
        }
        out
    }

    /// Exact action of X^I.
    pub fn apply_derivative(&self, i: &MultiIndex) -> PolynomialHG {
        let mut p = self.clone();
        for k in (0..i.0.len()).rev() {
            for _ in 0..i.get(k) {
                p = p.apply_vector_field(k);
            }
        }
        p
    }

    /// Left Taylor polynomial of this polynomial at `base`, computed exactly.
    pub fn left_taylor(&self, base: &GroupPoint, degree: u32) -> Result<PolynomialHG> {
        left_taylor_from(self.dim, degree, |i| {
            Ok(self.apply_derivative(i).eval(base))
        })
    }
}

/// Matrix M_{I,J} = [X^I w^J](e) over all I, J with d <= degree, computed
/// exactly; rows are indexed by I and columns by J in `up_to_degree` order.
pub fn interpolation_matrix(dim: Dimension, degree: u32) -> (Vec<MultiIndex>, DMatrix<f64>) {
    let basis = MultiIndex::up_to_degree(dim, degree);
    let e = GroupPoint::identity(dim);
    let m = basis.len();
    let mut mat = DMatrix::zeros(m, m);
    for (c, j) in basis.iter().enumerate() {
        let mono = PolynomialHG::monomial(j.clone(), 1.0);
        for (r, i) in basis.iter().enumerate() {
            if i.degree() == j.degree() {
                mat[(r, c)] = mono.apply_derivative(i).eval(&e);
            }
        }
    }
    (basis, mat)
}

fn left_taylor_from(
    dim: Dimension,
    degree: u32,
    rhs: impl Fn(&MultiIndex) -> Result<f64>,
) -> Result<PolynomialHG> {
    let (basis, mat) = interpolation_matrix(dim, degree);
    let b: Vec<f64> = basis.iter().map(&rhs).collect::<Result<_>>()?;
    let lu = mat.lu();
    let sol = lu
        .solve(&DVector::from_vec(b))
        .ok_or_else(|| Error::SingularSystem(format!("interpolation matrix of degree {degree}")))?;
    PolynomialHG::from_terms(dim, degree, basis.into_iter().zip(sol.iter().copied()))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct DerivativeSpec {
    /// Relative step for first-order differences; order-k stencils use
    /// step^{5/(k+4)}.
    pub step: f64,
    pub richardson_levels: usize,
    pub max_degree: u32,
}

impl Default for DerivativeSpec {
    fn default() -> Self {
        DerivativeSpec {
            step: 1e-3,
            richardson_levels: 2,
            max_degree: 6,
        }
    }
}

impl DerivativeSpec {
    pub fn new(step: f64, richardson_levels: usize) -> Result<Self> {
        if !(step > 0.0) || !step.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "step must be positive, got {step}"
            )));
        }
        if richardson_levels < 1 {
            return Err(Error::InvalidParameter(
                "richardson-levels must be at least 1".into(),
            ));
        }
        Ok(DerivativeSpec {
            step,
            richardson_levels,
            ..Default::default()
        })
    }

    pub fn halved(&self) -> Self {
        DerivativeSpec {
            step: self.step / 2.0,
            ..*self
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DerivativeEstimate {
    pub value: f64,
    pub error: f64,
}

fn binomial(k: u32, j: u32) -> f64 {
    (0..j).fold(1.0, |acc, i| acc * (k - i) as f64 / (i + 1) as f64)
}

fn flow_point(dim: Dimension, offsets: &[f64]) -> GroupPoint {
    let mut w = GroupPoint::identity(dim);
    let h = dim.horizontal();
    for (k, o) in offsets.iter().enumerate() {
        if *o == 0.0 {
            continue;
        }
        let step = if k < h {
            let mut x: Coords = SmallVec::from_elem(0.0, h);
            x[k] = *o;
            GroupPoint::raw(x, 0.0)
        } else {
            GroupPoint::raw(SmallVec::from_elem(0.0, h), *o)
        };
        w = w.mul_unchecked(&step);
    }
    w
}

/// Tensor central difference for X^I f(z) with per-axis steps; returns the
/// value and the largest |f| sampled.
fn stencil<F: Fn(&GroupPoint) -> f64 + ?Sized>(
    i: &MultiIndex,
    f: &F,
    z: &GroupPoint,
    steps: &[f64],
) -> Result<(f64, f64)> {
    let dim = z.dim();
    let axes: Vec<usize> = (0..i.0.len()).filter(|k| i.get(*k) > 0).collect();
    let mut js = vec![0u32; axes.len()];
    let mut acc = 0.0;
    let mut fmax: f64 = 0.0;
    let mut offsets = vec![0.0; i.0.len()];
    loop {
        let mut coef = 1.0;
        for (a, k) in axes.iter().enumerate() {
            let order = i.get(*k);
            let j = js[a];
            coef *= if j % 2 == 0 { 1.0 } else { -1.0 } * binomial(order, j);
            offsets[*k] = (order as f64 / 2.0 - j as f64) * steps[*k];
        }
        let v = f(&z.mul_unchecked(&flow_point(dim, &offsets)));
        if !v.is_finite() {
            return Err(Error::Instability(format!(
                "non-finite sample while differentiating X^{i} at {z}"
            )));
        }
        fmax = fmax.max(v.abs());
        acc += coef * v;
        let mut a = 0;
        loop {
            if a == axes.len() {
                break;
            }
            js[a] += 1;
            if js[a] <= i.get(axes[a]) {
                break;
            }
            js[a] = 0;
            a += 1;
        }
        if a == axes.len() {
            break;
        }
    }
    let denom: f64 = axes
        .iter()
        .map(|k| steps[*k].powi(i.get(*k) as i32))
        .product();
    Ok((acc / denom, fmax))
}

/// X^I f(z) by Richardson-extrapolated central differences with horizontal
/// step proportional to `scale` and vertical step proportional to `scale^2`.
pub fn derivative_at_scale<F: Fn(&GroupPoint) -> f64 + ?Sized>(
    i: &MultiIndex,
    f: &F,
    z: &GroupPoint,
    dspec: &DerivativeSpec,
    scale: f64,
) -> Result<DerivativeEstimate> {
    if i.dim() != z.dim() {
        return Err(Error::DimensionMismatch {
            expected: z.dim().n(),
            found: i.dim().n(),
        });
    }
    if i.degree() > dspec.max_degree {
        return Err(Error::InvalidParameter(format!(
            "d(I) = {} exceeds the differencing guard {}",
            i.degree(),
            dspec.max_degree
        )));
    }
    let k = i.length();
    if k == 0 {
        let v = f(z);
        if !v.is_finite() {
            return Err(Error::Instability(format!("non-finite value at {z}")));
        }
        return Ok(DerivativeEstimate {
            value: v,
            error: 0.0,
        });
    }
    let eta = dspec.step.powf(5.0 / (k as f64 + 4.0));
    let tk = z.dim().horizontal();
    let levels = dspec.richardson_levels.max(1);
    let mut table: Vec<Vec<f64>> = Vec::with_capacity(levels);
    let mut raw = Vec::with_capacity(levels);
    let mut floor = 0.0;
    let mut fmax_all: f64 = 0.0;
    for l in 0..levels {
        let h = eta / 2f64.powi(l as i32);
        let steps: Vec<f64> = (0..=tk)
            .map(|a| if a < tk { h * scale } else { h * scale * scale })
            .collect();
        let (d, fmax) = stencil(i, f, z, &steps)?;
        fmax_all = fmax_all.max(fmax);
        let denom: f64 = (0..=tk).map(|a| steps[a].powi(i.get(a) as i32)).product();
        floor = 1e3 * f64::EPSILON * fmax * 2f64.powi(k as i32) / denom;
        raw.push(d);
        let mut row = vec![d];
        for m in 1..=l {
            let p = 4f64.powi(m as i32);
            let prev = table[l - 1][m - 1];
            row.push((p * row[m - 1] - prev) / (p - 1.0));
        }
        table.push(row);
    }
    let best = table[levels - 1][levels - 1];
    let error = if levels >= 2 {
        let last = raw[levels - 1];
        let before = raw[levels - 2];
        let diff = (last - before).abs();
        // Near a zero of X^I f the raw levels differ by truncation error; a
        // kink or jump inside the stencil shows up far above the natural
        // size |f| / scale^{d(I)}.
        let natural = fmax_all / scale.powi(i.degree() as i32);
        if diff > 0.5 * last.abs().max(before.abs()) + floor + 0.1 * natural {
            return Err(Error::Instability(format!(
                "Richardson levels disagree for X^{i} at {z}: {before} vs {last} (natural size {natural:e})"
            )));
        }
        (best - table[levels - 1][levels - 2]).abs() + floor
    } else {
        floor
    };
    Ok(DerivativeEstimate { value: best, error })
}

/// X^I f(z) with the default length scale 1 + rho(z).
pub fn higher_derivative<F: Fn(&GroupPoint) -> f64 + ?Sized>(
    i: &MultiIndex,
    f: &F,
    z: &GroupPoint,
    dspec: &DerivativeSpec,
) -> Result<f64> {
    derivative_at_scale(i, f, z, dspec, 1.0 + z.koranyi_norm()).map(|d| d.value)
}

/// X_i f(z) for the 1-based axis index i in 1..=2n+1.
pub fn vector_field_apply<F: Fn(&GroupPoint) -> f64 + ?Sized>(
    i: usize,
    f: &F,
    z: &GroupPoint,
    dspec: &DerivativeSpec,
) -> Result<f64> {
    let dim = z.dim();
    if i == 0 || i > dim.coords() {
        return Err(Error::InvalidParameter(format!(
            "axis index {i} outside 1..={}",
            dim.coords()
        )));
    }
    higher_derivative(&MultiIndex::unit(dim, i - 1), f, z, dspec)
}

/// Left Taylor polynomial of f at `base` with finite-difference derivatives.
pub fn left_taylor<F: Fn(&GroupPoint) -> f64 + ?Sized>(
    f: &F,
    base: &GroupPoint,
    degree: u32,
    dspec: &DerivativeSpec,
) -> Result<PolynomialHG> {
    left_taylor_from(base.dim(), degree, |i| higher_derivative(i, f, base, dspec))
}

#[derive(Clone, Debug, PartialEq)]
pub struct TaylorRatioReport {
    /// Fitted constant: the largest ratio over the samples.
    pub constant: f64,
    pub beta: f64,
    pub order: u32,
    pub ratios: Vec<f64>,
    pub max_remainder: f64,
}

/// A cloud of points in the closed unit ball used for the sup in the Taylor
/// inequality: uniform samples plus the identity.
pub fn unit_cloud(dim: Dimension, size: usize, seed: u64) -> Vec<GroupPoint> {
    let ball = KoranyiBall::centered(dim, 1.0).expect("unit radius");
    let mut cloud = vec![GroupPoint::identity(dim)];
    cloud.extend(sample_ball(&ball, size.max(1), seed));
    cloud
}

/// Fitted constant of the left Taylor inequality of order N: the remainder
/// against the degree N-1 polynomial is compared with
/// rho(z)^N sup_{rho(w) <= beta^N rho(z), d(I) = N} |X^I f(base w)|.
pub fn taylor_remainder_ratio<F: Fn(&GroupPoint) -> f64 + ?Sized>(
    f: &F,
    base: &GroupPoint,
    order: u32,
    samples: &[GroupPoint],
    beta: f64,
    cloud: &[GroupPoint],
    dspec: &DerivativeSpec,
) -> Result<TaylorRatioReport> {
    if order == 0 {
        return Err(Error::InvalidParameter(
            "Taylor order must be at least 1".into(),
        ));
    }
    if !(beta >= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "beta must be >= 1, got {beta}"
        )));
    }
    let dim = base.dim();
    let p = left_taylor(f, base, order - 1, dspec)?;
    let top = MultiIndex::with_degree(dim, order);
    let mut ratios = Vec::with_capacity(samples.len());
    let mut max_remainder: f64 = 0.0;
    for z in samples {
        let rho = z.koranyi_norm();
        if rho == 0.0 {
            continue;
        }
        let fz = f(&base.mul_unchecked(z));
        let remainder = (fz - p.eval(z)).abs();
        max_remainder = max_remainder.max(remainder);
        let reach = beta.powi(order as i32) * rho;
        let mut sup: f64 = 0.0;
        let mut fscale: f64 = fz.abs();
        for w in cloud {
            let bw = base.mul_unchecked(&w.dilate_unchecked(reach));
            fscale = fscale.max(f(&bw).abs());
            for i in &top {
                sup = sup.max(higher_derivative(i, f, &bw, dspec)?.abs());
            }
        }
        let denom = rho.powi(order as i32) * sup;
        if sup <= 1e-8 * fscale || denom < f64::MIN_POSITIVE {
            if remainder <= 1e-8 * fscale.max(1.0) {
                ratios.push(0.0);
                continue;
            }
            return Err(Error::DivisionGuard(format!(
                "derivative sup {sup:e} underflows at sample {z}"
            )));
        }
        ratios.push(remainder / denom);
    }
    let constant = ratios.iter().copied().fold(0.0, f64::max);
    Ok(TaylorRatioReport {
        constant,
        beta,
        order,
        ratios,
        max_remainder,
    })
}

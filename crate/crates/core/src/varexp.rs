//! Variable exponents, modulars and Luxemburg norms.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{Field, FnField, Region};
use crate::group::{Dimension, GroupPoint, KoranyiBall, RotationMatrix};
use crate::integrate::{mc, IntegrationMethod, IntegrationSpec, NodeSet, Resolution};

/// Tolerance used when spot-checking exponent symmetries.
pub const SYMMETRY_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct BallPiece {
    pub center: Vec<f64>,
    pub radius: f64,
    pub value: f64,
}

/// Closed-form exponent vocabulary.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ExponentSpec {
    Constant {
        value: f64,
    },
    /// r(rho(z)) with r piecewise linear through (radii[i], values[i]) and
    /// constant outside the table.
    Radial {
        radii: Vec<f64>,
        values: Vec<f64>,
    },
    /// `below` where coordinate `axis` is < offset, `above` otherwise.
    HalfSpace {
        axis: usize,
        offset: f64,
        below: f64,
        above: f64,
    },
    /// Piecewise constant on balls (first match wins), `outside` elsewhere.
    BallPieces {
        pieces: Vec<BallPiece>,
        outside: f64,
    },
    /// Average of the base exponent over the cyclic group generated by the
    /// block rotation with the given angles; the rotation must have the given order.
    Symmetrized {
        base: Box<ExponentSpec>,
        angles: Vec<f64>,
        order: usize,
    },
    /// base / divisor.
    Scaled {
        base: Box<ExponentSpec>,
        divisor: f64,
    },
    /// 1/q = 1/base - alpha/q_dim.
    Conjugate {
        base: Box<ExponentSpec>,
        alpha: f64,
        q_dim: f64,
    },
}

#[derive(Clone, Debug)]
enum Compiled {
    Constant(f64),
    Radial(Vec<f64>, Vec<f64>),
    HalfSpace(usize, f64, f64, f64),
    BallPieces(Vec<(KoranyiBall, f64)>, f64),
    Symmetrized(Box<Compiled>, Vec<RotationMatrix>),
    Scaled(Box<Compiled>, f64),
    Conjugate(Box<Compiled>, f64),
}

impl Compiled {
    fn eval(&self, z: &GroupPoint) -> f64 {
        match self {
            Compiled::Constant(v) => *v,
            Compiled::Radial(r, v) => interpolate(r, v, z.koranyi_norm()),
            Compiled::HalfSpace(axis, offset, below, above) => {
                if z.coord(*axis) < *offset {
                    *below
                } else {
                    *above
                }
            }
            Compiled::BallPieces(pieces, outside) => pieces
                .iter()
                .find(|(b, _)| b.contains(z))
                .map(|(_, v)| *v)
                .unwrap_or(*outside),
            Compiled::Symmetrized(base, group) => {
                let total: f64 = group
                    .iter()
                    .map(|a| base.eval(&z.rotate(a).expect("dimension checked at build")))
                    .sum();
                total / group.len() as f64
            }
            Compiled::Scaled(base, d) => base.eval(z) / d,
            Compiled::Conjugate(base, shift) => 1.0 / (1.0 / base.eval(z) - shift),
        }
    }
}

fn interpolate(radii: &[f64], values: &[f64], s: f64) -> f64 {
    if s <= radii[0] {
        return values[0];
    }
    let last = radii.len() - 1;
    if s >= radii[last] {
        return values[last];
    }
    let i = radii.partition_point(|r| *r <= s) - 1;
    let w = (s - radii[i]) / (radii[i + 1] - radii[i]);
    values[i] * (1.0 - w) + values[i + 1] * w
}

fn positive(v: f64, what: &str) -> Result<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(Error::InvalidParameter(format!(
            "{what} must be positive and finite, got {v}"
        )))
    }
}

/// (compiled form, p_minus, p_plus, p_infinity)
fn compile(dim: Dimension, spec: &ExponentSpec) -> Result<(Compiled, f64, f64, Option<f64>)> {
    match spec {
        ExponentSpec::Constant { value } => {
            let v = positive(*value, "constant exponent")?;
            Ok((Compiled::Constant(v), v, v, Some(v)))
        }
        ExponentSpec::Radial { radii, values } => {
            if radii.is_empty() || radii.len() != values.len() {
                return Err(Error::InvalidParameter(
                    "radial table needs matching non-empty radii and values".into(),
                ));
            }
            if radii[0] < 0.0 || radii.windows(2).any(|w| !(w[1] > w[0])) {
                return Err(Error::InvalidParameter(
                    "radial table radii must be nonnegative and strictly increasing".into(),
                ));
            }
            for v in values {
                positive(*v, "radial exponent value")?;
            }
            let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = values.iter().copied().fold(0.0, f64::max);
            let inf = *values.last().expect("non-empty");
            Ok((
                Compiled::Radial(radii.clone(), values.clone()),
                lo,
                hi,
                Some(inf),
            ))
        }
        ExponentSpec::HalfSpace {
            axis,
            offset,
            below,
            above,
        } => {
            if *axis >= dim.coords() {
                return Err(Error::InvalidParameter(format!("axis {axis} out of range")));
            }
            positive(*below, "half-space exponent")?;
            positive(*above, "half-space exponent")?;
            Ok((
                Compiled::HalfSpace(*axis, *offset, *below, *above),
                below.min(*above),
                below.max(*above),
                None,
            ))
        }
        ExponentSpec::BallPieces { pieces, outside } => {
            positive(*outside, "exterior exponent")?;
            let mut lo = *outside;
            let mut hi = *outside;
            let mut compiled = Vec::with_capacity(pieces.len());
            for piece in pieces {
                let c = GroupPoint::from_coords(&piece.center)?;
                if c.dim() != dim {
                    return Err(Error::DimensionMismatch {
                        expected: dim.n(),
                        found: c.dim().n(),
                    });
                }
                let v = positive(piece.value, "piece exponent")?;
                lo = lo.min(v);
                hi = hi.max(v);
                compiled.push((KoranyiBall::new(c, piece.radius)?, v));
            }
            Ok((
                Compiled::BallPieces(compiled, *outside),
                lo,
                hi,
                Some(*outside),
            ))
        }
        ExponentSpec::Symmetrized {
            base,
            angles,
            order,
        } => {
            if angles.len() != dim.n() || *order == 0 {
                return Err(Error::InvalidParameter(
                    "symmetrization needs n angles and a positive order".into(),
                ));
            }
            let gen = RotationMatrix::block_rotations(angles)?;
            let mut group = vec![RotationMatrix::identity(dim)];
            for k in 1..*order {
                group.push(group[k - 1].compose(&gen));
            }
            if !group[order - 1].compose(&gen).is_identity() {
                return Err(Error::InvalidParameter(format!(
                    "the rotation does not have order {order}"
                )));
            }
            let (b, lo, hi, inf) = compile(dim, base)?;
            Ok((Compiled::Symmetrized(Box::new(b), group), lo, hi, inf))
        }
        ExponentSpec::Scaled { base, divisor } => {
            let d = positive(*divisor, "exponent divisor")?;
            let (b, lo, hi, inf) = compile(dim, base)?;
            Ok((
                Compiled::Scaled(Box::new(b), d),
                lo / d,
                hi / d,
                inf.map(|v| v / d),
            ))
        }
        ExponentSpec::Conjugate { base, alpha, q_dim } => {
            let (b, lo, hi, inf) = compile(dim, base)?;
            if !(*alpha >= 0.0 && alpha < q_dim) {
                return Err(Error::InvalidParameter(format!(
                    "alpha must lie in [0, Q), got {alpha}"
                )));
            }
            let shift = alpha / q_dim;
            if 1.0 / hi - shift <= 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "conjugate exponent is nonpositive: p_plus = {hi} is not below Q/alpha"
                )));
            }
            let conj = |p: f64| 1.0 / (1.0 / p - shift);
            Ok((
                Compiled::Conjugate(Box::new(b), shift),
                conj(lo),
                conj(hi),
                inf.map(conj),
            ))
        }
    }
}

/// An exponent function with declared bounds.
#[derive(Clone, Debug)]
pub struct ExponentFunction {
    dim: Dimension,
    spec: ExponentSpec,
    compiled: Compiled,
    p_minus: f64,
    p_plus: f64,
    p_infinity: Option<f64>,
}

impl ExponentFunction {
    pub fn new(dim: Dimension, spec: ExponentSpec) -> Result<Self> {
        let (compiled, p_minus, p_plus, p_infinity) = compile(dim, &spec)?;
        Ok(ExponentFunction {
            dim,
            spec,
            compiled,
            p_minus,
            p_plus,
            p_infinity,
        })
    }

    pub fn constant(dim: Dimension, value: f64) -> Result<Self> {
        ExponentFunction::new(dim, ExponentSpec::Constant { value })
    }

    pub fn radial(dim: Dimension, radii: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        ExponentFunction::new(dim, ExponentSpec::Radial { radii, values })
    }

    /// Radial exponent tabulated from a closure on a uniform grid of `[0, reach]`.
    pub fn radial_from_fn(
        dim: Dimension,
        r: impl Fn(f64) -> f64,
        reach: f64,
        points: usize,
    ) -> Result<Self> {
        let points = points.max(2);
        let radii: Vec<f64> = (0..points)
            .map(|i| reach * i as f64 / (points - 1) as f64)
            .collect();
        let values = radii.iter().map(|s| r(*s)).collect();
        ExponentFunction::radial(dim, radii, values)
    }

    pub fn dim(&self) -> Dimension {
        self.dim
    }

    pub fn spec(&self) -> &ExponentSpec {
        &self.spec
    }

    #[inline]
    pub fn eval(&self, z: &GroupPoint) -> f64 {
        self.compiled.eval(z)
    }

    pub fn p_minus(&self) -> f64 {
        self.p_minus
    }

    pub fn p_plus(&self) -> f64 {
        self.p_plus
    }

    pub fn p_infinity(&self) -> Option<f64> {
        self.p_infinity
    }

    /// min(p_minus, 1).
    pub fn underline_p(&self) -> f64 {
        self.p_minus.min(1.0)
    }

    pub fn is_constant(&self) -> bool {
        self.p_minus == self.p_plus
    }

    pub fn scaled(&self, divisor: f64) -> Result<Self> {
        ExponentFunction::new(
            self.dim,
            ExponentSpec::Scaled {
                base: Box::new(self.spec.clone()),
                divisor,
            },
        )
    }

    /// Spot-checks the declared bounds on random points; returns the number
    /// of samples outside [p_minus, p_plus].
    pub fn verify_bounds(&self, samples: usize, seed: u64) -> usize {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..samples)
            .filter(|_| {
                let z = random_point(self.dim, &mut rng, 8.0);
                let v = self.eval(&z);
                !(v >= self.p_minus - 1e-12 && v <= self.p_plus + 1e-12)
            })
            .count()
    }
}

fn random_point(dim: Dimension, rng: &mut ChaCha8Rng, scale: f64) -> GroupPoint {
    let s = scale * 2f64.powf(rng.random_range(-4.0..1.0));
    let x: Vec<f64> = (0..dim.horizontal())
        .map(|_| rng.random_range(-s..s))
        .collect();
    GroupPoint::new(&x, rng.random_range(-s * s..s * s)).expect("finite coordinates")
}

fn random_unit_direction(dim: Dimension, rng: &mut ChaCha8Rng) -> GroupPoint {
    loop {
        let x: Vec<f64> = (0..dim.horizontal())
            .map(|_| rng.random_range(-1.0..1.0))
            .collect();
        let w = GroupPoint::new(&x, rng.random_range(-0.3..0.3)).expect("finite coordinates");
        let r = w.koranyi_norm();
        if r > 1e-3 && r <= 1.0 {
            return w.dilate_unchecked(1.0 / r);
        }
    }
}

/// 1/q = 1/p - alpha/Q.
pub fn conjugate_exponent(p: &ExponentFunction, alpha: f64) -> Result<ExponentFunction> {
    if alpha == 0.0 {
        return Ok(p.clone());
    }
    ExponentFunction::new(
        p.dim,
        ExponentSpec::Conjugate {
            base: Box::new(p.spec.clone()),
            alpha,
            q_dim: p.dim.qf(),
        },
    )
}

/// Symmetry that an exponent may be required to satisfy.
#[derive(Clone, Debug, PartialEq)]
pub enum ExponentSymmetry {
    /// p(Ax, t) = p(x, t).
    Rotation(RotationMatrix),
    /// p(rx, r^2 t) = p(x, t).
    Dilation(f64),
}

/// Checks the symmetry on random points; returns the largest deviation or
/// a `SymmetryViolated` error.
pub fn check_symmetry(
    p: &ExponentFunction,
    symmetry: &ExponentSymmetry,
    samples: usize,
    seed: u64,
) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..samples {
        let z = random_point(p.dim, &mut rng, 4.0);
        let w = match symmetry {
            ExponentSymmetry::Rotation(a) => z.rotate(a)?,
            ExponentSymmetry::Dilation(r) => z.dilate(*r)?,
        };
        worst = worst.max((p.eval(&w) - p.eval(&z)).abs());
    }
    if worst > SYMMETRY_TOL {
        return Err(Error::SymmetryViolated(format!(
            "largest deviation {worst:e} under {symmetry:?}"
        )));
    }
    Ok(worst)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogHolderReport {
    /// Smallest C with |p(a) - p(b)| <= C / (-log rho(a^{-1} b)) on the sampled pairs.
    pub c_local: f64,
    /// Smallest C_inf with |p(a) - p_inf| <= C_inf / log(e + rho(a)); infinite if p_inf is unknown.
    pub c_infinity: f64,
    /// Samples violating the declared bounds.
    pub violations: usize,
    /// Fitted local constant per dyadic distance band [2^{-k-1}, 2^{-k}], k = 1, 2, ...
    pub band_constants: Vec<f64>,
    /// True when the fitted constant keeps growing as the pair distance shrinks.
    pub divergent: bool,
}

const BANDS: usize = 40;

/// Fits the local and at-infinity log-Hoelder constants on random pairs and
/// singletons. Pairs with the largest jumps are refined by bisection along
/// the dilation path s -> a (s w) so that discontinuities are found at all scales.
pub fn check_log_holder(p: &ExponentFunction, samples: usize, seed: u64) -> LogHolderReport {
    let dim = p.dim;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut bands = vec![0.0f64; BANDS];
    let record = |dist: f64, jump: f64, bands: &mut [f64]| {
        if !(dist > 0.0 && dist <= 0.5) {
            return;
        }
        let k = ((-dist.log2()).floor() as usize).clamp(1, BANDS) - 1;
        bands[k] = bands[k].max(jump * (-dist.ln()));
    };
    let mut pairs = Vec::with_capacity(samples);
    for _ in 0..samples {
        let a = random_point(dim, &mut rng, 4.0);
        let w = random_unit_direction(dim, &mut rng);
        let s = 2f64.powf(-rng.random_range(1.0..20.0));
        let b = a.mul_unchecked(&w.dilate_unchecked(s));
        let jump = (p.eval(&a) - p.eval(&b)).abs();
        record(a.dist(&b), jump, &mut bands);
        pairs.push((jump * (-s.ln()), a, w, s));
    }
    pairs.sort_by(|x, y| y.0.total_cmp(&x.0));
    for (_, a, w, s) in pairs.into_iter().take(16) {
        let (mut lo, mut hi) = (0.0, s);
        for _ in 0..50 {
            let mid = 0.5 * (lo + hi);
            let pl = p.eval(&a.mul_unchecked(&w.dilate_unchecked(lo)));
            let pm = p.eval(&a.mul_unchecked(&w.dilate_unchecked(mid)));
            let ph = p.eval(&a.mul_unchecked(&w.dilate_unchecked(hi)));
            if (pm - pl).abs() >= (ph - pm).abs() {
                hi = mid;
            } else {
                lo = mid;
            }
            let ya = a.mul_unchecked(&w.dilate_unchecked(lo));
            let yb = a.mul_unchecked(&w.dilate_unchecked(hi));
            let dist = ya.dist(&yb);
            if dist == 0.0 {
                break;
            }
            record(dist, (p.eval(&ya) - p.eval(&yb)).abs(), &mut bands);
        }
    }
    let c_local = bands.iter().copied().fold(0.0, f64::max);
    let coarse = bands[..5].iter().copied().fold(0.0, f64::max);
    let fine = bands[20..].iter().copied().fold(0.0, f64::max);
    let divergent = fine > 3.0 * coarse && fine > 1e-12;

    let mut c_infinity: f64 = 0.0;
    let mut violations = 0;
    for _ in 0..samples {
        let r = 10f64.powf(rng.random_range(-2.0..6.0));
        let z = random_unit_direction(dim, &mut rng).dilate_unchecked(r);
        let v = p.eval(&z);
        if !(v >= p.p_minus - 1e-12 && v <= p.p_plus + 1e-12) {
            violations += 1;
        }
        match p.p_infinity {
            Some(inf) => {
                let c = (v - inf).abs() * (std::f64::consts::E + z.koranyi_norm()).ln();
                c_infinity = c_infinity.max(c);
            }
            None => c_infinity = f64::INFINITY,
        }
    }
    LogHolderReport {
        c_local,
        c_infinity,
        violations,
        band_constants: bands,
        divergent,
    }
}

/// |f|, p and quadrature weights at the nodes of a fixed rule, so that the
/// modular can be evaluated for many lambda.
#[derive(Clone, Debug, Default)]
pub struct Discretization {
    pub weights: Vec<f64>,
    pub values: Vec<f64>,
    pub exponents: Vec<f64>,
}

fn nodes_for(
    region: &Region,
    breaks: &[f64],
    spec: &IntegrationSpec,
    p_minus: f64,
    level_shift: usize,
) -> Result<NodeSet> {
    let res = Resolution::level(Resolution::start_level(spec.tolerance) + level_shift);
    match spec.method {
        IntegrationMethod::GridQuadrature => match region {
            Region::Ball(b) => Ok(NodeSet::ball(b, breaks, res)),
            Region::Union(bs) => Ok(NodeSet::union(bs, breaks, res)),
            Region::Exterior { dim, balls, decay } => {
                NodeSet::exterior(*dim, balls, decay * p_minus, res)
            }
        },
        _ => {
            let count = spec.max_evaluations.min(200_000) as usize;
            mc::mc_nodes(
                region,
                count,
                spec.seed + level_shift as u64,
                decay_scale(region, p_minus),
                res,
            )
        }
    }
}

fn decay_scale(region: &Region, p_minus: f64) -> f64 {
    match region {
        Region::Exterior { decay, .. } => decay * p_minus,
        _ => 0.0,
    }
}

impl Discretization {
    pub fn from_nodes<F: Field + ?Sized>(nodes: &NodeSet, f: &F, p: &ExponentFunction) -> Self {
        let (values, exponents): (Vec<f64>, Vec<f64>) = nodes
            .points
            .par_iter()
            .map(|z| (f.eval(z).abs(), p.eval(z)))
            .unzip();
        Discretization {
            weights: nodes.weights.clone(),
            values,
            exponents,
        }
    }

    /// Discretization on the field's support at the requested resolution,
    /// refined by `level_shift` levels.
    pub fn new<F: Field + ?Sized>(
        f: &F,
        p: &ExponentFunction,
        spec: &IntegrationSpec,
        level_shift: usize,
    ) -> Result<Self> {
        if f.dim() != p.dim() {
            return Err(Error::DimensionMismatch {
                expected: p.dim().n(),
                found: f.dim().n(),
            });
        }
        let nodes = nodes_for(
            &f.support(),
            &f.radial_breaks(),
            spec,
            p.p_minus(),
            level_shift,
        )?;
        Ok(Discretization::from_nodes(&nodes, f, p))
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// sum w |v / lambda|^p.
    pub fn modular(&self, lambda: f64) -> f64 {
        let ll = lambda.ln();
        self.weights
            .iter()
            .zip(self.values.iter())
            .zip(self.exponents.iter())
            .map(|((w, v), p)| {
                if *v == 0.0 {
                    0.0
                } else {
                    w * (p * (v.ln() - ll)).exp()
                }
            })
            .sum()
    }

    /// Luxemburg norm by bisection in log(lambda).
    pub fn luxemburg(&self) -> Result<f64> {
        luxemburg_from_modular(|l| self.modular(l), 1e-6)
    }
}

/// inf { lambda : m(lambda) <= 1 } for a nonincreasing modular. The bracket
/// is grown by doubling/halving; bisection in log(lambda) stops once the
/// relative bracket width is below `rel_width` and |m - 1| < 1e-3.
pub fn luxemburg_from_modular(m: impl Fn(f64) -> f64, rel_width: f64) -> Result<f64> {
    let m1 = m(1.0);
    if !m1.is_finite() {
        return Err(Error::NonIntegrable(
            "modular is not finite at lambda = 1".into(),
        ));
    }
    if m1 == 0.0 && m(f64::MIN_POSITIVE.sqrt()) == 0.0 {
        return Ok(0.0);
    }
    let (mut lo, mut hi) = (1.0f64, 1.0f64);
    if m1 > 1.0 {
        let mut steps = 0;
        while m(hi) > 1.0 {
            lo = hi;
            hi *= 2.0;
            steps += 1;
            if steps > 1100 || !hi.is_finite() {
                return Err(Error::BracketNotFound(format!(
                    "modular above 1 up to lambda = {lo}"
                )));
            }
        }
    } else {
        let mut steps = 0;
        while m(lo) <= 1.0 {
            hi = lo;
            lo *= 0.5;
            steps += 1;
            if steps > 1100 || lo == 0.0 {
                return Err(Error::BracketNotFound(format!(
                    "modular below 1 down to lambda = {hi}"
                )));
            }
        }
    }
    for _ in 0..200 {
        let mid = (lo * hi).sqrt();
        let mm = m(mid);
        if mm > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi / lo - 1.0 < rel_width && (mm - 1.0).abs() < 1e-3 {
            break;
        }
        if hi / lo - 1.0 < 1e-15 {
            break;
        }
    }
    Ok((lo * hi).sqrt())
}

/// Haar integral of |f/lambda|^{p(.)} over the support of f.
pub fn modular<F: Field + ?Sized>(
    f: &F,
    p: &ExponentFunction,
    lambda: f64,
    spec: &IntegrationSpec,
) -> Result<f64> {
    if !(lambda > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "lambda must be positive, got {lambda}"
        )));
    }
    Ok(Discretization::new(f, p, spec, 0)?.modular(lambda))
}

pub fn luxemburg_norm<F: Field + ?Sized>(
    f: &F,
    p: &ExponentFunction,
    spec: &IntegrationSpec,
) -> Result<f64> {
    Discretization::new(f, p, spec, 0)?.luxemburg()
}

/// Norm with an error estimate from one refinement level.
pub fn luxemburg_norm_estimate<F: Field + ?Sized>(
    f: &F,
    p: &ExponentFunction,
    spec: &IntegrationSpec,
) -> Result<crate::Estimate> {
    let coarse = Discretization::new(f, p, spec, 0)?;
    let fine = Discretization::new(f, p, spec, 1)?;
    let a = coarse.luxemburg()?;
    let b = fine.luxemburg()?;
    Ok(crate::Estimate {
        value: b,
        error: (b - a).abs() + 2e-6 * b,
        evaluations: (coarse.len() + fine.len()) as u64,
    })
}

/// Classical (integral |f|^p0)^{1/p0}.
pub fn lp_norm<F: Field + ?Sized>(f: &F, p0: f64, spec: &IntegrationSpec) -> Result<f64> {
    let p = ExponentFunction::constant(f.dim(), p0)?;
    let d = Discretization::new(f, &p, spec, 0)?;
    Ok(d.modular(1.0).powf(1.0 / p0))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerIdentityReport {
    /// ||f||_{p}^s
    pub lhs: f64,
    /// || |f|^s ||_{p/s}
    pub rhs: f64,
    pub relative_difference: f64,
    pub pass: bool,
}

/// Compares ||f||^s with || |f|^s ||_{p/s}, both by independent bisections.
pub fn power_identity_check<F: Field + ?Sized>(
    f: &F,
    p: &ExponentFunction,
    s: f64,
    spec: &IntegrationSpec,
) -> Result<PowerIdentityReport> {
    positive(s, "power")?;
    let lhs = luxemburg_norm(f, p, spec)?.powf(s);
    let ps = p.scaled(s)?;
    let g = FnField::new(f.support(), |z: &GroupPoint| f.eval(z).abs().powf(s))
        .with_breaks(f.radial_breaks());
    let rhs = luxemburg_norm(&g, &ps, spec)?;
    let scale = lhs.abs().max(rhs.abs());
    let relative_difference = if scale == 0.0 {
        0.0
    } else {
        (lhs - rhs).abs() / scale
    };
    Ok(PowerIdentityReport {
        lhs,
        rhs,
        relative_difference,
        pass: relative_difference <= 5.0 * 1e-6 * s.max(1.0),
    })
}

/// Minimal k >= 0 with (2n + k + 3) p_minus > 2n + 2. Values within 1e-9
/// of an integer are snapped before applying the strict inequality.
pub fn d_p_from_minus(p_minus: f64, n: usize) -> u32 {
    let nf = n as f64;
    let mut x = (2.0 * nf + 2.0) / p_minus - (2.0 * nf + 3.0);
    if (x - x.round()).abs() < 1e-9 {
        x = x.round();
    }
    if x < 0.0 {
        0
    } else {
        x.floor() as u32 + 1
    }
}

pub fn d_p(p: &ExponentFunction, n: usize) -> u32 {
    d_p_from_minus(p.p_minus(), n)
}

#[derive(Clone, Debug, PartialEq)]
pub struct BallFamily {
    balls: Vec<KoranyiBall>,
    weights: Vec<f64>,
}

impl BallFamily {
    pub fn new(balls: Vec<KoranyiBall>, weights: Vec<f64>) -> Result<Self> {
        if balls.is_empty() || balls.len() != weights.len() {
            return Err(Error::InvalidParameter(
                "a ball family needs matching non-empty balls and weights".into(),
            ));
        }
        if weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
            return Err(Error::InvalidParameter(
                "weights must be nonnegative".into(),
            ));
        }
        let dim = balls[0].dim();
        if let Some(b) = balls.iter().find(|b| b.dim() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim.n(),
                found: b.dim().n(),
            });
        }
        Ok(BallFamily { balls, weights })
    }

    pub fn balls(&self) -> &[KoranyiBall] {
        &self.balls
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn dim(&self) -> Dimension {
        self.balls[0].dim()
    }

    pub fn scaled(&self, c: f64) -> Result<Self> {
        BallFamily::new(
            self.balls.clone(),
            self.weights.iter().map(|w| w * c).collect(),
        )
    }
}

/// ||chi_B||_{p(.)}.
pub fn indicator_norm(
    ball: &KoranyiBall,
    p: &ExponentFunction,
    spec: &IntegrationSpec,
) -> Result<f64> {
    if p.is_constant() {
        return Ok(ball.volume().powf(1.0 / p.p_minus()));
    }
    let chi = crate::field::IndicatorSum::ball(ball.clone());
    luxemburg_norm(&chi, p, spec)
}

/// The aggregate || { sum_j (lambda_j chi_{B_j} / ||chi_{B_j}||)^{p_} }^{1/p_} ||_{p(.)}.
pub fn a_quantity(
    family: &BallFamily,
    p: &ExponentFunction,
    spec: &IntegrationSpec,
) -> Result<f64> {
    let norms: Vec<f64> = family
        .balls
        .par_iter()
        .map(|b| indicator_norm(b, p, spec))
        .collect::<Result<_>>()?;
    let pu = p.underline_p();
    let coeffs: Vec<f64> = family
        .weights
        .iter()
        .zip(norms.iter())
        .map(|(l, n)| (l / n).powf(pu))
        .collect();
    let balls = family.balls.clone();
    let g = FnField::new(Region::Union(balls.clone()), move |z: &GroupPoint| {
        let s: f64 = balls
            .iter()
            .zip(coeffs.iter())
            .filter(|(b, _)| b.contains(z))
            .map(|(_, c)| *c)
            .sum();
        s.powf(1.0 / pu)
    });
    luxemburg_norm(&g, p, spec)
}

#[derive(Clone, Debug, PartialEq)]
pub enum BallTransform {
    Identity,
    /// B* = B_{gamma delta}(A x0, t0)
    Rotation(RotationMatrix),
    /// B* = B_{gamma delta}(r x0, r^2 t0)
    Dilation(f64),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BStarReport {
    pub a_original: f64,
    pub a_transformed: f64,
    pub ratio: f64,
}

pub fn transform_family(
    family: &BallFamily,
    transform: &BallTransform,
    gamma: f64,
) -> Result<BallFamily> {
    let balls = family
        .balls
        .iter()
        .map(|b| {
            let c = b.center();
            let c2 = match transform {
                BallTransform::Identity => c.clone(),
                BallTransform::Rotation(a) => c.rotate(a)?,
                BallTransform::Dilation(r) => c.dilate(*r)?,
            };
            KoranyiBall::new(c2, gamma * b.radius())
        })
        .collect::<Result<Vec<_>>>()?;
    BallFamily::new(balls, family.weights.clone())
}

/// Ratio of the aggregate for the transformed, expanded family to the original.
pub fn b_star_comparison(
    family: &BallFamily,
    p: &ExponentFunction,
    transform: &BallTransform,
    gamma: f64,
    spec: &IntegrationSpec,
) -> Result<BStarReport> {
    if !(gamma >= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "expansion must be >= 1, got {gamma}"
        )));
    }
    match transform {
        BallTransform::Identity => {}
        BallTransform::Rotation(a) => {
            check_symmetry(p, &ExponentSymmetry::Rotation(a.clone()), 256, 7)?;
        }
        BallTransform::Dilation(r) => {
            check_symmetry(p, &ExponentSymmetry::Dilation(*r), 256, 7)?;
        }
    }
    let star = transform_family(family, transform, gamma)?;
    let a_original = a_quantity(family, p, spec)?;
    let a_transformed = if transform == &BallTransform::Identity && gamma == 1.0 {
        a_original
    } else {
        a_quantity(&star, p, spec)?
    };
    Ok(BStarReport {
        a_original,
        a_transformed,
        ratio: a_transformed / a_original,
    })
}

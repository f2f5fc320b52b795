//! (p(.), p0, D)-atoms: bump-dictionary functions on a Koranyi ball with
//! vanishing moments up to homogeneous degree D.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::calculus::{count_up_to_degree, monomial_eval, MultiIndex};
use crate::error::{Error, Result};
use crate::field::{Field, Region};
use crate::group::{Dimension, GroupPoint, KoranyiBall};
use crate::integrate::{sample_ball, IntegrationSpec, NodeSet, Resolution};
use crate::varexp::{indicator_norm, ExponentFunction};

/// Default exponent k of the radial profile (1 - rho^4/delta^4)^k.
pub const PROFILE_POWER: u32 = 3;
/// Dictionary size as a multiple of the number of moment conditions.
pub const DICTIONARY_FACTOR: usize = 4;
/// Size slack: atoms are built with ||a||_{p0} = 0.99 * bound.
pub const SIZE_SLACK: f64 = 0.99;
pub const MOMENT_TOL: f64 = 1e-8;
const MAX_RETRIES: usize = 8;

/// Number of multi-indices with d(I) <= D.
pub fn moment_dimension(dim: Dimension, degree: u32) -> usize {
    count_up_to_degree(dim, degree)
}

/// The first `size` monomials ordered by homogeneous degree.
pub fn dictionary_monomials(dim: Dimension, size: usize) -> Vec<MultiIndex> {
    let mut d = 0;
    while count_up_to_degree(dim, d) < size {
        d += 1;
    }
    let mut all = MultiIndex::up_to_degree(dim, d);
    all.truncate(size);
    all
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct Certificate {
    pub norm_p0: f64,
    pub indicator_norm: f64,
    /// |B|^{1/p0} / ||chi_B||_{p(.)}
    pub bound: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct AtomRecord {
    pub n: usize,
    pub center: Vec<f64>,
    pub radius: f64,
    pub support_radius: f64,
    pub p0: f64,
    pub degree: u32,
    pub profile_power: u32,
    pub monomials: Vec<Vec<u32>>,
    pub coefficients: Vec<f64>,
    pub certificate: Certificate,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(into = "AtomRecord", try_from = "AtomRecord")]
pub struct Atom {
    ball: KoranyiBall,
    support_radius: f64,
    p0: f64,
    degree: u32,
    profile_power: u32,
    monomials: Vec<MultiIndex>,
    coefficients: Vec<f64>,
    certificate: Certificate,
}

impl From<Atom> for AtomRecord {
    fn from(a: Atom) -> Self {
        AtomRecord {
            n: a.ball.dim().n(),
            center: a.ball.center().coords(),
            radius: a.ball.radius(),
            support_radius: a.support_radius,
            p0: a.p0,
            degree: a.degree,
            profile_power: a.profile_power,
            monomials: a.monomials.into_iter().map(Vec::from).collect(),
            coefficients: a.coefficients,
            certificate: a.certificate,
        }
    }
}

impl TryFrom<AtomRecord> for Atom {
    type Error = Error;
    fn try_from(r: AtomRecord) -> Result<Self> {
        let center = GroupPoint::from_coords(&r.center)?;
        if center.dim().n() != r.n {
            return Err(Error::DimensionMismatch {
                expected: r.n,
                found: center.dim().n(),
            });
        }
        let monomials = r
            .monomials
            .into_iter()
            .map(MultiIndex::try_from)
            .collect::<Result<Vec<_>>>()?;
        Atom::from_parts(
            KoranyiBall::new(center, r.radius)?,
            r.support_radius,
            r.p0,
            r.degree,
            r.profile_power,
            monomials,
            r.coefficients,
            r.certificate,
        )
    }
}

/// Rule in the translated variable w = c^{-1} y on B_radius(e), exact for the
/// dictionary-times-moment polynomials in the radial and phase variables.
fn local_rule(dim: Dimension, radius: f64, dict_degree: u32, degree: u32, power: u32) -> NodeSet {
    let dd = (dict_degree + degree) as usize;
    let radial_degree = 4 * power as usize + dd + dim.q() - 1;
    let res = Resolution {
        radial: radial_degree / 2 + 2,
        polar: dd + 2 * dim.n() + 8,
        azimuthal: (dd + 2).div_ceil(2) * 2 + 2,
        simplex: dd / 2 + 2,
    };
    NodeSet::ball(
        &KoranyiBall::centered(dim, radius).expect("positive radius"),
        &[],
        res,
    )
}

fn fine_spec(spec: &IntegrationSpec) -> IntegrationSpec {
    IntegrationSpec {
        tolerance: spec.tolerance * 0.1,
        ..*spec
    }
}

fn refine_rule(dim: Dimension, radius: f64, dict_degree: u32, degree: u32, power: u32) -> NodeSet {
    local_rule(dim, radius, dict_degree + 2, degree + 2, power + 1)
}

impl Atom {
    #[allow(clippy::too_many_arguments)]
    fn from_parts(
        ball: KoranyiBall,
        support_radius: f64,
        p0: f64,
        degree: u32,
        profile_power: u32,
        monomials: Vec<MultiIndex>,
        coefficients: Vec<f64>,
        certificate: Certificate,
    ) -> Result<Self> {
        if !(p0 > 1.0) || !p0.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "p0 must exceed 1, got {p0}"
            )));
        }
        if !(support_radius > 0.0) || !support_radius.is_finite() {
            return Err(Error::InvalidParameter(
                "support radius must be positive".into(),
            ));
        }
        if monomials.len() != coefficients.len() || monomials.is_empty() {
            return Err(Error::InvalidParameter(
                "atom needs matching non-empty monomials and coefficients".into(),
            ));
        }
        let dim = ball.dim();
        if let Some(m) = monomials.iter().find(|m| m.dim() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim.n(),
                found: m.dim().n(),
            });
        }
        Ok(Atom {
            ball,
            support_radius,
            p0,
            degree,
            profile_power,
            monomials,
            coefficients,
            certificate,
        })
    }

    /// An atom from explicit dictionary coefficients; certificates are computed.
    #[allow(clippy::too_many_arguments)]
    pub fn from_coefficients(
        ball: KoranyiBall,
        p: &ExponentFunction,
        p0: f64,
        degree: u32,
        profile_power: u32,
        monomials: Vec<MultiIndex>,
        coefficients: Vec<f64>,
        spec: &IntegrationSpec,
    ) -> Result<Self> {
        let radius = ball.radius();
        let mut a = Atom::from_parts(
            ball,
            radius,
            p0,
            degree,
            profile_power,
            monomials,
            coefficients,
            Certificate {
                norm_p0: 0.0,
                indicator_norm: 0.0,
                bound: 0.0,
            },
        )?;
        a.recertify(p, spec)?;
        Ok(a)
    }

    pub fn ball(&self) -> &KoranyiBall {
        &self.ball
    }

    pub fn support_radius(&self) -> f64 {
        self.support_radius
    }

    pub fn p0(&self) -> f64 {
        self.p0
    }

    pub fn degree(&self) -> u32 {
        self.degree
    }

    pub fn profile_power(&self) -> u32 {
        self.profile_power
    }

    pub fn monomials(&self) -> &[MultiIndex] {
        &self.monomials
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn certificate(&self) -> &Certificate {
        &self.certificate
    }

    fn dict_degree(&self) -> u32 {
        self.monomials.iter().map(|m| m.degree()).max().unwrap_or(0)
    }

    /// Same coefficients on a profile of a different radius (a test device
    /// for support violations).
    pub fn with_support_radius(mut self, radius: f64) -> Result<Self> {
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(Error::InvalidParameter(
                "support radius must be positive".into(),
            ));
        }
        self.support_radius = radius;
        Ok(self)
    }

    /// Multiplies the coefficients by c and the certified norm by |c|.
    pub fn scaled(mut self, c: f64) -> Self {
        self.coefficients.iter_mut().for_each(|v| *v *= c);
        self.certificate.norm_p0 *= c.abs();
        self
    }

    /// Value at w = center^{-1} y.
    pub fn eval_local(&self, w: &GroupPoint) -> f64 {
        let s4 = self.support_radius.powi(4);
        let u = w.norm4() / s4;
        if u >= 1.0 {
            return 0.0;
        }
        let profile = (1.0 - u).powi(self.profile_power as i32);
        let wd = w.dilate_unchecked(1.0 / self.ball.radius());
        let poly: f64 = self
            .monomials
            .iter()
            .zip(self.coefficients.iter())
            .map(|(m, c)| c * monomial_eval(m, &wd))
            .sum();
        profile * poly
    }

    /// Quadrature rule on the support ball that integrates a times any
    /// polynomial of degree <= D exactly up to rounding.
    pub fn rule(&self) -> NodeSet {
        let mut nodes = local_rule(
            self.ball.dim(),
            self.support_radius,
            self.dict_degree(),
            self.degree,
            self.profile_power,
        );
        let c = self.ball.center();
        nodes
            .points
            .iter_mut()
            .for_each(|p| *p = c.mul_unchecked(p));
        nodes
    }

    fn local_norms(&self, nodes: &NodeSet) -> (f64, f64) {
        let terms: Vec<(f64, f64)> = nodes
            .points
            .par_iter()
            .zip(nodes.weights.par_iter())
            .map(|(w, wt)| {
                let v = self.eval_local(w).abs();
                (wt * v.powf(self.p0), wt * v)
            })
            .collect();
        let (lp, l1) = terms.iter().fold((0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1));
        (lp.powf(1.0 / self.p0), l1)
    }

    fn recertify(&mut self, p: &ExponentFunction, spec: &IntegrationSpec) -> Result<()> {
        let nodes = refine_rule(
            self.ball.dim(),
            self.support_radius,
            self.dict_degree(),
            self.degree,
            self.profile_power,
        );
        let (norm_p0, _) = self.local_norms(&nodes);
        let chi = indicator_norm(&self.ball, p, &fine_spec(spec))?;
        self.certificate = Certificate {
            norm_p0,
            indicator_norm: chi,
            bound: self.ball.volume().powf(1.0 / self.p0) / chi,
        };
        Ok(())
    }

    /// a(delta_{1/r} y) * r^{-Q/p0} on the dilated ball; the L^{p0} norm and
    /// the moment conditions are preserved, the size bound is re-certified.
    pub fn dilated(&self, r: f64, p: &ExponentFunction, spec: &IntegrationSpec) -> Result<Atom> {
        let c = self.ball.center().dilate(r)?;
        let mut a = self.clone();
        a.ball = KoranyiBall::new(c, r * self.ball.radius())?;
        a.support_radius = r * self.support_radius;
        let jac = r.powf(-self.ball.dim().qf() / self.p0);
        a.coefficients.iter_mut().for_each(|v| *v *= jac);
        a.recertify(p, spec)?;
        Ok(a)
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string(self).map_err(|e| Error::InvalidParameter(e.to_string()))
    }

    pub fn from_json(s: &str) -> Result<Atom> {
        serde_json::from_str(s).map_err(|e| Error::InvalidParameter(e.to_string()))
    }
}

impl Field for Atom {
    fn dim(&self) -> Dimension {
        self.ball.dim()
    }
    fn eval(&self, y: &GroupPoint) -> f64 {
        let w = self.ball.center().inv().mul_unchecked(y);
        self.eval_local(&w)
    }
    fn support(&self) -> Region {
        Region::Ball(
            KoranyiBall::new(self.ball.center().clone(), self.support_radius)
                .expect("validated radius"),
        )
    }
}

/// Moment matrix G[j][k] = average over the unit-scaled ball of
/// phi_k(w) (w/delta)^{J_j}, for the given dictionary.
pub fn moment_matrix(
    dim: Dimension,
    degree: u32,
    monomials: &[MultiIndex],
    profile_power: u32,
) -> DMatrix<f64> {
    let moments = MultiIndex::up_to_degree(dim, degree);
    let dict_degree = monomials.iter().map(|m| m.degree()).max().unwrap_or(0);
    let nodes = local_rule(dim, 1.0, dict_degree, degree, profile_power);
    let total: f64 = nodes.weights.iter().sum();
    let mut g = DMatrix::zeros(moments.len(), monomials.len());
    for (w, wt) in nodes.points.iter().zip(nodes.weights.iter()) {
        let u = w.norm4();
        if u >= 1.0 {
            continue;
        }
        let profile = (1.0 - u).powi(profile_power as i32) * wt / total;
        let mv: Vec<f64> = moments.iter().map(|j| monomial_eval(j, w)).collect();
        for (k, m) in monomials.iter().enumerate() {
            let phi = profile * monomial_eval(m, w);
            for (j, v) in mv.iter().enumerate() {
                g[(j, k)] += phi * v;
            }
        }
    }
    g
}

/// Numerical rank of the default moment map.
pub fn moment_rank(dim: Dimension, degree: u32) -> usize {
    let m = moment_dimension(dim, degree);
    let dict = dictionary_monomials(dim, DICTIONARY_FACTOR * m);
    let g = moment_matrix(dim, degree, &dict, PROFILE_POWER);
    let sv = g.singular_values();
    let top = sv.max();
    sv.iter().filter(|s| **s > 1e-10 * top).count()
}

fn project(c: &mut [f64], basis: &DMatrix<f64>) {
    for _ in 0..2 {
        for row in basis.row_iter() {
            let dot: f64 = row.iter().zip(c.iter()).map(|(a, b)| a * b).sum();
            for (ci, ri) in c.iter_mut().zip(row.iter()) {
                *ci -= dot * ri;
            }
        }
    }
}

/// Random atom on `ball`: random dictionary coefficients projected onto the
/// null space of the moment map, rescaled to 0.99 times the size bound.
pub fn make_atom(
    ball: &KoranyiBall,
    p: &ExponentFunction,
    p0: f64,
    degree: u32,
    seed: u64,
    spec: &IntegrationSpec,
) -> Result<Atom> {
    let dim = ball.dim();
    if p.dim() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim.n(),
            found: p.dim().n(),
        });
    }
    let m = moment_dimension(dim, degree);
    let monomials = dictionary_monomials(dim, DICTIONARY_FACTOR * m);
    let g = moment_matrix(dim, degree, &monomials, PROFILE_POWER);
    let svd = g.svd(false, true);
    let vt = svd.v_t.expect("requested right singular vectors");
    let top = svd.singular_values.max();
    let rank = svd
        .singular_values
        .iter()
        .filter(|s| **s > 1e-10 * top)
        .count();
    if rank != m {
        return Err(Error::SingularSystem(format!(
            "moment map has rank {rank}, expected {m}"
        )));
    }
    let row_space = vt.rows(0, rank).into_owned();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..MAX_RETRIES {
        let raw: Vec<f64> = (0..monomials.len())
            .map(|_| rng.random_range(-1.0..1.0))
            .collect();
        let raw_norm = raw.iter().map(|v| v * v).sum::<f64>().sqrt();
        let mut c = raw;
        project(&mut c, &row_space);
        let norm = c.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm < 1e-8 * raw_norm {
            continue;
        }
        let mut atom = Atom::from_coefficients(
            ball.clone(),
            p,
            p0,
            degree,
            PROFILE_POWER,
            monomials.clone(),
            c,
            spec,
        )?;
        let factor = SIZE_SLACK * atom.certificate.bound / atom.certificate.norm_p0;
        atom = atom.scaled(factor);
        return Ok(atom);
    }
    Err(Error::ProjectionCollapsed {
        attempts: MAX_RETRIES,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct AtomReport {
    pub support_ok: bool,
    pub size_ok: bool,
    pub moments_ok: bool,
    pub norm_p0: f64,
    pub bound: f64,
    pub l1_norm: f64,
    /// max_I |int a z^I| / (||a||_1 delta^{d(I)})
    pub max_moment_residual: f64,
    pub pass: bool,
}

/// Re-checks the three atom conditions with a refined rule, a refined
/// indicator norm and fresh support samples.
pub fn verify_atom(a: &Atom, p: &ExponentFunction, spec: &IntegrationSpec) -> Result<AtomReport> {
    let dim = a.ball.dim();
    let delta = a.ball.radius();

    let outer = KoranyiBall::new(a.ball.center().clone(), 2.0 * delta.max(a.support_radius))?;
    let support_ok = a.support_radius <= delta
        && sample_ball(&outer, 4000, spec.seed ^ 0x5eed)
            .iter()
            .filter(|z| !a.ball.contains(z))
            .all(|z| a.eval(z) == 0.0);

    let local = refine_rule(
        dim,
        a.support_radius,
        a.dict_degree(),
        a.degree,
        a.profile_power,
    );
    let (norm_p0, l1_norm) = a.local_norms(&local);
    let chi = indicator_norm(&a.ball, p, &fine_spec(spec))?;
    let bound = a.ball.volume().powf(1.0 / a.p0) / chi;
    let size_ok = norm_p0 <= bound;

    let c = a.ball.center();
    let values: Vec<f64> = local.points.par_iter().map(|w| a.eval_local(w)).collect();
    let mut max_moment_residual: f64 = 0.0;
    for j in MultiIndex::up_to_degree(dim, a.degree) {
        let sum: f64 = local
            .points
            .iter()
            .zip(local.weights.iter())
            .zip(values.iter())
            .map(|((w, wt), v)| wt * v * monomial_eval(&j, &c.mul_unchecked(w)))
            .sum();
        let denom = l1_norm * delta.powi(j.degree() as i32);
        let r = if denom > 0.0 { sum.abs() / denom } else { 0.0 };
        max_moment_residual = max_moment_residual.max(r);
    }
    let moments_ok = max_moment_residual <= MOMENT_TOL;
    Ok(AtomReport {
        support_ok,
        size_ok,
        moments_ok,
        norm_p0,
        bound,
        l1_norm,
        max_moment_residual,
        pass: support_ok && size_ok && moments_ok,
    })
}

/// The pulled-back atom w -> a(z0 w) on B_delta(e); `z0` must be the center.
pub fn translate_atom(
    a: &Atom,
    z0: &GroupPoint,
    p: &ExponentFunction,
    spec: &IntegrationSpec,
) -> Result<Atom> {
    let c = a.ball.center();
    if z0.dim() != c.dim() {
        return Err(Error::DimensionMismatch {
            expected: c.dim().n(),
            found: z0.dim().n(),
        });
    }
    let scale = 1.0 + c.koranyi_norm();
    if c.dist(z0) > 1e-12 * scale {
        return Err(Error::CenterMismatch(format!(
            "{z0} is not the atom center {c}"
        )));
    }
    let mut out = a.clone();
    out.ball = KoranyiBall::centered(c.dim(), a.ball.radius())?;
    out.recertify(p, spec)?;
    Ok(out)
}

/// A finite sum of weighted atoms.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AtomicCombination {
    atoms: Vec<Atom>,
    weights: Vec<f64>,
}

impl AtomicCombination {
    pub fn new(atoms: Vec<Atom>, weights: Vec<f64>) -> Result<Self> {
        if atoms.is_empty() || atoms.len() != weights.len() {
            return Err(Error::InvalidParameter(
                "combination needs matching non-empty atoms and weights".into(),
            ));
        }
        if weights.iter().any(|w| !(*w >= 0.0)) {
            return Err(Error::InvalidParameter(
                "weights must be nonnegative".into(),
            ));
        }
        Ok(AtomicCombination { atoms, weights })
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
}

impl Field for AtomicCombination {
    fn dim(&self) -> Dimension {
        self.atoms[0].dim()
    }
    fn eval(&self, y: &GroupPoint) -> f64 {
        self.atoms
            .iter()
            .zip(self.weights.iter())
            .map(|(a, w)| w * a.eval(y))
            .sum()
    }
    fn support(&self) -> Region {
        let balls: Vec<KoranyiBall> = self
            .atoms
            .iter()
            .map(|a| match a.support() {
                Region::Ball(b) => b,
                _ => unreachable!("atoms have ball support"),
            })
            .collect();
        if balls.len() == 1 {
            Region::Ball(balls[0].clone())
        } else {
            Region::Union(balls)
        }
    }
}

//! The generalized Riesz operator T_{alpha,m}, maximal functions and the
//! geometric constructions used to control it.

mod apply;
mod bounds;
mod maximal;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::group::{Dimension, GroupPoint, KoranyiBall, RotationMatrix};

pub use apply::{apply_riesz, apply_t, Evaluator, RuleChoice};
pub use bounds::{
    domination_constants, expanded_balls, expansion_factor, far_field_atom_bound, image_norm,
    kernel_derivative_bound, loglog_slope, preimage_balls, DominationReport, FarFieldReport,
    ImageNorm, KernelDerivativeReport,
};
pub use maximal::{
    fractional_maximal, geometric_radii, grand_maximal_proxy, Mollifier, MollifierDictionary,
};

/// Parameters (alpha, alpha_j, A_j, r_j) of T_{alpha,m}. For alpha > 0 the
/// A_j are rotations and r_j = 1; for alpha = 0, A_j = r_j^{-1} I.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "KernelSpecRaw", into = "KernelSpecRaw")]
pub struct KernelSpec {
    dim: Dimension,
    alpha: f64,
    alphas: Vec<f64>,
    rotations: Vec<RotationMatrix>,
    radii: Vec<f64>,
    /// prod_j c_j with the factor j written as c_j rho(p_j^{-1} y)^{-alpha_j}.
    constant: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
struct KernelSpecRaw {
    n: usize,
    alpha: f64,
    alphas: Vec<f64>,
    /// Block rotation angles per factor (alpha > 0).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    angles: Option<Vec<Vec<f64>>>,
    /// Explicit matrices per factor (alpha > 0); alternative to `angles`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    matrices: Option<Vec<RotationMatrix>>,
    /// Dilation radii per factor (alpha = 0).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    radii: Option<Vec<f64>>,
}

impl TryFrom<KernelSpecRaw> for KernelSpec {
    type Error = Error;
    fn try_from(r: KernelSpecRaw) -> Result<Self> {
        let dim = Dimension::new(r.n)?;
        if r.alpha == 0.0 {
            if r.angles.is_some() || r.matrices.is_some() {
                return Err(Error::InvariantViolation(
                    "alpha = 0 kernels use dilations, not rotations".into(),
                ));
            }
            let radii = r
                .radii
                .ok_or_else(|| Error::InvalidParameter("alpha = 0 requires radii".into()))?;
            KernelSpec::dilational(dim, r.alphas, radii)
        } else {
            if r.radii
                .as_ref()
                .is_some_and(|v| v.iter().any(|x| *x != 1.0))
            {
                return Err(Error::InvariantViolation(
                    "alpha > 0 requires r_j = 1".into(),
                ));
            }
            let rotations = match (r.angles, r.matrices) {
                (Some(_), Some(_)) => {
                    return Err(Error::InvalidParameter(
                        "give either angles or matrices, not both".into(),
                    ))
                }
                (Some(angles), None) => angles
                    .iter()
                    .map(|a| RotationMatrix::block_rotations(a))
                    .collect::<Result<Vec<_>>>()?,
                (None, Some(m)) => m,
                (None, None) => vec![RotationMatrix::identity(dim); r.alphas.len()],
            };
            KernelSpec::rotational(dim, r.alpha, r.alphas, rotations)
        }
    }
}

impl From<KernelSpec> for KernelSpecRaw {
    fn from(k: KernelSpec) -> Self {
        let dilational = k.alpha == 0.0;
        KernelSpecRaw {
            n: k.dim.n(),
            alpha: k.alpha,
            alphas: k.alphas,
            angles: None,
            matrices: (!dilational).then_some(k.rotations),
            radii: dilational.then_some(k.radii),
        }
    }
}

fn check_exponents(dim: Dimension, alpha: f64, alphas: &[f64]) -> Result<()> {
    let q = dim.qf();
    if !(alpha >= 0.0 && alpha < q) {
        return Err(Error::InvariantViolation(format!(
            "alpha = {alpha} is outside [0, Q)"
        )));
    }
    let m = alphas.len();
    if !((m as f64) > 1.0 - alpha / q) {
        return Err(Error::InvariantViolation(format!(
            "m = {m} does not exceed 1 - alpha/Q"
        )));
    }
    if alphas.iter().any(|a| !(*a > 0.0) || !a.is_finite()) {
        return Err(Error::InvariantViolation(
            "every alpha_j must be positive".into(),
        ));
    }
    let sum: f64 = alphas.iter().sum();
    if (sum - (q - alpha)).abs() > 1e-12 * q {
        return Err(Error::InvariantViolation(format!(
            "sum of alpha_j is {sum}, expected Q - alpha = {}",
            q - alpha
        )));
    }
    Ok(())
}

impl KernelSpec {
    /// alpha > 0: factors rho((A_j y, s)^{-1} (x, t))^{-alpha_j}.
    pub fn rotational(
        dim: Dimension,
        alpha: f64,
        alphas: Vec<f64>,
        rotations: Vec<RotationMatrix>,
    ) -> Result<Self> {
        if alpha == 0.0 {
            return Err(Error::InvariantViolation(
                "rotational kernels require alpha > 0".into(),
            ));
        }
        check_exponents(dim, alpha, &alphas)?;
        if rotations.len() != alphas.len() {
            return Err(Error::InvalidParameter(
                "one rotation per factor is required".into(),
            ));
        }
        if let Some(a) = rotations.iter().find(|a| a.dim() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim.n(),
                found: a.dim().n(),
            });
        }
        let m = alphas.len();
        Ok(KernelSpec {
            dim,
            alpha,
            alphas,
            rotations,
            radii: vec![1.0; m],
            constant: 1.0,
        })
    }

    /// alpha = 0: factors rho((y / r_j, s / r_j^2)^{-1} (x, t))^{-alpha_j}.
    pub fn dilational(dim: Dimension, alphas: Vec<f64>, radii: Vec<f64>) -> Result<Self> {
        check_exponents(dim, 0.0, &alphas)?;
        if radii.len() != alphas.len() {
            return Err(Error::InvalidParameter(
                "one radius per factor is required".into(),
            ));
        }
        if radii.iter().any(|r| !(*r > 0.0) || !r.is_finite()) {
            return Err(Error::InvariantViolation("radii must be positive".into()));
        }
        separation_constants(&radii)?;
        let constant = radii
            .iter()
            .zip(alphas.iter())
            .map(|(r, a)| r.powf(*a))
            .product();
        Ok(KernelSpec {
            dim,
            alpha: 0.0,
            rotations: vec![RotationMatrix::identity(dim); alphas.len()],
            alphas,
            radii,
            constant,
        })
    }

    /// The Riesz potential kernel rho(y^{-1} z)^{alpha - Q}.
    pub fn riesz(dim: Dimension, alpha: f64) -> Result<Self> {
        if !(alpha > 0.0) {
            return Err(Error::InvariantViolation(
                "Riesz potentials need alpha > 0".into(),
            ));
        }
        KernelSpec::rotational(
            dim,
            alpha,
            vec![dim.qf() - alpha],
            vec![RotationMatrix::identity(dim)],
        )
    }

    pub fn dim(&self) -> Dimension {
        self.dim
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn m(&self) -> usize {
        self.alphas.len()
    }

    pub fn alphas(&self) -> &[f64] {
        &self.alphas
    }

    pub fn rotations(&self) -> &[RotationMatrix] {
        &self.rotations
    }

    pub fn radii(&self) -> &[f64] {
        &self.radii
    }

    pub fn is_dilational(&self) -> bool {
        self.alpha == 0.0
    }

    /// The point w_j(y) = (A_j y, r_j^{-2} s) of factor j.
    pub fn factor_point(&self, j: usize, y: &GroupPoint) -> GroupPoint {
        if self.is_dilational() {
            y.dilate_unchecked(1.0 / self.radii[j])
        } else {
            y.rotate(&self.rotations[j]).expect("dimension validated")
        }
    }

    /// The singular preimage p_j(z) = (A_j^{-1} x, r_j^2 t): factor j is
    /// c_j rho(p_j(z)^{-1} y)^{-alpha_j}.
    pub fn singular_point(&self, j: usize, z: &GroupPoint) -> GroupPoint {
        if self.is_dilational() {
            z.dilate_unchecked(self.radii[j])
        } else {
            z.rotate(&self.rotations[j].inverse())
                .expect("dimension validated")
        }
    }

    pub fn singular_points(&self, z: &GroupPoint) -> Vec<GroupPoint> {
        (0..self.m()).map(|j| self.singular_point(j, z)).collect()
    }

    /// prod_j c_j.
    pub fn constant(&self) -> f64 {
        self.constant
    }

    /// Kernel value from precomputed singular points.
    #[inline]
    pub(crate) fn eval_from_points(&self, points: &[GroupPoint], y: &GroupPoint) -> f64 {
        let mut log = 0.0;
        for (p, a) in points.iter().zip(self.alphas.iter()) {
            let d4 = p.dist4(y);
            if d4 == 0.0 {
                return f64::INFINITY;
            }
            log += a * d4.ln();
        }
        self.constant * (-0.25 * log).exp()
    }

    fn check_dim(&self, z: &GroupPoint) -> Result<()> {
        if z.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim.n(),
                found: z.dim().n(),
            });
        }
        Ok(())
    }
}

/// prod_j rho((A_j y, r_j^{-2} s)^{-1} z)^{-alpha_j}, evaluated factor by
/// factor from the definition; +infinity on the singular sets.
pub fn kernel_eval(spec: &KernelSpec, y: &GroupPoint, z: &GroupPoint) -> Result<f64> {
    spec.check_dim(y)?;
    spec.check_dim(z)?;
    let mut value = 1.0;
    for (j, a) in spec.alphas.iter().enumerate() {
        let d = spec.factor_point(j, y).dist(z);
        if d == 0.0 {
            return Ok(f64::INFINITY);
        }
        value *= d.powf(-a);
    }
    Ok(value)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeparationConstants {
    /// min over i != j of min(|r_i - r_j|, |r_i^2 - r_j^2|^{1/2})
    pub beta: f64,
    /// max r_i
    pub gamma_proof: f64,
    /// (1 + max r_i) / min r_i
    pub gamma_star: f64,
}

pub fn separation_constants(radii: &[f64]) -> Result<SeparationConstants> {
    if radii.is_empty() || radii.iter().any(|r| !(*r > 0.0) || !r.is_finite()) {
        return Err(Error::InvalidParameter("radii must be positive".into()));
    }
    let mut beta = f64::INFINITY;
    for i in 0..radii.len() {
        for j in i + 1..radii.len() {
            let (a, b) = (radii[i], radii[j]);
            let d2 = (a * a - b * b).abs();
            if d2 == 0.0 {
                return Err(Error::InvariantViolation(format!(
                    "r_{} and r_{} have equal squares",
                    i + 1,
                    j + 1
                )));
            }
            beta = beta.min((a - b).abs().min(d2.sqrt()));
        }
    }
    let max = radii.iter().copied().fold(0.0, f64::max);
    let min = radii.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(SeparationConstants {
        beta,
        gamma_proof: max,
        gamma_star: (1.0 + max) / min,
    })
}

/// Label k in 1..=m+2 of the region Omega_k.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RegionLabel(pub usize);

impl fmt::Display for RegionLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Omega_{}", self.0)
    }
}

fn omega_setup(spec: &KernelSpec, z: &GroupPoint) -> Result<(SeparationConstants, f64)> {
    if !spec.is_dilational() {
        return Err(Error::InvariantViolation(
            "the Omega partition is defined for alpha = 0 kernels".into(),
        ));
    }
    spec.check_dim(z)?;
    if z.is_identity() {
        return Err(Error::InvalidParameter(
            "the evaluation point must not be e".into(),
        ));
    }
    Ok((separation_constants(&spec.radii)?, z.koranyi_norm()))
}

/// Membership of y in each of Omega_1..Omega_{m+2}, each predicate evaluated
/// from its own definition.
pub fn omega_memberships(spec: &KernelSpec, z: &GroupPoint, y: &GroupPoint) -> Result<Vec<bool>> {
    let (sep, rz) = omega_setup(spec, z)?;
    spec.check_dim(y)?;
    let near: Vec<bool> = (0..spec.m())
        .map(|j| y.dist(&spec.singular_point(j, z)) < 0.5 * sep.beta * rz)
        .collect();
    let none = !near.iter().any(|b| *b);
    let inner = y.koranyi_norm() <= (1.0 + sep.gamma_proof) * rz;
    let mut out = near;
    out.push(none && inner);
    out.push(none && !inner);
    Ok(out)
}

/// The region of y relative to the evaluation point z.
pub fn omega_partition(spec: &KernelSpec, z: &GroupPoint, y: &GroupPoint) -> Result<RegionLabel> {
    let flags = omega_memberships(spec, z, y)?;
    let hits: Vec<usize> = flags
        .iter()
        .enumerate()
        .filter(|(_, b)| **b)
        .map(|(i, _)| i + 1)
        .collect();
    match hits.as_slice() {
        [k] => Ok(RegionLabel(*k)),
        _ => Err(Error::InvariantViolation(format!(
            "y = {y} lies in regions {hits:?}"
        ))),
    }
}

/// The ball Omega_j = B_{beta rho(z) / 2}((r_j x, r_j^2 t)), j 0-based.
pub fn omega_ball(spec: &KernelSpec, z: &GroupPoint, j: usize) -> Result<KoranyiBall> {
    let (sep, rz) = omega_setup(spec, z)?;
    KoranyiBall::new(spec.singular_point(j, z), 0.5 * sep.beta * rz)
}

/// (rho((r_i x, r_i^2 t)^{-1} (r_j x, r_j^2 t)), closed form
/// (|r_j - r_i|^4 |x|^4 + 16 (r_j^2 - r_i^2)^2 t^2)^{1/4}).
pub fn omega_separation(ri: f64, rj: f64, z: &GroupPoint) -> (f64, f64) {
    let a = z.dilate_unchecked(ri);
    let b = z.dilate_unchecked(rj);
    let x2: f64 = z.x().iter().map(|v| v * v).sum();
    let closed = ((rj - ri).powi(4) * x2 * x2 + 16.0 * (rj * rj - ri * ri).powi(2) * z.t() * z.t())
        .powf(0.25);
    (a.dist(&b), closed)
}

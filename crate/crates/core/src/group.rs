//! Heisenberg group arithmetic and Koranyi geometry.

use std::fmt;
use std::ops::Mul;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use smallvec::SmallVec;

use crate::error::{Error, Result};

pub type Coords = SmallVec<[f64; 4]>;

/// Absolute tolerance on matrix entries when validating rotations.
pub const MATRIX_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "usize", into = "usize")]
pub struct Dimension {
    n: usize,
}

impl Dimension {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParameter("n must be at least 1".into()));
        }
        Ok(Dimension { n })
    }

    pub fn n(self) -> usize {
        self.n
    }

    /// Homogeneous dimension 2n+2.
    pub fn q(self) -> usize {
        2 * self.n + 2
    }

    pub fn qf(self) -> f64 {
        self.q() as f64
    }

    /// Number of horizontal coordinates, 2n.
    pub fn horizontal(self) -> usize {
        2 * self.n
    }

    /// Number of coordinates, 2n+1.
    pub fn coords(self) -> usize {
        2 * self.n + 1
    }
}

impl TryFrom<usize> for Dimension {
    type Error = Error;
    fn try_from(n: usize) -> Result<Self> {
        Dimension::new(n)
    }
}

impl From<Dimension> for usize {
    fn from(d: Dimension) -> usize {
        d.n
    }
}

impl fmt::Display for Dimension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "H^{}", self.n)
    }
}

/// The form x^T J y with J = 1/2 [[0, -I], [I, 0]].
#[inline]
pub fn symplectic_form(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() / 2;
    let mut acc = 0.0;
    for i in 0..n {
        acc += x[i + n] * y[i] - x[i] * y[i + n];
    }
    0.5 * acc
}

/// The matrix J as a dense 2n x 2n matrix.
pub fn symplectic_matrix(dim: Dimension) -> DMatrix<f64> {
    let n = dim.n();
    let mut j = DMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        j[(i, i + n)] = -0.5;
        j[(i + n, i)] = 0.5;
    }
    j
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupPoint {
    x: Coords,
    t: f64,
}

impl GroupPoint {
    pub fn new(x: &[f64], t: f64) -> Result<Self> {
        if x.is_empty() || x.len() % 2 != 0 {
            return Err(Error::InvalidParameter(format!(
                "horizontal part must have even positive length, got {}",
                x.len()
            )));
        }
        if !t.is_finite() || x.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("coordinates must be finite".into()));
        }
        Ok(GroupPoint {
            x: Coords::from_slice(x),
            t,
        })
    }

    /// Builds a point from the 2n+1 coordinates (x_1, ..., x_2n, t).
    pub fn from_coords(c: &[f64]) -> Result<Self> {
        match c.split_last() {
            Some((t, x)) => GroupPoint::new(x, *t),
            None => Err(Error::InvalidParameter("empty coordinate list".into())),
        }
    }

    pub(crate) fn raw(x: Coords, t: f64) -> Self {
        GroupPoint { x, t }
    }

    pub fn identity(dim: Dimension) -> Self {
        GroupPoint {
            x: SmallVec::from_elem(0.0, dim.horizontal()),
            t: 0.0,
        }
    }

    pub fn dim(&self) -> Dimension {
        Dimension {
            n: self.x.len() / 2,
        }
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    /// Coordinate k in 0..2n+1, with index 2n being t.
    pub fn coord(&self, k: usize) -> f64 {
        if k < self.x.len() {
            self.x[k]
        } else {
            self.t
        }
    }

    pub fn coords(&self) -> Vec<f64> {
        let mut v = self.x.to_vec();
        v.push(self.t);
        v
    }

    pub fn is_identity(&self) -> bool {
        self.t == 0.0 && self.x.iter().all(|v| *v == 0.0)
    }

    fn check(&self, other: &GroupPoint) -> Result<()> {
        if self.x.len() != other.x.len() {
            return Err(Error::DimensionMismatch {
                expected: self.x.len() / 2,
                found: other.x.len() / 2,
            });
        }
        Ok(())
    }

    /// Group product (x+y, t+s+x^T J y).
    pub fn mul(&self, other: &GroupPoint) -> Result<GroupPoint> {
        self.check(other)?;
        Ok(self.mul_unchecked(other))
    }

    #[inline]
    pub(crate) fn mul_unchecked(&self, other: &GroupPoint) -> GroupPoint {
        debug_assert_eq!(self.x.len(), other.x.len());
        let x = self
            .x
            .iter()
            .zip(other.x.iter())
            .map(|(a, b)| a + b)
            .collect();
        GroupPoint {
            x,
            t: self.t + other.t + symplectic_form(&self.x, &other.x),
        }
    }

    pub fn inv(&self) -> GroupPoint {
        GroupPoint {
            x: self.x.iter().map(|v| -v).collect(),
            t: -self.t,
        }
    }

    /// Left-translated difference a^{-1} b.
    pub fn diff(&self, other: &GroupPoint) -> Result<GroupPoint> {
        self.check(other)?;
        Ok(self.inv().mul_unchecked(other))
    }

    /// Koranyi distance rho(a^{-1} b) without allocating.
    #[inline]
    pub fn dist(&self, other: &GroupPoint) -> f64 {
        self.dist4(other).sqrt().sqrt()
    }

    /// Fourth power of the Koranyi distance rho(a^{-1} b).
    #[inline]
    pub fn dist4(&self, other: &GroupPoint) -> f64 {
        debug_assert_eq!(self.x.len(), other.x.len());
        let mut r2 = 0.0;
        for (a, b) in self.x.iter().zip(other.x.iter()) {
            r2 += (b - a) * (b - a);
        }
        let s = other.t - self.t - symplectic_form(&self.x, &other.x);
        r2 * r2 + 16.0 * s * s
    }

    pub fn dilate(&self, r: f64) -> Result<GroupPoint> {
        if !(r > 0.0) || !r.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "dilation factor must be positive and finite, got {r}"
            )));
        }
        Ok(self.dilate_unchecked(r))
    }

    #[inline]
    pub(crate) fn dilate_unchecked(&self, r: f64) -> GroupPoint {
        GroupPoint {
            x: self.x.iter().map(|v| r * v).collect(),
            t: r * r * self.t,
        }
    }

    pub fn rotate(&self, a: &RotationMatrix) -> Result<GroupPoint> {
        if a.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim().n(),
                found: a.dim().n(),
            });
        }
        Ok(GroupPoint {
            x: a.apply(&self.x),
            t: self.t,
        })
    }

    /// |x|^4 + 16 t^2.
    #[inline]
    pub fn norm4(&self) -> f64 {
        let r2: f64 = self.x.iter().map(|v| v * v).sum();
        r2 * r2 + 16.0 * self.t * self.t
    }

    pub fn koranyi_norm(&self) -> f64 {
        self.norm4().sqrt().sqrt()
    }

    pub fn euclidean_x_norm(&self) -> f64 {
        self.x.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.t.is_finite() && self.x.iter().all(|v| v.is_finite())
    }
}

impl Mul for &GroupPoint {
    type Output = GroupPoint;

    /// Panics on dimension mismatch; use [`GroupPoint::mul`] for the fallible form.
    fn mul(self, rhs: &GroupPoint) -> GroupPoint {
        assert_eq!(
            self.x.len(),
            rhs.x.len(),
            "dimension mismatch in group product"
        );
        self.mul_unchecked(rhs)
    }
}

impl fmt::Display for GroupPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "((")?;
        for (i, v) in self.x.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{v}")?;
        }
        write!(f, "),{})", self.t)
    }
}

/// An element of Sp(2n, R) ∩ SO(2n).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct RotationMatrix {
    entries: DMatrix<f64>,
}

impl RotationMatrix {
    pub fn new(entries: DMatrix<f64>) -> Result<Self> {
        let k = entries.nrows();
        if k == 0 || k % 2 != 0 || entries.ncols() != k {
            return Err(Error::InvalidMatrix(format!(
                "expected a square matrix of even size, got {}x{}",
                entries.nrows(),
                entries.ncols()
            )));
        }
        if entries.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidMatrix("non-finite entry".into()));
        }
        let dim = Dimension::new(k / 2)?;
        let ortho = entries.transpose() * &entries - DMatrix::identity(k, k);
        if ortho.amax() > MATRIX_TOL {
            return Err(Error::InvalidMatrix(format!(
                "A^T A deviates from the identity by {:e}",
                ortho.amax()
            )));
        }
        let det = entries.determinant();
        if (det - 1.0).abs() > MATRIX_TOL {
            return Err(Error::InvalidMatrix(format!("det(A) = {det}, expected 1")));
        }
        let j = symplectic_matrix(dim);
        let sym = entries.transpose() * &j * &entries - &j;
        if sym.amax() > MATRIX_TOL {
            return Err(Error::InvalidMatrix(format!(
                "A^T J A deviates from J by {:e}",
                sym.amax()
            )));
        }
        Ok(RotationMatrix { entries })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let k = rows.len();
        if rows.iter().any(|r| r.len() != k) {
            return Err(Error::InvalidMatrix("rows must have equal length".into()));
        }
        let flat: Vec<f64> = rows.iter().flatten().copied().collect();
        RotationMatrix::new(DMatrix::from_row_slice(k, k, &flat))
    }

    pub fn identity(dim: Dimension) -> Self {
        let k = dim.horizontal();
        RotationMatrix {
            entries: DMatrix::identity(k, k),
        }
    }

    /// Rotation by `angles[i]` in each (x_i, x_{i+n}) plane.
    pub fn block_rotations(angles: &[f64]) -> Result<Self> {
        let dim = Dimension::new(angles.len())?;
        let n = dim.n();
        let mut m = DMatrix::zeros(2 * n, 2 * n);
        for (i, a) in angles.iter().enumerate() {
            let (s, c) = a.sin_cos();
            m[(i, i)] = c;
            m[(i, i + n)] = -s;
            m[(i + n, i)] = s;
            m[(i + n, i + n)] = c;
        }
        RotationMatrix::new(m)
    }

    /// Planar rotation for n = 1.
    pub fn planar(angle: f64) -> Self {
        RotationMatrix::block_rotations(&[angle]).expect("planar rotations are valid")
    }

    pub fn dim(&self) -> Dimension {
        Dimension {
            n: self.entries.nrows() / 2,
        }
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn inverse(&self) -> RotationMatrix {
        RotationMatrix {
            entries: self.entries.transpose(),
        }
    }

    pub fn compose(&self, other: &RotationMatrix) -> RotationMatrix {
        RotationMatrix {
            entries: &self.entries * &other.entries,
        }
    }

    pub fn is_identity(&self) -> bool {
        let k = self.entries.nrows();
        (&self.entries - DMatrix::identity(k, k)).amax() <= MATRIX_TOL
    }

    #[inline]
    pub(crate) fn apply(&self, x: &[f64]) -> Coords {
        let k = x.len();
        (0..k)
            .map(|i| (0..k).map(|j| self.entries[(i, j)] * x[j]).sum())
            .collect()
    }
}

impl TryFrom<Vec<Vec<f64>>> for RotationMatrix {
    type Error = Error;
    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self> {
        RotationMatrix::from_rows(&rows)
    }
}

impl From<RotationMatrix> for Vec<Vec<f64>> {
    fn from(a: RotationMatrix) -> Self {
        a.entries
            .row_iter()
            .map(|r| r.iter().copied().collect())
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KoranyiBall {
    center: GroupPoint,
    radius: f64,
}

impl KoranyiBall {
    pub fn new(center: GroupPoint, radius: f64) -> Result<Self> {
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "ball radius must be positive and finite, got {radius}"
            )));
        }
        Ok(KoranyiBall { center, radius })
    }

    pub fn centered(dim: Dimension, radius: f64) -> Result<Self> {
        KoranyiBall::new(GroupPoint::identity(dim), radius)
    }

    pub fn center(&self) -> &GroupPoint {
        &self.center
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn dim(&self) -> Dimension {
        self.center.dim()
    }

    /// Strict membership rho(center^{-1} z) < radius.
    #[inline]
    pub fn contains(&self, z: &GroupPoint) -> bool {
        self.center.dist4(z) < self.radius.powi(4)
    }

    /// Exact volume c0 * radius^Q.
    pub fn volume(&self) -> f64 {
        crate::integrate::unit_ball_volume_exact(self.dim())
            * self.radius.powi(self.dim().q() as i32)
    }

    pub fn expand(&self, factor: f64) -> Result<KoranyiBall> {
        KoranyiBall::new(self.center.clone(), self.radius * factor)
    }

    /// The image of the ball under a left translation by `z`.
    pub fn translate(&self, z: &GroupPoint) -> Result<KoranyiBall> {
        KoranyiBall::new(z.mul(&self.center)?, self.radius)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(x: &[f64], t: f64) -> GroupPoint {
        GroupPoint::new(x, t).unwrap()
    }

    #[test]
    fn product_examples() {
        let a = p(&[1.0, 0.0], 0.0);
        let b = p(&[0.0, 1.0], 0.0);
        assert_eq!(a.mul(&b).unwrap(), p(&[1.0, 1.0], -0.5));
        let e = GroupPoint::identity(a.dim());
        assert_eq!(a.mul(&e).unwrap(), a);
        let c = p(&[1.0, 2.0], 3.0);
        assert_eq!(c.mul(&p(&[-1.0, -2.0], -3.0)).unwrap(), p(&[0.0, 0.0], 0.0));
        assert_eq!(c.inv(), p(&[-1.0, -2.0], -3.0));
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let a = p(&[1.0, 0.0], 0.0);
        let b = p(&[0.0, 1.0, 0.0, 0.0], 0.0);
        assert!(matches!(a.mul(&b), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn dilation_and_norm_examples() {
        assert_eq!(
            p(&[1.0, 0.0], 1.0).dilate(2.0).unwrap(),
            p(&[2.0, 0.0], 4.0)
        );
        assert!(p(&[1.0, 0.0], 1.0).dilate(0.0).is_err());
        assert!((p(&[0.0, 0.0], 1.0).koranyi_norm() - 2.0).abs() < 1e-15);
        assert_eq!(p(&[1.0, 0.0], 0.0).koranyi_norm(), 1.0);
    }

    #[test]
    fn rotation_examples() {
        let a = RotationMatrix::from_rows(&[vec![0.0, -1.0], vec![1.0, 0.0]]).unwrap();
        assert_eq!(p(&[1.0, 0.0], 5.0).rotate(&a).unwrap(), p(&[0.0, 1.0], 5.0));
        let reflection = RotationMatrix::from_rows(&[vec![1.0, 0.0], vec![0.0, -1.0]]);
        assert!(matches!(reflection, Err(Error::InvalidMatrix(_))));
        let shear = RotationMatrix::from_rows(&[vec![1.0, 1.0], vec![0.0, 1.0]]);
        assert!(shear.is_err());
    }

    #[test]
    fn non_symplectic_rotation_rejected() {
        // rotation mixing x_1 and x_2 for n = 2 is orthogonal but not symplectic
        let (s, c) = 0.3f64.sin_cos();
        let rows = vec![
            vec![c, -s, 0.0, 0.0],
            vec![s, c, 0.0, 0.0],
            vec![0.0, 0.0, 1.0, 0.0],
            vec![0.0, 0.0, 0.0, 1.0],
        ];
        assert!(RotationMatrix::from_rows(&rows).is_err());
        assert!(RotationMatrix::block_rotations(&[0.3, -1.2]).is_ok());
    }

    #[test]
    fn ball_membership_is_strict() {
        let b = KoranyiBall::centered(Dimension::new(1).unwrap(), 1.0).unwrap();
        assert!(!b.contains(&p(&[1.0, 0.0], 0.0)));
        assert!(b.contains(&p(&[0.999, 0.0], 0.0)));
        assert!(KoranyiBall::centered(Dimension::new(1).unwrap(), 0.0).is_err());
    }

    #[test]
    fn serde_roundtrip() {
        let a = RotationMatrix::planar(0.7);
        let s = serde_json::to_string(&a).unwrap();
        let b: RotationMatrix = serde_json::from_str(&s).unwrap();
        assert_eq!(a, b);
        let z = p(&[0.1, -0.2], 0.3);
        let s = serde_json::to_string(&z).unwrap();
        assert_eq!(serde_json::from_str::<GroupPoint>(&s).unwrap(), z);
    }
}

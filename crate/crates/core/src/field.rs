//! Real fields on the Heisenberg group with declared support.

use crate::error::{Error, Result};
use crate::group::{Dimension, GroupPoint, KoranyiBall};

/// Integration region: a ball, a finite union of balls, or the complement of
/// a (possibly empty) union for integrands decaying like rho^{-decay}.
#[derive(Clone, Debug, PartialEq)]
pub enum Region {
    Ball(KoranyiBall),
    Union(Vec<KoranyiBall>),
    Exterior {
        dim: Dimension,
        balls: Vec<KoranyiBall>,
        decay: f64,
    },
}

impl Region {
    pub fn whole(dim: Dimension, decay: f64) -> Self {
        Region::Exterior {
            dim,
            balls: Vec::new(),
            decay,
        }
    }

    pub fn dim(&self) -> Dimension {
        match self {
            Region::Ball(b) => b.dim(),
            Region::Union(bs) => bs[0].dim(),
            Region::Exterior { dim, .. } => *dim,
        }
    }

    pub fn contains(&self, z: &GroupPoint) -> bool {
        match self {
            Region::Ball(b) => b.contains(z),
            Region::Union(bs) => bs.iter().any(|b| b.contains(z)),
            Region::Exterior { balls, .. } => !balls.iter().any(|b| b.contains(z)),
        }
    }

    pub fn is_bounded(&self) -> bool {
        !matches!(self, Region::Exterior { .. })
    }

    pub fn balls(&self) -> &[KoranyiBall] {
        match self {
            Region::Ball(b) => std::slice::from_ref(b),
            Region::Union(bs) => bs,
            Region::Exterior { balls, .. } => balls,
        }
    }
}

pub trait Field: Sync {
    fn dim(&self) -> Dimension;
    fn eval(&self, z: &GroupPoint) -> f64;
    /// A region outside of which the field vanishes.
    fn support(&self) -> Region;
    /// Radii, as fractions of the support radius, where the field is not smooth.
    fn radial_breaks(&self) -> Vec<f64> {
        Vec::new()
    }
}

impl<T: Field + ?Sized> Field for &T {
    fn dim(&self) -> Dimension {
        (**self).dim()
    }
    fn eval(&self, z: &GroupPoint) -> f64 {
        (**self).eval(z)
    }
    fn support(&self) -> Region {
        (**self).support()
    }
    fn radial_breaks(&self) -> Vec<f64> {
        (**self).radial_breaks()
    }
}

/// A closure with a declared support.
pub struct FnField<F> {
    dim: Dimension,
    f: F,
    support: Region,
    breaks: Vec<f64>,
}

impl<F: Fn(&GroupPoint) -> f64 + Sync> FnField<F> {
    pub fn new(support: Region, f: F) -> Self {
        FnField {
            dim: support.dim(),
            f,
            support,
            breaks: Vec::new(),
        }
    }

    pub fn with_breaks(mut self, breaks: Vec<f64>) -> Self {
        self.breaks = breaks;
        self
    }
}

impl<F: Fn(&GroupPoint) -> f64 + Sync> Field for FnField<F> {
    fn dim(&self) -> Dimension {
        self.dim
    }
    fn eval(&self, z: &GroupPoint) -> f64 {
        (self.f)(z)
    }
    fn support(&self) -> Region {
        self.support.clone()
    }
    fn radial_breaks(&self) -> Vec<f64> {
        self.breaks.clone()
    }
}

/// z -> f(delta_r z).
#[derive(Clone, Debug, PartialEq)]
pub struct Dilated<F> {
    inner: F,
    r: f64,
}

impl<F: Field> Dilated<F> {
    pub fn new(inner: F, r: f64) -> Result<Self> {
        if !(r > 0.0) || !r.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "dilation factor must be positive, got {r}"
            )));
        }
        Ok(Dilated { inner, r })
    }

    pub fn inner(&self) -> &F {
        &self.inner
    }

    pub fn factor(&self) -> f64 {
        self.r
    }
}

impl<F: Field> Field for Dilated<F> {
    fn dim(&self) -> Dimension {
        self.inner.dim()
    }
    fn eval(&self, z: &GroupPoint) -> f64 {
        self.inner.eval(&z.dilate_unchecked(self.r))
    }
    fn support(&self) -> Region {
        let shrink = |b: &KoranyiBall| {
            KoranyiBall::new(
                b.center().dilate_unchecked(1.0 / self.r),
                b.radius() / self.r,
            )
            .expect("positive radius")
        };
        match self.inner.support() {
            Region::Ball(b) => Region::Ball(shrink(&b)),
            Region::Union(bs) => Region::Union(bs.iter().map(shrink).collect()),
            Region::Exterior { dim, balls, decay } => Region::Exterior {
                dim,
                balls: balls.iter().map(shrink).collect(),
                decay,
            },
        }
    }
    fn radial_breaks(&self) -> Vec<f64> {
        self.inner.radial_breaks()
    }
}

/// sum_k c_k chi_{B_k}.
#[derive(Clone, Debug, PartialEq)]
pub struct IndicatorSum {
    terms: Vec<(KoranyiBall, f64)>,
}

impl IndicatorSum {
    pub fn new(terms: Vec<(KoranyiBall, f64)>) -> Result<Self> {
        let first = terms
            .first()
            .ok_or_else(|| Error::InvalidParameter("empty indicator sum".into()))?
            .0
            .dim();
        if let Some((b, _)) = terms.iter().find(|(b, _)| b.dim() != first) {
            return Err(Error::DimensionMismatch {
                expected: first.n(),
                found: b.dim().n(),
            });
        }
        Ok(IndicatorSum { terms })
    }

    pub fn ball(ball: KoranyiBall) -> Self {
        IndicatorSum {
            terms: vec![(ball, 1.0)],
        }
    }

    pub fn scaled(&self, c: f64) -> Self {
        IndicatorSum {
            terms: self.terms.iter().map(|(b, v)| (b.clone(), v * c)).collect(),
        }
    }

    pub fn terms(&self) -> &[(KoranyiBall, f64)] {
        &self.terms
    }
}

impl Field for IndicatorSum {
    fn dim(&self) -> Dimension {
        self.terms[0].0.dim()
    }
    fn eval(&self, z: &GroupPoint) -> f64 {
        self.terms
            .iter()
            .filter(|(b, _)| b.contains(z))
            .map(|(_, c)| c)
            .sum()
    }
    fn support(&self) -> Region {
        if self.terms.len() == 1 {
            Region::Ball(self.terms[0].0.clone())
        } else {
            Region::Union(self.terms.iter().map(|(b, _)| b.clone()).collect())
        }
    }
}

/// A smooth bump c * (1 - (rho(center^{-1} z)/radius)^4)^k inside the ball.
#[derive(Clone, Debug, PartialEq)]
pub struct Bump {
    pub ball: KoranyiBall,
    pub amplitude: f64,
    pub power: i32,
}

impl Bump {
    pub fn new(ball: KoranyiBall, amplitude: f64, power: i32) -> Self {
        Bump {
            ball,
            amplitude,
            power,
        }
    }
}

impl Field for Bump {
    fn dim(&self) -> Dimension {
        self.ball.dim()
    }
    fn eval(&self, z: &GroupPoint) -> f64 {
        let u = self.ball.center().dist4(z) / self.ball.radius().powi(4);
        if u < 1.0 {
            self.amplitude * (1.0 - u).powi(self.power)
        } else {
            0.0
        }
    }
    fn support(&self) -> Region {
        Region::Ball(self.ball.clone())
    }
}

/// Finite sum of bumps.
#[derive(Clone, Debug, PartialEq)]
pub struct BumpSum {
    pub bumps: Vec<Bump>,
}

impl Field for BumpSum {
    fn dim(&self) -> Dimension {
        self.bumps[0].dim()
    }
    fn eval(&self, z: &GroupPoint) -> f64 {
        self.bumps.iter().map(|b| b.eval(z)).sum()
    }
    fn support(&self) -> Region {
        if self.bumps.len() == 1 {
            Region::Ball(self.bumps[0].ball.clone())
        } else {
            Region::Union(self.bumps.iter().map(|b| b.ball.clone()).collect())
        }
    }
}

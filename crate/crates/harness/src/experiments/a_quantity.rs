use std::f64::consts::PI;

use hlab_core::varexp::{b_star_comparison, BallFamily, BallTransform, ExponentFunction};
use hlab_core::RotationMatrix;
use rand::Rng;
use rayon::prelude::*;
use serde::Deserialize;

use super::{random_ball, relative_change, Context};
use crate::error::Result;
use crate::report::{ExperimentReport, Relation};
use crate::svg::Plot;

#[derive(Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
struct Params {
    max_balls: usize,
    gamma: f64,
    center_range: f64,
    radius_range: (f64, f64),
    weight_range: (f64, f64),
}

fn random_family(
    ctx: &Context,
    params: &Params,
    stream: u64,
) -> Result<(BallFamily, RotationMatrix)> {
    let dim = ctx.dim()?;
    let mut rng = ctx.rng(stream);
    let count = rng.random_range(1..=params.max_balls);
    let mut balls = Vec::with_capacity(count);
    let mut weights = Vec::with_capacity(count);
    for _ in 0..count {
        balls.push(random_ball(
            dim,
            params.center_range,
            params.radius_range,
            &mut rng,
        )?);
        weights.push(rng.random_range(params.weight_range.0..params.weight_range.1));
    }
    let angles: Vec<f64> = (0..dim.n()).map(|_| rng.random_range(-PI..PI)).collect();
    Ok((
        BallFamily::new(balls, weights)?,
        RotationMatrix::block_rotations(&angles)?,
    ))
}

pub fn run(ctx: &Context) -> Result<ExperimentReport> {
    let params: Params = ctx.config.params()?;
    let dim = ctx.dim()?;
    let p = ctx.config.exponent_function()?;
    let spec = ctx.spec();
    let base = ctx.samples("families")?;
    let mut report = ctx.report(&["family", "balls", "a_original", "a_transformed", "ratio"]);

    // The corpus is drawn once at twice the base size; the first `base`
    // families form the smaller corpus.
    let rows: Vec<(usize, f64, f64, f64)> = (0..2 * base)
        .into_par_iter()
        .map(|i| {
            let (family, rot) = random_family(ctx, &params, i as u64)?;
            let rep = b_star_comparison(
                &family,
                &p,
                &BallTransform::Rotation(rot),
                params.gamma,
                &spec,
            )?;
            Ok((
                family.balls().len(),
                rep.a_original,
                rep.a_transformed,
                rep.ratio,
            ))
        })
        .collect::<Result<_>>()?;
    for (i, (n, a, b, r)) in rows.iter().enumerate() {
        report.row(vec![
            i.into(),
            (*n).into(),
            (*a).into(),
            (*b).into(),
            (*r).into(),
        ]);
    }
    let max_of = |k: usize| rows[..k].iter().map(|r| r.3).fold(0.0, f64::max);
    let (small, large) = (max_of(base), max_of(2 * base));
    report.constant("max-ratio", large, (large - small).abs());
    report.check(
        "C12",
        "max-ratio-is-finite",
        large.is_finite() as u8 as f64,
        Relation::Equals,
        1.0,
    );
    report.check(
        "C12",
        "max-ratio-doubling-change",
        relative_change(small, large),
        Relation::AtMost,
        ctx.threshold("doubling-change")?,
    );
    report.plots.push(
        Plot::new("aggregate ratio per family", "number of balls", "ratio")
            .scatter("families", rows.iter().map(|r| (r.0 as f64, r.3)).collect()),
    );

    // Trivial cases: the identity with gamma = 1, and a single ball with a
    // constant exponent, both have ratio 1.
    let exact = ctx.threshold("trivial-ratio-error")?;
    let (family, _) = random_family(ctx, &params, 1_000_000)?;
    let id = b_star_comparison(&family, &p, &BallTransform::Identity, 1.0, &spec)?;
    report.check(
        "X-b-star-trivial",
        "identity-ratio-error",
        (id.ratio - 1.0).abs(),
        Relation::AtMost,
        exact,
    );
    let single = BallFamily::new(vec![family.balls()[0].clone()], vec![1.0])?;
    let constant = ExponentFunction::constant(dim, 1.5)?;
    let one = b_star_comparison(&single, &constant, &BallTransform::Identity, 2.0, &spec)?;
    report.check(
        "X-b-star-trivial",
        "single-ball-ratio-error",
        (one.ratio - 1.0).abs(),
        Relation::AtMost,
        exact,
    );
    Ok(report)
}

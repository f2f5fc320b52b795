use std::f64::consts::PI;
use std::time::Instant;

use hlab_core::integrate::{
    haar_integrate, sphere_measure, unit_ball_volume, unit_ball_volume_exact,
};
use hlab_core::operators::loglog_slope;
use hlab_core::{
    GroupPoint, IntegrationMethod, IntegrationSpec, KoranyiBall, Region, RotationMatrix,
};
use rand::Rng;
use rayon::prelude::*;
use serde::Deserialize;

use super::{box_point, Context};
use crate::error::Result;
use crate::report::{ExperimentReport, Relation};
use crate::svg::Plot;

#[derive(Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
struct AxiomParams {
    coordinate_range: f64,
    dilation_range: (f64, f64),
}

const IDENTITIES: [&str; 9] = [
    "associativity",
    "identity-element",
    "inverse-formula",
    "left-inverse",
    "norm-homogeneity",
    "norm-of-inverse",
    "rotation-invariance",
    "rotation-automorphism",
    "dilation-automorphism",
];

fn coord_error(a: &GroupPoint, b: &GroupPoint) -> f64 {
    a.coords()
        .iter()
        .zip(b.coords())
        .map(|(u, v)| (u - v).abs())
        .fold(0.0, f64::max)
}

/// Per-identity absolute errors for one random triple.
fn axiom_errors(
    dim: hlab_core::Dimension,
    params: &AxiomParams,
    rng: &mut impl Rng,
) -> Result<[f64; 9]> {
    let h = params.coordinate_range;
    let (a, b, c) = (
        box_point(dim, h, rng),
        box_point(dim, h, rng),
        box_point(dim, h, rng),
    );
    let e = GroupPoint::identity(dim);
    let r = rng.random_range(params.dilation_range.0..params.dilation_range.1);
    let angles: Vec<f64> = (0..dim.n()).map(|_| rng.random_range(-PI..PI)).collect();
    let rot = RotationMatrix::block_rotations(&angles)?;

    let neg = GroupPoint::new(&a.x().iter().map(|v| -v).collect::<Vec<_>>(), -a.t())?;
    let ra = a.koranyi_norm();
    Ok([
        coord_error(&a.mul(&b)?.mul(&c)?, &a.mul(&b.mul(&c)?)?),
        coord_error(&e.mul(&a)?, &a).max(coord_error(&a.mul(&e)?, &a)),
        coord_error(&a.mul(&neg)?, &e).max(coord_error(&a.inv(), &neg)),
        coord_error(&a.inv().mul(&a)?, &e),
        (a.dilate(r)?.koranyi_norm() - r * ra).abs(),
        (a.inv().koranyi_norm() - ra).abs(),
        (a.rotate(&rot)?.koranyi_norm() - ra).abs(),
        coord_error(
            &a.mul(&b)?.rotate(&rot)?,
            &a.rotate(&rot)?.mul(&b.rotate(&rot)?)?,
        ),
        coord_error(&a.mul(&b)?.dilate(r)?, &a.dilate(r)?.mul(&b.dilate(r)?)?),
    ])
}

pub fn group_axioms(ctx: &Context) -> Result<ExperimentReport> {
    let start = Instant::now();
    let params: AxiomParams = ctx.config.params()?;
    let dim = ctx.dim()?;
    let count = ctx.samples("points")?;
    let tol = ctx.threshold("max-abs-error")?;
    let budget = ctx.threshold("runtime-seconds")?;

    let chunk = 1000;
    let chunks = count.div_ceil(chunk);
    let worst: Vec<[f64; 9]> = (0..chunks)
        .into_par_iter()
        .map(|k| {
            let mut rng = ctx.rng(k as u64);
            let mut worst = [0.0f64; 9];
            for _ in 0..chunk.min(count - k * chunk) {
                let errs = axiom_errors(dim, &params, &mut rng)?;
                for (w, e) in worst.iter_mut().zip(errs) {
                    *w = w.max(e);
                }
            }
            Ok(worst)
        })
        .collect::<Result<_>>()?;
    let mut total = [0.0f64; 9];
    for w in &worst {
        for (t, e) in total.iter_mut().zip(w) {
            *t = t.max(*e);
        }
    }

    let mut report = ctx.report(&["identity", "samples", "max_abs_error", "pass"]);
    for (name, err) in IDENTITIES.iter().zip(total) {
        let pass = report.check("C1", name, err, Relation::Below, tol);
        report.row(vec![(*name).into(), count.into(), err.into(), pass.into()]);
    }
    report.plots.push(
        Plot::new("largest absolute error per identity", "identity", "error")
            .log_y()
            .scatter(
                "max |error|",
                total
                    .iter()
                    .enumerate()
                    .map(|(i, e)| ((i + 1) as f64, *e))
                    .collect(),
            ),
    );
    let elapsed = start.elapsed().as_secs_f64();
    report.check("C1", "runtime-seconds", elapsed, Relation::Below, budget);
    Ok(report)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
struct KoranyiParams {
    center: Vec<f64>,
    radii: Vec<f64>,
    mc_tolerance: f64,
    coordinate_range: f64,
}

pub fn koranyi_props(ctx: &Context) -> Result<ExperimentReport> {
    let start = Instant::now();
    let params: KoranyiParams = ctx.config.params()?;
    let dim = ctx.dim()?;
    let q = dim.qf();
    let rel_tol = ctx.threshold("c0-relative-error")?;
    let slope_tol = ctx.threshold("power-law-error")?;
    let sigmas = ctx.threshold("mc-sigmas")?;
    let budget = ctx.threshold("runtime-seconds")?;
    let mc_budget = ctx.samples("mc-evaluations")? as u64;
    let pairs = ctx.samples("triangle")?;

    let mut report = ctx.report(&[
        "quantity",
        "method",
        "radius",
        "value",
        "error",
        "reference",
    ]);
    // n = 1: the hand reduction pi^2 / 8; otherwise the library closed form.
    let exact = if dim.n() == 1 {
        PI * PI / 8.0
    } else {
        unit_ball_volume_exact(dim)
    };
    let grid = unit_ball_volume(dim, &ctx.spec())?;
    let mc_spec = IntegrationSpec::new(
        IntegrationMethod::MonteCarlo,
        params.mc_tolerance,
        mc_budget,
        ctx.sub_seed(1),
    )?;
    let mc = unit_ball_volume(dim, &mc_spec)?;
    for (method, est) in [("grid", grid), ("monte-carlo", mc)] {
        report.row(vec![
            "c0".into(),
            method.into(),
            1.0.into(),
            est.value.into(),
            est.error.into(),
            exact.into(),
        ]);
    }
    report.constant("c0", grid.value, grid.error);
    report.constant("c0-monte-carlo", mc.value, mc.error);
    report.check(
        "C2",
        "c0-relative-error",
        (grid.value - exact).abs() / exact,
        Relation::Below,
        rel_tol,
    );
    report.check(
        "X-c0-monte-carlo",
        "mc-deviation-in-sigmas",
        (mc.value - exact).abs() / mc.error.max(f64::MIN_POSITIVE),
        Relation::AtMost,
        sigmas,
    );

    let center = super::point_from(&params.center)?;
    let mut series = Vec::new();
    for (method, spec) in [("grid", ctx.spec()), ("monte-carlo", mc_spec)] {
        let mut vols = Vec::new();
        for (i, r) in params.radii.iter().enumerate() {
            let ball = KoranyiBall::new(center.clone(), *r)?;
            let spec = spec.with_seed(spec.seed.wrapping_add(i as u64));
            let est = haar_integrate(&|_: &GroupPoint| 1.0, &Region::Ball(ball), &[], &spec)?;
            report.row(vec![
                "ball-volume".into(),
                method.into(),
                (*r).into(),
                est.value.into(),
                est.error.into(),
                (exact * r.powf(q)).into(),
            ]);
            vols.push(est.value);
        }
        let slope = loglog_slope(&params.radii, &vols);
        report.constant(&format!("volume-exponent-{method}"), slope, 0.0);
        report.check(
            "C2",
            &format!("volume-exponent-{method}"),
            (slope - q).abs(),
            Relation::Below,
            slope_tol,
        );
        series.push((
            method,
            params.radii.iter().copied().zip(vols).collect::<Vec<_>>(),
        ));
    }
    let mut plot = Plot::new("ball volume against radius", "radius", "volume").log_log();
    for (m, pts) in series {
        plot = plot.scatter(m, pts);
    }
    plot = plot.line(
        "c0 r^Q",
        params
            .radii
            .iter()
            .map(|r| (*r, exact * r.powf(q)))
            .collect(),
    );
    report.plots.push(plot);

    // Quasi-distance: the Koranyi gauge satisfies the triangle inequality.
    let mut rng = ctx.rng(2);
    let mut violations = 0usize;
    let mut asymmetry: f64 = 0.0;
    for _ in 0..pairs {
        let a = box_point(dim, params.coordinate_range, &mut rng);
        let b = box_point(dim, params.coordinate_range, &mut rng);
        let c = box_point(dim, params.coordinate_range, &mut rng);
        let (ab, bc, ac) = (a.dist(&b), b.dist(&c), a.dist(&c));
        if ac > (ab + bc) * (1.0 + 1e-12) {
            violations += 1;
        }
        asymmetry = asymmetry.max((ab - b.dist(&a)).abs());
    }
    report.check(
        "X-triangle",
        "triangle-violations",
        violations as f64,
        Relation::Equals,
        0.0,
    );
    report.check(
        "X-symmetry",
        "distance-asymmetry",
        asymmetry,
        Relation::Below,
        ctx.threshold("symmetry-error")?,
    );
    report.note(format!(
        "sphere measure sigma = Q c0 = {:e}",
        sphere_measure(dim)
    ));
    let elapsed = start.elapsed().as_secs_f64();
    report.check("C2", "runtime-seconds", elapsed, Relation::Below, budget);
    Ok(report)
}

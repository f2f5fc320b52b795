use std::time::Instant;

use hlab_core::atoms::{make_atom, verify_atom};
use hlab_core::integrate::Resolution;
use hlab_core::operators::{expanded_balls, expansion_factor, image_norm, Evaluator, RuleChoice};
use hlab_core::varexp::{check_symmetry, conjugate_exponent, d_p, ExponentSymmetry};
use hlab_core::KoranyiBall;
use rand::Rng;
use rayon::prelude::*;
use serde::Deserialize;

use super::{box_point, random_ball, Context};
use crate::error::Result;
use crate::report::{ExperimentReport, Relation};
use crate::svg::Plot;

#[derive(Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
struct SuiteParams {
    degrees: Vec<u32>,
    p0_range: (f64, f64),
    radius_range: (f64, f64),
    center_range: f64,
}

pub fn atom_suite(ctx: &Context) -> Result<ExperimentReport> {
    let start = Instant::now();
    let params: SuiteParams = ctx.config.params()?;
    let dim = ctx.dim()?;
    let p = ctx.config.exponent_function()?;
    let spec = ctx.spec();
    let per_degree = ctx.samples("atoms-per-degree")?;
    let residual_tol = ctx.threshold("moment-residual")?;
    let mut report = ctx.report(&[
        "degree",
        "trial",
        "radius",
        "p0",
        "support_ok",
        "size_ok",
        "moments_ok",
        "norm_over_bound",
        "moment_residual",
    ]);

    let mut counterexamples_caught = true;
    for &degree in &params.degrees {
        let rows: Vec<_> = (0..per_degree)
            .into_par_iter()
            .map(|i| {
                let mut rng = ctx.rng(((degree as u64) << 32) | i as u64);
                let ball = random_ball(dim, params.center_range, params.radius_range, &mut rng)?;
                let p0 = rng.random_range(params.p0_range.0..params.p0_range.1);
                let atom = make_atom(&ball, &p, p0, degree, rng.random(), &spec)?;
                let rep = verify_atom(&atom, &p, &spec)?;
                Ok((ball.radius(), p0, rep, atom))
            })
            .collect::<Result<_>>()?;
        let mut passed = 0usize;
        let mut worst: f64 = 0.0;
        for (i, (radius, p0, rep, _)) in rows.iter().enumerate() {
            passed += rep.pass as usize;
            worst = worst.max(rep.max_moment_residual);
            report.row(vec![
                degree.into(),
                i.into(),
                (*radius).into(),
                (*p0).into(),
                rep.support_ok.into(),
                rep.size_ok.into(),
                rep.moments_ok.into(),
                (rep.norm_p0 / rep.bound).into(),
                rep.max_moment_residual.into(),
            ]);
        }
        report.check(
            "C5",
            &format!("pass-fraction-degree-{degree}"),
            passed as f64 / per_degree as f64,
            Relation::Equals,
            1.0,
        );
        report.check(
            "C5",
            &format!("moment-residual-degree-{degree}"),
            worst,
            Relation::Below,
            residual_tol,
        );

        // The verifier must reject an oversized copy and a widened support.
        let (_, _, _, atom) = &rows[0];
        let big = verify_atom(&atom.clone().scaled(1.5), &p, &spec)?;
        let wide = verify_atom(
            &atom
                .clone()
                .with_support_radius(1.5 * atom.ball().radius())?,
            &p,
            &spec,
        )?;
        counterexamples_caught &= !big.size_ok && !wide.support_ok;
    }
    report.check(
        "X-atom-counterexamples",
        "rejected",
        counterexamples_caught as u8 as f64,
        Relation::Equals,
        1.0,
    );
    report.check(
        "C5",
        "runtime-seconds",
        start.elapsed().as_secs_f64(),
        Relation::Below,
        ctx.threshold("runtime-seconds")?,
    );
    Ok(report)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
struct UniformParams {
    radii: Vec<f64>,
    center_range: f64,
    /// Draw centers as delta_r of a point in the box, so that every scale
    /// sees the same center-to-radius geometry.
    #[serde(default)]
    centers_scale_with_radius: bool,
    p0: f64,
    degree: u32,
    beta: f64,
    level: usize,
}

pub fn atom_uniform(ctx: &Context) -> Result<ExperimentReport> {
    let params: UniformParams = ctx.config.params()?;
    let dim = ctx.dim()?;
    let kernel = ctx.config.kernel(0)?;
    let p = ctx.config.exponent_function()?;
    let q = conjugate_exponent(&p, kernel.alpha())?;
    let spec = ctx.spec();
    let count = ctx.samples("atoms")?;
    let dp = d_p(&p, dim.n());
    let mut report = ctx.report(&["trial", "radius", "center_norm", "norm_q", "nodes"]);

    let mut sym: f64 = 0.0;
    for (j, a) in kernel.rotations().iter().enumerate() {
        sym = sym.max(check_symmetry(
            &p,
            &ExponentSymmetry::Rotation(a.clone()),
            512,
            ctx.sub_seed(10 + j as u64),
        )?);
    }
    report.check(
        "X-exponent-symmetry",
        "rotation-deviation",
        sym,
        Relation::AtMost,
        ctx.threshold("symmetry-error")?,
    );
    report.check(
        "X-moment-degree",
        "degree-minus-d_p",
        params.degree as f64 - dp as f64,
        Relation::AtLeast,
        0.0,
    );

    // Far field of an atom with D vanishing moments decays like
    // rho^{alpha - Q - (D + 1)}.
    let order = params.degree + 1;
    let decay = dim.qf() + order as f64 - kernel.alpha();
    let factor = expansion_factor(kernel, params.beta, order);
    let res = Resolution::level(params.level);
    let rows: Vec<(f64, f64, f64, usize)> = (0..count)
        .into_par_iter()
        .map(|i| {
            let mut rng = ctx.rng(i as u64);
            let radius = params.radii[i % params.radii.len()];
            let mut center = box_point(dim, params.center_range, &mut rng);
            if params.centers_scale_with_radius {
                center = center.dilate(radius)?;
            }
            let ball = KoranyiBall::new(center, radius)?;
            let atom = make_atom(&ball, &p, params.p0, params.degree, rng.random(), &spec)?;
            let eval = Evaluator::new(
                kernel,
                &atom,
                res,
                spec.tolerance,
                RuleChoice::Fixed(atom.rule()),
            )?;
            let balls = expanded_balls(kernel, &ball, factor)?;
            let norm = image_norm(&eval, &q, &balls, decay, res)?;
            Ok((radius, ball.center().koranyi_norm(), norm.norm, norm.nodes))
        })
        .collect::<Result<_>>()?;
    for (i, (r, c, n, nodes)) in rows.iter().enumerate() {
        report.row(vec![
            i.into(),
            (*r).into(),
            (*c).into(),
            (*n).into(),
            (*nodes).into(),
        ]);
    }
    let mut norms: Vec<f64> = rows.iter().map(|r| r.2).collect();
    norms.sort_by(f64::total_cmp);
    let max = norms[norms.len() - 1];
    let median = if norms.len() % 2 == 1 {
        norms[norms.len() / 2]
    } else {
        0.5 * (norms[norms.len() / 2 - 1] + norms[norms.len() / 2])
    };
    report.constant("max-image-norm", max, 0.0);
    report.constant("median-image-norm", median, 0.0);
    report.check(
        "C11",
        "max-over-median",
        max / median,
        Relation::Below,
        ctx.threshold("spread")?,
    );
    report.note(
        "the spread threshold is a calibration choice: boundedness of the operator says \
         nothing about the size of its norm",
    );
    report.note(format!("d_p = {dp}, moment degree {}", params.degree));
    report.note(format!(
        "centers {}",
        if params.centers_scale_with_radius {
            "scale with the radius"
        } else {
            "are drawn in a fixed box"
        }
    ));
    report.plots.push(
        Plot::new("image norm per atom", "atom radius", "norm in L^q(.)")
            .log_log()
            .scatter("atoms", rows.iter().map(|r| (r.0, r.2)).collect()),
    );
    Ok(report)
}

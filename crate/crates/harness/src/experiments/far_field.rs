use hlab_core::atoms::make_atom;
use hlab_core::integrate::Resolution;
use hlab_core::operators::{
    expanded_balls, expansion_factor, far_field_atom_bound, loglog_slope, Evaluator, RuleChoice,
};
use hlab_core::{GroupPoint, KoranyiBall};
use serde::Deserialize;

use super::{point_from, Context};
use crate::error::{HarnessError, Result};
use crate::report::{ExperimentReport, Relation};
use crate::svg::Plot;

#[derive(Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
struct Case {
    kernel: usize,
    /// Moment degree D of the atom; the decay order is N = D + 1.
    degree: u32,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
struct Params {
    cases: Vec<Case>,
    p0: f64,
    ball_center: Vec<f64>,
    ball_radius: f64,
    direction: Vec<f64>,
    /// First ray parameter, ratio between consecutive ones, and count.
    ray: (f64, f64, usize),
    beta: f64,
    level: usize,
}

pub fn run(ctx: &Context) -> Result<ExperimentReport> {
    let params: Params = ctx.config.params()?;
    let dim = ctx.dim()?;
    let p = ctx.config.exponent_function()?;
    let spec = ctx.spec();
    let tol = ctx.threshold("slope-error")?;
    let mut report = ctx.report(&["case", "s", "abs_value", "predicted_slope"]);
    let mut plot = Plot::new("|T a| along a ray", "rho(z)", "|T a(z)|").log_log();

    let dir = point_from(&params.direction)?;
    let dir = dir.dilate(1.0 / dir.koranyi_norm())?;
    let (s0, step, count) = params.ray;
    let s: Vec<f64> = (0..count).map(|i| s0 * step.powi(i as i32)).collect();
    let zs: Vec<GroupPoint> = s
        .iter()
        .map(|s| dir.dilate(*s))
        .collect::<std::result::Result<_, _>>()?;
    let ball = KoranyiBall::new(point_from(&params.ball_center)?, params.ball_radius)?;

    for (c, case) in params.cases.iter().enumerate() {
        let kernel = ctx.config.kernel(case.kernel)?;
        let order = case.degree + 1;
        let atom = make_atom(
            &ball,
            &p,
            params.p0,
            case.degree,
            ctx.sub_seed(c as u64),
            &spec,
        )?;
        let eval = Evaluator::new(
            kernel,
            &atom,
            Resolution::level(params.level),
            spec.tolerance,
            RuleChoice::Fixed(atom.rule()),
        )?;
        let values: Vec<f64> = eval.eval_many(&zs)?.into_iter().map(f64::abs).collect();
        let predicted = kernel.alpha() - dim.qf() - order as f64;
        for (si, v) in s.iter().zip(&values) {
            report.row(vec![c.into(), (*si).into(), (*v).into(), predicted.into()]);
        }
        if values.iter().any(|v| !(*v > 0.0)) {
            return Err(HarnessError::Core(hlab_core::Error::InvariantViolation(
                format!("case {c}: T a vanishes on the ray"),
            )));
        }
        let slope = loglog_slope(&s, &values);
        let m = kernel.m();
        report.constant(&format!("case-{c}-slope"), slope, 0.0);
        report.check(
            "C10",
            &format!(
                "case-{c}-alpha-{}-m-{m}-N-{order}-slope-error",
                kernel.alpha()
            ),
            (slope - predicted).abs(),
            Relation::AtMost,
            tol,
        );
        plot = plot.scatter(
            &format!("case {c}"),
            s.iter().copied().zip(values.iter().copied()).collect(),
        );

        // The far-field bound, on ray points outside the expanded balls.
        let expanded = expanded_balls(kernel, &ball, expansion_factor(kernel, params.beta, order))?;
        let far: Vec<GroupPoint> = zs
            .iter()
            .filter(|z| !expanded.iter().any(|b| b.contains(z)))
            .cloned()
            .collect();
        if !far.is_empty() {
            let rep = far_field_atom_bound(kernel, &atom, order, params.beta, &far, &spec)?;
            report.constant(&format!("case-{c}-far-field-ratio"), rep.max_ratio, 0.0);
            report.check(
                "X-far-field-bound",
                &format!("case-{c}-max-ratio"),
                rep.max_ratio,
                Relation::Below,
                ctx.threshold("far-field-ratio")?,
            );
        }
        report.note(format!(
            "case {c}: {} of {} ray points lie outside the expanded balls",
            far.len(),
            zs.len()
        ));
    }
    report.note(
        "the far-field-ratio threshold is a calibration choice: the bound holds up to an \
         unspecified constant",
    );
    report.plots.push(plot);
    Ok(report)
}

use std::time::Instant;

use hlab_core::integrate::unit_ball_volume_exact;
use hlab_core::varexp::{
    check_log_holder, d_p, lp_norm, luxemburg_norm, power_identity_check, BallPiece,
    ExponentFunction, ExponentSpec,
};
use hlab_core::{Bump, Dimension, GroupPoint, IndicatorSum, KoranyiBall};
use rand::Rng;
use rayon::prelude::*;
use serde::Deserialize;

use super::{random_ball, Context};
use crate::error::{HarnessError, Result};
use crate::report::{ExperimentReport, Relation};

#[derive(Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
struct Params {
    constant_exponents: Vec<f64>,
    /// Ball used for the constant-exponent closed forms: center then radius.
    closed_form_ball: (Vec<f64>, f64),
    exponent_range: (f64, f64),
    /// s = u p_ with u uniform in this range.
    power_fraction: (f64, f64),
    /// (p_minus, n, expected d_p)
    d_p_cases: Vec<(f64, usize, u32)>,
    log_holder_samples: usize,
}

const COLUMNS: [&str; 5] = ["section", "case", "value", "reference", "error"];

/// Exponent 1 on E_1, 2 on E_2 (disjoint balls of unit volume), 3/2
/// elsewhere; for chi_{E_1} + chi_{E_2} the modular is 1/l + 1/l^2.
fn golden_case(dim: Dimension) -> Result<(IndicatorSum, ExponentFunction)> {
    let r = unit_ball_volume_exact(dim).powf(-1.0 / dim.qf());
    let center = |s: f64| {
        let mut c = vec![0.0; dim.coords()];
        c[0] = s;
        c
    };
    let piece = |s: f64, value: f64| BallPiece {
        center: center(s),
        radius: r,
        value,
    };
    let p = ExponentFunction::new(
        dim,
        ExponentSpec::BallPieces {
            pieces: vec![piece(-2.0, 1.0), piece(2.0, 2.0)],
            outside: 1.5,
        },
    )?;
    let ball = |s: f64| KoranyiBall::new(GroupPoint::from_coords(&center(s))?, r);
    let f = IndicatorSum::new(vec![(ball(-2.0)?, 1.0), (ball(2.0)?, 1.0)])?;
    Ok((f, p))
}

fn golden_check(ctx: &Context, report: &mut ExperimentReport) -> Result<()> {
    let golden = (1.0 + 5f64.sqrt()) / 2.0;
    let (f, p) = golden_case(ctx.dim()?)?;
    let n = luxemburg_norm(&f, &p, &ctx.spec())?;
    report.row(vec![
        "golden-ratio".into(),
        0usize.into(),
        n.into(),
        golden.into(),
        (n - golden).abs().into(),
    ]);
    report.check(
        "C3",
        "golden-ratio-error",
        (n - golden).abs(),
        Relation::Below,
        ctx.threshold("golden-error")?,
    );
    Ok(())
}

pub fn golden(ctx: &Context) -> Result<ExperimentReport> {
    let mut report = ctx.report(&COLUMNS);
    golden_check(ctx, &mut report)?;
    Ok(report)
}

pub fn run(ctx: &Context) -> Result<ExperimentReport> {
    let start = Instant::now();
    let params: Params = ctx.config.params()?;
    let dim = ctx.dim()?;
    let spec = ctx.spec();
    let mut report = ctx.report(&COLUMNS);

    // Constant exponents: ||chi_B|| = |B|^{1/p0}, and the Luxemburg norm of a
    // bump agrees with the classical L^p0 norm.
    let (c, r) = &params.closed_form_ball;
    let ball = KoranyiBall::new(super::point_from(c)?, *r)?;
    let rel_tol = ctx.threshold("closed-form-relative-error")?;
    let mut worst: f64 = 0.0;
    for (i, p0) in params.constant_exponents.iter().enumerate() {
        let p = ExponentFunction::constant(dim, *p0)?;
        let expected = ball.volume().powf(1.0 / p0);
        let n = luxemburg_norm(&IndicatorSum::ball(ball.clone()), &p, &spec)?;
        let bump = Bump::new(ball.clone(), 1.3, 3);
        let lux = luxemburg_norm(&bump, &p, &spec)?;
        let lp = lp_norm(&bump, *p0, &spec)?;
        let e1 = (n - expected).abs() / expected;
        let e2 = (lux - lp).abs() / lp;
        report.row(vec![
            "constant-indicator".into(),
            i.into(),
            n.into(),
            expected.into(),
            e1.into(),
        ]);
        report.row(vec![
            "constant-bump".into(),
            i.into(),
            lux.into(),
            lp.into(),
            e2.into(),
        ]);
        worst = worst.max(e1).max(e2);
    }
    report.check(
        "C3",
        "closed-form-relative-error",
        worst,
        Relation::Below,
        rel_tol,
    );

    golden_check(ctx, &mut report)?;

    // Power identity ||f||^s = || |f|^s ||_{p/s} on random piecewise-constant
    // exponents and bumps.
    let cases = ctx.samples("power-identity")?;
    let solver_tol = ctx.threshold("solver-tolerance")?;
    let factor = ctx.threshold("power-identity-factor")?;
    let (lo, hi) = params.exponent_range;
    let (ulo, uhi) = params.power_fraction;
    let results: Vec<(f64, f64)> = (0..cases)
        .into_par_iter()
        .map(|i| {
            let mut rng = ctx.rng(100 + i as u64);
            let outer = random_ball(dim, 1.0, (0.5, 1.5), &mut rng)?;
            let pieces = (0..2)
                .map(|_| {
                    let b = random_ball(dim, 1.0, (0.3, 1.0), &mut rng)?;
                    Ok(BallPiece {
                        center: b.center().coords(),
                        radius: b.radius(),
                        value: rng.random_range(lo..hi),
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            let p = ExponentFunction::new(
                dim,
                ExponentSpec::BallPieces {
                    pieces,
                    outside: rng.random_range(lo..hi),
                },
            )?;
            let f = Bump::new(outer, rng.random_range(0.2..5.0), rng.random_range(1..=3));
            let s = rng.random_range(ulo..uhi) * p.underline_p();
            let r = power_identity_check(&f, &p, s, &spec)?;
            Ok((s, r.relative_difference))
        })
        .collect::<Result<_>>()?;
    let mut worst: f64 = 0.0;
    for (i, (s, diff)) in results.iter().enumerate() {
        let allowed = solver_tol * s.max(1.0);
        report.row(vec![
            "power-identity".into(),
            i.into(),
            (*diff).into(),
            allowed.into(),
            (*s).into(),
        ]);
        worst = worst.max(diff / allowed);
    }
    report.check(
        "C3",
        "power-identity-in-solver-tolerances",
        worst,
        Relation::AtMost,
        factor,
    );

    // Log-Hoelder reports: a smooth radial exponent is finite and stable, a
    // jump is flagged.
    let radial =
        ExponentFunction::radial_from_fn(dim, |s| 0.8 + 0.6 * s * s / (1.0 + s * s), 16.0, 65)?;
    let rep = check_log_holder(&radial, params.log_holder_samples, ctx.sub_seed(3));
    report.row(vec![
        "log-holder-radial".into(),
        0usize.into(),
        rep.c_local.into(),
        rep.c_infinity.into(),
        (rep.violations as f64).into(),
    ]);
    report.check(
        "X-log-holder",
        "radial-finite-and-stable",
        (rep.c_local.is_finite() && rep.c_infinity.is_finite() && !rep.divergent) as u8 as f64,
        Relation::Equals,
        1.0,
    );
    let step = ExponentFunction::new(
        dim,
        ExponentSpec::HalfSpace {
            axis: 0,
            offset: 0.1,
            below: 1.0,
            above: 2.0,
        },
    )?;
    let rep = check_log_holder(&step, params.log_holder_samples, ctx.sub_seed(4));
    report.check(
        "X-log-holder",
        "jump-detected",
        rep.divergent as u8 as f64,
        Relation::Equals,
        1.0,
    );

    // D_p table.
    let mut mismatches = 0usize;
    for (i, (pm, n, expected)) in params.d_p_cases.iter().enumerate() {
        let d = Dimension::new(*n).map_err(|e| HarnessError::config(e.to_string()))?;
        let got = d_p(&ExponentFunction::constant(d, *pm)?, *n);
        report.row(vec![
            "d-p".into(),
            i.into(),
            got.into(),
            (*expected).into(),
            (got as f64 - *expected as f64).abs().into(),
        ]);
        report.check(
            "C4",
            &format!("d_p(p_minus = {pm}, n = {n})"),
            got as f64,
            Relation::Equals,
            *expected as f64,
        );
        if got != *expected {
            mismatches += 1;
        }
    }
    report.note(format!("{mismatches} d_p mismatches"));

    let elapsed = start.elapsed().as_secs_f64();
    report.check(
        "C3",
        "runtime-seconds",
        elapsed,
        Relation::Below,
        ctx.threshold("runtime-seconds")?,
    );
    Ok(report)
}

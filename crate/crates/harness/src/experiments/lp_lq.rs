use std::time::Instant;

use hlab_core::field::Field;
use hlab_core::integrate::Resolution;
use hlab_core::operators::{apply_t, image_norm, Evaluator, RuleChoice};
use hlab_core::varexp::{lp_norm, ExponentFunction};
use hlab_core::{Bump, BumpSum, Dilated, KoranyiBall, Region};
use rand::Rng;
use rayon::prelude::*;
use serde::Deserialize;

use super::{box_point, point_from, random_ball, Context};
use crate::error::{HarnessError, Result};
use crate::report::{ExperimentReport, Relation};
use crate::svg::Plot;

#[derive(Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
struct Params {
    bump_center: Vec<f64>,
    bump_radius: f64,
    log2_dilation_range: (f64, f64),
    coordinate_range: f64,
    p0: Vec<f64>,
    dilations: Vec<f64>,
    bumps_per_field: (usize, usize),
    level: usize,
}

const COLUMNS: [&str; 6] = [
    "section",
    "trial",
    "parameter",
    "value",
    "reference",
    "bound",
];

pub fn run(ctx: &Context) -> Result<ExperimentReport> {
    let start = Instant::now();
    let params: Params = ctx.config.params()?;
    let dim = ctx.dim()?;
    let kernel = ctx.config.kernel(0)?;
    let alpha = kernel.alpha();
    if alpha <= 0.0 {
        return Err(HarnessError::config(
            "lp-lq-ratio needs a kernel with alpha > 0",
        ));
    }
    let spec = ctx.spec();
    let mut report = ctx.report(&COLUMNS);

    // T f (delta_r z) = r^alpha T (f o delta_r)(z).
    let f = Bump::new(
        KoranyiBall::new(point_from(&params.bump_center)?, params.bump_radius)?,
        1.0,
        2,
    );
    let trials = ctx.samples("covariance-trials")?;
    let (lo, hi) = params.log2_dilation_range;
    let rows: Vec<(f64, f64, f64)> = (0..trials)
        .into_par_iter()
        .map(|i| {
            let mut rng = ctx.rng(i as u64);
            let r = 2f64.powf(rng.random_range(lo..hi));
            let z = box_point(dim, params.coordinate_range, &mut rng);
            let lhs = apply_t(kernel, &f, &z.dilate(r)?, &spec)?;
            let rhs = apply_t(kernel, &Dilated::new(f.clone(), r)?, &z, &spec)?;
            let scale = r.powf(alpha);
            let violation = (lhs.value - scale * rhs.value).abs();
            let bound = lhs.error + scale * rhs.error;
            Ok((r, violation, bound))
        })
        .collect::<Result<_>>()?;
    let mut worst: f64 = 0.0;
    for (i, (r, v, b)) in rows.iter().enumerate() {
        report.row(vec![
            "covariance".into(),
            i.into(),
            (*r).into(),
            (*v).into(),
            0.0.into(),
            (*b).into(),
        ]);
        worst = worst.max(if *v == 0.0 { 0.0 } else { v / b });
    }
    report.check(
        "C9",
        "violation-over-error-bound",
        worst,
        Relation::Below,
        ctx.threshold("violation-ratio")?,
    );

    // ||T f||_{q0} / ||f||_{p0} with 1/q0 = 1/p0 - alpha/Q on random bump
    // sums and their dilations; the ratio is dilation invariant.
    let q = dim.qf();
    let fields = ctx.samples("ratio-fields")?;
    let corpus: Vec<BumpSum> = (0..fields)
        .map(|i| {
            let mut rng = ctx.rng(1000 + i as u64);
            let (a, b) = params.bumps_per_field;
            let count = rng.random_range(a..=b);
            let bumps = (0..count)
                .map(|_| {
                    let ball = random_ball(dim, 1.0, (0.3, 1.0), &mut rng)?;
                    let amp = rng.random_range(0.5..2.0) * if rng.random() { 1.0 } else { -1.0 };
                    Ok(Bump::new(ball, amp, 2))
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(BumpSum { bumps })
        })
        .collect::<Result<_>>()?;
    let res = Resolution::level(params.level);
    let mut flat_worst: f64 = 0.0;
    let mut max_ratio: f64 = 0.0;
    let mut plot = Plot::new("norm ratio against dilation", "dilation r", "ratio").log_log();
    for &p0 in &params.p0 {
        let q0 = 1.0 / (1.0 / p0 - alpha / q);
        let qexp = ExponentFunction::constant(dim, q0)?;
        let jobs: Vec<(usize, f64)> = (0..fields)
            .flat_map(|i| params.dilations.iter().map(move |r| (i, *r)))
            .collect();
        let ratios: Vec<f64> = jobs
            .par_iter()
            .map(|(i, r)| {
                let g = Dilated::new(corpus[*i].clone(), *r)?;
                let balls: Vec<KoranyiBall> = match g.support() {
                    Region::Ball(b) => vec![b.expand(2.0)?],
                    Region::Union(bs) => bs
                        .iter()
                        .map(|b| b.expand(2.0))
                        .collect::<std::result::Result<_, _>>()?,
                    Region::Exterior { .. } => unreachable!("bump sums have bounded support"),
                };
                let eval = Evaluator::new(kernel, &g, res, spec.tolerance, RuleChoice::Support)?;
                let tf = image_norm(&eval, &qexp, &balls, q - alpha, res)?.norm;
                Ok(tf / lp_norm(&g, p0, &spec)?)
            })
            .collect::<Result<_>>()?;
        for ((i, r), ratio) in jobs.iter().zip(&ratios) {
            report.row(vec![
                "lp-lq-ratio".into(),
                (*i).into(),
                (*r).into(),
                (*ratio).into(),
                p0.into(),
                q0.into(),
            ]);
        }
        for i in 0..fields {
            let per: Vec<f64> = jobs
                .iter()
                .zip(&ratios)
                .filter(|((j, _), _)| *j == i)
                .map(|(_, v)| *v)
                .collect();
            let hi = per.iter().copied().fold(0.0, f64::max);
            let lo = per.iter().copied().fold(f64::INFINITY, f64::min);
            flat_worst = flat_worst.max(hi / lo - 1.0);
            max_ratio = max_ratio.max(hi);
        }
        plot = plot.scatter(
            &format!("p0 = {p0}"),
            jobs.iter()
                .zip(&ratios)
                .map(|((_, r), v)| (*r, *v))
                .collect(),
        );
        let pmax = ratios.iter().copied().fold(0.0, f64::max);
        report.constant(&format!("max-ratio-p0-{p0}"), pmax, 0.0);
    }
    report.plots.push(plot);
    report.note(format!("largest ratio over the corpus {max_ratio:e}"));
    report.check(
        "X-dilation-flatness",
        "ratio-spread-under-dilation",
        flat_worst,
        Relation::Below,
        ctx.threshold("flatness")?,
    );
    report.check(
        "C9",
        "runtime-seconds",
        start.elapsed().as_secs_f64(),
        Relation::Below,
        ctx.threshold("runtime-seconds")?,
    );
    Ok(report)
}

use hlab_core::calculus::DerivativeSpec;
use hlab_core::integrate::sample_ball;
use hlab_core::operators::{kernel_derivative_bound, KernelDerivativeReport, KernelSpec};
use hlab_core::{GroupPoint, KoranyiBall};
use rand::Rng;
use serde::Deserialize;

use super::{relative_change, Context};
use crate::error::Result;
use crate::report::{ExperimentReport, Relation};
use crate::svg::Plot;

#[derive(Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
struct Params {
    max_order: u32,
    cloud_radius: f64,
    /// Range of rho(w_j(y)^{-1} z) for the factor placed near z.
    distance_range: (f64, f64),
}

/// Pairs with z uniform in B_R(e) and one factor point w_j(y) at a
/// log-uniform distance from z in a uniform direction, cycling over j. The
/// ratio is dilation invariant and largest when one factor dominates, which
/// uniform pairs rarely reach.
fn stratified_cloud(
    ctx: &Context,
    kernel: &KernelSpec,
    params: &Params,
    count: usize,
    stream: u64,
) -> Result<Vec<(GroupPoint, GroupPoint)>> {
    let dim = kernel.dim();
    let zs = sample_ball(
        &KoranyiBall::centered(dim, params.cloud_radius)?,
        count,
        ctx.sub_seed(stream),
    );
    let us = sample_ball(
        &KoranyiBall::centered(dim, 1.0)?,
        count,
        ctx.sub_seed(stream + 1),
    );
    let mut rng = ctx.rng(stream + 2);
    let (lo, hi) = params.distance_range;
    zs.into_iter()
        .zip(us)
        .enumerate()
        .map(|(i, (z, u))| {
            let d = rng.random_range(lo.ln()..hi.ln()).exp();
            let u = u.dilate(d / u.koranyi_norm())?;
            let w = z.mul(&u.inv())?;
            Ok((kernel.singular_point(i % kernel.m(), &w), z))
        })
        .collect()
}

fn uniform_cloud(
    ctx: &Context,
    kernel: &KernelSpec,
    params: &Params,
    count: usize,
    stream: u64,
) -> Result<Vec<(GroupPoint, GroupPoint)>> {
    let ball = KoranyiBall::centered(kernel.dim(), params.cloud_radius)?;
    let ys = sample_ball(&ball, count, ctx.sub_seed(stream));
    let zs = sample_ball(&ball, count, ctx.sub_seed(stream + 1));
    Ok(ys.into_iter().zip(zs).collect())
}

/// Largest ratio over the first `count` pairs and degrees up to `order`.
fn fit(rep: &KernelDerivativeReport, count: usize, order: usize) -> f64 {
    rep.per_pair[..count]
        .iter()
        .flatten()
        .flat_map(|r| r[..=order].iter().copied())
        .fold(0.0, f64::max)
}

pub fn run(ctx: &Context) -> Result<ExperimentReport> {
    let params: Params = ctx.config.params()?;
    let base = ctx.samples("pairs")?;
    let tol = ctx.threshold("doubling-change")?;
    let dspec = DerivativeSpec::default();
    let mut report = ctx.report(&["kernel", "cloud", "pair", "degree", "ratio"]);
    let mut plot = Plot::new("largest ratio per order", "order N", "max ratio").log_y();

    for (k, kernel) in ctx.config.kernels.iter().enumerate() {
        // Each cloud is drawn once at twice the budget; its first `base`
        // pairs are the smaller cloud.
        let stream = 100 * k as u64;
        let stratified = stratified_cloud(ctx, kernel, &params, 2 * base, stream)?;
        let uniform = uniform_cloud(ctx, kernel, &params, 2 * base, stream + 10)?;
        for (cloud, pairs) in [("stratified", stratified), ("uniform", uniform)] {
            let rep = kernel_derivative_bound(kernel, params.max_order, &pairs, &dspec)?;
            for (i, row) in rep.per_pair.iter().enumerate() {
                if let Some(ratios) = row {
                    for (d, r) in ratios.iter().enumerate() {
                        report.row(vec![
                            k.into(),
                            cloud.into(),
                            i.into(),
                            d.into(),
                            (*r).into(),
                        ]);
                    }
                }
            }
            let mut series = Vec::new();
            for order in 1..=params.max_order as usize {
                let small = fit(&rep, base, order);
                let large = fit(&rep, 2 * base, order);
                series.push((order as f64, large));
                let name = format!("kernel-{k}-{cloud}-order-{order}");
                report.constant(&name, large, (large - small).abs());
                if cloud == "stratified" {
                    report.check(
                        "C8",
                        &format!("{name}-doubling-change"),
                        relative_change(small, large),
                        Relation::Below,
                        tol,
                    );
                } else {
                    report.note(format!(
                        "{name}: doubling change {:.3} (reported only; uniform pairs rarely \
                         reach the dominant-factor regime)",
                        relative_change(small, large)
                    ));
                }
            }
            report.note(format!(
                "kernel {k} {cloud}: {} pairs used, {} skipped near the singular set",
                rep.pairs_used, rep.pairs_skipped
            ));
            plot = plot.scatter(&format!("kernel {k} {cloud}"), series);
        }
    }
    report.plots.push(plot);
    Ok(report)
}

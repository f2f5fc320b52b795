use hlab_core::integrate::{sample_ball, Resolution};
use hlab_core::operators::{
    domination_constants, geometric_radii, omega_partition, omega_separation, separation_constants,
    KernelSpec,
};
use hlab_core::{Bump, GroupPoint, KoranyiBall};
use rand::Rng;
use serde::Deserialize;

use super::{box_point, point_from, relative_change, Context};
use crate::error::Result;
use crate::report::{ExperimentReport, Relation};

#[derive(Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
struct Params {
    coordinate_range: f64,
    /// Center coordinates and radius of the bump f.
    bump_center: Vec<f64>,
    bump_radius: f64,
    bump_power: i32,
    /// Radius of the ball of generic evaluation points.
    evaluation_radius: f64,
    /// Evaluation points near the support: preimages of B_{s R}(center).
    support_factor: f64,
    maximal_radii: (f64, f64, usize),
    level: usize,
}

const COLUMNS: [&str; 6] = ["section", "kernel", "trial", "quantity", "value", "aux"];

pub fn run(ctx: &Context) -> Result<ExperimentReport> {
    let params: Params = ctx.config.params()?;
    let mut report = ctx.report(&COLUMNS);
    for (k, kernel) in ctx.config.kernels.iter().enumerate() {
        separation(ctx, &params, k, kernel, &mut report)?;
        partition(ctx, &params, k, kernel, &mut report)?;
    }
    for (k, kernel) in ctx.config.kernels.iter().enumerate() {
        domination(ctx, &params, k, kernel, &mut report)?;
    }
    Ok(report)
}

fn separation(
    ctx: &Context,
    params: &Params,
    k: usize,
    kernel: &KernelSpec,
    report: &mut ExperimentReport,
) -> Result<()> {
    let dim = ctx.dim()?;
    let count = ctx.samples("separation")?;
    let radii = kernel.radii();
    let beta = separation_constants(radii)?.beta;
    let mut rng = ctx.rng(1000 + k as u64);
    let (mut closed_err, mut deficit): (f64, f64) = (0.0, 0.0);
    for _ in 0..count {
        let z = box_point(dim, params.coordinate_range, &mut rng);
        let rz = z.koranyi_norm();
        for i in 0..radii.len() {
            for j in i + 1..radii.len() {
                let (lhs, closed) = omega_separation(radii[i], radii[j], &z);
                closed_err = closed_err.max((lhs - closed).abs() / (1.0 + closed));
                deficit = deficit.max((beta * rz - lhs) / (1.0 + beta * rz));
            }
        }
    }
    report.row(vec![
        "separation".into(),
        k.into(),
        count.into(),
        "closed-form-error".into(),
        closed_err.into(),
        beta.into(),
    ]);
    report.row(vec![
        "separation".into(),
        k.into(),
        count.into(),
        "deficit".into(),
        deficit.into(),
        beta.into(),
    ]);
    let rounding = ctx.threshold("rounding")?;
    report.check(
        "C6",
        &format!("kernel-{k}-closed-form-error"),
        closed_err,
        Relation::AtMost,
        rounding,
    );
    report.check(
        "C6",
        &format!("kernel-{k}-separation-deficit"),
        deficit,
        Relation::AtMost,
        rounding,
    );
    Ok(())
}

fn partition(
    ctx: &Context,
    params: &Params,
    k: usize,
    kernel: &KernelSpec,
    report: &mut ExperimentReport,
) -> Result<()> {
    let dim = ctx.dim()?;
    let count = ctx.samples("partition")?;
    let beta = separation_constants(kernel.radii())?.beta;
    let mut rng = ctx.rng(2000 + k as u64);
    let mut failures = 0usize;
    let mut counts = vec![0usize; kernel.m() + 2];
    for i in 0..count {
        let z = box_point(dim, params.coordinate_range, &mut rng);
        if z.is_identity() {
            continue;
        }
        // Every other y is placed close to the boundary of a near region.
        let y = if i % 2 == 0 {
            box_point(dim, 2.0 * params.coordinate_range, &mut rng)
        } else {
            let j = rng.random_range(0..kernel.m());
            let s = rng.random_range(0.45..0.55) * beta * z.koranyi_norm();
            let dir = box_point(dim, 1.0, &mut rng);
            let dir = dir.dilate(s / dir.koranyi_norm().max(f64::MIN_POSITIVE))?;
            kernel.singular_point(j, &z).mul(&dir)?
        };
        match omega_partition(kernel, &z, &y) {
            Ok(label) => counts[label.0 - 1] += 1,
            Err(_) => failures += 1,
        }
    }
    for (j, c) in counts.iter().enumerate() {
        report.row(vec![
            "partition".into(),
            k.into(),
            count.into(),
            format!("omega-{}", j + 1).into(),
            (*c).into(),
            failures.into(),
        ]);
    }
    report.check(
        "C6",
        &format!("kernel-{k}-partition-failures"),
        failures as f64,
        Relation::Equals,
        0.0,
    );
    Ok(())
}

fn domination(
    ctx: &Context,
    params: &Params,
    k: usize,
    kernel: &KernelSpec,
    report: &mut ExperimentReport,
) -> Result<()> {
    let dim = ctx.dim()?;
    let per_group = ctx.samples("domination-per-group")?;
    let f = Bump::new(
        KoranyiBall::new(point_from(&params.bump_center)?, params.bump_radius)?,
        1.0,
        params.bump_power,
    );
    let (rmin, rmax, per_octave) = params.maximal_radii;
    let radii = geometric_radii(rmin, rmax, per_octave);

    // The corpus is drawn once at twice the budget; the first `per_group`
    // points of each group form the smaller budget.
    let generic = KoranyiBall::centered(dim, params.evaluation_radius)?;
    let near_support = KoranyiBall::new(
        f.ball.center().clone(),
        params.support_factor * params.bump_radius,
    )?;
    let mut groups: Vec<Vec<GroupPoint>> = vec![sample_ball(
        &generic,
        2 * per_group,
        ctx.sub_seed(3000 + k as u64),
    )];
    for (j, r) in kernel.radii().iter().enumerate() {
        let seed = ctx.sub_seed(3100 + 10 * k as u64 + j as u64);
        groups.push(
            sample_ball(&near_support, 2 * per_group, seed)
                .into_iter()
                .map(|w| w.dilate(1.0 / r))
                .collect::<std::result::Result<_, _>>()?,
        );
    }
    let zs: Vec<GroupPoint> = groups.iter().flatten().cloned().collect();
    let rep = domination_constants(
        kernel,
        &f,
        &zs,
        &radii,
        Resolution::level(params.level),
        &ctx.spec(),
    )?;

    let in_small = |idx: usize| idx % (2 * per_group) < per_group;
    let fit = |keep: &dyn Fn(usize) -> bool| {
        let mut near = vec![0.0f64; kernel.m()];
        let mut middle: f64 = 0.0;
        for (idx, (n, m)) in rep.per_sample.iter().enumerate() {
            if keep(idx) {
                for (a, b) in near.iter_mut().zip(n) {
                    *a = a.max(*b);
                }
                middle = middle.max(*m);
            }
        }
        near.push(middle);
        near
    };
    let small = fit(&in_small);
    let large = fit(&|_| true);
    for (idx, (n, m)) in rep.per_sample.iter().enumerate() {
        for (j, v) in n.iter().enumerate() {
            report.row(vec![
                "domination".into(),
                k.into(),
                idx.into(),
                format!("near-{}", j + 1).into(),
                (*v).into(),
                (idx / (2 * per_group)).into(),
            ]);
        }
        report.row(vec![
            "domination".into(),
            k.into(),
            idx.into(),
            "middle".into(),
            (*m).into(),
            (idx / (2 * per_group)).into(),
        ]);
    }
    let tol = ctx.threshold("doubling-change")?;
    for (j, (a, b)) in small.iter().zip(&large).enumerate() {
        let name = if j < kernel.m() {
            format!("kernel-{k}-near-{}", j + 1)
        } else {
            format!("kernel-{k}-middle")
        };
        report.constant(&name, *b, (b - a).abs());
        report.check(
            "C7",
            &format!("{name}-doubling-change"),
            relative_change(*a, *b),
            Relation::AtMost,
            tol,
        );
    }
    Ok(())
}

use hlab_core::calculus::{
    higher_derivative, taylor_remainder_ratio, unit_cloud, vector_field_apply, DerivativeSpec,
    MultiIndex, PolynomialHG,
};
use hlab_core::GroupPoint;
use rand::Rng;
use rayon::prelude::*;
use serde::Deserialize;

use super::{box_point, relative_change, Context};
use crate::error::Result;
use crate::report::{ExperimentReport, Relation};

#[derive(Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
struct Params {
    degree: u32,
    taylor_order: u32,
    beta: f64,
    sample_radius: f64,
    dilation: f64,
}

fn gauss(z: &GroupPoint) -> f64 {
    let x2: f64 = z.x().iter().map(|v| v * v).sum();
    (-x2 - z.t() * z.t()).exp()
}

pub fn run(ctx: &Context) -> Result<ExperimentReport> {
    let params: Params = ctx.config.params()?;
    let dim = ctx.dim()?;
    let dspec = DerivativeSpec::default();
    let polys = ctx.samples("polynomials")?;
    let cloud_size = ctx.samples("cloud")?;
    let taylor_samples = ctx.samples("taylor-samples")?;
    let mut report = ctx.report(&["section", "trial", "value"]);

    // Finite differences against exact vector fields on random polynomials,
    // and the Taylor projector identity at random bases.
    let basis = MultiIndex::up_to_degree(dim, params.degree);
    let rows: Vec<(f64, f64)> = (0..polys)
        .into_par_iter()
        .map(|i| {
            let mut rng = ctx.rng(i as u64);
            let p = PolynomialHG::from_terms(
                dim,
                params.degree,
                basis
                    .iter()
                    .cloned()
                    .map(|m| (m, rng.random_range(-2.0..2.0))),
            )?;
            let z = box_point(dim, 1.0, &mut rng);
            let f = |w: &GroupPoint| p.eval(w);
            let mut fd_err: f64 = 0.0;
            for k in 1..=dim.coords() {
                let fd = vector_field_apply(k, &f, &z, &dspec)?;
                let exact = p.apply_vector_field(k - 1).eval(&z);
                fd_err = fd_err.max((fd - exact).abs() / (1.0 + exact.abs()));
            }
            let b = box_point(dim, 1.0, &mut rng);
            let q = p.left_taylor(&b, params.degree)?;
            let mut proj: f64 = 0.0;
            for w in unit_cloud(dim, 8, i as u64) {
                let rhs = p.eval(&b.mul(&w)?);
                proj = proj.max((q.eval(&w) - rhs).abs() / (1.0 + rhs.abs()));
            }
            Ok((fd_err, proj))
        })
        .collect::<Result<_>>()?;
    for (i, (fd, proj)) in rows.iter().enumerate() {
        report.row(vec!["fd-vs-exact".into(), i.into(), (*fd).into()]);
        report.row(vec!["taylor-projector".into(), i.into(), (*proj).into()]);
    }
    let fd_max = rows.iter().map(|r| r.0).fold(0.0, f64::max);
    let proj_max = rows.iter().map(|r| r.1).fold(0.0, f64::max);
    report.check(
        "X-vector-fields",
        "fd-relative-error",
        fd_max,
        Relation::Below,
        ctx.threshold("fd-relative-error")?,
    );
    report.check(
        "X-taylor-projector",
        "projector-error",
        proj_max,
        Relation::Below,
        ctx.threshold("projector-error")?,
    );

    // Homogeneity X^I (f o delta_r) = r^{d(I)} (X^I f) o delta_r.
    let r = params.dilation;
    let mut rng = ctx.rng(10_000);
    let mut hom: f64 = 0.0;
    for _ in 0..8 {
        let z = box_point(dim, 1.0, &mut rng);
        let fr = |w: &GroupPoint| gauss(&w.dilate(r).expect("positive dilation"));
        for i in MultiIndex::up_to_degree(dim, 2) {
            let lhs = higher_derivative(&i, &fr, &z, &dspec)?;
            let rhs =
                r.powi(i.degree() as i32) * higher_derivative(&i, &gauss, &z.dilate(r)?, &dspec)?;
            hom = hom.max((lhs - rhs).abs() / (1.0 + rhs.abs()));
        }
    }
    report.row(vec![
        "derivative-homogeneity".into(),
        0usize.into(),
        hom.into(),
    ]);
    report.check(
        "X-homogeneity",
        "derivative-homogeneity",
        hom,
        Relation::Below,
        ctx.threshold("homogeneity-error")?,
    );

    // Taylor remainder ratio of a Gaussian at e and its stability when the
    // cloud used for the sup doubles.
    let e = GroupPoint::identity(dim);
    let samples: Vec<GroupPoint> = unit_cloud(dim, taylor_samples, ctx.sub_seed(1))
        .into_iter()
        .filter(|z| !z.is_identity())
        .map(|z| z.dilate(params.sample_radius))
        .collect::<std::result::Result<_, _>>()?;
    let cloud_seed = ctx.sub_seed(2);
    let small = taylor_remainder_ratio(
        &gauss,
        &e,
        params.taylor_order,
        &samples,
        params.beta,
        &unit_cloud(dim, cloud_size, cloud_seed),
        &dspec,
    )?;
    let large = taylor_remainder_ratio(
        &gauss,
        &e,
        params.taylor_order,
        &samples,
        params.beta,
        &unit_cloud(dim, 2 * cloud_size, cloud_seed),
        &dspec,
    )?;
    for (i, r) in large.ratios.iter().enumerate() {
        report.row(vec!["taylor-ratio".into(), i.into(), (*r).into()]);
    }
    let change = relative_change(small.constant, large.constant);
    report.constant(
        "taylor-remainder-constant",
        large.constant,
        (large.constant - small.constant).abs(),
    );
    report.note(format!("beta = {} (configured)", params.beta));
    report.check(
        "X-taylor-remainder",
        "constant-change-under-cloud-doubling",
        change,
        Relation::AtMost,
        ctx.threshold("stability")?,
    );

    // A polynomial of degree below the Taylor order has zero remainder.
    let p = PolynomialHG::from_terms(
        dim,
        1,
        MultiIndex::up_to_degree(dim, 1)
            .into_iter()
            .enumerate()
            .map(|(i, m)| (m, 1.0 + i as f64)),
    )?;
    let lin = taylor_remainder_ratio(
        &|w: &GroupPoint| p.eval(w),
        &GroupPoint::new(&vec![0.1; dim.horizontal()], 0.2)?,
        params.taylor_order,
        &samples,
        params.beta,
        &unit_cloud(dim, cloud_size, cloud_seed),
        &dspec,
    )?;
    report.check(
        "X-taylor-remainder",
        "polynomial-remainder",
        lin.max_remainder,
        Relation::Below,
        ctx.threshold("projector-error")?,
    );
    Ok(report)
}

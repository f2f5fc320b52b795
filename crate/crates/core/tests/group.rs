use std::f64::consts::PI;

use hlab_core::group::symplectic_form;
use hlab_core::integrate::{
    haar_integrate, sample_ball, sphere_measure, unit_ball_volume, unit_ball_volume_exact,
    IntegrationMethod,
};
use hlab_core::*;
use proptest::prelude::*;

fn point(n: usize) -> impl Strategy<Value = GroupPoint> {
    (prop::collection::vec(-5.0f64..5.0, 2 * n), -5.0f64..5.0)
        .prop_map(|(x, t)| GroupPoint::new(&x, t).unwrap())
}

fn close(a: &GroupPoint, b: &GroupPoint, tol: f64) -> bool {
    a.coords()
        .iter()
        .zip(b.coords())
        .all(|(u, v)| (u - v).abs() <= tol * (1.0 + u.abs().max(v.abs())))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn associativity(a in point(2), b in point(2), c in point(2)) {
        let l = a.mul(&b).unwrap().mul(&c).unwrap();
        let r = a.mul(&b.mul(&c).unwrap()).unwrap();
        prop_assert!(close(&l, &r, 1e-12));
    }

    #[test]
    fn inverse_is_two_sided(a in point(1)) {
        let e = GroupPoint::identity(a.dim());
        prop_assert!(close(&a.mul(&a.inv()).unwrap(), &e, 1e-14));
        prop_assert!(close(&a.inv().mul(&a).unwrap(), &e, 1e-14));
        prop_assert_eq!(a.inv().inv(), a);
    }

    #[test]
    fn norm_homogeneity(a in point(1), r in 0.01f64..100.0) {
        let lhs = a.dilate(r).unwrap().koranyi_norm();
        prop_assert!((lhs - r * a.koranyi_norm()).abs() <= 1e-12 * (1.0 + lhs));
    }

    #[test]
    fn dilation_is_an_automorphism(a in point(1), b in point(1), r in 0.1f64..10.0) {
        let l = a.mul(&b).unwrap().dilate(r).unwrap();
        let rhs = a.dilate(r).unwrap().mul(&b.dilate(r).unwrap()).unwrap();
        prop_assert!(close(&l, &rhs, 1e-12));
    }

    #[test]
    fn norm_of_inverse(a in point(3)) {
        prop_assert!((a.inv().koranyi_norm() - a.koranyi_norm()).abs() < 1e-12);
    }

    #[test]
    fn triangle_inequalities(a in point(1), b in point(1)) {
        let ab = a.mul(&b).unwrap().koranyi_norm();
        let (ra, rb) = (a.koranyi_norm(), b.koranyi_norm());
        prop_assert!(ab <= ra + rb + 1e-12 * (ra + rb));
        prop_assert!((ra - rb).abs() <= ab + 1e-12 * (ra + rb));
    }

    #[test]
    fn rotations_preserve_norm_and_product(a in point(1), b in point(1), th in -PI..PI) {
        let rot = RotationMatrix::planar(th);
        let ra = a.rotate(&rot).unwrap();
        prop_assert!((ra.koranyi_norm() - a.koranyi_norm()).abs() < 1e-12 * (1.0 + a.koranyi_norm()));
        let l = a.mul(&b).unwrap().rotate(&rot).unwrap();
        let r = ra.mul(&b.rotate(&rot).unwrap()).unwrap();
        prop_assert!(close(&l, &r, 1e-12));
    }

    #[test]
    fn block_rotations_preserve_norm(a in point(2), t1 in -PI..PI, t2 in -PI..PI) {
        let rot = RotationMatrix::block_rotations(&[t1, t2]).unwrap();
        let ra = a.rotate(&rot).unwrap();
        prop_assert!((ra.koranyi_norm() - a.koranyi_norm()).abs() < 1e-12 * (1.0 + a.koranyi_norm()));
    }

    #[test]
    fn symplectic_form_is_skew(x in prop::collection::vec(-10.0f64..10.0, 4)) {
        prop_assert_eq!(symplectic_form(&x, &x), 0.0);
    }
}

#[test]
fn product_matches_hand_computation() {
    let a = GroupPoint::new(&[1.0, 0.0], 0.0).unwrap();
    let b = GroupPoint::new(&[0.0, 1.0], 0.0).unwrap();
    assert_eq!(
        a.mul(&b).unwrap(),
        GroupPoint::new(&[1.0, 1.0], -0.5).unwrap()
    );
    let r = GroupPoint::new(&[1.0, 0.0], 1.0)
        .unwrap()
        .dilate(2.0)
        .unwrap();
    assert_eq!(r, GroupPoint::new(&[2.0, 0.0], 4.0).unwrap());
    let q = GroupPoint::new(&[1.0, 0.0], 5.0).unwrap();
    let rot = RotationMatrix::planar(PI / 2.0);
    let w = q.rotate(&rot).unwrap();
    assert!(close(
        &w,
        &GroupPoint::new(&[0.0, 1.0], 5.0).unwrap(),
        1e-15
    ));
    assert_eq!(
        GroupPoint::new(&[0.0, 0.0], 1.0).unwrap().koranyi_norm(),
        2.0
    );
}

#[test]
fn reflections_are_rejected() {
    assert!(RotationMatrix::from_rows(&[vec![1.0, 0.0], vec![0.0, -1.0]]).is_err());
}

// |{|x|^4 + 16 t^2 < 1}| for n = 1: in polar x-coordinates with u = s^2,
// 2 pi int_0^1 s (1 - s^4)^{1/2} / 2 ds = (pi / 2) int_0^1 (1 - u^2)^{1/2} du = pi^2 / 8.
#[test]
fn unit_ball_volume_matches_analytic_reduction() {
    let dim = Dimension::new(1).unwrap();
    let oracle = (PI / 2.0) * (PI / 4.0);
    assert!((unit_ball_volume_exact(dim) - oracle).abs() < 1e-14);
    let grid = unit_ball_volume(dim, &IntegrationSpec::grid(1e-8)).unwrap();
    assert!((grid.value - oracle).abs() / oracle < 1e-6);
    let mc = unit_ball_volume(
        dim,
        &IntegrationSpec::new(IntegrationMethod::MonteCarlo, 1e-3, 4_000_000, 9).unwrap(),
    )
    .unwrap();
    assert!(
        (mc.value - oracle).abs() < 4.0 * mc.error.max(1e-3 * oracle),
        "{mc:?}"
    );
    assert!((sphere_measure(dim) - PI * PI / 2.0).abs() < 1e-14);
}

#[test]
fn tail_integral_matches_one_dimensional_form() {
    let dim = Dimension::new(1).unwrap();
    let r = 1.5;
    let region = Region::Exterior {
        dim,
        balls: vec![KoranyiBall::centered(dim, r).unwrap()],
        decay: 5.0,
    };
    let est = haar_integrate(
        &|z: &GroupPoint| z.koranyi_norm().powi(-5),
        &region,
        &[],
        &IntegrationSpec::grid(1e-7),
    )
    .unwrap();
    let oracle = sphere_measure(dim) / r;
    assert!(
        (est.value - oracle).abs() / oracle < 1e-5,
        "{} vs {oracle}",
        est.value
    );
}

#[test]
fn haar_measure_is_translation_and_dilation_invariant() {
    let dim = Dimension::new(1).unwrap();
    let spec = IntegrationSpec::grid(1e-7);
    let ball = KoranyiBall::centered(dim, 2.0).unwrap();
    let f = |z: &GroupPoint| (-z.norm4()).exp() * (1.0 + z.x()[0]);
    let base = haar_integrate(&f, &Region::Ball(ball.clone()), &[], &spec).unwrap();
    let z0 = GroupPoint::new(&[0.7, -0.4], 0.3).unwrap();
    let moved = KoranyiBall::new(z0.inv(), 2.0).unwrap();
    let shifted = haar_integrate(
        &|z: &GroupPoint| f(&z0.mul(z).unwrap()),
        &Region::Ball(moved),
        &[],
        &spec,
    )
    .unwrap();
    assert!((shifted.value - base.value).abs() < 1e-6 * base.value.abs());
    let r = 1.7;
    let small = KoranyiBall::centered(dim, 2.0 / r).unwrap();
    let dilated = haar_integrate(
        &|z: &GroupPoint| f(&z.dilate(r).unwrap()),
        &Region::Ball(small),
        &[],
        &spec,
    )
    .unwrap();
    assert!((dilated.value - r.powi(-4) * base.value).abs() < 1e-6 * base.value.abs());
}

#[test]
fn ball_volume_is_center_independent_and_follows_power_law() {
    let dim = Dimension::new(1).unwrap();
    let spec = IntegrationSpec::grid(1e-8);
    let center = GroupPoint::new(&[3.0, -1.0], 2.0).unwrap();
    for (delta, expected) in [(1.0, 1.0), (2.0, 16.0), (0.5, 1.0 / 16.0)] {
        let b = KoranyiBall::new(center.clone(), delta).unwrap();
        let v = haar_integrate(&|_: &GroupPoint| 1.0, &Region::Ball(b), &[], &spec).unwrap();
        let ratio = v.value / unit_ball_volume_exact(dim);
        assert!((ratio - expected).abs() < 1e-6 * expected);
    }
}

#[test]
fn samples_fill_sub_balls_at_the_power_law_rate() {
    let center = GroupPoint::new(&[1.0, 2.0], -3.0).unwrap();
    let ball = KoranyiBall::new(center.clone(), 2.0).unwrap();
    let a = sample_ball(&ball, 40_000, 5);
    assert_eq!(a, sample_ball(&ball, 40_000, 5));
    assert!(a.iter().all(|z| ball.contains(z)));
    let inner = KoranyiBall::new(center, 1.0).unwrap();
    let frac = a.iter().filter(|z| inner.contains(z)).count() as f64 / a.len() as f64;
    let sd = (0.0625f64 * 0.9375 / a.len() as f64).sqrt();
    assert!((frac - 0.0625).abs() < 4.0 * sd, "{frac}");
}

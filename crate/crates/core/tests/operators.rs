use hlab_core::atoms::make_atom;
use hlab_core::calculus::DerivativeSpec;
use hlab_core::integrate::{sample_ball, sphere_measure, unit_ball_volume_exact, Resolution};
use hlab_core::operators::*;
use hlab_core::varexp::ExponentFunction;
use hlab_core::*;
use proptest::prelude::*;

fn d1() -> Dimension {
    Dimension::new(1).unwrap()
}

fn pt(x: f64, y: f64, t: f64) -> GroupPoint {
    GroupPoint::new(&[x, y], t).unwrap()
}

fn point() -> impl Strategy<Value = GroupPoint> {
    (-2.0f64..2.0, -2.0f64..2.0, -2.0f64..2.0).prop_map(|(x, y, t)| pt(x, y, t))
}

fn bump() -> Bump {
    Bump::new(KoranyiBall::new(pt(0.4, 0.1, -0.2), 0.7).unwrap(), 1.0, 2)
}

fn rotational() -> KernelSpec {
    KernelSpec::rotational(
        d1(),
        1.0,
        vec![1.5, 1.5],
        vec![RotationMatrix::identity(d1()), RotationMatrix::planar(0.9)],
    )
    .unwrap()
}

fn dilational() -> KernelSpec {
    KernelSpec::dilational(d1(), vec![1.5, 2.5], vec![1.0, 2.0]).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn kernels_are_homogeneous(y in point(), z in point(), r in 0.2f64..5.0) {
        for k in [rotational(), dilational()] {
            let base = kernel_eval(&k, &y, &z).unwrap();
            let scaled = kernel_eval(&k, &y.dilate(r).unwrap(), &z.dilate(r).unwrap()).unwrap();
            let expect = r.powf(k.alpha() - 4.0) * base;
            prop_assert!((scaled - expect).abs() <= 1e-11 * expect);
        }
    }

    #[test]
    fn omega_separation_matches_closed_form(z in point(), ri in 0.2f64..3.0, rj in 0.2f64..3.0) {
        let (lhs, closed) = omega_separation(ri, rj, &z);
        prop_assert!((lhs - closed).abs() <= 1e-12 * (1.0 + closed));
    }

    #[test]
    fn omega_regions_are_a_partition(z in point(), w in point()) {
        prop_assume!(z.koranyi_norm() > 1e-3);
        for k in [dilational(), KernelSpec::dilational(d1(), vec![1.0, 1.5, 1.5], vec![1.0, 1.5, 2.5]).unwrap()] {
            let y = z.mul(&w).unwrap();
            let flags = omega_memberships(&k, &z, &y).unwrap();
            prop_assert_eq!(flags.iter().filter(|b| **b).count(), 1);
            let label = omega_partition(&k, &z, &y).unwrap();
            prop_assert!(label.0 >= 1 && label.0 <= k.m() + 2);
        }
    }
}

#[test]
fn kernel_example_and_riesz_specialization() {
    let k = KernelSpec::dilational(d1(), vec![2.0, 2.0], vec![1.0, 2.0]).unwrap();
    let e = GroupPoint::identity(d1());
    assert!((kernel_eval(&k, &e, &pt(1.0, 0.0, 0.0)).unwrap() - 1.0).abs() < 1e-15);
    assert_eq!(k.constant(), 4.0);
    let r = KernelSpec::riesz(d1(), 1.0).unwrap();
    let (y, z) = (pt(0.3, 0.1, -0.4), pt(-1.0, 0.5, 0.2));
    let expect = y.inv().mul(&z).unwrap().koranyi_norm().powf(-3.0);
    assert!((kernel_eval(&r, &y, &z).unwrap() - expect).abs() < 1e-14 * expect);
    assert_eq!(kernel_eval(&r, &z, &z).unwrap(), f64::INFINITY);
}

#[test]
fn kernel_specs_reject_bad_parameters() {
    assert!(KernelSpec::dilational(d1(), vec![2.0, 2.0], vec![1.0, 1.0]).is_err());
    assert!(KernelSpec::dilational(d1(), vec![2.0, 1.0], vec![1.0, 2.0]).is_err());
    assert!(KernelSpec::rotational(d1(), 4.0, vec![], vec![]).is_err());
    assert!(KernelSpec::riesz(d1(), 0.0).is_err());
    let json = serde_json::to_string(&dilational()).unwrap();
    assert_eq!(
        serde_json::from_str::<KernelSpec>(&json).unwrap(),
        dilational()
    );
}

#[test]
fn separation_examples() {
    let s = separation_constants(&[1.0, 2.0]).unwrap();
    assert_eq!((s.beta, s.gamma_proof, s.gamma_star), (1.0, 2.0, 3.0));
    assert!((separation_constants(&[1.0, 1.1]).unwrap().beta - 0.1).abs() < 1e-12);
    assert!(separation_constants(&[1.0, 1.0]).is_err());
    let z = pt(1.0, 0.0, 0.0);
    let b = omega_ball(&dilational(), &z, 1).unwrap();
    assert_eq!(b.radius(), 0.5);
    assert_eq!(b.center(), &pt(2.0, 0.0, 0.0));
    assert!(omega_ball(&dilational(), &GroupPoint::identity(d1()), 0).is_err());
    assert!(omega_ball(&rotational(), &z, 0).is_err());
}

// int_{rho < 1} rho^{alpha - Q} = sigma int_0^1 r^{alpha - 1} dr = sigma / alpha.
#[test]
fn riesz_potential_of_the_unit_ball_at_the_origin() {
    let f = IndicatorSum::ball(KoranyiBall::centered(d1(), 1.0).unwrap());
    let e = GroupPoint::identity(d1());
    for alpha in [1.0, 2.0, 3.0] {
        let est = apply_riesz(alpha, &f, &e, &IntegrationSpec::grid(1e-6)).unwrap();
        let oracle = sphere_measure(d1()) / alpha;
        assert!(
            (est.value - oracle).abs() < 1e-6 * oracle,
            "{alpha}: {}",
            est.value
        );
        assert!(est.error < 1e-4 * oracle);
    }
    assert!((sphere_measure(d1()) - 4.0 * unit_ball_volume_exact(d1())).abs() < 1e-14);
}

#[test]
fn operator_is_linear_and_positive() {
    let spec = IntegrationSpec::grid(1e-6);
    let k = dilational();
    let a = bump();
    let b = Bump::new(KoranyiBall::new(pt(-0.5, 0.3, 0.4), 0.5).unwrap(), 1.0, 3);
    let neg = Bump::new(b.ball.clone(), -2.0, 3);
    let sum = BumpSum {
        bumps: vec![a.clone(), neg],
    };
    let z = pt(0.9, -0.3, 0.5);
    let ta = apply_t(&k, &a, &z, &spec).unwrap();
    let tb = apply_t(&k, &b, &z, &spec).unwrap();
    let ts = apply_t(&k, &sum, &z, &spec).unwrap();
    assert!(ta.value > 0.0 && tb.value > 0.0);
    let lin = ta.value - 2.0 * tb.value;
    assert!((ts.value - lin).abs() < 1e-6 * (ta.value + 2.0 * tb.value));
}

#[test]
fn radial_fields_give_rotation_invariant_images() {
    let spec = IntegrationSpec::grid(1e-6);
    let k = rotational();
    let f = Bump::new(KoranyiBall::centered(d1(), 1.0).unwrap(), 1.0, 2);
    let rot = RotationMatrix::planar(1.3);
    for z in [pt(0.5, 0.2, 0.1), pt(-1.5, 0.7, -0.4)] {
        let a = apply_t(&k, &f, &z, &spec).unwrap();
        let b = apply_t(&k, &f, &z.rotate(&rot).unwrap(), &spec).unwrap();
        assert!(
            (a.value - b.value).abs() <= a.error + b.error,
            "{a:?} vs {b:?}"
        );
    }
}

#[test]
fn riesz_potential_is_dilation_covariant() {
    let spec = IntegrationSpec::grid(1e-5);
    let f = bump();
    for (r, z) in [(0.5, pt(0.2, -0.3, 0.4)), (3.0, pt(1.0, 0.5, -0.7))] {
        let lhs = apply_riesz(1.0, &f, &z.dilate(r).unwrap(), &spec).unwrap();
        let fr = Dilated::new(f.clone(), r).unwrap();
        let rhs = apply_riesz(1.0, &fr, &z, &spec).unwrap();
        assert!((lhs.value - r * rhs.value).abs() <= lhs.error + r * rhs.error);
    }
}

#[test]
fn fractional_maximal_of_the_unit_indicator() {
    let spec = IntegrationSpec::grid(1e-6);
    let f = IndicatorSum::ball(KoranyiBall::centered(d1(), 1.0).unwrap());
    let e = GroupPoint::identity(d1());
    let radii = geometric_radii(0.125, 8.0, 4);
    let c0 = unit_ball_volume_exact(d1());
    let m2 = fractional_maximal(2.0, &f, &e, &radii, &spec).unwrap();
    assert!((m2 - c0.sqrt()).abs() < 1e-3 * c0.sqrt(), "{m2}");
    let m0 = fractional_maximal(0.0, &f, &e, &radii, &spec).unwrap();
    assert!((m0 - 1.0).abs() < 1e-6);
    let z = pt(1.5, 0.0, 0.3);
    let coarse = fractional_maximal(0.0, &f, &z, &geometric_radii(0.25, 8.0, 1), &spec).unwrap();
    let fine = fractional_maximal(0.0, &f, &z, &geometric_radii(0.25, 8.0, 2), &spec).unwrap();
    assert!(coarse > 0.0 && fine >= coarse);
}

#[test]
fn kernel_derivative_ratios() {
    let dspec = DerivativeSpec::default();
    let k = dilational();
    let ys = sample_ball(&KoranyiBall::centered(d1(), 2.0).unwrap(), 40, 1);
    let zs = sample_ball(&KoranyiBall::centered(d1(), 2.0).unwrap(), 40, 2);
    let pairs: Vec<_> = ys.into_iter().zip(zs).collect();
    let rep = kernel_derivative_bound(&k, 2, &pairs, &dspec).unwrap();
    assert!((rep.per_degree[0] - 1.0).abs() < 1e-12);
    assert!(rep.max_ratio.is_finite() && rep.pairs_used > 30);
    let r = 2.5;
    let scaled: Vec<_> = pairs
        .iter()
        .map(|(y, z)| (y.dilate(r).unwrap(), z.dilate(r).unwrap()))
        .collect();
    let big = kernel_derivative_bound(&k, 2, &scaled, &dspec).unwrap();
    assert_eq!(big.pairs_used, rep.pairs_used);
    for (a, b) in rep.per_degree.iter().zip(big.per_degree.iter()) {
        assert!((a - b).abs() < 1e-3 * a, "{a} vs {b}");
    }
}

#[test]
fn far_field_of_an_atom() {
    let spec = IntegrationSpec::grid(1e-6);
    let p = ExponentFunction::constant(d1(), 0.8).unwrap();
    let k =
        KernelSpec::rotational(d1(), 1.0, vec![3.0], vec![RotationMatrix::planar(0.7)]).unwrap();
    let ball = KoranyiBall::new(pt(0.3, -0.2, 0.1), 1.0).unwrap();
    let atom = make_atom(&ball, &p, 2.0, 1, 3, &spec).unwrap();
    let dir = pt(0.6, 0.5, 0.3);
    let dir = dir.dilate(1.0 / dir.koranyi_norm()).unwrap();

    let eval = Evaluator::new(
        &k,
        &atom,
        Resolution::level(0),
        1e-6,
        RuleChoice::Fixed(atom.rule()),
    )
    .unwrap();
    let s: Vec<f64> = (0..=10).map(|i| 8.0 * 2f64.powf(0.5 * i as f64)).collect();
    let zs: Vec<GroupPoint> = s.iter().map(|s| dir.dilate(*s).unwrap()).collect();
    let values: Vec<f64> = eval
        .eval_many(&zs)
        .unwrap()
        .into_iter()
        .map(f64::abs)
        .collect();
    let slope = loglog_slope(&s, &values);
    assert!((slope - (1.0 - 4.0 - 2.0)).abs() < 0.3, "{slope}");

    let far: Vec<GroupPoint> = zs
        .iter()
        .filter(|z| z.koranyi_norm() > 40.0)
        .cloned()
        .collect();
    let rep = far_field_atom_bound(&k, &atom, 2, 2.0, &far, &spec).unwrap();
    assert!(rep.max_ratio.is_finite() && rep.max_ratio > 0.0);
    assert!(rep.regions.iter().all(|r| *r == 0));
    let zero = atom.clone().scaled(0.0);
    let rep = far_field_atom_bound(&k, &zero, 2, 2.0, &far, &spec).unwrap();
    assert_eq!(rep.max_ratio, 0.0);
    assert!(matches!(
        far_field_atom_bound(&k, &atom, 2, 2.0, &[ball.center().clone()], &spec),
        Err(Error::InsideExpandedBall(_))
    ));
}

#[test]
fn expanded_and_preimage_balls() {
    let k = dilational();
    let ball = KoranyiBall::new(pt(1.0, 0.0, 0.5), 0.5).unwrap();
    let pre = preimage_balls(&k, &ball).unwrap();
    assert_eq!(pre[1].radius(), 0.25);
    assert_eq!(pre[1].center(), &pt(0.5, 0.0, 0.125));
    assert_eq!(expansion_factor(&k, 2.0, 1), 2.0 * 2.0 * 3.0);
    let exp = expanded_balls(&k, &ball, 12.0).unwrap();
    assert!(exp.iter().all(|b| b.radius() == 6.0));
    // z in a preimage ball puts the singular point into the original ball.
    for z in sample_ball(&pre[1], 100, 4) {
        assert!(ball.contains(&k.singular_point(1, &z)));
    }
}

#[test]
fn grand_maximal_proxy_properties() {
    let spec = IntegrationSpec::grid(1e-4);
    let z = pt(0.2, 0.1, 0.0);
    let s_grid = [0.5, 1.0, 2.0];
    let small = MollifierDictionary::new(d1(), 2, 1, 7).unwrap();
    let large = MollifierDictionary::new(d1(), 4, 1, 7).unwrap();
    assert_eq!(&large.members[..2], &small.members[..]);
    let zero = Bump::new(bump().ball, 0.0, 2);
    assert_eq!(
        grand_maximal_proxy(&zero, &z, &small, &s_grid, &spec).unwrap(),
        0.0
    );
    let a = grand_maximal_proxy(&bump(), &z, &small, &s_grid, &spec).unwrap();
    let b = grand_maximal_proxy(&bump(), &z, &large, &s_grid, &spec).unwrap();
    assert!(a > 0.0 && b >= a);
}

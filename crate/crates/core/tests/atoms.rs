use hlab_core::atoms::*;
use hlab_core::calculus::{monomial_eval, MultiIndex};
use hlab_core::integrate::{NodeSet, Resolution};
use hlab_core::varexp::ExponentFunction;
use hlab_core::*;
use proptest::prelude::*;

fn d1() -> Dimension {
    Dimension::new(1).unwrap()
}

fn spec() -> IntegrationSpec {
    IntegrationSpec::grid(1e-6)
}

fn radial() -> ExponentFunction {
    ExponentFunction::radial_from_fn(d1(), |s| 0.8 + 0.6 * s * s / (1.0 + s * s), 16.0, 65).unwrap()
}

fn ball(x: f64, y: f64, t: f64, r: f64) -> KoranyiBall {
    KoranyiBall::new(GroupPoint::new(&[x, y], t).unwrap(), r).unwrap()
}

#[test]
fn moment_dimension_examples() {
    assert_eq!(moment_dimension(d1(), 0), 1);
    assert_eq!(moment_dimension(d1(), 1), 3);
    assert_eq!(moment_dimension(d1(), 2), 7);
}

#[test]
fn moment_map_rank_matches_dimension() {
    for n in 1..=2 {
        let dim = Dimension::new(n).unwrap();
        for d in 0..=2 {
            assert_eq!(
                moment_rank(dim, d),
                moment_dimension(dim, d),
                "n = {n}, D = {d}"
            );
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn random_atoms_verify(
        x in -2.0f64..2.0, y in -2.0f64..2.0, t in -2.0f64..2.0,
        r in 0.1f64..3.0, degree in 0u32..3, seed in 0u64..10_000, p0 in 1.2f64..4.0
    ) {
        let p = radial();
        let b = ball(x, y, t, r);
        let a = make_atom(&b, &p, p0, degree, seed, &spec()).unwrap();
        let rep = verify_atom(&a, &p, &spec()).unwrap();
        prop_assert!(rep.pass, "{rep:?}");
        prop_assert!(rep.max_moment_residual < MOMENT_TOL);
        // a2 with the general formula: ||a||_{p0} ||chi_B||_{p(.)} <= |B|^{1/p0}.
        prop_assert!(rep.norm_p0 * a.certificate().indicator_norm <= b.volume().powf(1.0 / p0));
    }

    #[test]
    fn coefficients_lie_in_the_moment_null_space(degree in 0u32..3, seed in 0u64..1000) {
        let p = radial();
        let a = make_atom(&ball(0.0, 0.0, 0.0, 1.0), &p, 2.0, degree, seed, &spec()).unwrap();
        let g = moment_matrix(d1(), degree, a.monomials(), a.profile_power());
        let c = nalgebra::DVector::from_column_slice(a.coefficients());
        prop_assert!((&g * &c).norm() <= 1e-10 * g.norm() * c.norm());
    }
}

#[test]
fn single_moment_vanishes_for_degree_zero() {
    let p = radial();
    let a = make_atom(&ball(0.5, 0.5, 0.0, 0.8), &p, 2.0, 0, 3, &spec()).unwrap();
    let nodes = a.rule();
    let (int, abs) = nodes.integrate_with_abs(&|z: &GroupPoint| a.eval(z));
    assert!(int.abs() < 1e-8 * abs);
}

#[test]
fn counterexamples_fail_verification() {
    let p = radial();
    let b = ball(0.2, -0.1, 0.3, 0.7);
    let chi = Atom::from_coefficients(
        b.clone(),
        &p,
        2.0,
        0,
        0,
        vec![MultiIndex::zero(d1())],
        vec![1.0],
        &spec(),
    )
    .unwrap();
    let c = chi.certificate();
    let chi = chi.clone().scaled(0.99 * c.bound / c.norm_p0);
    let rep = verify_atom(&chi, &p, &spec()).unwrap();
    assert!(rep.size_ok && rep.support_ok);
    assert!(!rep.moments_ok && !rep.pass);

    let a = make_atom(&b, &p, 2.0, 1, 8, &spec()).unwrap();
    let wide = a.with_support_radius(1.5 * b.radius()).unwrap();
    let rep = verify_atom(&wide, &p, &spec()).unwrap();
    assert!(!rep.support_ok && !rep.pass);

    let big = make_atom(&b, &p, 2.0, 1, 8, &spec()).unwrap().scaled(1.5);
    assert!(!verify_atom(&big, &p, &spec()).unwrap().size_ok);
}

#[test]
fn translation_to_the_origin() {
    let p = ExponentFunction::constant(d1(), 0.9).unwrap();
    let b = ball(1.0, -0.5, 0.7, 0.6);
    let a = make_atom(&b, &p, 2.0, 2, 17, &spec()).unwrap();
    let moved = translate_atom(&a, b.center(), &p, &spec()).unwrap();
    assert!(moved.ball().center().is_identity());
    let rep = verify_atom(&moved, &p, &spec()).unwrap();
    assert!(rep.pass, "{rep:?}");
    assert!((rep.norm_p0 - verify_atom(&a, &p, &spec()).unwrap().norm_p0).abs() < 1e-12);
    assert!(matches!(
        translate_atom(&a, &GroupPoint::identity(d1()), &p, &spec()),
        Err(Error::CenterMismatch(_))
    ));
    let e = GroupPoint::identity(d1());
    let at_origin = make_atom(&ball(0.0, 0.0, 0.0, 0.6), &p, 2.0, 1, 2, &spec()).unwrap();
    let same = translate_atom(&at_origin, &e, &p, &spec()).unwrap();
    assert_eq!(same.coefficients(), at_origin.coefficients());
    assert!((same.certificate().norm_p0 - at_origin.certificate().norm_p0).abs() < 1e-12);
}

#[test]
fn dilation_preserves_support_and_moments() {
    let p = ExponentFunction::constant(d1(), 0.9).unwrap();
    let a = make_atom(&ball(0.3, 0.2, -0.1, 0.5), &p, 2.0, 1, 4, &spec()).unwrap();
    let base = verify_atom(&a, &p, &spec()).unwrap().norm_p0;
    for r in [0.25, 3.0] {
        let b = a.dilated(r, &p, &spec()).unwrap();
        let rep = verify_atom(&b, &p, &spec()).unwrap();
        assert!(rep.support_ok && rep.moments_ok, "{rep:?}");
        assert!((rep.norm_p0 - base).abs() < 1e-9 * base);
        let z = GroupPoint::new(&[0.1, 0.05], 0.02).unwrap();
        let w = a.ball().center().mul(&z).unwrap();
        let jac = r.powf(-4.0 / 2.0);
        assert!((b.eval(&w.dilate(r).unwrap()) - jac * a.eval(&w)).abs() < 1e-12);
    }
}

#[test]
fn json_records_rebuild_identical_atoms() {
    let p = radial();
    let a = make_atom(&ball(0.3, 0.2, -0.1, 0.5), &p, 1.7, 2, 99, &spec()).unwrap();
    let text = a.to_json().unwrap();
    let b = Atom::from_json(&text).unwrap();
    assert_eq!(a, b);
    for z in hlab_core::integrate::sample_ball(a.ball(), 50, 1) {
        assert_eq!(a.eval(&z).to_bits(), b.eval(&z).to_bits());
    }
    let mut bad: serde_json::Value = serde_json::from_str(&text).unwrap();
    bad["n"] = serde_json::json!(2);
    assert!(Atom::from_json(&bad.to_string()).is_err());
}

#[test]
fn the_rule_integrates_moments_like_a_fine_grid() {
    let p = radial();
    let b = ball(0.0, 0.0, 0.0, 1.0);
    let a = make_atom(&b, &p, 2.0, 1, 5, &spec()).unwrap();
    let fine = NodeSet::ball(&b, &[], Resolution::level(4));
    let coarse = a.rule();
    let j = MultiIndex::new(&[2, 0, 0]).unwrap();
    let g = |z: &GroupPoint| a.eval(z) * monomial_eval(&j, z);
    let x = fine.integrate(&g);
    let y = coarse.integrate(&g);
    assert!((x - y).abs() < 1e-6 * fine.integrate(&|z: &GroupPoint| a.eval(z).abs()));
}

#[test]
fn combinations_evaluate_as_weighted_sums() {
    let p = radial();
    let a = make_atom(&ball(0.0, 0.0, 0.0, 0.5), &p, 2.0, 0, 1, &spec()).unwrap();
    let b = make_atom(&ball(2.0, 0.0, 0.0, 0.5), &p, 2.0, 0, 2, &spec()).unwrap();
    let c = AtomicCombination::new(vec![a.clone(), b.clone()], vec![0.5, 2.0]).unwrap();
    let z = GroupPoint::new(&[0.1, 0.0], 0.0).unwrap();
    assert_eq!(c.eval(&z), 0.5 * a.eval(&z) + 2.0 * b.eval(&z));
    assert_eq!(c.support().balls().len(), 2);
    assert!(AtomicCombination::new(vec![a], vec![-1.0]).is_err());
}

use hlab_core::atoms::moment_dimension;
use hlab_core::calculus::*;
use hlab_core::*;
use proptest::prelude::*;

fn d1() -> Dimension {
    Dimension::new(1).unwrap()
}

fn gauss(z: &GroupPoint) -> f64 {
    let x2: f64 = z.x().iter().map(|v| v * v).sum();
    (-x2 - z.t() * z.t()).exp()
}

fn poly(dim: Dimension, degree: u32) -> impl Strategy<Value = PolynomialHG> {
    let basis = MultiIndex::up_to_degree(dim, degree);
    prop::collection::vec(-2.0f64..2.0, basis.len()).prop_map(move |c| {
        PolynomialHG::from_terms(dim, degree, basis.iter().cloned().zip(c)).unwrap()
    })
}

fn small_point() -> impl Strategy<Value = GroupPoint> {
    (-1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0)
        .prop_map(|(a, b, t)| GroupPoint::new(&[a, b], t).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn finite_differences_match_exact_vector_fields(p in poly(d1(), 3), z in small_point()) {
        let dspec = DerivativeSpec::default();
        let f = |w: &GroupPoint| p.eval(w);
        for k in 1..=3 {
            let fd = vector_field_apply(k, &f, &z, &dspec).unwrap();
            let exact = p.apply_vector_field(k - 1).eval(&z);
            prop_assert!((fd - exact).abs() < 1e-7 * (1.0 + exact.abs()), "X_{k}: {fd} vs {exact}");
        }
    }

    #[test]
    fn left_taylor_is_a_projector(p in poly(d1(), 3), b in small_point()) {
        let e = GroupPoint::identity(d1());
        prop_assert!(p.left_taylor(&e, 3).unwrap().max_coefficient_diff(&p) < 1e-10);
        // At another base the Taylor polynomial is w -> p(b w) exactly.
        let q = p.left_taylor(&b, 3).unwrap();
        for w in unit_cloud(d1(), 8, 3) {
            let lhs = q.eval(&w);
            let rhs = p.eval(&b.mul(&w).unwrap());
            prop_assert!((lhs - rhs).abs() < 1e-9 * (1.0 + rhs.abs()));
        }
    }

    #[test]
    fn monomials_are_homogeneous(e in prop::collection::vec(0u32..3, 3), z in small_point(), r in 0.2f64..5.0) {
        let i = MultiIndex::new(&e).unwrap();
        let lhs = monomial_eval(&i, &z.dilate(r).unwrap());
        let rhs = r.powi(i.degree() as i32) * monomial_eval(&i, &z);
        prop_assert!((lhs - rhs).abs() < 1e-12 * (1.0 + rhs.abs()));
    }

    #[test]
    fn derivatives_are_homogeneous(z in small_point(), r in 0.5f64..2.0) {
        let dspec = DerivativeSpec::default();
        let fr = |w: &GroupPoint| gauss(&w.dilate(r).unwrap());
        for i in MultiIndex::up_to_degree(d1(), 2) {
            let lhs = higher_derivative(&i, &fr, &z, &dspec).unwrap();
            let rhs = r.powi(i.degree() as i32)
                * higher_derivative(&i, &gauss, &z.dilate(r).unwrap(), &dspec).unwrap();
            prop_assert!((lhs - rhs).abs() < 1e-6 * (1.0 + rhs.abs()), "{i}: {lhs} vs {rhs}");
        }
    }
}

#[test]
fn vector_field_examples() {
    let dspec = DerivativeSpec::default();
    let t = |z: &GroupPoint| z.t();
    let x1 = |z: &GroupPoint| z.x()[0];
    let z = GroupPoint::new(&[0.3, -0.8], 1.1).unwrap();
    assert!((vector_field_apply(3, &t, &z, &dspec).unwrap() - 1.0).abs() < 1e-9);
    assert!((vector_field_apply(1, &t, &z, &dspec).unwrap() - (-0.8 / 2.0)).abs() < 1e-9);
    assert!(vector_field_apply(2, &x1, &z, &dspec).unwrap().abs() < 1e-9);
    let sq = |z: &GroupPoint| z.x()[0] * z.x()[0];
    let i = MultiIndex::new(&[2, 0, 0]).unwrap();
    assert!((higher_derivative(&i, &sq, &z, &dspec).unwrap() - 2.0).abs() < 1e-6);
    assert!(vector_field_apply(4, &t, &z, &dspec).is_err());
}

#[test]
fn richardson_levels_agree_with_halved_step() {
    let dspec = DerivativeSpec::default();
    let z = GroupPoint::new(&[0.2, 0.4], -0.3).unwrap();
    let i = MultiIndex::new(&[1, 1, 0]).unwrap();
    let a = derivative_at_scale(&i, &gauss, &z, &dspec, 1.0).unwrap();
    let b = derivative_at_scale(&i, &gauss, &z, &dspec.halved(), 1.0).unwrap();
    assert!((a.value - b.value).abs() <= 10.0 * (a.error + b.error) + 1e-10);
}

#[test]
fn finite_difference_taylor_matches_derivatives() {
    let dspec = DerivativeSpec::default();
    let e = GroupPoint::identity(d1());
    let p = left_taylor(&gauss, &e, 2, &dspec).unwrap();
    for i in MultiIndex::up_to_degree(d1(), 2) {
        let exact = p.apply_derivative(&i).eval(&e);
        let fd = higher_derivative(&i, &gauss, &e, &dspec).unwrap();
        assert!((exact - fd).abs() < 1e-6, "{i}: {exact} vs {fd}");
    }
    // exp(-|x|^2 - t^2) = 1 - x1^2 - x2^2 + ...: the degree-2 part is exact.
    let c = |e: &[u32]| p.coefficient(&MultiIndex::new(e).unwrap());
    assert!((c(&[0, 0, 0]) - 1.0).abs() < 1e-9);
    assert!((c(&[2, 0, 0]) + 1.0).abs() < 1e-5);
    assert!((c(&[0, 2, 0]) + 1.0).abs() < 1e-5);
    assert!(c(&[0, 0, 1]).abs() < 1e-5);
    assert!(c(&[1, 1, 0]).abs() < 1e-5);
}

#[test]
fn interpolation_size_matches_moment_dimension() {
    for n in 1..=2 {
        let dim = Dimension::new(n).unwrap();
        for d in 0..=3 {
            let (basis, m) = interpolation_matrix(dim, d);
            assert_eq!(basis.len(), moment_dimension(dim, d));
            assert_eq!(m.nrows(), m.ncols());
            assert!(m.clone().lu().is_invertible());
        }
    }
}

#[test]
fn taylor_remainder_vanishes_on_low_degree_polynomials() {
    let dspec = DerivativeSpec::default();
    let p = PolynomialHG::from_terms(
        d1(),
        1,
        [
            (MultiIndex::zero(d1()), 0.5),
            (MultiIndex::new(&[1, 0, 0]).unwrap(), -2.0),
            (MultiIndex::new(&[0, 1, 0]).unwrap(), 1.5),
        ],
    )
    .unwrap();
    let f = |z: &GroupPoint| p.eval(z);
    let base = GroupPoint::new(&[0.1, 0.2], 0.3).unwrap();
    let samples = unit_cloud(d1(), 20, 4);
    let cloud = unit_cloud(d1(), 10, 5);
    let r = taylor_remainder_ratio(&f, &base, 2, &samples, 2.0, &cloud, &dspec).unwrap();
    assert!(r.max_remainder < 1e-9);
    assert_eq!(r.constant, 0.0);
}

#[test]
fn taylor_ratio_is_dilation_covariant_and_stable() {
    let dspec = DerivativeSpec::default();
    let e = GroupPoint::identity(d1());
    let r = 1.6;
    let cloud = unit_cloud(d1(), 12, 8);
    let samples: Vec<GroupPoint> = unit_cloud(d1(), 12, 9)
        .into_iter()
        .filter(|z| !z.is_identity())
        .map(|z| z.dilate(0.3).unwrap())
        .collect();
    let fr = |w: &GroupPoint| gauss(&w.dilate(r).unwrap());
    let a = taylor_remainder_ratio(&fr, &e, 2, &samples, 1.0, &cloud, &dspec).unwrap();
    let scaled: Vec<GroupPoint> = samples.iter().map(|z| z.dilate(r).unwrap()).collect();
    let b = taylor_remainder_ratio(&gauss, &e, 2, &scaled, 1.0, &cloud, &dspec).unwrap();
    for (x, y) in a.ratios.iter().zip(b.ratios.iter()) {
        assert!((x - y).abs() < 1e-4 * y.abs().max(1e-8), "{x} vs {y}");
    }
    let finer = unit_cloud(d1(), 24, 8);
    let c = taylor_remainder_ratio(&gauss, &e, 2, &scaled, 1.0, &finer, &dspec).unwrap();
    assert!(c.constant.is_finite() && c.constant > 0.0);
    assert!(c.constant <= a.constant * (1.0 + 1e-6) && c.constant > 0.75 * a.constant);
}

#[test]
fn vanishing_derivative_is_not_flagged_unstable() {
    // d^2/dx^2 (e^x sin x) = 2 e^x cos x vanishes at x = pi / 2.
    let f = |w: &GroupPoint| w.x()[0].exp() * w.x()[0].sin();
    let z = GroupPoint::new(&[std::f64::consts::FRAC_PI_2, 0.0], 0.0).unwrap();
    let i = MultiIndex::new(&[2, 0, 0]).unwrap();
    let d = higher_derivative(&i, &f, &z, &DerivativeSpec::default()).unwrap();
    assert!(d.abs() < 1e-6, "{d}");
}

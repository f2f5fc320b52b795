use hlab_core::integrate::unit_ball_volume_exact;
use hlab_core::varexp::*;
use hlab_core::*;
use proptest::prelude::*;

fn d1() -> Dimension {
    Dimension::new(1).unwrap()
}

fn spec() -> IntegrationSpec {
    IntegrationSpec::grid(1e-6)
}

fn ball(x: f64, y: f64, t: f64, r: f64) -> KoranyiBall {
    KoranyiBall::new(GroupPoint::new(&[x, y], t).unwrap(), r).unwrap()
}

/// Radius of the n = 1 ball of unit volume.
fn unit_volume_radius() -> f64 {
    unit_ball_volume_exact(d1()).powf(-0.25)
}

fn two_region() -> (IndicatorSum, ExponentFunction) {
    let r = unit_volume_radius();
    let e1 = ball(-2.0, 0.0, 0.0, r);
    let e2 = ball(2.0, 0.0, 0.0, r);
    let p = ExponentFunction::new(
        d1(),
        ExponentSpec::BallPieces {
            pieces: vec![
                BallPiece {
                    center: vec![-2.0, 0.0, 0.0],
                    radius: r,
                    value: 1.0,
                },
                BallPiece {
                    center: vec![2.0, 0.0, 0.0],
                    radius: r,
                    value: 2.0,
                },
            ],
            outside: 1.5,
        },
    )
    .unwrap();
    let f = IndicatorSum::new(vec![(e1, 1.0), (e2, 1.0)]).unwrap();
    (f, p)
}

fn radial_example() -> ExponentFunction {
    ExponentFunction::radial_from_fn(d1(), |s| 0.8 + 0.6 * s * s / (1.0 + s * s), 16.0, 65).unwrap()
}

#[test]
fn modular_examples() {
    let r = unit_volume_radius();
    let f = IndicatorSum::new(vec![(ball(0.0, 0.0, 0.0, r), 3.0)]).unwrap();
    let p2 = ExponentFunction::constant(d1(), 2.0).unwrap();
    assert!((modular(&f, &p2, 1.0, &spec()).unwrap() - 9.0).abs() < 1e-9);
    let (g, p) = two_region();
    assert!((modular(&g, &p, 1.0, &spec()).unwrap() - 2.0).abs() < 1e-9);
    let grid: Vec<f64> = (0..40)
        .map(|k| modular(&g, &p, 1.3f64.powi(k - 10), &spec()).unwrap())
        .collect();
    assert!(grid.windows(2).all(|w| w[1] < w[0]));
    assert!(*grid.last().unwrap() < 1e-3);
}

#[test]
fn two_region_norm_is_the_golden_ratio() {
    // 1/lambda + 1/lambda^2 = 1.
    let golden = (1.0 + 5f64.sqrt()) / 2.0;
    let (f, p) = two_region();
    let n = luxemburg_norm(&f, &p, &spec()).unwrap();
    assert!((n - golden).abs() < 1e-3, "{n}");
}

#[test]
fn constant_exponent_closed_forms() {
    let c0 = unit_ball_volume_exact(d1());
    let chi = IndicatorSum::ball(ball(0.0, 0.0, 0.0, 1.0));
    let p2 = ExponentFunction::constant(d1(), 2.0).unwrap();
    let n = luxemburg_norm(&chi, &p2, &spec()).unwrap();
    assert!((n - c0.sqrt()).abs() < 1e-3 * c0.sqrt());
    for p0 in [0.7, 1.0, 1.5, 3.0] {
        let b = ball(0.5, -1.0, 0.2, 0.6);
        let p = ExponentFunction::constant(d1(), p0).unwrap();
        let expected = b.volume().powf(1.0 / p0);
        let chi = IndicatorSum::ball(b.clone());
        let n = luxemburg_norm(&chi, &p, &spec()).unwrap();
        assert!((n - expected).abs() < 1e-2 * expected);
        assert!((indicator_norm(&b, &p, &spec()).unwrap() - expected).abs() < 1e-12 * expected);
        let bump = Bump::new(b, 1.3, 3);
        let lux = luxemburg_norm(&bump, &p, &spec()).unwrap();
        let lp = lp_norm(&bump, p0, &spec()).unwrap();
        assert!((lux - lp).abs() < 5e-5 * lp, "p0 = {p0}: {lux} vs {lp}");
    }
}

#[test]
fn norm_vanishes_only_on_zero() {
    let p = radial_example();
    let zero = IndicatorSum::new(vec![(ball(0.0, 0.0, 0.0, 1.0), 0.0)]).unwrap();
    assert_eq!(luxemburg_norm(&zero, &p, &spec()).unwrap(), 0.0);
    let chi = IndicatorSum::ball(ball(0.0, 0.0, 0.0, 0.1));
    assert!(luxemburg_norm(&chi, &p, &spec()).unwrap() > 0.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn absolute_homogeneity(c in -5.0f64..5.0) {
        prop_assume!(c.abs() > 1e-3);
        let p = radial_example();
        let b = Bump::new(ball(0.3, 0.1, -0.2, 0.9), 1.0, 2);
        let n = luxemburg_norm(&b, &p, &spec()).unwrap();
        let nc = luxemburg_norm(&Bump::new(b.ball.clone(), c, 2), &p, &spec()).unwrap();
        prop_assert!((nc - c.abs() * n).abs() < 1e-5 * nc);
    }

    #[test]
    fn quasi_triangle_inequality(
        x in -1.0f64..1.0, y in -1.0f64..1.0, r1 in 0.2f64..1.0, r2 in 0.2f64..1.0, w in 0.2f64..3.0
    ) {
        let p = radial_example();
        let f = IndicatorSum::new(vec![(ball(0.0, 0.0, 0.0, r1), 1.0)]).unwrap();
        let g = IndicatorSum::new(vec![(ball(x, y, 0.1, r2), w)]).unwrap();
        let sum = IndicatorSum::new(vec![(ball(0.0, 0.0, 0.0, r1), 1.0), (ball(x, y, 0.1, r2), w)]).unwrap();
        let k = 2f64.powf(1.0 / p.underline_p() - 1.0);
        let lhs = luxemburg_norm(&sum, &p, &spec()).unwrap();
        let rhs = k * (luxemburg_norm(&f, &p, &spec()).unwrap() + luxemburg_norm(&g, &p, &spec()).unwrap());
        prop_assert!(lhs <= rhs * (1.0 + 1e-5));
    }

    #[test]
    fn power_identity_on_piecewise_constant_exponents(
        v in prop::collection::vec(0.6f64..3.0, 3), seed in 0u64..1000
    ) {
        let pieces = vec![
            BallPiece { center: vec![0.0, 0.0, 0.0], radius: 0.5, value: v[0] },
            BallPiece { center: vec![0.0, 0.0, 0.0], radius: 1.0, value: v[1] },
        ];
        let p = ExponentFunction::new(d1(), ExponentSpec::BallPieces { pieces, outside: v[2] }).unwrap();
        let b = Bump::new(ball(0.0, 0.0, 0.0, 1.5), 1.0 + (seed % 7) as f64, 2);
        let s = p.underline_p();
        let r = power_identity_check(&b, &p, s, &spec()).unwrap();
        prop_assert!(r.pass, "{r:?}");
        let one = power_identity_check(&b, &p, 1.0, &spec()).unwrap();
        prop_assert!(one.relative_difference < 1e-12);
    }
}

#[test]
fn power_identity_closed_form() {
    let b = ball(0.0, 0.0, 0.0, 1.0);
    let p = ExponentFunction::constant(d1(), 2.0).unwrap();
    let r = power_identity_check(&IndicatorSum::ball(b.clone()), &p, 2.0, &spec()).unwrap();
    assert!((r.lhs - b.volume()).abs() < 1e-4 * b.volume());
    assert!((r.rhs - b.volume()).abs() < 1e-4 * b.volume());
    assert!(r.pass);
}

#[test]
fn d_p_table() {
    assert_eq!(d_p_from_minus(1.0, 1), 0);
    assert_eq!(d_p_from_minus(0.5, 1), 4);
    assert_eq!(d_p_from_minus(6.0 / 7.0, 2), 1);
    // Brute force over the strict inequality (2n + k + 3) p > 2n + 2.
    for n in 1..=3 {
        for p in [0.3, 0.45, 0.6, 0.8, 0.95, 1.2] {
            let k = (0..100)
                .find(|k| (2 * n + k + 3) as f64 * p > (2 * n + 2) as f64)
                .unwrap();
            assert_eq!(d_p_from_minus(p, n), k as u32, "n = {n}, p = {p}");
        }
    }
}

#[test]
fn conjugate_exponents() {
    let p2 = ExponentFunction::constant(d1(), 2.0).unwrap();
    let q = conjugate_exponent(&p2, 1.0).unwrap();
    assert!((q.eval(&GroupPoint::identity(d1())) - 4.0).abs() < 1e-12);
    let p = radial_example();
    let same = conjugate_exponent(&p, 0.0).unwrap();
    let z = GroupPoint::new(&[0.4, 0.2], 0.1).unwrap();
    assert_eq!(same.eval(&z), p.eval(&z));
    // ||chi_B||_q / (|B|^{-alpha/Q} ||chi_B||_p) stays bounded over a radius sweep.
    let q = conjugate_exponent(&p, 1.0).unwrap();
    let ratios: Vec<f64> = [0.125, 0.25, 0.5, 1.0, 2.0, 4.0]
        .iter()
        .map(|d| {
            let b = ball(0.2, 0.0, 0.0, *d);
            let nq = indicator_norm(&b, &q, &spec()).unwrap();
            let np = indicator_norm(&b, &p, &spec()).unwrap();
            nq / (b.volume().powf(-0.25) * np)
        })
        .collect();
    let max = ratios.iter().copied().fold(0.0, f64::max);
    let min = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    assert!(max / min < 4.0, "{ratios:?}");
}

#[test]
fn log_holder_reports() {
    let c = check_log_holder(&ExponentFunction::constant(d1(), 2.0).unwrap(), 2000, 1);
    assert_eq!(c.c_local, 0.0);
    assert_eq!(c.c_infinity, 0.0);
    let r = check_log_holder(&radial_example(), 2000, 2);
    assert!(r.c_local.is_finite() && r.c_infinity.is_finite());
    assert_eq!(r.violations, 0);
    assert!(!r.divergent);
    let q = conjugate_exponent(&radial_example(), 1.0).unwrap();
    let rq = check_log_holder(&q, 2000, 3);
    assert!(rq.c_local.is_finite() && !rq.divergent);
    let step = ExponentFunction::new(
        d1(),
        ExponentSpec::HalfSpace {
            axis: 0,
            offset: 0.1,
            below: 1.0,
            above: 2.0,
        },
    )
    .unwrap();
    assert!(check_log_holder(&step, 2000, 4).divergent);
}

#[test]
fn radial_exponents_have_the_symmetries() {
    let p = radial_example();
    let rot = RotationMatrix::planar(0.9);
    assert!(check_symmetry(&p, &ExponentSymmetry::Rotation(rot.clone()), 500, 1).is_ok());
    let step = ExponentFunction::new(
        d1(),
        ExponentSpec::HalfSpace {
            axis: 0,
            offset: 0.0,
            below: 1.0,
            above: 2.0,
        },
    )
    .unwrap();
    assert!(matches!(
        check_symmetry(&step, &ExponentSymmetry::Rotation(rot), 500, 1),
        Err(Error::SymmetryViolated(_))
    ));
}

#[test]
fn a_quantity_examples() {
    let p = radial_example();
    let one = BallFamily::new(vec![ball(0.1, 0.2, 0.0, 0.7)], vec![1.0]).unwrap();
    assert!((a_quantity(&one, &p, &spec()).unwrap() - 1.0).abs() < 1e-3);
    let fam = BallFamily::new(
        vec![
            ball(0.0, 0.0, 0.0, 0.5),
            ball(0.3, 0.1, 0.0, 0.4),
            ball(-1.0, 0.5, 0.2, 0.3),
        ],
        vec![1.0, 0.5, 2.0],
    )
    .unwrap();
    let a = a_quantity(&fam, &p, &spec()).unwrap();
    let a3 = a_quantity(&fam.scaled(3.0).unwrap(), &p, &spec()).unwrap();
    assert!((a3 - 3.0 * a).abs() < 1e-4 * a3);
    // Adding a ball never decreases the aggregate.
    let mut balls = fam.balls().to_vec();
    let mut weights = fam.weights().to_vec();
    balls.push(ball(1.0, -0.5, 0.0, 0.4));
    weights.push(0.7);
    let bigger = a_quantity(&BallFamily::new(balls, weights).unwrap(), &p, &spec()).unwrap();
    assert!(bigger >= a * (1.0 - 1e-6));
}

#[test]
fn a_quantity_for_disjoint_balls_and_constant_exponent() {
    for p0 in [0.5, 0.8, 1.0] {
        let p = ExponentFunction::constant(d1(), p0).unwrap();
        let lambdas = [0.5, 1.0, 2.0];
        let fam = BallFamily::new(
            vec![
                ball(-3.0, 0.0, 0.0, 0.5),
                ball(0.0, 0.0, 0.0, 0.5),
                ball(3.0, 0.0, 0.0, 0.5),
            ],
            lambdas.to_vec(),
        )
        .unwrap();
        let expected = lambdas
            .iter()
            .map(|l| l.powf(p0))
            .sum::<f64>()
            .powf(1.0 / p0);
        let a = a_quantity(&fam, &p, &spec()).unwrap();
        assert!(
            (a - expected).abs() < 1e-3 * expected,
            "p0 = {p0}: {a} vs {expected}"
        );
    }
}

#[test]
fn b_star_examples() {
    let p = radial_example();
    let fam = BallFamily::new(
        vec![ball(0.2, 0.1, 0.0, 0.5), ball(-0.4, 0.3, 0.1, 0.3)],
        vec![1.0, 1.0],
    )
    .unwrap();
    let id = b_star_comparison(&fam, &p, &BallTransform::Identity, 1.0, &spec()).unwrap();
    assert_eq!(id.ratio, 1.0);
    let c = ExponentFunction::constant(d1(), 1.5).unwrap();
    let single = BallFamily::new(vec![ball(0.2, 0.1, 0.0, 0.5)], vec![1.0]).unwrap();
    let r = b_star_comparison(&single, &c, &BallTransform::Identity, 2.0, &spec()).unwrap();
    assert!((r.ratio - 1.0).abs() < 1e-3);
    let rot = BallTransform::Rotation(RotationMatrix::planar(1.1));
    let r = b_star_comparison(&fam, &p, &rot, 2.0, &spec()).unwrap();
    assert!(r.ratio.is_finite() && r.ratio > 0.0);
    let step = ExponentFunction::new(
        d1(),
        ExponentSpec::HalfSpace {
            axis: 1,
            offset: 0.0,
            below: 1.0,
            above: 2.0,
        },
    )
    .unwrap();
    assert!(b_star_comparison(&fam, &step, &rot, 2.0, &spec()).is_err());
}

#[test]
fn exponent_specs_round_trip_through_json() {
    let p = radial_example();
    let text = serde_json::to_string(p.spec()).unwrap();
    let back: ExponentSpec = serde_json::from_str(&text).unwrap();
    assert_eq!(&back, p.spec());
    let raw = r#"{"kind": "symmetrized", "base": {"kind": "half-space", "axis": 0, "offset": 0.0, "below": 1.0, "above": 2.0}, "angles": [1.5707963267948966], "order": 4}"#;
    let spec: ExponentSpec = serde_json::from_str(raw).unwrap();
    let s = ExponentFunction::new(d1(), spec).unwrap();
    let rot = RotationMatrix::planar(std::f64::consts::FRAC_PI_2);
    assert!(check_symmetry(&s, &ExponentSymmetry::Rotation(rot), 300, 2).is_ok());
}

use proptest::prelude::*;

use super::*;

#[test]
fn cutoff_values() {
    assert_eq!(theta_c1(0.0, 2.0), 2.0);
    assert_eq!(theta_c1(1.0, 2.0), 0.0);
    assert_eq!(theta_c1(0.5, 2.0), 1.0);
    assert_eq!(theta_c1_derivative(0.5, 2.0), -3.0);
    assert_eq!(theta_c1_derivative(0.0, 1.0), 0.0);
    assert_eq!(theta_c1_derivative(1.0, 1.0), 0.0);
}

#[test]
fn rescaled_cutoff_spline_matches_the_cubic() {
    let s = Spline::cutoff(2.0);
    for i in 0..=40 {
        let t = -0.5 + i as f64 * 0.05;
        assert!((s.eval(t) - theta_c1(2.0 * t - 0.5, 2.0)).abs() < 1e-12, "t = {t}");
    }
}

#[test]
fn sigmoid_examples() {
    assert_eq!(algebraic_sigmoid(0.0, 3.0), 0.5);
    // direct formula, no tail rewriting
    let direct = |t: f64, k: f64| 0.5 * (1.0 + k * t / (1.0 + k * k * t * t).sqrt());
    assert!((algebraic_sigmoid(10.0, 10.0) - 1.0).abs() < 1e-3);
    assert!((algebraic_sigmoid(10.0, 10.0) - direct(10.0, 10.0)).abs() < 1e-15);
    assert!((algebraic_sigmoid(-0.3, 2.0) - direct(-0.3, 2.0)).abs() < 1e-15);
}

proptest! {
    #[test]
    fn sigmoid_is_odd_about_one_half(t in -50.0f64..50.0, k in 0.1f64..20.0) {
        prop_assert!((algebraic_sigmoid(t, k) + algebraic_sigmoid(-t, k) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn sigmoid_is_increasing(t in -50.0f64..50.0, dt in 1e-3f64..1.0, k in 0.1f64..20.0) {
        prop_assert!(algebraic_sigmoid(t + dt, k) > algebraic_sigmoid(t, k));
    }

    #[test]
    fn delta_sequence_is_nonincreasing_outside_the_unit_ball(j in 1u32..12, r in 1.0f64..3.0) {
        prop_assert!(delta_j(j + 1, &[r, 0.0]) <= delta_j(j, &[r, 0.0]));
    }
}

#[test]
fn single_polynomial_is_returned_unchanged() {
    let p = Poly::new(vec![1.0, -2.0, 0.5]);
    let out = nash_smooth_1d(&[(p.clone(), (-1.0, 1.0))], 0.1).unwrap();
    for t in [-3.0, 0.0, 0.4, 2.0] {
        assert_eq!(out.eval(&[t]).unwrap(), p.eval(t));
    }
    assert!(out.is_nash());
}

#[test]
fn smoothing_the_cutoff_is_certified() {
    let s = Spline::cutoff(2.0);
    let pieces = vec![
        (s.pieces[0].clone(), (-2.0, 0.25)),
        (s.pieces[1].clone(), (0.25, 0.75)),
        (s.pieces[2].clone(), (0.75, 3.0)),
    ];
    let (out, cert) = nash_smooth_1d_with(&Gadgets::standard().cal, &pieces, 0.1).unwrap();
    assert!(out.is_nash());
    assert!(cert.unwrap().passed());
    // independent sup oracle on a grid offset from the certification lattice
    let mut worst: f64 = 0.0;
    for i in 0..5000 {
        let t = -2.0 + 5.0 * (i as f64 + 0.37) / 5000.0;
        let d = out.eval_with_gradient(&[t]).unwrap();
        let th = theta_c1(2.0 * t - 0.5, 2.0);
        let dth = 2.0 * theta_c1_derivative(2.0 * t - 0.5, 2.0);
        worst = worst.max((d.value - th).abs() + (d.gradient[0] - dth).abs());
    }
    assert!(worst < 0.05, "C¹ distance {worst}");
}

#[test]
fn kinked_input_is_rejected() {
    let pieces = [(Poly::new(vec![0.0, -1.0]), (-1.0, 0.0)), (Poly::new(vec![0.0, 1.0]), (0.0, 1.0))];
    match nash_smooth_1d(&pieces, 0.1) {
        Err(Error::NotC1 { knot, mismatch }) => {
            assert_eq!(knot, 0.0);
            assert_eq!(mismatch, 2.0);
        }
        other => panic!("expected NotC1, got {other:?}"),
    }
}

#[test]
fn gaps_between_intervals_are_rejected() {
    let pieces = [(Poly::constant(0.0), (-1.0, 0.0)), (Poly::constant(0.0), (0.5, 1.0))];
    assert!(matches!(nash_smooth_1d(&pieces, 0.1), Err(Error::Degenerate(_))));
}

#[test]
fn psi_examples() {
    let g = Gadgets::standard();
    assert!(psi_gadget(0.5, 0.1, -1.0).unwrap() > 1.0);
    let d = g.psi().eval_with_gradient(&[0.5, 0.1, 0.2]).unwrap();
    assert!(d.value < 0.5 && d.grad_norm() < 0.5);
    let a = g.cal.a_psi;
    for (mu, delta, y) in [(0.3, 0.07, 0.0), (0.9, 0.4, 0.2), (0.05, 0.03, 0.01), (0.2, 0.6, 2.5)] {
        let d = g.psi().eval_with_gradient(&[mu, delta, y]).unwrap();
        assert!(d.grad_norm() <= a / delta, "({mu}, {delta}, {y})");
        assert!((0.0..3.0).contains(&d.value));
    }
    assert!(matches!(psi_gadget(1.0, 0.1, 0.0), Err(Error::Domain(_))));
    assert!(matches!(psi_gadget(0.5, 0.0, 0.0), Err(Error::Domain(_))));
}

#[test]
fn phi_examples() {
    let v = phi_gadget(0.2, -3.0).unwrap();
    assert!(v > 0.0 && v < 0.4);
    assert!((phi_gadget(0.2, 0.5).unwrap() - 0.5).abs() < 0.2);
    assert!(matches!(phi_gadget(-0.1, 0.0), Err(Error::Domain(_))));
}

#[test]
fn phi_presmoothing_stays_in_range_below_delta() {
    for &delta in &[0.5, 0.1, 0.02] {
        for i in 0..=4000 {
            let y = (-3.0 + (3.0 + delta) * i as f64 / 4000.0).min(delta);
            let v = phi_presmoothing(delta, y);
            assert!((0.0..=delta).contains(&v), "φ({delta}, {y}) = {v}");
        }
    }
}

#[test]
fn phi_lipschitz_bound_holds_off_grid() {
    let g = Gadgets::standard();
    let mut worst: f64 = 0.0;
    for &delta in &[0.45, 0.13, 0.031] {
        for i in 0..3000 {
            let y = -3.0 + 6.0 * (i as f64 + 0.5) / 3000.0;
            worst = worst.max(g.phi().eval_with_gradient(&[delta, y]).unwrap().grad_norm());
        }
    }
    assert!(worst.is_finite() && worst < g.cal.phi_lip);
}

#[test]
fn psi_unit_examples() {
    assert!((psi_unit_gadget(0.1, 0.5).unwrap() - 0.5).abs() < 0.1);
    for y in [-5.0, 7.0] {
        let v = psi_unit_gadget(0.1, y).unwrap();
        assert!(v > 0.0 && v < 1.0);
    }
}

#[test]
fn gadgets_are_nash() {
    let g = Gadgets::standard();
    for f in [g.psi(), g.phi(), g.psi_unit(), &delta_j_field(3, 2)] {
        assert!(f.is_nash());
    }
}

#[test]
fn delta_sequence_examples() {
    assert_eq!(delta_j(1, &[0.0, 0.0]), 0.5);
    assert!((delta_j(2, &[0.6, 0.8]) - 0.1).abs() < 1e-15);
    let f = delta_j_field(2, 2);
    assert!((f.eval(&[0.6, 0.8]).unwrap() - 0.1).abs() < 1e-15);
    let scaled = delta_j_scaled(2, 2, 2.0);
    assert!((scaled.eval(&[1.2, 1.6]).unwrap() - 0.1).abs() < 1e-15);
}

#[test]
fn delta_sequence_and_slope_shrink_on_a_box() {
    let sup = |j: u32| {
        let f = delta_j_field(j, 2);
        let mut m: (f64, f64) = (0.0, 0.0);
        for i in 0..=20 {
            for k in 0..=20 {
                let p = [-1.5 + 0.15 * i as f64, -1.5 + 0.15 * k as f64];
                let d = f.eval_with_gradient(&p).unwrap();
                m = (m.0.max(d.value), m.1.max(d.grad_norm()));
            }
        }
        m
    };
    let (v1, s1) = sup(1);
    let (v, s) = (2..12).map(sup).find(|(v, s)| *v <= v1 / 2.0 && *s <= s1 / 2.0).unwrap();
    assert!(v < v1 && s < s1);
}

#[test]
fn rule_table_lookup() {
    let cal = &Gadgets::standard().cal;
    let smallest = cal.rules.last().unwrap();
    assert_eq!(cal.rule(smallest.mu).0, smallest.radius);
    assert_eq!(cal.rule(0.7).0, cal.rules[0].radius);
    let (r, _) = cal.rule(smallest.mu / 10.0);
    assert!((r - smallest.radius / 10.0).abs() < 1e-18);
}

#[test]
fn calibration_round_trips_through_a_file() {
    let dir = std::env::temp_dir().join(format!("smoother-cal-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("calibration.json");
    let cal = GadgetCalibration::frozen();
    cal.save(&path).unwrap();
    assert_eq!(GadgetCalibration::load(&path).unwrap(), cal);
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn committed_calibration_passes_every_contract() {
    let certs = gadget_certificates(Gadgets::standard(), 1e-3).unwrap();
    let failed: Vec<_> = certs.iter().filter(|c| !c.passed()).map(|c| &c.claim).collect();
    assert!(failed.is_empty(), "{failed:?}");
    assert!(Gadgets::standard().cal.l_psi >= 4.0);
}

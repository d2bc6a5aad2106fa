use proptest::prelude::*;

use super::*;
use crate::cells::{Bounding, GraphTarget, LipschitzCell, Rotation};

fn f(dim: usize, s: &str) -> ScalarField {
    ScalarField::parse(dim, s).unwrap()
}

fn konst(dim: usize, c: f64) -> ScalarField {
    ScalarField::constant(dim, c)
}

// Dense sampling of |f − g| and |f′ − g′| on [a, b].
fn sup_1d(f: &ScalarField, g: &ScalarField, a: f64, b: f64, n: usize) -> (f64, f64) {
    let mut out = (0.0f64, 0.0f64);
    for i in 0..=n {
        let x = a + (b - a) * i as f64 / n as f64;
        let (u, v) = (f.eval_with_gradient(&[x]).unwrap(), g.eval_with_gradient(&[x]).unwrap());
        out.0 = out.0.max((u.value - v.value).abs());
        out.1 = out.1.max((u.gradient[0] - v.gradient[0]).abs());
    }
    out
}

fn abs_strata() -> Stratification {
    Stratification::new(
        f(1, "abs(x)").with_lip_bound(1.0),
        vec![
            Stratum::open(LipschitzCell::interval(None, Some(0.0)), None),
            Stratum::open(LipschitzCell::interval(Some(0.0), None), None),
            Stratum::graph(LipschitzCell::line_point(0.0)),
        ],
    )
}

#[test]
fn schedule_respects_bounds() {
    let o = ApproxOptions::new(AxisBox::cube(1, 1.0), 0.1);
    assert_eq!(o.schedule(), J_SCHEDULE.to_vec());
    assert_eq!(o.clone().with_j_max(5).schedule(), vec![1, 2, 3, 4, 5]);
    assert_eq!(o.clone().with_j_min(7).with_j_max(12).schedule(), vec![7, 8, 11, 12]);
    assert!(o.with_j_min(9).with_j_max(3).schedule().is_empty());
}

#[test]
fn open_interval_with_a_square() {
    let opts = ApproxOptions::new(AxisBox::new(vec![-0.5], vec![1.5]), 1e-3);
    let cell = LipschitzCell::interval(Some(0.0), Some(1.0));
    let sq = f(1, "x^2");
    let r = approx_on_open_cell(&sq, &cell, &konst(1, 0.1), &konst(1, 0.1), &opts).unwrap();
    assert!(r.certificate.passed());
    assert!(r.g.is_nash());
    let (d0, d1) = sup_1d(&sq, &r.g, 0.1, 0.9, 20000);
    assert!(d0 + d1 < 0.1, "{d0} + {d1}");
    // globally defined: finite far outside the cell
    assert!(r.g.eval(&[-40.0]).unwrap().is_finite());
}

#[test]
fn open_interval_with_a_pole() {
    let opts = ApproxOptions::new(AxisBox::new(vec![-1.0], vec![2.0]), 1e-3);
    let cell = LipschitzCell::interval(Some(0.0), Some(1.0));
    let inv = f(1, "1/x");
    let r = approx_on_open_cell(&inv, &cell, &konst(1, 0.1), &konst(1, 0.2), &opts).unwrap();
    let (d0, d1) = sup_1d(&inv, &r.g, 0.2, 0.8, 20000);
    assert!(d0 + d1 < 0.1, "{d0} + {d1}");
    for x in [-1.0, 0.0, 0.05, 1.0, 2.0] {
        assert!(r.g.eval(&[x]).unwrap().is_finite(), "{x}");
    }
}

#[test]
fn half_line_uses_the_phi_branch() {
    let opts = ApproxOptions::new(AxisBox::new(vec![-1.0], vec![3.0]), 1e-3);
    let cell = LipschitzCell::interval(Some(0.0), None);
    let id = f(1, "x");
    let r = approx_on_open_cell(&id, &cell, &konst(1, 0.1), &konst(1, 0.1), &opts).unwrap();
    let (d0, d1) = sup_1d(&id, &r.g, 0.1, 3.0, 30000);
    assert!(d0 + d1 < 0.1);
    // Φ keeps the substituted point inside the cell
    assert!(r.g.eval(&[-1.0]).unwrap() > 0.0);
}

#[test]
fn rotated_wedge_cell() {
    // {|y| < x} seen from u = (y, x): u₂ > |u₁| after swapping, here via the rotation
    let base = LipschitzCell::interval(Some(0.0), None);
    let x = Bounding::new(f(1, "x"), 1.0).unwrap();
    let mx = Bounding::new(f(1, "-x"), 1.0).unwrap();
    let wedge = LipschitzCell::band(base, Some(mx), Some(x)).unwrap().with_rotation(Rotation::swap(2, 0, 1)).unwrap();
    let opts = ApproxOptions::new(AxisBox::cube(2, 1.0), 2e-2);
    let local = f(2, "y");
    let r = approx_on_open_cell(&local, &wedge, &konst(2, 0.05), &konst(2, 0.1), &opts).unwrap();
    assert!(r.certificate.passed(), "{:?}", r.certificate);
}

#[test]
fn open_cell_input_errors() {
    let opts = ApproxOptions::new(AxisBox::cube(1, 1.0), 0.1);
    let point = LipschitzCell::line_point(0.0);
    let e = approx_on_open_cell(&f(1, "x"), &point, &konst(1, 0.1), &konst(1, 0.1), &opts);
    assert!(matches!(e, Err(Error::InvalidCell(_))));
    let cell = LipschitzCell::interval(Some(0.0), None);
    let e = approx_on_open_cell(&f(2, "x"), &cell, &konst(1, 0.1), &konst(1, 0.1), &opts);
    assert!(matches!(e, Err(Error::Dimension { .. })));
}

#[test]
fn lipschitz_abs_on_the_line() {
    let opts = ApproxOptions::new(AxisBox::cube(1, 2.0), 1e-3);
    let strat = abs_strata();
    let coarse = lipschitz_approx(&strat, &konst(1, 0.1), &opts).unwrap();
    let fine = lipschitz_approx(&strat, &konst(1, 0.01), &opts).unwrap();
    for (r, eps) in [(&coarse, 0.1), (&fine, 0.01)] {
        assert!(r.passed());
        assert!(r.g.is_nash());
        assert!(sup_1d(&strat.target, &r.g, -2.0, 2.0, 40000).0 < eps);
        assert!(r.measured_lip.unwrap() < r.lip_bound_g.unwrap());
        // a chord-slope oracle between dense samples stays below the bound
        let chord = (0..4000)
            .map(|i| {
                let x = -2.0 + i as f64 * 1e-3;
                (r.g.eval(&[x + 1e-3]).unwrap() - r.g.eval(&[x]).unwrap()).abs() / 1e-3
            })
            .fold(0.0, f64::max);
        assert!(chord <= r.lip_bound_g.unwrap());
    }
    assert_eq!(coarse.lip_bound_g, fine.lip_bound_g);
    assert!(fine.j_used >= coarse.j_used);
}

#[test]
fn refinement_is_monotone() {
    let opts = ApproxOptions::new(AxisBox::cube(1, 2.0), 1e-3);
    let strat = abs_strata();
    let r = lipschitz_approx(&strat, &konst(1, 0.02), &opts).unwrap();
    for j in [r.j_used + 1, r.j_used + 5] {
        let again = lipschitz_approx(&strat, &konst(1, 0.02), &opts.clone().with_j_min(j)).unwrap();
        assert_eq!(again.j_used, j);
    }
}

#[test]
fn ramp_in_the_plane() {
    let swap = Rotation::swap(2, 0, 1);
    let line = LipschitzCell::interval(None, None);
    let strat = Stratification::new(
        f(2, "max(x, 0)").with_lip_bound(1.0),
        vec![
            Stratum::open(LipschitzCell::band(line.clone(), None, Some(Bounding::constant(1, 0.0))).unwrap().with_rotation(swap.clone()).unwrap(), None),
            Stratum::open(LipschitzCell::band(line.clone(), Some(Bounding::constant(1, 0.0)), None).unwrap().with_rotation(swap.clone()).unwrap(), None),
            Stratum::graph(LipschitzCell::graph(line, Bounding::constant(1, 0.0)).unwrap().with_rotation(swap).unwrap()),
        ],
    );
    let opts = ApproxOptions::new(AxisBox::cube(2, 2.0), 5e-2);
    let r = lipschitz_approx(&strat, &konst(2, 0.1), &opts).unwrap();
    assert!(r.passed());
    assert_eq!(r.glued, 3);
    // dense oracle along a transversal line
    for y in [-1.7, 0.3] {
        for i in 0..=4000 {
            let x = -2.0 + i as f64 * 1e-3;
            assert!((r.g.eval(&[x, y]).unwrap() - x.max(0.0)).abs() < 0.1);
        }
    }
}

#[test]
fn nash_targets_come_back_unchanged() {
    let strat = Stratification::new(f(1, "x^2/4").with_lip_bound(1.0), vec![]);
    let opts = ApproxOptions::new(AxisBox::cube(1, 2.0), 1e-2);
    let r = lipschitz_approx(&strat, &konst(1, 0.1), &opts).unwrap();
    assert_eq!((r.j_used, r.sup_error), (1, 0.0));
    let r = c1_approx(&Stratification::new(f(1, "x^2"), vec![]), &konst(1, 0.1), &opts).unwrap();
    assert_eq!(r.j_used, 1);
    assert!(r.a_measured.unwrap() < 1e-12);
}

#[test]
fn stratification_errors() {
    let opts = ApproxOptions::new(AxisBox::cube(1, 2.0), 1e-2);
    let mut s = abs_strata();
    s.target = f(1, "abs(x)");
    assert!(matches!(lipschitz_approx(&s, &konst(1, 0.1), &opts), Err(Error::NotLipschitz(_))));
    let overlapping = Stratification::new(
        f(1, "abs(x)").with_lip_bound(1.0),
        vec![
            Stratum::open(LipschitzCell::interval(None, Some(0.5)), None),
            Stratum::open(LipschitzCell::interval(Some(-0.5), None), None),
        ],
    );
    assert!(matches!(lipschitz_approx(&overlapping, &konst(1, 0.1), &opts), Err(Error::InvalidCell(_))));
    let straddling = Stratification::new(
        f(1, "abs(x)").with_lip_bound(1.0),
        vec![Stratum::open(LipschitzCell::interval(None, None), None)],
    );
    assert!(matches!(lipschitz_approx(&straddling, &konst(1, 0.1), &opts), Err(Error::InvalidCell(_))));
    let wrong_local = Stratification::new(
        f(1, "abs(x)").with_lip_bound(1.0),
        vec![
            Stratum::open(LipschitzCell::interval(None, Some(0.0)), Some(f(1, "x"))),
            Stratum::open(LipschitzCell::interval(Some(0.0), None), None),
            Stratum::graph(LipschitzCell::line_point(0.0)),
        ],
    );
    assert!(matches!(lipschitz_approx(&wrong_local, &konst(1, 0.1), &opts), Err(Error::InvalidCell(_))));
    assert!(matches!(lipschitz_approx(&abs_strata(), &konst(1, 0.0), &opts), Err(Error::Degenerate(_))));
    let e = lipschitz_approx(&abs_strata(), &konst(1, 1e-9), &opts.with_j_max(3));
    assert!(matches!(e, Err(Error::NoConvergence(_))), "{e:?}");
}

#[test]
fn stratification_from_json() {
    let src = r#"{"strata": [
        {"cell": {"kind": "band", "upper": 0, "basis": {"kind": "point"}}},
        {"cell": {"kind": "band", "lower": 0, "basis": {"kind": "point"}}, "local_f": "x"},
        {"cell": {"kind": "graph", "xi": 0, "basis": {"kind": "point"}}}
    ]}"#;
    let j: StratificationJson = serde_json::from_str(src).unwrap();
    let s = j.build(f(1, "abs(x)").with_lip_bound(1.0)).unwrap();
    let classes: Vec<StratumClass> = s.strata.iter().map(|s| s.class).collect();
    assert_eq!(classes, [StratumClass::Open, StratumClass::Open, StratumClass::Graph]);
    assert!(serde_json::from_str::<StratificationJson>(r#"{"strata": [], "extra": 1}"#).is_err());
}

#[test]
fn automatic_one_variable_strata() {
    let s = Stratification::auto_1d(&f(1, "abs(x - 0.5) + max(x, -1)"), &AxisBox::cube(1, 2.0), 1e-2).unwrap();
    let points: Vec<f64> = s
        .strata
        .iter()
        .filter(|s| s.class == StratumClass::Graph)
        .map(|s| s.cell.graph_target().unwrap().xi.field.eval(&[]).unwrap())
        .collect();
    assert_eq!(points, vec![-1.0, 0.5]);
    assert_eq!(s.strata.len(), 5);
}

#[test]
fn band_step_grounded_in_one_variable() {
    let target = GraphTarget::new(Bounding::constant(0, 0.0), None).unwrap();
    let opts = ApproxOptions::new(AxisBox::cube(1, 1.0), 1e-3);
    let sq = f(1, "x^2");
    let b = c1_band_approx(&sq, &target, &konst(1, 0.003), &konst(1, 0.1), &opts).unwrap();
    assert!(b.passed());
    // λ₀ = 0 and λ₁ = δ′: g = δ′·y
    assert!((b.g.eval(&[0.3]).unwrap() - 0.0009).abs() < 1e-15);
    // a band wider than the gauge of df = 2y is refused
    let wide = c1_band_approx(&sq, &target, &konst(1, 0.1), &konst(1, 0.1), &opts);
    assert!(matches!(wide, Err(Error::Gauge(_))), "{wide:?}");
}

#[test]
fn band_step_is_exact_for_affine_targets() {
    let target = GraphTarget::new(Bounding::new(f(1, "x/2"), 0.5).unwrap(), None).unwrap();
    let opts = ApproxOptions::new(AxisBox::cube(2, 1.0), 2e-2);
    let lin = f(2, "3*x - 2*y + 1");
    let b = c1_band_approx(&lin, &target, &konst(2, 0.02), &konst(2, 0.1), &opts).unwrap();
    assert!(b.passed());
    for p in [[0.1, 0.07], [-0.8, -0.4], [0.5, 0.9]] {
        assert!((b.g.eval(&p).unwrap() - lin.eval(&p).unwrap()).abs() < 1e-12);
    }
}

#[test]
fn band_step_on_a_slanted_graph() {
    let target = GraphTarget::new(Bounding::new(f(1, "x/2"), 0.5).unwrap(), None).unwrap();
    let opts = ApproxOptions::new(AxisBox::cube(2, 1.0), 1e-2);
    let b = c1_band_approx(&f(2, "x*y"), &target, &konst(2, 0.004), &konst(2, 0.1), &opts).unwrap();
    assert!(b.passed(), "{:?}", b.certificates);
}

#[test]
fn c1_x_abs_x_on_the_line() {
    let strat = Stratification::new(
        f(1, "x*abs(x)").with_class(crate::fields::SmoothClass::C1),
        abs_strata().strata,
    );
    let opts = ApproxOptions::new(AxisBox::cube(1, 2.0), 1e-3);
    let r = c1_approx(&strat, &konst(1, 0.1), &opts).unwrap();
    assert!(r.passed());
    assert!(r.g.is_nash());
    let a = r.a_measured.unwrap();
    assert!(a < C1_SLACK);
    let (d0, d1) = sup_1d(&strat.target, &r.g, -2.0, 2.0, 400_000);
    assert!(d0 <= a * 0.1 + 1e-12 && d1 <= a * 0.1 + 1e-12, "{d0} {d1} vs a = {a}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]
    #[test]
    fn automatic_strata_find_the_kink(k in -1.5f64..1.5) {
        let t = f(1, &format!("max(x - ({k}), 0)"));
        let s = Stratification::auto_1d(&t, &AxisBox::cube(1, 2.0), 1e-2).unwrap();
        let kinks: Vec<f64> = s.strata.iter().filter_map(|s| s.cell.graph_target()).map(|g| g.xi.field.eval(&[]).unwrap()).collect();
        prop_assert_eq!(kinks.len(), 1);
        prop_assert!((kinks[0] - k).abs() < 1e-9);
        for st in s.strata.iter().filter(|s| s.class == StratumClass::Open) {
            let lf = st.local_f.as_ref().unwrap();
            prop_assert!(lf.is_nash());
        }
    }
}

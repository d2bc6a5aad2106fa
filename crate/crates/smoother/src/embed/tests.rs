use proptest::prelude::*;

use super::*;
use crate::fields::SmoothClass;

fn f(dim: usize, s: &str) -> ScalarField {
    ScalarField::parse(dim, s).unwrap()
}

fn graph(s: &str) -> GraphManifold {
    GraphManifold::new(f(1, s))
}

#[test]
fn distance_on_an_interval() {
    let d = distance_to_complement(|p| p[0] > 0.0 && p[0] < 1.0, &[0.3], &[vec![0.0], vec![1.0]], 0.0).unwrap();
    assert!((d.lo - 0.3).abs() < 1e-15 && (d.hi - 0.3).abs() < 1e-15);
}

#[test]
fn distance_in_the_disc() {
    let m = 20_000;
    let circle: Vec<Vec<f64>> = (0..m)
        .map(|k| {
            let t = std::f64::consts::TAU * k as f64 / m as f64;
            vec![t.cos(), t.sin()]
        })
        .collect();
    let h = std::f64::consts::PI / m as f64;
    let p = [0.4 * 0.6f64.cos(), 0.4 * 0.6f64.sin()];
    let d = distance_to_complement(|p| norm(p) < 1.0, &p, &circle, h).unwrap();
    assert!(d.lo <= 0.6 && 0.6 <= d.hi + 1e-15, "{d:?}");
    assert!(d.hi - d.lo <= h + 1e-15);
}

#[test]
fn distance_in_the_square() {
    let h = 1e-3;
    let mut edge = Vec::new();
    for k in 0..=1000 {
        let t = k as f64 * 1e-3;
        edge.extend([vec![t, 0.0], vec![t, 1.0], vec![0.0, t], vec![1.0, t]]);
    }
    let d = distance_to_complement(|p| p.iter().all(|&v| v > 0.0 && v < 1.0), &[0.2, 0.5], &edge, h).unwrap();
    assert!(d.lo <= 0.2 && 0.2 <= d.hi && d.hi - 0.2 < h);
}

#[test]
fn distance_needs_a_boundary_and_an_inside_point() {
    assert_eq!(distance_to_complement(|_| true, &[0.0], &[], 0.1), Err(Error::EmptyBoundary));
    let e = distance_to_complement(|p| p[0] > 0.0, &[-1.0], &[vec![0.0]], 0.1);
    assert!(matches!(e, Err(Error::Domain(_))));
}

#[test]
fn retraction_examples() {
    let r = graph("0").retract(&[3.0, 0.5]).unwrap();
    assert_eq!(r.point, vec![3.0, 0.0]);
    let r = graph("x^2").retract(&[0.0, 0.1]).unwrap();
    assert!(norm(&r.point) < 1e-12);
    for c in [-0.7, 0.25, 1.5] {
        let r = graph("x").retract(&[0.0, c]).unwrap();
        assert!((r.point[0] - c / 2.0).abs() < 1e-12 && (r.point[1] - c / 2.0).abs() < 1e-12);
    }
}

#[test]
fn retraction_far_from_a_parabola() {
    // (0, 5) sits on the medial axis of y = x²: the vertical foot is a local maximum
    let m = graph("x^2");
    assert!(matches!(m.retract(&[0.0, 5.0]), Err(Error::NoConvergence(_))));
    // off the axis the foot solves x + 2x(x² − 5) = 0.3; bisection oracle on [1, 3]
    let (mut a, mut b) = (1.0f64, 3.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        if mid + 2.0 * mid * (mid * mid - 5.0) < 0.3 {
            a = mid;
        } else {
            b = mid;
        }
    }
    let r = m.retract(&[0.3, 5.0]).unwrap();
    assert!((r.point[0] - a).abs() < 1e-9, "{:?} vs {a}", r.point);
}

#[test]
fn retraction_onto_a_surface() {
    let m = GraphManifold::new(f(2, "x*y/2 + x^2/4"));
    let p = [0.3, -0.2, 0.4];
    let r = m.retract(&p).unwrap();
    let diff: Vec<f64> = p.iter().zip(&r.point).map(|(a, b)| a - b).collect();
    for t in m.tangents(&r.point[..2]).unwrap() {
        let dot: f64 = diff.iter().zip(&t).map(|(a, b)| a * b).sum();
        assert!(dot.abs() < ORTHOGONALITY_TOL);
    }
    // nothing on a fine patch of the graph is closer
    let best = norm(&diff);
    for i in -40..=40 {
        for j in -40..=40 {
            let q = m.lift(&[r.point[0] + i as f64 * 5e-3, r.point[1] + j as f64 * 5e-3]).unwrap();
            let d = norm(&p.iter().zip(&q).map(|(a, b)| a - b).collect::<Vec<_>>());
            assert!(d >= best - 1e-12);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]
    #[test]
    fn retraction_is_idempotent_and_orthogonal(x in -1.5f64..1.5, off in -0.3f64..0.3) {
        let m = graph("x^3/3 + x/2");
        let base = m.lift(&[x]).unwrap();
        let t = &m.tangents(&[x]).unwrap()[0];
        // step along the normal, well inside the tube
        let p = [base[0] - off * t[1], base[1] + off * t[0]];
        let r = m.retract(&p).unwrap();
        prop_assert!(r.residual < ORTHOGONALITY_TOL);
        let diff = [p[0] - r.point[0], p[1] - r.point[1]];
        let tt = &m.tangents(&r.point[..1]).unwrap()[0];
        prop_assert!((diff[0] * tt[0] + diff[1] * tt[1]).abs() < ORTHOGONALITY_TOL);
        let again = m.retract(&r.point).unwrap();
        prop_assert!(norm(&[again.point[0] - r.point[0], again.point[1] - r.point[1]]) < 1e-9);
    }
}

#[test]
fn soft_minimum_is_sandwiched() {
    let faces = [f(2, "x"), f(2, "1 - x"), f(2, "y"), f(2, "1 - y")];
    let s = soft_min_distance(&faces, 4).unwrap();
    for i in 1..50 {
        for j in 1..50 {
            let p = [i as f64 / 50.0, j as f64 / 50.0];
            let m = p[0].min(1.0 - p[0]).min(p[1]).min(1.0 - p[1]);
            let v = s.eval(&p).unwrap();
            assert!(v <= m * (1.0 + 1e-12) && v >= m / 2f64.sqrt() * (1.0 - 1e-12));
        }
    }
    assert!(s.is_nash());
    assert!(matches!(soft_min_distance(&faces, 3), Err(Error::Degenerate(_))));
    assert!(matches!(soft_min_distance(&[], 2), Err(Error::Degenerate(_))));
}

#[test]
fn reciprocal_graph_of_the_interval() {
    let omega = LipschitzCell::interval(Some(0.0), Some(1.0));
    let rho = soft_min_distance(&[f(1, "x"), f(1, "1 - x")], 4).unwrap();
    let grid = SampleGrid::new(AxisBox::new(vec![-0.5], vec![1.5]), 1e-3);
    let e = reciprocal_graph_embedding(&omega, &rho, &grid).unwrap();
    assert!(e.passed(), "{:?}", e.certificates);
    // direct evaluation oracle
    let h = e.manifold.height();
    assert!(h.eval(&[0.01]).unwrap() > 50.0 && h.eval(&[0.001]).unwrap() > 500.0);
    assert!(h.eval(&[0.999]).unwrap() > 500.0);
    assert_eq!(e.divergence.len(), FRONTIER_DISTANCES.len());
    for probe in &e.divergence {
        assert_eq!(probe.sequences, 2);
        assert!(probe.min_height >= 1.0 / probe.distance * (1.0 - 1e-6), "{probe:?}");
    }
}

#[test]
fn reciprocal_graph_of_the_square() {
    let omega = LipschitzCell::open_box(&AxisBox::cube(2, 0.5));
    let faces = [f(2, "x + 0.5"), f(2, "0.5 - x"), f(2, "y + 0.5"), f(2, "0.5 - y")];
    let rho = soft_min_distance(&faces, 4).unwrap();
    let grid = SampleGrid::new(AxisBox::cube(2, 0.6), 2e-2);
    let e = reciprocal_graph_embedding(&omega, &rho, &grid).unwrap();
    assert!(e.passed());
    assert!(e.bijective_samples >= 1000);
    assert!(e.height_near(1e-3).unwrap().min_height > 1e3);
    assert!(e.monotone);
}

#[test]
fn undominated_smoothing_is_refused() {
    let omega = LipschitzCell::interval(Some(0.0), Some(1.0));
    // x(1 − x) is exactly ρ/2 at the midpoint
    let grid = SampleGrid::new(AxisBox::new(vec![0.0], vec![1.0]), 1e-2);
    let e = reciprocal_graph_embedding(&omega, &f(1, "x*(1 - x)"), &grid);
    assert!(matches!(e, Err(Error::NotDominated(_))), "{e:?}");
}

#[test]
fn the_whole_line_has_no_frontier() {
    let omega = LipschitzCell::interval(None, None);
    let grid = SampleGrid::new(AxisBox::cube(1, 2.0), 1e-2);
    let e = reciprocal_graph_embedding(&omega, &f(1, "1/(1 + x^2)"), &grid).unwrap();
    assert!(e.passed());
    assert!(e.divergence.is_empty());
    assert!(e.manifold.height().eval(&[2.0]).unwrap() <= 5.0 + 1e-12);
}

fn circle_map() -> Vec<Stratification> {
    let region = AxisBox::cube(1, 2.0);
    ["(1 - (x*abs(x))^2)/(1 + (x*abs(x))^2)", "2*x*abs(x)/(1 + (x*abs(x))^2)"]
        .iter()
        .map(|s| Stratification::auto_1d(&f(1, s).with_class(SmoothClass::C1), &region, 1e-2).unwrap())
        .collect()
}

#[test]
fn circle_valued_approximation() {
    let opts = ApproxOptions::new(AxisBox::cube(1, 2.0), 1e-3);
    let fs = circle_map();
    let r = manifold_valued_approx(&fs, &Target::Sphere { ambient: 2 }, &ScalarField::constant(1, 0.1), &opts).unwrap();
    assert!(r.passed(), "{:?}", r.certificates);
    assert!(r.g.iter().all(ScalarField::is_nash));
    // dense oracle, away from the grid
    for i in 0..40_000 {
        let x = -2.0 + (i as f64 + 0.37) * 1e-4;
        let g: Vec<_> = r.g.iter().map(|c| c.eval_with_gradient(&[x]).unwrap()).collect();
        let t: Vec<_> = fs.iter().map(|s| s.target.eval_with_gradient(&[x]).unwrap()).collect();
        assert!((g[0].value.hypot(g[1].value) - 1.0).abs() < LANDING_TOL);
        let d0 = (g[0].value - t[0].value).hypot(g[1].value - t[1].value);
        let d1 = (g[0].gradient[0] - t[0].gradient[0]).hypot(g[1].gradient[0] - t[1].gradient[0]);
        assert!(d0 + d1 < 0.1, "{x}: {d0} + {d1}");
    }
}

#[test]
fn constant_maps_are_fixed() {
    let opts = ApproxOptions::new(AxisBox::cube(1, 1.0), 1e-2);
    let fs: Vec<_> = [0.6, 0.8].iter().map(|&c| Stratification::new(ScalarField::constant(1, c), vec![])).collect();
    let r = manifold_valued_approx(&fs, &Target::Sphere { ambient: 2 }, &ScalarField::constant(1, 0.1), &opts).unwrap();
    for x in [-1.0, 0.1, 0.9] {
        assert!((r.g[0].eval(&[x]).unwrap() - 0.6).abs() < 1e-9);
        assert!((r.g[1].eval(&[x]).unwrap() - 0.8).abs() < 1e-9);
    }
}

#[test]
fn flat_target_truncates() {
    let opts = ApproxOptions::new(AxisBox::cube(1, 2.0), 1e-3);
    let region = AxisBox::cube(1, 2.0);
    let fs = vec![
        Stratification::auto_1d(&f(1, "x*abs(x)").with_class(SmoothClass::C1), &region, 1e-2).unwrap(),
        Stratification::new(ScalarField::constant(1, 0.0), vec![]),
    ];
    let target = Target::Graph(graph("0"));
    let r = manifold_valued_approx(&fs, &target, &ScalarField::constant(1, 0.1), &opts).unwrap();
    assert!(r.passed());
    for x in [-1.3, 0.0, 0.7] {
        assert_eq!(r.g[1].eval(&[x]).unwrap(), 0.0);
        assert_eq!(r.g[0].eval(&[x]).unwrap(), r.theta[0].eval(&[x]).unwrap());
    }
}

#[test]
fn maps_off_the_target_are_refused() {
    let opts = ApproxOptions::new(AxisBox::cube(1, 1.0), 1e-2);
    let fs: Vec<_> = [0.5, 0.5].iter().map(|&c| Stratification::new(ScalarField::constant(1, c), vec![])).collect();
    let sphere = Target::Sphere { ambient: 2 };
    let eps = ScalarField::constant(1, 0.1);
    assert!(matches!(manifold_valued_approx(&fs, &sphere, &eps, &opts), Err(Error::Domain(_))));
    assert!(matches!(manifold_valued_approx(&fs[..1], &sphere, &eps, &opts), Err(Error::Dimension { .. })));
}

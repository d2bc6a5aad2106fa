use proptest::prelude::*;

use super::*;

fn f(dim: usize, s: &str) -> ScalarField {
    ScalarField::parse(dim, s).unwrap()
}

// {0 < x < 1, 0 < y < x}
fn triangle() -> LipschitzCell {
    let base = LipschitzCell::interval(Some(0.0), Some(1.0));
    LipschitzCell::band(base, Some(Bounding::constant(1, 0.0)), Some(Bounding::new(f(1, "x"), 1.0).unwrap())).unwrap()
}

fn segment_distance(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
    let t = (((p[0] - a[0]) * dx + (p[1] - a[1]) * dy) / (dx * dx + dy * dy)).clamp(0.0, 1.0);
    ((p[0] - a[0] - t * dx).powi(2) + (p[1] - a[1] - t * dy).powi(2)).sqrt()
}

// Distance to a 1-D graph by dense sampling of the foot followed by golden-section polishing.
fn graph_distance_oracle(xi: impl Fn(f64) -> f64, p: [f64; 2]) -> f64 {
    let d = |t: f64| ((t - p[0]).powi(2) + (xi(t) - p[1]).powi(2)).sqrt();
    let (mut best_t, mut best) = (p[0], d(p[0]));
    for i in 0..=20000 {
        let t = p[0] - 5.0 + 10.0 * i as f64 / 20000.0;
        if d(t) < best {
            best = d(t);
            best_t = t;
        }
    }
    let (mut a, mut b) = (best_t - 1e-3, best_t + 1e-3);
    for _ in 0..100 {
        let m1 = a + (b - a) * 0.382;
        let m2 = a + (b - a) * 0.618;
        if d(m1) < d(m2) {
            b = m2
        } else {
            a = m1
        }
    }
    best.min(d((a + b) / 2.0))
}

#[test]
fn sandwich_constant_examples() {
    let s = sandwich_constants(1.0).unwrap();
    assert_eq!((s.c, s.kappa), (1.0 / 32.0, 0.25));
    let s = sandwich_constants(10.0).unwrap();
    assert!((s.c - 1.0 / 880.0).abs() < 1e-18 && (s.kappa - 0.05).abs() < 1e-18);
    assert!(sandwich_constants(-1.0).is_err());
}

#[test]
fn triangle_membership() {
    let t = triangle();
    assert_eq!((t.dim(), t.cell_dim()), (2, 2));
    assert!(t.is_open());
    assert!(t.contains(&[0.5, 0.25]).unwrap());
    assert!(!t.contains(&[0.5, 0.75]).unwrap());
    assert!(!t.contains(&[1.5, 0.1]).unwrap());
    assert!(!t.contains(&[0.5, 0.0]).unwrap());
    assert!(t.contains(&[1.0]).is_err());
}

#[test]
fn graph_membership_tolerance() {
    let g = LipschitzCell::graph(LipschitzCell::interval(None, None), Bounding::new(f(1, "2*x"), 2.0).unwrap()).unwrap();
    assert_eq!(g.cell_dim(), 1);
    assert!(g.contains(&[0.5, 1.0 + 5e-10]).unwrap());
    assert!(!g.contains(&[0.5, 1.0 + 5e-9]).unwrap());
}

#[test]
fn complement_distance_of_the_triangle() {
    let t = triangle();
    let corners = [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0]];
    for p in [[0.5, 0.25], [0.9, 0.1], [0.3, 0.29], [0.6, 0.01], [0.99, 0.5]] {
        let exact = (0..3).map(|i| segment_distance(p, corners[i], corners[(i + 1) % 3])).fold(f64::INFINITY, f64::min);
        let b = t.complement_bracket(&p, None).unwrap();
        assert!(b.lo <= exact + 1e-12 && exact <= b.hi + 1e-12, "{p:?}: {b:?} vs {exact}");
        assert!(b.hi - b.lo < 1e-8, "{p:?}: {b:?}");
        assert_eq!(t.in_inner(&p, exact * 0.99).unwrap(), Tri::True);
        assert_eq!(t.in_inner(&p, exact * 1.01).unwrap(), Tri::False);
    }
    assert_eq!(t.complement_bracket(&[2.0, 0.0], None).unwrap(), Bracket { lo: 0.0, hi: 0.0 });
}

#[test]
fn distance_to_a_curved_graph_matches_the_oracle() {
    let g = GraphTarget::new(Bounding::new(f(1, "sqrt(1 + x^2)"), 1.0).unwrap(), None).unwrap();
    for p in [[0.0, 3.0], [2.0, -1.0], [-1.5, 4.0], [0.3, 1.05]] {
        let exact = graph_distance_oracle(|t| (1.0 + t * t).sqrt(), p);
        let b = g.bracket(&p, None).unwrap();
        assert!(b.lo <= exact + 1e-9 && exact <= b.hi + 1e-9, "{p:?}: {b:?} vs {exact}");
        assert_eq!(g.in_tube(&p, exact * 1.001).unwrap(), Tri::True);
        assert_eq!(g.in_tube(&p, exact * 0.999).unwrap(), Tri::False);
    }
}

#[test]
fn rotated_diagonal() {
    let r = Rotation::planar(std::f64::consts::FRAC_PI_4);
    let g = GraphTarget::new(Bounding::constant(1, 0.0), Some(r.clone())).unwrap();
    // the line u₂ = 0 is x = y in ambient coordinates
    let b = g.bracket(&[1.0, 0.0], None).unwrap();
    assert!((b.lo - 0.5f64.sqrt()).abs() < 1e-15 && (b.hi - 0.5f64.sqrt()).abs() < 1e-15);
    let back = r.apply_inverse(&r.apply(&[0.3, -0.7]));
    assert!((back[0] - 0.3).abs() < 1e-15 && (back[1] + 0.7).abs() < 1e-15);
    assert!(Rotation::new(vec![vec![1.0, 0.1], vec![0.0, 1.0]]).is_err());
}

#[test]
fn radius_along_a_rotated_graph() {
    let g = GraphTarget::new(Bounding::constant(1, 0.0), Some(Rotation::swap(2, 0, 1))).unwrap();
    // u = (y, x); the graph u₂ = 0 is the axis x = 0, parametrized by y.
    let delta = f(2, "1 + x + 2*y");
    let sigma = g.along(&delta).unwrap();
    assert_eq!(sigma.eval(&[0.5]).unwrap(), 2.0);
    let point = GraphTarget::new(Bounding::constant(0, 0.25), None).unwrap();
    assert_eq!(point.along(&f(1, "x^2")).unwrap().eval(&[]).unwrap(), 0.0625);
}

#[test]
fn point_graph_on_the_line() {
    let c = LipschitzCell::line_point(0.5);
    assert!(c.contains(&[0.5]).unwrap());
    let g = c.graph_target().unwrap();
    assert_eq!(g.bracket(&[2.0], None).unwrap(), Bracket { lo: 1.5, hi: 1.5 });
}

#[test]
fn mcshane_examples() {
    let pts = vec![vec![0.0], vec![1.0], vec![3.0]];
    let e = mcshane_extend(&pts, &[0.0, 1.0, 0.0], 1.0).unwrap();
    assert_eq!(e.eval(&[2.0]).unwrap(), 1.0);
    assert_eq!(e.eval(&[-1.0]).unwrap(), 1.0);
    assert!(!e.is_nash());
    assert!(matches!(mcshane_extend(&pts, &[0.0, 2.0, 0.0], 1.0), Err(Error::NotLipschitz(_))));
    let c = mcshane_extend(&pts, &[4.0, 4.0, 4.0], 0.0).unwrap();
    assert!(c.is_nash() && c.eval(&[17.0]).unwrap() == 4.0);
    assert!(matches!(mcshane_extend(&pts, &[4.0, 4.5, 4.0], 0.0), Err(Error::NotLipschitz(_))));
}

#[test]
fn continuity_gauge_for_a_parabola() {
    let region = AxisBox::new(vec![0.0], vec![10.0]);
    let d = continuity_gauge(&f(1, "x^2"), &ScalarField::constant(1, 0.1), &region, 0.05).unwrap();
    for i in 0..=200 {
        let x = 0.05 * i as f64;
        let r = d.eval(&[x]).unwrap();
        assert!(r > 0.0);
        // |x² − x'²| < ε whenever |x − x'| < ε/(2x+1), so the gauge may not exceed that radius by more than grid slack
        assert!(r * (2.0 * x + 1.0) <= 0.1 * 1.2, "x = {x}, δ = {r}");
        for s in [-0.999, 0.999] {
            let y = x + s * r;
            assert!((y * y - x * x).abs() < 0.1);
        }
    }
    let tiny = ScalarField::constant(1, 1e-13);
    assert!(matches!(continuity_gauge(&f(1, "x"), &tiny, &region, 0.5), Err(Error::Degenerate(_))));
}

#[test]
fn cell_json_round_trip() {
    let src = r#"{"kind": "band", "lower": -1.0, "upper": {"expr": "x0 + 2", "lip": 1},
        "basis": {"kind": "band", "basis": {"kind": "point"}}, "rotation": [[0, 1], [1, 0]]}"#;
    let c: LipschitzCell = src.parse().unwrap();
    assert_eq!(c.dim(), 2);
    // local u = (y, x): x ∈ (−1, y + 2)
    assert!(c.contains(&[0.0, 0.0]).unwrap());
    assert!(!c.contains(&[2.5, 0.0]).unwrap());
    let again: LipschitzCell = serde_json::from_str(&serde_json::to_string(&c).unwrap()).unwrap();
    for p in [[0.0, 0.0], [2.5, 0.0], [-0.5, 3.0], [-1.5, 1.0]] {
        assert_eq!(c.contains(&p).unwrap(), again.contains(&p).unwrap());
    }
    assert!("{\"kind\": \"band\"}".parse::<LipschitzCell>().is_err());
}

proptest! {
    #[test]
    fn bracket_contains_the_distance_to_a_line(a in -3.0f64..3.0, b in -1.0f64..1.0, x in -3.0f64..3.0, y in -3.0f64..3.0) {
        let xi = ScalarField::coord(1, 0) * a + b;
        let g = GraphTarget::new(Bounding::new(xi, a.abs()).unwrap(), None).unwrap();
        let exact = (y - a * x - b).abs() / (1.0 + a * a).sqrt();
        let br = g.bracket(&[x, y], None).unwrap();
        prop_assert!(br.lo <= exact + 1e-12 && exact <= br.hi + 1e-12);
        prop_assert!(br.hi - br.lo <= 1e-8 * (1.0 + exact));
    }

    #[test]
    fn mcshane_extension_interpolates_and_is_lipschitz(
        vals in proptest::collection::vec(-1.0f64..1.0, 2..8), q in -2.0f64..6.0, r in -2.0f64..6.0
    ) {
        // samples spaced 1 apart with values in [−1, 1] are 2-Lipschitz
        let pts: Vec<Vec<f64>> = (0..vals.len()).map(|i| vec![i as f64]).collect();
        let e = mcshane_extend(&pts, &vals, 2.0).unwrap();
        for (p, v) in pts.iter().zip(&vals) {
            prop_assert!((e.eval(p).unwrap() - v).abs() < 1e-12);
        }
        let (eq, er) = (e.eval(&[q]).unwrap(), e.eval(&[r]).unwrap());
        prop_assert!((eq - er).abs() <= 2.0 * (q - r).abs() + 1e-12);
    }
}

#[test]
fn sandwich_around_the_abs_graph() {
    use crate::certify::{inclusion_check, Claim, SampleGrid};
    let xi = mcshane_extend(&[vec![-1.0], vec![0.0], vec![1.0]], &[1.0, 0.0, 1.0], 1.0).unwrap();
    let target = GraphTarget::new(Bounding::new(xi, 1.0).unwrap(), None).unwrap();
    let s = sandwich_constants(1.0).unwrap();
    assert_eq!((s.c, s.kappa), (1.0 / 32.0, 0.25));
    let delta = 0.2;
    // exact distance to the two rays of |x|
    let dist = |p: &[f64]| {
        let p = [p[0], p[1]];
        segment_distance(p, [0.0, 0.0], [-10.0, 10.0]).min(segment_distance(p, [0.0, 0.0], [10.0, 10.0]))
    };
    let band = |p: &[f64]| Tri::from_bool((p[1] - p[0].abs()).abs() <= s.kappa * delta);
    let grid = SampleGrid::new(AxisBox::new(vec![-1.0, -0.5], vec![1.0, 1.5]), 2e-3);
    let claim = || Claim::lt("tube", "band", "box");
    // library membership
    let target = &target;
    let tube = |r: f64| move |p: &[f64]| target.in_tube(p, r).unwrap_or(Tri::Unresolved);
    assert!(inclusion_check(tube(s.c * delta), band, &grid, claim(), "sandwich").unwrap().passed());
    assert!(inclusion_check(band, tube(delta), &grid, claim(), "sandwich").unwrap().passed());
    // oracle membership
    let exact = |r: f64| move |p: &[f64]| Tri::from_bool(dist(p) < r);
    assert!(inclusion_check(exact(s.c * delta), band, &grid, claim(), "sandwich").unwrap().passed());
    assert!(inclusion_check(band, exact(delta), &grid, claim(), "sandwich").unwrap().passed());
    // and the two memberships agree wherever the library decides
    for p in grid.points().iter().step_by(7) {
        for r in [s.c * delta, delta] {
            match target.in_tube(p, r).unwrap() {
                Tri::True => assert!(dist(p) < r + 1e-12, "{p:?}"),
                Tri::False => assert!(dist(p) >= r - 1e-12, "{p:?}"),
                Tri::Unresolved => {}
            }
        }
    }
}

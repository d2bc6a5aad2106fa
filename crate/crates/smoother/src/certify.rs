//! Grid certification of strict inequalities.
//!
//! A claim `lhs < rhs on R` is checked by evaluating `q = lhs − rhs` at the
//! points of a lattice inside `R` and adding a Lipschitz margin that bounds how
//! much `q` can rise between lattice points. The margin is either global
//! (`Λ·h·√n/2` from a caller-supplied bound `Λ`) or local, where `Λ` at each
//! point is the largest of the discrete difference quotients to its lattice
//! neighbours and, when known, the gradient norm of `q` there. A point whose
//! sample is negative but whose margin is not gets its cell bisected
//! recursively, each child carrying its own sample and margin.

use std::sync::OnceLock;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{AxisBox, ScalarField, MAX_DIM};

/// Absolute floor added to every margin so boundary cases never pass.
pub const STRICT_FLOOR: f64 = 1e-12;

/// Fraction of grid points allowed to be undecided before giving up.
pub const MAX_UNRESOLVED: f64 = 1e-3;

/// Worker pool, capped by the `SMOOTHER_THREADS` environment variable.
pub fn pool() -> &'static rayon::ThreadPool {
    static POOL: OnceLock<rayon::ThreadPool> = OnceLock::new();
    POOL.get_or_init(|| {
        let mut b = rayon::ThreadPoolBuilder::new();
        if let Some(n) = std::env::var("SMOOTHER_THREADS").ok().and_then(|s| s.parse::<usize>().ok()) {
            b = b.num_threads(n.max(1));
        }
        b.build().expect("thread pool")
    })
}

/// Three-valued membership.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Tri {
    True,
    False,
    Unresolved,
}

impl Tri {
    pub fn from_bool(b: bool) -> Tri {
        if b {
            Tri::True
        } else {
            Tri::False
        }
    }
}

/// A set of points removed from a grid, typically around breakpoints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Exclusion {
    /// `|normal·x − offset| < radius`, with `normal` a unit vector.
    Slab { normal: Vec<f64>, offset: f64, radius: f64 },
    Ball { center: Vec<f64>, radius: f64 },
}

impl Exclusion {
    /// Slab around the hyperplane `x_axis = value`.
    pub fn axis(dim: usize, axis: usize, value: f64, radius: f64) -> Exclusion {
        let mut normal = vec![0.0; dim];
        normal[axis] = 1.0;
        Exclusion::Slab { normal, offset: value, radius }
    }

    fn covers(&self, p: &[f64]) -> bool {
        match self {
            Exclusion::Slab { normal, offset, radius } => {
                let s: f64 = normal.iter().zip(p).map(|(a, b)| a * b).sum();
                (s - offset).abs() < *radius
            }
            Exclusion::Ball { center, radius } => {
                center.iter().zip(p).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt() < *radius
            }
        }
    }
}

/// Regular lattice over a box, minus exclusion sets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleGrid {
    #[serde(rename = "box")]
    pub bounds: AxisBox,
    pub spacing: f64,
    #[serde(default)]
    pub exclusions: Vec<Exclusion>,
}

impl SampleGrid {
    pub fn new(bounds: AxisBox, spacing: f64) -> Self {
        assert!(spacing > 0.0, "grid spacing must be positive");
        SampleGrid { bounds, spacing, exclusions: Vec::new() }
    }

    pub fn with_exclusion(mut self, e: Exclusion) -> Self {
        self.exclusions.push(e);
        self
    }

    pub fn dim(&self) -> usize {
        self.bounds.dim()
    }

    /// Same grid at half the spacing.
    pub fn refined(&self) -> SampleGrid {
        SampleGrid { spacing: self.spacing / 2.0, ..self.clone() }
    }

    fn counts(&self) -> Vec<usize> {
        self.bounds
            .lo
            .iter()
            .zip(&self.bounds.hi)
            .map(|(a, b)| ((b - a) / self.spacing + 1e-9).floor() as usize + 1)
            .collect()
    }

    pub fn len(&self) -> usize {
        self.counts().iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn point(&self, counts: &[usize], mut idx: usize, out: &mut [f64]) {
        for (k, &c) in counts.iter().enumerate().rev() {
            let i = idx % c;
            idx /= c;
            out[k] = (self.bounds.lo[k] + i as f64 * self.spacing).min(self.bounds.hi[k]);
        }
    }

    pub fn excluded(&self, p: &[f64]) -> bool {
        self.exclusions.iter().any(|e| e.covers(p))
    }

    /// All lattice points, excluded ones included, in lexicographic order.
    pub fn points(&self) -> Vec<Vec<f64>> {
        let counts = self.counts();
        let n = self.dim();
        (0..self.len())
            .map(|i| {
                let mut p = vec![0.0; n];
                self.point(&counts, i, &mut p);
                p
            })
            .collect()
    }

    /// Evaluate `f` at every lattice point in parallel; excluded points give `None`.
    pub fn map<T: Send>(&self, f: impl Fn(&[f64]) -> T + Sync) -> Vec<Option<T>> {
        let counts = self.counts();
        let n = self.dim();
        pool().install(|| {
            (0..self.len())
                .into_par_iter()
                .map(|i| {
                    let mut p = [0.0; MAX_DIM];
                    self.point(&counts, i, &mut p[..n]);
                    if self.excluded(&p[..n]) {
                        None
                    } else {
                        Some(f(&p[..n]))
                    }
                })
                .collect()
        })
    }

    // Lattice neighbours of a linear index along each axis.
    fn neighbours(&self, counts: &[usize], idx: usize, out: &mut Vec<usize>) {
        out.clear();
        let mut stride = 1;
        for k in (0..counts.len()).rev() {
            let i = (idx / stride) % counts[k];
            if i > 0 {
                out.push(idx - stride);
            }
            if i + 1 < counts[k] {
                out.push(idx + stride);
            }
            stride *= counts[k];
        }
    }
}

/// How the between-points margin is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Slack {
    /// Certified global Lipschitz bound of `lhs − rhs`.
    Global { lip: f64 },
    /// Per-point bound from neighbour differences and known slopes.
    Local,
}

/// `lhs relation rhs on region`, as text for the record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Claim {
    pub lhs: String,
    pub relation: String,
    pub rhs: String,
    pub region: String,
}

impl Claim {
    pub fn lt(lhs: impl Into<String>, rhs: impl Into<String>, region: impl Into<String>) -> Claim {
        Claim { lhs: lhs.into(), relation: "<".into(), rhs: rhs.into(), region: region.into() }
    }

    pub fn le(lhs: impl Into<String>, rhs: impl Into<String>, region: impl Into<String>) -> Claim {
        Claim { lhs: lhs.into(), relation: "≤".into(), rhs: rhs.into(), region: region.into() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
}

/// Record of one grid verification.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub claim: Claim,
    pub grid: SampleGrid,
    pub slack: Slack,
    /// Largest `lhs − rhs` at a lattice point; `null` when no point was checked.
    #[serde(with = "finite_or_null")]
    pub measured_max: f64,
    pub margin: f64,
    pub verdict: Verdict,
    pub provenance: String,
    pub points_checked: usize,
    pub unresolved: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub worst_point: Option<Vec<f64>>,
}

impl Certificate {
    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Pass
    }

    /// `measured_max + margin`; negative exactly when the certificate passes.
    pub fn bound(&self) -> f64 {
        self.measured_max + self.margin
    }
}

mod finite_or_null {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NEG_INFINITY))
    }
}

/// Outcome of evaluating a claim at one lattice point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Sample {
    Outside,
    Unresolved,
    /// `q = lhs − rhs` and, when known, `|∇q|`.
    Value { q: f64, slope: Option<f64> },
}

impl Sample {
    pub fn value(q: f64) -> Sample {
        Sample::Value { q, slope: None }
    }

    pub fn with_slope(q: f64, slope: f64) -> Sample {
        Sample::Value { q, slope: Some(slope) }
    }
}

const REFINE_DEPTH: usize = 24;
const REFINE_BUDGET: usize = 4096;

// Recursive bisection of the cell around an undecided lattice point: each
// child cell gets its own sample and a margin from its own difference
// quotients, so a thin gap below zero can still be resolved.
struct Refiner<'a, F> {
    eval: &'a F,
    slack: Slack,
    bounds: &'a AxisBox,
    evals: usize,
}

impl<F: Fn(&[f64]) -> Result<Sample>> Refiner<'_, F> {
    // Upper bound of q over the cell of half-width `w` around `centre`, or
    // `None` when the budget runs out first.
    fn refine(&mut self, centre: &[f64], q: f64, w: f64, depth: usize) -> Result<Option<f64>> {
        if depth == 0 || self.evals >= REFINE_BUDGET {
            return Ok(None);
        }
        let n = centre.len();
        let wc = w / 2.0;
        let reach = wc * (n as f64).sqrt();
        let mut children: Vec<(Vec<f64>, f64, Option<f64>)> = Vec::with_capacity(1 << n);
        for mask in 0..(1usize << n) {
            let c: Vec<f64> = (0..n)
                .map(|k| {
                    let off = if mask >> k & 1 == 1 { wc } else { -wc };
                    (centre[k] + off).clamp(self.bounds.lo[k], self.bounds.hi[k])
                })
                .collect();
            self.evals += 1;
            match (self.eval)(&c)? {
                Sample::Outside => {}
                Sample::Unresolved => return Ok(None),
                Sample::Value { q: qc, slope } => {
                    if qc >= 0.0 {
                        return Ok(Some(qc));
                    }
                    children.push((c, qc, slope));
                }
            }
        }
        let mut bound = f64::NEG_INFINITY;
        for (i, (c, qc, slope)) in children.iter().enumerate() {
            let lam = match self.slack {
                Slack::Global { lip } => lip,
                Slack::Local => {
                    let mut lam = slope.unwrap_or(0.0).max((qc - q).abs() / reach.max(f64::MIN_POSITIVE));
                    for (j, (c2, q2, _)) in children.iter().enumerate() {
                        if i != j {
                            let d = c.iter().zip(c2).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
                            if d > 0.0 {
                                lam = lam.max((qc - q2).abs() / d);
                            }
                        }
                    }
                    lam
                }
            };
            let b = qc + lam * reach;
            if b + STRICT_FLOOR < 0.0 {
                bound = bound.max(b);
            } else {
                match self.refine(c, *qc, wc, depth - 1)? {
                    Some(rb) => bound = bound.max(rb),
                    None => return Ok(None),
                }
            }
        }
        Ok(Some(bound))
    }
}

/// Core certification routine: evaluate `eval` over the grid and decide.
pub fn certify(
    claim: Claim,
    grid: &SampleGrid,
    slack: Slack,
    provenance: &str,
    eval: impl Fn(&[f64]) -> Result<Sample> + Sync,
) -> Result<Certificate> {
    let samples = grid.map(&eval);
    let counts = grid.counts();
    let n = grid.dim();
    let h = grid.spacing;
    let scale = h * (n as f64).sqrt() / 2.0;
    let mut values: Vec<Option<(f64, Option<f64>)>> = Vec::with_capacity(samples.len());
    let mut unresolved = 0;
    let mut considered = 0;
    for s in samples {
        match s {
            None | Some(Ok(Sample::Outside)) => values.push(None),
            Some(Ok(Sample::Unresolved)) => {
                unresolved += 1;
                considered += 1;
                values.push(None);
            }
            Some(Ok(Sample::Value { q, slope })) => {
                if !q.is_finite() {
                    return Err(Error::Domain(format!("non-finite value while checking {}", claim.lhs)));
                }
                considered += 1;
                values.push(Some((q, slope)));
            }
            Some(Err(e)) => return Err(e),
        }
    }
    if considered > 0 && unresolved as f64 > MAX_UNRESOLVED * considered as f64 {
        return Err(Error::Unresolved(format!(
            "{unresolved} of {considered} grid points undecided for {} {} {}",
            claim.lhs, claim.relation, claim.rhs
        )));
    }
    let mut measured = f64::NEG_INFINITY;
    let mut bound = f64::NEG_INFINITY;
    let mut worst = None;
    let mut checked = 0;
    let mut nb = Vec::with_capacity(2 * n);
    for (i, v) in values.iter().enumerate() {
        let Some((q, slope)) = *v else { continue };
        checked += 1;
        let local = match slack {
            Slack::Global { lip } => lip * scale,
            Slack::Local => {
                grid.neighbours(&counts, i, &mut nb);
                let mut lam = slope.unwrap_or(0.0);
                for &j in &nb {
                    if let Some((qj, _)) = values[j] {
                        lam = lam.max((q - qj).abs() / h);
                    }
                }
                lam * scale
            }
        };
        let mut p = vec![0.0; n];
        grid.point(&counts, i, &mut p);
        let mut b = q + local;
        if q < 0.0 && b >= 0.0 {
            // refinement samples tighten the bound only; `measured_max` stays the lattice maximum
            let mut r = Refiner { eval: &eval, slack, bounds: &grid.bounds, evals: 0 };
            if let Some(rb) = r.refine(&p, q, h / 2.0, REFINE_DEPTH)? {
                b = rb;
            }
            checked += r.evals;
        }
        if q > measured {
            measured = q;
        }
        if b > bound {
            bound = b;
            worst = Some(p);
        }
    }
    let margin = if checked == 0 { STRICT_FLOOR } else { bound - measured + STRICT_FLOOR };
    let verdict = if checked == 0 || measured + margin < 0.0 { Verdict::Pass } else { Verdict::Fail };
    Ok(Certificate {
        claim,
        grid: grid.clone(),
        slack,
        measured_max: measured,
        margin,
        verdict,
        provenance: provenance.to_string(),
        points_checked: checked,
        unresolved,
        worst_point: worst,
    })
}

/// A claim about the grid points themselves, with no margin between them:
/// for identities that hold exactly and where the samples only measure
/// rounding. `≤` claims pass at `max q ≤ 0`, `<` claims at `max q < 0`.
pub fn pointwise(
    claim: Claim,
    grid: &SampleGrid,
    provenance: &str,
    eval: impl Fn(&[f64]) -> Result<f64> + Sync,
) -> Result<Certificate> {
    let counts = grid.counts();
    let mut measured = f64::NEG_INFINITY;
    let mut worst = None;
    let mut checked = 0;
    for (i, v) in grid.map(&eval).into_iter().enumerate() {
        let Some(q) = v.transpose()? else { continue };
        if q.is_nan() {
            return Err(Error::Domain(format!("NaN while checking {}", claim.lhs)));
        }
        checked += 1;
        if q > measured {
            measured = q;
            let mut p = vec![0.0; grid.dim()];
            grid.point(&counts, i, &mut p);
            worst = Some(p);
        }
    }
    let ok = if claim.relation == "≤" { measured <= 0.0 } else { measured < 0.0 };
    Ok(Certificate {
        claim,
        grid: grid.clone(),
        slack: Slack::Global { lip: 0.0 },
        measured_max: measured,
        margin: 0.0,
        verdict: if ok || checked == 0 { Verdict::Pass } else { Verdict::Fail },
        provenance: provenance.to_string(),
        points_checked: checked,
        unresolved: 0,
        worst_point: worst,
    })
}

/// `(max |f − g|, max |df − dg|)` over the grid points outside exclusions.
pub fn sup_seminorm_c1(f: &ScalarField, g: &ScalarField, grid: &SampleGrid) -> Result<(f64, f64)> {
    let n = grid.dim();
    let vals = grid.map(|p| -> Result<(f64, f64)> {
        let a = f.eval_with_gradient(p)?;
        let b = g.eval_with_gradient(p)?;
        let dg: f64 = (0..n).map(|i| (a.gradient[i] - b.gradient[i]).powi(2)).sum::<f64>().sqrt();
        Ok(((a.value - b.value).abs(), dg))
    });
    let mut out = (0.0f64, 0.0f64);
    for v in vals.into_iter().flatten() {
        let (a, b) = v?;
        out.0 = out.0.max(a);
        out.1 = out.1.max(b);
    }
    Ok(out)
}

/// Certify `lhs < rhs` on `region ∩ grid` with the global margin `lip_slack·h·√n/2`.
pub fn check_bound(
    lhs: &ScalarField,
    rhs: &ScalarField,
    region: impl Fn(&[f64]) -> Tri + Sync,
    grid: &SampleGrid,
    lip_slack: f64,
    provenance: &str,
) -> Result<Certificate> {
    let claim = Claim::lt("lhs", "rhs", "region");
    certify(claim, grid, Slack::Global { lip: lip_slack }, provenance, |p| {
        Ok(match region(p) {
            Tri::False => Sample::Outside,
            Tri::Unresolved => Sample::Unresolved,
            Tri::True => Sample::value(lhs.eval(p)? - rhs.eval(p)?),
        })
    })
}

/// Pass iff no grid point is inside `inner` and outside `outer`.
pub fn inclusion_check(
    inner: impl Fn(&[f64]) -> Tri + Sync,
    outer: impl Fn(&[f64]) -> Tri + Sync,
    grid: &SampleGrid,
    claim: Claim,
    provenance: &str,
) -> Result<Certificate> {
    certify(claim, grid, Slack::Global { lip: 0.0 }, provenance, |p| {
        Ok(match inner(p) {
            Tri::False => Sample::Outside,
            Tri::Unresolved => Sample::Unresolved,
            Tri::True => match outer(p) {
                Tri::True => Sample::value(-1.0),
                Tri::False => Sample::value(1.0),
                Tri::Unresolved => Sample::Unresolved,
            },
        })
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pointwise_claims_have_no_margin() {
        let grid = SampleGrid::new(AxisBox::cube(1, 1.0), 0.25);
        let zero = pointwise(Claim::le("q", "0", "grid"), &grid, "test", |_| Ok(0.0)).unwrap();
        assert!(zero.passed() && zero.margin == 0.0);
        assert!(!pointwise(Claim::lt("q", "0", "grid"), &grid, "test", |_| Ok(0.0)).unwrap().passed());
        let c = pointwise(Claim::lt("q", "0", "grid"), &grid, "test", |p| Ok(p[0] - 1.0 + 1e-300)).unwrap();
        assert!(!c.passed());
        assert_eq!(c.worst_point, Some(vec![1.0]));
        assert_eq!(c.points_checked, 9);
    }

    fn grid1(lo: f64, hi: f64, h: f64) -> SampleGrid {
        SampleGrid::new(AxisBox::new(vec![lo], vec![hi]), h)
    }

    fn field(dim: usize, s: &str) -> ScalarField {
        ScalarField::parse(dim, s).unwrap()
    }

    #[test]
    fn lattice_shape() {
        let g = SampleGrid::new(AxisBox::cube(2, 1.0), 0.5);
        assert_eq!(g.len(), 25);
        let pts = g.points();
        assert_eq!(pts[0], vec![-1.0, -1.0]);
        assert_eq!(pts[1], vec![-1.0, -0.5]);
        assert_eq!(pts[24], vec![1.0, 1.0]);
        assert_eq!(grid1(0.0, 1.0, 1e-3).len(), 1001);
    }

    #[test]
    fn seminorm_examples() {
        let g = grid1(0.0, 1.0, 1e-3);
        assert_eq!(sup_seminorm_c1(&field(1, "x^2"), &field(1, "x^2"), &g).unwrap(), (0.0, 0.0));
        let (a, b) = sup_seminorm_c1(&field(1, "x"), &field(1, "x + 0.3"), &g).unwrap();
        assert!((a - 0.3).abs() < 1e-15 && b == 0.0);
        let (a, b) = sup_seminorm_c1(&field(1, "x^2"), &field(1, "x^2 + 0.01*x"), &g).unwrap();
        // closed form: both maxima at x = 1
        assert!((a - 0.01).abs() < 1e-12 && (b - 0.01).abs() < 1e-12);
    }

    #[test]
    fn check_bound_examples() {
        let g = SampleGrid::new(AxisBox::cube(2, 1.0), 0.1);
        let all = |_: &[f64]| Tri::True;
        let c = check_bound(&field(2, "0"), &field(2, "1"), all, &g, 0.0, "invented").unwrap();
        assert!(c.passed());
        assert_eq!(c.measured_max, -1.0);
        let c = check_bound(&field(2, "1"), &field(2, "1"), all, &g, 0.0, "invented").unwrap();
        assert!(!c.passed());
        // margin Λ·h·√n/2
        let c = check_bound(&field(2, "x"), &field(2, "2"), all, &g, 1.0, "invented").unwrap();
        assert!((c.margin - 0.1 * 2f64.sqrt() / 2.0 - STRICT_FLOOR).abs() < 1e-15);
    }

    #[test]
    fn local_margin_uses_neighbours_and_slopes() {
        let g = grid1(-1.0, 1.0, 0.1);
        // q = 0.03 − |x − 0.05| is negative at every lattice point but positive
        // at x = 0.05; the neighbour quotients must expose it.
        let c = certify(Claim::lt("0.03", "|x - 0.05|", "box"), &g, Slack::Local, "invented", |p| {
            Ok(Sample::value(0.03 - (p[0] - 0.05).abs()))
        })
        .unwrap();
        assert!(!c.passed(), "{c:?}");
        let c = certify(Claim::lt("|x|", "1.2", "box"), &g, Slack::Local, "invented", |p| {
            Ok(Sample::value(p[0].abs() - 1.2))
        })
        .unwrap();
        assert!(c.passed());
        assert!((c.margin - 0.05 - STRICT_FLOOR).abs() < 1e-12);
    }

    #[test]
    fn inclusion_examples() {
        let g = SampleGrid::new(AxisBox::cube(2, 1.5), 0.05);
        let ball = |r: f64| move |p: &[f64]| Tri::from_bool(p[0] * p[0] + p[1] * p[1] < r * r);
        let claim = || Claim::lt("ball", "ball", "grid");
        assert!(inclusion_check(ball(0.5), ball(1.0), &g, claim(), "invented").unwrap().passed());
        assert!(!inclusion_check(ball(1.0), ball(0.5), &g, claim(), "invented").unwrap().passed());
    }

    #[test]
    fn too_many_unresolved_points() {
        let g = grid1(0.0, 1.0, 0.01);
        let r = certify(Claim::lt("a", "b", "c"), &g, Slack::Local, "invented", |p| {
            Ok(if p[0] < 0.5 { Sample::Unresolved } else { Sample::value(-1.0) })
        });
        assert!(matches!(r, Err(Error::Unresolved(_))));
    }

    #[test]
    fn exclusions_remove_points() {
        let g = grid1(-1.0, 1.0, 0.01).with_exclusion(Exclusion::axis(1, 0, 0.0, 0.02));
        let c = certify(Claim::lt("a", "b", "c"), &g, Slack::Local, "invented", |p| {
            Ok(Sample::value(if p[0].abs() < 0.015 { 1.0 } else { -1.0 }))
        })
        .unwrap();
        assert!(c.passed());
        assert_eq!(c.points_checked, 201 - 3);
    }

    #[test]
    fn certificate_json_round_trip() {
        let g = grid1(0.0, 1.0, 0.5);
        let c = certify(Claim::lt("a", "b", "c"), &g, Slack::Local, "invented", |_| Ok(Sample::Outside)).unwrap();
        let s = serde_json::to_string(&c).unwrap();
        assert!(s.contains("\"measured_max\":null"));
        let back: Certificate = serde_json::from_str(&s).unwrap();
        assert_eq!(back.measured_max, f64::NEG_INFINITY);
        assert!(back.passed());
    }
}

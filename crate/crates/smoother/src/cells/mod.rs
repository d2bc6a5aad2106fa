//! Lipschitz cells, tubes around Lipschitz graphs and inner parts of cells.
//!
//! A cell in `ℝⁿ` is described in rotated coordinates `u = R x` as either the
//! graph `u_n = ξ(ũ)` or the band `ξ(ũ) < u_n < ξ'(ũ)` over a basis cell in
//! `ℝ^{n−1}`; a missing band bound is infinite. Bound fields are defined on
//! all of `ℝ^{n−1}`, must be Lipschitz there with the declared constant, and
//! act as their own extensions off the basis.
//!
//! Distances are never computed exactly. Every query returns a bracket
//! `lo ≤ d ≤ hi`, first from the vertical gap and the cone bound
//! `|u_n − ξ(ũ)|/√(1+L²) ≤ d ≤ |u_n − ξ(ũ)|`, then tightened by branch and
//! bound over the foot point when the comparison is still undecided.

pub(crate) mod json;

use crate::certify::Tri;
use crate::error::{check_dim, Error, Result};
use crate::fields::{AxisBox, InfConv, Node, ScalarField, SmoothClass, MAX_DIM};

pub use json::{BoundJson, CellJson};

/// Tolerance of graph membership `|u_n − ξ(ũ)| ≤ GRAPH_TOL`.
pub const GRAPH_TOL: f64 = 1e-9;

const ORTHO_TOL: f64 = 1e-12;
const BRACKET_BUDGET: usize = 4000;

/// Orthonormal change of coordinates `u = R x`.
#[derive(Debug, Clone, PartialEq)]
pub struct Rotation {
    rows: Vec<Vec<f64>>,
}

impl Rotation {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Rotation> {
        let n = rows.len();
        for (i, r) in rows.iter().enumerate() {
            check_dim(n, r.len())?;
            for (j, s) in rows.iter().enumerate() {
                let dot: f64 = r.iter().zip(s).map(|(a, b)| a * b).sum();
                let want = if i == j { 1.0 } else { 0.0 };
                if (dot - want).abs() > ORTHO_TOL {
                    return Err(Error::InvalidCell(format!("rotation rows {i}, {j} have inner product {dot}")));
                }
            }
        }
        Ok(Rotation { rows })
    }

    pub fn identity(n: usize) -> Rotation {
        let rows = (0..n).map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect();
        Rotation { rows }
    }

    /// Permutation exchanging coordinates `i` and `j`.
    pub fn swap(n: usize, i: usize, j: usize) -> Rotation {
        let mut r = Rotation::identity(n);
        r.rows.swap(i, j);
        r
    }

    /// Rotation of the plane by `angle`.
    pub fn planar(angle: f64) -> Rotation {
        let (s, c) = angle.sin_cos();
        Rotation { rows: vec![vec![c, s], vec![-s, c]] }
    }

    pub fn dim(&self) -> usize {
        self.rows.len()
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.rows.iter().map(|r| r.iter().zip(x).map(|(a, b)| a * b).sum()).collect()
    }

    pub fn apply_inverse(&self, u: &[f64]) -> Vec<f64> {
        (0..self.dim()).map(|j| self.rows.iter().zip(u).map(|(r, b)| r[j] * b).sum()).collect()
    }

    /// The coordinates `u_i(x)` as fields of `x`.
    pub fn forward_fields(&self) -> Vec<ScalarField> {
        self.rows.iter().map(|r| linear_field(r)).collect()
    }

    /// The coordinates `x_j(u)` as fields of `u`.
    pub fn inverse_fields(&self) -> Vec<ScalarField> {
        (0..self.dim()).map(|j| linear_field(&self.rows.iter().map(|r| r[j]).collect::<Vec<_>>())).collect()
    }
}

fn linear_field(coef: &[f64]) -> ScalarField {
    let n = coef.len();
    let terms: Vec<ScalarField> = coef
        .iter()
        .enumerate()
        .filter(|(_, &a)| a != 0.0)
        .map(|(i, &a)| if a == 1.0 { ScalarField::coord(n, i) } else { ScalarField::coord(n, i) * a })
        .collect();
    match terms.len() {
        0 => ScalarField::constant(n, 0.0),
        1 => terms.into_iter().next().unwrap(),
        _ => ScalarField::sum(&terms),
    }
}

/// Apply an optional rotation to a field: `f ↦ f ∘ R`.
pub fn rotate_field(f: &ScalarField, rotation: Option<&Rotation>) -> Result<ScalarField> {
    match rotation {
        None => Ok(f.clone()),
        Some(r) => f.compose(&r.forward_fields()),
    }
}

/// A bound function of a band or graph together with its Lipschitz constant.
#[derive(Debug, Clone)]
pub struct Bounding {
    pub field: ScalarField,
    pub lip: f64,
}

impl Bounding {
    pub fn new(field: ScalarField, lip: f64) -> Result<Bounding> {
        if !(lip.is_finite() && lip >= 0.0) {
            return Err(Error::InvalidCell(format!("Lipschitz constant {lip} must be finite and nonnegative")));
        }
        Ok(Bounding { field, lip })
    }

    /// A constant bound on `ℝ^dim`.
    pub fn constant(dim: usize, c: f64) -> Bounding {
        Bounding { field: ScalarField::constant(dim, c), lip: 0.0 }
    }
}

#[derive(Debug, Clone)]
pub enum CellKind {
    /// The single point of `ℝ⁰`.
    Point,
    Graph { xi: Bounding },
    Band { lower: Option<Bounding>, upper: Option<Bounding> },
}

/// A cell given by a recursive graph/band description.
#[derive(Debug, Clone)]
pub struct LipschitzCell {
    dim: usize,
    kind: CellKind,
    basis: Option<Box<LipschitzCell>>,
    rotation: Option<Rotation>,
}

/// `lo ≤ d ≤ hi` for a distance `d`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bracket {
    pub lo: f64,
    pub hi: f64,
}

impl Bracket {
    fn exact(d: f64) -> Bracket {
        Bracket { lo: d, hi: d }
    }

    /// Three-valued `d < threshold`.
    pub fn below(&self, threshold: f64) -> Tri {
        if self.hi < threshold {
            Tri::True
        } else if self.lo >= threshold {
            Tri::False
        } else {
            Tri::Unresolved
        }
    }
}

impl LipschitzCell {
    /// `ℝ⁰`.
    pub fn point() -> LipschitzCell {
        LipschitzCell { dim: 0, kind: CellKind::Point, basis: None, rotation: None }
    }

    pub fn band(basis: LipschitzCell, lower: Option<Bounding>, upper: Option<Bounding>) -> Result<LipschitzCell> {
        for b in lower.iter().chain(upper.iter()) {
            check_dim(basis.dim, b.field.dim())?;
        }
        LipschitzCell::over(basis, CellKind::Band { lower, upper })
    }

    pub fn graph(basis: LipschitzCell, xi: Bounding) -> Result<LipschitzCell> {
        check_dim(basis.dim, xi.field.dim())?;
        LipschitzCell::over(basis, CellKind::Graph { xi })
    }

    fn over(basis: LipschitzCell, kind: CellKind) -> Result<LipschitzCell> {
        if basis.dim + 1 > MAX_DIM {
            return Err(Error::InvalidCell(format!("cells live in dimension at most {MAX_DIM}")));
        }
        Ok(LipschitzCell { dim: basis.dim + 1, kind, basis: Some(Box::new(basis)), rotation: None })
    }

    /// The interval `(lo, hi)` of the line; `None` is an infinite end.
    pub fn interval(lo: Option<f64>, hi: Option<f64>) -> LipschitzCell {
        LipschitzCell::band(LipschitzCell::point(), lo.map(|c| Bounding::constant(0, c)), hi.map(|c| Bounding::constant(0, c)))
            .expect("one-dimensional band")
    }

    /// The point `{c}` of the line.
    pub fn line_point(c: f64) -> LipschitzCell {
        LipschitzCell::graph(LipschitzCell::point(), Bounding::constant(0, c)).expect("one-dimensional graph")
    }

    /// The product of open intervals, described as nested bands.
    pub fn open_box(b: &AxisBox) -> LipschitzCell {
        let mut cell = LipschitzCell::point();
        for k in 0..b.dim() {
            cell = LipschitzCell::band(cell, Some(Bounding::constant(k, b.lo[k])), Some(Bounding::constant(k, b.hi[k])))
                .expect("box dimension");
        }
        cell
    }

    pub fn with_rotation(mut self, r: Rotation) -> Result<LipschitzCell> {
        check_dim(self.dim, r.dim())?;
        self.rotation = Some(r);
        Ok(self)
    }

    /// Ambient dimension.
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Dimension of the cell itself: the number of band levels.
    pub fn cell_dim(&self) -> usize {
        let own = matches!(self.kind, CellKind::Band { .. }) as usize;
        own + self.basis.as_ref().map_or(0, |b| b.cell_dim())
    }

    pub fn is_open(&self) -> bool {
        self.cell_dim() == self.dim
    }

    pub fn kind(&self) -> &CellKind {
        &self.kind
    }

    pub fn basis(&self) -> Option<&LipschitzCell> {
        self.basis.as_deref()
    }

    pub fn rotation(&self) -> Option<&Rotation> {
        self.rotation.as_ref()
    }

    /// Largest Lipschitz constant over all levels.
    pub fn lip(&self) -> f64 {
        let own = match &self.kind {
            CellKind::Point => 0.0,
            CellKind::Graph { xi } => xi.lip,
            CellKind::Band { lower, upper } => lower.iter().chain(upper.iter()).map(|b| b.lip).fold(0.0, f64::max),
        };
        own.max(self.basis.as_ref().map_or(0.0, |b| b.lip()))
    }

    /// `u = R x`, or `x` itself without rotation.
    pub fn to_local(&self, p: &[f64]) -> Vec<f64> {
        match &self.rotation {
            Some(r) => r.apply(p),
            None => p.to_vec(),
        }
    }

    pub fn contains(&self, p: &[f64]) -> Result<bool> {
        check_dim(self.dim, p.len())?;
        let CellKind::Point = self.kind else {
            let u = self.to_local(p);
            let (ut, un) = u.split_at(self.dim - 1);
            let un = un[0];
            if !self.basis.as_ref().expect("positive dimension").contains(ut)? {
                return Ok(false);
            }
            return Ok(match &self.kind {
                CellKind::Graph { xi } => (un - xi.field.eval(ut)?).abs() <= GRAPH_TOL,
                CellKind::Band { lower, upper } => {
                    let above = match lower {
                        Some(b) => un > b.field.eval(ut)?,
                        None => true,
                    };
                    let below = match upper {
                        Some(b) => un < b.field.eval(ut)?,
                        None => true,
                    };
                    above && below
                }
                CellKind::Point => unreachable!(),
            });
        };
        Ok(true)
    }

    /// For a graph cell, the (extended) graph it lies on.
    pub fn graph_target(&self) -> Option<GraphTarget> {
        match &self.kind {
            CellKind::Graph { xi } => Some(GraphTarget { xi: xi.clone(), rotation: self.rotation.clone() }),
            _ => None,
        }
    }

    /// Bracket of `d(p, ℝⁿ ∖ C)`, tightened until it decides `d < threshold`
    /// when a threshold is given.
    pub fn complement_bracket(&self, p: &[f64], threshold: Option<f64>) -> Result<Bracket> {
        if !self.contains(p)? {
            return Ok(Bracket::exact(0.0));
        }
        match &self.kind {
            CellKind::Point => Ok(Bracket::exact(f64::INFINITY)),
            CellKind::Graph { .. } => Ok(Bracket::exact(0.0)),
            CellKind::Band { lower, upper } => {
                let u = self.to_local(p);
                let ut = &u[..self.dim - 1];
                let basis = self.basis.as_ref().expect("positive dimension");
                let mut out = basis.complement_bracket(ut, threshold)?;
                for b in lower.iter().chain(upper.iter()) {
                    let g = GraphTarget { xi: b.clone(), rotation: None };
                    let (br, foot) = g.bracket_with_foot(&u, threshold)?;
                    out.lo = out.lo.min(br.lo);
                    out.hi = out.hi.min(g.vertical(&u)?.abs());
                    if basis.contains(&foot)? {
                        out.hi = out.hi.min(br.hi);
                    }
                }
                Ok(out)
            }
        }
    }

    /// Three-valued membership in `𝒲_η(C) = C ∖ 𝒱_η(ℝⁿ ∖ C)`.
    pub fn in_inner(&self, p: &[f64], eta: f64) -> Result<Tri> {
        if !self.contains(p)? {
            return Ok(Tri::False);
        }
        Ok(match self.complement_bracket(p, Some(eta))?.below(eta) {
            Tri::True => Tri::False,
            Tri::False => Tri::True,
            Tri::Unresolved => Tri::Unresolved,
        })
    }

    /// The bands of an open cell as `(level, lower, upper)`, from the first
    /// coordinate up, in the local coordinates of the outermost rotation.
    /// Inner levels must not be rotated.
    pub fn levels(&self) -> Result<Vec<(usize, Option<Bounding>, Option<Bounding>)>> {
        let mut out = Vec::new();
        let mut cur = self;
        loop {
            match &cur.kind {
                CellKind::Point => break,
                CellKind::Graph { .. } => return Err(Error::InvalidCell("expected an open cell, found a graph level".into())),
                CellKind::Band { lower, upper } => out.push((cur.dim - 1, lower.clone(), upper.clone())),
            }
            cur = cur.basis.as_ref().expect("positive dimension");
            if cur.rotation.is_some() {
                return Err(Error::InvalidCell("only the outermost level of a cell may be rotated".into()));
            }
        }
        out.reverse();
        Ok(out)
    }
}

/// The graph `u_n = ξ(ũ)` of a Lipschitz function on all of `ℝ^{n−1}`, in
/// coordinates `u = R x`.
#[derive(Debug, Clone)]
pub struct GraphTarget {
    pub xi: Bounding,
    pub rotation: Option<Rotation>,
}

impl GraphTarget {
    pub fn new(xi: Bounding, rotation: Option<Rotation>) -> Result<GraphTarget> {
        if let Some(r) = &rotation {
            check_dim(xi.field.dim() + 1, r.dim())?;
        }
        Ok(GraphTarget { xi, rotation })
    }

    pub fn dim(&self) -> usize {
        self.xi.field.dim() + 1
    }

    pub fn to_local(&self, p: &[f64]) -> Vec<f64> {
        match &self.rotation {
            Some(r) => r.apply(p),
            None => p.to_vec(),
        }
    }

    /// Signed vertical offset `u_n − ξ(ũ)` of a local point.
    fn vertical(&self, u: &[f64]) -> Result<f64> {
        let m = u.len() - 1;
        Ok(u[m] - self.xi.field.eval(&u[..m])?)
    }

    /// Signed vertical offset `u_n − ξ(ũ)` of an ambient point.
    pub fn offset(&self, p: &[f64]) -> Result<f64> {
        check_dim(self.dim(), p.len())?;
        self.vertical(&self.to_local(p))
    }

    /// Bracket of `d(p, Γ_ξ)`.
    pub fn bracket(&self, p: &[f64], threshold: Option<f64>) -> Result<Bracket> {
        check_dim(self.dim(), p.len())?;
        Ok(self.bracket_with_foot(&self.to_local(p), threshold)?.0)
    }

    /// Three-valued `d(p, Γ_ξ) < radius`.
    pub fn in_tube(&self, p: &[f64], radius: f64) -> Result<Tri> {
        Ok(self.bracket(p, Some(radius))?.below(radius))
    }

    // Branch and bound over the foot point `y`: `D(y) = |(y, ξ(y)) − u|` is
    // √(1+L²)-Lipschitz, so a box of half-diagonal ρ around `c` holds no value
    // below `D(c) − ρ√(1+L²)`. Returns the bracket and the best foot found.
    fn bracket_with_foot(&self, u: &[f64], threshold: Option<f64>) -> Result<(Bracket, Vec<f64>)> {
        let m = u.len() - 1;
        let (ut, un) = (&u[..m], u[m]);
        let v = self.vertical(u)?.abs();
        let slope = (1.0 + self.xi.lip * self.xi.lip).sqrt();
        let mut br = Bracket { lo: v / slope, hi: v };
        let mut foot = ut.to_vec();
        if m == 0 {
            return Ok((Bracket::exact(v), foot));
        }
        let decided = |b: &Bracket| {
            threshold.is_some_and(|t| b.lo >= t || b.hi < t) || b.hi - b.lo <= 1e-13 + 1e-10 * b.hi
        };
        if decided(&br) {
            return Ok((br, foot));
        }
        let dist = |y: &[f64]| -> Result<f64> {
            let a: f64 = y.iter().zip(ut).map(|(a, b)| (a - b) * (a - b)).sum();
            let z = un - self.xi.field.eval(y)?;
            Ok((a + z * z).sqrt())
        };
        let diag = (m as f64).sqrt() * slope;
        // (lower bound, centre, half-width)
        let mut boxes: Vec<(f64, Vec<f64>, f64)> = vec![((v - v * diag).max(0.0), ut.to_vec(), v)];
        let mut evals = 0;
        while evals < BRACKET_BUDGET {
            let Some(k) = (0..boxes.len()).min_by(|&a, &b| boxes[a].0.total_cmp(&boxes[b].0)) else {
                br.lo = br.hi;
                break;
            };
            let (lb, c, w) = boxes.swap_remove(k);
            if lb >= br.hi {
                br.lo = br.hi;
                break;
            }
            let wc = w / 2.0;
            for mask in 0..(1usize << m) {
                let child: Vec<f64> =
                    (0..m).map(|i| c[i] + if mask >> i & 1 == 1 { wc } else { -wc }).collect();
                let d = dist(&child)?;
                evals += 1;
                if d < br.hi {
                    br.hi = d;
                    foot.clone_from(&child);
                }
                let clb = (d - wc * diag).max(0.0);
                if clb < br.hi {
                    boxes.push((clb, child, wc));
                }
            }
            let floor = boxes.iter().map(|b| b.0).fold(br.hi, f64::min);
            br.lo = br.lo.max(floor);
            if decided(&br) {
                break;
            }
        }
        Ok((br, foot))
    }

    /// `σ(ũ) = δ(Rᵀ(ũ, ξ(ũ)))`: the radius field read off along the graph.
    pub fn along(&self, delta: &ScalarField) -> Result<ScalarField> {
        check_dim(self.dim(), delta.dim())?;
        let m = self.dim() - 1;
        let mut local: Vec<ScalarField> = (0..m).map(|i| ScalarField::coord(m, i)).collect();
        local.push(self.xi.field.clone());
        if m == 0 {
            // ℝ⁰: the graph is the single point u = ξ.
            let p: Vec<f64> = match &self.rotation {
                Some(r) => r.apply_inverse(&[self.xi.field.eval(&[])?]),
                None => vec![self.xi.field.eval(&[])?],
            };
            return Ok(ScalarField::constant(0, delta.eval(&p)?));
        }
        let ambient = match &self.rotation {
            Some(r) => r.inverse_fields().iter().map(|x| x.compose(&local)).collect::<Result<Vec<_>>>()?,
            None => local,
        };
        delta.compose(&ambient)
    }
}

/// Constants of the sandwich inclusions
/// `𝒱_{cδ}(Γ_ξ) ⊂ {|u_n − ξ| ≤ κσ} ⊂ 𝒱_δ(Γ_ξ)`, with `σ(ũ) = δ(ũ, ξ(ũ))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sandwich {
    pub kappa: f64,
    pub c: f64,
}

/// `κ = min(1/(2L), 1/4)` and `c = κ/(4(L+1))` for `L`-Lipschitz `ξ` and `δ`.
pub fn sandwich_constants(lip: f64) -> Result<Sandwich> {
    if !(lip.is_finite() && lip >= 0.0) {
        return Err(Error::Domain(format!("Lipschitz constant {lip} must be finite and nonnegative")));
    }
    let kappa = if lip > 0.0 { (0.5 / lip).min(0.25) } else { 0.25 };
    Ok(Sandwich { kappa, c: kappa / (4.0 * (lip + 1.0)) })
}

/// McShane extension `x ↦ min_i v_i + L|x − p_i|` of Lipschitz samples.
///
/// Fails with `NotLipschitz` when a pair of samples violates the constant.
/// With `L = 0` the samples must agree and the result is their constant value.
pub fn mcshane_extend(points: &[Vec<f64>], values: &[f64], lip: f64) -> Result<ScalarField> {
    if points.is_empty() || points.len() != values.len() {
        return Err(Error::Degenerate("McShane extension needs matching nonempty samples".into()));
    }
    if !(lip.is_finite() && lip >= 0.0) {
        return Err(Error::Domain(format!("Lipschitz constant {lip} must be finite and nonnegative")));
    }
    let dim = points[0].len();
    for p in points {
        check_dim(dim, p.len())?;
    }
    for i in 0..points.len() {
        for j in 0..i {
            let d = crate::fields::norm(&points[i].iter().zip(&points[j]).map(|(a, b)| a - b).collect::<Vec<_>>());
            let gap = (values[i] - values[j]).abs();
            if gap > lip * d * (1.0 + 1e-12) + 1e-12 {
                return Err(Error::NotLipschitz(format!(
                    "samples {:?} and {:?} differ by {gap} over distance {d}",
                    points[i], points[j]
                )));
            }
        }
    }
    if lip == 0.0 {
        return Ok(ScalarField::constant(dim, values[0]).with_lip_bound(0.0));
    }
    let ic = InfConv { points: points.to_vec(), values: values.to_vec(), lip };
    Ok(ScalarField::from_expr(dim, std::sync::Arc::new(Node::InfConvolution(std::sync::Arc::new(ic))))
        .with_lip_bound(lip)
        .with_class(SmoothClass::C0))
}

/// Continuity gauge: a positive field `δ` with
/// `|x − x'| < δ(x) ⇒ |ξ(x) − ξ(x')| < ε(x)` at the lattice of `region`.
///
/// Per lattice point the local slope of `ξ` (gradients and neighbour
/// quotients, with a 1.5 safety factor) and the local minimum of `ε` give a
/// radius `min(step, ε/(2ℓ))`. The result is the ½-Lipschitz inf-convolution
/// of those radii. The implication is then checked along the axis and diagonal
/// directions at 0.99δ(x); any violation halves every radius and retries.
pub fn continuity_gauge(xi: &ScalarField, eps: &ScalarField, region: &AxisBox, step: f64) -> Result<ScalarField> {
    let n = xi.dim();
    check_dim(n, eps.dim())?;
    check_dim(n, region.dim())?;
    if !(step > 0.0) {
        return Err(Error::Domain("gauge step must be positive".into()));
    }
    let grid = crate::certify::SampleGrid::new(region.clone(), step);
    let pts = grid.points();
    let counts: Vec<usize> =
        (0..n).map(|k| ((region.hi[k] - region.lo[k]) / step + 1e-9).floor() as usize + 1).collect();
    let mut vals = Vec::with_capacity(pts.len());
    for p in &pts {
        let d = xi.eval_with_gradient(p)?;
        let e = eps.eval(p)?;
        if !(e > 1e-12) {
            return Err(Error::Degenerate(format!("tolerance {e} at {p:?} is below 1e-12")));
        }
        vals.push((d.value, d.grad_norm(), e));
    }
    let index = |c: &[usize]| c.iter().zip(&counts).fold(0, |acc, (&i, &m)| acc * m + i);
    let mut radii = Vec::with_capacity(pts.len());
    for (i, p) in pts.iter().enumerate() {
        let mut c = vec![0usize; n];
        let mut rem = i;
        for k in (0..n).rev() {
            c[k] = rem % counts[k];
            rem /= counts[k];
        }
        let (mut slope, mut e) = (vals[i].1, vals[i].2);
        for k in 0..n {
            for dir in [-1i64, 1] {
                let ck = c[k] as i64 + dir;
                if ck < 0 || ck >= counts[k] as i64 {
                    continue;
                }
                let mut cn = c.clone();
                cn[k] = ck as usize;
                let j = index(&cn);
                let dist = crate::fields::norm(&pts[j].iter().zip(p).map(|(a, b)| a - b).collect::<Vec<_>>());
                slope = slope.max(vals[j].1).max((vals[j].0 - vals[i].0).abs() / dist);
                e = e.min(vals[j].2);
            }
        }
        let ell = 1.5 * slope + 1e-12;
        radii.push((e / (2.0 * ell)).min(step));
    }
    let directions = gauge_directions(n);
    for _ in 0..30 {
        let ic = InfConv { points: pts.clone(), values: radii.clone(), lip: 0.5 };
        let gauge = ScalarField::from_expr(n, std::sync::Arc::new(Node::InfConvolution(std::sync::Arc::new(ic))))
            .with_lip_bound(0.5)
            .with_class(SmoothClass::C0);
        let mut ok = true;
        'check: for (p, &(v, _, e)) in pts.iter().zip(&vals) {
            let r = 0.99 * gauge.eval(p)?;
            for d in &directions {
                let q: Vec<f64> = p.iter().zip(d).map(|(a, b)| a + r * b).collect();
                if (xi.eval(&q)? - v).abs() >= e {
                    ok = false;
                    break 'check;
                }
            }
        }
        if ok {
            return Ok(gauge);
        }
        radii.iter_mut().for_each(|r| *r /= 2.0);
    }
    Err(Error::NoConvergence("continuity gauge did not verify after 30 halvings".into()))
}

// Unit vectors along the axes and the main diagonals, both orientations.
fn gauge_directions(n: usize) -> Vec<Vec<f64>> {
    let mut out = Vec::new();
    for k in 0..n {
        for s in [-1.0, 1.0] {
            let mut d = vec![0.0; n];
            d[k] = s;
            out.push(d);
        }
    }
    if n > 1 {
        let s = 1.0 / (n as f64).sqrt();
        for mask in 0..(1usize << n) {
            out.push((0..n).map(|k| if mask >> k & 1 == 1 { s } else { -s }).collect());
        }
    }
    out
}

#[cfg(test)]
mod tests;

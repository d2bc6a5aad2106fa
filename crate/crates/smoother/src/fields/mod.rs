//! Semialgebraic scalar fields with exact first derivatives.
//!
//! A [`ScalarField`] is an immutable expression DAG over `ℝⁿ`. Nodes are
//! restricted to semialgebraic primitives, so a field without piecewise nodes
//! is a Nash function and is tagged [`SmoothClass::Nash`]. Evaluation compiles
//! the DAG once into a register tape and runs forward-mode dual arithmetic
//! over it, so shared subexpressions are evaluated once per point.

mod dual;
mod json;
mod parse;
mod tape;

use std::collections::HashMap;
use std::fmt;
use std::sync::{Arc, OnceLock};

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};

pub use dual::MAX_DIM;
pub use json::{ExprJson, FieldJson};
pub(crate) use tape::Tape;

/// Shared pointer to an expression node.
pub type Expr = Arc<Node>;

/// Expression node kinds.
///
/// `Sigmoid` is the algebraic sigmoid `½(1 + kz/√(1+k²z²))` and `SigmoidGap`
/// is the difference of two of them; both are built from square roots and
/// quotients and exist as fused nodes only for numerical stability in the far
/// tails. `InfConvolution` is the McShane extension of sampled data and, like
/// `Piecewise`, is only continuous.
#[derive(Debug)]
pub enum Node {
    Const(f64),
    Coord(usize),
    Sum(Vec<Expr>),
    Product(Vec<Expr>),
    Quotient(Expr, Expr),
    Sqrt(Expr),
    Pow(Expr, i32),
    Sigmoid { arg: Expr, k: f64 },
    SigmoidGap { lo: Expr, hi: Expr, k: f64 },
    Piecewise(Vec<Piece>),
    InfConvolution(Arc<InfConv>),
    Compose { outer: Expr, args: Vec<Expr> },
}

/// One branch of a piecewise node: `value` applies where every condition is `≥ 0`.
#[derive(Debug)]
pub struct Piece {
    pub conds: Vec<Expr>,
    pub value: Expr,
}

/// Sampled data of an inf-convolution `x ↦ min_i values[i] + lip·|x − points[i]|`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InfConv {
    pub points: Vec<Vec<f64>>,
    pub values: Vec<f64>,
    pub lip: f64,
}

/// Regularity tag of a field.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum SmoothClass {
    C0,
    C1,
    #[serde(rename = "NASH")]
    Nash,
}

impl fmt::Display for SmoothClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SmoothClass::C0 => write!(f, "C0"),
            SmoothClass::C1 => write!(f, "C1"),
            SmoothClass::Nash => write!(f, "NASH"),
        }
    }
}

/// Axis-aligned box `[lo, hi]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxisBox {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl AxisBox {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Self {
        assert_eq!(lo.len(), hi.len(), "box corners differ in dimension");
        AxisBox { lo, hi }
    }

    /// The cube `[-r, r]^dim`.
    pub fn cube(dim: usize, r: f64) -> Self {
        AxisBox::new(vec![-r; dim], vec![r; dim])
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn contains(&self, p: &[f64], tol: f64) -> bool {
        p.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .all(|(x, (a, b))| *x >= a - tol && *x <= b + tol)
    }

    /// Largest Euclidean norm of a point of the box.
    pub fn radius(&self) -> f64 {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(a, b)| a.abs().max(b.abs()).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    /// Drop the last coordinate.
    pub fn head(&self) -> AxisBox {
        let n = self.dim() - 1;
        AxisBox::new(self.lo[..n].to_vec(), self.hi[..n].to_vec())
    }
}

/// Value and exact gradient at a point.
#[derive(Debug, Clone, PartialEq)]
pub struct DualValue {
    pub value: f64,
    pub gradient: Vec<f64>,
}

impl DualValue {
    pub fn grad_norm(&self) -> f64 {
        norm(&self.gradient)
    }
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// An immutable semialgebraic field on `ℝ^dim`.
///
/// Cloning is cheap: the expression and its compiled tape are shared.
#[derive(Clone)]
pub struct ScalarField {
    dim: usize,
    expr: Expr,
    lip_bound: Option<f64>,
    domain: Option<AxisBox>,
    declared: Option<SmoothClass>,
    cache: Arc<FieldCache>,
}

#[derive(Default)]
struct FieldCache {
    tape: OnceLock<std::result::Result<Tape, Error>>,
    piecewise: OnceLock<bool>,
}

impl fmt::Debug for ScalarField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ScalarField")
            .field("dim", &self.dim)
            .field("class", &self.smooth_class())
            .field("nodes", &count_nodes(&self.expr))
            .field("lip_bound", &self.lip_bound)
            .finish()
    }
}

impl ScalarField {
    /// Wrap an expression. Coordinates referenced by `expr` must be `< dim`.
    pub fn from_expr(dim: usize, expr: Expr) -> Self {
        assert!(dim <= MAX_DIM, "dimension must be at most {MAX_DIM}");
        ScalarField {
            dim,
            expr,
            lip_bound: None,
            domain: None,
            declared: None,
            cache: Arc::default(),
        }
    }

    pub fn constant(dim: usize, c: f64) -> Self {
        Self::from_expr(dim, konst(c))
    }

    pub fn coord(dim: usize, i: usize) -> Self {
        assert!(i < dim, "coordinate {i} out of range for dimension {dim}");
        Self::from_expr(dim, Arc::new(Node::Coord(i)))
    }

    /// All coordinate functions `x_0, …, x_{dim-1}`.
    pub fn coords(dim: usize) -> Vec<Self> {
        (0..dim).map(|i| Self::coord(dim, i)).collect()
    }

    /// Parse the infix syntax described in [`parse`](ScalarField::parse).
    ///
    /// Variables are `x0, x1, x2` (or `x, y, z`); operators `+ - * / ^` with
    /// integer exponents; functions `sqrt`, `abs`, `max`, `min`. `abs`, `max`
    /// and `min` produce piecewise nodes.
    ///
    /// ```
    /// use smoother::fields::ScalarField;
    /// let f = ScalarField::parse(2, "x^2*y").unwrap();
    /// let d = f.eval_with_gradient(&[1.0, 2.0]).unwrap();
    /// assert_eq!(d.value, 2.0);
    /// assert_eq!(d.gradient, vec![4.0, 1.0]);
    /// ```
    pub fn parse(dim: usize, src: &str) -> Result<Self> {
        let expr = parse::parse_expr(dim, src)?;
        Ok(Self::from_expr(dim, expr))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn expr(&self) -> &Expr {
        &self.expr
    }

    pub fn lip_bound(&self) -> Option<f64> {
        self.lip_bound
    }

    pub fn domain(&self) -> Option<&AxisBox> {
        self.domain.as_ref()
    }

    pub fn with_lip_bound(mut self, l: f64) -> Self {
        assert!(l >= 0.0, "Lipschitz bound must be nonnegative");
        self.lip_bound = Some(l);
        self
    }

    pub fn with_domain(mut self, b: AxisBox) -> Self {
        assert_eq!(b.dim(), self.dim);
        self.domain = Some(b);
        self
    }

    /// Declare the class of a piecewise field (for instance `C1` for `x·|x|`).
    /// Ignored for fields without piecewise nodes, which are always Nash.
    pub fn with_class(mut self, class: SmoothClass) -> Self {
        self.declared = Some(class);
        self
    }

    pub fn declared_class(&self) -> Option<SmoothClass> {
        self.declared
    }

    pub fn has_piecewise(&self) -> bool {
        *self.cache.piecewise.get_or_init(|| has_piecewise(&self.expr))
    }

    pub fn smooth_class(&self) -> SmoothClass {
        if !self.has_piecewise() {
            SmoothClass::Nash
        } else {
            match self.declared {
                Some(SmoothClass::C1) => SmoothClass::C1,
                _ => SmoothClass::C0,
            }
        }
    }

    pub fn is_nash(&self) -> bool {
        self.smooth_class() == SmoothClass::Nash
    }

    pub(crate) fn tape(&self) -> Result<&Tape> {
        self.cache
            .tape
            .get_or_init(|| Tape::compile(self.dim, &self.expr))
            .as_ref()
            .map_err(Clone::clone)
    }

    /// Number of tape instructions; a proxy for evaluation cost.
    pub fn tape_len(&self) -> Result<usize> {
        Ok(self.tape()?.len())
    }

    /// Reusable evaluator that keeps its register file between calls.
    pub fn evaluator(&self) -> Result<Evaluator<'_>> {
        let tape = self.tape()?;
        Ok(Evaluator {
            field: self,
            regs: tape.registers(),
            tape,
        })
    }

    pub fn eval(&self, p: &[f64]) -> Result<f64> {
        Ok(self.run_checked(p)?.v)
    }

    /// Value and exact gradient by forward-mode dual arithmetic.
    pub fn eval_with_gradient(&self, p: &[f64]) -> Result<DualValue> {
        let d = self.run_checked(p)?;
        Ok(DualValue { value: d.v, gradient: d.g[..self.dim].to_vec() })
    }

    fn check_point(&self, p: &[f64]) -> Result<()> {
        check_dim(self.dim, p.len())?;
        if let Some(b) = &self.domain {
            if !b.contains(p, 1e-12) {
                return Err(Error::Domain(format!("point {p:?} outside the declared box")));
            }
        }
        Ok(())
    }

    fn run_checked(&self, p: &[f64]) -> Result<dual::Dual> {
        self.check_point(p)?;
        let d = self.tape()?.run_scratch(p)?;
        finite(p, d)
    }

    /// Central-difference gradient estimate, used as a test oracle.
    pub fn finite_difference_gradient(&self, p: &[f64], step: f64) -> Result<Vec<f64>> {
        check_dim(self.dim, p.len())?;
        let mut ev = self.evaluator()?;
        let mut q = p.to_vec();
        let mut out = Vec::with_capacity(self.dim);
        for i in 0..self.dim {
            q[i] = p[i] + step;
            let fp = ev.eval(&q)?.value;
            q[i] = p[i] - step;
            let fm = ev.eval(&q)?.value;
            q[i] = p[i];
            out.push((fp - fm) / (2.0 * step));
        }
        Ok(out)
    }

    /// `outer ∘ (args)`: substitute `args[i]` for coordinate `i` of `self`.
    pub fn compose(&self, args: &[ScalarField]) -> Result<ScalarField> {
        check_dim(self.dim, args.len())?;
        if args.is_empty() {
            return Err(Error::Degenerate("composition with no arguments; use lift".into()));
        }
        let dim = args[0].dim;
        for a in args {
            check_dim(dim, a.dim)?;
        }
        let expr = compose_expr(&self.expr, args.iter().map(|a| a.expr.clone()).collect());
        let mut out = ScalarField::from_expr(dim, expr);
        if self.has_piecewise() || args.iter().any(|a| a.has_piecewise()) {
            let cls = std::iter::once(self.smooth_class())
                .chain(args.iter().map(|a| a.smooth_class()))
                .min()
                .unwrap();
            out.declared = Some(cls);
        }
        Ok(out)
    }

    /// View a field on `ℝ^k` as a field on `ℝ^dim` through the given coordinates.
    ///
    /// A field on `ℝ^0` (a constant expression) lifts to any dimension.
    pub fn lift(&self, dim: usize, coords: &[usize]) -> ScalarField {
        if coords.is_empty() {
            assert_eq!(self.dim, 0, "lift coordinates match dimension");
            let mut out = ScalarField::from_expr(dim, self.expr.clone());
            out.declared = self.declared;
            return out;
        }
        let args: Vec<_> = coords.iter().map(|&i| ScalarField::coord(dim, i)).collect();
        self.compose(&args).expect("lift coordinates match dimension")
    }

    pub fn sqrt(&self) -> ScalarField {
        self.unary(Arc::new(Node::Sqrt(self.expr.clone())))
    }

    pub fn powi(&self, n: i32) -> ScalarField {
        match n {
            0 => ScalarField::constant(self.dim, 1.0),
            1 => self.clone(),
            _ => self.unary(Arc::new(Node::Pow(self.expr.clone(), n))),
        }
    }

    pub fn recip(&self) -> ScalarField {
        ScalarField::constant(self.dim, 1.0) / self
    }

    /// Algebraic sigmoid `½(1 + kz/√(1+k²z²))` of this field.
    pub fn sigmoid(&self, k: f64) -> ScalarField {
        self.unary(Arc::new(Node::Sigmoid { arg: self.expr.clone(), k }))
    }

    /// `sigmoid(self) − sigmoid(hi)`, evaluated without cancellation.
    pub fn sigmoid_gap(&self, hi: &ScalarField, k: f64) -> ScalarField {
        self.binary(hi, Arc::new(Node::SigmoidGap { lo: self.expr.clone(), hi: hi.expr.clone(), k }))
    }

    /// Piecewise field: the first piece whose conditions are all `≥ 0` applies.
    pub fn piecewise(dim: usize, pieces: Vec<(Vec<ScalarField>, ScalarField)>) -> ScalarField {
        let pieces = pieces
            .into_iter()
            .map(|(conds, value)| {
                for c in &conds {
                    assert_eq!(c.dim, dim);
                }
                assert_eq!(value.dim, dim);
                Piece {
                    conds: conds.into_iter().map(|c| c.expr).collect(),
                    value: value.expr,
                }
            })
            .collect();
        ScalarField::from_expr(dim, Arc::new(Node::Piecewise(pieces)))
    }

    pub fn abs(&self) -> ScalarField {
        ScalarField::piecewise(self.dim, vec![(vec![self.clone()], self.clone()), (vec![], -self)])
    }

    pub fn max(&self, other: &ScalarField) -> ScalarField {
        ScalarField::piecewise(self.dim, vec![(vec![self - other], self.clone()), (vec![], other.clone())])
    }

    pub fn min(&self, other: &ScalarField) -> ScalarField {
        ScalarField::piecewise(self.dim, vec![(vec![other - self], self.clone()), (vec![], other.clone())])
    }

    /// Sum of a nonempty list of fields of equal dimension.
    pub fn sum(terms: &[ScalarField]) -> ScalarField {
        let dim = terms[0].dim;
        let mut out = ScalarField::from_expr(dim, Arc::new(Node::Sum(terms.iter().map(|t| t.expr.clone()).collect())));
        out.inherit_class(terms);
        out
    }

    /// Product of a nonempty list of fields of equal dimension.
    pub fn product(factors: &[ScalarField]) -> ScalarField {
        let dim = factors[0].dim;
        let mut out =
            ScalarField::from_expr(dim, Arc::new(Node::Product(factors.iter().map(|t| t.expr.clone()).collect())));
        out.inherit_class(factors);
        out
    }

    fn inherit_class(&mut self, parts: &[ScalarField]) {
        if parts.iter().any(|p| p.has_piecewise()) {
            self.declared = parts.iter().map(|p| p.smooth_class()).min();
        }
    }

    fn unary(&self, expr: Expr) -> ScalarField {
        let mut out = ScalarField::from_expr(self.dim, expr);
        out.inherit_class(std::slice::from_ref(self));
        out
    }

    fn binary(&self, other: &ScalarField, expr: Expr) -> ScalarField {
        assert_eq!(self.dim, other.dim, "dimension mismatch in field arithmetic");
        let mut out = ScalarField::from_expr(self.dim, expr);
        out.inherit_class(&[self.clone(), other.clone()]);
        out
    }

    /// Replace every piecewise node by the piece selected at `sample` points.
    ///
    /// Returns `None` when some piecewise node selects different pieces at
    /// different samples. Used to recover the smooth local representative of a
    /// piecewise target on a set where a single piece applies.
    pub fn specialize(&self, samples: &[Vec<f64>]) -> Result<Option<ScalarField>> {
        let mut choice: HashMap<usize, usize> = HashMap::new();
        for p in samples {
            check_dim(self.dim, p.len())?;
            let mut seen = HashMap::new();
            let env: Vec<f64> = p.clone();
            slow_eval(&self.expr, &env, &mut seen)?;
            for (node, idx) in seen {
                match choice.get(&node) {
                    Some(&old) if old != idx => return Ok(None),
                    _ => {
                        choice.insert(node, idx);
                    }
                }
            }
        }
        let mut memo = HashMap::new();
        let expr = substitute_pieces(&self.expr, &choice, &mut memo);
        let mut out = ScalarField::from_expr(self.dim, expr);
        out.lip_bound = self.lip_bound;
        out.domain = self.domain.clone();
        if out.has_piecewise() {
            // Nodes never reached by the samples stay piecewise.
            out.declared = self.declared;
        }
        Ok(Some(out))
    }

    /// Index of the piece chosen by each piecewise node at `p`, as a sorted signature.
    pub(crate) fn piece_signature(&self, p: &[f64]) -> Result<Vec<(usize, usize)>> {
        let mut seen = HashMap::new();
        slow_eval(&self.expr, p, &mut seen)?;
        let mut v: Vec<_> = seen.into_iter().collect();
        v.sort_unstable();
        Ok(v)
    }
}

/// The algebraic sigmoid `½(1 + kz/√(1+k²z²))`, stable in both tails.
pub fn sigmoid_value(z: f64, k: f64) -> f64 {
    dual::sigmoid(z, k).0
}

pub(crate) fn konst(c: f64) -> Expr {
    Arc::new(Node::Const(c))
}

fn compose_expr(outer: &Expr, args: Vec<Expr>) -> Expr {
    // Composition with the identity substitution is the outer expression itself.
    let identity = args.iter().enumerate().all(|(i, a)| matches!(**a, Node::Coord(j) if j == i));
    if identity {
        return outer.clone();
    }
    match &**outer {
        Node::Const(c) => konst(*c),
        Node::Coord(i) => args[*i].clone(),
        _ => Arc::new(Node::Compose { outer: outer.clone(), args }),
    }
}

fn children(n: &Node) -> Vec<&Expr> {
    match n {
        Node::Const(_) | Node::Coord(_) | Node::InfConvolution(_) => vec![],
        Node::Sum(v) | Node::Product(v) => v.iter().collect(),
        Node::Quotient(a, b) => vec![a, b],
        Node::Sqrt(a) | Node::Pow(a, _) | Node::Sigmoid { arg: a, .. } => vec![a],
        Node::SigmoidGap { lo, hi, .. } => vec![lo, hi],
        Node::Piecewise(ps) => ps.iter().flat_map(|p| p.conds.iter().chain(std::iter::once(&p.value))).collect(),
        Node::Compose { outer, args } => std::iter::once(outer).chain(args.iter()).collect(),
    }
}

fn has_piecewise(e: &Expr) -> bool {
    let mut seen = std::collections::HashSet::new();
    let mut stack = vec![e];
    while let Some(n) = stack.pop() {
        if !seen.insert(Arc::as_ptr(n) as usize) {
            continue;
        }
        if matches!(**n, Node::Piecewise(_) | Node::InfConvolution(_)) {
            return true;
        }
        stack.extend(children(n));
    }
    false
}

/// Number of distinct nodes in the DAG.
pub fn count_nodes(e: &Expr) -> usize {
    let mut seen = std::collections::HashSet::new();
    let mut stack = vec![e];
    while let Some(n) = stack.pop() {
        if seen.insert(Arc::as_ptr(n) as usize) {
            stack.extend(children(n));
        }
    }
    seen.len()
}

const PIECE_TOL: f64 = 1e-12;

// Tree-walking evaluator that records piece choices. Slow; only used for
// specialization and as an independent oracle in tests.
fn slow_eval(e: &Expr, env: &[f64], seen: &mut HashMap<usize, usize>) -> Result<f64> {
    let v = match &**e {
        Node::Const(c) => *c,
        Node::Coord(i) => *env.get(*i).ok_or(Error::Dimension { expected: *i + 1, got: env.len() })?,
        Node::Sum(v) => {
            let mut s = 0.0;
            for t in v {
                s += slow_eval(t, env, seen)?;
            }
            s
        }
        Node::Product(v) => {
            let mut s = 1.0;
            for t in v {
                s *= slow_eval(t, env, seen)?;
            }
            s
        }
        Node::Quotient(a, b) => {
            let d = slow_eval(b, env, seen)?;
            if d == 0.0 {
                return Err(Error::Domain("zero denominator".into()));
            }
            slow_eval(a, env, seen)? / d
        }
        Node::Sqrt(a) => {
            let x = slow_eval(a, env, seen)?;
            if x <= 0.0 {
                return Err(Error::Domain(format!("sqrt of nonpositive {x:e}")));
            }
            x.sqrt()
        }
        Node::Pow(a, n) => slow_eval(a, env, seen)?.powi(*n),
        Node::Sigmoid { arg, k } => dual::sigmoid(slow_eval(arg, env, seen)?, *k).0,
        Node::SigmoidGap { lo, hi, k } => {
            dual::sigmoid_gap(slow_eval(lo, env, seen)?, slow_eval(hi, env, seen)?, *k)
        }
        Node::Piecewise(ps) => {
            let mut out = None;
            for (i, p) in ps.iter().enumerate() {
                let mut ok = true;
                for c in &p.conds {
                    if slow_eval(c, env, seen)? < -PIECE_TOL {
                        ok = false;
                        break;
                    }
                }
                if ok {
                    seen.insert(Arc::as_ptr(e) as usize, i);
                    out = Some(slow_eval(&p.value, env, seen)?);
                    break;
                }
            }
            out.ok_or_else(|| Error::Domain("no piece contains the point".into()))?
        }
        Node::InfConvolution(ic) => dual::inf_conv_value(ic, env).0,
        Node::Compose { outer, args } => {
            let mut inner = Vec::with_capacity(args.len());
            for a in args {
                inner.push(slow_eval(a, env, seen)?);
            }
            slow_eval(outer, &inner, seen)?
        }
    };
    Ok(v)
}

fn substitute_pieces(e: &Expr, choice: &HashMap<usize, usize>, memo: &mut HashMap<usize, Expr>) -> Expr {
    let key = Arc::as_ptr(e) as usize;
    if let Some(r) = memo.get(&key) {
        return r.clone();
    }
    let mut sub = |x: &Expr| substitute_pieces(x, choice, memo);
    let out = match &**e {
        Node::Const(_) | Node::Coord(_) | Node::InfConvolution(_) => e.clone(),
        Node::Sum(v) => Arc::new(Node::Sum(v.iter().map(&mut sub).collect())),
        Node::Product(v) => Arc::new(Node::Product(v.iter().map(&mut sub).collect())),
        Node::Quotient(a, b) => Arc::new(Node::Quotient(sub(a), sub(b))),
        Node::Sqrt(a) => Arc::new(Node::Sqrt(sub(a))),
        Node::Pow(a, n) => Arc::new(Node::Pow(sub(a), *n)),
        Node::Sigmoid { arg, k } => Arc::new(Node::Sigmoid { arg: sub(arg), k: *k }),
        Node::SigmoidGap { lo, hi, k } => Arc::new(Node::SigmoidGap { lo: sub(lo), hi: sub(hi), k: *k }),
        Node::Piecewise(ps) => match choice.get(&key) {
            Some(&i) => sub(&ps[i].value),
            None => Arc::new(Node::Piecewise(
                ps.iter()
                    .map(|p| Piece { conds: p.conds.iter().map(&mut sub).collect(), value: sub(&p.value) })
                    .collect(),
            )),
        },
        Node::Compose { outer, args } => {
            Arc::new(Node::Compose { outer: sub(outer), args: args.iter().map(&mut sub).collect() })
        }
    };
    memo.insert(key, out.clone());
    out
}

fn finite(p: &[f64], d: dual::Dual) -> Result<dual::Dual> {
    if !d.v.is_finite() || d.g.iter().any(|x| !x.is_finite()) {
        return Err(Error::Domain(format!("non-finite evaluation at {p:?}")));
    }
    Ok(d)
}

/// Evaluator with a private register file; create one per worker thread.
pub struct Evaluator<'a> {
    field: &'a ScalarField,
    tape: &'a Tape,
    regs: Vec<dual::Dual>,
}

impl Evaluator<'_> {
    pub fn eval(&mut self, p: &[f64]) -> Result<DualValue> {
        let mut g = [0.0; MAX_DIM];
        let v = self.value_grad(p, &mut g)?;
        Ok(DualValue { value: v, gradient: g[..self.field.dim].to_vec() })
    }

    /// Value and gradient without allocating; `grad[..dim]` is written.
    pub fn value_grad(&mut self, p: &[f64], grad: &mut [f64]) -> Result<f64> {
        self.field.check_point(p)?;
        let d = finite(p, self.tape.run(p, &mut self.regs)?)?;
        grad[..self.field.dim].copy_from_slice(&d.g[..self.field.dim]);
        Ok(d.v)
    }

    pub fn value(&mut self, p: &[f64]) -> Result<f64> {
        let mut g = [0.0; MAX_DIM];
        self.value_grad(p, &mut g)
    }
}

macro_rules! binop {
    ($tr:ident, $m:ident, $build:expr) => {
        impl std::ops::$tr<&ScalarField> for &ScalarField {
            type Output = ScalarField;
            fn $m(self, rhs: &ScalarField) -> ScalarField {
                let f: fn(&Expr, &Expr) -> Node = $build;
                self.binary(rhs, Arc::new(f(&self.expr, &rhs.expr)))
            }
        }
        impl std::ops::$tr<ScalarField> for ScalarField {
            type Output = ScalarField;
            fn $m(self, rhs: ScalarField) -> ScalarField {
                std::ops::$tr::$m(&self, &rhs)
            }
        }
        impl std::ops::$tr<&ScalarField> for ScalarField {
            type Output = ScalarField;
            fn $m(self, rhs: &ScalarField) -> ScalarField {
                std::ops::$tr::$m(&self, rhs)
            }
        }
        impl std::ops::$tr<ScalarField> for &ScalarField {
            type Output = ScalarField;
            fn $m(self, rhs: ScalarField) -> ScalarField {
                std::ops::$tr::$m(self, &rhs)
            }
        }
        impl std::ops::$tr<f64> for &ScalarField {
            type Output = ScalarField;
            fn $m(self, rhs: f64) -> ScalarField {
                std::ops::$tr::$m(self, &ScalarField::constant(self.dim, rhs))
            }
        }
        impl std::ops::$tr<f64> for ScalarField {
            type Output = ScalarField;
            fn $m(self, rhs: f64) -> ScalarField {
                std::ops::$tr::$m(&self, &ScalarField::constant(self.dim, rhs))
            }
        }
        impl std::ops::$tr<&ScalarField> for f64 {
            type Output = ScalarField;
            fn $m(self, rhs: &ScalarField) -> ScalarField {
                std::ops::$tr::$m(&ScalarField::constant(rhs.dim, self), rhs)
            }
        }
        impl std::ops::$tr<ScalarField> for f64 {
            type Output = ScalarField;
            fn $m(self, rhs: ScalarField) -> ScalarField {
                std::ops::$tr::$m(&ScalarField::constant(rhs.dim, self), &rhs)
            }
        }
    };
}

binop!(Add, add, |a, b| Node::Sum(vec![a.clone(), b.clone()]));
binop!(Sub, sub, |a, b| Node::Sum(vec![a.clone(), Arc::new(Node::Product(vec![konst(-1.0), b.clone()]))]));
binop!(Mul, mul, |a, b| Node::Product(vec![a.clone(), b.clone()]));
binop!(Div, div, |a, b| Node::Quotient(a.clone(), b.clone()));

impl std::ops::Neg for &ScalarField {
    type Output = ScalarField;
    fn neg(self) -> ScalarField {
        self.unary(Arc::new(Node::Product(vec![konst(-1.0), self.expr.clone()])))
    }
}

impl std::ops::Neg for ScalarField {
    type Output = ScalarField;
    fn neg(self) -> ScalarField {
        -&self
    }
}

//! Compilation of an expression DAG into a flat register tape.
//!
//! Every distinct (node, coordinate context) pair becomes one register, so a
//! subexpression shared by many parents, or an outer field composed with the
//! same arguments twice, is computed once. Piecewise nodes compile to guarded
//! jumps; registers computed inside a branch are only reused inside it.

use std::cell::RefCell;
use std::collections::HashMap;
use std::sync::Arc;

use super::dual::{self, Dual, MAX_DIM};
use super::{Expr, InfConv, Node, PIECE_TOL};
use crate::error::{Error, Result};

type Reg = u32;

#[derive(Debug, Clone)]
enum Op {
    Add(Reg, Reg),
    Sub(Reg, Reg),
    Mul(Reg, Reg),
    Div(Reg, Reg),
    Scale(Reg, f64),
    SumN(Vec<Reg>),
    ProdN(Vec<Reg>),
    Sqrt(Reg),
    Powi(Reg, i32),
    Sigmoid(Reg, f64),
    Gap(Reg, Reg, f64),
    InfConv(usize, Vec<Reg>),
    Copy(Reg),
    JumpIfNeg(Reg, usize),
    Jump(usize),
    Fail,
}

#[derive(Debug, Clone)]
struct Instr {
    dst: Reg,
    op: Op,
}

#[derive(Debug, Clone)]
pub(crate) struct Tape {
    dim: usize,
    n_regs: usize,
    consts: Vec<(Reg, f64)>,
    code: Vec<Instr>,
    infconvs: Vec<Arc<InfConv>>,
    out: Reg,
}

struct Compiler {
    n_regs: u32,
    consts: Vec<(Reg, f64)>,
    const_regs: HashMap<u64, Reg>,
    code: Vec<Instr>,
    infconvs: Vec<Arc<InfConv>>,
    contexts: Vec<Vec<Reg>>,
    context_ids: HashMap<Vec<Reg>, usize>,
    scopes: Vec<HashMap<(usize, usize), Reg>>,
}

impl Compiler {
    fn alloc(&mut self) -> Reg {
        let r = self.n_regs;
        self.n_regs += 1;
        r
    }

    fn constant(&mut self, c: f64) -> Reg {
        if let Some(&r) = self.const_regs.get(&c.to_bits()) {
            return r;
        }
        let r = self.alloc();
        self.consts.push((r, c));
        self.const_regs.insert(c.to_bits(), r);
        r
    }

    fn emit(&mut self, op: Op) -> Reg {
        let dst = self.alloc();
        self.code.push(Instr { dst, op });
        dst
    }

    fn context(&mut self, regs: Vec<Reg>) -> usize {
        if let Some(&id) = self.context_ids.get(&regs) {
            return id;
        }
        let id = self.contexts.len();
        self.contexts.push(regs.clone());
        self.context_ids.insert(regs, id);
        id
    }

    fn lookup(&self, key: (usize, usize)) -> Option<Reg> {
        self.scopes.iter().rev().find_map(|s| s.get(&key).copied())
    }

    fn compile(&mut self, e: &Expr, ctx: usize) -> Result<Reg> {
        let key = (Arc::as_ptr(e) as usize, ctx);
        if let Some(r) = self.lookup(key) {
            return Ok(r);
        }
        let r = match &**e {
            Node::Const(c) => self.constant(*c),
            Node::Coord(i) => {
                let regs = &self.contexts[ctx];
                *regs.get(*i).ok_or(Error::Dimension { expected: *i + 1, got: regs.len() })?
            }
            Node::Sum(v) if v.len() == 2 && negated(&v[1]).is_some() => {
                let a = self.compile(&v[0], ctx)?;
                let b = self.compile(negated(&v[1]).expect("checked"), ctx)?;
                self.emit(Op::Sub(a, b))
            }
            Node::Sum(v) => {
                let regs = self.compile_all(v, ctx)?;
                match regs.len() {
                    0 => self.constant(0.0),
                    1 => regs[0],
                    2 => self.emit(Op::Add(regs[0], regs[1])),
                    _ => self.emit(Op::SumN(regs)),
                }
            }
            Node::Product(v) => self.compile_product(v, ctx)?,
            Node::Quotient(a, b) => {
                let (a, b) = (self.compile(a, ctx)?, self.compile(b, ctx)?);
                self.emit(Op::Div(a, b))
            }
            Node::Sqrt(a) => {
                let a = self.compile(a, ctx)?;
                self.emit(Op::Sqrt(a))
            }
            Node::Pow(a, n) => {
                let a = self.compile(a, ctx)?;
                match n {
                    1 => a,
                    2 => self.emit(Op::Mul(a, a)),
                    _ => self.emit(Op::Powi(a, *n)),
                }
            }
            Node::Sigmoid { arg, k } => {
                let a = self.compile(arg, ctx)?;
                self.emit(Op::Sigmoid(a, *k))
            }
            Node::SigmoidGap { lo, hi, k } => {
                let (a, b) = (self.compile(lo, ctx)?, self.compile(hi, ctx)?);
                self.emit(Op::Gap(a, b, *k))
            }
            Node::InfConvolution(ic) => {
                if ic.points.is_empty() {
                    return Err(Error::Degenerate("inf-convolution over an empty sample".into()));
                }
                let coords = self.contexts[ctx].clone();
                if let Some(p) = ic.points.iter().find(|p| p.len() != coords.len()) {
                    return Err(Error::Dimension { expected: coords.len(), got: p.len() });
                }
                self.infconvs.push(ic.clone());
                let idx = self.infconvs.len() - 1;
                self.emit(Op::InfConv(idx, coords))
            }
            Node::Compose { outer, args } => {
                let regs = self.compile_all(args, ctx)?;
                let inner = self.context(regs);
                self.compile(outer, inner)?
            }
            Node::Piecewise(pieces) => {
                let result = self.alloc();
                let mut ends = Vec::new();
                for p in pieces {
                    self.scopes.push(HashMap::new());
                    let mut guards = Vec::new();
                    for c in &p.conds {
                        let r = self.compile(c, ctx)?;
                        guards.push(self.code.len());
                        self.code.push(Instr { dst: 0, op: Op::JumpIfNeg(r, usize::MAX) });
                    }
                    let v = self.compile(&p.value, ctx)?;
                    self.code.push(Instr { dst: result, op: Op::Copy(v) });
                    ends.push(self.code.len());
                    self.code.push(Instr { dst: 0, op: Op::Jump(usize::MAX) });
                    self.scopes.pop();
                    let next = self.code.len();
                    for g in guards {
                        if let Op::JumpIfNeg(_, t) = &mut self.code[g].op {
                            *t = next;
                        }
                    }
                }
                self.code.push(Instr { dst: 0, op: Op::Fail });
                let end = self.code.len();
                for g in ends {
                    if let Op::Jump(t) = &mut self.code[g].op {
                        *t = end;
                    }
                }
                result
            }
        };
        self.scopes.last_mut().unwrap().insert(key, r);
        Ok(r)
    }

    fn compile_all(&mut self, v: &[Expr], ctx: usize) -> Result<Vec<Reg>> {
        v.iter().map(|e| self.compile(e, ctx)).collect()
    }

    fn compile_product(&mut self, v: &[Expr], ctx: usize) -> Result<Reg> {
        // Fold constant factors into a single scale.
        let mut scale = 1.0;
        let mut rest = Vec::new();
        for e in v {
            match &**e {
                Node::Const(c) => scale *= c,
                _ => rest.push(self.compile(e, ctx)?),
            }
        }
        let core = match rest.len() {
            0 => return Ok(self.constant(scale)),
            1 => rest[0],
            2 => self.emit(Op::Mul(rest[0], rest[1])),
            _ => self.emit(Op::ProdN(rest)),
        };
        Ok(if scale == 1.0 { core } else { self.emit(Op::Scale(core, scale)) })
    }
}

impl Tape {
    pub fn compile(dim: usize, e: &Expr) -> Result<Tape> {
        let mut c = Compiler {
            n_regs: dim as u32,
            consts: Vec::new(),
            const_regs: HashMap::new(),
            code: Vec::new(),
            infconvs: Vec::new(),
            contexts: Vec::new(),
            context_ids: HashMap::new(),
            scopes: vec![HashMap::new()],
        };
        let top = c.context((0..dim as u32).collect());
        let out = c.compile(e, top)?;
        Ok(Tape {
            dim,
            n_regs: c.n_regs as usize,
            consts: c.consts,
            code: c.code,
            infconvs: c.infconvs,
            out,
        })
    }

    pub fn len(&self) -> usize {
        self.code.len()
    }

    /// Fresh register file with constants preloaded.
    pub fn registers(&self) -> Vec<Dual> {
        let mut regs = vec![Dual::default(); self.n_regs];
        for &(r, c) in &self.consts {
            regs[r as usize] = Dual::constant(c);
        }
        regs
    }

    /// Run with a per-thread scratch register file instead of a caller-owned one.
    pub fn run_scratch(&self, p: &[f64]) -> Result<Dual> {
        thread_local! {
            static SCRATCH: RefCell<Vec<Dual>> = const { RefCell::new(Vec::new()) };
        }
        SCRATCH.with(|s| {
            let mut regs = s.borrow_mut();
            if regs.len() < self.n_regs {
                regs.resize(self.n_regs, Dual::default());
            }
            for &(r, c) in &self.consts {
                regs[r as usize] = Dual::constant(c);
            }
            self.run(p, &mut regs)
        })
    }

    pub fn run(&self, p: &[f64], regs: &mut [Dual]) -> Result<Dual> {
        debug_assert!(self.dim <= MAX_DIM);
        for (i, &x) in p.iter().enumerate() {
            regs[i] = Dual::seed(x, i);
        }
        let mut pc = 0;
        while pc < self.code.len() {
            let ins = &self.code[pc];
            pc += 1;
            let val = match &ins.op {
                Op::Add(a, b) => regs[*a as usize].add(regs[*b as usize]),
                Op::Sub(a, b) => regs[*a as usize].sub(regs[*b as usize]),
                Op::Mul(a, b) => regs[*a as usize].mul(regs[*b as usize]),
                Op::Div(a, b) => {
                    let d = regs[*b as usize];
                    if d.v == 0.0 {
                        return Err(Error::Domain(format!("zero denominator at {p:?}")));
                    }
                    regs[*a as usize].div(d)
                }
                Op::Scale(a, s) => {
                    let x = regs[*a as usize];
                    let mut g = x.g;
                    for gi in &mut g {
                        *gi *= s;
                    }
                    Dual { v: x.v * s, g }
                }
                Op::SumN(v) => {
                    let mut acc = regs[v[0] as usize];
                    for r in &v[1..] {
                        acc = acc.add(regs[*r as usize]);
                    }
                    acc
                }
                Op::ProdN(v) => {
                    let mut acc = regs[v[0] as usize];
                    for r in &v[1..] {
                        acc = acc.mul(regs[*r as usize]);
                    }
                    acc
                }
                Op::Sqrt(a) => {
                    let x = regs[*a as usize];
                    if !(x.v > 0.0) {
                        return Err(Error::Domain(format!("sqrt of nonpositive {:e} at {p:?}", x.v)));
                    }
                    let s = x.v.sqrt();
                    x.chain(s, 0.5 / s)
                }
                Op::Powi(a, n) => {
                    let x = regs[*a as usize];
                    if *n < 0 && x.v == 0.0 {
                        return Err(Error::Domain(format!("negative power of zero at {p:?}")));
                    }
                    x.chain(x.v.powi(*n), *n as f64 * x.v.powi(n - 1))
                }
                Op::Sigmoid(a, k) => {
                    let x = regs[*a as usize];
                    let (v, d) = dual::sigmoid(x.v, *k);
                    x.chain(v, d)
                }
                Op::Gap(a, b, k) => {
                    let (x, y) = (regs[*a as usize], regs[*b as usize]);
                    let v = dual::sigmoid_gap(x.v, y.v, *k);
                    let (_, dx) = dual::sigmoid(x.v, *k);
                    let (_, dy) = dual::sigmoid(y.v, *k);
                    let mut g = [0.0; MAX_DIM];
                    for i in 0..MAX_DIM {
                        let l = if x.g[i] == 0.0 { 0.0 } else { dx * x.g[i] };
                        let r = if y.g[i] == 0.0 { 0.0 } else { dy * y.g[i] };
                        g[i] = l - r;
                    }
                    Dual { v, g }
                }
                Op::InfConv(idx, coords) => {
                    let ic = &self.infconvs[*idx];
                    let mut x = [0.0; MAX_DIM];
                    for (k, r) in coords.iter().enumerate() {
                        x[k] = regs[*r as usize].v;
                    }
                    let n = coords.len();
                    let (v, arg) = dual::inf_conv_value(ic, &x[..n]);
                    let p0 = &ic.points[arg];
                    let dist = p0.iter().zip(&x[..n]).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
                    let mut g = [0.0; MAX_DIM];
                    if dist > 0.0 && ic.lip > 0.0 {
                        for (k, r) in coords.iter().enumerate() {
                            let w = ic.lip * (x[k] - p0[k]) / dist;
                            let dr = regs[*r as usize].g;
                            for i in 0..MAX_DIM {
                                g[i] += w * dr[i];
                            }
                        }
                    }
                    Dual { v, g }
                }
                Op::Copy(a) => regs[*a as usize],
                Op::JumpIfNeg(r, t) => {
                    if regs[*r as usize].v < -PIECE_TOL {
                        pc = *t;
                    }
                    continue;
                }
                Op::Jump(t) => {
                    pc = *t;
                    continue;
                }
                Op::Fail => return Err(Error::Domain(format!("no piece contains {p:?}"))),
            };
            regs[ins.dst as usize] = val;
        }
        Ok(regs[self.out as usize])
    }
}

// `b` when `e` is the product `(−1)·b` that subtraction builds.
fn negated(e: &Expr) -> Option<&Expr> {
    match &**e {
        Node::Product(v) if v.len() == 2 && matches!(*v[0], Node::Const(c) if c == -1.0) => Some(&v[1]),
        _ => None,
    }
}

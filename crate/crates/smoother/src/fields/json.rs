//! JSON form of fields: a tree of `{"kind": ..., children}` objects.
//!
//! Any expression position also accepts a string in the infix syntax of
//! [`ScalarField::parse`], so `{"dim": 1, "expr": "abs(x)"}` is valid.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{konst, AxisBox, Expr, InfConv, Node, Piece, ScalarField, SmoothClass};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ExprJson {
    Text(String),
    Number(f64),
    Node(Box<NodeJson>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PieceJson {
    #[serde(default)]
    pub conds: Vec<ExprJson>,
    pub value: ExprJson,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum NodeJson {
    Const { value: f64 },
    Coord { index: usize },
    Sum { terms: Vec<ExprJson> },
    Product { factors: Vec<ExprJson> },
    Quotient { num: ExprJson, den: ExprJson },
    Sqrt { arg: ExprJson },
    Pow { base: ExprJson, exp: i32 },
    Sigmoid { arg: ExprJson, k: f64 },
    SigmoidGap { lo: ExprJson, hi: ExprJson, k: f64 },
    Piecewise { pieces: Vec<PieceJson> },
    InfConvolution { points: Vec<Vec<f64>>, values: Vec<f64>, lip: f64 },
    Compose { outer: ExprJson, outer_dim: usize, args: Vec<ExprJson> },
}

/// Serializable description of a [`ScalarField`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldJson {
    pub dim: usize,
    pub expr: ExprJson,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lip_bound: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub class: Option<SmoothClass>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain: Option<AxisBox>,
}

impl ExprJson {
    pub(crate) fn build(&self, dim: usize) -> Result<Expr> {
        match self {
            ExprJson::Text(s) => super::parse::parse_expr(dim, s),
            ExprJson::Number(c) => Ok(konst(*c)),
            ExprJson::Node(n) => n.build(dim),
        }
    }

    pub(crate) fn from_expr(e: &Expr) -> ExprJson {
        ExprJson::Node(Box::new(NodeJson::from_expr(e, None)))
    }
}

fn build_all(v: &[ExprJson], dim: usize) -> Result<Vec<Expr>> {
    v.iter().map(|e| e.build(dim)).collect()
}

impl NodeJson {
    fn build(&self, dim: usize) -> Result<Expr> {
        let node = match self {
            NodeJson::Const { value } => Node::Const(*value),
            NodeJson::Coord { index } => {
                if *index >= dim {
                    return Err(Error::Dimension { expected: dim, got: index + 1 });
                }
                Node::Coord(*index)
            }
            NodeJson::Sum { terms } => Node::Sum(build_all(terms, dim)?),
            NodeJson::Product { factors } => Node::Product(build_all(factors, dim)?),
            NodeJson::Quotient { num, den } => Node::Quotient(num.build(dim)?, den.build(dim)?),
            NodeJson::Sqrt { arg } => Node::Sqrt(arg.build(dim)?),
            NodeJson::Pow { base, exp } => Node::Pow(base.build(dim)?, *exp),
            NodeJson::Sigmoid { arg, k } => Node::Sigmoid { arg: arg.build(dim)?, k: *k },
            NodeJson::SigmoidGap { lo, hi, k } => Node::SigmoidGap { lo: lo.build(dim)?, hi: hi.build(dim)?, k: *k },
            NodeJson::Piecewise { pieces } => Node::Piecewise(
                pieces
                    .iter()
                    .map(|p| Ok(Piece { conds: build_all(&p.conds, dim)?, value: p.value.build(dim)? }))
                    .collect::<Result<_>>()?,
            ),
            NodeJson::InfConvolution { points, values, lip } => {
                if points.len() != values.len() {
                    return Err(Error::Parse("inf_convolution points and values differ in length".into()));
                }
                Node::InfConvolution(Arc::new(InfConv { points: points.clone(), values: values.clone(), lip: *lip }))
            }
            NodeJson::Compose { outer, outer_dim, args } => {
                if args.len() != *outer_dim {
                    return Err(Error::Dimension { expected: *outer_dim, got: args.len() });
                }
                Node::Compose { outer: outer.build(*outer_dim)?, args: build_all(args, dim)? }
            }
        };
        Ok(Arc::new(node))
    }

    fn from_expr(e: &Expr, _hint: Option<usize>) -> NodeJson {
        let j = ExprJson::from_expr;
        let all = |v: &Vec<Expr>| v.iter().map(j).collect();
        match &**e {
            Node::Const(c) => NodeJson::Const { value: *c },
            Node::Coord(i) => NodeJson::Coord { index: *i },
            Node::Sum(v) => NodeJson::Sum { terms: all(v) },
            Node::Product(v) => NodeJson::Product { factors: all(v) },
            Node::Quotient(a, b) => NodeJson::Quotient { num: j(a), den: j(b) },
            Node::Sqrt(a) => NodeJson::Sqrt { arg: j(a) },
            Node::Pow(a, n) => NodeJson::Pow { base: j(a), exp: *n },
            Node::Sigmoid { arg, k } => NodeJson::Sigmoid { arg: j(arg), k: *k },
            Node::SigmoidGap { lo, hi, k } => NodeJson::SigmoidGap { lo: j(lo), hi: j(hi), k: *k },
            Node::Piecewise(ps) => NodeJson::Piecewise {
                pieces: ps.iter().map(|p| PieceJson { conds: all(&p.conds), value: j(&p.value) }).collect(),
            },
            Node::InfConvolution(ic) => NodeJson::InfConvolution {
                points: ic.points.clone(),
                values: ic.values.clone(),
                lip: ic.lip,
            },
            Node::Compose { outer, args } => NodeJson::Compose { outer: j(outer), outer_dim: args.len(), args: all(args) },
        }
    }
}

impl FieldJson {
    pub fn build(&self) -> Result<ScalarField> {
        if self.dim > super::MAX_DIM {
            return Err(Error::Parse(format!("field dimension {} out of range", self.dim)));
        }
        let mut f = ScalarField::from_expr(self.dim, self.expr.build(self.dim)?);
        if let Some(l) = self.lip_bound {
            f = f.with_lip_bound(l);
        }
        if let Some(c) = self.class {
            if c == SmoothClass::Nash && f.has_piecewise() {
                return Err(Error::Parse("a field tagged NASH contains a piecewise node".into()));
            }
            f = f.with_class(c);
        }
        if let Some(b) = &self.domain {
            if b.dim() != self.dim {
                return Err(Error::Dimension { expected: self.dim, got: b.dim() });
            }
            f = f.with_domain(b.clone());
        }
        Ok(f)
    }
}

impl From<&ScalarField> for FieldJson {
    fn from(f: &ScalarField) -> Self {
        FieldJson {
            dim: f.dim(),
            expr: ExprJson::from_expr(f.expr()),
            lip_bound: f.lip_bound(),
            class: f.declared_class(),
            domain: f.domain().cloned(),
        }
    }
}

impl Serialize for ScalarField {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        FieldJson::from(self).serialize(s)
    }
}

impl<'de> Deserialize<'de> for ScalarField {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        FieldJson::deserialize(d)?.build().map_err(serde::de::Error::custom)
    }
}

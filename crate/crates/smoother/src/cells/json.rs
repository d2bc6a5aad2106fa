//! JSON form of cells.
//!
//! ```json
//! {"kind": "band", "lower": -1.0, "upper": {"expr": "x0 + 2", "lip": 1},
//!  "basis": {"kind": "band", "basis": {"kind": "point"}},
//!  "rotation": [[0, 1], [1, 0]]}
//! ```
//! A bare number is a constant bound. Bound expressions are read in the
//! coordinates of the basis.

use serde::{Deserialize, Serialize};

use super::{Bounding, CellKind, LipschitzCell, Rotation};
use crate::error::{Error, Result};
use crate::fields::{ExprJson, ScalarField};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BoundJson {
    Constant(f64),
    Expr { expr: ExprJson, lip: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CellJson {
    Point,
    Graph {
        xi: BoundJson,
        basis: Box<CellJson>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        rotation: Option<Vec<Vec<f64>>>,
    },
    Band {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        lower: Option<BoundJson>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        upper: Option<BoundJson>,
        basis: Box<CellJson>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        rotation: Option<Vec<Vec<f64>>>,
    },
}

impl BoundJson {
    fn build(&self, dim: usize) -> Result<Bounding> {
        match self {
            BoundJson::Constant(c) => Ok(Bounding::constant(dim, *c)),
            BoundJson::Expr { expr, lip } => Bounding::new(ScalarField::from_expr(dim, expr.build(dim)?), *lip),
        }
    }

    pub(crate) fn from_bound(b: &Bounding) -> BoundJson {
        BoundJson::Expr { expr: ExprJson::from_expr(b.field.expr()), lip: b.lip }
    }
}

impl CellJson {
    pub fn build(&self) -> Result<LipschitzCell> {
        let (cell, rotation) = match self {
            CellJson::Point => return Ok(LipschitzCell::point()),
            CellJson::Graph { xi, basis, rotation } => {
                let basis = basis.build()?;
                let xi = xi.build(basis.dim())?;
                (LipschitzCell::graph(basis, xi)?, rotation)
            }
            CellJson::Band { lower, upper, basis, rotation } => {
                let basis = basis.build()?;
                let d = basis.dim();
                let lower = lower.as_ref().map(|b| b.build(d)).transpose()?;
                let upper = upper.as_ref().map(|b| b.build(d)).transpose()?;
                (LipschitzCell::band(basis, lower, upper)?, rotation)
            }
        };
        match rotation {
            Some(rows) => cell.with_rotation(Rotation::new(rows.clone())?),
            None => Ok(cell),
        }
    }
}

impl From<&LipschitzCell> for CellJson {
    fn from(c: &LipschitzCell) -> CellJson {
        let basis = || Box::new(CellJson::from(c.basis().expect("positive dimension")));
        let rotation = c.rotation().map(|r| r.rows().to_vec());
        match c.kind() {
            CellKind::Point => CellJson::Point,
            CellKind::Graph { xi } => CellJson::Graph { xi: BoundJson::from_bound(xi), basis: basis(), rotation },
            CellKind::Band { lower, upper } => CellJson::Band {
                lower: lower.as_ref().map(BoundJson::from_bound),
                upper: upper.as_ref().map(BoundJson::from_bound),
                basis: basis(),
                rotation,
            },
        }
    }
}

impl Serialize for LipschitzCell {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        CellJson::from(self).serialize(s)
    }
}

impl<'de> Deserialize<'de> for LipschitzCell {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        CellJson::deserialize(d)?.build().map_err(serde::de::Error::custom)
    }
}

impl std::str::FromStr for LipschitzCell {
    type Err = Error;

    fn from_str(s: &str) -> Result<LipschitzCell> {
        let j: CellJson = serde_json::from_str(s).map_err(|e| Error::Parse(e.to_string()))?;
        j.build()
    }
}

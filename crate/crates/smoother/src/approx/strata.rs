//! Stratifications: input, validation and the automatic one-variable case.

use serde::{Deserialize, Serialize};

use crate::cells::{BoundJson, CellJson, CellKind, GraphTarget, LipschitzCell};
use crate::certify::{SampleGrid, Tri};
use crate::error::{check_dim, Error, Result};
use crate::fields::{AxisBox, ExprJson, ScalarField};

const FRONTIER_TOL: f64 = 1e-8;

/// Role of a stratum in the gluing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StratumClass {
    /// `Σ₀`: a full-dimensional cell.
    Open,
    /// `Σ₁`: a graph not in the closure of another positive-codimension stratum.
    Graph,
    /// Any other stratum; checked for disjointness, covered by the extended graphs.
    Lower,
}

#[derive(Debug, Clone)]
pub struct Stratum {
    pub cell: LipschitzCell,
    pub class: StratumClass,
    /// Smooth form of the target on the cell; derived from the target when absent.
    pub local_f: Option<ScalarField>,
}

impl Stratum {
    pub fn open(cell: LipschitzCell, local_f: Option<ScalarField>) -> Stratum {
        Stratum { cell, class: StratumClass::Open, local_f }
    }

    pub fn graph(cell: LipschitzCell) -> Stratum {
        Stratum { cell, class: StratumClass::Graph, local_f: None }
    }

    pub fn lower(cell: LipschitzCell) -> Stratum {
        Stratum { cell, class: StratumClass::Lower, local_f: None }
    }
}

/// A partition of `ℝⁿ` into Lipschitz cells adapted to `target`.
#[derive(Debug, Clone)]
pub struct Stratification {
    pub target: ScalarField,
    pub strata: Vec<Stratum>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StratumJson {
    pub cell: CellJson,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub local_f: Option<ExprJson>,
    /// Defaults to `open` for full-dimensional cells and `graph` otherwise.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub class: Option<StratumClass>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StratificationJson {
    pub strata: Vec<StratumJson>,
}

impl StratificationJson {
    pub fn build(&self, target: ScalarField) -> Result<Stratification> {
        let n = target.dim();
        let mut strata = Vec::with_capacity(self.strata.len());
        for s in &self.strata {
            let cell = s.cell.build()?;
            check_dim(n, cell.dim())?;
            let class = s.class.unwrap_or(if cell.is_open() { StratumClass::Open } else { StratumClass::Graph });
            let local_f = s.local_f.as_ref().map(|e| Ok::<_, Error>(ScalarField::from_expr(n, e.build(n)?))).transpose()?;
            strata.push(Stratum { cell, class, local_f });
        }
        Ok(Stratification { target, strata })
    }
}

impl Stratification {
    pub fn new(target: ScalarField, strata: Vec<Stratum>) -> Stratification {
        Stratification { target, strata }
    }

    pub fn dim(&self) -> usize {
        self.target.dim()
    }

    /// Certified Lipschitz constant of the target.
    pub fn target_lip(&self) -> Result<f64> {
        match self.target.lip_bound() {
            Some(l) if l.is_finite() && l >= 0.0 => Ok(l),
            _ => Err(Error::NotLipschitz("the target needs a lip_bound".into())),
        }
    }

    /// Check the invariants on `grid` and fill in missing local forms.
    ///
    /// * strata are pairwise disjoint at the lattice points;
    /// * classes match the cell shapes, and open cells have Nash local forms
    ///   agreeing with the target to 1e−9 at their lattice points.
    pub fn validate(&mut self, grid: &SampleGrid) -> Result<()> {
        let n = self.dim();
        check_dim(n, grid.dim())?;
        if self.strata.is_empty() {
            return Err(Error::InvalidCell("empty stratification".into()));
        }
        let pts = grid.points();
        let mut owner: Vec<Option<usize>> = vec![None; pts.len()];
        for (k, s) in self.strata.iter_mut().enumerate() {
            check_dim(n, s.cell.dim())?;
            match s.class {
                StratumClass::Open if !s.cell.is_open() => {
                    return Err(Error::InvalidCell(format!("stratum {k} is marked open but has dimension {}", s.cell.cell_dim())));
                }
                StratumClass::Graph if !matches!(s.cell.kind(), CellKind::Graph { .. }) => {
                    return Err(Error::InvalidCell(format!("stratum {k} is marked as a graph but is not one")));
                }
                _ => {}
            }
            let mut inside = Vec::new();
            for (i, p) in pts.iter().enumerate() {
                if s.cell.contains(p)? {
                    inside.push(p.clone());
                    // Lattice points within rounding of a frontier may also sit on the
                    // neighbouring graph; only points clearly inside count as overlaps.
                    if s.class == StratumClass::Open && s.cell.in_inner(p, FRONTIER_TOL)? != Tri::True {
                        continue;
                    }
                    if let Some(other) = owner[i] {
                        return Err(Error::InvalidCell(format!("strata {other} and {k} overlap at {p:?}")));
                    }
                    owner[i] = Some(k);
                }
            }
            if s.class != StratumClass::Open {
                continue;
            }
            let local = match &s.local_f {
                Some(f) => f.clone(),
                None => match self.target.specialize(&inside)? {
                    Some(f) if f.is_nash() => f,
                    _ => {
                        return Err(Error::InvalidCell(format!(
                            "stratum {k}: the target is not a single smooth piece on the cell; give local_f"
                        )))
                    }
                },
            };
            check_dim(n, local.dim())?;
            if !local.is_nash() {
                return Err(Error::InvalidCell(format!("stratum {k}: local_f must be Nash")));
            }
            for p in &inside {
                let (a, b) = (local.eval(p)?, self.target.eval(p)?);
                if (a - b).abs() > 1e-9 {
                    return Err(Error::InvalidCell(format!("stratum {k}: local_f = {a} but target = {b} at {p:?}")));
                }
            }
            s.local_f = Some(local);
        }
        Ok(())
    }

    /// `Σ′ = Σ₀ ∪ Σ₁`, with graph strata sharing an extended graph merged.
    /// Returns the open strata and the distinct graph targets.
    pub(crate) fn glued(&self) -> Result<(Vec<&Stratum>, Vec<GraphTarget>)> {
        let mut open = Vec::new();
        let mut graphs: Vec<(String, GraphTarget)> = Vec::new();
        for s in &self.strata {
            match s.class {
                StratumClass::Open => open.push(s),
                StratumClass::Graph => {
                    let t = s.cell.graph_target().ok_or_else(|| Error::InvalidCell("graph stratum without a graph".into()))?;
                    let key = serde_json::to_string(&(BoundJson::from_bound(&t.xi), t.rotation.as_ref().map(|r| r.rows())))
                        .map_err(|e| Error::Parse(e.to_string()))?;
                    if !graphs.iter().any(|(k, _)| *k == key) {
                        graphs.push((key, t));
                    }
                }
                StratumClass::Lower => {}
            }
        }
        Ok((open, graphs.into_iter().map(|(_, t)| t).collect()))
    }

    /// Stratify a one-variable target at the points where its piece selection
    /// changes inside `region`, located by bisection to about 1e−14.
    pub fn auto_1d(target: &ScalarField, region: &AxisBox, spacing: f64) -> Result<Stratification> {
        check_dim(1, target.dim())?;
        check_dim(1, region.dim())?;
        let (lo, hi) = (region.lo[0], region.hi[0]);
        let steps = (((hi - lo) / (spacing / 4.0)).ceil() as usize).max(1);
        let at = |i: usize| lo + (hi - lo) * i as f64 / steps as f64;
        let sig = |t: f64| target.piece_signature(&[t]);
        let mut breaks: Vec<f64> = Vec::new();
        let mut prev = sig(lo)?;
        for i in 1..=steps {
            let cur = sig(at(i))?;
            if cur != prev {
                let (mut a, mut b) = (at(i - 1), at(i));
                let left = prev.clone();
                while b - a > 1e-14 * (1.0 + a.abs()) {
                    let m = 0.5 * (a + b);
                    if m <= a || m >= b {
                        break;
                    }
                    if sig(m)? == left {
                        a = m
                    } else {
                        b = m
                    }
                }
                let mut t = 0.5 * (a + b);
                // Piece selection has a 1e−12 tie tolerance, so a kink at a short
                // decimal shows up that far off; snap it back so lattices hit it.
                let snapped = (t * 1e9).round() / 1e9;
                if (snapped - t).abs() <= 2e-12 * (1.0 + t.abs()) {
                    t = snapped + 0.0;
                }
                if breaks.last().is_none_or(|&last| t - last > 1e-9) {
                    breaks.push(t);
                }
            }
            prev = cur;
        }
        let mut strata = Vec::new();
        let mut edges: Vec<Option<f64>> = vec![None];
        edges.extend(breaks.iter().map(|&t| Some(t)));
        edges.push(None);
        for w in edges.windows(2) {
            let cell = LipschitzCell::interval(w[0], w[1]);
            let a = w[0].unwrap_or(lo).max(lo);
            let b = w[1].unwrap_or(hi).min(hi);
            let samples: Vec<Vec<f64>> = (1..64).map(|k| vec![a + (b - a) * k as f64 / 64.0]).collect();
            let local = target
                .specialize(&samples)?
                .filter(ScalarField::is_nash)
                .ok_or_else(|| Error::InvalidCell(format!("no single smooth piece on ({a}, {b})")))?;
            strata.push(Stratum::open(cell, Some(local)));
        }
        for &t in &breaks {
            strata.push(Stratum::graph(LipschitzCell::line_point(t)));
        }
        Ok(Stratification { target: target.clone(), strata })
    }
}

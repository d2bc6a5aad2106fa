//! Smoothing a function that is smooth on an open cell but may misbehave at
//! its frontier.
//!
//! Coordinates are replaced one level at a time, innermost first: a bounded
//! band `ξ < u_i < ξ′` is normalized to `(0, 1)` and pushed through `Ψ`, a
//! half-bounded band through `Φ` after shifting by its bound. Each bound is
//! read at the already substituted lower coordinates, so the substituted
//! point always lies in the cell and `f` is only ever evaluated there.

use serde::Serialize;

use crate::cells::{Bounding, LipschitzCell};
use crate::certify::{certify, Certificate, Claim, Sample, Slack, Tri};
use crate::error::{check_dim, Error, Result};
use crate::fields::ScalarField;
use crate::gadgets::Gadgets;

use super::ApproxOptions;

#[derive(Debug, Clone, Serialize)]
pub struct OpenCellApprox {
    #[serde(skip)]
    pub g: ScalarField,
    pub j_used: u32,
    pub certificate: Certificate,
}

/// `g ∈ 𝒟^∞(ℝⁿ)` with `|f − g|₁ < ε` on `𝒲_η(C)`, certified on `opts.grid()`.
///
/// `f` only needs to be smooth on `C`. The gadget scale at level `i` is
/// `ρ = η·δ_j/(1+L)` for a half-bounded band and `ρ = η·δ_j/((w+η)(1+L))` in
/// the normalized variable of a band of width `w`, so `ρ` stays below the
/// distance to the frontier on `𝒲_η(C)`.
pub fn approx_on_open_cell(
    f: &ScalarField,
    cell: &LipschitzCell,
    eps: &ScalarField,
    eta: &ScalarField,
    opts: &ApproxOptions,
) -> Result<OpenCellApprox> {
    let n = cell.dim();
    for d in [f.dim(), eps.dim(), eta.dim()] {
        check_dim(n, d)?;
    }
    opts.check_region(n)?;
    opts.check_tolerance(eps)?;
    if !cell.is_open() {
        return Err(Error::InvalidCell("open-cell approximation needs a full-dimensional cell".into()));
    }
    let grid = opts.grid();
    let mut last = None;
    for j in opts.schedule() {
        let g = substitute(f, cell, eta, &opts.delta(j))?;
        let claim = Claim::lt("|g − f|₁", "ε", "𝒲_η(C) ∩ box");
        let cert = certify(claim, &grid, Slack::Local, "open cell: g is C¹-close to f away from the frontier", |p| {
            let e = eta.eval(p)?;
            Ok(match cell.in_inner(p, e)? {
                Tri::False => Sample::Outside,
                Tri::Unresolved => Sample::Unresolved,
                Tri::True => {
                    let a = f.eval_with_gradient(p)?;
                    let b = g.eval_with_gradient(p)?;
                    let d: Vec<f64> = a.gradient.iter().zip(&b.gradient).map(|(x, y)| x - y).collect();
                    Sample::value((a.value - b.value).abs() + crate::fields::norm(&d) - eps.eval(p)?)
                }
            })
        })?;
        if cert.passed() {
            return Ok(OpenCellApprox { g, j_used: j, certificate: cert });
        }
        last = Some(cert.bound());
    }
    Err(Error::NoConvergence(format!(
        "open-cell approximation failed up to j = {} (last bound {:e})",
        opts.j_max,
        last.unwrap_or(f64::NAN)
    )))
}

/// `f ∘ v` with the level-by-level substituted coordinates `v`, at scale
/// `η·δ` (both fields on the ambient space).
pub(crate) fn substitute(f: &ScalarField, cell: &LipschitzCell, eta: &ScalarField, delta: &ScalarField) -> Result<ScalarField> {
    let n = cell.dim();
    let gadgets = Gadgets::standard();
    let slope = 1.0 / (1.0 + cell.lip());
    let (eta, delta, f) = match cell.rotation() {
        Some(r) => {
            let inv = r.inverse_fields();
            (eta.compose(&inv)?, delta.compose(&inv)?, f.compose(&inv)?)
        }
        None => (eta.clone(), delta.clone(), f.clone()),
    };
    let scale = &eta * &delta * slope;
    let u = ScalarField::coords(n);
    let mut v: Vec<ScalarField> = Vec::with_capacity(n);
    for (axis, lower, upper) in cell.levels()? {
        debug_assert_eq!(axis, v.len());
        let at = |b: &Bounding| -> Result<ScalarField> {
            if axis == 0 {
                Ok(b.field.lift(n, &[]))
            } else {
                b.field.compose(&v)
            }
        };
        let y = &u[axis];
        let next = match (lower, upper) {
            (None, None) => y.clone(),
            (Some(lo), None) => {
                let lo = at(&lo)?;
                &lo + gadgets.phi().compose(&[scale.clone(), y - &lo])?
            }
            (None, Some(hi)) => {
                let hi = at(&hi)?;
                &hi - gadgets.phi().compose(&[scale.clone(), &hi - y])?
            }
            (Some(lo), Some(hi)) => {
                let (lo, hi) = (at(&lo)?, at(&hi)?);
                let w = &hi - &lo;
                let rho = &scale / (&w + &eta);
                let t = (y - &lo) / &w;
                &lo + &w * gadgets.psi_unit().compose(&[rho, t])?
            }
        };
        v.push(next);
    }
    let local = f.compose(&v)?;
    match cell.rotation() {
        Some(r) => local.compose(&r.forward_fields()),
        None => Ok(local),
    }
}

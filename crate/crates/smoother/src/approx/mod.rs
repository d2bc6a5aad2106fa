//! Approximation pipelines: smoothing on one open cell, global Lipschitz
//! approximation with an ε-independent Lipschitz bound, the C¹ band step and
//! global C¹ approximation.
//!
//! All pipelines work over a user-supplied [`Stratification`]: open cells
//! (`Σ₀`) carry the smooth local form of the target, graph strata (`Σ₁`) the
//! kink sets. Strata in the closure of another positive-codimension stratum
//! take no part in the gluing; the extended graphs of `Σ₁` cover them.
//!
//! "For `j` large enough" is an explicit loop over [`J_SCHEDULE`] up to
//! `j_max`, ending in `NoConvergence`.

use serde::{Deserialize, Serialize};

use crate::certify::{Certificate, SampleGrid};
use crate::error::{Error, Result};
use crate::fields::{AxisBox, ScalarField};
use crate::gadgets::delta_j_scaled;

mod c1;
mod lipschitz;
mod open_cell;
mod strata;

pub use c1::{band_gauge, c1_approx, c1_band_approx, BandApprox, C1_SLACK};
pub use lipschitz::{lipschitz_approx, nash_bound};
pub use open_cell::{approx_on_open_cell, OpenCellApprox};
pub use strata::{Stratification, StratificationJson, Stratum, StratumClass, StratumJson};

#[cfg(test)]
mod tests;

/// The indices `j` tried by every pipeline, in order.
pub const J_SCHEDULE: [u32; 11] = [1, 2, 3, 4, 6, 8, 11, 16, 22, 32, 40];

pub const DEFAULT_J_MAX: u32 = 40;

/// Where and how finely a pipeline certifies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApproxOptions {
    pub region: AxisBox,
    pub spacing: f64,
    pub j_max: u32,
    /// First `j` tried; the default 1 runs the whole schedule.
    #[serde(default = "one")]
    pub j_min: u32,
}

fn one() -> u32 {
    1
}

impl ApproxOptions {
    pub fn new(region: AxisBox, spacing: f64) -> ApproxOptions {
        ApproxOptions { region, spacing, j_max: DEFAULT_J_MAX, j_min: 1 }
    }

    pub fn with_j_max(mut self, j_max: u32) -> ApproxOptions {
        self.j_max = j_max;
        self
    }

    pub fn with_j_min(mut self, j_min: u32) -> ApproxOptions {
        self.j_min = j_min;
        self
    }

    /// The same run for a subproblem on `region`.
    pub(crate) fn on(&self, region: AxisBox) -> ApproxOptions {
        ApproxOptions { region, ..self.clone() }
    }

    pub fn dim(&self) -> usize {
        self.region.dim()
    }

    pub fn grid(&self) -> SampleGrid {
        SampleGrid::new(self.region.clone(), self.spacing)
    }

    /// A grid four times coarser, for cheap rejection before certifying.
    pub(crate) fn coarse_grid(&self) -> SampleGrid {
        SampleGrid::new(self.region.clone(), self.spacing * 4.0)
    }

    /// The `j` values to try: `j_min`, the schedule beyond it up to `j_max`,
    /// then `j_max` itself.
    pub fn schedule(&self) -> Vec<u32> {
        let lo = self.j_min.max(1);
        let mut out = vec![lo];
        out.extend(J_SCHEDULE.iter().copied().filter(|&j| j > lo && j <= self.j_max));
        if *out.last().unwrap() < self.j_max {
            out.push(self.j_max);
        }
        out.retain(|&j| j <= self.j_max);
        out
    }

    /// Unit radius for `δ_j`: the box radius, at least 1.
    pub(crate) fn scale(&self) -> f64 {
        self.region.radius().max(1.0)
    }

    /// `δ_j(x/R)` on the ambient space.
    pub fn delta(&self, j: u32) -> ScalarField {
        delta_j_scaled(j, self.dim(), self.scale())
    }

    pub(crate) fn check_region(&self, n: usize) -> Result<()> {
        if self.region.dim() != n {
            return Err(Error::Dimension { expected: n, got: self.region.dim() });
        }
        if !(self.spacing > 0.0) || self.region.lo.iter().zip(&self.region.hi).any(|(a, b)| !(a <= b)) {
            return Err(Error::Domain("certification box needs lo ≤ hi and a positive spacing".into()));
        }
        Ok(())
    }

    /// Tolerances must be positive on the whole grid.
    pub(crate) fn check_tolerance(&self, eps: &ScalarField) -> Result<()> {
        for v in self.grid().map(|p| eps.eval(p).map(|e| (e, p.to_vec()))).into_iter().flatten() {
            let (e, p) = v?;
            if !(e > 0.0) {
                return Err(Error::Degenerate(format!("tolerance {e} at {p:?} is not positive")));
            }
        }
        Ok(())
    }
}

/// Output of a pipeline: the Nash field, the `j` that certified, and the record.
#[derive(Debug, Clone, Serialize)]
pub struct ApproximationResult {
    #[serde(skip)]
    pub g: ScalarField,
    pub j_used: u32,
    pub certificates: Vec<Certificate>,
    /// The ε-independent Lipschitz bound (Lipschitz pipeline only).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lip_bound_g: Option<f64>,
    /// Grid maximum of `|dg|`, for comparison with `lip_bound_g`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub measured_lip: Option<f64>,
    /// Measured `max(|g − f|, |dg − df|)/ε` on the grid (C¹ pipeline only).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub a_measured: Option<f64>,
    /// Grid maximum of `|g − f|`.
    pub sup_error: f64,
    /// Number of strata glued, `#Σ′`.
    pub glued: usize,
    pub tape_len: usize,
}

impl ApproximationResult {
    pub fn passed(&self) -> bool {
        self.certificates.iter().all(Certificate::passed)
    }
}

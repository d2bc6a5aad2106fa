//! Gadget constants: the search that finds them and the contract checks that
//! certify them.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{blend, c1_distance_certificate, Gadgets, Spline};
use crate::certify::{certify, Certificate, Claim, Sample, SampleGrid, Slack};
use crate::error::{Error, Result};
use crate::fields::{AxisBox, DualValue, ScalarField};

/// Tolerances at which the smoothing rule table is calibrated.
pub const CALIBRATION_MUS: [f64; 3] = [0.5, 0.1, 0.01];

/// `δ` values on which the gadget contracts are certified.
pub const CHECK_DELTAS: [f64; 5] = [0.5, 0.2, 0.1, 0.05, 0.02];

/// `μ` values on which the ψ contracts are certified.
pub const CHECK_MUS: [f64; 3] = [0.5, 0.1, 0.01];

/// `y` range of the contract grids.
pub const CHECK_SPAN: f64 = 3.0;

const SAFETY: f64 = 1.25;
const START_RADIUS: f64 = 0.25;
const MAX_HALVINGS: usize = 12;
const MAX_DOUBLINGS: usize = 8;

/// Smoothing rule: tolerance `mu` is met with blend radius `radius`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RuleEntry {
    pub mu: f64,
    pub radius: f64,
    pub sharpness: f64,
}

/// Every constant the gadgets depend on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GadgetCalibration {
    /// Sigmoid sharpness `k` used in every blend.
    pub sharpness: f64,
    /// ψ blends with radius `psi_radius·μ·δ` in the variable `y/δ`.
    pub psi_radius: f64,
    /// The constant `A` bounding `|dψ|`.
    pub a_psi: f64,
    /// Φ blends with radius `phi_radius·δ` in the variable `y/δ`.
    pub phi_radius: f64,
    /// Lipschitz bound of Φ on the contract grid.
    pub phi_lip: f64,
    /// The constant `L` of the two-sided gadget Ψ.
    pub l_psi: f64,
    /// Lipschitz bound of Ψ on the contract grid.
    pub psi_unit_lip: f64,
    /// Grid spacing the constants were certified at.
    pub spacing: f64,
    /// Smoothing rule table, sorted by decreasing `mu`.
    pub rules: Vec<RuleEntry>,
}

impl GadgetCalibration {
    /// The committed calibration shipped with the crate.
    pub fn frozen() -> GadgetCalibration {
        serde_json::from_str(include_str!("../../calibration.json")).expect("committed calibration.json is valid")
    }

    /// Blend radius and sharpness for C¹ tolerance `mu`.
    ///
    /// Uses the entry with the largest tabulated tolerance not above `mu`;
    /// below the table the radius shrinks linearly with `mu`.
    pub fn rule(&self, mu: f64) -> (f64, f64) {
        if let Some(e) = self.rules.iter().find(|e| e.mu <= mu) {
            return (e.radius, e.sharpness);
        }
        match self.rules.last() {
            Some(e) => (e.radius * mu / e.mu, e.sharpness),
            None => (START_RADIUS * mu, self.sharpness),
        }
    }

    pub fn load(path: &Path) -> Result<GadgetCalibration> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Calibration(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| Error::Calibration(format!("{}: {e}", path.display())))
    }

    /// Write atomically: a sibling temporary file is renamed over `path`.
    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).expect("calibration serializes");
        let tmp = path.with_extension("json.tmp");
        let io = |e: std::io::Error| Error::Calibration(format!("cannot write {}: {e}", path.display()));
        std::fs::write(&tmp, text + "\n").map_err(io)?;
        std::fs::rename(&tmp, path).map_err(io)
    }
}

fn y_grid(spacing: f64) -> SampleGrid {
    SampleGrid::new(AxisBox::new(vec![-CHECK_SPAN], vec![CHECK_SPAN]), spacing)
}

/// What a contract measures at one point `y` given the gadget's value and gradient.
type Measure<'a> = &'a (dyn Fn(f64, &DualValue) -> Option<(f64, Option<f64>)> + Sync);

fn contract(
    field: &ScalarField,
    fixed: &[f64],
    grid: &SampleGrid,
    claim: Claim,
    provenance: String,
    measure: Measure,
) -> Result<Certificate> {
    let mut p = [0.0; 4];
    p[..fixed.len()].copy_from_slice(fixed);
    let k = fixed.len();
    certify(claim, grid, Slack::Local, &provenance, |y| {
        let mut q = p;
        q[k] = y[0];
        let d = field.eval_with_gradient(&q[..=k])?;
        Ok(match measure(y[0], &d) {
            None => Sample::Outside,
            Some((v, Some(s))) => Sample::with_slope(v, s),
            Some((v, None)) => Sample::value(v),
        })
    })
}

fn grad_norm(d: &DualValue) -> f64 {
    d.grad_norm()
}

// |d(F − Λ)| where Λ is the projection onto the last coordinate.
fn grad_minus_last(d: &DualValue, dim: usize) -> f64 {
    let mut g = d.gradient.clone();
    g[dim - 1] -= 1.0;
    g.iter().map(|v| v * v).sum::<f64>().sqrt()
}

// The piecewise profile `θ(y/δ) + μ²/4` that ψ smooths.
fn psi_input() -> ScalarField {
    let [mu, delta, y] = [0, 1, 2].map(|i| ScalarField::coord(3, i));
    Spline::cutoff(2.0).to_field(&(&y / &delta)) + mu.powi(2) * 0.25
}

fn psi_certificates(g: &Gadgets, grid: &SampleGrid, full: bool) -> Result<Vec<Certificate>> {
    let psi = g.psi();
    let a = g.cal.a_psi;
    let input = psi_input();
    let mut out = Vec::new();
    for &mu in &CHECK_MUS {
        for &delta in &CHECK_DELTAS {
            let f = [mu, delta];
            let at = format!("μ = {mu}, δ = {delta}");
            let c = |lhs: &str, rhs: String, region: &str| Claim::lt(lhs, rhs, format!("{region}, {at}"));
            out.push(contract(psi, &f, grid, c("1 − ψ", "0".into(), "y ≤ 0"), "psi: lower plateau above 1".into(), &|y, d| {
                (y <= 0.0).then_some((1.0 - d.value, Some(d.gradient[2].abs())))
            })?);
            out.push(contract(psi, &f, grid, c("ψ", format!("{mu}"), "y ≥ δ"), "psi: upper tail below μ".into(), &move |y, d| {
                (y >= delta).then_some((d.value - mu, Some(d.gradient[2].abs())))
            })?);
            out.push(contract(psi, &f, grid, c("|dψ|", format!("{mu}"), "y ≥ δ"), "psi: upper tail slope below μ".into(), &move |y, d| {
                (y >= delta).then_some((grad_norm(d) - mu, None))
            })?);
            let oracle = input.clone();
            out.push(contract(psi, &f, grid, c("|u − ψ|₁", format!("{}", mu / 2.0), "ℝ"), "psi: C¹ distance to the cutoff".into(), &move |y, d| {
                let u = oracle.eval_with_gradient(&[mu, delta, y]).ok()?;
                let dg: f64 = (0..3).map(|i| (u.gradient[i] - d.gradient[i]).powi(2)).sum::<f64>().sqrt();
                Some(((u.value - d.value).abs() + dg - mu / 2.0, None))
            })?);
            if !full {
                continue;
            }
            out.push(contract(psi, &f, grid, c("|dψ|", format!("{a} (A)"), "y ≤ 0"), "psi: slope at most A".into(), &move |y, d| {
                (y <= 0.0).then_some((grad_norm(d) - a, None))
            })?);
            out.push(contract(psi, &f, grid, c("δ|dψ|", format!("{a} (A)"), "y ≥ 0"), "psi: slope at most A/δ".into(), &move |y, d| {
                (y >= 0.0).then_some((delta * grad_norm(d) - a, None))
            })?);
            out.push(contract(psi, &f, grid, c("|ψ − 3/2| − 3/2 + 10⁻⁶", "0".into(), "ℝ"), "psi: values in [0, 3)".into(), &|_, d| {
                Some(((d.value - 1.5).abs() - 1.5 + 1e-6, Some(d.gradient[2].abs())))
            })?);
        }
    }
    Ok(out)
}

fn phi_certificates(g: &Gadgets, grid: &SampleGrid, full: bool) -> Result<Vec<Certificate>> {
    let phi = g.phi();
    let lip = g.cal.phi_lip;
    let mut out = Vec::new();
    for &delta in &CHECK_DELTAS {
        let f = [delta];
        let c = |lhs: &str, rhs: String, region: &str| Claim::lt(lhs, rhs, format!("{region}, δ = {delta}"));
        out.push(contract(phi, &f, grid, c("−Φ", "0".into(), "y ≤ δ"), "phi: positive below δ".into(), &move |y, d| {
            (y <= delta).then_some((-d.value, Some(d.gradient[1].abs())))
        })?);
        out.push(contract(phi, &f, grid, c("Φ", format!("{}", 2.0 * delta), "y ≤ δ"), "phi: below 2δ below δ".into(), &move |y, d| {
            (y <= delta).then_some((d.value - 2.0 * delta, Some(d.gradient[1].abs())))
        })?);
        out.push(contract(phi, &f, grid, c("|Φ − y|", format!("{delta}"), "y ≥ δ"), "phi: near the identity above δ".into(), &move |y, d| {
            (y >= delta).then_some(((d.value - y).abs() - delta, Some((d.gradient[1] - 1.0).abs())))
        })?);
        out.push(contract(phi, &f, grid, c("|d(Φ − Λ)|", format!("{delta}"), "y ≥ δ"), "phi: C¹ near the identity above δ".into(), &move |y, d| {
            (y >= delta).then_some((grad_minus_last(d, 2) - delta, None))
        })?);
        if full {
            out.push(contract(phi, &f, grid, c("|dΦ|", format!("{lip}"), "ℝ"), "phi: Lipschitz bound".into(), &move |_, d| {
                Some((grad_norm(d) - lip, None))
            })?);
        }
    }
    Ok(out)
}

fn psi_unit_certificates(g: &Gadgets, grid: &SampleGrid, full: bool) -> Result<Vec<Certificate>> {
    let psi = g.psi_unit();
    let lip = g.cal.psi_unit_lip;
    let mut out = Vec::new();
    for &delta in &CHECK_DELTAS {
        let f = [delta];
        let c = |lhs: &str, rhs: String, region: &str| Claim::lt(lhs, rhs, format!("{region}, δ = {delta}"));
        out.push(contract(psi, &f, grid, c("|Ψ − 1/2| − 1/2", "0".into(), "ℝ"), "psi_unit: values in (0, 1)".into(), &|_, d| {
            Some(((d.value - 0.5).abs() - 0.5, Some(d.gradient[1].abs())))
        })?);
        if delta < 0.5 {
            let inside = move |y: f64| y > delta && y < 1.0 - delta;
            out.push(contract(psi, &f, grid, c("|Ψ − y|", format!("{delta}"), "δ < y < 1 − δ"), "psi_unit: near the identity".into(), &move |y, d| {
                inside(y).then_some(((d.value - y).abs() - delta, Some((d.gradient[1] - 1.0).abs())))
            })?);
            out.push(contract(psi, &f, grid, c("|d(Ψ − Λ)|", format!("{delta}"), "δ < y < 1 − δ"), "psi_unit: C¹ near the identity".into(), &move |y, d| {
                inside(y).then_some((grad_minus_last(d, 2) - delta, None))
            })?);
        }
        if full {
            out.push(contract(psi, &f, grid, c("|dΨ|", format!("{lip}"), "ℝ"), "psi_unit: Lipschitz bound".into(), &move |_, d| {
                Some((grad_norm(d) - lip, None))
            })?);
        }
    }
    Ok(out)
}

/// Certificates for every gadget contract on the standard check grids at `spacing`.
pub fn gadget_certificates(g: &Gadgets, spacing: f64) -> Result<Vec<Certificate>> {
    let grid = y_grid(spacing);
    let mut out = psi_certificates(g, &grid, true)?;
    out.extend(phi_certificates(g, &grid, true)?);
    out.extend(psi_unit_certificates(g, &grid, true)?);
    Ok(out)
}

fn all_pass(c: &[Certificate]) -> bool {
    c.iter().all(Certificate::passed)
}

// Largest `measure` over the check grid, for each fixed parameter tuple.
fn sup_over(
    field: &ScalarField,
    params: &[Vec<f64>],
    grid: &SampleGrid,
    measure: impl Fn(&[f64], f64, &DualValue) -> f64 + Sync,
) -> Result<f64> {
    let mut best = 0f64;
    for fixed in params {
        let vals = grid.map(|y| -> Result<f64> {
            let mut p = fixed.clone();
            p.push(y[0]);
            Ok(measure(fixed, y[0], &field.eval_with_gradient(&p)?))
        });
        for v in vals.into_iter().flatten() {
            best = best.max(v?);
        }
    }
    Ok(best)
}

fn smoothing_radius(mu: f64, sharpness: f64) -> Result<f64> {
    let spline = Spline::cutoff(2.0);
    let t = ScalarField::coord(1, 0);
    let input = spline.to_field(&t);
    let grid = SampleGrid::new(AxisBox::new(vec![-2.0], vec![3.0]), 1e-3);
    let mut r = START_RADIUS;
    for _ in 0..MAX_HALVINGS {
        let out = blend(&spline, &t, &ScalarField::constant(1, r), sharpness);
        if c1_distance_certificate(&input, &out, mu / 2.0, &grid, "calibration")?.passed() {
            return Ok(r);
        }
        r /= 2.0;
    }
    Err(Error::Calibration(format!("no blend radius reaches C¹ error {} for μ = {mu}", mu / 2.0)))
}

/// Search for gadget constants that pass every contract at `spacing`.
///
/// Radii are halved from `¼` until the value and tail contracts hold, the
/// slope constants are the measured suprema times a safety factor, and `L`
/// is doubled from 4.
pub fn calibrate(spacing: f64) -> Result<GadgetCalibration> {
    let sharpness = 1.0;
    let grid = y_grid(spacing);
    let mut cal = GadgetCalibration {
        sharpness,
        psi_radius: START_RADIUS,
        a_psi: f64::INFINITY,
        phi_radius: START_RADIUS,
        phi_lip: f64::INFINITY,
        l_psi: 4.0,
        psi_unit_lip: f64::INFINITY,
        spacing,
        rules: Vec::new(),
    };
    for &mu in &CALIBRATION_MUS {
        cal.rules.push(RuleEntry { mu, radius: smoothing_radius(mu, sharpness)?, sharpness });
    }

    let mut found = false;
    for _ in 0..MAX_HALVINGS {
        if all_pass(&phi_certificates(&Gadgets::new(cal.clone()), &grid, false)?) {
            found = true;
            break;
        }
        cal.phi_radius /= 2.0;
    }
    if !found {
        return Err(Error::Calibration("Φ contracts fail at every tried radius".into()));
    }
    let deltas: Vec<Vec<f64>> = CHECK_DELTAS.iter().map(|d| vec![*d]).collect();
    let g = Gadgets::new(cal.clone());
    cal.phi_lip = SAFETY * sup_over(g.phi(), &deltas, &grid, |_, _, d| d.grad_norm())?;

    found = false;
    for _ in 0..MAX_HALVINGS {
        if all_pass(&psi_certificates(&Gadgets::new(cal.clone()), &grid, false)?) {
            found = true;
            break;
        }
        cal.psi_radius /= 2.0;
    }
    if !found {
        return Err(Error::Calibration("ψ contracts fail at every tried radius".into()));
    }
    let params: Vec<Vec<f64>> =
        CHECK_MUS.iter().flat_map(|m| CHECK_DELTAS.iter().map(move |d| vec![*m, *d])).collect();
    let g = Gadgets::new(cal.clone());
    cal.a_psi = SAFETY
        * sup_over(g.psi(), &params, &grid, |f, y, d| {
            let n = d.grad_norm();
            if y < 0.0 {
                n
            } else if y > 0.0 {
                f[1] * n
            } else {
                n.max(f[1] * n)
            }
        })?;

    found = false;
    for _ in 0..MAX_DOUBLINGS {
        if all_pass(&psi_unit_certificates(&Gadgets::new(cal.clone()), &grid, false)?) {
            found = true;
            break;
        }
        cal.l_psi *= 2.0;
    }
    if !found {
        let g = Gadgets::new(cal.clone());
        let bad = psi_unit_certificates(&g, &grid, false)?.into_iter().find(|c| !c.passed()).unwrap();
        return Err(Error::Calibration(format!(
            "Ψ contracts fail for every tried L, e.g. {} < {} on {}",
            bad.claim.lhs, bad.claim.rhs, bad.claim.region
        )));
    }
    let g = Gadgets::new(cal.clone());
    cal.psi_unit_lip = SAFETY * sup_over(g.psi_unit(), &deltas, &grid, |_, _, d| d.grad_norm())?;

    if let Some(c) = gadget_certificates(&Gadgets::new(cal.clone()), spacing)?.into_iter().find(|c| !c.passed()) {
        return Err(Error::Calibration(format!(
            "calibrated constants fail {} < {} on {} (worst {:?})",
            c.claim.lhs, c.claim.rhs, c.claim.region, c.worst_point
        )));
    }
    Ok(cal)
}

//! Global Lipschitz approximation with a Lipschitz bound that does not depend
//! on the tolerance.
//!
//! Per `j`: graph strata get the trace `θ(ũ) = f(Rᵀ(ũ, ξ(ũ)))`, approximated one
//! dimension down and extended constantly across the graph; open strata get
//! the open-cell approximation of their local form. Graph bumps at radii
//! `(bδ_j, δ_j)` and cell bumps at `(bcδ_j, bδ_j)` glue them through the
//! normalized partition, `g_j = Σ λ_S g_S / Σ λ_S`.
//!
//! The bound `L_out` is assembled from `L_f`, the bump constants `N_S` and the
//! stratum count only:
//!
//! ```text
//! K     = Σ_T N_T/ρ_T                     (ρ = 1 for graphs, b for cells)
//! L_out = max_S L_gS + #Σ′/2 + Σ_S max(4·E_S·K, K + ½)
//! ```
//!
//! where `E_S` bounds `|g_S − f|/δ_j` near `S` and `L_gS` bounds `|dg_S|`.

use crate::cells::{sandwich_constants, Bounding, GraphTarget};
use crate::certify::{certify, Certificate, Claim, Sample, SampleGrid, Slack};
use crate::error::{check_dim, Error, Result};
use crate::fields::{AxisBox, ScalarField};
use crate::glue::{cell_bump, graph_bump, normalized_partition, partition_identity, BumpResult};

use super::open_cell::approx_on_open_cell;
use super::{ApproxOptions, ApproximationResult, Stratification};

// Safety factor on the grid minimum defining μ_j.
const MU_SAFETY: f64 = 0.5;

/// How a graph stratum gets its local approximant.
enum Trace {
    /// `θ` specialized to a Nash field: used as is for every `j`.
    Fixed(ScalarField, f64),
    /// `θ` kinked: one-variable pipeline over its own stratification, per `j`.
    Recursive(Stratification),
}

struct GraphPart {
    target: GraphTarget,
    trace: Trace,
    /// `E_S = 1 + L_f(1 + L_ξ)`.
    err_const: f64,
}

/// Lipschitz approximation of `strat.target` within `eps` on `opts.region`.
pub fn lipschitz_approx(strat: &Stratification, eps: &ScalarField, opts: &ApproxOptions) -> Result<ApproximationResult> {
    let n = strat.dim();
    check_dim(n, eps.dim())?;
    opts.check_region(n)?;
    opts.check_tolerance(eps)?;
    if let Some(d) = strat.target.domain() {
        let r = &opts.region;
        if !(d.contains(&r.lo, 0.0) && d.contains(&r.hi, 0.0)) {
            return Err(Error::Domain("the target is only defined on part of the box; extend it with cells::mcshane_extend".into()));
        }
    }
    let lip_f = strat.target_lip()?;
    let f = &strat.target;
    let grid = opts.grid();
    if f.is_nash() {
        return nash_target(f, eps, lip_f, &grid);
    }
    let mut strat = strat.clone();
    strat.validate(&grid)?;
    let (open, graphs) = strat.glued()?;
    let lip = open
        .iter()
        .map(|s| s.cell.lip())
        .chain(graphs.iter().map(|t| t.xi.lip))
        .fold(1.0f64, f64::max);
    let s = sandwich_constants(lip)?;
    let b = s.c;
    let parts = graphs.into_iter().map(|t| graph_part(f, lip_f, t, opts)).collect::<Result<Vec<_>>>()?;
    let glued = open.len() + parts.len();

    let mut last = String::from("no j tried");
    for j in opts.schedule() {
        let delta = opts.delta(j);
        let mut locals: Vec<ScalarField> = Vec::with_capacity(glued);
        let mut local_certs: Vec<Certificate> = Vec::new();
        let mut lip_g: Vec<f64> = Vec::with_capacity(glued);
        let mut err_consts: Vec<f64> = Vec::with_capacity(glued);
        for p in &parts {
            let (g, l) = graph_local(p, j, opts)?;
            locals.push(g);
            lip_g.push(l);
            err_consts.push(p.err_const);
        }
        for st in &open {
            let local_f = st.local_f.as_ref().expect("validated");
            let eta = &delta * (b * s.c);
            let oc = approx_on_open_cell(local_f, &st.cell, &delta, &eta, opts)?;
            locals.push(oc.g);
            local_certs.push(oc.certificate);
            lip_g.push(lip_f + 1.0);
            err_consts.push(1.0);
        }
        let mu = mu_j(f, &locals, &delta, &opts.coarse_grid())?;
        let mut bumps: Vec<BumpResult> = Vec::with_capacity(glued);
        let mut rho: Vec<f64> = Vec::with_capacity(glued);
        for p in &parts {
            bumps.push(graph_bump(&p.target, &delta, mu, lip, &opts.region)?);
            rho.push(1.0);
        }
        for st in &open {
            bumps.push(cell_bump(&st.cell, &(&delta * b), mu, lip, &opts.region)?);
            rho.push(b);
        }
        let l_out = lip_out(&bumps, &rho, &lip_g, &err_consts);
        let lambdas: Vec<ScalarField> = bumps.iter().map(|x| x.lambda.clone()).collect();
        let weighted: Vec<ScalarField> = lambdas.iter().zip(&locals).map(|(l, g)| l * g).collect();
        let partition = normalized_partition(&lambdas, &grid)?;
        let g = if glued == 1 { locals[0].clone() } else { ScalarField::sum(&weighted) / &partition.sum };

        let coarse = sup_error(f, &g, &opts.coarse_grid())?;
        let e_min = min_on(eps, &opts.coarse_grid())?;
        if coarse >= e_min {
            last = format!("j = {j}: coarse sup |g − f| = {coarse:e}");
            continue;
        }
        let err = error_certificate(f, &g, eps, &grid)?;
        if !err.passed() {
            last = format!("j = {j}: bound {:e}", err.bound());
            continue;
        }
        let lipc = lip_certificate(&g, l_out, &grid)?;
        let lipc_slope = lipc.measured_max + l_out;
        let sup = sup_error(f, &g, &grid)?;
        let identity = partition_identity(&partition, &lambdas, &grid)?;
        let mut certificates = vec![partition.cover, err, lipc];
        certificates.extend(identity);
        certificates.extend(local_certs);
        return Ok(ApproximationResult {
            tape_len: g.tape_len()?,
            g,
            j_used: j,
            certificates,
            lip_bound_g: Some(l_out),
            measured_lip: Some(lipc_slope),
            a_measured: None,
            sup_error: sup,
            glued,
        });
    }
    Err(Error::NoConvergence(format!("Lipschitz approximation up to j = {}: {last}", opts.j_max)))
}

fn nash_target(f: &ScalarField, eps: &ScalarField, lip_f: f64, grid: &SampleGrid) -> Result<ApproximationResult> {
    let l_out = lip_f + 0.5;
    let err = error_certificate(f, f, eps, grid)?;
    let lipc = lip_certificate(f, l_out, grid)?;
    let slope = lipc.measured_max + l_out;
    Ok(ApproximationResult {
        g: f.clone(),
        j_used: 1,
        certificates: vec![err, lipc],
        lip_bound_g: Some(l_out),
        measured_lip: Some(slope),
        a_measured: None,
        sup_error: 0.0,
        glued: 1,
        tape_len: f.tape_len()?,
    })
}

fn graph_part(f: &ScalarField, lip_f: f64, target: GraphTarget, opts: &ApproxOptions) -> Result<GraphPart> {
    let n = target.dim();
    let m = n - 1;
    let xi_lip = target.xi.lip;
    let err_const = 1.0 + lip_f * (1.0 + xi_lip);
    let theta = trace(f, &target)?;
    let lip = lip_f * (1.0 + xi_lip);
    let sub_region = projected_region(&opts.region, &target);
    let samples = SampleGrid::new(sub_region.clone(), opts.spacing).points();
    if let Some(t) = theta.specialize(&samples)?.filter(ScalarField::is_nash) {
        return Ok(GraphPart { target, trace: Trace::Fixed(t, lip), err_const });
    }
    if m != 1 {
        return Err(Error::Degenerate(format!(
            "the trace of the target on a graph in dimension {m} is not smooth; split the stratification further"
        )));
    }
    let strat = Stratification::auto_1d(&theta.clone().with_lip_bound(lip), &sub_region, opts.spacing)?;
    Ok(GraphPart { target, trace: Trace::Recursive(strat), err_const })
}

/// `θ(ũ) = f(Rᵀ(ũ, ξ(ũ)))` on `ℝ^{n−1}`.
fn trace(f: &ScalarField, target: &GraphTarget) -> Result<ScalarField> {
    let n = target.dim();
    let m = n - 1;
    let mut u: Vec<ScalarField> = ScalarField::coords(m);
    u.push(if m == 0 { target.xi.field.clone() } else { target.xi.field.compose(&ScalarField::coords(m))? });
    let x = match &target.rotation {
        Some(r) => r.inverse_fields().iter().map(|c| c.compose(&u)).collect::<Result<Vec<_>>>()?,
        None => u,
    };
    f.compose(&x)
}

/// Bounding box of `ũ = (R x)_{<n}` over the box.
pub(crate) fn projected_region(region: &AxisBox, target: &GraphTarget) -> AxisBox {
    let n = target.dim();
    let m = n - 1;
    match &target.rotation {
        None => AxisBox::new(region.lo[..m].to_vec(), region.hi[..m].to_vec()),
        Some(r) => {
            let (mut lo, mut hi) = (vec![0.0; m], vec![0.0; m]);
            for k in 0..m {
                for i in 0..n {
                    let (a, b) = (r.rows()[k][i] * region.lo[i], r.rows()[k][i] * region.hi[i]);
                    lo[k] += a.min(b);
                    hi[k] += a.max(b);
                }
            }
            AxisBox::new(lo, hi)
        }
    }
}

/// `g_S = G(ũ(x))` and its Lipschitz bound, for one `j`.
fn graph_local(part: &GraphPart, j: u32, opts: &ApproxOptions) -> Result<(ScalarField, f64)> {
    let n = part.target.dim();
    let m = n - 1;
    let (big_g, l) = match &part.trace {
        Trace::Fixed(t, l) => (t.clone(), *l),
        Trace::Recursive(strat) => {
            let tol = trace_tolerance(part, j, opts)?;
            let sub = opts.on(projected_region(&opts.region, &part.target)).with_j_min(1);
            let r = lipschitz_approx(strat, &tol, &sub)?;
            (r.g, r.lip_bound_g.expect("Lipschitz pipeline reports a bound"))
        }
    };
    let lifted = if m == 0 {
        big_g.lift(n, &[])
    } else {
        let u: Vec<ScalarField> = match &part.target.rotation {
            Some(r) => r.forward_fields()[..m].to_vec(),
            None => ScalarField::coords(n)[..m].to_vec(),
        };
        big_g.compose(&u)?
    };
    Ok((lifted, l))
}

/// `δ′(ũ) = δ_j(ũ, Y(ũ))` with `Y = |ξ(0)| + L_ξ√(1+|ũ|²) + L_ξ + 1`, which is
/// at least `|u_n|` on the strip `|u_n − ξ| ≤ L_ξ + 1`. `δ_j` decreases in `|x|`,
/// so this is a lower bound for the infimum over the strip.
fn trace_tolerance(part: &GraphPart, j: u32, opts: &ApproxOptions) -> Result<ScalarField> {
    let n = part.target.dim();
    let m = n - 1;
    let xi = &part.target.xi;
    let l = xi.lip;
    let xi0 = xi.field.eval(&vec![0.0; m])?.abs();
    let u = ScalarField::coords(m);
    let r2 = ScalarField::sum(&u.iter().map(|c| c * c).collect::<Vec<_>>());
    let y = (r2 + 1.0).sqrt() * l + (xi0 + l + 1.0);
    let mut args = u;
    args.push(y);
    opts.delta(j).compose(&args)
}

/// `μ_j`: half the grid minimum of `δ_j/(1 + |f| + |g_S|₁)`, capped below 1.
fn mu_j(f: &ScalarField, locals: &[ScalarField], delta: &ScalarField, grid: &SampleGrid) -> Result<f64> {
    let vals = grid.map(|p| -> Result<f64> {
        let fv = f.eval(p)?.abs();
        let d = delta.eval(p)?;
        let mut worst = 0.0f64;
        for g in locals {
            let v = g.eval_with_gradient(p)?;
            worst = worst.max(v.value.abs() + v.grad_norm());
        }
        Ok(d / (1.0 + fv + worst))
    });
    let mut m = f64::INFINITY;
    for v in vals.into_iter().flatten() {
        m = m.min(v?);
    }
    if !(m > 0.0) {
        return Err(Error::Degenerate("μ_j vanished on the grid".into()));
    }
    Ok((MU_SAFETY * m).min(0.5))
}

fn lip_out(bumps: &[BumpResult], rho: &[f64], lip_g: &[f64], err: &[f64]) -> f64 {
    let k: f64 = bumps.iter().zip(rho).map(|(b, r)| b.n_const / r).sum();
    let count = bumps.len() as f64;
    let base = lip_g.iter().copied().fold(0.0, f64::max) + count / 2.0;
    base + err.iter().map(|e| (4.0 * e * k).max(k + 0.5)).sum::<f64>()
}

fn min_on(field: &ScalarField, grid: &SampleGrid) -> Result<f64> {
    let mut m = f64::INFINITY;
    for v in grid.map(|p| field.eval(p)).into_iter().flatten() {
        m = m.min(v?);
    }
    Ok(m)
}

pub(crate) fn sup_error(f: &ScalarField, g: &ScalarField, grid: &SampleGrid) -> Result<f64> {
    let mut m = 0.0f64;
    for v in grid.map(|p| Ok::<_, Error>((f.eval(p)? - g.eval(p)?).abs())).into_iter().flatten() {
        m = m.max(v?);
    }
    Ok(m)
}

pub(crate) fn error_certificate(f: &ScalarField, g: &ScalarField, eps: &ScalarField, grid: &SampleGrid) -> Result<Certificate> {
    certify(Claim::lt("|g − f|", "ε", "box"), grid, Slack::Local, "Lipschitz approximation: g is within ε of f", |p| {
        Ok(Sample::value((g.eval(p)? - f.eval(p)?).abs() - eps.eval(p)?))
    })
}

fn lip_certificate(g: &ScalarField, l_out: f64, grid: &SampleGrid) -> Result<Certificate> {
    let claim = Claim::lt("|dg|", format!("{l_out:e}"), "box");
    certify(claim, grid, Slack::Local, "Lipschitz approximation: the slope of g stays below L_out", |p| {
        Ok(Sample::value(g.eval_with_gradient(p)?.grad_norm() - l_out))
    })
}

/// A Nash replacement for a cell bound, within `eps` of it on `region`.
///
/// Nash bounds come back unchanged. One-variable bounds go through the
/// Lipschitz pipeline with an automatic stratification, and the new
/// Lipschitz constant is the pipeline's `L_out`. Note that the cell changes
/// with its bound.
pub fn nash_bound(bound: &Bounding, eps: f64, region: &AxisBox, spacing: f64) -> Result<Bounding> {
    if bound.field.is_nash() {
        return Ok(bound.clone());
    }
    if bound.field.dim() != 1 {
        return Err(Error::Degenerate("only one-variable bounds can be smoothed automatically".into()));
    }
    let f = bound.field.clone().with_lip_bound(bound.lip);
    let strat = Stratification::auto_1d(&f, region, spacing)?;
    let opts = ApproxOptions::new(region.clone(), spacing);
    let r = lipschitz_approx(&strat, &ScalarField::constant(1, eps), &opts)?;
    Bounding::new(r.g, r.lip_bound_g.expect("Lipschitz pipeline reports a bound"))
}


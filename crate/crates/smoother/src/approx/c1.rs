//! C¹ approximation: the band step around one graph and the global pipeline.
//!
//! Around a graph `u_n = ξ′(ũ)` of half-width `δ′(ũ)` the target is replaced
//! by its secant in the normal direction,
//! `g = μ₀(ũ) + (u_n − ξ′(ũ))·μ₁(ũ)` with
//! `λ₀ = f(ũ, ξ′)` and `λ₁ = (f(ũ, ξ′ + δ′) − f(ũ, ξ′))/δ′`,
//! where `μ₀`, `μ₁` are C¹ approximations of `λ₀`, `λ₁` one dimension down.
//! The band must be narrow compared with the modulus of continuity of `df`;
//! [`band_gauge`] measures that.

use serde::Serialize;

use crate::cells::{continuity_gauge, sandwich_constants, Bounding, GraphTarget};
use crate::certify::{certify, Certificate, Claim, Sample, SampleGrid, Slack, Tri};
use crate::error::{check_dim, Error, Result};
use crate::fields::{norm, AxisBox, ScalarField, SmoothClass};
use crate::glue::{cell_bump, graph_bump, normalized_partition, partition_identity};

use super::lipschitz::lipschitz_approx;
use super::open_cell::approx_on_open_cell;
use super::{ApproxOptions, ApproximationResult, Stratification};

/// The constant `a` certified by [`c1_approx`]: `|g − f| < aε` and `|dg − df| < aε`.
pub const C1_SLACK: f64 = 4.0;

// Points per axis of the lattice carrying the gauge.
const GAUGE_LATTICE: f64 = 64.0;
// Step of the central differences standing in for the partials of f.
const FD_STEP: f64 = 1e-6;

#[derive(Debug, Clone, Serialize)]
pub struct BandApprox {
    #[serde(skip)]
    pub g: ScalarField,
    /// The smoothed graph the band is centred on.
    #[serde(skip)]
    pub center: ScalarField,
    pub certificates: Vec<Certificate>,
}

impl BandApprox {
    pub fn passed(&self) -> bool {
        self.certificates.iter().all(Certificate::passed)
    }
}

fn gauge_step(region: &AxisBox, spacing: f64) -> f64 {
    let width = region.lo.iter().zip(&region.hi).map(|(a, b)| b - a).fold(0.0, f64::max);
    (width / GAUGE_LATTICE).max(spacing)
}

/// A field `η` such that `|df(x) − df(x′)| < ε(x)/4` whenever `|x − x′| < η(x)`,
/// built with the continuity gauge of central-difference partials of `f`.
pub fn band_gauge(f: &ScalarField, eps: &ScalarField, region: &AxisBox, spacing: f64) -> Result<ScalarField> {
    let n = f.dim();
    check_dim(n, eps.dim())?;
    let step = gauge_step(region, spacing);
    let share = eps * (0.25 / (n as f64).sqrt());
    let mut gauge: Option<ScalarField> = None;
    for i in 0..n {
        let shifted = |s: f64| -> Result<ScalarField> {
            let mut x = ScalarField::coords(n);
            x[i] = &x[i] + s;
            f.compose(&x)
        };
        let partial = (shifted(FD_STEP)? - shifted(-FD_STEP)?) * (0.5 / FD_STEP);
        let g = continuity_gauge(&partial, &share, region, step)?;
        gauge = Some(match gauge {
            None => g,
            Some(prev) => prev.min(&g).with_class(SmoothClass::C0),
        });
    }
    gauge.ok_or_else(|| Error::Domain("band gauge on ℝ⁰".into()))
}

/// Checks `|δ|₁ < η` on the gauge lattice.
fn check_gauge(delta: &ScalarField, gauge: &ScalarField, region: &AxisBox, spacing: f64) -> Result<()> {
    let grid = SampleGrid::new(region.clone(), gauge_step(region, spacing));
    for v in grid.map(|p| -> Result<Option<(Vec<f64>, f64, f64)>> {
        let d = delta.eval_with_gradient(p)?;
        let e = gauge.eval(p)?;
        Ok((d.value.abs() + d.grad_norm() >= e).then(|| (p.to_vec(), d.value.abs() + d.grad_norm(), e)))
    }) {
        if let Some((p, d, e)) = v.transpose()?.flatten() {
            return Err(Error::Gauge(format!("|δ|₁ = {d:e} exceeds the gauge {e:e} at {p:?}")));
        }
    }
    Ok(())
}

/// C¹ approximation of `f` on the band `|u_n − ξ′(ũ)| ≤ δ′(ũ)` around the graph.
///
/// Certifies `|f − g| < δε` and `|df − dg| < ε` on the band within the box.
/// A non-Nash `ξ` is first replaced by a Lipschitz approximation within `δ′/2`.
pub fn c1_band_approx(
    f: &ScalarField,
    target: &GraphTarget,
    delta: &ScalarField,
    eps: &ScalarField,
    opts: &ApproxOptions,
) -> Result<BandApprox> {
    let gauge = band_gauge(f, eps, &opts.region, opts.spacing)?;
    check_gauge(delta, &gauge, &opts.region, opts.spacing)?;
    band_unchecked(f, target, delta, eps, opts)
}

fn band_unchecked(
    f: &ScalarField,
    target: &GraphTarget,
    delta: &ScalarField,
    eps: &ScalarField,
    opts: &ApproxOptions,
) -> Result<BandApprox> {
    let n = target.dim();
    for d in [f.dim(), delta.dim(), eps.dim()] {
        check_dim(n, d)?;
    }
    opts.check_region(n)?;
    let m = n - 1;
    let sub_region = super::lipschitz::projected_region(&opts.region, target);
    let (to_local, to_ambient) = match &target.rotation {
        Some(r) => (r.inverse_fields(), Some(r.forward_fields())),
        None => (ScalarField::coords(n), None),
    };
    // Everything below lives in the local coordinates u.
    let f_loc = f.compose(&to_local)?;
    let delta_loc = delta.compose(&to_local)?;
    let eps_loc = eps.compose(&to_local)?;
    let ut = ScalarField::coords(m);
    let on_sub = |h: &ScalarField, un: ScalarField| -> Result<ScalarField> {
        let mut args = ut.clone();
        args.push(un);
        h.compose(&args)
    };
    let xi_m = if m == 0 { target.xi.field.clone() } else { target.xi.field.compose(&ut)? };
    let center = if xi_m.is_nash() {
        xi_m
    } else {
        let half = on_sub(&delta_loc, xi_m.clone())? * 0.5;
        smooth_center(&target.xi, &half, &sub_region, opts)?
    };
    let width = on_sub(&delta_loc, center.clone())?;
    let lam0 = on_sub(&f_loc, center.clone())?;
    let lam1 = (on_sub(&f_loc, &center + &width)? - &lam0) / &width;
    let tol = on_sub(&eps_loc, center.clone())? * &width * 0.25;
    let mu0 = reduce(&lam0, &tol, &sub_region, opts)?;
    let mu1 = reduce(&lam1, &tol, &sub_region, opts)?;
    let lift = |h: &ScalarField| if m == 0 { h.lift(n, &[]) } else { h.lift(n, &(0..m).collect::<Vec<_>>()) };
    let un = ScalarField::coord(n, m);
    let g_loc = lift(&mu0) + (un - lift(&center)) * lift(&mu1);
    let g = match &to_ambient {
        Some(fw) => g_loc.compose(fw)?,
        None => g_loc,
    };
    let center_amb = lift(&center);
    let width_amb = lift(&width);
    let (center_amb, width_amb) = match &to_ambient {
        Some(fw) => (center_amb.compose(fw)?, width_amb.compose(fw)?),
        None => (center_amb, width_amb),
    };
    let offset = match &to_ambient {
        Some(fw) => fw[m].clone(),
        None => ScalarField::coord(n, m),
    };
    let in_band = |p: &[f64]| -> Result<Tri> {
        let v = (offset.eval(p)? - center_amb.eval(p)?).abs();
        Ok(Tri::from_bool(v <= width_amb.eval(p)?))
    };
    let grid = opts.grid();
    let c0 = certify(Claim::lt("|g − f|", "δ·ε", "band"), &grid, Slack::Local, "C¹ band: values within δε", |p| {
        Ok(match in_band(p)? {
            Tri::True => Sample::value((g.eval(p)? - f.eval(p)?).abs() - delta.eval(p)? * eps.eval(p)?),
            _ => Sample::Outside,
        })
    })?;
    let c1 = certify(Claim::lt("|dg − df|", "ε", "band"), &grid, Slack::Local, "C¹ band: slopes within ε", |p| {
        Ok(match in_band(p)? {
            Tri::True => {
                let a = g.eval_with_gradient(p)?;
                let b = f.eval_with_gradient(p)?;
                let d: Vec<f64> = a.gradient.iter().zip(&b.gradient).map(|(x, y)| x - y).collect();
                Sample::value(norm(&d) - eps.eval(p)?)
            }
            _ => Sample::Outside,
        })
    })?;
    Ok(BandApprox { g, center: center_amb, certificates: vec![c0, c1] })
}

/// Lipschitz approximation of a one-variable graph function within `tol`.
fn smooth_center(xi: &Bounding, tol: &ScalarField, region: &AxisBox, opts: &ApproxOptions) -> Result<ScalarField> {
    if xi.field.dim() != 1 {
        return Err(Error::Degenerate("non-Nash graphs are only smoothed over one variable".into()));
    }
    let f = xi.field.clone().with_lip_bound(xi.lip);
    let strat = Stratification::auto_1d(&f, region, opts.spacing)?;
    let sub = opts.on(region.clone()).with_j_min(1);
    Ok(lipschitz_approx(&strat, tol, &sub)?.g)
}

/// C¹ approximation of `h` within `tol` in `|·|₁` one dimension down: exact
/// when `h` specializes to a Nash field on the region, recursive otherwise.
fn reduce(h: &ScalarField, tol: &ScalarField, region: &AxisBox, opts: &ApproxOptions) -> Result<ScalarField> {
    let samples = SampleGrid::new(region.clone(), opts.spacing).points();
    if let Some(s) = h.specialize(&samples)?.filter(ScalarField::is_nash) {
        return Ok(s);
    }
    if h.dim() != 1 {
        return Err(Error::Degenerate(format!(
            "a band coefficient in dimension {} is not smooth; split the stratification further",
            h.dim()
        )));
    }
    let strat = Stratification::auto_1d(h, region, opts.spacing)?;
    let sub = opts.on(region.clone()).with_j_min(1);
    // |·|₁ splits into a value and a slope part, each certified below aε.
    let r = c1_approx(&strat, &(tol * (0.5 / C1_SLACK)), &sub)?;
    Ok(r.g)
}

/// Global C¹ approximation of `strat.target` on the box, certifying
/// `|g − f| < aε` and `|dg − df| < aε` with `a =` [`C1_SLACK`].
///
/// Graph bumps use radii `(b·rδ_j, rδ_j)` and cell bumps `(b·c·rδ_j, b·rδ_j)`,
/// where the constant `r ≤ 1` is halved once, up front, until the bands of
/// half-width `2(1+L)·rδ_1` fit under the gauge of `df`.
pub fn c1_approx(strat: &Stratification, eps: &ScalarField, opts: &ApproxOptions) -> Result<ApproximationResult> {
    let n = strat.dim();
    check_dim(n, eps.dim())?;
    opts.check_region(n)?;
    opts.check_tolerance(eps)?;
    let f = &strat.target;
    let grid = opts.grid();
    if f.is_nash() {
        let (c0, c1, a) = c1_certificates(f, f, eps, &grid)?;
        return Ok(ApproximationResult {
            tape_len: f.tape_len()?,
            g: f.clone(),
            j_used: 1,
            certificates: vec![c0, c1],
            lip_bound_g: None,
            measured_lip: None,
            a_measured: Some(a),
            sup_error: 0.0,
            glued: 1,
        });
    }
    let mut strat = strat.clone();
    strat.validate(&grid)?;
    let (open, graphs) = strat.glued()?;
    let lip = open
        .iter()
        .map(|s| s.cell.lip())
        .chain(graphs.iter().map(|t| t.xi.lip))
        .fold(1.0f64, f64::max);
    let b = sandwich_constants(lip)?.c;
    let glued = open.len() + graphs.len();

    let mut r = 1.0;
    if !graphs.is_empty() {
        let gauge = band_gauge(f, eps, &opts.region, opts.spacing)?;
        let widest = opts.delta(1) * (2.0 * (1.0 + lip));
        let mut tries = 0;
        while let Err(e) = check_gauge(&(&widest * r), &gauge, &opts.region, opts.spacing) {
            tries += 1;
            if tries > 40 {
                return Err(e);
            }
            r /= 2.0;
        }
    }

    let mut last = String::from("no j tried");
    for j in opts.schedule() {
        let delta = opts.delta(j) * r;
        let mut locals = Vec::with_capacity(glued);
        let mut local_certs = Vec::new();
        for t in &graphs {
            let band = band_unchecked(f, t, &(&delta * (2.0 * (1.0 + lip))), eps, opts)?;
            locals.push(band.g);
            local_certs.extend(band.certificates);
        }
        for st in &open {
            let local_f = st.local_f.as_ref().expect("validated");
            let eta = &delta * (b * b);
            let oc = approx_on_open_cell(local_f, &st.cell, &(eps * &delta), &eta, opts)?;
            locals.push(oc.g);
            local_certs.push(oc.certificate);
        }
        if let Some(c) = local_certs.iter().find(|c| !c.passed()) {
            last = format!("j = {j}: {} failed (bound {:e})", c.provenance, c.bound());
            continue;
        }
        let mu = mu_c1(f, &locals, &(eps * &delta), &opts.coarse_grid())?;
        let mut lambdas = Vec::with_capacity(glued);
        for t in &graphs {
            lambdas.push(graph_bump(t, &delta, mu, lip, &opts.region)?.lambda);
        }
        for st in &open {
            lambdas.push(cell_bump(&st.cell, &(&delta * b), mu, lip, &opts.region)?.lambda);
        }
        let partition = normalized_partition(&lambdas, &grid)?;
        let weighted: Vec<ScalarField> = lambdas.iter().zip(&locals).map(|(l, g)| l * g).collect();
        let g = if glued == 1 { locals[0].clone() } else { ScalarField::sum(&weighted) / &partition.sum };

        let coarse = measured_a(f, &g, eps, &opts.coarse_grid())?;
        if coarse >= C1_SLACK {
            last = format!("j = {j}: coarse a = {coarse:.3}");
            continue;
        }
        // The bands can be narrower than the lattice; sample across them too.
        let across = transect_a(f, &g, eps, &graphs, &(&delta * (2.0 * (1.0 + lip))), opts)?;
        if across >= C1_SLACK {
            last = format!("j = {j}: a = {across:.3} across the bands");
            continue;
        }
        let (c0, c1, a) = c1_certificates(f, &g, eps, &grid)?;
        let a = a.max(across);
        if !(c0.passed() && c1.passed()) {
            last = format!("j = {j}: a = {a:.3}");
            continue;
        }
        let sup = super::lipschitz::sup_error(f, &g, &grid)?;
        let identity = partition_identity(&partition, &lambdas, &grid)?;
        let mut certificates = vec![partition.cover, c0, c1];
        certificates.extend(identity);
        certificates.extend(local_certs);
        return Ok(ApproximationResult {
            tape_len: g.tape_len()?,
            g,
            j_used: j,
            certificates,
            lip_bound_g: None,
            measured_lip: None,
            a_measured: Some(a),
            sup_error: sup,
            glued,
        });
    }
    Err(Error::NoConvergence(format!("C¹ approximation up to j = {}: {last}", opts.j_max)))
}

/// `μ_j`: half the grid minimum of `δ_j·ε/(1 + |f|₁ + |g_S|₁)`.
fn mu_c1(f: &ScalarField, locals: &[ScalarField], scale: &ScalarField, grid: &SampleGrid) -> Result<f64> {
    let vals = grid.map(|p| -> Result<f64> {
        let fv = f.eval_with_gradient(p)?;
        let mut worst = 0.0f64;
        for g in locals {
            let v = g.eval_with_gradient(p)?;
            worst = worst.max(v.value.abs() + v.grad_norm());
        }
        Ok(scale.eval(p)? / (1.0 + fv.value.abs() + fv.grad_norm() + worst))
    });
    let mut m = f64::INFINITY;
    for v in vals.into_iter().flatten() {
        m = m.min(v?);
    }
    if !(m > 0.0) {
        return Err(Error::Degenerate("μ_j vanished on the grid".into()));
    }
    Ok((0.5 * m).min(0.5))
}

fn measured_a(f: &ScalarField, g: &ScalarField, eps: &ScalarField, grid: &SampleGrid) -> Result<f64> {
    let mut a = 0.0f64;
    for v in grid.map(|p| -> Result<f64> {
        let x = f.eval_with_gradient(p)?;
        let y = g.eval_with_gradient(p)?;
        let d: Vec<f64> = x.gradient.iter().zip(&y.gradient).map(|(s, t)| s - t).collect();
        Ok((x.value - y.value).abs().max(norm(&d)) / eps.eval(p)?)
    }) {
        if let Some(v) = v {
            a = a.max(v?);
        }
    }
    Ok(a)
}

// Points per unit length along a graph, and per band across it.
const TRANSECT_ALONG: f64 = 25.0;
const TRANSECT_ACROSS: usize = 241;

/// `max(|g − f|, |dg − df|)/ε` on segments normal to each graph, spanning three
/// band half-widths on either side.
fn transect_a(
    f: &ScalarField,
    g: &ScalarField,
    eps: &ScalarField,
    graphs: &[GraphTarget],
    width: &ScalarField,
    opts: &ApproxOptions,
) -> Result<f64> {
    let mut a = 0.0f64;
    for t in graphs {
        let n = t.dim();
        let m = n - 1;
        let sub = super::lipschitz::projected_region(&opts.region, t);
        let along = if m == 0 { 1.0 } else { 1.0 / TRANSECT_ALONG };
        let base = SampleGrid::new(sub, along.max(opts.spacing)).points();
        let mut pts = Vec::new();
        for ut in &base {
            let xi = t.xi.field.eval(ut)?;
            let mut u = ut.clone();
            u.push(xi);
            let x = match &t.rotation {
                Some(r) => r.apply_inverse(&u),
                None => u.clone(),
            };
            let w = 3.0 * width.eval(&x)?;
            for k in 0..TRANSECT_ACROSS {
                let s = -w + 2.0 * w * k as f64 / (TRANSECT_ACROSS - 1) as f64;
                let mut v = u.clone();
                v[m] += s;
                let y = match &t.rotation {
                    Some(r) => r.apply_inverse(&v),
                    None => v,
                };
                if opts.region.contains(&y, 0.0) {
                    pts.push(y);
                }
            }
        }
        for p in &pts {
            let x = f.eval_with_gradient(p)?;
            let y = g.eval_with_gradient(p)?;
            let d: Vec<f64> = x.gradient.iter().zip(&y.gradient).map(|(s, t)| s - t).collect();
            a = a.max((x.value - y.value).abs().max(norm(&d)) / eps.eval(p)?);
        }
    }
    Ok(a)
}

fn c1_certificates(
    f: &ScalarField,
    g: &ScalarField,
    eps: &ScalarField,
    grid: &SampleGrid,
) -> Result<(Certificate, Certificate, f64)> {
    let rhs = format!("{C1_SLACK}·ε");
    let c0 = certify(Claim::lt("|g − f|", rhs.clone(), "box"), grid, Slack::Local, "C¹ approximation: values within aε", |p| {
        Ok(Sample::value((g.eval(p)? - f.eval(p)?).abs() - C1_SLACK * eps.eval(p)?))
    })?;
    let c1 = certify(Claim::lt("|dg − df|", rhs, "box"), grid, Slack::Local, "C¹ approximation: slopes within aε", |p| {
        let a = g.eval_with_gradient(p)?;
        let b = f.eval_with_gradient(p)?;
        let d: Vec<f64> = a.gradient.iter().zip(&b.gradient).map(|(x, y)| x - y).collect();
        Ok(Sample::value(norm(&d) - C1_SLACK * eps.eval(p)?))
    })?;
    let a = measured_a(f, g, eps, grid)?;
    Ok((c0, c1, a))
}

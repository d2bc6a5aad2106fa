//! Pipelines behind `smoother run`.

use serde_json::{json, Value};
use smoother::approx::{c1_approx, lipschitz_approx, ApproximationResult, Stratification, StratumClass};
use smoother::cells::LipschitzCell;
use smoother::certify::{Certificate, SampleGrid};
use smoother::embed::{manifold_valued_approx, reciprocal_graph_embedding, soft_min_distance, Target};
use smoother::fields::{AxisBox, ScalarField, SmoothClass};
use smoother::gadgets::{gadget_certificates, Gadgets, CHECK_DELTAS, CHECK_MUS, CHECK_SPAN};
use smoother::glue::{certify_cell_bump, certify_graph_bump, cell_bump, graph_bump, normalized_partition, partition_identity};
use smoother::{Error, Result};

use crate::scenario::{Pipeline, Prepared};

/// Rows of a CSV file, header first.
#[derive(Debug, Default)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    fn new(header: Vec<String>) -> Table {
        Table { header, rows: Vec::new() }
    }
}

/// What a run produced.
pub struct Outcome {
    pub certificates: Vec<Certificate>,
    pub result: Value,
    pub errors: Table,
    pub plot: Table,
    /// Checks that are not grid certificates but still fail the run.
    pub failures: Vec<String>,
}

impl Outcome {
    fn new(certificates: Vec<Certificate>, result: Value, errors: Table, plot: Table) -> Outcome {
        Outcome { certificates, result, errors, plot, failures: Vec::new() }
    }

    pub fn passed(&self) -> bool {
        self.failures.is_empty() && self.certificates.iter().all(Certificate::passed)
    }
}

pub fn run(p: &Prepared) -> Result<Outcome> {
    match p.scenario.pipeline {
        Pipeline::GadgetCheck => gadget_check(p),
        Pipeline::BumpCheck => bump_check(p),
        Pipeline::ApproxLip | Pipeline::ApproxC1 => approx(p),
        Pipeline::EmbedDemo => embed_demo(p),
    }
}

fn coord_names(n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("x{i}")).collect()
}

fn errors_header(n: usize) -> Vec<String> {
    let mut h = coord_names(n);
    h.extend(["f", "g", "|f-g|", "|df-dg|"].map(String::from));
    h
}

fn plot_header(n: usize) -> Vec<String> {
    let mut h = vec!["slice".to_string()];
    h.extend(coord_names(n));
    h.extend(["f", "g"].map(String::from));
    h
}

fn num(v: f64) -> String {
    format!("{v:e}")
}

fn gadget_check(p: &Prepared) -> Result<Outcome> {
    let g = Gadgets::standard();
    let certificates = gadget_certificates(g, p.scenario.grid_spacing)?;
    let mut plot = Table::new(vec!["slice".into(), "y".into(), "f".into(), "g".into()]);
    let steps = (2.0 * CHECK_SPAN / p.scenario.grid_spacing.max(1e-2)).round() as usize;
    let ys: Vec<f64> = (0..=steps).map(|i| -CHECK_SPAN + 2.0 * CHECK_SPAN * i as f64 / steps as f64).collect();
    let mut series = |name: String, f: &ScalarField, head: Vec<f64>| -> Result<()> {
        for &y in &ys {
            let mut q = head.clone();
            q.push(y);
            plot.rows.push(vec![name.clone(), num(y), String::new(), num(f.eval(&q)?)]);
        }
        Ok(())
    };
    for &d in &CHECK_DELTAS {
        for &mu in &CHECK_MUS {
            series(format!("psi mu={mu} delta={d}"), g.psi(), vec![mu, d])?;
        }
        series(format!("phi delta={d}"), g.phi(), vec![d])?;
        series(format!("psi_unit delta={d}"), g.psi_unit(), vec![d])?;
    }
    let result = json!({ "calibration": g.cal });
    Ok(Outcome::new(certificates, result, Table::new(errors_header(1)), plot))
}

fn bump_check(p: &Prepared) -> Result<Outcome> {
    let params = p.scenario.bump.as_ref().expect("prepared");
    let delta = params.delta.build()?;
    let strat = p.strat.as_ref().expect("prepared");
    let lip = params.lip.unwrap_or_else(|| strat.strata.iter().map(|s| s.cell.lip()).fold(1.0, f64::max));
    let region = &p.scenario.region;
    let grid = p.opts.grid();
    let mut certificates = Vec::new();
    let mut bumps = Vec::new();
    let mut lambdas = Vec::new();
    for s in &strat.strata {
        let b = match s.class {
            StratumClass::Graph => {
                let t = s.cell.graph_target().expect("graph stratum");
                let b = graph_bump(&t, &delta, params.mu, lip, region)?;
                certificates.extend(certify_graph_bump(&b, &t, &delta, &grid)?);
                b
            }
            StratumClass::Open => {
                let b = cell_bump(&s.cell, &delta, params.mu, lip, region)?;
                certificates.extend(certify_cell_bump(&b, &s.cell, &delta, &grid)?);
                b
            }
            StratumClass::Lower => continue,
        };
        lambdas.push(b.lambda.clone());
        bumps.push(b);
    }
    if lambdas.is_empty() {
        return Err(Error::Degenerate("no open or graph stratum to build a bump for".into()));
    }
    // The partition needs the bumps to cover the box; a family that does not is reported, not failed.
    let partition = match normalized_partition(&lambdas, &grid) {
        Ok(part) => {
            certificates.push(part.cover.clone());
            certificates.extend(partition_identity(&part, &lambdas, &grid)?);
            json!({ "covered": true })
        }
        Err(Error::Cover(why)) => json!({ "covered": false, "reason": why }),
        Err(e) => return Err(e),
    };
    let n = p.scenario.dimension;
    let mut plot = Table::new({
        let mut h = plot_header(n);
        h.truncate(n + 1);
        h.extend(lambdas.iter().enumerate().map(|(i, _)| format!("lambda{i}")));
        h
    });
    for (name, q) in slices(region, p.scenario.grid_spacing) {
        let mut row = vec![name];
        row.extend(q.iter().map(|v| num(*v)));
        for l in &lambdas {
            row.push(num(l.eval(&q)?));
        }
        plot.rows.push(row);
    }
    let result = json!({ "bumps": bumps, "lip": lip, "partition": partition });
    Ok(Outcome::new(certificates, result, Table::new(errors_header(n)), plot))
}

fn approx(p: &Prepared) -> Result<Outcome> {
    let strat = p.strat.as_ref().expect("prepared");
    let eps = p.eps.as_ref().expect("prepared");
    let r: ApproximationResult = match p.scenario.pipeline {
        Pipeline::ApproxLip => lipschitz_approx(strat, eps, &p.opts)?,
        _ => c1_approx(strat, eps, &p.opts)?,
    };
    let f = &strat.target;
    let errors = error_table(&[f], &[&r.g], &p.opts.grid())?;
    let plot = plot_table(f, &r.g, &p.scenario.region, p.scenario.grid_spacing)?;
    let result = json!({
        "j_used": r.j_used,
        "a_measured": r.a_measured,
        "L_out": r.lip_bound_g,
        "measured_lip": r.measured_lip,
        "sup_error": r.sup_error,
        "glued": r.glued,
        "tape_len": r.tape_len,
    });
    Ok(Outcome::new(r.certificates, result, errors, plot))
}

/// Reciprocal graph embedding of the open box, and, with a target `s`, the
/// circle-valued map `x ↦ R(s(x))` through the rational parametrization
/// `R(s) = ((1 − s²)/(1 + s²), 2s/(1 + s²))`.
fn embed_demo(p: &Prepared) -> Result<Outcome> {
    let n = p.scenario.dimension;
    let omega_box = &p.scenario.embed.as_ref().expect("prepared").omega;
    let omega = LipschitzCell::open_box(omega_box);
    let mut faces = Vec::with_capacity(2 * n);
    for k in 0..n {
        let x = ScalarField::coord(n, k);
        faces.push(&x - omega_box.lo[k]);
        faces.push(-x + omega_box.hi[k]);
    }
    let rho = soft_min_distance(&faces, 4)?;
    let grid = p.opts.grid();
    let emb = reciprocal_graph_embedding(&omega, &rho, &grid)?;
    let mut certificates = emb.certificates.clone();
    let mut failures = Vec::new();
    if !emb.monotone {
        failures.push("heights are not increasing along every frontier sequence".to_string());
    }
    if emb.bijectivity_failures > 0 {
        failures.push(format!("projection is not a bijection at {} samples", emb.bijectivity_failures));
    }
    let mut result = json!({ "embedding": emb });
    let mut errors = Table::new(errors_header(n));
    let mut plot = Table::new(plot_header(n));
    for (name, q) in slices(&p.scenario.region, p.scenario.grid_spacing) {
        if !omega.contains(&q)? {
            continue;
        }
        let mut row = vec![format!("height {name}")];
        row.extend(q.iter().map(|v| num(*v)));
        row.extend([num(rho.eval(&q)?), num(emb.manifold.height().eval(&q)?)]);
        plot.rows.push(row);
    }
    if let Some(s) = &p.target {
        let eps = p.eps.as_ref().expect("prepared");
        let unit = |src: &str| -> Result<ScalarField> {
            let c = ScalarField::parse(1, src)?.compose(std::slice::from_ref(s))?;
            Ok(if c.is_nash() { c } else { c.with_class(SmoothClass::C1) })
        };
        let comps = [unit("(1 - x^2)/(1 + x^2)")?, unit("2*x/(1 + x^2)")?];
        let strata = comps.iter().map(|c| component_strata(p, c)).collect::<Result<Vec<_>>>()?;
        let m = manifold_valued_approx(&strata, &Target::Sphere { ambient: 2 }, eps, &p.opts)?;
        certificates.extend(m.certificates.iter().cloned());
        errors = error_table(&comps.iter().collect::<Vec<_>>(), &m.g.iter().collect::<Vec<_>>(), &grid)?;
        for (name, q) in slices(&p.scenario.region, p.scenario.grid_spacing) {
            for (i, (c, g)) in comps.iter().zip(&m.g).enumerate() {
                let mut row = vec![format!("circle{} {name}", i + 1)];
                row.extend(q.iter().map(|v| num(*v)));
                row.extend([num(c.eval(&q)?), num(g.eval(&q)?)]);
                plot.rows.push(row);
            }
        }
        result["circle"] = json!(m);
    }
    Ok(Outcome { certificates, result, errors, plot, failures })
}

fn component_strata(p: &Prepared, c: &ScalarField) -> Result<Stratification> {
    let mut s = match &p.scenario.stratification {
        Some(j) => j.build(c.clone())?,
        None if p.scenario.dimension == 1 => Stratification::auto_1d(c, &p.scenario.region, p.scenario.grid_spacing)?,
        None => return Err(Error::Domain("a stratification is required above dimension 1".into())),
    };
    s.validate(&p.opts.grid())?;
    Ok(s)
}

// Values and slopes are computed the way the certificates compute them, so
// the column maxima reproduce their `measured_max` exactly. For maps into ℝᵏ
// f and g are the first components and the errors are norms over all of them.
fn error_table(f: &[&ScalarField], g: &[&ScalarField], grid: &SampleGrid) -> Result<Table> {
    error_rows(grid, |p| {
        let (mut d0, mut d1) = (0.0, 0.0);
        let mut first = None;
        for (fi, gi) in f.iter().zip(g) {
            let (a, b) = (fi.eval(p)?, gi.eval(p)?);
            let da = fi.eval_with_gradient(p)?.gradient;
            let db = gi.eval_with_gradient(p)?.gradient;
            d0 += (b - a) * (b - a);
            d1 += db.iter().zip(&da).map(|(u, v)| (u - v) * (u - v)).sum::<f64>();
            first.get_or_insert((a, b));
        }
        let (a, b) = first.expect("at least one component");
        // one component: plain |g − f| rather than a rounded square root
        let d0 = if f.len() == 1 { (b - a).abs() } else { d0.sqrt() };
        Ok([a, b, d0, d1.sqrt()])
    })
}

fn error_rows(grid: &SampleGrid, row: impl Fn(&[f64]) -> Result<[f64; 4]> + Sync) -> Result<Table> {
    let mut t = Table::new(errors_header(grid.dim()));
    let points = grid.points();
    for (q, r) in points.iter().zip(grid.map(|p| row(p))) {
        let Some(r) = r else { continue };
        let mut cells: Vec<String> = q.iter().map(|v| num(*v)).collect();
        cells.extend(r?.iter().map(|v| num(*v)));
        t.rows.push(cells);
    }
    Ok(t)
}

fn plot_table(f: &ScalarField, g: &ScalarField, region: &AxisBox, spacing: f64) -> Result<Table> {
    let mut t = Table::new(plot_header(region.dim()));
    for (name, q) in slices(region, spacing) {
        let mut row = vec![name];
        row.extend(q.iter().map(|v| num(*v)));
        row.extend([num(f.eval(&q)?), num(g.eval(&q)?)]);
        t.rows.push(row);
    }
    Ok(t)
}

/// Axis lines through the centre of the box, plus the main diagonal above
/// dimension 1, sampled at `spacing`.
fn slices(region: &AxisBox, spacing: f64) -> Vec<(String, Vec<f64>)> {
    let n = region.dim();
    let mid: Vec<f64> = (0..n).map(|k| 0.5 * (region.lo[k] + region.hi[k])).collect();
    let mut out = Vec::new();
    for k in 0..n {
        let steps = ((region.hi[k] - region.lo[k]) / spacing).round().max(1.0) as usize;
        for i in 0..=steps {
            let mut q = mid.clone();
            q[k] = region.lo[k] + (region.hi[k] - region.lo[k]) * i as f64 / steps as f64;
            out.push((if n == 1 { "line".to_string() } else { format!("axis{}", k + 1) }, q));
        }
    }
    if n > 1 {
        let len = (0..n).map(|k| (region.hi[k] - region.lo[k]).powi(2)).sum::<f64>().sqrt();
        let steps = (len / spacing).round().max(1.0) as usize;
        for i in 0..=steps {
            let t = i as f64 / steps as f64;
            out.push(("diagonal".to_string(), (0..n).map(|k| region.lo[k] + (region.hi[k] - region.lo[k]) * t).collect()));
        }
    }
    out
}

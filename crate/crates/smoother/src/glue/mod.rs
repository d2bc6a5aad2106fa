//! Bump fields over halfspaces, graphs and open cells, and the normalized
//! partition built from them.
//!
//! Every bump is a product of halfspace factors
//! `ψ(μ′, α(x̃)/2, ±(x_n − ζ(x̃)))` with the ψ gadget, composed with the range
//! clamp `h(t) = 3t/√(1+t²)`. A graph bump uses one factor on each side of the
//! sandwich band `|u_n − ξ| ≤ κσ`; a cell bump uses one factor per finite
//! band bound. The constants `N`, `b`, `c` come from closed formulas in the
//! gadget constant `A` and the Lipschitz constant `L` alone, so they do not
//! change with `μ` or `δ`. Only `μ′` depends on them.

use serde::Serialize;

use crate::cells::{rotate_field, sandwich_constants, Bounding, GraphTarget, LipschitzCell, Rotation};
use crate::certify::{certify, pointwise, Certificate, Claim, Sample, SampleGrid, Slack, Tri};
use crate::error::{check_dim, Error, Result};
use crate::fields::{AxisBox, ScalarField};
use crate::gadgets::Gadgets;


#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BumpKind {
    Halfspace,
    Graph,
    Cell,
}

/// A bump field with its constants and the inputs it was built from.
#[derive(Debug, Clone, Serialize)]
pub struct BumpResult {
    #[serde(skip)]
    pub lambda: ScalarField,
    pub kind: BumpKind,
    /// Derivative constant: `|dλ| < N` on the inner set, `|dλ| < N/δ` on the box.
    #[serde(rename = "N")]
    pub n_const: f64,
    /// `b` for graphs, `c` for cells; `None` for halfspace bumps.
    pub b_or_c: Option<f64>,
    pub mu: f64,
    /// The constant smoothing level handed to every ψ factor.
    pub mu_prime: f64,
    pub lip: f64,
    pub factors: usize,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub certificates: Vec<Certificate>,
}

/// `h(t) = 3t/√(1+t²)`: analytic, increasing, `[0, ∞) → [0, 3)`, `h(t) ≥ t`
/// for `0 ≤ t ≤ √8` and `|h′| ≤ 3`. Works for any input, so no bound is needed.
pub fn clamp_to_range(field: &ScalarField) -> ScalarField {
    let one = ScalarField::constant(field.dim(), 1.0);
    field * 3.0 / (one + field * field).sqrt()
}

/// Scalar form of [`clamp_to_range`].
pub fn clamp_value(t: f64) -> f64 {
    3.0 * t / (1.0 + t * t).sqrt()
}

/// Normalized partition `θ_S = λ_S/Σλ` with its cover certificate.
#[derive(Debug, Clone)]
pub struct Partition {
    pub thetas: Vec<ScalarField>,
    pub sum: ScalarField,
    pub cover: Certificate,
}

/// Build `θ_S = λ_S/Σ_T λ_T`, certifying `Σλ > 1` on the grid first.
pub fn normalized_partition(lambdas: &[ScalarField], grid: &SampleGrid) -> Result<Partition> {
    if lambdas.is_empty() {
        return Err(Error::Degenerate("partition of an empty family".into()));
    }
    let sum = if lambdas.len() == 1 { lambdas[0].clone() } else { ScalarField::sum(lambdas) };
    let claim = Claim::lt("1", "Σ_S λ_S", "box");
    let cover = certify(claim, grid, Slack::Local, "partition: the bumps cover the box", |p| {
        let d = sum.eval_with_gradient(p)?;
        Ok(Sample::with_slope(1.0 - d.value, d.grad_norm()))
    })?;
    if !cover.passed() {
        return Err(Error::Cover(format!(
            "Σλ ≤ 1 near {:?} (bound {:e})",
            cover.worst_point.clone().unwrap_or_default(),
            cover.bound()
        )));
    }
    let thetas = lambdas.iter().map(|l| l / &sum).collect();
    Ok(Partition { thetas, sum, cover })
}

/// Tolerance for `|Σθ − 1|` at grid points.
pub const PARTITION_TOL: f64 = 1e-12;

/// Grid checks of the partition identities `Σθ_S = 1` (to
/// [`PARTITION_TOL`]) and `θ_S ≤ λ_S`, evaluated on the θ fields themselves.
pub fn partition_identity(partition: &Partition, lambdas: &[ScalarField], grid: &SampleGrid) -> Result<Vec<Certificate>> {
    if lambdas.len() != partition.thetas.len() {
        return Err(Error::Dimension { expected: partition.thetas.len(), got: lambdas.len() });
    }
    let total = ScalarField::sum(&partition.thetas);
    let excess = partition
        .thetas
        .iter()
        .zip(lambdas)
        .map(|(t, l)| t - l)
        .reduce(|a, b| a.max(&b))
        .ok_or_else(|| Error::Degenerate("partition of an empty family".into()))?;
    let sum = pointwise(Claim::lt("|Σθ − 1|", "1e-12", "grid points"), grid, "partition: the θ sum to one", |p| {
        Ok((total.eval(p)? - 1.0).abs() - PARTITION_TOL)
    })?;
    let below = pointwise(Claim::le("max_S (θ_S − λ_S)", "0", "grid points"), grid, "partition: each θ stays below its λ", |p| {
        excess.eval(p)
    })?;
    Ok(vec![sum, below])
}

// One factor `ψ(μ′, α/2, s·(u_axis − ζ))` in local coordinates; `s = +1`
// puts the inside below `ζ`.
struct Factor {
    axis: usize,
    zeta: ScalarField,
    alpha: ScalarField,
    inside_below: bool,
}

impl Factor {
    fn field(&self, mu_prime: f64) -> Result<ScalarField> {
        let n = self.zeta.dim();
        let u = ScalarField::coord(n, self.axis);
        let y = if self.inside_below { u - &self.zeta } else { &self.zeta - u };
        let args = [ScalarField::constant(n, mu_prime), &self.alpha * 0.5, y];
        Gadgets::standard().psi().compose(&args)
    }
}

/// Lipschitz constants of `α = κσ/2` and of `ζ = ξ ± (7/8)κσ` when `σ` is
/// `δ` read along a graph and both are `L`-Lipschitz.
fn band_slopes(kappa: f64, lip: f64) -> (f64, f64) {
    let l_alpha = kappa * lip * (1.0 + lip) / 2.0;
    (l_alpha, lip + 1.75 * l_alpha)
}

/// `N_f = 4A(1 + L_α/2 + L_ζ)`: one factor has `|dλ| ≤ N_f/4` where its `y ≤ 0`
/// and `|dλ| ≤ N_f/(2α)` where `y ≥ 0`.
fn factor_constant(l_alpha: f64, l_zeta: f64) -> f64 {
    4.0 * Gadgets::standard().cal.a_psi * (1.0 + l_alpha / 2.0 + l_zeta)
}

fn check_mu(mu: f64) -> Result<()> {
    if mu > 0.0 && mu < 1.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("μ = {mu} must lie in (0, 1)")))
    }
}

fn require_nash(f: &ScalarField, what: &str) -> Result<()> {
    if f.is_nash() {
        Ok(())
    } else {
        Err(Error::Degenerate(format!("{what} must be Nash; smooth it with approx::nash_bound first")))
    }
}

// Lower bound of a positive field over the box: grid minimum minus a
// Lipschitz margin, never below half the grid minimum.
fn lower_bound_on(f: &ScalarField, lip: f64, region: &AxisBox) -> Result<f64> {
    let n = region.dim();
    let steps = match n {
        0 | 1 => 400.0,
        2 => 60.0,
        _ => 16.0,
    };
    let h = (0..n).map(|k| region.hi[k] - region.lo[k]).fold(0.0, f64::max) / steps;
    let grid = SampleGrid::new(region.clone(), h.max(1e-9));
    let mut m = f64::INFINITY;
    for v in grid.map(|p| f.eval(p)).into_iter().flatten() {
        m = m.min(v?);
    }
    if !(m > 0.0) {
        return Err(Error::Domain(format!("radius field is not positive on the box (min {m})")));
    }
    Ok((m - lip * h * (n as f64).sqrt() / 2.0).max(m / 2.0))
}

// Assemble the clamped product of `factors`, returning (λ, μ′).
fn assemble(
    factors: &[Factor],
    n: usize,
    mu: f64,
    nf: f64,
    slope_sum: f64,
    alpha_min: f64,
    rotation: Option<&Rotation>,
) -> Result<(ScalarField, f64)> {
    let m = factors.len();
    if m == 0 {
        return Ok((ScalarField::constant(n, 2.0), mu));
    }
    let spread = 2.0 + (m as f64 - 1.0) * nf / (3.0 * alpha_min);
    let mu_f = 0.99 * mu / (3f64.powi(m as i32) * spread);
    let mu_prime = mu_f / slope_sum;
    let fields = factors.iter().map(|f| f.field(mu_prime)).collect::<Result<Vec<_>>>()?;
    let product = if m == 1 { fields[0].clone() } else { ScalarField::product(&fields) };
    let lambda = clamp_to_range(&product);
    Ok((rotate_field(&lambda, rotation)?, mu_prime))
}

/// Bump for the region below a graph: `λ > 1` on `x_n ≤ ξ`, `|λ|₁ < μ` on
/// `x_n ≥ ξ + α`, `|dλ| < N` on `x_n ≤ ξ` and `|dλ| < N/α` on `x_n ≥ ξ`.
///
/// `ξ` and `α` must be Nash; then `ζ = ξ + α/4` and `α′ = α` need no further
/// approximation. The factor is not clamped since ψ already maps into `[0, 3)`.
pub fn halfspace_bump(xi: &Bounding, alpha: &Bounding, mu: f64) -> Result<BumpResult> {
    check_mu(mu)?;
    check_dim(xi.field.dim(), alpha.field.dim())?;
    require_nash(&xi.field, "ξ")?;
    require_nash(&alpha.field, "α")?;
    let m = xi.field.dim();
    let n = m + 1;
    let coords: Vec<usize> = (0..m).collect();
    let a = alpha.field.lift(n, &coords);
    let zeta = xi.field.lift(n, &coords) + &a * 0.25;
    let (l_alpha, l_zeta) = (alpha.lip, xi.lip + alpha.lip / 4.0);
    let slope_sum = 2.0 + l_alpha / 2.0 + l_zeta;
    let mu_prime = 0.99 * mu / slope_sum;
    let f = Factor { axis: m, zeta, alpha: a, inside_below: true };
    Ok(BumpResult {
        lambda: f.field(mu_prime)?,
        kind: BumpKind::Halfspace,
        n_const: factor_constant(l_alpha, l_zeta),
        b_or_c: None,
        mu,
        mu_prime,
        lip: xi.lip.max(alpha.lip),
        factors: 1,
        certificates: Vec::new(),
    })
}

/// Bump around a graph: `λ > 1` on `𝒱_{bδ}(Γ_ξ)`, `|λ|₁ < μ` off `𝒱_δ(Γ_ξ)`,
/// `|dλ| < N` on `𝒱_{bδ}(Γ_ξ)`, `|dλ| < N/δ` on `region`.
///
/// `ξ` and `δ` must be `L`-Lipschitz Nash fields with `0 < δ < 1`; `μ` is a
/// constant in `(0, 1)`.
pub fn graph_bump(target: &GraphTarget, delta: &ScalarField, mu: f64, lip: f64, region: &AxisBox) -> Result<BumpResult> {
    check_mu(mu)?;
    let n = target.dim();
    check_dim(n, delta.dim())?;
    check_dim(n, region.dim())?;
    if target.xi.lip > lip {
        return Err(Error::NotLipschitz(format!("graph constant {} exceeds L = {lip}", target.xi.lip)));
    }
    require_nash(&target.xi.field, "ξ")?;
    require_nash(delta, "δ")?;
    let s = sandwich_constants(lip)?;
    let kappa = s.kappa;
    let m = n - 1;
    let coords: Vec<usize> = (0..m).collect();
    let sigma = target.along(delta)?.lift(n, &coords);
    let xi = target.xi.field.lift(n, &coords);
    let alpha = &sigma * (kappa / 2.0);
    let shift = &sigma * (0.625 * kappa);
    let factors = [
        Factor { axis: m, zeta: &xi + &shift, alpha: alpha.clone(), inside_below: true },
        Factor { axis: m, zeta: &xi - &shift, alpha: alpha.clone(), inside_below: false },
    ];
    let (l_alpha, l_zeta) = band_slopes(kappa, lip);
    let nf = factor_constant(l_alpha, l_zeta);
    let alpha_amb = rotate_field(&alpha, target.rotation.as_ref())?;
    let alpha_min = lower_bound_on(&alpha_amb, l_alpha, region)?;
    let slope_sum = 2.0 + l_alpha / 2.0 + l_zeta;
    let (lambda, mu_prime) = assemble(&factors, n, mu, nf, slope_sum, alpha_min, target.rotation.as_ref())?;
    Ok(BumpResult {
        lambda,
        kind: BumpKind::Graph,
        n_const: 54.0 * nf / kappa,
        b_or_c: Some(s.c),
        mu,
        mu_prime,
        lip,
        factors: 2,
        certificates: Vec::new(),
    })
}

/// Bump over an open cell: `λ > 1` on `𝒲_δ(C)`, `|λ|₁ < μ` off `𝒲_{cδ}(C)`,
/// `|dλ| < N` on `𝒲_δ(C)`, `|dλ| < N/δ` on `region`.
///
/// One factor per finite band bound; an unbounded side contributes nothing.
/// Band bounds must be Nash and, like `δ`, `L`-Lipschitz.
pub fn cell_bump(cell: &LipschitzCell, delta: &ScalarField, mu: f64, lip: f64, region: &AxisBox) -> Result<BumpResult> {
    check_mu(mu)?;
    if !cell.is_open() {
        return Err(Error::InvalidCell("cell bumps need a full-dimensional cell".into()));
    }
    let n = cell.dim();
    check_dim(n, delta.dim())?;
    check_dim(n, region.dim())?;
    if cell.lip() > lip {
        return Err(Error::NotLipschitz(format!("cell constant {} exceeds L = {lip}", cell.lip())));
    }
    require_nash(delta, "δ")?;
    let s = sandwich_constants(lip)?;
    let kappa = s.kappa;
    // δ in the local coordinates u of the cell
    let delta_local = match cell.rotation() {
        Some(r) => delta.compose(&r.inverse_fields())?,
        None => delta.clone(),
    };
    let mut factors = Vec::new();
    for (axis, lower, upper) in cell.levels()? {
        let coords: Vec<usize> = (0..axis).collect();
        for (bound, is_lower) in [(lower, true), (upper, false)] {
            let Some(b) = bound else { continue };
            require_nash(&b.field, "band bound")?;
            let xi = b.field.lift(n, &coords);
            let mut at_bound = ScalarField::coords(n);
            at_bound[axis] = xi.clone();
            let sigma = delta_local.compose(&at_bound)?;
            let shift = &sigma * (0.875 * kappa);
            let zeta = if is_lower { &xi + &shift } else { &xi - &shift };
            factors.push(Factor { axis, zeta, alpha: &sigma * (kappa / 2.0), inside_below: !is_lower });
        }
    }
    let (l_alpha, l_zeta) = band_slopes(kappa, lip);
    let nf = factor_constant(l_alpha, l_zeta);
    let mut alpha_min = f64::INFINITY;
    for f in &factors {
        let amb = rotate_field(&f.alpha, cell.rotation())?;
        alpha_min = alpha_min.min(lower_bound_on(&amb, l_alpha, region)?);
    }
    let slope_sum = 2.0 + l_alpha / 2.0 + l_zeta;
    let m = factors.len();
    let (lambda, mu_prime) = assemble(&factors, n, mu, nf, slope_sum, alpha_min, cell.rotation())?;
    Ok(BumpResult {
        lambda,
        kind: BumpKind::Cell,
        n_const: 3f64.powi(m as i32 + 1) * m as f64 * nf / kappa,
        b_or_c: Some(s.c),
        mu,
        mu_prime,
        lip,
        factors: m,
        certificates: Vec::new(),
    })
}

// The four contracts share one shape: inner set, outer set, the constants.
fn contract_certificates(
    bump: &BumpResult,
    delta: &ScalarField,
    grid: &SampleGrid,
    label: &str,
    inner: impl Fn(&[f64]) -> Result<Tri> + Sync,
    outside: impl Fn(&[f64]) -> Result<Tri> + Sync,
) -> Result<Vec<Certificate>> {
    let lam = &bump.lambda;
    let n_const = bump.n_const;
    let mu = bump.mu;
    let region = |t: Tri| match t {
        Tri::True => None,
        Tri::False => Some(Sample::Outside),
        Tri::Unresolved => Some(Sample::Unresolved),
    };
    let mut out = Vec::new();
    out.push(certify(
        Claim::lt("1", "λ", "inner set"),
        grid,
        Slack::Local,
        &format!("{label}: λ > 1 on the inner set"),
        |p| {
            if let Some(s) = region(inner(p)?) {
                return Ok(s);
            }
            let d = lam.eval_with_gradient(p)?;
            Ok(Sample::with_slope(1.0 - d.value, d.grad_norm()))
        },
    )?);
    out.push(certify(
        Claim::lt("|λ|₁", "μ", "outside the outer set"),
        grid,
        Slack::Local,
        &format!("{label}: |λ|₁ < μ outside the outer set"),
        |p| {
            if let Some(s) = region(outside(p)?) {
                return Ok(s);
            }
            let d = lam.eval_with_gradient(p)?;
            Ok(Sample::value(d.value.abs() + d.grad_norm() - mu))
        },
    )?);
    out.push(certify(
        Claim::lt("|dλ|", "N", "inner set"),
        grid,
        Slack::Local,
        &format!("{label}: |dλ| < N on the inner set"),
        |p| {
            if let Some(s) = region(inner(p)?) {
                return Ok(s);
            }
            Ok(Sample::value(lam.eval_with_gradient(p)?.grad_norm() - n_const))
        },
    )?);
    out.push(certify(
        Claim::lt("δ·|dλ|", "N", "box"),
        grid,
        Slack::Local,
        &format!("{label}: |dλ| < N/δ on the box"),
        |p| Ok(Sample::value(delta.eval(p)? * lam.eval_with_gradient(p)?.grad_norm() - n_const)),
    )?);
    Ok(out)
}

/// Certify the graph bump contracts on `grid`, with the inner tube at radius
/// `b·δ` and the outer tube at `δ`.
pub fn certify_graph_bump(
    bump: &BumpResult,
    target: &GraphTarget,
    delta: &ScalarField,
    grid: &SampleGrid,
) -> Result<Vec<Certificate>> {
    let b = bump.b_or_c.unwrap_or(0.0);
    contract_certificates(
        bump,
        delta,
        grid,
        "graph bump",
        |p| target.in_tube(p, b * delta.eval(p)?),
        |p| {
            Ok(match target.in_tube(p, delta.eval(p)?)? {
                Tri::True => Tri::False,
                Tri::False => Tri::True,
                Tri::Unresolved => Tri::Unresolved,
            })
        },
    )
}

/// Certify the cell bump contracts on `grid`: inner set `𝒲_δ(C)`, outer set
/// `𝒲_{cδ}(C)`.
pub fn certify_cell_bump(
    bump: &BumpResult,
    cell: &LipschitzCell,
    delta: &ScalarField,
    grid: &SampleGrid,
) -> Result<Vec<Certificate>> {
    let c = bump.b_or_c.unwrap_or(0.0);
    contract_certificates(
        bump,
        delta,
        grid,
        "cell bump",
        |p| cell.in_inner(p, delta.eval(p)?),
        |p| {
            Ok(match cell.in_inner(p, c * delta.eval(p)?)? {
                Tri::True => Tri::False,
                Tri::False => Tri::True,
                Tri::Unresolved => Tri::Unresolved,
            })
        },
    )
}

/// Certify the halfspace contracts: `λ > 1` and `|dλ| < N` below `ξ`,
/// `|λ|₁ < μ` above `ξ + α` and `α·|dλ| < N` above `ξ`.
pub fn certify_halfspace_bump(
    bump: &BumpResult,
    xi: &Bounding,
    alpha: &Bounding,
    grid: &SampleGrid,
) -> Result<Vec<Certificate>> {
    let m = xi.field.dim();
    let lam = &bump.lambda;
    let offset = |p: &[f64]| -> Result<(f64, f64)> { Ok((p[m] - xi.field.eval(&p[..m])?, alpha.field.eval(&p[..m])?)) };
    let (n_const, mu) = (bump.n_const, bump.mu);
    let mut out = Vec::new();
    out.push(certify(Claim::lt("1", "λ", "x_n ≤ ξ"), grid, Slack::Local, "halfspace bump: λ > 1 below ξ", |p| {
        if offset(p)?.0 > 0.0 {
            return Ok(Sample::Outside);
        }
        let d = lam.eval_with_gradient(p)?;
        Ok(Sample::with_slope(1.0 - d.value, d.grad_norm()))
    })?);
    out.push(certify(
        Claim::lt("|λ|₁", "μ", "x_n ≥ ξ + α"),
        grid,
        Slack::Local,
        "halfspace bump: |λ|₁ < μ above ξ + α",
        |p| {
            let (y, a) = offset(p)?;
            if y < a {
                return Ok(Sample::Outside);
            }
            let d = lam.eval_with_gradient(p)?;
            Ok(Sample::value(d.value.abs() + d.grad_norm() - mu))
        },
    )?);
    out.push(certify(Claim::lt("|dλ|", "N", "x_n ≤ ξ"), grid, Slack::Local, "halfspace bump: |dλ| < N below ξ", |p| {
        if offset(p)?.0 > 0.0 {
            return Ok(Sample::Outside);
        }
        Ok(Sample::value(lam.eval_with_gradient(p)?.grad_norm() - n_const))
    })?);
    out.push(certify(
        Claim::lt("α·|dλ|", "N", "x_n ≥ ξ"),
        grid,
        Slack::Local,
        "halfspace bump: |dλ| < N/α above ξ",
        |p| {
            let (y, a) = offset(p)?;
            if y < 0.0 {
                return Ok(Sample::Outside);
            }
            Ok(Sample::value(a * lam.eval_with_gradient(p)?.grad_norm() - n_const))
        },
    )?);
    Ok(out)
}

//! Desk-scale versions of the manifold constructions: distance to the
//! complement of an open set, the closed embedding of an open cell as the
//! graph of a reciprocal distance, nearest-point retraction onto a graph,
//! and maps into a manifold obtained by retracting a componentwise C¹
//! approximation.
//!
//! Closedness of an embedded graph cannot be decided from samples. What is
//! checked instead is a divergence proxy: along sequences running into the
//! frontier the height grows past every fixed bound.

use serde::Serialize;

use crate::approx::{c1_approx, ApproxOptions, Stratification};
use crate::cells::{Bracket, LipschitzCell};
use crate::certify::{certify, Certificate, Claim, Sample, SampleGrid, Slack};
use crate::error::{check_dim, Error, Result};
use crate::fields::{norm, AxisBox, ScalarField};

#[cfg(test)]
mod tests;

/// Largest accepted orthogonality residual of a retraction.
pub const ORTHOGONALITY_TOL: f64 = 1e-7;

const NEWTON_STEPS: usize = 200;
const HESSIAN_STEP: f64 = 1e-5;

/// The graph `Γ_H = {(x, H(x))}` of a C¹ height over `ℝⁿ`, inside `ℝⁿ⁺¹`.
#[derive(Debug, Clone)]
pub struct GraphManifold {
    height: ScalarField,
}

/// A retracted point and the first-order check that it is a foot point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Retraction {
    pub point: Vec<f64>,
    /// `max_i |(p − r(p))·t_i|` over unit tangents `t_i`.
    pub residual: f64,
    pub iterations: usize,
}

impl GraphManifold {
    pub fn new(height: ScalarField) -> GraphManifold {
        GraphManifold { height }
    }

    pub fn base_dim(&self) -> usize {
        self.height.dim()
    }

    pub fn ambient_dim(&self) -> usize {
        self.height.dim() + 1
    }

    pub fn height(&self) -> &ScalarField {
        &self.height
    }

    /// `(x, H(x))`.
    pub fn lift(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut p = x.to_vec();
        p.push(self.height.eval(x)?);
        Ok(p)
    }

    /// The projection `Π(x, z) = x`.
    pub fn project(&self, p: &[f64]) -> Vec<f64> {
        p[..self.base_dim()].to_vec()
    }

    /// Unit tangent vectors `(e_i, ∂_i H)/|·|` at the base point `x`.
    pub fn tangents(&self, x: &[f64]) -> Result<Vec<Vec<f64>>> {
        let n = self.base_dim();
        let d = self.height.eval_with_gradient(x)?;
        Ok((0..n)
            .map(|i| {
                let mut t = vec![0.0; n + 1];
                t[i] = 1.0;
                t[n] = d.gradient[i];
                let l = norm(&t);
                t.iter().map(|v| v / l).collect()
            })
            .collect())
    }

    pub fn retract(&self, p: &[f64]) -> Result<Retraction> {
        nearest_point_retraction(self, p)
    }
}

/// `d(x, ℝⁿ ∖ Ω)` from a sample of the frontier of `Ω` with covering radius `h`.
///
/// The sample lies outside the open set, so its nearest point gives an upper
/// bound; a sample dense to `h` loses at most `h`.
pub fn distance_to_complement(
    omega: impl Fn(&[f64]) -> bool,
    point: &[f64],
    boundary_sample: &[Vec<f64>],
    h: f64,
) -> Result<Bracket> {
    if boundary_sample.is_empty() {
        return Err(Error::EmptyBoundary);
    }
    if !(h >= 0.0) {
        return Err(Error::Domain("sample density must be nonnegative".into()));
    }
    if !omega(point) {
        return Err(Error::Domain(format!("{point:?} is not in the open set")));
    }
    let mut d = f64::INFINITY;
    for q in boundary_sample {
        check_dim(point.len(), q.len())?;
        d = d.min(norm(&q.iter().zip(point).map(|(a, b)| a - b).collect::<Vec<_>>()));
    }
    Ok(Bracket { lo: (d - h).max(0.0), hi: d })
}

/// The point of `M` nearest to `p`, by damped Newton descent from the
/// vertical projection.
///
/// Stationarity of `|x − x̄|² + (H(x) − z)²` is exactly orthogonality of
/// `p − r(p)` to the tangent space, so the residual is read off the
/// gradient. The result must also be a strict local minimum (positive
/// definite second derivative); failing either is `NoConvergence`, which
/// is how a point outside the tube shows up.
pub fn nearest_point_retraction(m: &GraphManifold, p: &[f64]) -> Result<Retraction> {
    let n = m.base_dim();
    check_dim(m.ambient_dim(), p.len())?;
    let (xbar, z) = (&p[..n], p[n]);
    let h = &m.height;
    let objective = |x: &[f64]| -> Result<f64> {
        let d: f64 = x.iter().zip(xbar).map(|(a, b)| (a - b).powi(2)).sum();
        Ok(d + (h.eval(x)? - z).powi(2))
    };
    let mut x = xbar.to_vec();
    let mut value = objective(&x)?;
    for it in 0..NEWTON_STEPS {
        let (stat, hess) = stationarity(h, xbar, z, &x)?;
        let tangent_norms = tangent_norms(h, &x)?;
        let residual = stat.iter().zip(&tangent_norms).map(|(f, t)| f.abs() / t).fold(0.0, f64::max);
        let newton = cholesky_solve(&hess, &stat);
        let convex = newton.is_some();
        let done = |x: &[f64]| -> Result<Retraction> {
            if !convex {
                return Err(Error::NoConvergence(format!("{p:?}: stationary point of the distance is not a minimum")));
            }
            let mut point = x.to_vec();
            point.push(h.eval(x)?);
            Ok(Retraction { point, residual, iterations: it })
        };
        if residual < ORTHOGONALITY_TOL * 1e-3 {
            return done(&x);
        }
        // Newton direction where the model is convex, steepest descent otherwise
        let dir = newton.unwrap_or_else(|| stat.clone());
        let mut t = 1.0;
        loop {
            let cand: Vec<f64> = x.iter().zip(&dir).map(|(a, d)| a - t * d).collect();
            let v = objective(&cand)?;
            if v < value {
                x = cand;
                value = v;
                break;
            }
            t *= 0.5;
            if t < 1e-12 {
                // rounding floor reached: accept if already orthogonal
                if residual < ORTHOGONALITY_TOL {
                    return done(&x);
                }
                return Err(Error::NoConvergence(format!("{p:?}: descent stalled with residual {residual:e}")));
            }
        }
    }
    Err(Error::NoConvergence(format!("{p:?}: no foot point after {NEWTON_STEPS} steps")))
}

// Half the gradient of the squared distance and its Jacobian; the Hessian of
// H comes from central differences of the exact gradient.
fn stationarity(h: &ScalarField, xbar: &[f64], z: f64, x: &[f64]) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let n = x.len();
    let d = h.eval_with_gradient(x)?;
    let gap = d.value - z;
    let stat: Vec<f64> = (0..n).map(|i| x[i] - xbar[i] + gap * d.gradient[i]).collect();
    let mut hess = vec![vec![0.0; n]; n];
    for j in 0..n {
        let s = HESSIAN_STEP * (1.0 + x[j].abs());
        let mut a = x.to_vec();
        let mut b = x.to_vec();
        a[j] += s;
        b[j] -= s;
        let (ga, gb) = (h.eval_with_gradient(&a)?.gradient, h.eval_with_gradient(&b)?.gradient);
        for i in 0..n {
            let second = (ga[i] - gb[i]) / (2.0 * s);
            hess[i][j] += gap * second + d.gradient[i] * d.gradient[j] + if i == j { 1.0 } else { 0.0 };
        }
    }
    // symmetrize the difference quotients
    for i in 0..n {
        for j in 0..i {
            let m = 0.5 * (hess[i][j] + hess[j][i]);
            hess[i][j] = m;
            hess[j][i] = m;
        }
    }
    Ok((stat, hess))
}

fn tangent_norms(h: &ScalarField, x: &[f64]) -> Result<Vec<f64>> {
    Ok(h.eval_with_gradient(x)?.gradient.iter().map(|g| (1.0 + g * g).sqrt()).collect())
}

/// Solves `A v = b` for symmetric positive definite `A`; `None` if not.
fn cholesky_solve(a: &[Vec<f64>], b: &[f64]) -> Option<Vec<f64>> {
    let n = b.len();
    let mut l = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..=i {
            let s: f64 = a[i][j] - (0..j).map(|k| l[i][k] * l[j][k]).sum::<f64>();
            if i == j {
                if !(s > 1e-12) {
                    return None;
                }
                l[i][i] = s.sqrt();
            } else {
                l[i][j] = s / l[j][j];
            }
        }
    }
    let mut y = vec![0.0; n];
    for i in 0..n {
        y[i] = (b[i] - (0..i).map(|k| l[i][k] * y[k]).sum::<f64>()) / l[i][i];
    }
    let mut v = vec![0.0; n];
    for i in (0..n).rev() {
        v[i] = (y[i] - (i + 1..n).map(|k| l[k][i] * v[k]).sum::<f64>()) / l[i][i];
    }
    Some(v)
}

/// Smallest height found at a given frontier distance.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DivergenceProbe {
    pub distance: f64,
    pub min_height: f64,
    pub sequences: usize,
}

/// Output of [`reciprocal_graph_embedding`].
#[derive(Debug, Clone, Serialize)]
pub struct Embedding {
    #[serde(skip)]
    pub manifold: GraphManifold,
    pub certificates: Vec<Certificate>,
    /// Empty when `Ω` has no frontier inside the box.
    pub divergence: Vec<DivergenceProbe>,
    /// Heights grow strictly along every frontier sequence.
    pub monotone: bool,
    pub bijective_samples: usize,
    pub bijectivity_failures: usize,
}

impl Embedding {
    pub fn passed(&self) -> bool {
        self.monotone && self.bijectivity_failures == 0 && self.certificates.iter().all(Certificate::passed)
    }

    /// The probe at the frontier distance closest to `d`.
    pub fn height_near(&self, d: f64) -> Option<&DivergenceProbe> {
        self.divergence.iter().min_by(|a, b| (a.distance / d).ln().abs().total_cmp(&(b.distance / d).ln().abs()))
    }
}

/// Distances at which the divergence proxy reads the height.
pub const FRONTIER_DISTANCES: [f64; 5] = [1e-1, 1e-2, 1e-3, 1e-4, 1e-5];

/// `Γ_{1/ρ′}` for a smoothed frontier distance `ρ′` of the open cell `Ω`.
///
/// Requires `|ρ − ρ′| < ρ/2` at every grid point of `Ω` (else
/// `NotDominated`), with `ρ` bracketed by the cell's own distance routine.
/// Certifies `1/ρ′ > (2/3)/ρ` on the grid, runs the divergence proxy along
/// rays from the deepest grid point into the frontier, and checks that `Π`
/// restricted to the lifted grid samples is a bijection onto them.
pub fn reciprocal_graph_embedding(omega: &LipschitzCell, rho_smooth: &ScalarField, grid: &SampleGrid) -> Result<Embedding> {
    let n = omega.dim();
    check_dim(n, rho_smooth.dim())?;
    check_dim(n, grid.dim())?;
    if !omega.is_open() {
        return Err(Error::InvalidCell("the embedded set must be an open cell".into()));
    }
    let rho = |p: &[f64]| -> Result<Bracket> { omega.complement_bracket(p, None) };
    let mut inside = Vec::new();
    for p in grid.points() {
        if !omega.contains(&p)? {
            continue;
        }
        let r = rho(&p)?;
        let s = rho_smooth.eval(&p)?;
        if r.lo.is_finite() {
            let worst = (s - r.lo).abs().max((s - r.hi).abs());
            if !(worst < r.lo / 2.0) {
                return Err(Error::NotDominated(format!("|ρ − ρ′| reaches {worst:e} ≥ ρ/2 = {:e} at {p:?}", r.lo / 2.0)));
            }
        } else if !(s > 0.0) {
            return Err(Error::NotDominated(format!("ρ′ = {s:e} is not positive at {p:?}")));
        }
        inside.push((p, r, s));
    }
    if inside.is_empty() {
        return Err(Error::Domain("no grid point lies in the open cell".into()));
    }
    let height = rho_smooth.recip();
    let manifold = GraphManifold::new(height.clone());

    let claim = Claim::lt("(2/3)/ρ", "1/ρ′", "Ω ∩ grid");
    let lower = certify(claim, grid, Slack::Local, "reciprocal embedding: the height dominates (2/3)/ρ", |p| {
        if !omega.contains(p)? {
            return Ok(Sample::Outside);
        }
        let r = rho(p)?;
        if !r.lo.is_finite() {
            return Ok(Sample::Outside);
        }
        if !(r.lo > 0.0) {
            return Ok(Sample::Unresolved);
        }
        Ok(Sample::value(2.0 / (3.0 * r.lo) - height.eval(p)?))
    })?;

    let (divergence, monotone) = divergence_proxy(omega, &height, &grid.bounds, &inside)?;

    // Π ∘ lift = id and lift ∘ Π = id on the samples, heights finite and
    // positive, lifted points pairwise distinct.
    let mut failures = 0;
    let mut lifted = Vec::with_capacity(inside.len());
    for (p, _, _) in &inside {
        let m = manifold.lift(p)?;
        let z = m[n];
        let back = manifold.project(&m);
        let again = manifold.lift(&back)?;
        if !(z.is_finite() && z > 0.0) || back != *p || again != m {
            failures += 1;
        }
        lifted.push(m);
    }
    lifted.sort_by(|a, b| a.iter().zip(b).map(|(u, v)| u.total_cmp(v)).find(|o| o.is_ne()).unwrap_or(std::cmp::Ordering::Equal));
    failures += lifted.windows(2).filter(|w| w[0] == w[1]).count();

    Ok(Embedding {
        manifold,
        certificates: vec![lower],
        divergence,
        monotone,
        bijective_samples: inside.len(),
        bijectivity_failures: failures,
    })
}

// Rays from the grid point of largest ρ′ along the axis and diagonal
// directions. Each ray that leaves Ω inside the box gives one sequence,
// with points placed by bisection at the distances of FRONTIER_DISTANCES.
fn divergence_proxy(
    omega: &LipschitzCell,
    height: &ScalarField,
    region: &AxisBox,
    inside: &[(Vec<f64>, Bracket, f64)],
) -> Result<(Vec<DivergenceProbe>, bool)> {
    let n = omega.dim();
    let anchor = &inside.iter().max_by(|a, b| a.2.total_cmp(&b.2)).expect("nonempty").0;
    let mut dirs: Vec<Vec<f64>> = Vec::new();
    for k in 0..n {
        for s in [-1.0, 1.0] {
            let mut d = vec![0.0; n];
            d[k] = s;
            dirs.push(d);
        }
    }
    if n > 1 {
        for mask in 0..(1usize << n) {
            let s = 1.0 / (n as f64).sqrt();
            dirs.push((0..n).map(|k| if mask >> k & 1 == 1 { s } else { -s }).collect());
        }
    }
    let at = |t: f64, d: &[f64]| -> Vec<f64> { anchor.iter().zip(d).map(|(a, v)| a + t * v).collect() };
    let mut probes: Vec<DivergenceProbe> =
        FRONTIER_DISTANCES.iter().map(|&distance| DivergenceProbe { distance, min_height: f64::INFINITY, sequences: 0 }).collect();
    let mut monotone = true;
    for d in &dirs {
        // first exit from Ω, found by doubling then bisection; rays leaving the box first are skipped
        let tmax = 4.0 * region.radius().max(1.0);
        let mut hi = 1e-3;
        while hi < tmax && omega.contains(&at(hi, d))? {
            hi *= 2.0;
        }
        if hi >= tmax || !region.contains(&at(hi, d), 1e-12) {
            continue;
        }
        let mut lo = 0.0;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if omega.contains(&at(mid, d))? {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let exit = lo;
        let mut last = f64::NEG_INFINITY;
        for probe in probes.iter_mut() {
            // ρ is 1-Lipschitz along the ray and ≤ exit − t, so bisect on the bracket midpoint
            let (mut a, mut b) = (0.0, exit);
            for _ in 0..200 {
                let mid = 0.5 * (a + b);
                let r = omega.complement_bracket(&at(mid, d), None)?;
                if 0.5 * (r.lo + r.hi) > probe.distance {
                    a = mid;
                } else {
                    b = mid;
                }
            }
            let p = at(b, d);
            if !omega.contains(&p)? {
                continue;
            }
            let z = height.eval(&p)?;
            monotone &= z > last;
            last = z;
            probe.min_height = probe.min_height.min(z);
            probe.sequences += 1;
        }
    }
    probes.retain(|p| p.sequences > 0);
    Ok((probes, monotone))
}

/// `(Σ dᵢ^{-p})^{-1/p}`: a Nash smoothing of `min dᵢ` on the set where all
/// `dᵢ > 0`, lying in `[k^{-1/p}·min, min]` for `k` faces. `p` is a power
/// of two so the root is a chain of square roots.
pub fn soft_min_distance(faces: &[ScalarField], p: u32) -> Result<ScalarField> {
    let Some(first) = faces.first() else {
        return Err(Error::Degenerate("soft minimum of no faces".into()));
    };
    if !p.is_power_of_two() {
        return Err(Error::Degenerate(format!("soft minimum exponent {p} must be a power of two")));
    }
    for f in faces {
        check_dim(first.dim(), f.dim())?;
    }
    let mut s = ScalarField::sum(&faces.iter().map(|f| f.powi(p as i32).recip()).collect::<Vec<_>>());
    for _ in 0..p.trailing_zeros() {
        s = s.sqrt();
    }
    Ok(s.recip())
}

/// A closed manifold with a Nash retraction defined on a tube around it.
#[derive(Debug, Clone)]
pub enum Target {
    /// The unit sphere of `ℝᵏ`, with `r(y) = y/|y|` on `|y| > ½`.
    Sphere { ambient: usize },
    /// A graph `Γ_H`, with the vertical projection `r(y, z) = (y, H(y))`,
    /// defined everywhere.
    Graph(GraphManifold),
}

/// Tube of the sphere retraction.
pub const SPHERE_TUBE: f64 = 0.5;

impl Target {
    pub fn ambient_dim(&self) -> usize {
        match self {
            Target::Sphere { ambient } => *ambient,
            Target::Graph(m) => m.ambient_dim(),
        }
    }

    /// Distance of `y` from the manifold (for the graph, the vertical gap).
    pub fn gap(&self, y: &[f64]) -> Result<f64> {
        match self {
            Target::Sphere { .. } => Ok((norm(y) - 1.0).abs()),
            Target::Graph(m) => {
                let k = m.base_dim();
                Ok((y[k] - m.height().eval(&y[..k])?).abs())
            }
        }
    }

    fn in_tube(&self, y: &[f64]) -> bool {
        match self {
            Target::Sphere { .. } => norm(y) > SPHERE_TUBE,
            Target::Graph(_) => true,
        }
    }

    /// `r ∘ θ` as fields.
    pub fn retract_fields(&self, theta: &[ScalarField]) -> Result<Vec<ScalarField>> {
        check_dim(self.ambient_dim(), theta.len())?;
        match self {
            Target::Sphere { .. } => {
                let r = ScalarField::sum(&theta.iter().map(|t| t.powi(2)).collect::<Vec<_>>()).sqrt();
                Ok(theta.iter().map(|t| t / &r).collect())
            }
            Target::Graph(m) => {
                let k = m.base_dim();
                let mut out = theta[..k].to_vec();
                out.push(m.height().compose(&theta[..k])?);
                Ok(out)
            }
        }
    }
}

/// Output of [`manifold_valued_approx`].
#[derive(Debug, Clone, Serialize)]
pub struct ManifoldApprox {
    #[serde(skip)]
    pub g: Vec<ScalarField>,
    #[serde(skip)]
    pub theta: Vec<ScalarField>,
    /// Componentwise tolerance used for `θ`, relative to `ε`.
    pub tolerance: f64,
    pub retries: usize,
    /// Grid maximum of the distance from `g` to the manifold.
    pub landing_error: f64,
    /// Grid maximum of `|f − g|₁`.
    pub sup_error: f64,
    pub certificates: Vec<Certificate>,
}

impl ManifoldApprox {
    pub fn passed(&self) -> bool {
        self.certificates.iter().all(Certificate::passed)
    }
}

/// Largest accepted landing error of a retracted map.
pub const LANDING_TOL: f64 = 1e-7;

const TUBE_RETRIES: usize = 6;

/// `g = r ∘ θ` with `θ` a componentwise C¹ approximation of `f`.
///
/// For vector maps `|f − g|₁` is `|f − g| + |df − dg|` with Euclidean and
/// Frobenius norms. The componentwise tolerance starts at
/// `ε/(2√k(2 + 3Λ))`, `Λ` the grid maximum of `|df|`, and is halved when `θ`
/// leaves the tube or the final certificate fails; running out of halvings
/// is `TubeEscape`.
pub fn manifold_valued_approx(
    f: &[Stratification],
    target: &Target,
    eps: &ScalarField,
    opts: &ApproxOptions,
) -> Result<ManifoldApprox> {
    let k = target.ambient_dim();
    if f.len() != k {
        return Err(Error::Dimension { expected: k, got: f.len() });
    }
    let n = eps.dim();
    for s in f {
        check_dim(n, s.dim())?;
    }
    opts.check_region(n)?;
    opts.check_tolerance(eps)?;
    let grid = opts.grid();
    let fs: Vec<&ScalarField> = f.iter().map(|s| &s.target).collect();
    let mut big = 0.0f64;
    for p in grid.points() {
        let vals = fs.iter().map(|c| c.eval_with_gradient(&p)).collect::<Result<Vec<_>>>()?;
        let y: Vec<f64> = vals.iter().map(|v| v.value).collect();
        let gap = target.gap(&y)?;
        if !(gap < 1e-9) {
            return Err(Error::Domain(format!("f is {gap:e} away from the target manifold at {p:?}")));
        }
        big = big.max(vals.iter().map(|v| v.grad_norm().powi(2)).sum::<f64>().sqrt());
    }
    let mut tolerance = 1.0 / (2.0 * (k as f64).sqrt() * (2.0 + 3.0 * big));
    let mut last = String::new();
    for retry in 0..=TUBE_RETRIES {
        let tol = eps * tolerance;
        let mut theta = Vec::with_capacity(k);
        let mut certificates = Vec::new();
        for s in f {
            let r = c1_approx(s, &tol, opts)?;
            certificates.extend(r.certificates);
            theta.push(r.g);
        }
        let mut escaped = None;
        for p in grid.points() {
            let y = theta.iter().map(|t| t.eval(&p)).collect::<Result<Vec<_>>>()?;
            if !target.in_tube(&y) {
                escaped = Some(p);
                break;
            }
        }
        if let Some(p) = escaped {
            last = format!("θ leaves the tube at {p:?} with tolerance {tolerance:e}·ε");
            tolerance *= 0.5;
            continue;
        }
        let g = target.retract_fields(&theta)?;
        let claim = Claim::lt("|f − g|₁", "ε", "box");
        let err = certify(claim, &grid, Slack::Local, "manifold-valued approximation: r∘θ is C¹-close to f", |p| {
            Ok(Sample::value(c1_gap(&fs, &g, p)? - eps.eval(p)?))
        })?;
        if !err.passed() {
            last = format!("|f − g|₁ − ε reached {:e} with tolerance {tolerance:e}·ε", err.bound());
            tolerance *= 0.5;
            continue;
        }
        // r∘θ lies on the manifold identically; samples only see rounding, so no margin
        let claim = Claim::lt("dist(g, N)", "1e-7", "box");
        let landing = certify(claim, &grid, Slack::Global { lip: 0.0 }, "manifold-valued approximation: g lands on the target", |p| {
            let y = g.iter().map(|c| c.eval(p)).collect::<Result<Vec<_>>>()?;
            Ok(Sample::value(target.gap(&y)? - LANDING_TOL))
        })?;
        let sup_error = sup_gap(&fs, &g, &grid)?;
        let landing_error = landing.measured_max + LANDING_TOL;
        certificates.push(err);
        certificates.push(landing);
        return Ok(ManifoldApprox {
            g,
            theta,
            tolerance,
            retries: retry,
            landing_error,
            sup_error,
            certificates,
        });
    }
    Err(Error::TubeEscape(last))
}

fn c1_gap(f: &[&ScalarField], g: &[ScalarField], p: &[f64]) -> Result<f64> {
    let (mut d0, mut d1) = (0.0, 0.0);
    for (fi, gi) in f.iter().zip(g) {
        let a = fi.eval_with_gradient(p)?;
        let b = gi.eval_with_gradient(p)?;
        d0 += (a.value - b.value).powi(2);
        d1 += a.gradient.iter().zip(&b.gradient).map(|(u, v)| (u - v).powi(2)).sum::<f64>();
    }
    Ok(d0.sqrt() + d1.sqrt())
}

fn sup_gap(f: &[&ScalarField], g: &[ScalarField], grid: &SampleGrid) -> Result<f64> {
    let mut m = 0.0f64;
    for v in grid.map(|p| c1_gap(f, g, p)).into_iter().flatten() {
        m = m.max(v?);
    }
    Ok(m)
}

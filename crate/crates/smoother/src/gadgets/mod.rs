//! One-variable Nash gadgets and the tolerance sequence `δ_j`.
//!
//! Every gadget is built from C¹ piecewise polynomials by [`blend`]: adjacent
//! pieces are joined across each knot `t₀` with the weight
//! `s(P((t − t₀)/r))`, where `s` is the algebraic sigmoid and
//! `P(v) = v + v³`. The cubic makes the weights decay like `|t|⁻⁶`, so a cubic
//! middle piece leaks only `O(|t|⁻³)` into the far field and the gadgets stay
//! scale free as `δ → 0`.

mod calibration;
mod poly;

use std::sync::OnceLock;

pub use calibration::{calibrate, gadget_certificates, GadgetCalibration, RuleEntry, CALIBRATION_MUS, CHECK_DELTAS, CHECK_MUS, CHECK_SPAN};
pub use poly::Poly;

use crate::certify::{certify, Certificate, Claim, Sample, SampleGrid, Slack};
use crate::error::{Error, Result};
use crate::fields::{AxisBox, ScalarField, SmoothClass};

/// Knots of the rescaled cutoff: the transition happens on `[¼, ¾]`, well
/// inside `[0, 1]`, so the blend windows stay away from `t = 0` and `t = 1`.
pub const CUTOFF_KNOTS: [f64; 2] = [0.25, 0.75];

/// `top` for `t ≤ 0`, `top·(1 − 3t² + 2t³)` on `[0, 1]`, `0` for `t ≥ 1`.
pub fn theta_c1(t: f64, top: f64) -> f64 {
    if t <= 0.0 {
        top
    } else if t >= 1.0 {
        0.0
    } else {
        top * (1.0 - 3.0 * t * t + 2.0 * t * t * t)
    }
}

/// Derivative of [`theta_c1`] in `t`.
pub fn theta_c1_derivative(t: f64, top: f64) -> f64 {
    if t <= 0.0 || t >= 1.0 {
        0.0
    } else {
        top * (-6.0 * t + 6.0 * t * t)
    }
}

/// `½(1 + kt/√(1+k²t²))`.
pub fn algebraic_sigmoid(t: f64, k: f64) -> f64 {
    crate::fields::sigmoid_value(t, k)
}

/// A C¹ spline: `pieces[i]` applies between `knots[i-1]` and `knots[i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Spline {
    pub pieces: Vec<Poly>,
    pub knots: Vec<f64>,
}

/// Largest knot mismatch in value or slope accepted as C¹.
pub const C1_TOL: f64 = 1e-9;

impl Spline {
    /// Build from `(polynomial, interval)` pairs with contiguous intervals.
    pub fn from_pieces(pieces: &[(Poly, (f64, f64))]) -> Result<Spline> {
        if pieces.is_empty() {
            return Err(Error::Degenerate("a spline needs at least one piece".into()));
        }
        let mut knots = Vec::new();
        for w in pieces.windows(2) {
            let (a, b) = (w[0].1, w[1].1);
            if a.1 != b.0 || !(a.0 < a.1) {
                return Err(Error::Degenerate(format!("intervals {a:?} and {b:?} are not contiguous")));
            }
            knots.push(a.1);
        }
        let s = Spline { pieces: pieces.iter().map(|p| p.0.clone()).collect(), knots };
        s.check_c1()?;
        Ok(s)
    }

    fn check_c1(&self) -> Result<()> {
        for (i, &t) in self.knots.iter().enumerate() {
            let (p, q) = (&self.pieces[i], &self.pieces[i + 1]);
            let dv = (p.eval(t) - q.eval(t)).abs();
            let dd = (p.derivative().eval(t) - q.derivative().eval(t)).abs();
            let scale = 1f64.max(p.eval(t).abs());
            let mismatch = dv.max(dd);
            if mismatch > C1_TOL * scale {
                return Err(Error::NotC1 { knot: t, mismatch });
            }
        }
        Ok(())
    }

    pub fn eval(&self, t: f64) -> f64 {
        let i = self.knots.iter().take_while(|k| t > **k).count();
        self.pieces[i].eval(t)
    }

    /// The spline as a (C¹-tagged) piecewise field of `t`.
    pub fn to_field(&self, t: &ScalarField) -> ScalarField {
        if self.knots.is_empty() {
            return self.pieces[0].apply(t);
        }
        let dim = t.dim();
        let mut pieces = Vec::new();
        for (i, p) in self.pieces.iter().enumerate() {
            let conds = if i < self.knots.len() { vec![self.knots[i] - t] } else { vec![] };
            pieces.push((conds, p.apply(t)));
        }
        ScalarField::piecewise(dim, pieces).with_class(SmoothClass::C1)
    }

    /// The C¹ cutoff `θ_c1(2t − ½, top)` with knots at ¼ and ¾.
    pub fn cutoff(top: f64) -> Spline {
        let middle = Poly::new(vec![top, 0.0, -3.0 * top, 2.0 * top]).compose_affine(2.0, -0.5);
        Spline {
            pieces: vec![Poly::constant(top), middle, Poly::constant(0.0)],
            knots: CUTOFF_KNOTS.to_vec(),
        }
    }
}

/// Sigmoid knot blending of a spline, evaluated at the field `t`.
///
/// `radius` may itself be a field (positive wherever evaluated).
pub fn blend(spline: &Spline, t: &ScalarField, radius: &ScalarField, k: f64) -> ScalarField {
    let m = spline.knots.len();
    if m == 0 {
        return spline.pieces[0].apply(t);
    }
    let z: Vec<ScalarField> = spline
        .knots
        .iter()
        .map(|&t0| {
            let v = (t - t0) / radius;
            &v * (v.powi(2) + 1.0)
        })
        .collect();
    let mut terms = Vec::with_capacity(m + 1);
    let weight = |i: usize| -> ScalarField {
        if i == 0 {
            (-&z[0]).sigmoid(k)
        } else if i == m {
            z[m - 1].sigmoid(k)
        } else {
            z[i - 1].sigmoid_gap(&z[i], k)
        }
    };
    for (i, p) in spline.pieces.iter().enumerate() {
        if p.coeffs.iter().all(|c| *c == 0.0) {
            continue;
        }
        let w = weight(i);
        terms.push(if p.is_constant() && p.coeffs[0] == 1.0 { w } else { &p.apply(t) * &w });
    }
    if terms.is_empty() {
        return ScalarField::constant(t.dim(), 0.0);
    }
    ScalarField::sum(&terms)
}

/// Nash smoothing of a C¹ spline to C¹ distance `< μ/2`, certified on
/// `[t₁ − 2, t_m + 2]` with spacing `10⁻³`.
pub fn nash_smooth_1d(pieces: &[(Poly, (f64, f64))], mu: f64) -> Result<ScalarField> {
    Ok(nash_smooth_1d_with(&Gadgets::standard().cal, pieces, mu)?.0)
}

/// [`nash_smooth_1d`] with an explicit calibration; also returns the certificate.
pub fn nash_smooth_1d_with(
    cal: &GadgetCalibration,
    pieces: &[(Poly, (f64, f64))],
    mu: f64,
) -> Result<(ScalarField, Option<Certificate>)> {
    if !(mu > 0.0) {
        return Err(Error::Degenerate(format!("tolerance μ = {mu} must be positive")));
    }
    let spline = Spline::from_pieces(pieces)?;
    let t = ScalarField::coord(1, 0);
    if spline.knots.is_empty() {
        return Ok((spline.pieces[0].apply(&t), None));
    }
    let (mut r, k) = cal.rule(mu);
    let input = spline.to_field(&t);
    let lo = spline.knots[0] - 2.0;
    let hi = spline.knots[spline.knots.len() - 1] + 2.0;
    let grid = SampleGrid::new(AxisBox::new(vec![lo], vec![hi]), 1e-3);
    for _ in 0..8 {
        let out = blend(&spline, &t, &ScalarField::constant(1, r), k);
        let cert = c1_distance_certificate(&input, &out, mu / 2.0, &grid, "nash_smooth_1d: |u − smoothed|₁ < μ/2")?;
        if cert.passed() {
            return Ok((out, Some(cert)));
        }
        r /= 2.0;
    }
    Err(Error::Calibration(format!("no blend radius meets C¹ distance {} on [{lo}, {hi}]", mu / 2.0)))
}

pub(crate) fn c1_distance_certificate(
    f: &ScalarField,
    g: &ScalarField,
    bound: f64,
    grid: &SampleGrid,
    provenance: &str,
) -> Result<Certificate> {
    let n = f.dim();
    certify(Claim::lt("|f − g|₁", format!("{bound:e}"), "box"), grid, Slack::Local, provenance, |p| {
        let a = f.eval_with_gradient(p)?;
        let b = g.eval_with_gradient(p)?;
        let d: f64 = (0..n).map(|i| (a.gradient[i] - b.gradient[i]).powi(2)).sum::<f64>().sqrt();
        Ok(Sample::value((a.value - b.value).abs() + d - bound))
    })
}

/// `δ_j(x) = 1/((1+j²)(1+|x|^{2j}))`.
pub fn delta_j(j: u32, x: &[f64]) -> f64 {
    let r2: f64 = x.iter().map(|v| v * v).sum();
    1.0 / ((1.0 + (j as f64).powi(2)) * (1.0 + r2.powi(j as i32)))
}

/// `δ_j` as a field on `ℝ^dim`.
pub fn delta_j_field(j: u32, dim: usize) -> ScalarField {
    delta_j_scaled(j, dim, 1.0)
}

/// `x ↦ δ_j(x/R)`: the same sequence measured in units of `R`.
pub fn delta_j_scaled(j: u32, dim: usize, radius: f64) -> ScalarField {
    let xs = ScalarField::coords(dim);
    let r2 = ScalarField::sum(&xs.iter().map(|x| x.powi(2)).collect::<Vec<_>>()) * (1.0 / (radius * radius));
    let denom = (r2.powi(j as i32) + 1.0) * (1.0 + (j as f64).powi(2));
    denom.recip()
}

/// Gadget fields built from one calibration.
///
/// * `psi`: `(μ, δ, y) ↦ ψ`, the one-sided bump profile.
/// * `phi`: `(δ, y) ↦ Φ`, pushing `(−∞, δ]` into `(0, 2δ)` and nearly the identity above.
/// * `psi_unit`: `(δ, y) ↦ Ψ`, the two-sided version mapping `ℝ` into `(0, 1)`.
pub struct Gadgets {
    pub cal: GadgetCalibration,
    psi: ScalarField,
    phi: ScalarField,
    psi_unit: ScalarField,
}

impl Gadgets {
    pub fn new(cal: GadgetCalibration) -> Gadgets {
        let psi = build_psi(&cal);
        let phi = build_phi(&cal);
        let psi_unit = build_psi_unit(&phi, cal.l_psi);
        Gadgets { cal, psi, phi, psi_unit }
    }

    /// Gadgets for the committed calibration.
    pub fn standard() -> &'static Gadgets {
        static G: OnceLock<Gadgets> = OnceLock::new();
        G.get_or_init(|| Gadgets::new(GadgetCalibration::frozen()))
    }

    pub fn psi(&self) -> &ScalarField {
        &self.psi
    }

    pub fn phi(&self) -> &ScalarField {
        &self.phi
    }

    pub fn psi_unit(&self) -> &ScalarField {
        &self.psi_unit
    }
}

fn build_psi(cal: &GadgetCalibration) -> ScalarField {
    let [mu, delta, y] = [0, 1, 2].map(|i| ScalarField::coord(3, i));
    let t = &y / &delta;
    // The window shrinks with μ·δ: the C¹ blending error is linear in the
    // radius, and every tail term then carries powers of μ and δ.
    let radius = &mu * &delta * cal.psi_radius;
    let profile = blend(&Spline::cutoff(2.0), &t, &radius, cal.sharpness);
    profile + mu.powi(2) * 0.25
}

fn build_phi(cal: &GadgetCalibration) -> ScalarField {
    let [delta, y] = [0, 1].map(|i| ScalarField::coord(2, i));
    let t = &y / &delta;
    let cut = blend(&Spline::cutoff(1.0), &t, &(&delta * cal.phi_radius), cal.sharpness);
    let lifted = &delta / (y.powi(2) + 1.0) - &y;
    &cut * &lifted + &y + delta.powi(2) * 0.25
}

fn build_psi_unit(phi: &ScalarField, l: f64) -> ScalarField {
    let [delta, y] = [0, 1].map(|i| ScalarField::coord(2, i));
    let inner = phi.compose(&[&delta * (1.0 / l), y]).unwrap();
    let shifted = inner + delta.powi(2) * (1.0 / (l * l));
    let u = 1.0 - shifted;
    let outer = phi.compose(&[delta.powi(2) * (1.0 / (2.0 * l * l)), u]).unwrap();
    1.0 - outer
}

fn unit_interval(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v < 1.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("{name} = {v} must lie in (0, 1)")))
    }
}

/// ψ(μ, δ, y) for the committed calibration.
pub fn psi_gadget(mu: f64, delta: f64, y: f64) -> Result<f64> {
    unit_interval("μ", mu)?;
    unit_interval("δ", delta)?;
    Gadgets::standard().psi.eval(&[mu, delta, y])
}

/// Φ(δ, y) for the committed calibration.
pub fn phi_gadget(delta: f64, y: f64) -> Result<f64> {
    unit_interval("δ", delta)?;
    Gadgets::standard().phi.eval(&[delta, y])
}

/// Ψ(δ, y) for the committed calibration.
pub fn psi_unit_gadget(delta: f64, y: f64) -> Result<f64> {
    unit_interval("δ", delta)?;
    Gadgets::standard().psi_unit.eval(&[delta, y])
}

/// The function Φ smooths: `θ(y/δ)·δ/(1+y²) + (1 − θ(y/δ))·y` with the
/// `[0, 1]`-valued cutoff.
pub fn phi_presmoothing(delta: f64, y: f64) -> f64 {
    let th = theta_c1(2.0 * y / delta - 0.5, 1.0);
    th * delta / (1.0 + y * y) + (1.0 - th) * y
}

#[cfg(test)]
mod tests;

//! Fixed-width dual numbers and the scalar kernels shared by both evaluators.

use super::InfConv;

/// Largest ambient dimension a field may have.
pub const MAX_DIM: usize = 4;

#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct Dual {
    pub v: f64,
    pub g: [f64; MAX_DIM],
}

impl Dual {
    pub fn constant(v: f64) -> Self {
        Dual { v, g: [0.0; MAX_DIM] }
    }

    pub fn seed(v: f64, i: usize) -> Self {
        let mut g = [0.0; MAX_DIM];
        g[i] = 1.0;
        Dual { v, g }
    }

    /// `f(self)` given `f(v)` and `f'(v)`.
    #[inline]
    pub fn chain(self, v: f64, d: f64) -> Self {
        let mut g = [0.0; MAX_DIM];
        for i in 0..MAX_DIM {
            g[i] = if self.g[i] == 0.0 { 0.0 } else { d * self.g[i] };
        }
        Dual { v, g }
    }

    #[inline]
    pub fn add(self, o: Self) -> Self {
        let mut g = self.g;
        for i in 0..MAX_DIM {
            g[i] += o.g[i];
        }
        Dual { v: self.v + o.v, g }
    }

    #[inline]
    pub fn sub(self, o: Self) -> Self {
        let mut g = self.g;
        for i in 0..MAX_DIM {
            g[i] -= o.g[i];
        }
        Dual { v: self.v - o.v, g }
    }

    #[inline]
    pub fn mul(self, o: Self) -> Self {
        let mut g = [0.0; MAX_DIM];
        for i in 0..MAX_DIM {
            g[i] = self.v * o.g[i] + o.v * self.g[i];
        }
        Dual { v: self.v * o.v, g }
    }

    #[inline]
    pub fn div(self, o: Self) -> Self {
        let q = self.v / o.v;
        let mut g = [0.0; MAX_DIM];
        for i in 0..MAX_DIM {
            g[i] = (self.g[i] - q * o.g[i]) / o.v;
        }
        Dual { v: q, g }
    }
}

/// Algebraic sigmoid and its derivative, accurate in both tails.
///
/// For `kz < 0` the value `½(1 + kz/H)` with `H = √(1+k²z²)` would cancel, so
/// the algebraically equal `1/(2H(H − kz))` is used instead.
#[inline]
pub(crate) fn sigmoid(z: f64, k: f64) -> (f64, f64) {
    let kz = k * z;
    let h = 1f64.hypot(kz);
    if h.is_infinite() {
        return (if kz > 0.0 { 1.0 } else { 0.0 }, 0.0);
    }
    let v = if kz >= 0.0 { 0.5 * (1.0 + kz / h) } else { 0.5 / (h * (h - kz)) };
    (v, 0.5 * k / (h * h * h))
}

// Lower tail `sigmoid(-z)` for z ≥ 0 without cancellation.
#[inline]
fn upper_tail(z: f64, k: f64) -> f64 {
    sigmoid(-z, k).0
}

/// `sigmoid(a) − sigmoid(b)` without cancellation when both arguments share a sign.
#[inline]
pub(crate) fn sigmoid_gap(a: f64, b: f64, k: f64) -> f64 {
    if a >= 0.0 && b >= 0.0 {
        upper_tail(b, k) - upper_tail(a, k)
    } else {
        sigmoid(a, k).0 - sigmoid(b, k).0
    }
}

/// Value of the inf-convolution and the index of the minimizing sample.
pub(crate) fn inf_conv_value(ic: &InfConv, x: &[f64]) -> (f64, usize) {
    let mut best = f64::INFINITY;
    let mut arg = 0;
    for (i, (p, v)) in ic.points.iter().zip(&ic.values).enumerate() {
        let d: f64 = p.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        let c = v + ic.lip * d;
        if c < best {
            best = c;
            arg = i;
        }
    }
    (best, arg)
}

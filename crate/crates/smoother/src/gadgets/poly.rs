//! Dense one-variable polynomials, used as the pieces of C¹ splines.

use serde::{Deserialize, Serialize};

use crate::fields::ScalarField;

/// `Σ coeffs[i]·tⁱ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Poly {
    pub coeffs: Vec<f64>,
}

impl Poly {
    pub fn new(coeffs: Vec<f64>) -> Self {
        Poly { coeffs }
    }

    pub fn constant(c: f64) -> Self {
        Poly { coeffs: vec![c] }
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, c| acc * t + c)
    }

    pub fn derivative(&self) -> Poly {
        if self.coeffs.len() <= 1 {
            return Poly::constant(0.0);
        }
        Poly { coeffs: self.coeffs.iter().enumerate().skip(1).map(|(i, c)| i as f64 * c).collect() }
    }

    fn mul(&self, o: &Poly) -> Poly {
        let mut out = vec![0.0; self.coeffs.len() + o.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            for (j, b) in o.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Poly { coeffs: out }
    }

    /// `t ↦ self(a·t + b)`.
    pub fn compose_affine(&self, a: f64, b: f64) -> Poly {
        let inner = Poly::new(vec![b, a]);
        let Some((last, rest)) = self.coeffs.split_last() else { return Poly::constant(0.0) };
        let mut out = Poly::constant(*last);
        for c in rest.iter().rev() {
            out = out.mul(&inner);
            out.coeffs[0] += c;
        }
        out
    }

    /// `c·self`.
    pub fn scaled(&self, c: f64) -> Poly {
        Poly { coeffs: self.coeffs.iter().map(|x| x * c).collect() }
    }

    pub fn is_constant(&self) -> bool {
        self.coeffs.iter().skip(1).all(|c| *c == 0.0)
    }

    /// The polynomial applied to a field, by Horner's rule.
    pub fn apply(&self, t: &ScalarField) -> ScalarField {
        let dim = t.dim();
        let top = self.coeffs.iter().rposition(|c| *c != 0.0);
        let Some(top) = top else { return ScalarField::constant(dim, 0.0) };
        let mut acc = ScalarField::constant(dim, self.coeffs[top]);
        for c in self.coeffs[..top].iter().rev() {
            acc = &acc * t;
            if *c != 0.0 {
                acc = acc + *c;
            }
        }
        acc
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn affine_composition() {
        // (2t − 1)² = 4t² − 4t + 1
        let p = Poly::new(vec![0.0, 0.0, 1.0]).compose_affine(2.0, -1.0);
        assert_eq!(p.coeffs, vec![1.0, -4.0, 4.0]);
        let q = Poly::new(vec![1.0, 0.0, -3.0, 2.0]);
        let r = q.compose_affine(2.0, -0.5);
        for t in [-1.0, 0.0, 0.3, 0.9] {
            assert!((r.eval(t) - q.eval(2.0 * t - 0.5)).abs() < 1e-12);
        }
    }

    #[test]
    fn field_application_matches_eval() {
        let q = Poly::new(vec![1.0, 0.0, -3.0, 2.0]);
        let f = q.apply(&ScalarField::coord(1, 0));
        let d = f.eval_with_gradient(&[0.7]).unwrap();
        assert!((d.value - q.eval(0.7)).abs() < 1e-15);
        assert!((d.gradient[0] - q.derivative().eval(0.7)).abs() < 1e-14);
    }
}

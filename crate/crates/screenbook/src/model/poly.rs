use serde::{Deserialize, Serialize};

/// Polynomial with coefficients in ascending powers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Poly {
    coeffs: Vec<f64>,
}

impl Poly {
    pub fn new(coeffs: Vec<f64>) -> Self {
        let mut coeffs = coeffs;
        while coeffs.len() > 1 && *coeffs.last().unwrap() == 0.0 {
            coeffs.pop();
        }
        if coeffs.is_empty() {
            coeffs.push(0.0);
        }
        Self { coeffs }
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    /// Coefficient of `x^k` (zero beyond the degree).
    pub fn coeff(&self, k: usize) -> f64 {
        self.coeffs.get(k).copied().unwrap_or(0.0)
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
    }

    pub fn d1(&self, x: f64) -> f64 {
        self.coeffs.iter().enumerate().skip(1).rev().fold(0.0, |acc, (k, &c)| acc * x + k as f64 * c)
    }

    pub fn d2(&self, x: f64) -> f64 {
        self.coeffs.iter().enumerate().skip(2).rev().fold(0.0, |acc, (k, &c)| acc * x + (k * (k - 1)) as f64 * c)
    }

    pub fn sub(&self, other: &Poly) -> Poly {
        let n = self.coeffs.len().max(other.coeffs.len());
        Poly::new((0..n).map(|k| self.coeff(k) - other.coeff(k)).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn horner_and_derivatives() {
        let p = Poly::new(vec![1.0, -2.0, 0.5, 3.0]);
        let x = 0.7;
        assert!((p.eval(x) - (1.0 - 2.0 * x + 0.5 * x * x + 3.0 * x * x * x)).abs() < 1e-15);
        assert!((p.d1(x) - (-2.0 + x + 9.0 * x * x)).abs() < 1e-14);
        assert!((p.d2(x) - (1.0 + 18.0 * x)).abs() < 1e-14);
    }

    #[test]
    fn trailing_zeros_trimmed() {
        let p = Poly::new(vec![0.0, 1.0, 0.0, 0.0]);
        assert_eq!(p.degree(), 1);
        assert_eq!(Poly::new(vec![]).eval(3.0), 0.0);
    }
}

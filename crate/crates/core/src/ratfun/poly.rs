//! Dense real polynomials in the Laplace variable `s`.
//!
//! Coefficients are stored in ascending powers: `coeffs[k]` multiplies `s^k`.
//! The zero polynomial is the empty coefficient list; any nonzero polynomial
//! keeps a nonzero leading coefficient after trimming.

use num_complex::Complex64;
use std::fmt;

#[derive(Debug, Clone, PartialEq)]
pub struct Polynomial {
    coeffs: Vec<f64>,
}

impl Polynomial {
    /// Builds a polynomial from ascending-power coefficients, trimming
    /// high-order zeros.
    pub fn new(coeffs: impl Into<Vec<f64>>) -> Self {
        let mut p = Self {
            coeffs: coeffs.into(),
        };
        p.trim();
        p
    }

    pub fn zero() -> Self {
        Self { coeffs: Vec::new() }
    }

    pub fn one() -> Self {
        Self { coeffs: vec![1.0] }
    }

    pub fn constant(c: f64) -> Self {
        Self::new(vec![c])
    }

    /// The monomial `s`.
    pub fn s() -> Self {
        Self {
            coeffs: vec![0.0, 1.0],
        }
    }

    /// `(s - root)` as a polynomial.
    pub fn from_real_root(root: f64) -> Self {
        Self {
            coeffs: vec![-root, 1.0],
        }
    }

    /// Real quadratic `s^2 - 2 Re(r) s + |r|^2` carrying the conjugate pair
    /// `r`, `conj(r)`.
    pub fn from_conjugate_pair(root: Complex64) -> Self {
        Self {
            coeffs: vec![root.norm_sqr(), -2.0 * root.re, 1.0],
        }
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Degree of the polynomial; 0 for constants and for the zero polynomial.
    pub fn degree(&self) -> usize {
        self.coeffs.len().saturating_sub(1)
    }

    /// Coefficient of `s^k` (0 beyond the stored length).
    pub fn coeff(&self, k: usize) -> f64 {
        self.coeffs.get(k).copied().unwrap_or(0.0)
    }

    pub fn leading_coeff(&self) -> f64 {
        self.coeffs.last().copied().unwrap_or(0.0)
    }

    fn trim(&mut self) {
        while let Some(&c) = self.coeffs.last() {
            if c == 0.0 {
                self.coeffs.pop();
            } else {
                break;
            }
        }
    }

    /// Drops coefficients that are negligibly small relative to the largest
    /// one. Keeps deflation and cross-multiplication residue from masking
    /// structural zeros (e.g. a zero at the origin).
    pub fn scrub(&mut self, rel_tol: f64) {
        let scale = self.coeffs.iter().fold(0.0f64, |m, c| m.max(c.abs()));
        if scale > 0.0 {
            for c in &mut self.coeffs {
                if c.abs() < rel_tol * scale {
                    *c = 0.0;
                }
            }
        }
        self.trim();
    }

    /// Number of roots at the origin, i.e. the power of the common factor
    /// `s^k`.
    pub fn origin_multiplicity(&self) -> usize {
        self.coeffs.iter().take_while(|c| **c == 0.0).count()
    }

    /// Divides out `s^k`. Panics if the polynomial is not divisible.
    pub fn shift_down(&self, k: usize) -> Self {
        assert!(self.origin_multiplicity() >= k || self.is_zero());
        if self.is_zero() {
            return Self::zero();
        }
        Self::new(self.coeffs[k..].to_vec())
    }

    pub fn scale(&self, factor: f64) -> Self {
        Self::new(self.coeffs.iter().map(|c| c * factor).collect::<Vec<_>>())
    }

    pub fn add(&self, other: &Self) -> Self {
        let n = self.coeffs.len().max(other.coeffs.len());
        let mut out = vec![0.0; n];
        for (k, slot) in out.iter_mut().enumerate() {
            *slot = self.coeff(k) + other.coeff(k);
        }
        Self::new(out)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(-1.0))
    }

    pub fn mul(&self, other: &Self) -> Self {
        if self.is_zero() || other.is_zero() {
            return Self::zero();
        }
        let mut out = vec![0.0; self.coeffs.len() + other.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            for (j, b) in other.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Self::new(out)
    }

    /// Horner evaluation at a real point.
    pub fn eval(&self, x: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c)
    }

    /// Horner evaluation at a complex point.
    pub fn eval_complex(&self, s: Complex64) -> Complex64 {
        self.coeffs
            .iter()
            .rev()
            .fold(Complex64::ZERO, |acc, c| acc * s + c)
    }

    /// Sum of term magnitudes |c_k||s|^k; the natural scale for detecting
    /// catastrophic cancellation in `eval_complex`.
    pub fn eval_magnitude_scale(&self, s: Complex64) -> f64 {
        let r = s.norm();
        self.coeffs
            .iter()
            .rev()
            .fold(0.0f64, |acc, c| acc * r + c.abs())
    }

    /// Euclidean division: `self = quotient * divisor + remainder` with
    /// `deg(remainder) < deg(divisor)`. Panics on a zero divisor.
    pub fn div_rem(&self, divisor: &Self) -> (Self, Self) {
        assert!(!divisor.is_zero(), "division by the zero polynomial");
        if self.is_zero() || self.degree() < divisor.degree() {
            return (Self::zero(), self.clone());
        }
        let mut rem: Vec<f64> = self.coeffs.clone();
        let dn = divisor.degree();
        let lead = divisor.coeffs[dn];
        let qn = rem.len() - dn;
        let mut quotient = vec![0.0; qn];
        for k in (0..qn).rev() {
            let q = rem[k + dn] / lead;
            quotient[k] = q;
            for (j, &dc) in divisor.coeffs.iter().enumerate() {
                rem[k + j] -= q * dc;
            }
        }
        rem.truncate(dn);
        (Self::new(quotient), Self::new(rem))
    }

    /// Largest absolute coefficient.
    pub fn max_coeff(&self) -> f64 {
        self.coeffs.iter().fold(0.0f64, |m, c| m.max(c.abs()))
    }

    pub fn derivative(&self) -> Self {
        if self.coeffs.len() <= 1 {
            return Self::zero();
        }
        Self::new(
            self.coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(k, c)| c * k as f64)
                .collect::<Vec<_>>(),
        )
    }

    /// Deflates by the linear factor `(s - root)` via synthetic division,
    /// discarding the remainder. `root` should be a root of the polynomial.
    pub fn deflate_real(&self, root: f64) -> Self {
        let n = self.coeffs.len();
        if n <= 1 {
            return Self::zero();
        }
        let mut quotient = vec![0.0; n - 1];
        let mut carry = 0.0;
        for k in (0..n - 1).rev() {
            carry = self.coeffs[k + 1] + carry * root;
            quotient[k] = carry;
        }
        Self::new(quotient)
    }

    /// Deflates by the real quadratic carrying the conjugate pair at `root`.
    pub fn deflate_conjugate_pair(&self, root: Complex64) -> Self {
        let n = self.coeffs.len();
        if n <= 2 {
            return Self::zero();
        }
        let b = -2.0 * root.re;
        let c = root.norm_sqr();
        // long division by s^2 + b s + c, descending order
        let mut rem: Vec<f64> = self.coeffs.iter().rev().copied().collect();
        let mut quotient = vec![0.0; n - 2];
        for k in 0..n - 2 {
            let q = rem[k];
            quotient[k] = q;
            rem[k + 1] -= q * b;
            rem[k + 2] -= q * c;
        }
        quotient.reverse();
        Self::new(quotient)
    }
}

impl fmt::Display for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let mut first = true;
        for (k, &c) in self.coeffs.iter().enumerate().rev() {
            if c == 0.0 && self.coeffs.len() > 1 {
                continue;
            }
            let (sign, mag) = if c < 0.0 { ("-", -c) } else { ("+", c) };
            if first {
                if sign == "-" {
                    write!(f, "-")?;
                }
                first = false;
            } else {
                write!(f, " {sign} ")?;
            }
            match k {
                0 => write!(f, "{mag}")?,
                1 if mag == 1.0 => write!(f, "s")?,
                1 => write!(f, "{mag}s")?,
                _ if mag == 1.0 => write!(f, "s^{k}")?,
                _ => write!(f, "{mag}s^{k}")?,
            }
        }
        Ok(())
    }
}

//! Rational transfer functions `num(s)/den(s)` with real coefficients.
//!
//! Values are kept in a normalized form: monic denominator, common powers of
//! `s` trimmed from both sides, and negligible coefficients scrubbed.
//! Pole-zero cancellation is never implicit: arithmetic cancels only root
//! pairs that coincide within [`CANCEL_TOL`], so right-half-plane dynamics
//! cannot vanish by accident.

use super::poly::Polynomial;
use super::roots::{find_roots, RootSet, HURWITZ_TOL};
use super::RatfunError;
use num_complex::Complex64;
use std::fmt;

/// Relative tolerance under which a pole and a zero are considered the same
/// root and cancelled: `|p - z| < CANCEL_TOL * max(1, |p|)`.
pub const CANCEL_TOL: f64 = 1e-8;

/// Coefficients below this fraction of a polynomial's largest coefficient
/// are treated as arithmetic residue and zeroed.
const COEFF_SCRUB_TOL: f64 = 1e-13;

/// Denominators that agree coefficient-wise within this relative tolerance
/// are treated as one common denominator when adding. Without this, sums of
/// shares built over a single denominator (participation factors divided by
/// their sum) cross-multiply into repeated-root clusters that the
/// conservative cancellation tolerance can never collapse.
const DEN_UNIFY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct RationalTF {
    num: Polynomial,
    den: Polynomial,
}

/// Pole classification against the imaginary axis with the Hurwitz
/// tolerance band.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StabilityClass {
    Stable,
    /// At least one root within `±HURWITZ_TOL` of the imaginary axis and
    /// none beyond it.
    Marginal,
    Unstable,
}

impl RationalTF {
    /// Builds `num/den` in normalized form.
    pub fn new(num: Polynomial, den: Polynomial) -> Result<Self, RatfunError> {
        if den.is_zero() {
            return Err(RatfunError::DivisionByZeroTF);
        }
        let mut tf = Self { num, den };
        tf.normalize();
        Ok(tf)
    }

    pub fn from_coeffs(num: &[f64], den: &[f64]) -> Result<Self, RatfunError> {
        Self::new(Polynomial::new(num.to_vec()), Polynomial::new(den.to_vec()))
    }

    pub fn zero() -> Self {
        Self {
            num: Polynomial::zero(),
            den: Polynomial::one(),
        }
    }

    pub fn one() -> Self {
        Self {
            num: Polynomial::one(),
            den: Polynomial::one(),
        }
    }

    pub fn constant(c: f64) -> Self {
        Self {
            num: Polynomial::constant(c),
            den: Polynomial::one(),
        }
    }

    pub fn num(&self) -> &Polynomial {
        &self.num
    }

    pub fn den(&self) -> &Polynomial {
        &self.den
    }

    pub fn is_zero(&self) -> bool {
        self.num.is_zero()
    }

    /// `deg(num) <= deg(den)`; required of every controller.
    pub fn is_proper(&self) -> bool {
        self.is_zero() || self.num.degree() <= self.den.degree()
    }

    pub fn is_strictly_proper(&self) -> bool {
        self.is_zero() || self.num.degree() < self.den.degree()
    }

    /// `deg(den) - deg(num)`; negative for improper functions.
    pub fn relative_degree(&self) -> i64 {
        self.den.degree() as i64 - self.num.degree() as i64
    }

    fn normalize(&mut self) {
        if self.num.is_zero() {
            self.den = Polynomial::one();
            return;
        }
        self.num.scrub(COEFF_SCRUB_TOL);
        self.den.scrub(COEFF_SCRUB_TOL);
        if self.num.is_zero() {
            self.den = Polynomial::one();
            return;
        }
        let common_s = self
            .num
            .origin_multiplicity()
            .min(self.den.origin_multiplicity());
        if common_s > 0 {
            self.num = self.num.shift_down(common_s);
            self.den = self.den.shift_down(common_s);
        }
        let lead = self.den.leading_coeff();
        if lead != 1.0 {
            self.den = self.den.scale(1.0 / lead);
            self.num = self.num.scale(1.0 / lead);
        }
    }

    /// Cancels pole/zero pairs that coincide within [`CANCEL_TOL`].
    /// Best-effort: if root extraction fails to converge the value is
    /// returned unchanged (the uncancelled form is still exact).
    pub fn cancel_coincident(&self) -> Self {
        if self.num.is_zero() || self.num.degree() == 0 || self.den.degree() == 0 {
            return self.clone();
        }
        let (zeros, poles) = match (find_roots(&self.num), find_roots(&self.den)) {
            (Ok(z), Ok(p)) => (z, p),
            _ => return self.clone(),
        };
        let mut num_roots: Vec<Option<Complex64>> = zeros.roots().iter().copied().map(Some).collect();
        let mut matches: Vec<(Complex64, Complex64)> = Vec::new();
        for &p in poles.roots() {
            let nearest = num_roots
                .iter()
                .enumerate()
                .filter_map(|(i, z)| z.map(|z| (i, z)))
                .min_by(|a, b| {
                    (a.1 - p)
                        .norm()
                        .partial_cmp(&(b.1 - p).norm())
                        .unwrap_or(std::cmp::Ordering::Equal)
                });
            if let Some((i, z)) = nearest {
                if (z - p).norm() < CANCEL_TOL * p.norm().max(1.0) {
                    matches.push((z, p));
                    num_roots[i] = None;
                }
            }
        }
        if matches.is_empty() {
            return self.clone();
        }

        let mut num = self.num.clone();
        let mut den = self.den.clone();
        let mut pending: Vec<(Complex64, Complex64)> = Vec::new();
        for &(z, p) in &matches {
            if z.im == 0.0 && p.im == 0.0 {
                num = num.deflate_real(z.re);
                den = den.deflate_real(p.re);
            } else if z.im > 0.0 {
                pending.push((z, p));
            }
        }
        for (z, p) in pending {
            // complex cancellations must remove full conjugate pairs to keep
            // the coefficients real
            let has_mate = matches
                .iter()
                .any(|&(zm, _)| (zm - z.conj()).norm() <= 1e-6 * z.norm().max(1.0));
            if has_mate {
                num = num.deflate_conjugate_pair(z);
                den = den.deflate_conjugate_pair(p);
            }
        }
        let mut tf = Self { num, den };
        tf.normalize();
        tf
    }

    /// Parallel interconnection: exact rational sum over the least common
    /// denominator. Shared denominator factors (detected by a Euclidean GCD
    /// at representation-noise tolerance) are not duplicated; duplicating
    /// them would build repeated-root clusters that no conservative
    /// root-matching cancellation can collapse afterwards.
    pub fn add(&self, other: &Self) -> Self {
        let mut tf = if poly_close(&self.den, &other.den, DEN_UNIFY_TOL) {
            Self {
                num: self.num.add(&other.num),
                den: self.den.clone(),
            }
        } else {
            let g = poly_gcd_monic(&self.den, &other.den, DEN_UNIFY_TOL);
            if g.degree() > 0 {
                // lcm = den_a * (den_b / g)
                let qa = self.den.div_rem(&g).0;
                let qb = other.den.div_rem(&g).0;
                Self {
                    num: self.num.mul(&qb).add(&other.num.mul(&qa)),
                    den: self.den.mul(&qb),
                }
            } else {
                Self {
                    num: self.num.mul(&other.den).add(&other.num.mul(&self.den)),
                    den: self.den.mul(&other.den),
                }
            }
        };
        tf.normalize();
        tf.cancel_coincident()
    }

    pub fn neg(&self) -> Self {
        Self {
            num: self.num.scale(-1.0),
            den: self.den.clone(),
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.neg())
    }

    /// Series interconnection: rational product with coincident-root
    /// cancellation.
    pub fn mul(&self, other: &Self) -> Self {
        let mut tf = Self {
            num: self.num.mul(&other.num),
            den: self.den.mul(&other.den),
        };
        tf.normalize();
        tf.cancel_coincident()
    }

    pub fn scale(&self, k: f64) -> Self {
        let mut tf = Self {
            num: self.num.scale(k),
            den: self.den.clone(),
        };
        tf.normalize();
        tf
    }

    pub fn reciprocal(&self) -> Result<Self, RatfunError> {
        if self.num.is_zero() {
            return Err(RatfunError::DivisionByZeroTF);
        }
        let mut tf = Self {
            num: self.den.clone(),
            den: self.num.clone(),
        };
        tf.normalize();
        Ok(tf)
    }

    pub fn div(&self, other: &Self) -> Result<Self, RatfunError> {
        Ok(self.mul(&other.reciprocal()?))
    }

    /// Roots of the denominator.
    pub fn poles(&self) -> Result<RootSet, RatfunError> {
        find_roots(&self.den)
    }

    /// Roots of the numerator.
    pub fn zeros(&self) -> Result<RootSet, RatfunError> {
        find_roots(&self.num)
    }

    pub fn pole_class(&self) -> Result<StabilityClass, RatfunError> {
        Ok(classify(&self.poles()?))
    }

    /// True iff every pole satisfies `Re < -HURWITZ_TOL`. Marginal poles are
    /// not stable.
    pub fn is_stable(&self) -> Result<bool, RatfunError> {
        Ok(self.pole_class()? == StabilityClass::Stable)
    }

    /// Stable with all zeros at `Re < +HURWITZ_TOL`; a zero exactly at the
    /// origin counts as minimum-phase boundary.
    pub fn is_minimum_phase(&self) -> Result<bool, RatfunError> {
        if !self.is_stable()? {
            return Ok(false);
        }
        Ok(self.zeros()?.iter().all(|z| z.re < HURWITZ_TOL))
    }

    /// Evaluation at an arbitrary complex point.
    pub fn eval_complex(&self, s: Complex64) -> Result<Complex64, RatfunError> {
        let den_val = self.den.eval_complex(s);
        let scale = self.den.eval_magnitude_scale(s);
        if den_val.norm() <= 1e-12 * scale {
            return Err(RatfunError::EvaluationAtPole { location: s });
        }
        Ok(self.num.eval_complex(s) / den_val)
    }

    /// `a(jw)` over a frequency grid (rad/s).
    pub fn freq_response(&self, omegas: &[f64]) -> Result<Vec<Complex64>, RatfunError> {
        omegas
            .iter()
            .map(|&w| self.eval_complex(Complex64::new(0.0, w)))
            .collect()
    }

    /// `a(0)`; errors if the denominator vanishes at the origin.
    pub fn dc_gain(&self) -> Result<f64, RatfunError> {
        if self.is_zero() {
            return Ok(0.0);
        }
        let d0 = self.den.coeff(0);
        if d0 == 0.0 {
            return Err(RatfunError::PoleAtOrigin);
        }
        Ok(self.num.coeff(0) / d0)
    }

    /// `lim a(s), s -> inf`: 0 for strictly proper, the leading-coefficient
    /// ratio for biproper, error for improper.
    pub fn hf_gain(&self) -> Result<f64, RatfunError> {
        if self.is_zero() {
            return Ok(0.0);
        }
        if !self.is_proper() {
            return Err(RatfunError::ImproperTF);
        }
        if self.is_strictly_proper() {
            return Ok(0.0);
        }
        Ok(self.num.leading_coeff() / self.den.leading_coeff())
    }

    /// Coefficient-wise comparison in normalized form, relative to each
    /// polynomial's magnitude.
    pub fn approx_eq(&self, other: &Self, tol: f64) -> bool {
        poly_close(&self.num, &other.num, tol) && poly_close(&self.den, &other.den, tol)
    }
}

/// Monic Euclidean GCD with remainders treated as zero at `rel_tol` times
/// the dividend scale. Returns 1 when no common factor is found.
fn poly_gcd_monic(a: &Polynomial, b: &Polynomial, rel_tol: f64) -> Polynomial {
    let monic = |p: &Polynomial| -> Polynomial {
        let lead = p.leading_coeff();
        if lead != 0.0 && lead != 1.0 {
            p.scale(1.0 / lead)
        } else {
            p.clone()
        }
    };
    let mut hi = monic(a);
    let mut lo = monic(b);
    if hi.degree() < lo.degree() {
        std::mem::swap(&mut hi, &mut lo);
    }
    loop {
        if lo.is_zero() {
            return hi;
        }
        if lo.degree() == 0 {
            return Polynomial::one();
        }
        let (_, r) = hi.div_rem(&lo);
        if r.max_coeff() <= rel_tol * hi.max_coeff().max(1.0) {
            return lo;
        }
        hi = lo;
        lo = monic(&r);
    }
}

fn classify(roots: &RootSet) -> StabilityClass {
    let mut marginal = false;
    for r in roots.iter() {
        if r.re >= HURWITZ_TOL {
            return StabilityClass::Unstable;
        }
        if r.re >= -HURWITZ_TOL {
            marginal = true;
        }
    }
    if marginal {
        StabilityClass::Marginal
    } else {
        StabilityClass::Stable
    }
}

fn poly_close(a: &Polynomial, b: &Polynomial, tol: f64) -> bool {
    let n = a.coeffs().len().max(b.coeffs().len());
    let scale = a
        .coeffs()
        .iter()
        .chain(b.coeffs())
        .fold(0.0f64, |m, c| m.max(c.abs()))
        .max(1.0);
    (0..n).all(|k| (a.coeff(k) - b.coeff(k)).abs() <= tol * scale)
}

impl fmt::Display for RationalTF {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.den.degree() == 0 && self.den.coeff(0) == 1.0 {
            write!(f, "{}", self.num)
        } else {
            write!(f, "({}) / ({})", self.num, self.den)
        }
    }
}

impl std::ops::Add for &RationalTF {
    type Output = RationalTF;
    fn add(self, rhs: Self) -> RationalTF {
        RationalTF::add(self, rhs)
    }
}

impl std::ops::Sub for &RationalTF {
    type Output = RationalTF;
    fn sub(self, rhs: Self) -> RationalTF {
        RationalTF::sub(self, rhs)
    }
}

impl std::ops::Mul for &RationalTF {
    type Output = RationalTF;
    fn mul(self, rhs: Self) -> RationalTF {
        RationalTF::mul(self, rhs)
    }
}

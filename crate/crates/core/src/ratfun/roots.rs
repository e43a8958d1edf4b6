//! Polynomial root finding: companion-matrix eigenvalues refined by a few
//! Newton steps, with conjugate symmetry enforced on the result.

use super::poly::Polynomial;
use super::RatfunError;
use nalgebra::DMatrix;
use num_complex::Complex64;

/// Roots within this relative distance of the imaginary axis are treated as
/// marginal rather than stable/unstable.
pub const HURWITZ_TOL: f64 = 1e-9;

/// Conjugate pairing tolerance for real-coefficient root sets.
const CONJUGATE_TOL: f64 = 1e-9;

const NEWTON_MAX_ITERS: usize = 25;
const SCHUR_MAX_ITERS: usize = 200;

/// Roots of a real-coefficient polynomial, closed under conjugation.
#[derive(Debug, Clone, PartialEq)]
pub struct RootSet {
    roots: Vec<Complex64>,
}

impl RootSet {
    pub fn empty() -> Self {
        Self { roots: Vec::new() }
    }

    /// Builds a root set from raw roots, pairing near-conjugates and
    /// snapping near-real roots onto the axis.
    pub fn from_roots(roots: Vec<Complex64>) -> Self {
        Self {
            roots: symmetrize(roots),
        }
    }

    pub fn roots(&self) -> &[Complex64] {
        &self.roots
    }

    pub fn len(&self) -> usize {
        self.roots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.roots.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Complex64> {
        self.roots.iter()
    }

    /// Roots grouped with multiplicities; roots closer than
    /// `tol * max(1, |r|)` are clustered.
    pub fn with_multiplicity(&self, tol: f64) -> Vec<(Complex64, usize)> {
        let mut out: Vec<(Complex64, usize)> = Vec::new();
        for &r in &self.roots {
            match out
                .iter_mut()
                .find(|(c, _)| (*c - r).norm() <= tol * c.norm().max(1.0))
            {
                Some((_, m)) => *m += 1,
                None => out.push((r, 1)),
            }
        }
        out
    }

    /// Roots strictly inside the open right half-plane (beyond the Hurwitz
    /// tolerance band).
    pub fn rhp(&self) -> Vec<Complex64> {
        self.roots
            .iter()
            .copied()
            .filter(|r| r.re > HURWITZ_TOL)
            .collect()
    }

    pub fn max_real_part(&self) -> Option<f64> {
        self.roots.iter().map(|r| r.re).fold(None, |m, re| {
            Some(match m {
                Some(v) => v.max(re),
                None => re,
            })
        })
    }

    pub fn is_conjugate_closed(&self, tol: f64) -> bool {
        self.roots.iter().all(|r| {
            r.im.abs() <= tol
                || self
                    .roots
                    .iter()
                    .any(|c| (c - r.conj()).norm() <= tol * r.norm().max(1.0))
        })
    }
}

impl<'a> IntoIterator for &'a RootSet {
    type Item = &'a Complex64;
    type IntoIter = std::slice::Iter<'a, Complex64>;

    fn into_iter(self) -> Self::IntoIter {
        self.roots.iter()
    }
}

/// All roots of `p`, with conjugate symmetry enforced.
///
/// Roots at the origin are split off exactly; the deflated polynomial goes
/// through the companion-matrix eigensolve and a Newton polish.
pub fn find_roots(p: &Polynomial) -> Result<RootSet, RatfunError> {
    if p.is_zero() || p.degree() == 0 {
        return Ok(RootSet::empty());
    }

    let at_origin = p.origin_multiplicity();
    let reduced = p.shift_down(at_origin);
    let mut roots = vec![Complex64::ZERO; at_origin];

    match reduced.degree() {
        0 => {}
        1 => {
            // linear factors are solved exactly
            let c = reduced.coeffs();
            roots.push(Complex64::new(-c[0] / c[1], 0.0));
        }
        2 => {
            roots.extend(quadratic_roots(reduced.coeffs()));
        }
        _ => {
            let eig = companion_eigenvalues(&reduced)?;
            roots.extend(eig.into_iter().map(|r| newton_polish(&reduced, r)));
        }
    }

    Ok(RootSet::from_roots(roots))
}

fn quadratic_roots(c: &[f64]) -> Vec<Complex64> {
    let (c0, c1, c2) = (c[0], c[1], c[2]);
    let disc = c1 * c1 - 4.0 * c2 * c0;
    if disc >= 0.0 {
        // avoid cancellation: compute the larger-magnitude root first
        let q = -0.5 * (c1 + c1.signum() * disc.sqrt());
        let r1 = if q != 0.0 { c0 / q } else { 0.0 };
        let r2 = if c2 != 0.0 { q / c2 } else { r1 };
        vec![Complex64::new(r1, 0.0), Complex64::new(r2, 0.0)]
    } else {
        let re = -c1 / (2.0 * c2);
        let im = (-disc).sqrt() / (2.0 * c2);
        vec![Complex64::new(re, im.abs()), Complex64::new(re, -im.abs())]
    }
}

fn companion_eigenvalues(p: &Polynomial) -> Result<Vec<Complex64>, RatfunError> {
    let n = p.degree();
    let lead = p.leading_coeff();
    let mut m = DMatrix::<f64>::zeros(n, n);
    for i in 1..n {
        m[(i, i - 1)] = 1.0;
    }
    for i in 0..n {
        m[(i, n - 1)] = -p.coeff(i) / lead;
    }
    let schur = nalgebra::linalg::Schur::try_new(m, f64::EPSILON, SCHUR_MAX_ITERS)
        .ok_or(RatfunError::ConvergenceFailure)?;
    Ok(schur.complex_eigenvalues().iter().copied().collect())
}

/// A few Newton iterations on the original polynomial; falls back to the
/// starting point when the correction does not improve the residual.
fn newton_polish(p: &Polynomial, start: Complex64) -> Complex64 {
    let dp = p.derivative();
    let mut x = start;
    let mut best = x;
    let mut best_res = p.eval_complex(x).norm();
    for _ in 0..NEWTON_MAX_ITERS {
        let f = p.eval_complex(x);
        let d = dp.eval_complex(x);
        if d.norm() == 0.0 {
            break;
        }
        let step = f / d;
        x -= step;
        let res = p.eval_complex(x).norm();
        if res < best_res {
            best_res = res;
            best = x;
        }
        if step.norm() <= 1e-15 * x.norm().max(1.0) {
            break;
        }
    }
    best
}

/// Pairs near-conjugate roots and averages them into exact conjugates;
/// near-real roots collapse onto the real axis.
fn symmetrize(mut roots: Vec<Complex64>) -> Vec<Complex64> {
    for r in &mut roots {
        if r.im.abs() <= CONJUGATE_TOL * r.norm().max(1.0) {
            r.im = 0.0;
        }
    }
    let mut out: Vec<Complex64> = Vec::with_capacity(roots.len());
    let mut used = vec![false; roots.len()];
    for i in 0..roots.len() {
        if used[i] {
            continue;
        }
        let r = roots[i];
        if r.im == 0.0 {
            out.push(r);
            used[i] = true;
            continue;
        }
        let mate = (i + 1..roots.len())
            .filter(|&j| !used[j])
            .min_by(|&a, &b| {
                let da = (roots[a] - r.conj()).norm();
                let db = (roots[b] - r.conj()).norm();
                da.partial_cmp(&db).unwrap()
            })
            .filter(|&j| (roots[j] - r.conj()).norm() <= 1e-6 * r.norm().max(1.0));
        match mate {
            Some(j) => {
                let re = 0.5 * (r.re + roots[j].re);
                let im = 0.5 * (r.im.abs() + roots[j].im.abs());
                out.push(Complex64::new(re, im));
                out.push(Complex64::new(re, -im));
                used[i] = true;
                used[j] = true;
            }
            None => {
                // unpaired complex root: keep as-is (caller sees asymmetry)
                out.push(r);
                used[i] = true;
            }
        }
    }
    out.sort_by(|a, b| {
        (a.re, a.im)
            .partial_cmp(&(b.re, b.im))
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    out
}

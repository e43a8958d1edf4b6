//! Time- and frequency-domain evaluation built on a controllable-canonical
//! state-space realization integrated with fixed-step RK4.

use super::tf::RationalTF;
use super::RatfunError;
use num_complex::Complex64;

/// Default integration step, seconds.
pub const DEFAULT_DT: f64 = 1e-3;
/// Default simulation horizon, seconds.
pub const DEFAULT_T_END: f64 = 60.0;

/// State-norm bound beyond which a simulation is aborted as diverging.
const OVERFLOW_GUARD: f64 = 1e12;

/// A uniformly sampled scalar trace.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    pub t: Vec<f64>,
    pub y: Vec<f64>,
}

impl TimeSeries {
    pub fn dt(&self) -> f64 {
        if self.t.len() >= 2 {
            self.t[1] - self.t[0]
        } else {
            0.0
        }
    }

    pub fn last(&self) -> f64 {
        *self.y.last().unwrap_or(&0.0)
    }
}

/// Single-input single-output realization `x' = Ax + Bu`, `y = Cx + Du`.
///
/// The controllable canonical form is balanced by scaling the chain states
/// with the characteristic frequency `w0 = |a0|^(1/n)`, which keeps the
/// companion coefficients near unit magnitude for the pole spreads that
/// occur here.
#[derive(Debug, Clone)]
pub struct StateSpace {
    a: Vec<Vec<f64>>,
    b: Vec<f64>,
    c: Vec<f64>,
    d: f64,
}

impl StateSpace {
    pub fn controllable_canonical(tf: &RationalTF) -> Result<Self, RatfunError> {
        if !tf.is_proper() {
            return Err(RatfunError::ImproperTF);
        }
        let n = tf.den().degree();
        if n == 0 {
            // pure gain
            return Ok(Self {
                a: Vec::new(),
                b: Vec::new(),
                c: Vec::new(),
                d: tf.num().coeff(0) / tf.den().coeff(0),
            });
        }
        // den is monic after normalization
        let a_coeffs: Vec<f64> = (0..n).map(|k| tf.den().coeff(k)).collect();
        let d = if tf.num().degree() == n {
            tf.num().leading_coeff()
        } else {
            0.0
        };
        let a0 = a_coeffs[0].abs();
        let w0 = if a0 > 0.0 {
            a0.powf(1.0 / n as f64).clamp(1e-6, 1e6)
        } else {
            1.0
        };

        let mut a = vec![vec![0.0; n]; n];
        for (i, row) in a.iter_mut().enumerate().take(n - 1) {
            row[i + 1] = w0;
        }
        for k in 0..n {
            a[n - 1][k] = -a_coeffs[k] * w0.powi(k as i32 + 1 - n as i32);
        }
        let mut b = vec![0.0; n];
        b[n - 1] = 1.0;
        let c: Vec<f64> = (0..n)
            .map(|k| (tf.num().coeff(k) - d * a_coeffs[k]) * w0.powi(k as i32 + 1 - n as i32))
            .collect();
        Ok(Self { a, b, c, d })
    }

    pub fn dim(&self) -> usize {
        self.b.len()
    }

    pub fn output(&self, x: &[f64], u: f64) -> f64 {
        self.c.iter().zip(x).map(|(c, x)| c * x).sum::<f64>() + self.d * u
    }

    pub fn derivative_into(&self, x: &[f64], u: f64, dx: &mut [f64]) {
        for (i, row) in self.a.iter().enumerate() {
            dx[i] = row.iter().zip(x).map(|(a, x)| a * x).sum::<f64>() + self.b[i] * u;
        }
    }
}

/// One RK4 step of `x' = f(x)` with the input held constant over the cell.
/// Exact treatment for piecewise-constant inputs that switch on cell
/// boundaries.
pub fn rk4_step<F>(x: &mut [f64], dt: f64, mut deriv: F, scratch: &mut Rk4Scratch)
where
    F: FnMut(&[f64], &mut [f64]),
{
    let n = x.len();
    scratch.resize(n);
    let Rk4Scratch { k1, k2, k3, k4, tmp } = scratch;

    deriv(x, k1);
    for i in 0..n {
        tmp[i] = x[i] + 0.5 * dt * k1[i];
    }
    deriv(tmp, k2);
    for i in 0..n {
        tmp[i] = x[i] + 0.5 * dt * k2[i];
    }
    deriv(tmp, k3);
    for i in 0..n {
        tmp[i] = x[i] + dt * k3[i];
    }
    deriv(tmp, k4);
    for i in 0..n {
        x[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
}

#[derive(Debug, Default)]
pub struct Rk4Scratch {
    k1: Vec<f64>,
    k2: Vec<f64>,
    k3: Vec<f64>,
    k4: Vec<f64>,
    tmp: Vec<f64>,
}

impl Rk4Scratch {
    fn resize(&mut self, n: usize) {
        for v in [
            &mut self.k1,
            &mut self.k2,
            &mut self.k3,
            &mut self.k4,
            &mut self.tmp,
        ] {
            v.resize(n, 0.0);
        }
    }
}

fn state_ok(x: &[f64]) -> bool {
    x.iter().all(|v| v.is_finite() && v.abs() < OVERFLOW_GUARD)
}

/// Unit step response on the grid `0, dt, ..., ~t_end`.
pub fn step_response(tf: &RationalTF, t_end: f64, dt: f64) -> Result<TimeSeries, RatfunError> {
    driven_response(tf, t_end, dt, 1.0)
}

fn driven_response(
    tf: &RationalTF,
    t_end: f64,
    dt: f64,
    u: f64,
) -> Result<TimeSeries, RatfunError> {
    assert!(dt > 0.0 && t_end > 0.0, "grid must be positive");
    let ss = StateSpace::controllable_canonical(tf)?;
    let steps = (t_end / dt).round() as usize;
    let mut x = vec![0.0; ss.dim()];
    let mut t = Vec::with_capacity(steps + 1);
    let mut y = Vec::with_capacity(steps + 1);
    let mut scratch = Rk4Scratch::default();
    t.push(0.0);
    y.push(ss.output(&x, u));
    for k in 1..=steps {
        rk4_step(&mut x, dt, |x, dx| ss.derivative_into(x, u, dx), &mut scratch);
        if !state_ok(&x) {
            return Err(RatfunError::UnstableSimulation);
        }
        t.push(k as f64 * dt);
        y.push(ss.output(&x, u));
    }
    Ok(TimeSeries { t, y })
}

/// Impulse response; requires a strictly proper function (a biproper one
/// carries a Dirac term).
pub fn impulse_response(tf: &RationalTF, t_end: f64, dt: f64) -> Result<TimeSeries, RatfunError> {
    assert!(dt > 0.0 && t_end > 0.0, "grid must be positive");
    if !tf.is_strictly_proper() {
        return Err(RatfunError::ImproperTF);
    }
    let ss = StateSpace::controllable_canonical(tf)?;
    let steps = (t_end / dt).round() as usize;
    let mut x = ss.b.clone();
    let mut t = Vec::with_capacity(steps + 1);
    let mut y = Vec::with_capacity(steps + 1);
    let mut scratch = Rk4Scratch::default();
    t.push(0.0);
    y.push(ss.output(&x, 0.0));
    for k in 1..=steps {
        rk4_step(&mut x, dt, |x, dx| ss.derivative_into(x, 0.0, dx), &mut scratch);
        if !state_ok(&x) {
            return Err(RatfunError::UnstableSimulation);
        }
        t.push(k as f64 * dt);
        y.push(ss.output(&x, 0.0));
    }
    Ok(TimeSeries { t, y })
}

/// Smallest `w` with `|L(jw)| = 1`, located on a log grid and refined by
/// bisection to 1e-6 relative tolerance.
pub fn crossover_frequency(loop_gain: &RationalTF) -> Result<f64, RatfunError> {
    const W_MIN: f64 = 1e-6;
    const W_MAX: f64 = 1e6;
    const PER_DECADE: usize = 60;

    let decades = (W_MAX / W_MIN).log10();
    let n = (decades * PER_DECADE as f64) as usize + 1;
    let gain_at = |w: f64| -> Result<f64, RatfunError> {
        Ok(loop_gain.eval_complex(Complex64::new(0.0, w))?.norm())
    };

    let mut prev_w = W_MIN;
    let mut prev_g = gain_at(prev_w)?;
    for k in 1..n {
        let w = W_MIN * 10f64.powf(k as f64 * decades / (n - 1) as f64);
        let g = gain_at(w)?;
        if (prev_g - 1.0) == 0.0 {
            return Ok(prev_w);
        }
        if (prev_g - 1.0) * (g - 1.0) < 0.0 {
            // bisect in log(w)
            let (mut lo, mut hi) = (prev_w, w);
            let mut g_lo = prev_g;
            while hi / lo > 1.0 + 1e-6 {
                let mid = (lo * hi).sqrt();
                let g_mid = gain_at(mid)?;
                if (g_lo - 1.0) * (g_mid - 1.0) <= 0.0 {
                    hi = mid;
                } else {
                    lo = mid;
                    g_lo = g_mid;
                }
            }
            return Ok((lo * hi).sqrt());
        }
        prev_w = w;
        prev_g = g;
    }
    Err(RatfunError::NoCrossover)
}

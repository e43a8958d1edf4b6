//! Dynamic-participation-factor synthesis: build the FCR-D design target,
//! split it across a heterogeneous fleet via all-pass (Blaschke) factors,
//! derive the per-device controllers, and audit the interconnection for
//! internal stability.

use crate::ratfun::tf::CANCEL_TOL;
use crate::ratfun::{Polynomial, RatfunError, RationalTF, RootSet, HURWITZ_TOL};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::is_pos;

/// Relative interpolation tolerance: `|L_i(z_j)| < INTERPOLATION_TOL * |F(z_j)|`.
pub const INTERPOLATION_TOL: f64 = 1e-7;

/// Roll-off time constant used to make an improper controller proper, s.
pub const ROLLOFF_TC: f64 = 10e-3;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SynthesisError {
    #[error("invalid design parameters: {0}")]
    InvalidParams(String),
    #[error("Blaschke factor requires open right-half-plane zeros, got {zero}")]
    NotRHPZero { zero: Complex64 },
    #[error("participation weights must sum to 1, got {sum}")]
    WeightsNotNormalized { sum: f64 },
    #[error("plant '{id}' is not stable; pre-stabilize it with local feedback before assigning participation factors")]
    UnstablePlant { id: String },
    #[error("participation-factor sum has right-half-plane zeros {rhp_zeros:?}; normalization refused")]
    SumNotMinimumPhase { rhp_zeros: Vec<Complex64> },
    #[error("controller for '{id}' is unstable")]
    UnstableController { id: String },
    #[error("controller for '{id}' is improper after the roll-off fix")]
    ImproperController { id: String },
    #[error("no plant named '{id}' in the device list")]
    DeviceMismatch { id: String },
    #[error(transparent)]
    Ratfun(#[from] RatfunError),
}

/// Reserve product a device participates in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    /// Frequency containment reserve (slow, conventional).
    Fcr,
    /// Fast frequency reserve (fast complement).
    Ffr,
}

impl std::fmt::Display for Role {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Role::Fcr => write!(f, "fcr"),
            Role::Ffr => write!(f, "ffr"),
        }
    }
}

/// The FCR-D design target `F(s) = R_fcr * filter(s)` with a unity-dc,
/// stable, minimum-phase filter.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignTarget {
    r_fcr_mw_per_hz: f64,
    zero_tc_s: f64,
    pole_tcs_s: (f64, f64),
    filter: RationalTF,
}

impl DesignTarget {
    pub fn r_fcr(&self) -> f64 {
        self.r_fcr_mw_per_hz
    }

    pub fn zero_tc_s(&self) -> f64 {
        self.zero_tc_s
    }

    pub fn pole_tcs_s(&self) -> (f64, f64) {
        self.pole_tcs_s
    }

    pub fn filter(&self) -> &RationalTF {
        &self.filter
    }

    /// The full target `R_fcr * filter(s)`, MW/Hz.
    pub fn full(&self) -> RationalTF {
        self.filter.scale(self.r_fcr_mw_per_hz)
    }
}

/// Builds `F(s) = R (zero_tc s + 1) / ((p1 s + 1)(p2 s + 1))`.
pub fn make_design_target(
    r_fcr_mw_per_hz: f64,
    zero_tc_s: f64,
    pole_tcs_s: (f64, f64),
) -> Result<DesignTarget, SynthesisError> {
    if !is_pos(r_fcr_mw_per_hz) {
        return Err(SynthesisError::InvalidParams(format!(
            "r_fcr must be > 0, got {r_fcr_mw_per_hz}"
        )));
    }
    for (name, tc) in [
        ("zero_tc", zero_tc_s),
        ("pole_tc_1", pole_tcs_s.0),
        ("pole_tc_2", pole_tcs_s.1),
    ] {
        if !is_pos(tc) {
            return Err(SynthesisError::InvalidParams(format!(
                "{name} must be > 0, got {tc}"
            )));
        }
    }
    let num = Polynomial::new(vec![1.0, zero_tc_s]);
    let den =
        Polynomial::new(vec![1.0, pole_tcs_s.0]).mul(&Polynomial::new(vec![1.0, pole_tcs_s.1]));
    let filter = RationalTF::new(num, den).expect("nonzero denominator");
    Ok(DesignTarget {
        r_fcr_mw_per_hz,
        zero_tc_s,
        pole_tcs_s,
        filter,
    })
}

/// Pole placement for the Blaschke factors of one device.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum PoleChoice {
    /// `p_j = z_j`: mirror each zero across the imaginary axis, making the
    /// factor all-pass.
    #[default]
    MirrorZeros,
    /// Explicit positive real poles, one per zero.
    Custom(Vec<f64>),
}

/// A plant entering participation-factor design.
#[derive(Debug, Clone)]
pub struct PlantInput {
    pub id: String,
    pub tf: RationalTF,
    /// Willingness/marginal-cost weight; must sum to 1 within each role.
    pub weight: f64,
    pub poles: PoleChoice,
}

impl PlantInput {
    pub fn new(id: impl Into<String>, tf: RationalTF, weight: f64) -> Self {
        Self {
            id: id.into(),
            tf,
            weight,
            poles: PoleChoice::MirrorZeros,
        }
    }
}

/// One device's dynamic participation factor.
#[derive(Debug, Clone)]
pub struct DpfEntry {
    pub device: String,
    pub role: Role,
    pub weight: f64,
    pub dpf: RationalTF,
}

/// The fleet's participation factors; `normalized` marks a set whose sum is
/// the exact rational identity 1.
#[derive(Debug, Clone)]
pub struct DpfSet {
    entries: Vec<DpfEntry>,
    normalized: bool,
}

impl DpfSet {
    pub fn new(entries: Vec<DpfEntry>) -> Self {
        Self {
            entries,
            normalized: false,
        }
    }

    pub fn entries(&self) -> &[DpfEntry] {
        &self.entries
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn get(&self, device: &str) -> Option<&DpfEntry> {
        self.entries.iter().find(|e| e.device == device)
    }

    /// Rational sum of all participation factors.
    pub fn sum(&self) -> RationalTF {
        self.entries
            .iter()
            .fold(RationalTF::zero(), |acc, e| acc.add(&e.dpf))
    }
}

/// Blaschke product `prod_j (z_j - s)/(s + p_j)` over prescribed
/// right-half-plane zeros and explicit positive real poles.
pub fn blaschke_product(zeros: &RootSet, poles: &[f64]) -> Result<RationalTF, SynthesisError> {
    if zeros.len() != poles.len() {
        return Err(SynthesisError::InvalidParams(format!(
            "{} zeros but {} poles",
            zeros.len(),
            poles.len()
        )));
    }
    for &p in poles {
        if !is_pos(p) {
            return Err(SynthesisError::InvalidParams(format!(
                "Blaschke poles must be strictly positive reals, got {p}"
            )));
        }
    }
    let num = blaschke_numerator(zeros)?;
    let den = poles.iter().fold(Polynomial::one(), |acc, &p| {
        acc.mul(&Polynomial::from_real_root(-p))
    });
    Ok(RationalTF::new(num, den).expect("nonzero denominator"))
}

/// Blaschke product with mirrored poles `p_j = z_j`; all-pass by
/// construction and well-defined for conjugate-pair zeros.
pub fn blaschke_mirror(zeros: &RootSet) -> Result<RationalTF, SynthesisError> {
    let num = blaschke_numerator(zeros)?;
    let mut den = Polynomial::one();
    for &z in zeros.iter() {
        if z.im == 0.0 {
            den = den.mul(&Polynomial::from_real_root(-z.re));
        } else if z.im > 0.0 {
            den = den.mul(&Polynomial::from_conjugate_pair(-z));
        }
    }
    Ok(RationalTF::new(num, den).expect("nonzero denominator"))
}

fn blaschke_numerator(zeros: &RootSet) -> Result<Polynomial, SynthesisError> {
    let mut num = Polynomial::one();
    for &z in zeros.iter() {
        if z.re <= HURWITZ_TOL || !z.re.is_finite() {
            return Err(SynthesisError::NotRHPZero { zero: z });
        }
        if z.im == 0.0 {
            // (z - s)
            num = num.mul(&Polynomial::new(vec![z.re, -1.0]));
        } else if z.im > 0.0 {
            // (z - s)(conj(z) - s) is the same real quadratic as
            // (s - z)(s - conj(z)); the conjugate is consumed here
            num = num.mul(&Polynomial::from_conjugate_pair(z));
        }
    }
    Ok(num)
}

fn blaschke_for(plant: &PlantInput) -> Result<RationalTF, SynthesisError> {
    let rhp = RootSet::from_roots(plant.tf.zeros()?.rhp());
    match &plant.poles {
        PoleChoice::MirrorZeros => blaschke_mirror(&rhp),
        PoleChoice::Custom(poles) => blaschke_product(&rhp, poles),
    }
}

fn check_weights(plants: &[PlantInput]) -> Result<(), SynthesisError> {
    let sum: f64 = plants.iter().map(|p| p.weight).sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(SynthesisError::WeightsNotNormalized { sum });
    }
    for p in plants {
        if p.weight < 0.0 {
            return Err(SynthesisError::InvalidParams(format!(
                "weight for '{}' must be nonnegative, got {}",
                p.id, p.weight
            )));
        }
    }
    Ok(())
}

fn check_stable(plant: &PlantInput) -> Result<(), SynthesisError> {
    if !plant.tf.is_stable()? {
        return Err(SynthesisError::UnstablePlant {
            id: plant.id.clone(),
        });
    }
    Ok(())
}

/// FCR participation factors `c_i = k_i B_i(s)/B_i(0)`: dc share `k_i`,
/// carrying every right-half-plane zero of the plant.
pub fn fcr_dpfs(plants: &[PlantInput]) -> Result<Vec<DpfEntry>, SynthesisError> {
    check_weights(plants)?;
    let mut out = Vec::with_capacity(plants.len());
    for plant in plants {
        check_stable(plant)?;
        let b = blaschke_for(plant)?;
        let b0 = b.dc_gain()?;
        out.push(DpfEntry {
            device: plant.id.clone(),
            role: Role::Fcr,
            weight: plant.weight,
            dpf: b.scale(plant.weight / b0),
        });
    }
    Ok(out)
}

/// FFR participation factors `c_i = k_i (B_i(s)/B_i(inf)) (1 - sum_fcr)`:
/// the fast complement of the FCR share, again carrying each plant's
/// right-half-plane zeros. `B_i(inf)` is negative for an odd zero count.
pub fn ffr_dpfs(
    plants: &[PlantInput],
    fcr_sum: &RationalTF,
) -> Result<Vec<DpfEntry>, SynthesisError> {
    if plants.is_empty() {
        return Ok(Vec::new());
    }
    check_weights(plants)?;
    let complement = RationalTF::one().sub(fcr_sum);
    let mut out = Vec::with_capacity(plants.len());
    for plant in plants {
        check_stable(plant)?;
        let b = blaschke_for(plant)?;
        let b_inf = b.hf_gain()?;
        let dpf = b.scale(plant.weight / b_inf).mul(&complement);
        out.push(DpfEntry {
            device: plant.id.clone(),
            role: Role::Ffr,
            weight: plant.weight,
            dpf,
        });
    }
    Ok(out)
}

/// Final normalization `c_i' = c_i / sum(c)`, turning the set into an exact
/// rational partition of unity. Refused when the sum is not stable and
/// minimum-phase, since the division would introduce unstable poles.
pub fn normalize_dpfs(set: &DpfSet) -> Result<DpfSet, SynthesisError> {
    let sum = set.sum();
    let stable = sum.is_stable()?;
    let rhp_zeros = sum.zeros()?.rhp();
    if !stable || !rhp_zeros.is_empty() {
        return Err(SynthesisError::SumNotMinimumPhase { rhp_zeros });
    }
    let mut entries = Vec::with_capacity(set.entries.len());
    for e in &set.entries {
        entries.push(DpfEntry {
            device: e.device.clone(),
            role: e.role,
            weight: e.weight,
            dpf: e.dpf.div(&sum)?,
        });
    }
    Ok(DpfSet {
        entries,
        normalized: true,
    })
}

/// Mismatch `|sum c_i(jw) - 1|` over a frequency grid.
#[derive(Debug, Clone)]
pub struct MismatchReport {
    pub omegas: Vec<f64>,
    pub mismatch: Vec<f64>,
    /// Largest grid frequency below which the mismatch stays under 1 %.
    pub omega_one_percent: Option<f64>,
}

pub fn matching_mismatch(set: &DpfSet, omegas: &[f64]) -> MismatchReport {
    let sum = set.sum();
    let mismatch: Vec<f64> = omegas
        .iter()
        .map(|&w| match sum.eval_complex(Complex64::new(0.0, w)) {
            Ok(v) => (v - 1.0).norm(),
            Err(_) => f64::INFINITY,
        })
        .collect();
    let mut omega_one_percent = None;
    for (w, m) in omegas.iter().zip(&mismatch) {
        if *m < 0.01 {
            omega_one_percent = Some(*w);
        } else {
            break;
        }
    }
    MismatchReport {
        omegas: omegas.to_vec(),
        mismatch,
        omega_one_percent,
    }
}

/// A synthesized controller and the properness fix applied to it.
#[derive(Debug, Clone)]
pub struct SynthesizedController {
    pub device: String,
    pub tf: RationalTF,
    /// Number of `1/(ROLLOFF_TC s + 1)` poles added to make `K_i` proper.
    pub rolloff_poles_added: usize,
}

/// Per-device controllers `K_i = c_i F / H_i`. The Blaschke zeros inside
/// `c_i` cancel the plant inversion's unstable dynamics exactly; anything
/// left unstable is an error.
pub fn controllers_from_dpfs(
    set: &DpfSet,
    target: &DesignTarget,
    plants: &[PlantInput],
) -> Result<Vec<SynthesizedController>, SynthesisError> {
    let f = target.full();
    let mut out = Vec::with_capacity(set.entries.len());
    for entry in &set.entries {
        let plant = plants
            .iter()
            .find(|p| p.id == entry.device)
            .ok_or_else(|| SynthesisError::DeviceMismatch {
                id: entry.device.clone(),
            })?;
        let mut k = entry.dpf.mul(&f).div(&plant.tf)?;
        let mut rolloff_poles_added = 0;
        while !k.is_proper() {
            let rolloff = RationalTF::from_coeffs(&[1.0], &[1.0, ROLLOFF_TC])?;
            k = k.mul(&rolloff);
            rolloff_poles_added += 1;
        }
        if !k.is_proper() {
            return Err(SynthesisError::ImproperController {
                id: entry.device.clone(),
            });
        }
        if !k.is_zero() && !k.is_stable()? {
            return Err(SynthesisError::UnstableController {
                id: entry.device.clone(),
            });
        }
        out.push(SynthesizedController {
            device: entry.device.clone(),
            tf: k,
            rolloff_poles_added,
        });
    }
    Ok(out)
}

/// One device's plant/controller pair inside the closed loop.
#[derive(Debug, Clone)]
pub struct DeviceLoop {
    pub id: String,
    pub plant: RationalTF,
    pub controller: RationalTF,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CancellationKind {
    /// An unstable plant pole shadowed by a controller zero.
    Pole,
    /// A non-minimum-phase plant zero shadowed by a controller pole.
    Zero,
}

impl std::fmt::Display for CancellationKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CancellationKind::Pole => write!(f, "pole"),
            CancellationKind::Zero => write!(f, "zero"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Cancellation {
    pub device: String,
    pub root: Complex64,
    pub kind: CancellationKind,
}

#[derive(Debug, Clone)]
pub struct InterpolationViolation {
    pub device: String,
    pub zero: Complex64,
    /// `|L_i(z_j)|` at the plant zero; should vanish.
    pub magnitude: f64,
}

/// Internal-stability audit of the interconnection.
#[derive(Debug, Clone)]
pub struct StabilityReport {
    pub sensitivity_stable: bool,
    /// Sensitivity poles inside the Hurwitz tolerance band; reported rather
    /// than silently passed.
    pub marginal_sensitivity_poles: Vec<Complex64>,
    pub cancellations: Vec<Cancellation>,
    pub interpolation_violations: Vec<InterpolationViolation>,
    pub verdict: bool,
}

/// Checks the three internal-stability conditions: the sensitivity
/// `S = 1/(1 + sum G H_i K_i)` must be stable, every right-half-plane plant
/// zero must interpolate `L_i(z_j) = 0`, and no right-half-plane root may be
/// shared between a controller and its plant (or the grid) within the
/// cancellation tolerance.
pub fn internal_stability_check(
    devices: &[DeviceLoop],
    g: &RationalTF,
    target: &DesignTarget,
) -> StabilityReport {
    let f = target.full();
    let mut cancellations = Vec::new();
    let mut interpolation_violations = Vec::new();

    let mut loop_gain = RationalTF::zero();
    for dev in devices {
        let l_i = g.mul(&dev.plant).mul(&dev.controller);
        loop_gain = loop_gain.add(&l_i);

        // (b) interpolation constraints at RHP zeros of the plant and grid
        let mut rhp_zeros: Vec<Complex64> = dev.plant.zeros().map(|z| z.rhp()).unwrap_or_default();
        rhp_zeros.extend(g.zeros().map(|z| z.rhp()).unwrap_or_default());
        for z in rhp_zeros {
            let magnitude = match l_i.eval_complex(z) {
                Ok(v) => v.norm(),
                Err(_) => f64::INFINITY,
            };
            let scale = match f.eval_complex(z) {
                Ok(v) => v.norm(),
                Err(_) => 1.0,
            };
            if magnitude >= INTERPOLATION_TOL * scale {
                interpolation_violations.push(InterpolationViolation {
                    device: dev.id.clone(),
                    zero: z,
                    magnitude,
                });
            }
        }

        // (c) explicit RHP pole/zero cancellation audit on the raw factors
        audit_cancellations(dev, g, &mut cancellations);
    }

    let (sensitivity_stable, marginal_sensitivity_poles) = match sensitivity_poles(&loop_gain) {
        Some(poles) => {
            let marginal: Vec<Complex64> = poles
                .iter()
                .copied()
                .filter(|p| p.re.abs() <= HURWITZ_TOL)
                .collect();
            let stable = poles.iter().all(|p| p.re < -HURWITZ_TOL);
            (stable, marginal)
        }
        None => (false, Vec::new()),
    };

    let verdict =
        sensitivity_stable && cancellations.is_empty() && interpolation_violations.is_empty();
    StabilityReport {
        sensitivity_stable,
        marginal_sensitivity_poles,
        cancellations,
        interpolation_violations,
        verdict,
    }
}

fn sensitivity_poles(loop_gain: &RationalTF) -> Option<Vec<Complex64>> {
    // poles of S = 1/(1+L) are the zeros of 1+L
    let one_plus = RationalTF::one().add(loop_gain);
    let sensitivity = one_plus.reciprocal().ok()?;
    Some(sensitivity.poles().ok()?.roots().to_vec())
}

fn audit_cancellations(dev: &DeviceLoop, g: &RationalTF, out: &mut Vec<Cancellation>) {
    let ctrl_zeros = dev.controller.zeros().map(|z| z.rhp()).unwrap_or_default();
    let ctrl_poles = dev.controller.poles().map(|p| p.rhp()).unwrap_or_default();
    let plant_poles: Vec<Complex64> = dev
        .plant
        .poles()
        .map(|p| p.rhp())
        .unwrap_or_default()
        .into_iter()
        .chain(g.poles().map(|p| p.rhp()).unwrap_or_default())
        .collect();
    let plant_zeros: Vec<Complex64> = dev
        .plant
        .zeros()
        .map(|z| z.rhp())
        .unwrap_or_default()
        .into_iter()
        .chain(g.zeros().map(|z| z.rhp()).unwrap_or_default())
        .collect();

    for &p in &plant_poles {
        if ctrl_zeros
            .iter()
            .any(|z| (z - p).norm() < CANCEL_TOL * p.norm().max(1.0))
        {
            out.push(Cancellation {
                device: dev.id.clone(),
                root: p,
                kind: CancellationKind::Pole,
            });
        }
    }
    for &z in &plant_zeros {
        if ctrl_poles
            .iter()
            .any(|p| (p - z).norm() < CANCEL_TOL * z.norm().max(1.0))
        {
            out.push(Cancellation {
                device: dev.id.clone(),
                root: z,
                kind: CancellationKind::Zero,
            });
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn tf(num: &[f64], den: &[f64]) -> RationalTF {
        RationalTF::from_coeffs(num, den).unwrap()
    }

    fn eq19_plants() -> Vec<PlantInput> {
        let h1 = tf(&[2.0, -2.0], &[2.0, 1.4, 0.2]);
        let h2 = tf(&[1.0, -2.0], &[1.0, 1.2, 0.2]);
        vec![
            PlantInput::new("hydro1", h1, 0.5),
            PlantInput::new("hydro2", h2, 0.5),
        ]
    }

    fn iv_target() -> DesignTarget {
        make_design_target(20.0, 6.5, (2.0, 17.0)).unwrap()
    }

    #[test]
    fn design_target_matches_n5_filter() {
        let t = make_design_target(3100.0, 6.5, (2.0, 17.0)).unwrap();
        let want_filter = tf(&[1.0, 6.5], &[1.0, 19.0, 34.0]);
        assert!(t.filter().approx_eq(&want_filter, 1e-15));
        assert_abs_diff_eq!(t.full().dc_gain().unwrap(), 3100.0, epsilon = 1e-9);
        assert_abs_diff_eq!(
            iv_target().full().dc_gain().unwrap() / 20.0,
            1.0,
            epsilon = 1e-15
        );
        assert!(t.filter().is_minimum_phase().unwrap());
    }

    #[test]
    fn design_target_rejects_bad_time_constants() {
        assert!(matches!(
            make_design_target(20.0, 0.0, (2.0, 17.0)),
            Err(SynthesisError::InvalidParams(_))
        ));
    }

    #[test]
    fn blaschke_single_factor() {
        let zeros = RootSet::from_roots(vec![Complex64::new(1.0, 0.0)]);
        let b = blaschke_product(&zeros, &[1.0]).unwrap();
        assert!(b.approx_eq(&tf(&[1.0, -1.0], &[1.0, 1.0]), 1e-15));
        let zeros = RootSet::from_roots(vec![Complex64::new(0.5, 0.0)]);
        let b = blaschke_mirror(&zeros).unwrap();
        assert!(b.approx_eq(&tf(&[0.5, -1.0], &[0.5, 1.0]), 1e-15));
    }

    #[test]
    fn blaschke_empty_is_unity() {
        let b = blaschke_product(&RootSet::empty(), &[]).unwrap();
        assert!(b.approx_eq(&RationalTF::one(), 1e-15));
    }

    #[test]
    fn blaschke_rejects_lhp_zero() {
        let zeros = RootSet::from_roots(vec![Complex64::new(-1.0, 0.0)]);
        assert!(matches!(
            blaschke_mirror(&zeros),
            Err(SynthesisError::NotRHPZero { .. })
        ));
    }

    #[test]
    fn blaschke_conjugate_pair_is_all_pass() {
        let zeros = RootSet::from_roots(vec![Complex64::new(0.4, 1.3), Complex64::new(0.4, -1.3)]);
        let b = blaschke_mirror(&zeros).unwrap();
        for k in 0..50 {
            let w = 10f64.powf(-2.0 + 4.0 * k as f64 / 49.0);
            let v = b.freq_response(&[w]).unwrap()[0];
            assert_abs_diff_eq!(v.norm(), 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn fcr_dpfs_reproduce_worked_factors() {
        let entries = fcr_dpfs(&eq19_plants()).unwrap();
        // c1 = 0.5 (1-s)/(s+1), c2 = 0.5 (0.5-s)/(s+0.5)
        let want1 = tf(&[0.5, -0.5], &[1.0, 1.0]);
        let want2 = tf(&[0.25, -0.5], &[0.5, 1.0]);
        assert!(
            entries[0].dpf.approx_eq(&want1, 1e-12),
            "got {}",
            entries[0].dpf
        );
        assert!(
            entries[1].dpf.approx_eq(&want2, 1e-12),
            "got {}",
            entries[1].dpf
        );
        for e in &entries {
            assert_abs_diff_eq!(e.dpf.dc_gain().unwrap(), e.weight, epsilon = 1e-12);
        }
    }

    #[test]
    fn fcr_dpf_of_minimum_phase_plant_is_its_weight() {
        let entries = fcr_dpfs(&[PlantInput::new("ideal", RationalTF::one(), 1.0)]).unwrap();
        assert!(entries[0].dpf.approx_eq(&RationalTF::one(), 1e-15));
    }

    #[test]
    fn fcr_dpfs_table2_dc_split() {
        let mk = |t_w: f64| {
            let z = 1.0 / (0.8 * t_w);
            tf(&[2.0 * z, -2.0], &[2.0 * z, 1.0 + 0.4 * z, 0.2])
        };
        let plants = vec![
            PlantInput::new("bus1", mk(0.7), 0.6),
            PlantInput::new("bus2", mk(1.4), 0.3),
            PlantInput::new("bus3", mk(1.4), 0.1),
        ];
        let entries = fcr_dpfs(&plants).unwrap();
        for (e, want) in entries.iter().zip([0.6, 0.3, 0.1]) {
            assert_abs_diff_eq!(e.dpf.dc_gain().unwrap(), want, epsilon = 1e-12);
            assert!(e.dpf.is_stable().unwrap());
        }
    }

    #[test]
    fn weights_must_sum_to_one() {
        let mut plants = eq19_plants();
        plants[0].weight = 0.7;
        assert!(matches!(
            fcr_dpfs(&plants),
            Err(SynthesisError::WeightsNotNormalized { .. })
        ));
    }

    #[test]
    fn unstable_plant_rejected_with_prestabilize_directive() {
        let plants = vec![PlantInput::new("bad", tf(&[1.0], &[-1.0, 1.0]), 1.0)];
        let err = fcr_dpfs(&plants).unwrap_err();
        assert!(matches!(err, SynthesisError::UnstablePlant { .. }));
        assert!(err.to_string().contains("pre-stabilize"));
    }

    #[test]
    fn ffr_battery_complement_matches_eq24() {
        let fcr = fcr_dpfs(&eq19_plants()).unwrap();
        let fcr_sum = fcr.iter().fold(RationalTF::zero(), |a, e| a.add(&e.dpf));
        let battery = vec![PlantInput::new("battery", RationalTF::one(), 1.0)];
        let entries = ffr_dpfs(&battery, &fcr_sum).unwrap();
        let want = tf(&[0.0, 1.5, 2.0], &[0.5, 1.5, 1.0]); // 2s(s+0.75)/((s+1)(s+0.5))
        assert!(
            entries[0].dpf.approx_eq(&want, 1e-12),
            "got {}",
            entries[0].dpf
        );
        assert!(entries[0].dpf.is_minimum_phase().unwrap());
    }

    #[test]
    fn ffr_wind_composes_all_pass_with_complement() {
        let fcr = fcr_dpfs(&eq19_plants()).unwrap();
        let fcr_sum = fcr.iter().fold(RationalTF::zero(), |a, e| a.add(&e.dpf));
        let h3 = tf(&[-0.048, 1.0], &[0.048, 1.0]);
        let wind = vec![PlantInput::new("wind", h3.clone(), 1.0)];
        let entries = ffr_dpfs(&wind, &fcr_sum).unwrap();
        // c3 = (1 - c1 - c2) H3
        let want = RationalTF::one().sub(&fcr_sum).mul(&h3);
        assert!(
            entries[0].dpf.approx_eq(&want, 1e-10),
            "got {}",
            entries[0].dpf
        );
    }

    #[test]
    fn perfect_fcr_leaves_no_ffr() {
        let battery = vec![PlantInput::new("battery", RationalTF::one(), 1.0)];
        let entries = ffr_dpfs(&battery, &RationalTF::one()).unwrap();
        assert!(entries[0].dpf.is_zero());
    }

    #[test]
    fn normalization_battery_set_is_fixed_point() {
        let fcr = fcr_dpfs(&eq19_plants()).unwrap();
        let fcr_sum = fcr.iter().fold(RationalTF::zero(), |a, e| a.add(&e.dpf));
        let battery = vec![PlantInput::new("battery", RationalTF::one(), 1.0)];
        let ffr = ffr_dpfs(&battery, &fcr_sum).unwrap();
        let mut entries = fcr;
        entries.extend(ffr);
        let set = DpfSet::new(entries);
        assert!(set.sum().approx_eq(&RationalTF::one(), 1e-12));
        let normalized = normalize_dpfs(&set).unwrap();
        for (before, after) in set.entries().iter().zip(normalized.entries()) {
            assert!(before.dpf.approx_eq(&after.dpf, 1e-9));
        }
        assert!(normalized.is_normalized());
    }

    #[test]
    fn normalization_refused_for_hydro_only_set() {
        let set = DpfSet::new(fcr_dpfs(&eq19_plants()).unwrap());
        let err = normalize_dpfs(&set).unwrap_err();
        match err {
            SynthesisError::SumNotMinimumPhase { rhp_zeros } => {
                assert_eq!(rhp_zeros.len(), 1);
                assert_abs_diff_eq!(
                    rhp_zeros[0].re,
                    std::f64::consts::FRAC_1_SQRT_2,
                    epsilon = 1e-9
                );
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn normalization_wind_hydro_gives_partition_of_unity() {
        let fcr = fcr_dpfs(&eq19_plants()).unwrap();
        let fcr_sum = fcr.iter().fold(RationalTF::zero(), |a, e| a.add(&e.dpf));
        let h3 = tf(&[-0.048, 1.0], &[0.048, 1.0]);
        let ffr = ffr_dpfs(&[PlantInput::new("wind", h3, 1.0)], &fcr_sum).unwrap();
        let mut entries = fcr;
        entries.extend(ffr);
        let normalized = normalize_dpfs(&DpfSet::new(entries)).unwrap();
        let sum = normalized.sum();
        assert!(sum.approx_eq(&RationalTF::one(), 1e-10), "sum {sum}");
        // the identity also holds in uncollapsed form: num(sum) == den(sum)
        let n = sum.num();
        let d = sum.den();
        let scale = d.coeffs().iter().fold(1.0f64, |m, c| m.max(c.abs()));
        for k in 0..=d.degree() {
            assert!(
                (n.coeff(k) - d.coeff(k)).abs() <= 1e-10 * scale,
                "coefficient {k}: {} vs {}",
                n.coeff(k),
                d.coeff(k)
            );
        }
        for e in normalized.entries() {
            assert!(e.dpf.is_stable().unwrap(), "{} unstable", e.device);
        }
        // normalization makes the hydro share exceed unity around 0.1 rad/s
        let hydro_sum = normalized.entries()[0]
            .dpf
            .add(&normalized.entries()[1].dpf);
        let v = hydro_sum.eval_complex(Complex64::new(0.0, 0.1)).unwrap();
        assert!(v.re > 1.0, "Re[c1'+c2'](j0.1) = {} should exceed 1", v.re);
    }

    #[test]
    fn mismatch_reports_battery_perfection_and_hydro_limit() {
        let fcr = fcr_dpfs(&eq19_plants()).unwrap();
        let fcr_sum = fcr.iter().fold(RationalTF::zero(), |a, e| a.add(&e.dpf));
        let battery = ffr_dpfs(
            &[PlantInput::new("battery", RationalTF::one(), 1.0)],
            &fcr_sum,
        )
        .unwrap();
        let mut entries = fcr.clone();
        entries.extend(battery);
        let omegas: Vec<f64> = (0..200)
            .map(|k| 10f64.powf(-3.0 + 6.0 * k as f64 / 199.0))
            .collect();
        let report = matching_mismatch(&DpfSet::new(entries), &omegas);
        assert!(report.mismatch.iter().all(|m| *m < 1e-12));
        assert_abs_diff_eq!(report.omega_one_percent.unwrap(), 1e3, epsilon = 1.0);

        // hydro-only: |sum - 1| -> 2 at high frequency (-180 degree phase)
        let hydro = matching_mismatch(&DpfSet::new(fcr.clone()), &omegas);
        assert_abs_diff_eq!(*hydro.mismatch.last().unwrap(), 2.0, epsilon = 1e-3);
        let tail = fcr_sum.eval_complex(Complex64::new(0.0, 1e3)).unwrap();
        assert_abs_diff_eq!(tail.norm(), 1.0, epsilon = 1e-3);
        assert_abs_diff_eq!(tail.arg().to_degrees().abs(), 180.0, epsilon = 0.5);

        // empty set: mismatch 1 everywhere
        let empty = matching_mismatch(&DpfSet::new(Vec::new()), &omegas);
        assert!(empty.mismatch.iter().all(|m| (m - 1.0).abs() < 1e-15));
        assert!(empty.omega_one_percent.is_none());
    }

    #[test]
    fn controllers_match_rational_identity() {
        let plants = eq19_plants();
        let set = DpfSet::new(fcr_dpfs(&plants).unwrap());
        let target = iv_target();
        let controllers = controllers_from_dpfs(&set, &target, &plants).unwrap();
        let f = target.full();
        for (ctrl, plant) in controllers.iter().zip(&plants) {
            assert_eq!(ctrl.rolloff_poles_added, 0);
            assert!(ctrl.tf.is_proper());
            assert!(ctrl.tf.is_stable().unwrap());
            // H_i K_i = c_i F as a rational identity
            let got = plant.tf.mul(&ctrl.tf);
            let want = set.get(&ctrl.device).unwrap().dpf.mul(&f);
            assert!(got.approx_eq(&want, 1e-9), "got {got}, want {want}");
        }
        // a 1 Hz reference step raises each unit's steady output by 10 MW
        for (ctrl, plant) in controllers.iter().zip(&plants) {
            let loop_dc = plant.tf.mul(&ctrl.tf).dc_gain().unwrap();
            assert_abs_diff_eq!(loop_dc, 10.0, epsilon = 1e-9);
        }
        // hydro-1 controller: (s+2)(0.2s+1) moved into the numerator, no
        // (1-s) left in the denominator
        let k1 = &controllers[0].tf;
        let num_roots = k1.zeros().unwrap();
        assert!(num_roots.roots().iter().any(|z| (z.re + 2.0).abs() < 1e-7));
        assert!(num_roots.roots().iter().any(|z| (z.re + 5.0).abs() < 1e-7));
        assert!(k1.poles().unwrap().rhp().is_empty());
    }

    #[test]
    fn battery_controller_is_dpf_times_target() {
        let plants = vec![PlantInput::new("battery", RationalTF::one(), 1.0)];
        let c3 = tf(&[0.0, 1.5, 2.0], &[0.5, 1.5, 1.0]);
        let set = DpfSet::new(vec![DpfEntry {
            device: "battery".into(),
            role: Role::Ffr,
            weight: 1.0,
            dpf: c3.clone(),
        }]);
        let target = iv_target();
        let controllers = controllers_from_dpfs(&set, &target, &plants).unwrap();
        assert!(controllers[0].tf.approx_eq(&c3.mul(&target.full()), 1e-10));
    }

    #[test]
    fn zero_dpf_gives_zero_controller() {
        let plants = eq19_plants();
        let set = DpfSet::new(vec![DpfEntry {
            device: "hydro1".into(),
            role: Role::Fcr,
            weight: 0.0,
            dpf: RationalTF::zero(),
        }]);
        let controllers = controllers_from_dpfs(&set, &iv_target(), &plants).unwrap();
        assert!(controllers[0].tf.is_zero());
    }

    #[test]
    fn interpolation_constraint_holds_at_plant_zeros() {
        let plants = eq19_plants();
        let set = DpfSet::new(fcr_dpfs(&plants).unwrap());
        let f = iv_target().full();
        for (entry, plant) in set.entries().iter().zip(&plants) {
            for z in plant.tf.zeros().unwrap().rhp() {
                let c_val = entry.dpf.eval_complex(z).unwrap();
                let f_val = f.eval_complex(z).unwrap();
                assert!(
                    (c_val * f_val).norm() < 1e-9,
                    "|c({z})F({z})| = {}",
                    (c_val * f_val).norm()
                );
            }
        }
    }

    #[test]
    fn naive_inversion_detected_by_stability_check() {
        let target = iv_target();
        let g = tf(&[1.0], &[400.0, 4400.0]);
        let h1 = tf(&[2.0, -2.0], &[2.0, 1.4, 0.2]);
        let naive = target.full().div(&h1).unwrap();
        let report = internal_stability_check(
            &[DeviceLoop {
                id: "hydro1".into(),
                plant: h1,
                controller: naive,
            }],
            &g,
            &target,
        );
        assert!(!report.verdict);
        assert!(report
            .cancellations
            .iter()
            .any(|c| c.kind == CancellationKind::Zero && (c.root.re - 1.0).abs() < 1e-7));
    }

    #[test]
    fn dpf_design_passes_stability_check() {
        let plants = eq19_plants();
        let set = DpfSet::new(fcr_dpfs(&plants).unwrap());
        let target = iv_target();
        let controllers = controllers_from_dpfs(&set, &target, &plants).unwrap();
        let g = tf(&[1.0], &[400.0, 4400.0]);
        let devices: Vec<DeviceLoop> = plants
            .iter()
            .zip(&controllers)
            .map(|(p, c)| DeviceLoop {
                id: p.id.clone(),
                plant: p.tf.clone(),
                controller: c.tf.clone(),
            })
            .collect();
        let report = internal_stability_check(&devices, &g, &target);
        assert!(report.sensitivity_stable);
        assert!(report.cancellations.is_empty());
        assert!(report.interpolation_violations.is_empty());
        assert!(report.verdict);
    }

    #[test]
    fn all_zero_controllers_are_internally_stable() {
        let target = iv_target();
        let g = tf(&[1.0], &[400.0, 4400.0]);
        let devices = vec![DeviceLoop {
            id: "idle".into(),
            plant: tf(&[2.0, -2.0], &[2.0, 1.4, 0.2]),
            controller: RationalTF::zero(),
        }];
        let report = internal_stability_check(&devices, &g, &target);
        assert!(report.verdict);
    }

    #[test]
    fn prop3_complement_of_overweight_all_pass() {
        // c1 = (1+eps)(z-s)/(s+z): 1 - c1 has a zero at z*eps/(2+eps) and
        // dc gain -eps
        for eps in [0.1, 0.5, 1.0, 2.0] {
            for z1 in [0.3, 1.0, 4.2] {
                let c1 = tf(&[z1, -1.0], &[z1, 1.0]).scale(1.0 + eps);
                let c2 = RationalTF::one().sub(&c1);
                assert!(c2.is_stable().unwrap());
                let zeros = c2.zeros().unwrap();
                assert_eq!(zeros.len(), 1);
                assert_abs_diff_eq!(
                    zeros.roots()[0].re,
                    z1 * eps / (2.0 + eps),
                    epsilon = 1e-9
                );
                assert_abs_diff_eq!(c2.dc_gain().unwrap(), -eps, epsilon = 1e-12);
            }
        }
    }
}

//! Closed-loop center-of-inertia simulation: assemble the grid response
//! `G(s) = 1/(sM + D)`, close the loop over the synthesized controllers,
//! run disconnection faults, and judge the result against the FCR-D
//! activation and nadir requirements.

use crate::plants::{PlantError, PlantModel};
use crate::ratfun::sim::{rk4_step, Rk4Scratch, StateSpace};
use crate::ratfun::{step_response, Polynomial, RatfunError, RationalTF, StabilityClass};
use crate::synthesis::{
    controllers_from_dpfs, fcr_dpfs, ffr_dpfs, internal_stability_check, normalize_dpfs,
    DesignTarget, DeviceLoop, DpfSet, PlantInput, Role, StabilityReport, SynthesisError,
    SynthesizedController,
};
use num_complex::Complex64;
use serde::Serialize;
use thiserror::Error;

use crate::is_pos;

#[derive(Debug, Error)]
pub enum CoiError {
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error("closed loop is not stable")]
    UnstableClosedLoop,
    #[error("internal stability verdict is false ({0}); pass skip_stability_check to simulate anyway")]
    InternalInstability(String),
    #[error("simulation too short: need at least {need} s after the fault, have {have} s")]
    SimulationTooShort { need: f64, have: f64 },
    #[error("no controller supplied for device '{0}'")]
    MissingController(String),
    #[error(transparent)]
    Plant(#[from] PlantError),
    #[error(transparent)]
    Synthesis(#[from] SynthesisError),
    #[error(transparent)]
    Ratfun(#[from] RatfunError),
}

/// One device of the scenario fleet.
#[derive(Debug, Clone)]
pub struct FleetEntry {
    /// Device id used in reports and CSV columns.
    pub id: String,
    /// Bus the device connects to (bookkeeping).
    pub bus: u32,
    pub plant: PlantModel,
    pub role: Role,
    pub weight: f64,
}

/// System constants, fleet, and design target for one study case.
#[derive(Debug, Clone)]
pub struct GridScenario {
    pub name: String,
    /// Nominal frequency, Hz.
    pub f0_hz: f64,
    /// Total kinetic energy, GWs.
    pub w_kin_gws: f64,
    /// Proportional load damping, MW/Hz.
    pub d_mw_per_hz: f64,
    /// Disturbance step magnitude, MW; positive means lost import.
    pub fault_mw: f64,
    /// Frequency the system sits at before the fault, Hz.
    pub pre_fault_freq_hz: f64,
    pub fleet: Vec<FleetEntry>,
    pub target: DesignTarget,
}

impl GridScenario {
    /// Aggregated inertia `M = 2 W_kin / f0` in MW s/Hz (kinetic energy in
    /// GWs converts via the factor 1000).
    pub fn inertia_mws_per_hz(&self) -> f64 {
        2.0 * self.w_kin_gws * 1000.0 / self.f0_hz
    }

    pub fn validate(&self) -> Result<(), CoiError> {
        if !is_pos(self.f0_hz) {
            return Err(CoiError::InvalidScenario(format!(
                "f0_hz must be > 0, got {}",
                self.f0_hz
            )));
        }
        if !is_pos(self.w_kin_gws) {
            return Err(CoiError::InvalidScenario(format!(
                "w_kin_gws must be > 0, got {}",
                self.w_kin_gws
            )));
        }
        if !self.d_mw_per_hz.is_finite() || self.d_mw_per_hz < 0.0 {
            return Err(CoiError::InvalidScenario(format!(
                "d_mw_per_hz must be >= 0, got {}",
                self.d_mw_per_hz
            )));
        }
        if !is_pos(self.pre_fault_freq_hz) {
            return Err(CoiError::InvalidScenario(format!(
                "pre_fault_freq_hz must be > 0, got {}",
                self.pre_fault_freq_hz
            )));
        }
        if !self.fault_mw.is_finite() {
            return Err(CoiError::InvalidScenario("fault_mw must be finite".into()));
        }
        let mut seen = std::collections::BTreeSet::new();
        for entry in &self.fleet {
            if !seen.insert(entry.id.as_str()) {
                return Err(CoiError::InvalidScenario(format!(
                    "duplicate device id '{}'",
                    entry.id
                )));
            }
            entry
                .plant
                .validate()
                .map_err(|e| CoiError::InvalidScenario(format!("device '{}': {e}", entry.id)))?;
        }
        for role in [Role::Fcr, Role::Ffr] {
            let entries: Vec<&FleetEntry> = self.fleet.iter().filter(|e| e.role == role).collect();
            if entries.is_empty() {
                continue;
            }
            let sum: f64 = entries.iter().map(|e| e.weight).sum();
            if (sum - 1.0).abs() > 1e-9 {
                return Err(CoiError::InvalidScenario(format!(
                    "{role} weights must sum to 1, got {sum}"
                )));
            }
        }
        Ok(())
    }

    /// Fleet as synthesis inputs for one role.
    pub fn plant_inputs(&self, role: Role) -> Result<Vec<PlantInput>, CoiError> {
        self.fleet
            .iter()
            .filter(|e| e.role == role)
            .map(|e| Ok(PlantInput::new(e.id.clone(), e.plant.linear_tf()?, e.weight)))
            .collect()
    }
}

/// Grid frequency response to power imbalance, `G(s) = 1/(sM + D)` in
/// Hz/MW.
pub fn coi_plant(scenario: &GridScenario) -> Result<RationalTF, CoiError> {
    scenario.validate()?;
    let m = scenario.inertia_mws_per_hz();
    Ok(RationalTF::new(
        Polynomial::one(),
        Polynomial::new(vec![scenario.d_mw_per_hz, m]),
    )
    .expect("nonzero denominator"))
}

/// Closed-loop transfer from disturbance (MW) to frequency deviation (Hz):
/// `1/(sM + D + F_ctl(s))` with `F_ctl` the aggregate controlled response.
pub fn disturbance_response(
    scenario: &GridScenario,
    f_ctl: &RationalTF,
) -> Result<RationalTF, CoiError> {
    scenario.validate()?;
    if !f_ctl.is_proper() {
        return Err(CoiError::Ratfun(RatfunError::ImproperTF));
    }
    let m = scenario.inertia_mws_per_hz();
    let sm_plus_d = Polynomial::new(vec![scenario.d_mw_per_hz, m]);
    let den = sm_plus_d.mul(f_ctl.den()).add(f_ctl.num());
    let g_cl = RationalTF::new(f_ctl.den().clone(), den).expect("nonzero denominator");
    if g_cl.pole_class()? != StabilityClass::Stable {
        return Err(CoiError::UnstableClosedLoop);
    }
    Ok(g_cl)
}

/// Everything produced by participation-factor design for one scenario.
#[derive(Debug)]
pub struct ScenarioDesign {
    pub grid: RationalTF,
    pub plants: Vec<PlantInput>,
    pub dpfs: DpfSet,
    /// RHP zeros of the participation-factor sum when normalization was
    /// refused; the set is then left unnormalized.
    pub normalization_refused: Option<Vec<Complex64>>,
    pub controllers: Vec<SynthesizedController>,
    pub stability: StabilityReport,
}

impl ScenarioDesign {
    pub fn controller_pairs(&self) -> Vec<(String, RationalTF)> {
        self.controllers
            .iter()
            .map(|c| (c.device.clone(), c.tf.clone()))
            .collect()
    }
}

/// Runs the three-step participation-factor design for a scenario's fleet:
/// FCR factors, FFR factors against the FCR sum, then the normalization
/// step (kept unnormalized with a diagnostic when the sum is not
/// minimum-phase), and finally the controllers and stability audit.
pub fn design_for_scenario(scenario: &GridScenario) -> Result<ScenarioDesign, CoiError> {
    scenario.validate()?;
    let grid = coi_plant(scenario)?;

    let fcr_plants = scenario.plant_inputs(Role::Fcr)?;
    let ffr_plants = scenario.plant_inputs(Role::Ffr)?;
    let mut entries = fcr_dpfs(&fcr_plants)?;
    let fcr_sum = entries
        .iter()
        .fold(RationalTF::zero(), |acc, e| acc.add(&e.dpf));
    entries.extend(ffr_dpfs(&ffr_plants, &fcr_sum)?);
    let set = DpfSet::new(entries);

    let (dpfs, normalization_refused) = match normalize_dpfs(&set) {
        Ok(normalized) => (normalized, None),
        Err(SynthesisError::SumNotMinimumPhase { rhp_zeros }) => (set, Some(rhp_zeros)),
        Err(other) => return Err(other.into()),
    };

    let mut plants = fcr_plants;
    plants.extend(ffr_plants);
    let controllers = controllers_from_dpfs(&dpfs, &scenario.target, &plants)?;

    let devices: Vec<DeviceLoop> = plants
        .iter()
        .map(|p| DeviceLoop {
            id: p.id.clone(),
            plant: p.tf.clone(),
            controller: controllers
                .iter()
                .find(|c| c.device == p.id)
                .map(|c| c.tf.clone())
                .unwrap_or_else(RationalTF::zero),
        })
        .collect();
    let stability = internal_stability_check(&devices, &grid, &scenario.target);

    Ok(ScenarioDesign {
        grid,
        plants,
        dpfs,
        normalization_refused,
        controllers,
        stability,
    })
}

/// Aggregate controlled response `F_ctl(s) = sum H_i(s) K_i(s)`, MW/Hz.
pub fn aggregate_control(
    scenario: &GridScenario,
    controllers: &[(String, RationalTF)],
) -> Result<RationalTF, CoiError> {
    let mut f_ctl = RationalTF::zero();
    for entry in &scenario.fleet {
        let k = lookup(controllers, &entry.id)?;
        f_ctl = f_ctl.add(&entry.plant.linear_tf()?.mul(k));
    }
    Ok(f_ctl)
}

/// Open loop `L(s) = G(s) sum H_i(s) K_i(s)` seen at the controller input.
pub fn open_loop(
    scenario: &GridScenario,
    controllers: &[(String, RationalTF)],
) -> Result<RationalTF, CoiError> {
    Ok(coi_plant(scenario)?.mul(&aggregate_control(scenario, controllers)?))
}

fn lookup<'a>(
    controllers: &'a [(String, RationalTF)],
    id: &str,
) -> Result<&'a RationalTF, CoiError> {
    controllers
        .iter()
        .find(|(cid, _)| cid == id)
        .map(|(_, tf)| tf)
        .ok_or_else(|| CoiError::MissingController(id.to_string()))
}

/// Fault-run solver settings.
#[derive(Debug, Clone)]
pub struct RunOptions {
    pub dt_s: f64,
    pub t_end_s: f64,
    /// Fault instant; the run starts settled at the pre-fault frequency.
    pub fault_time_s: f64,
    /// Simulate even when the internal-stability verdict is false.
    pub skip_stability_check: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            dt_s: crate::ratfun::DEFAULT_DT,
            t_end_s: crate::ratfun::DEFAULT_T_END,
            fault_time_s: 1.0,
            skip_stability_check: false,
        }
    }
}

/// Time-domain result of a fault run. All traces share the grid `t`.
#[derive(Debug, Clone)]
pub struct SimResult {
    pub t: Vec<f64>,
    /// Absolute frequency, Hz.
    pub freq_hz: Vec<f64>,
    /// Controlled power per device, MW, in fleet order.
    pub device_power_mw: Vec<(String, Vec<f64>)>,
    /// Sum of all controlled device powers, MW.
    pub total_power_mw: Vec<f64>,
    /// Ideal target response `P_des = F(s)(w_ref - w)`, MW.
    pub p_des_mw: Vec<f64>,
    pub dt_s: f64,
    pub fault_time_s: f64,
}

/// Simulates the fault as one coupled interconnection: the COI balance
/// integrates load damping, every device's `H_i K_i` cascade, and the
/// disturbance step, all under fixed-step RK4 with inputs held per cell.
pub fn run_fault(
    scenario: &GridScenario,
    controllers: &[(String, RationalTF)],
    options: &RunOptions,
) -> Result<SimResult, CoiError> {
    scenario.validate()?;
    assert!(options.dt_s > 0.0 && options.t_end_s > options.fault_time_s);

    if !options.skip_stability_check {
        let devices: Vec<DeviceLoop> = scenario
            .fleet
            .iter()
            .map(|e| {
                Ok(DeviceLoop {
                    id: e.id.clone(),
                    plant: e.plant.linear_tf()?,
                    controller: lookup(controllers, &e.id)?.clone(),
                })
            })
            .collect::<Result<_, CoiError>>()?;
        let report = internal_stability_check(&devices, &coi_plant(scenario)?, &scenario.target);
        if !report.verdict {
            return Err(CoiError::InternalInstability(format!(
                "sensitivity_stable={}, {} cancellations, {} interpolation violations",
                report.sensitivity_stable,
                report.cancellations.len(),
                report.interpolation_violations.len()
            )));
        }
    }

    // per-device series realizations of T_i = H_i K_i
    let mut names = Vec::new();
    let mut realizations = Vec::new();
    for entry in &scenario.fleet {
        let t_i = entry.plant.linear_tf()?.mul(lookup(controllers, &entry.id)?);
        realizations.push(StateSpace::controllable_canonical(&t_i)?);
        names.push(entry.id.clone());
    }
    let p_des_filter = StateSpace::controllable_canonical(&scenario.target.full())?;

    let m = scenario.inertia_mws_per_hz();
    let d_load = scenario.d_mw_per_hz;
    let n_dev = realizations.len();

    // state layout: [delta, device states..., target-filter states]
    let offsets: Vec<usize> = realizations
        .iter()
        .scan(1usize, |acc, ss| {
            let off = *acc;
            *acc += ss.dim();
            Some(off)
        })
        .collect();
    let filter_offset = offsets.last().copied().unwrap_or(1)
        + realizations.last().map(|ss| ss.dim()).unwrap_or(0);
    let dim = filter_offset + p_des_filter.dim();

    let steps = (options.t_end_s / options.dt_s).round() as usize;
    let mut x = vec![0.0; dim];
    let mut scratch = Rk4Scratch::default();

    let mut t = Vec::with_capacity(steps + 1);
    let mut freq = Vec::with_capacity(steps + 1);
    let mut total = Vec::with_capacity(steps + 1);
    let mut p_des = Vec::with_capacity(steps + 1);
    let mut device_power: Vec<Vec<f64>> = vec![Vec::with_capacity(steps + 1); n_dev];

    let record = |x: &[f64],
                      time: f64,
                      t: &mut Vec<f64>,
                      freq: &mut Vec<f64>,
                      total: &mut Vec<f64>,
                      p_des: &mut Vec<f64>,
                      device_power: &mut Vec<Vec<f64>>| {
        let delta = x[0];
        let e = -delta;
        t.push(time);
        freq.push(scenario.pre_fault_freq_hz + delta);
        let mut sum = 0.0;
        for (i, ss) in realizations.iter().enumerate() {
            let p = ss.output(&x[offsets[i]..offsets[i] + ss.dim()], e);
            device_power[i].push(p);
            sum += p;
        }
        total.push(sum);
        p_des.push(p_des_filter.output(&x[filter_offset..filter_offset + p_des_filter.dim()], e));
    };

    record(
        &x, 0.0, &mut t, &mut freq, &mut total, &mut p_des, &mut device_power,
    );
    for k in 1..=steps {
        let cell_start = (k - 1) as f64 * options.dt_s;
        let u = if cell_start >= options.fault_time_s {
            -scenario.fault_mw
        } else {
            0.0
        };
        rk4_step(
            &mut x,
            options.dt_s,
            |x, dx| {
                let delta = x[0];
                let e = -delta;
                let mut power_sum = 0.0;
                for (i, ss) in realizations.iter().enumerate() {
                    let xi = &x[offsets[i]..offsets[i] + ss.dim()];
                    power_sum += ss.output(xi, e);
                    let dxi = &mut dx[offsets[i]..offsets[i] + ss.dim()];
                    ss.derivative_into(xi, e, dxi);
                }
                dx[0] = (-d_load * delta + power_sum + u) / m;
                let xf = &x[filter_offset..filter_offset + p_des_filter.dim()];
                let dxf = &mut dx[filter_offset..filter_offset + p_des_filter.dim()];
                p_des_filter.derivative_into(xf, e, dxf);
            },
            &mut scratch,
        );
        if !x.iter().all(|v| v.is_finite() && v.abs() < 1e12) {
            return Err(CoiError::Ratfun(RatfunError::UnstableSimulation));
        }
        record(
            &x,
            k as f64 * options.dt_s,
            &mut t,
            &mut freq,
            &mut total,
            &mut p_des,
            &mut device_power,
        );
    }

    Ok(SimResult {
        t,
        freq_hz: freq,
        device_power_mw: names.into_iter().zip(device_power).collect(),
        total_power_mw: total,
        p_des_mw: p_des,
        dt_s: options.dt_s,
        fault_time_s: options.fault_time_s,
    })
}

/// The frequency trace the closed-loop rational model predicts: the step
/// response of [`disturbance_response`] scaled by the fault and shifted to
/// the fault instant. Independent computation path from [`run_fault`].
pub fn analytic_frequency_trace(
    scenario: &GridScenario,
    controllers: &[(String, RationalTF)],
    options: &RunOptions,
) -> Result<Vec<f64>, CoiError> {
    let f_ctl = aggregate_control(scenario, controllers)?;
    let g_cl = disturbance_response(scenario, &f_ctl)?;
    let steps = (options.t_end_s / options.dt_s).round() as usize;
    let fault_idx = (options.fault_time_s / options.dt_s).round() as usize;
    let resp = step_response(
        &g_cl,
        (steps - fault_idx) as f64 * options.dt_s,
        options.dt_s,
    )?;
    let mut freq = vec![scenario.pre_fault_freq_hz; steps + 1];
    for (k, y) in resp.y.iter().enumerate() {
        freq[fault_idx + k] = scenario.pre_fault_freq_hz - scenario.fault_mw * y;
    }
    Ok(freq)
}

/// FCR-D verdict for one fault run.
#[derive(Debug, Clone, Serialize)]
pub struct ComplianceReport {
    pub nadir_hz: f64,
    pub steady_state_hz: f64,
    /// Time from the fault until half the settled reserve is delivered, s.
    pub t50_s: f64,
    /// Time from the fault until 95 % of the settled reserve is delivered, s.
    pub t_full_s: f64,
    pub nadir_deviation_hz: f64,
    pub steady_deviation_hz: f64,
    pub pass_nadir: bool,
    pub pass_t50: bool,
    pub pass_full: bool,
    pub pass_steady: bool,
}

impl ComplianceReport {
    pub fn pass(&self) -> bool {
        self.pass_nadir && self.pass_t50 && self.pass_full && self.pass_steady
    }
}

/// Maximum nadir deviation allowed by FCR-D, Hz.
pub const NADIR_LIMIT_HZ: f64 = 1.0;
/// Half activation deadline, s.
pub const T50_LIMIT_S: f64 = 5.0;
/// Full activation deadline, s.
pub const T_FULL_LIMIT_S: f64 = 30.0;
/// "Fully activated" means this fraction of the settled reserve.
pub const FULL_ACTIVATION_FRACTION: f64 = 0.95;
/// Window for steady-state averaging, s.
const STEADY_WINDOW_S: f64 = 5.0;
/// Post-fault coverage required before compliance is judged, s.
const MIN_POST_FAULT_S: f64 = 40.0;

/// Judges a fault run against FCR-D: nadir within 1 Hz, half the reserve
/// within 5 s, 95 % within 30 s, and a steady state consistent with the
/// promised static gain `fault/(D + R_fcr)` (2 % slack).
pub fn fcrd_compliance(
    result: &SimResult,
    scenario: &GridScenario,
) -> Result<ComplianceReport, CoiError> {
    let t_end = *result.t.last().unwrap_or(&0.0);
    let have = t_end - result.fault_time_s;
    if have < MIN_POST_FAULT_S {
        return Err(CoiError::SimulationTooShort {
            need: MIN_POST_FAULT_S,
            have,
        });
    }

    let start = (result.fault_time_s / result.dt_s).round() as usize;
    let freq = &result.freq_hz[start..];
    let power = &result.total_power_mw[start..];

    let nadir_hz = freq.iter().cloned().fold(f64::INFINITY, f64::min);
    let steady_n = (STEADY_WINDOW_S / result.dt_s).round() as usize;
    let mean_tail = |trace: &[f64]| -> f64 {
        let tail = &trace[trace.len().saturating_sub(steady_n)..];
        tail.iter().sum::<f64>() / tail.len() as f64
    };
    let steady_state_hz = mean_tail(freq);
    let settled_power = mean_tail(power);

    let first_reaching = |fraction: f64| -> f64 {
        if settled_power.abs() < 1e-9 {
            return 0.0;
        }
        let threshold = fraction * settled_power;
        power
            .iter()
            .position(|p| *p >= threshold)
            .map(|i| i as f64 * result.dt_s)
            .unwrap_or(f64::INFINITY)
    };
    let t50_s = first_reaching(0.5);
    let t_full_s = first_reaching(FULL_ACTIVATION_FRACTION);

    let nadir_deviation_hz = scenario.pre_fault_freq_hz - nadir_hz;
    let steady_deviation_hz = scenario.pre_fault_freq_hz - steady_state_hz;
    let promised_deviation =
        scenario.fault_mw.abs() / (scenario.d_mw_per_hz + scenario.target.r_fcr());

    Ok(ComplianceReport {
        nadir_hz,
        steady_state_hz,
        t50_s,
        t_full_s,
        nadir_deviation_hz,
        steady_deviation_hz,
        pass_nadir: nadir_deviation_hz <= NADIR_LIMIT_HZ + 1e-9,
        pass_t50: t50_s <= T50_LIMIT_S,
        pass_full: t_full_s <= T_FULL_LIMIT_S,
        pass_steady: steady_deviation_hz.abs() <= 1.02 * promised_deviation + 1e-9,
    })
}

/// One Bode-table row.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct BodePoint {
    pub omega_rad_s: f64,
    pub mag_db: f64,
    pub phase_deg: f64,
}

/// Gain/phase table with unwrapped phase over an ascending positive grid.
pub fn bode_data(loop_gain: &RationalTF, omegas: &[f64]) -> Vec<BodePoint> {
    let mut out = Vec::with_capacity(omegas.len());
    let mut prev_phase: Option<f64> = None;
    let mut offset = 0.0;
    for &w in omegas {
        let (mag_db, phase_deg) = match loop_gain.eval_complex(Complex64::new(0.0, w)) {
            Ok(v) => (20.0 * v.norm().log10(), v.arg().to_degrees()),
            Err(_) => (f64::INFINITY, f64::NAN),
        };
        let unwrapped = match prev_phase {
            Some(prev) if phase_deg.is_finite() => {
                let mut candidate = phase_deg + offset;
                while candidate - prev > 180.0 {
                    offset -= 360.0;
                    candidate -= 360.0;
                }
                while candidate - prev < -180.0 {
                    offset += 360.0;
                    candidate += 360.0;
                }
                candidate
            }
            _ => phase_deg,
        };
        if unwrapped.is_finite() {
            prev_phase = Some(unwrapped);
        }
        out.push(BodePoint {
            omega_rad_s: w,
            mag_db,
            phase_deg: unwrapped,
        });
    }
    out
}

/// Log-spaced grid with a fixed number of points per decade.
pub fn log_grid(w_min: f64, w_max: f64, per_decade: usize) -> Vec<f64> {
    assert!(w_min > 0.0 && w_max > w_min);
    let decades = (w_max / w_min).log10();
    let n = (decades * per_decade as f64).ceil() as usize + 1;
    (0..n)
        .map(|k| w_min * 10f64.powf(decades * k as f64 / (n - 1) as f64))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::plants::HydroParams;
    use crate::synthesis::make_design_target;
    use approx::assert_abs_diff_eq;

    fn ideal_scenario(w_kin_gws: f64) -> GridScenario {
        GridScenario {
            name: "test_ideal".into(),
            f0_hz: 50.0,
            w_kin_gws,
            d_mw_per_hz: 400.0,
            fault_mw: 1400.0,
            pre_fault_freq_hz: 49.9,
            fleet: vec![
                FleetEntry {
                    id: "bus1_ideal".into(),
                    bus: 1,
                    plant: PlantModel::Ideal,
                    role: Role::Fcr,
                    weight: 0.6,
                },
                FleetEntry {
                    id: "bus2_ideal".into(),
                    bus: 2,
                    plant: PlantModel::Ideal,
                    role: Role::Fcr,
                    weight: 0.3,
                },
                FleetEntry {
                    id: "bus3_ideal".into(),
                    bus: 3,
                    plant: PlantModel::Ideal,
                    role: Role::Fcr,
                    weight: 0.1,
                },
            ],
            target: make_design_target(3100.0, 6.5, (2.0, 17.0)).unwrap(),
        }
    }

    fn hydro_scenario() -> GridScenario {
        let hydro = |t_w: f64, rating: f64| {
            PlantModel::Hydro(HydroParams {
                t_y_s: 0.2,
                t_w_s: t_w,
                g0: 0.8,
                rating_mva: rating,
            })
        };
        GridScenario {
            name: "test_hydro".into(),
            fleet: vec![
                FleetEntry {
                    id: "bus1_hydro".into(),
                    bus: 1,
                    plant: hydro(0.7, 9000.0),
                    role: Role::Fcr,
                    weight: 0.6,
                },
                FleetEntry {
                    id: "bus2_hydro".into(),
                    bus: 2,
                    plant: hydro(1.4, 6000.0),
                    role: Role::Fcr,
                    weight: 0.3,
                },
                FleetEntry {
                    id: "bus3_hydro".into(),
                    bus: 3,
                    plant: hydro(1.4, 2000.0),
                    role: Role::Fcr,
                    weight: 0.1,
                },
            ],
            ..ideal_scenario(110.0)
        }
    }

    #[test]
    fn coi_plant_low_and_high_inertia() {
        let g = coi_plant(&ideal_scenario(110.0)).unwrap();
        // 1/(4400 s + 400)
        let want = RationalTF::from_coeffs(&[1.0], &[400.0, 4400.0]).unwrap();
        assert!(g.approx_eq(&want, 1e-12));
        let pole = g.poles().unwrap().roots()[0].re;
        assert_abs_diff_eq!(pole, -400.0 / 4400.0, epsilon = 1e-12);

        let g_high = coi_plant(&ideal_scenario(240.0)).unwrap();
        let pole_high = g_high.poles().unwrap().roots()[0].re;
        assert_abs_diff_eq!(pole_high, -400.0 / 9600.0, epsilon = 1e-12);
    }

    #[test]
    fn coi_plant_without_damping_is_integrator() {
        let mut sc = ideal_scenario(110.0);
        sc.d_mw_per_hz = 0.0;
        let g = coi_plant(&sc).unwrap();
        assert_eq!(g.pole_class().unwrap(), StabilityClass::Marginal);
        assert_abs_diff_eq!(g.den().coeff(0), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn disturbance_response_dc_gains() {
        let sc = ideal_scenario(110.0);
        // F_ctl = ideal target: dc deviation = 1/(D + R)
        let g_cl = disturbance_response(&sc, &sc.target.full()).unwrap();
        assert_abs_diff_eq!(g_cl.dc_gain().unwrap(), 1.0 / 3500.0, epsilon = 1e-12);
        // no control: dc = 1/D
        let g0 = disturbance_response(&sc, &RationalTF::zero()).unwrap();
        assert_abs_diff_eq!(g0.dc_gain().unwrap(), 1.0 / 400.0, epsilon = 1e-12);
    }

    #[test]
    fn design_ideal_scenario_is_exact_matching() {
        let sc = ideal_scenario(110.0);
        let design = design_for_scenario(&sc).unwrap();
        assert!(design.normalization_refused.is_none());
        assert!(design.dpfs.sum().approx_eq(&RationalTF::one(), 1e-12));
        assert!(design.stability.verdict);
        // K_i = k_i F
        for (ctrl, k) in design.controllers.iter().zip([0.6, 0.3, 0.1]) {
            assert!(ctrl.tf.approx_eq(&sc.target.full().scale(k), 1e-12));
        }
    }

    #[test]
    fn design_hydro_scenario_leaves_mismatch_but_is_stable() {
        let design = design_for_scenario(&hydro_scenario()).unwrap();
        let refused = design.normalization_refused.as_ref().unwrap();
        assert!(!refused.is_empty());
        assert!(!design.dpfs.is_normalized());
        assert!(
            design.stability.verdict,
            "hydro-only loop is internally stable"
        );
    }

    #[test]
    fn run_fault_settles_at_static_droop() {
        let sc = ideal_scenario(110.0);
        let design = design_for_scenario(&sc).unwrap();
        let result = run_fault(&sc, &design.controller_pairs(), &RunOptions::default()).unwrap();
        let last = *result.freq_hz.last().unwrap();
        assert_abs_diff_eq!(last, 49.5, epsilon = 0.01);
        // total power equals the sum of device powers on every sample
        for k in (0..result.t.len()).step_by(997) {
            let sum: f64 = result
                .device_power_mw
                .iter()
                .map(|(_, trace)| trace[k])
                .sum();
            assert_abs_diff_eq!(sum, result.total_power_mw[k], epsilon = 1e-9);
        }
        // ideal actuation tracks the target exactly
        for k in (0..result.t.len()).step_by(997) {
            assert_abs_diff_eq!(
                result.total_power_mw[k],
                result.p_des_mw[k],
                epsilon = 1e-6
            );
        }
    }

    #[test]
    fn steady_deviation_matches_static_gain_closely() {
        let sc = ideal_scenario(110.0);
        let design = design_for_scenario(&sc).unwrap();
        let result = run_fault(&sc, &design.controller_pairs(), &RunOptions::default()).unwrap();
        let report = fcrd_compliance(&result, &sc).unwrap();
        let promised = sc.fault_mw / (sc.d_mw_per_hz + sc.target.r_fcr());
        let rel = (report.steady_deviation_hz - promised).abs() / promised;
        assert!(rel < 5e-3, "steady deviation off by {rel:.2e} relative");
    }

    #[test]
    fn wind_hydro_fleet_tracks_ideal_power() {
        let sc = crate::scenario_io::builtin("n5_low_inertia_wind_hydro").unwrap();
        let design = design_for_scenario(&sc).unwrap();
        let result = run_fault(&sc, &design.controller_pairs(), &RunOptions::default()).unwrap();
        // perfect matching: combined wind + hydro output follows P_des
        let p_max = result
            .p_des_mw
            .iter()
            .cloned()
            .fold(0.0f64, f64::max);
        for k in (0..result.t.len()).step_by(199) {
            let err = (result.total_power_mw[k] - result.p_des_mw[k]).abs();
            assert!(
                err < 1e-6 * p_max.max(1.0),
                "t={}: total {} vs ideal {}",
                result.t[k],
                result.total_power_mw[k],
                result.p_des_mw[k]
            );
        }
    }

    #[test]
    fn hydro_only_fleet_misses_ideal_power() {
        let sc = hydro_scenario();
        let design = design_for_scenario(&sc).unwrap();
        let result = run_fault(&sc, &design.controller_pairs(), &RunOptions::default()).unwrap();
        // the non-minimum-phase governors first pull power the wrong way
        let early_min = result.total_power_mw
            [..(3.0 / result.dt_s) as usize]
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min);
        assert!(early_min < -20.0, "expected reverse response, min {early_min}");
        // and the trace visibly deviates from the ideal response
        let max_gap = result
            .total_power_mw
            .iter()
            .zip(&result.p_des_mw)
            .map(|(p, d)| (p - d).abs())
            .fold(0.0f64, f64::max);
        assert!(max_gap > 100.0, "max |P_hydro - P_des| = {max_gap}");
    }

    #[test]
    fn hydro_loop_lags_ideal_loop_at_high_frequency() {
        let ideal = ideal_scenario(110.0);
        let hydro = hydro_scenario();
        let grid = log_grid(1e-2, 1e1, 40);
        let mut tables = Vec::new();
        for sc in [&ideal, &hydro] {
            let design = design_for_scenario(sc).unwrap();
            let l = open_loop(sc, &design.controller_pairs()).unwrap();
            tables.push(bode_data(&l, &grid));
        }
        let last = grid.len() - 1;
        assert!(
            tables[1][last].phase_deg < tables[0][last].phase_deg - 90.0,
            "hydro loop phase {} should dip well below ideal {}",
            tables[1][last].phase_deg,
            tables[0][last].phase_deg
        );
    }

    #[test]
    fn run_fault_agrees_with_rational_path() {
        let sc = ideal_scenario(110.0);
        let design = design_for_scenario(&sc).unwrap();
        let controllers = design.controller_pairs();
        let options = RunOptions::default();
        let result = run_fault(&sc, &controllers, &options).unwrap();
        let analytic = analytic_frequency_trace(&sc, &controllers, &options).unwrap();
        assert_eq!(result.freq_hz.len(), analytic.len());
        let rms = (result
            .freq_hz
            .iter()
            .zip(&analytic)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            / analytic.len() as f64)
            .sqrt();
        assert!(rms < 1e-6, "RMS between paths {rms}");
    }

    #[test]
    fn doubling_the_fault_doubles_every_trace() {
        let sc = ideal_scenario(110.0);
        let design = design_for_scenario(&sc).unwrap();
        let controllers = design.controller_pairs();
        let options = RunOptions {
            t_end_s: 45.0,
            ..RunOptions::default()
        };
        let base = run_fault(&sc, &controllers, &options).unwrap();
        let mut doubled_sc = sc.clone();
        doubled_sc.fault_mw *= 2.0;
        let doubled = run_fault(&doubled_sc, &controllers, &options).unwrap();
        for k in (0..base.t.len()).step_by(313) {
            let dev_base = base.freq_hz[k] - sc.pre_fault_freq_hz;
            let dev_doubled = doubled.freq_hz[k] - sc.pre_fault_freq_hz;
            assert_abs_diff_eq!(
                dev_doubled,
                2.0 * dev_base,
                epsilon = 1e-9 * dev_base.abs().max(1e-12)
            );
            assert_abs_diff_eq!(
                doubled.total_power_mw[k],
                2.0 * base.total_power_mw[k],
                epsilon = 1e-9 * base.total_power_mw[k].abs().max(1e-12)
            );
        }
    }

    #[test]
    fn nadir_shrinks_with_inertia() {
        let mut nadirs = Vec::new();
        for w_kin in [110.0, 175.0, 240.0] {
            let sc = ideal_scenario(w_kin);
            let design = design_for_scenario(&sc).unwrap();
            let result =
                run_fault(&sc, &design.controller_pairs(), &RunOptions::default()).unwrap();
            let report = fcrd_compliance(&result, &sc).unwrap();
            nadirs.push(report.nadir_deviation_hz);
        }
        assert!(nadirs[0] > nadirs[1] && nadirs[1] > nadirs[2], "{nadirs:?}");
    }

    #[test]
    fn compliance_zero_fault_trivially_passes() {
        let mut sc = ideal_scenario(110.0);
        sc.fault_mw = 0.0;
        let design = design_for_scenario(&sc).unwrap();
        let result = run_fault(&sc, &design.controller_pairs(), &RunOptions::default()).unwrap();
        let report = fcrd_compliance(&result, &sc).unwrap();
        assert!(report.pass());
        assert_abs_diff_eq!(report.nadir_deviation_hz, 0.0, epsilon = 1e-12);
        assert_eq!(report.t50_s, 0.0);
    }

    #[test]
    fn compliance_requires_post_fault_coverage() {
        let sc = ideal_scenario(110.0);
        let design = design_for_scenario(&sc).unwrap();
        let options = RunOptions {
            t_end_s: 20.0,
            ..RunOptions::default()
        };
        let result = run_fault(&sc, &design.controller_pairs(), &options).unwrap();
        assert!(matches!(
            fcrd_compliance(&result, &sc),
            Err(CoiError::SimulationTooShort { .. })
        ));
    }

    #[test]
    fn run_fault_refuses_naive_controller_without_override() {
        let sc = hydro_scenario();
        let f = sc.target.full();
        let controllers: Vec<(String, RationalTF)> = sc
            .fleet
            .iter()
            .map(|e| {
                let h = e.plant.linear_tf().unwrap();
                (e.id.clone(), f.scale(e.weight).div(&h).unwrap())
            })
            .collect();
        let err = run_fault(&sc, &controllers, &RunOptions::default()).unwrap_err();
        assert!(matches!(err, CoiError::InternalInstability(_)));
    }

    #[test]
    fn bode_all_pass_is_flat_at_zero_db() {
        let all_pass = RationalTF::from_coeffs(&[1.0, -1.0], &[1.0, 1.0]).unwrap();
        let grid = log_grid(1e-3, 1e3, 30);
        let table = bode_data(&all_pass, &grid);
        for p in &table {
            assert_abs_diff_eq!(p.mag_db, 0.0, epsilon = 1e-9);
        }
        // phase unwraps monotonically from 0 towards -180
        assert_abs_diff_eq!(table.first().unwrap().phase_deg, 0.0, epsilon = 0.2);
        assert_abs_diff_eq!(table.last().unwrap().phase_deg, -180.0, epsilon = 0.2);
        assert!(table.windows(2).all(|w| w[1].phase_deg <= w[0].phase_deg));
    }

    #[test]
    fn weights_validated_per_role() {
        let mut sc = ideal_scenario(110.0);
        sc.fleet[0].weight = 0.7;
        assert!(matches!(
            sc.validate(),
            Err(CoiError::InvalidScenario(msg)) if msg.contains("fcr weights")
        ));
    }
}

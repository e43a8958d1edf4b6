//! Controllable-source models: linearized transfer functions for hydro,
//! battery, and wind devices, a large-signal nonlinear hydro governor
//! simulator, and an energy ledger for storage sizing.

use crate::ratfun::sim::{rk4_step, Rk4Scratch};
use crate::ratfun::{Polynomial, RationalTF};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::is_pos;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PlantError {
    #[error("invalid plant parameters: {0}")]
    InvalidParams(String),
    #[error("gate command out of [0, 1] at sample {index}: {value}")]
    GateOutOfRange { index: usize, value: f64 },
    #[error("empty power trace")]
    EmptyTrace,
}

/// Hydro turbine and governor parameters (per-unit on the unit rating).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HydroParams {
    /// Servo time constant, s.
    pub t_y_s: f64,
    /// Water time constant, s.
    pub t_w_s: f64,
    /// Initial gate opening in (0, 1].
    pub g0: f64,
    /// Unit rating, MVA (bookkeeping only; responses are per-unit).
    pub rating_mva: f64,
}

impl HydroParams {
    pub fn validate(&self) -> Result<(), PlantError> {
        if !is_pos(self.t_y_s) {
            return Err(PlantError::InvalidParams(format!(
                "HydroParams.t_y_s must be > 0, got {}",
                self.t_y_s
            )));
        }
        if !is_pos(self.t_w_s) {
            return Err(PlantError::InvalidParams(format!(
                "HydroParams.t_w_s must be > 0, got {}",
                self.t_w_s
            )));
        }
        if !is_pos(self.g0) || self.g0 > 1.0 {
            return Err(PlantError::InvalidParams(format!(
                "HydroParams.g0 must be in (0, 1], got {}",
                self.g0
            )));
        }
        if !is_pos(self.rating_mva) {
            return Err(PlantError::InvalidParams(format!(
                "HydroParams.rating_mva must be > 0, got {}",
                self.rating_mva
            )));
        }
        Ok(())
    }

    /// Right-half-plane zero of the linearized waterway, `z = 1/(g0 Tw)`.
    pub fn rhp_zero(&self) -> f64 {
        1.0 / (self.g0 * self.t_w_s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BatteryParams {
    pub power_rating_mw: f64,
    pub energy_capacity_kwh: f64,
}

impl BatteryParams {
    pub fn validate(&self) -> Result<(), PlantError> {
        if !is_pos(self.power_rating_mw) {
            return Err(PlantError::InvalidParams(format!(
                "BatteryParams.power_rating_mw must be > 0, got {}",
                self.power_rating_mw
            )));
        }
        if !is_pos(self.energy_capacity_kwh) {
            return Err(PlantError::InvalidParams(format!(
                "BatteryParams.energy_capacity_kwh must be > 0, got {}",
                self.energy_capacity_kwh
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindParams {
    /// Wind speed, m/s.
    pub v_m_per_s: f64,
    /// Nominal park rating, MW.
    pub p_nom_mw: f64,
    /// Current maximum-power-point output, MW.
    pub p_mpp_mw: f64,
}

impl WindParams {
    pub fn validate(&self) -> Result<(), PlantError> {
        if !is_pos(self.v_m_per_s) {
            return Err(PlantError::InvalidParams(format!(
                "WindParams.v_m_per_s must be > 0, got {}",
                self.v_m_per_s
            )));
        }
        if !is_pos(self.p_nom_mw) {
            return Err(PlantError::InvalidParams(format!(
                "WindParams.p_nom_mw must be > 0, got {}",
                self.p_nom_mw
            )));
        }
        if !is_pos(self.p_mpp_mw) || self.p_mpp_mw > self.p_nom_mw {
            return Err(PlantError::InvalidParams(format!(
                "WindParams.p_mpp_mw must be in (0, p_nom_mw], got {}",
                self.p_mpp_mw
            )));
        }
        Ok(())
    }

    /// Worst-case turbine zero at the current wind speed, `z = 5.8e-3 v`.
    pub fn z_bar(&self) -> f64 {
        5.8e-3 * self.v_m_per_s
    }
}

/// Tagged description of a controllable power source.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PlantModel {
    Hydro(HydroParams),
    Battery(BatteryParams),
    Wind(WindParams),
    /// Ideal controllable power source, `H(s) = 1`.
    Ideal,
}

impl PlantModel {
    pub fn validate(&self) -> Result<(), PlantError> {
        match self {
            PlantModel::Hydro(p) => p.validate(),
            PlantModel::Battery(p) => p.validate(),
            PlantModel::Wind(p) => p.validate(),
            PlantModel::Ideal => Ok(()),
        }
    }

    /// Per-unit linearized transfer function of the source.
    pub fn linear_tf(&self) -> Result<RationalTF, PlantError> {
        match self {
            PlantModel::Hydro(p) => hydro_linear(p),
            PlantModel::Battery(p) => battery_linear(p),
            PlantModel::Wind(p) => wind_linear(p),
            PlantModel::Ideal => Ok(RationalTF::one()),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            PlantModel::Hydro(_) => "hydro",
            PlantModel::Battery(_) => "battery",
            PlantModel::Wind(_) => "wind",
            PlantModel::Ideal => "ideal",
        }
    }
}

/// Linearized hydro governor `2(z - s)/(s + 2z) * 1/(s Ty + 1)` with
/// `z = 1/(g0 Tw)`; unit dc gain and a single RHP zero at `z`.
pub fn hydro_linear(p: &HydroParams) -> Result<RationalTF, PlantError> {
    p.validate()?;
    let z = p.rhp_zero();
    let num = Polynomial::new(vec![2.0 * z, -2.0]);
    let den = Polynomial::new(vec![2.0 * z, 1.0]).mul(&Polynomial::new(vec![1.0, p.t_y_s]));
    Ok(RationalTF::new(num, den).expect("nonzero denominator"))
}

/// Batteries act as ideal controllable power sources on FCR time scales.
pub fn battery_linear(p: &BatteryParams) -> Result<RationalTF, PlantError> {
    p.validate()?;
    Ok(RationalTF::one())
}

/// All-pass wind model `(s - z)/(s + z)` with `z = 5.8e-3 v`; note the
/// negative dc gain: a sustained power boost costs rotor energy.
pub fn wind_linear(p: &WindParams) -> Result<RationalTF, PlantError> {
    p.validate()?;
    Ok(wind_all_pass(p.z_bar()))
}

/// Wind all-pass from an explicit zero location.
pub fn wind_all_pass(z_bar: f64) -> RationalTF {
    RationalTF::new(
        Polynomial::new(vec![-z_bar, 1.0]),
        Polynomial::new(vec![z_bar, 1.0]),
    )
    .expect("nonzero denominator")
}

/// Large-signal hydro governor: first-order gate servo driving the
/// classical per-unit penstock model
///
/// ```text
///   Ty g' = cmd - g
///   Tw q' = 1 - (q/g)^2
///   Pm    = q (q/g)^2
/// ```
///
/// starting at steady state for `g0`. The commands are held constant over
/// each integration cell. Returns the mechanical power on the command grid.
pub fn hydro_nonlinear_sim(
    p: &HydroParams,
    gate_commands: &[f64],
    dt: f64,
) -> Result<Vec<f64>, PlantError> {
    p.validate()?;
    if gate_commands.is_empty() {
        return Err(PlantError::EmptyTrace);
    }
    assert!(dt > 0.0, "dt must be positive");
    for (index, &value) in gate_commands.iter().enumerate() {
        if !(0.0..=1.0).contains(&value) {
            return Err(PlantError::GateOutOfRange { index, value });
        }
    }

    const GATE_FLOOR: f64 = 1e-6;
    let t_y = p.t_y_s;
    let t_w = p.t_w_s;
    let mut state = [p.g0, p.g0]; // [gate, flow]
    let mut scratch = Rk4Scratch::default();
    let power = |s: &[f64]| {
        let head = (s[1] / s[0].max(GATE_FLOOR)).powi(2);
        s[1] * head
    };

    let mut out = Vec::with_capacity(gate_commands.len());
    out.push(power(&state));
    for k in 1..gate_commands.len() {
        let cmd = gate_commands[k - 1];
        rk4_step(
            &mut state,
            dt,
            |s, ds| {
                let g = s[0].max(GATE_FLOOR);
                ds[0] = (cmd - s[0]) / t_y;
                ds[1] = (1.0 - (s[1] / g).powi(2)) / t_w;
            },
            &mut scratch,
        );
        out.push(power(&state));
    }
    Ok(out)
}

/// Storage bookkeeping over a power-deviation trace.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyLedger {
    /// Time grid, s.
    pub t: Vec<f64>,
    /// Power deviation, MW.
    pub power_mw: Vec<f64>,
    /// Running trapezoidal integral of power, kWh.
    pub cumulative_kwh: Vec<f64>,
    /// Largest absolute power over the trace, MW.
    pub peak_mw: f64,
}

impl EnergyLedger {
    /// Net energy at the end of the trace, kWh.
    pub fn final_kwh(&self) -> f64 {
        *self.cumulative_kwh.last().unwrap_or(&0.0)
    }

    /// Largest absolute cumulative energy excursion, kWh: the storage
    /// capacity needed to ride through the trace.
    pub fn peak_energy_kwh(&self) -> f64 {
        self.cumulative_kwh
            .iter()
            .fold(0.0f64, |m, e| m.max(e.abs()))
    }
}

/// Trapezoidal energy ledger on a uniform grid; MW over seconds accumulate
/// as `MW * s / 3600 * 1000 = kWh`.
pub fn energy_ledger(power_mw: &[f64], dt: f64) -> Result<EnergyLedger, PlantError> {
    if power_mw.is_empty() {
        return Err(PlantError::EmptyTrace);
    }
    assert!(dt > 0.0, "dt must be positive");
    let mut t = Vec::with_capacity(power_mw.len());
    let mut cumulative = Vec::with_capacity(power_mw.len());
    let mut acc_mws = 0.0;
    let mut peak = 0.0f64;
    for (k, &p) in power_mw.iter().enumerate() {
        if k > 0 {
            acc_mws += dt * 0.5 * (power_mw[k - 1] + p);
        }
        t.push(k as f64 * dt);
        cumulative.push(acc_mws / 3.6);
        peak = peak.max(p.abs());
    }
    Ok(EnergyLedger {
        t,
        power_mw: power_mw.to_vec(),
        cumulative_kwh: cumulative,
        peak_mw: peak,
    })
}

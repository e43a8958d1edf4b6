//! Scenario persistence and export: the JSON scenario schema, the built-in
//! study cases, CSV writers for time series and Bode tables, and the run
//! manifest tying outputs to a scenario hash.

use crate::coi_sim::{BodePoint, CoiError, ComplianceReport, FleetEntry, GridScenario, SimResult};
use crate::plants::{BatteryParams, HydroParams, PlantModel, WindParams};
use crate::synthesis::{make_design_target, Role};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;
use thiserror::Error;

/// Only schema understood by this build.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot access '{path}': {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error in '{path}' at {location}: {message}")]
    Parse {
        path: String,
        /// Field path plus line/column of the offending input.
        location: String,
        message: String,
    },
    #[error("validation error: {0}")]
    Validation(String),
    #[error("unsupported schema_version {0}; this build reads version 1")]
    UnsupportedSchema(u32),
    #[error("unknown scenario '{0}': not a built-in name and not a readable file")]
    UnknownScenario(String),
}

/// On-disk scenario representation; field names are the schema.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub schema_version: u32,
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    pub f0_hz: f64,
    pub w_kin_gws: f64,
    pub d_mw_per_hz: f64,
    pub fault_mw: f64,
    pub pre_fault_freq_hz: f64,
    pub target: TargetSpec,
    /// Fleet entries keyed by device id.
    pub fleet: BTreeMap<String, FleetEntrySpec>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetSpec {
    pub r_fcr_mw_per_hz: f64,
    pub zero_tc_s: f64,
    pub pole_tcs_s: [f64; 2],
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FleetEntrySpec {
    pub bus: u32,
    pub role: Role,
    pub weight: f64,
    pub device: PlantModel,
}

impl ScenarioFile {
    pub fn from_scenario(scenario: &GridScenario) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            name: scenario.name.clone(),
            description: None,
            f0_hz: scenario.f0_hz,
            w_kin_gws: scenario.w_kin_gws,
            d_mw_per_hz: scenario.d_mw_per_hz,
            fault_mw: scenario.fault_mw,
            pre_fault_freq_hz: scenario.pre_fault_freq_hz,
            target: TargetSpec {
                r_fcr_mw_per_hz: scenario.target.r_fcr(),
                zero_tc_s: scenario.target.zero_tc_s(),
                pole_tcs_s: [
                    scenario.target.pole_tcs_s().0,
                    scenario.target.pole_tcs_s().1,
                ],
            },
            fleet: scenario
                .fleet
                .iter()
                .map(|e| {
                    (
                        e.id.clone(),
                        FleetEntrySpec {
                            bus: e.bus,
                            role: e.role,
                            weight: e.weight,
                            device: e.plant.clone(),
                        },
                    )
                })
                .collect(),
        }
    }

    /// Validated conversion into the simulation model. Fleet order follows
    /// the sorted device ids of the file.
    pub fn into_scenario(self) -> Result<GridScenario, ScenarioError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(ScenarioError::UnsupportedSchema(self.schema_version));
        }
        let target = make_design_target(
            self.target.r_fcr_mw_per_hz,
            self.target.zero_tc_s,
            (self.target.pole_tcs_s[0], self.target.pole_tcs_s[1]),
        )
        .map_err(|e| ScenarioError::Validation(e.to_string()))?;
        let fleet = self
            .fleet
            .into_iter()
            .map(|(id, spec)| FleetEntry {
                id,
                bus: spec.bus,
                plant: spec.device,
                role: spec.role,
                weight: spec.weight,
            })
            .collect();
        let scenario = GridScenario {
            name: self.name,
            f0_hz: self.f0_hz,
            w_kin_gws: self.w_kin_gws,
            d_mw_per_hz: self.d_mw_per_hz,
            fault_mw: self.fault_mw,
            pre_fault_freq_hz: self.pre_fault_freq_hz,
            fleet,
            target,
        };
        scenario
            .validate()
            .map_err(|e| ScenarioError::Validation(validation_message(e)))?;
        Ok(scenario)
    }
}

fn validation_message(e: CoiError) -> String {
    match e {
        CoiError::InvalidScenario(msg) => msg,
        other => other.to_string(),
    }
}

/// Parses and validates a scenario file.
pub fn load_scenario(path: impl AsRef<Path>) -> Result<GridScenario, ScenarioError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_scenario_str(&text, &path.display().to_string())
}

/// Parses scenario JSON, reporting the offending field path and position on
/// failure.
pub fn parse_scenario_str(text: &str, origin: &str) -> Result<GridScenario, ScenarioError> {
    let deserializer = &mut serde_json::Deserializer::from_str(text);
    let file: ScenarioFile =
        serde_path_to_error::deserialize(deserializer).map_err(|err| ScenarioError::Parse {
            path: origin.to_string(),
            location: format!(
                "{} (line {}, column {})",
                err.path(),
                err.inner().line(),
                err.inner().column()
            ),
            message: err.inner().to_string(),
        })?;
    file.into_scenario()
}

/// Serializes a scenario as pretty JSON.
pub fn scenario_to_json(scenario: &GridScenario) -> String {
    let mut out = serde_json::to_string_pretty(&ScenarioFile::from_scenario(scenario))
        .expect("scenario serialization cannot fail");
    out.push('\n');
    out
}

pub fn save_scenario(scenario: &GridScenario, path: impl AsRef<Path>) -> Result<(), ScenarioError> {
    let path = path.as_ref();
    std::fs::write(path, scenario_to_json(scenario)).map_err(|source| ScenarioError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// SHA-256 of the canonical scenario JSON; changes iff the scenario content
/// changes.
pub fn scenario_hash(scenario: &GridScenario) -> String {
    let canonical = serde_json::to_string(&ScenarioFile::from_scenario(scenario))
        .expect("scenario serialization cannot fail");
    let digest = Sha256::digest(canonical.as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

// ---------------------------------------------------------------------------
// Built-in study cases
// ---------------------------------------------------------------------------

/// Names of the packaged scenarios, in listing order.
pub fn builtin_names() -> Vec<&'static str> {
    vec![
        "two_hydro",
        "battery_hydro",
        "wind_hydro",
        "n5_low_inertia_ideal",
        "n5_high_inertia_ideal",
        "n5_low_inertia_hydro",
        "n5_low_inertia_wind_hydro",
    ]
}

/// Builds a packaged scenario by name.
pub fn builtin(name: &str) -> Option<GridScenario> {
    let scenario = match name {
        "two_hydro" => two_hydro(),
        "battery_hydro" => battery_hydro(),
        "wind_hydro" => wind_hydro(),
        "n5_low_inertia_ideal" => n5_ideal("n5_low_inertia_ideal", 110.0),
        "n5_high_inertia_ideal" => n5_ideal("n5_high_inertia_ideal", 240.0),
        "n5_low_inertia_hydro" => n5_hydro(),
        "n5_low_inertia_wind_hydro" => n5_wind_hydro(),
        _ => return None,
    };
    Some(scenario)
}

/// Resolves a CLI scenario argument: built-in name first, then file path.
pub fn resolve_scenario(arg: &str) -> Result<GridScenario, ScenarioError> {
    if let Some(scenario) = builtin(arg) {
        return Ok(scenario);
    }
    if Path::new(arg).exists() {
        return load_scenario(arg);
    }
    Err(ScenarioError::UnknownScenario(arg.to_string()))
}

fn nordic_frame(name: &str, w_kin_gws: f64, fleet: Vec<FleetEntry>) -> GridScenario {
    GridScenario {
        name: name.to_string(),
        f0_hz: 50.0,
        w_kin_gws,
        d_mw_per_hz: 400.0,
        fault_mw: 1400.0,
        pre_fault_freq_hz: 49.9,
        fleet,
        target: make_design_target(3100.0, 6.5, (2.0, 17.0)).expect("valid target"),
    }
}

fn hydro(t_w_s: f64, rating_mva: f64) -> PlantModel {
    PlantModel::Hydro(HydroParams {
        t_y_s: 0.2,
        t_w_s,
        g0: 0.8,
        rating_mva,
    })
}

fn entry(id: &str, bus: u32, plant: PlantModel, role: Role, weight: f64) -> FleetEntry {
    FleetEntry {
        id: id.to_string(),
        bus,
        plant,
        role,
        weight,
    }
}

/// Two 50 MVA hydro units sharing a 20 MW/Hz target equally.
fn two_hydro() -> GridScenario {
    let mut sc = nordic_frame(
        "two_hydro",
        110.0,
        vec![
            entry("hydro1", 1, hydro(1.25, 50.0), Role::Fcr, 0.5),
            entry("hydro2", 2, hydro(2.5, 50.0), Role::Fcr, 0.5),
        ],
    );
    sc.target = make_design_target(20.0, 6.5, (2.0, 17.0)).expect("valid target");
    sc
}

/// The two-hydro pair assisted by an ideal battery on fast reserves.
fn battery_hydro() -> GridScenario {
    let mut sc = two_hydro();
    sc.name = "battery_hydro".into();
    sc.fleet.push(entry(
        "battery3",
        3,
        PlantModel::Battery(BatteryParams {
            power_rating_mw: 10.0,
            energy_capacity_kwh: 30.0,
        }),
        Role::Ffr,
        1.0,
    ));
    sc
}

/// The two-hydro pair assisted by a 30 MW wind park at 8 m/s.
fn wind_hydro() -> GridScenario {
    let mut sc = two_hydro();
    sc.name = "wind_hydro".into();
    sc.fleet.push(entry(
        "wind3",
        3,
        PlantModel::Wind(WindParams {
            v_m_per_s: 8.0,
            p_nom_mw: 30.0,
            p_mpp_mw: 20.0,
        }),
        Role::Ffr,
        1.0,
    ));
    sc
}

/// Ideal controllable sources at buses 1-3 delivering the N5 target.
fn n5_ideal(name: &str, w_kin_gws: f64) -> GridScenario {
    nordic_frame(
        name,
        w_kin_gws,
        vec![
            entry("bus1_ideal", 1, PlantModel::Ideal, Role::Fcr, 0.6),
            entry("bus2_ideal", 2, PlantModel::Ideal, Role::Fcr, 0.3),
            entry("bus3_ideal", 3, PlantModel::Ideal, Role::Fcr, 0.1),
        ],
    )
}

/// Hydro-only FCR in the low-inertia N5 case; ratings follow the bus
/// generation capacities.
fn n5_hydro() -> GridScenario {
    nordic_frame(
        "n5_low_inertia_hydro",
        110.0,
        vec![
            entry("bus1_hydro", 1, hydro(0.7, 9000.0), Role::Fcr, 0.6),
            entry("bus2_hydro", 2, hydro(1.4, 6000.0), Role::Fcr, 0.3),
            entry("bus3_hydro", 3, hydro(1.4, 2000.0), Role::Fcr, 0.1),
        ],
    )
}

/// Hydro FCR complemented by wind FFR at buses 2 and 4. The one-third and
/// two-thirds shares are stored exactly so the weights sum to 1.
fn n5_wind_hydro() -> GridScenario {
    let mut sc = n5_hydro();
    sc.name = "n5_low_inertia_wind_hydro".into();
    sc.fleet.push(entry(
        "bus2_wind",
        2,
        PlantModel::Wind(WindParams {
            v_m_per_s: 10.0,
            p_nom_mw: 500.0,
            p_mpp_mw: 348.0,
        }),
        Role::Ffr,
        1.0 / 3.0,
    ));
    sc.fleet.push(entry(
        "bus4_wind",
        4,
        PlantModel::Wind(WindParams {
            v_m_per_s: 8.0,
            p_nom_mw: 1500.0,
            p_mpp_mw: 534.0,
        }),
        Role::Ffr,
        2.0 / 3.0,
    ));
    sc
}

// ---------------------------------------------------------------------------
// CSV export and the run manifest
// ---------------------------------------------------------------------------

fn fmt9(x: f64) -> String {
    // 9 significant digits
    format!("{x:.8e}")
}

fn create(path: &Path) -> Result<std::io::BufWriter<std::fs::File>, ScenarioError> {
    let file = std::fs::File::create(path).map_err(|source| ScenarioError::Io {
        path: path.display().to_string(),
        source,
    })?;
    Ok(std::io::BufWriter::new(file))
}

fn io_err(path: &Path, source: std::io::Error) -> ScenarioError {
    ScenarioError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Writes `t_s,freq_hz,p_des_mw` plus one column per device id.
pub fn export_timeseries(result: &SimResult, path: impl AsRef<Path>) -> Result<(), ScenarioError> {
    let path = path.as_ref();
    let mut w = create(path)?;
    let mut header = vec!["t_s".to_string(), "freq_hz".into(), "p_des_mw".into()];
    header.extend(result.device_power_mw.iter().map(|(id, _)| id.clone()));
    writeln!(w, "{}", header.join(",")).map_err(|e| io_err(path, e))?;
    for k in 0..result.t.len() {
        let mut row = vec![
            fmt9(result.t[k]),
            fmt9(result.freq_hz[k]),
            fmt9(result.p_des_mw[k]),
        ];
        row.extend(
            result
                .device_power_mw
                .iter()
                .map(|(_, trace)| fmt9(trace[k])),
        );
        writeln!(w, "{}", row.join(",")).map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

/// Writes `omega_rad_s,mag_db,phase_deg`.
pub fn export_bode(table: &[BodePoint], path: impl AsRef<Path>) -> Result<(), ScenarioError> {
    let path = path.as_ref();
    let mut w = create(path)?;
    writeln!(w, "omega_rad_s,mag_db,phase_deg").map_err(|e| io_err(path, e))?;
    for p in table {
        writeln!(
            w,
            "{},{},{}",
            fmt9(p.omega_rad_s),
            fmt9(p.mag_db),
            fmt9(p.phase_deg)
        )
        .map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

#[derive(Debug, Clone, Serialize)]
pub struct SolverSettings {
    pub dt_s: f64,
    pub t_end_s: f64,
    pub fault_time_s: f64,
}

/// Record of one simulate run: what was run, with which solver settings,
/// which files came out, and the verdict.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub scenario_name: String,
    /// SHA-256 over the canonical scenario JSON.
    pub scenario_hash: String,
    pub solver: SolverSettings,
    pub outputs: Vec<String>,
    pub compliance: ComplianceReport,
}

pub fn write_manifest(manifest: &RunManifest, path: impl AsRef<Path>) -> Result<(), ScenarioError> {
    let path = path.as_ref();
    let mut text =
        serde_json::to_string_pretty(manifest).expect("manifest serialization cannot fail");
    text.push('\n');
    std::fs::write(path, text).map_err(|source| ScenarioError::Io {
        path: path.display().to_string(),
        source,
    })
}

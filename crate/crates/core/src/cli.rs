//! Command-line interface: scenario listing, controller synthesis, fault
//! simulation with CSV/JSON export, Bode tables, and the FCR-D check.
//!
//! Exit codes: 0 on success, 1 on compliance/stability failure or a failed
//! run, 2 on usage or input errors.

use crate::coi_sim::{
    bode_data, design_for_scenario, fcrd_compliance, log_grid, open_loop, run_fault, CoiError,
    GridScenario, RunOptions, ScenarioDesign,
};
use crate::scenario_io::{
    builtin_names, export_bode, export_timeseries, resolve_scenario, scenario_hash,
    scenario_to_json, write_manifest, RunManifest, ScenarioError, SolverSettings,
};
use crate::synthesis::{StabilityReport, SynthesisError};
use crate::RationalTF;
use clap::{Parser, Subcommand};
use serde::Serialize;
use std::path::{Path, PathBuf};

/// Environment variable naming the default output directory for `simulate`.
pub const OUT_DIR_ENV: &str = "DVPP_OUT_DIR";

#[derive(Parser)]
#[command(
    name = "dvpp",
    version,
    about = "Dynamic virtual power plant design and center-of-inertia fault simulation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Inspect the packaged study scenarios
    Scenario {
        #[command(subcommand)]
        action: ScenarioAction,
    },
    /// Design participation factors, controllers, and the stability report
    Synthesize {
        /// Built-in scenario name or path to a scenario JSON file
        scenario: String,
        /// Write the full synthesis result as JSON
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the disconnection fault and export traces plus compliance
    Simulate {
        /// Built-in scenario name or path to a scenario JSON file
        scenario: String,
        /// Integration step, s
        #[arg(long, default_value_t = crate::ratfun::DEFAULT_DT)]
        dt: f64,
        /// Simulation horizon, s
        #[arg(long = "t-end", default_value_t = crate::ratfun::DEFAULT_T_END)]
        t_end: f64,
        /// Output directory (default: $DVPP_OUT_DIR or the working directory)
        #[arg(long = "out-dir")]
        out_dir: Option<PathBuf>,
    },
    /// Tabulate the aggregate open-loop Bode response
    Bode {
        /// Built-in scenario name or path to a scenario JSON file
        scenario: String,
        /// Write CSV here instead of standard output
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Exit 0 iff FCR-D passes and the loop is internally stable
    Check {
        /// Built-in scenario name or path to a scenario JSON file
        scenario: String,
    },
}

#[derive(Subcommand)]
enum ScenarioAction {
    /// List built-in scenario names
    List,
    /// Print a built-in scenario as JSON
    Show { name: String },
}

/// Runs the CLI on explicit arguments and returns the process exit code.
pub fn cli_main<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(err) => {
            let code = err.exit_code();
            let _ = err.print();
            return code;
        }
    };
    match run(cli.command) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            err.exit_code()
        }
    }
}

enum CliError {
    Input(ScenarioError),
    Run(String),
}

impl CliError {
    fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 2,
            CliError::Run(_) => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Input(e) => write!(f, "{e}"),
            CliError::Run(msg) => write!(f, "{msg}"),
        }
    }
}

impl From<ScenarioError> for CliError {
    fn from(e: ScenarioError) -> Self {
        CliError::Input(e)
    }
}

impl From<CoiError> for CliError {
    fn from(e: CoiError) -> Self {
        CliError::Run(e.to_string())
    }
}

impl From<SynthesisError> for CliError {
    fn from(e: SynthesisError) -> Self {
        CliError::Run(e.to_string())
    }
}

fn run(command: Command) -> Result<i32, CliError> {
    match command {
        Command::Scenario { action } => scenario_cmd(action),
        Command::Synthesize { scenario, out } => synthesize_cmd(&scenario, out.as_deref()),
        Command::Simulate {
            scenario,
            dt,
            t_end,
            out_dir,
        } => simulate_cmd(&scenario, dt, t_end, out_dir),
        Command::Bode { scenario, out } => bode_cmd(&scenario, out.as_deref()),
        Command::Check { scenario } => check_cmd(&scenario),
    }
}

fn scenario_cmd(action: ScenarioAction) -> Result<i32, CliError> {
    match action {
        ScenarioAction::List => {
            for name in builtin_names() {
                println!("{name}");
            }
            Ok(0)
        }
        ScenarioAction::Show { name } => {
            let scenario = resolve_scenario(&name)?;
            print!("{}", scenario_to_json(&scenario));
            Ok(0)
        }
    }
}

fn print_stability(report: &StabilityReport) {
    println!(
        "stability: sensitivity_stable={}, cancellations={}, interpolation_violations={} -> {}",
        report.sensitivity_stable,
        report.cancellations.len(),
        report.interpolation_violations.len(),
        if report.verdict { "PASS" } else { "FAIL" }
    );
    for c in &report.cancellations {
        println!(
            "  RHP cancellation on '{}': {} at {} + {}i",
            c.device, c.kind, c.root.re, c.root.im
        );
    }
    for v in &report.interpolation_violations {
        println!(
            "  interpolation violation on '{}': |L({} + {}i)| = {:.3e}",
            v.device, v.zero.re, v.zero.im, v.magnitude
        );
    }
}

fn synthesize_cmd(scenario_arg: &str, out: Option<&Path>) -> Result<i32, CliError> {
    let scenario = resolve_scenario(scenario_arg)?;
    let design = design_for_scenario(&scenario)?;

    println!("scenario: {}", scenario.name);
    println!(
        "target: R_fcr = {} MW/Hz, filter = {}",
        scenario.target.r_fcr(),
        scenario.target.filter()
    );
    match &design.normalization_refused {
        None => println!("participation factors normalized: sum c_i(s) = 1"),
        Some(zeros) => {
            let list: Vec<String> = zeros
                .iter()
                .map(|z| format!("{} + {}i", z.re, z.im))
                .collect();
            println!(
                "normalization refused (sum has RHP zeros at {}); factors left unnormalized",
                list.join(", ")
            );
        }
    }
    for entry in design.dpfs.entries() {
        println!("device {} ({}, k = {})", entry.device, entry.role, entry.weight);
        println!("  c(s) = {}", entry.dpf);
        if let Some(ctrl) = design.controllers.iter().find(|c| c.device == entry.device) {
            println!("  K(s) = {}", ctrl.tf);
            if ctrl.rolloff_poles_added > 0 {
                println!(
                    "  ({} roll-off pole(s) added for properness)",
                    ctrl.rolloff_poles_added
                );
            }
        }
    }
    print_stability(&design.stability);

    if let Some(path) = out {
        let json = synthesis_json(&scenario, &design);
        std::fs::write(path, json).map_err(|source| {
            CliError::Input(ScenarioError::Io {
                path: path.display().to_string(),
                source,
            })
        })?;
        println!("wrote {}", path.display());
    }
    Ok(0)
}

#[derive(Serialize)]
struct TfJson {
    /// Ascending powers of s.
    num: Vec<f64>,
    den: Vec<f64>,
}

impl TfJson {
    fn from_tf(tf: &RationalTF) -> Self {
        Self {
            num: tf.num().coeffs().to_vec(),
            den: tf.den().coeffs().to_vec(),
        }
    }
}

#[derive(Serialize)]
struct EntryJson {
    device: String,
    role: String,
    weight: f64,
    dpf: TfJson,
    controller: TfJson,
    rolloff_poles_added: usize,
}

#[derive(Serialize)]
struct StabilityJson {
    sensitivity_stable: bool,
    marginal_sensitivity_poles: Vec<[f64; 2]>,
    cancellations: Vec<CancellationJson>,
    interpolation_violations: Vec<ViolationJson>,
    verdict: bool,
}

#[derive(Serialize)]
struct CancellationJson {
    device: String,
    root: [f64; 2],
    kind: String,
}

#[derive(Serialize)]
struct ViolationJson {
    device: String,
    zero: [f64; 2],
    magnitude: f64,
}

#[derive(Serialize)]
struct SynthesisJson {
    scenario: String,
    scenario_hash: String,
    r_fcr_mw_per_hz: f64,
    target_filter: TfJson,
    normalized: bool,
    normalization_refused_zeros: Option<Vec<[f64; 2]>>,
    entries: Vec<EntryJson>,
    stability: StabilityJson,
}

fn synthesis_json(scenario: &GridScenario, design: &ScenarioDesign) -> String {
    let entries = design
        .dpfs
        .entries()
        .iter()
        .map(|e| {
            let ctrl = design
                .controllers
                .iter()
                .find(|c| c.device == e.device)
                .expect("controller per entry");
            EntryJson {
                device: e.device.clone(),
                role: e.role.to_string(),
                weight: e.weight,
                dpf: TfJson::from_tf(&e.dpf),
                controller: TfJson::from_tf(&ctrl.tf),
                rolloff_poles_added: ctrl.rolloff_poles_added,
            }
        })
        .collect();
    let stability = StabilityJson {
        sensitivity_stable: design.stability.sensitivity_stable,
        marginal_sensitivity_poles: design
            .stability
            .marginal_sensitivity_poles
            .iter()
            .map(|p| [p.re, p.im])
            .collect(),
        cancellations: design
            .stability
            .cancellations
            .iter()
            .map(|c| CancellationJson {
                device: c.device.clone(),
                root: [c.root.re, c.root.im],
                kind: c.kind.to_string(),
            })
            .collect(),
        interpolation_violations: design
            .stability
            .interpolation_violations
            .iter()
            .map(|v| ViolationJson {
                device: v.device.clone(),
                zero: [v.zero.re, v.zero.im],
                magnitude: v.magnitude,
            })
            .collect(),
        verdict: design.stability.verdict,
    };
    let doc = SynthesisJson {
        scenario: scenario.name.clone(),
        scenario_hash: scenario_hash(scenario),
        r_fcr_mw_per_hz: scenario.target.r_fcr(),
        target_filter: TfJson::from_tf(scenario.target.filter()),
        normalized: design.dpfs.is_normalized(),
        normalization_refused_zeros: design
            .normalization_refused
            .as_ref()
            .map(|zs| zs.iter().map(|z| [z.re, z.im]).collect()),
        entries,
        stability,
    };
    let mut text = serde_json::to_string_pretty(&doc).expect("serialization cannot fail");
    text.push('\n');
    text
}

fn output_dir(cli_choice: Option<PathBuf>) -> PathBuf {
    cli_choice
        .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."))
}

fn simulate_cmd(
    scenario_arg: &str,
    dt: f64,
    t_end: f64,
    out_dir: Option<PathBuf>,
) -> Result<i32, CliError> {
    let scenario = resolve_scenario(scenario_arg)?;
    let design = design_for_scenario(&scenario)?;
    let options = RunOptions {
        dt_s: dt,
        t_end_s: t_end,
        ..RunOptions::default()
    };
    let result = run_fault(&scenario, &design.controller_pairs(), &options)?;
    let compliance = fcrd_compliance(&result, &scenario)?;

    let dir = output_dir(out_dir);
    std::fs::create_dir_all(&dir).map_err(|source| {
        CliError::Input(ScenarioError::Io {
            path: dir.display().to_string(),
            source,
        })
    })?;
    let ts_path = dir.join(format!("{}_timeseries.csv", scenario.name));
    let compliance_path = dir.join(format!("{}_compliance.json", scenario.name));
    let manifest_path = dir.join(format!("{}_manifest.json", scenario.name));
    export_timeseries(&result, &ts_path)?;
    let mut compliance_text =
        serde_json::to_string_pretty(&compliance).expect("serialization cannot fail");
    compliance_text.push('\n');
    std::fs::write(&compliance_path, compliance_text).map_err(|source| {
        CliError::Input(ScenarioError::Io {
            path: compliance_path.display().to_string(),
            source,
        })
    })?;
    let manifest = RunManifest {
        scenario_name: scenario.name.clone(),
        scenario_hash: scenario_hash(&scenario),
        solver: SolverSettings {
            dt_s: options.dt_s,
            t_end_s: options.t_end_s,
            fault_time_s: options.fault_time_s,
        },
        outputs: vec![
            ts_path.display().to_string(),
            compliance_path.display().to_string(),
        ],
        compliance: compliance.clone(),
    };
    write_manifest(&manifest, &manifest_path)?;

    println!("scenario: {}", scenario.name);
    println!(
        "nadir {:.4} Hz, steady state {:.4} Hz, t50 {:.2} s, t_full {:.2} s",
        compliance.nadir_hz, compliance.steady_state_hz, compliance.t50_s, compliance.t_full_s
    );
    println!(
        "FCR-D: {}",
        if compliance.pass() { "PASS" } else { "FAIL" }
    );
    println!("wrote {}", ts_path.display());
    println!("wrote {}", compliance_path.display());
    println!("wrote {}", manifest_path.display());
    Ok(0)
}

fn bode_cmd(scenario_arg: &str, out: Option<&Path>) -> Result<i32, CliError> {
    let scenario = resolve_scenario(scenario_arg)?;
    let design = design_for_scenario(&scenario)?;
    let loop_gain = open_loop(&scenario, &design.controller_pairs())?;
    let grid = log_grid(1e-3, 1e3, 60);
    let table = bode_data(&loop_gain, &grid);
    match out {
        Some(path) => {
            export_bode(&table, path)?;
            println!("wrote {}", path.display());
        }
        None => {
            println!("omega_rad_s,mag_db,phase_deg");
            for p in &table {
                println!("{:.8e},{:.8e},{:.8e}", p.omega_rad_s, p.mag_db, p.phase_deg);
            }
        }
    }
    Ok(0)
}

fn check_cmd(scenario_arg: &str) -> Result<i32, CliError> {
    let scenario = resolve_scenario(scenario_arg)?;
    let design = design_for_scenario(&scenario)?;
    print_stability(&design.stability);
    if !design.stability.verdict {
        eprintln!("check: internal stability FAIL");
        return Ok(1);
    }
    let result = run_fault(&scenario, &design.controller_pairs(), &RunOptions::default())?;
    let compliance = fcrd_compliance(&result, &scenario)?;
    println!(
        "nadir deviation {:.4} Hz (limit {}), t50 {:.2} s (limit {}), t_full {:.2} s (limit {}), steady {:.4} Hz",
        compliance.nadir_deviation_hz,
        crate::coi_sim::NADIR_LIMIT_HZ,
        compliance.t50_s,
        crate::coi_sim::T50_LIMIT_S,
        compliance.t_full_s,
        crate::coi_sim::T_FULL_LIMIT_S,
        compliance.steady_state_hz,
    );
    println!(
        "nadir: {} | t50: {} | full: {} | steady: {}",
        pass_str(compliance.pass_nadir),
        pass_str(compliance.pass_t50),
        pass_str(compliance.pass_full),
        pass_str(compliance.pass_steady)
    );
    if compliance.pass() {
        println!("check: PASS");
        Ok(0)
    } else {
        eprintln!("check: FCR-D FAIL");
        Ok(1)
    }
}

fn pass_str(ok: bool) -> &'static str {
    if ok {
        "pass"
    } else {
        "FAIL"
    }
}

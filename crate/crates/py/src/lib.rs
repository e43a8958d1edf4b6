//! Python bindings for the DVPP library: the rational transfer-function
//! type, plant factories, participation-factor synthesis, and the packaged
//! scenario pipeline (synthesize / simulate / check).

use dvpp::coi_sim::{design_for_scenario, fcrd_compliance, open_loop, run_fault, RunOptions};
use dvpp::plants::{BatteryParams, HydroParams, WindParams};
use dvpp::ratfun::{crossover_frequency, step_response};
use dvpp::scenario_io::{builtin_names, resolve_scenario, scenario_to_json};
use dvpp::synthesis::{self, make_design_target, DpfEntry, DpfSet, PlantInput, Role};
use dvpp::{RationalTF, RootSet};
use num_complex::Complex64;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn runtime_err(e: impl std::fmt::Display) -> PyErr {
    PyRuntimeError::new_err(e.to_string())
}

/// Rational transfer function with real coefficients in ascending powers
/// of s.
#[pyclass(name = "RationalTF", from_py_object)]
#[derive(Clone)]
struct PyRationalTF {
    inner: RationalTF,
}

#[pymethods]
impl PyRationalTF {
    #[new]
    fn new(num: Vec<f64>, den: Vec<f64>) -> PyResult<Self> {
        Ok(Self {
            inner: RationalTF::from_coeffs(&num, &den).map_err(value_err)?,
        })
    }

    #[staticmethod]
    fn one() -> Self {
        Self {
            inner: RationalTF::one(),
        }
    }

    #[staticmethod]
    fn zero() -> Self {
        Self {
            inner: RationalTF::zero(),
        }
    }

    #[staticmethod]
    fn constant(c: f64) -> Self {
        Self {
            inner: RationalTF::constant(c),
        }
    }

    /// Numerator coefficients, ascending powers of s.
    fn num(&self) -> Vec<f64> {
        self.inner.num().coeffs().to_vec()
    }

    /// Denominator coefficients, ascending powers of s (monic).
    fn den(&self) -> Vec<f64> {
        self.inner.den().coeffs().to_vec()
    }

    fn is_proper(&self) -> bool {
        self.inner.is_proper()
    }

    fn is_stable(&self) -> PyResult<bool> {
        self.inner.is_stable().map_err(runtime_err)
    }

    fn is_minimum_phase(&self) -> PyResult<bool> {
        self.inner.is_minimum_phase().map_err(runtime_err)
    }

    fn poles(&self) -> PyResult<Vec<Complex64>> {
        Ok(self.inner.poles().map_err(runtime_err)?.roots().to_vec())
    }

    fn zeros(&self) -> PyResult<Vec<Complex64>> {
        Ok(self.inner.zeros().map_err(runtime_err)?.roots().to_vec())
    }

    fn dc_gain(&self) -> PyResult<f64> {
        self.inner.dc_gain().map_err(value_err)
    }

    fn hf_gain(&self) -> PyResult<f64> {
        self.inner.hf_gain().map_err(value_err)
    }

    /// Evaluate at s = jw for each w in the grid.
    fn freq_response(&self, omegas: Vec<f64>) -> PyResult<Vec<Complex64>> {
        self.inner.freq_response(&omegas).map_err(runtime_err)
    }

    /// Unit step response; returns (t, y).
    #[pyo3(signature = (t_end, dt=1e-3))]
    fn step_response(&self, t_end: f64, dt: f64) -> PyResult<(Vec<f64>, Vec<f64>)> {
        let resp = step_response(&self.inner, t_end, dt).map_err(runtime_err)?;
        Ok((resp.t, resp.y))
    }

    /// Smallest unity-gain crossover frequency, rad/s.
    fn crossover(&self) -> PyResult<f64> {
        crossover_frequency(&self.inner).map_err(runtime_err)
    }

    fn __add__(&self, other: &Self) -> Self {
        Self {
            inner: self.inner.add(&other.inner),
        }
    }

    fn __sub__(&self, other: &Self) -> Self {
        Self {
            inner: self.inner.sub(&other.inner),
        }
    }

    fn __mul__(&self, other: &Self) -> Self {
        Self {
            inner: self.inner.mul(&other.inner),
        }
    }

    fn __truediv__(&self, other: &Self) -> PyResult<Self> {
        Ok(Self {
            inner: self.inner.div(&other.inner).map_err(value_err)?,
        })
    }

    fn __neg__(&self) -> Self {
        Self {
            inner: self.inner.neg(),
        }
    }

    fn __repr__(&self) -> String {
        format!("RationalTF({})", self.inner)
    }

    fn __str__(&self) -> String {
        self.inner.to_string()
    }
}

/// Linearized hydro governor `2(z-s)/(s+2z) * 1/(s Ty + 1)`, `z = 1/(g0 Tw)`.
#[pyfunction]
#[pyo3(signature = (t_y_s, t_w_s, g0, rating_mva=50.0))]
fn hydro_linear(t_y_s: f64, t_w_s: f64, g0: f64, rating_mva: f64) -> PyResult<PyRationalTF> {
    let params = HydroParams {
        t_y_s,
        t_w_s,
        g0,
        rating_mva,
    };
    Ok(PyRationalTF {
        inner: dvpp::plants::hydro_linear(&params).map_err(value_err)?,
    })
}

/// Ideal battery source, `H(s) = 1`.
#[pyfunction]
#[pyo3(signature = (power_rating_mw=10.0, energy_capacity_kwh=30.0))]
fn battery_linear(power_rating_mw: f64, energy_capacity_kwh: f64) -> PyResult<PyRationalTF> {
    let params = BatteryParams {
        power_rating_mw,
        energy_capacity_kwh,
    };
    Ok(PyRationalTF {
        inner: dvpp::plants::battery_linear(&params).map_err(value_err)?,
    })
}

/// All-pass wind model `(s - z)/(s + z)` with `z = 5.8e-3 v`.
#[pyfunction]
fn wind_linear(v_m_per_s: f64, p_nom_mw: f64, p_mpp_mw: f64) -> PyResult<PyRationalTF> {
    let params = WindParams {
        v_m_per_s,
        p_nom_mw,
        p_mpp_mw,
    };
    Ok(PyRationalTF {
        inner: dvpp::plants::wind_linear(&params).map_err(value_err)?,
    })
}

/// Nonlinear hydro governor simulation; returns mechanical power on the
/// command grid.
#[pyfunction]
fn hydro_nonlinear_sim(
    t_y_s: f64,
    t_w_s: f64,
    g0: f64,
    gate_commands: Vec<f64>,
    dt: f64,
) -> PyResult<Vec<f64>> {
    let params = HydroParams {
        t_y_s,
        t_w_s,
        g0,
        rating_mva: 1.0,
    };
    dvpp::plants::hydro_nonlinear_sim(&params, &gate_commands, dt).map_err(value_err)
}

/// Trapezoidal energy bookkeeping over a MW trace; returns a dict with
/// `peak_mw`, `final_kwh`, and the cumulative kWh trace.
#[pyfunction]
fn energy_ledger<'py>(
    py: Python<'py>,
    power_mw: Vec<f64>,
    dt: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let ledger = dvpp::plants::energy_ledger(&power_mw, dt).map_err(value_err)?;
    let out = PyDict::new(py);
    out.set_item("peak_mw", ledger.peak_mw)?;
    out.set_item("final_kwh", ledger.final_kwh())?;
    out.set_item("peak_energy_kwh", ledger.peak_energy_kwh())?;
    out.set_item("cumulative_kwh", ledger.cumulative_kwh)?;
    Ok(out)
}

/// FCR-D design target `R (zero_tc s + 1)/((p1 s + 1)(p2 s + 1))`.
#[pyfunction]
fn design_target(
    r_fcr_mw_per_hz: f64,
    zero_tc_s: f64,
    pole_tcs_s: (f64, f64),
) -> PyResult<PyRationalTF> {
    let target = make_design_target(r_fcr_mw_per_hz, zero_tc_s, pole_tcs_s).map_err(value_err)?;
    Ok(PyRationalTF {
        inner: target.full(),
    })
}

/// All-pass Blaschke product over right-half-plane zeros with mirrored
/// poles.
#[pyfunction]
fn blaschke_mirror(zeros: Vec<Complex64>) -> PyResult<PyRationalTF> {
    let set = RootSet::from_roots(zeros);
    Ok(PyRationalTF {
        inner: synthesis::blaschke_mirror(&set).map_err(value_err)?,
    })
}

fn plant_inputs(plants: Vec<(String, PyRationalTF, f64)>) -> Vec<PlantInput> {
    plants
        .into_iter()
        .map(|(id, tf, weight)| PlantInput::new(id, tf.inner, weight))
        .collect()
}

/// FCR participation factors `c_i = k_i B_i(s)/B_i(0)` for
/// `(id, plant_tf, weight)` triples.
#[pyfunction]
fn fcr_dpfs(plants: Vec<(String, PyRationalTF, f64)>) -> PyResult<Vec<(String, PyRationalTF)>> {
    let entries = synthesis::fcr_dpfs(&plant_inputs(plants)).map_err(value_err)?;
    Ok(entries
        .into_iter()
        .map(|e| (e.device, PyRationalTF { inner: e.dpf }))
        .collect())
}

/// FFR participation factors `c_i = k_i (B_i/B_i(inf)) (1 - fcr_sum)`.
#[pyfunction]
fn ffr_dpfs(
    plants: Vec<(String, PyRationalTF, f64)>,
    fcr_sum: PyRationalTF,
) -> PyResult<Vec<(String, PyRationalTF)>> {
    let entries = synthesis::ffr_dpfs(&plant_inputs(plants), &fcr_sum.inner).map_err(value_err)?;
    Ok(entries
        .into_iter()
        .map(|e| (e.device, PyRationalTF { inner: e.dpf }))
        .collect())
}

/// Normalization step `c_i' = c_i / sum(c)`; raises when the sum is not
/// stable and minimum-phase.
#[pyfunction]
fn normalize_dpfs(entries: Vec<(String, PyRationalTF)>) -> PyResult<Vec<(String, PyRationalTF)>> {
    let set = DpfSet::new(
        entries
            .into_iter()
            .map(|(device, tf)| DpfEntry {
                device,
                role: Role::Fcr,
                weight: 0.0,
                dpf: tf.inner,
            })
            .collect(),
    );
    let normalized = synthesis::normalize_dpfs(&set).map_err(value_err)?;
    Ok(normalized
        .entries()
        .iter()
        .map(|e| {
            (
                e.device.clone(),
                PyRationalTF {
                    inner: e.dpf.clone(),
                },
            )
        })
        .collect())
}

/// Built-in scenario names.
#[pyfunction]
fn list_scenarios() -> Vec<String> {
    builtin_names().into_iter().map(String::from).collect()
}

/// A scenario (built-in name or file path) as its JSON document.
#[pyfunction]
fn scenario_json(scenario: String) -> PyResult<String> {
    Ok(scenario_to_json(
        &resolve_scenario(&scenario).map_err(value_err)?,
    ))
}

/// Participation-factor design for a scenario; returns per-device factors,
/// controllers, and the stability verdict.
#[pyfunction]
fn synthesize<'py>(py: Python<'py>, scenario: String) -> PyResult<Bound<'py, PyDict>> {
    let sc = resolve_scenario(&scenario).map_err(value_err)?;
    let design = design_for_scenario(&sc).map_err(runtime_err)?;
    let out = PyDict::new(py);
    out.set_item("scenario", sc.name.clone())?;
    out.set_item("normalized", design.dpfs.is_normalized())?;
    out.set_item(
        "normalization_refused_zeros",
        design.normalization_refused.clone(),
    )?;
    let entries = PyDict::new(py);
    for e in design.dpfs.entries() {
        let ctrl = design
            .controllers
            .iter()
            .find(|c| c.device == e.device)
            .expect("controller per entry");
        let item = PyDict::new(py);
        item.set_item("role", e.role.to_string())?;
        item.set_item("weight", e.weight)?;
        item.set_item(
            "dpf",
            PyRationalTF {
                inner: e.dpf.clone(),
            },
        )?;
        item.set_item(
            "controller",
            PyRationalTF {
                inner: ctrl.tf.clone(),
            },
        )?;
        entries.set_item(e.device.clone(), item)?;
    }
    out.set_item("entries", entries)?;
    out.set_item("internally_stable", design.stability.verdict)?;
    out.set_item(
        "open_loop",
        PyRationalTF {
            inner: open_loop(&sc, &design.controller_pairs()).map_err(runtime_err)?,
        },
    )?;
    Ok(out)
}

/// Runs the scenario's disconnection fault; returns the traces and the
/// FCR-D compliance summary.
#[pyfunction]
#[pyo3(signature = (scenario, dt=1e-3, t_end=60.0))]
fn simulate<'py>(
    py: Python<'py>,
    scenario: String,
    dt: f64,
    t_end: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let sc = resolve_scenario(&scenario).map_err(value_err)?;
    let design = design_for_scenario(&sc).map_err(runtime_err)?;
    let options = RunOptions {
        dt_s: dt,
        t_end_s: t_end,
        ..RunOptions::default()
    };
    let result = run_fault(&sc, &design.controller_pairs(), &options).map_err(runtime_err)?;
    let compliance = fcrd_compliance(&result, &sc).map_err(runtime_err)?;

    let out = PyDict::new(py);
    out.set_item("t", result.t)?;
    out.set_item("freq_hz", result.freq_hz)?;
    out.set_item("p_des_mw", result.p_des_mw)?;
    out.set_item("total_power_mw", result.total_power_mw)?;
    let devices = PyDict::new(py);
    for (id, trace) in result.device_power_mw {
        devices.set_item(id, trace)?;
    }
    out.set_item("device_power_mw", devices)?;
    let comp = PyDict::new(py);
    comp.set_item("nadir_hz", compliance.nadir_hz)?;
    comp.set_item("steady_state_hz", compliance.steady_state_hz)?;
    comp.set_item("t50_s", compliance.t50_s)?;
    comp.set_item("t_full_s", compliance.t_full_s)?;
    comp.set_item("nadir_deviation_hz", compliance.nadir_deviation_hz)?;
    comp.set_item("pass", compliance.pass())?;
    out.set_item("compliance", comp)?;
    Ok(out)
}

/// True iff the scenario passes internal stability and FCR-D.
#[pyfunction]
fn check(scenario: String) -> PyResult<bool> {
    let sc = resolve_scenario(&scenario).map_err(value_err)?;
    let design = design_for_scenario(&sc).map_err(runtime_err)?;
    if !design.stability.verdict {
        return Ok(false);
    }
    let result =
        run_fault(&sc, &design.controller_pairs(), &RunOptions::default()).map_err(runtime_err)?;
    let compliance = fcrd_compliance(&result, &sc).map_err(runtime_err)?;
    Ok(compliance.pass())
}

#[pymodule]
fn dvpp_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyRationalTF>()?;
    m.add_function(wrap_pyfunction!(hydro_linear, m)?)?;
    m.add_function(wrap_pyfunction!(battery_linear, m)?)?;
    m.add_function(wrap_pyfunction!(wind_linear, m)?)?;
    m.add_function(wrap_pyfunction!(hydro_nonlinear_sim, m)?)?;
    m.add_function(wrap_pyfunction!(energy_ledger, m)?)?;
    m.add_function(wrap_pyfunction!(design_target, m)?)?;
    m.add_function(wrap_pyfunction!(blaschke_mirror, m)?)?;
    m.add_function(wrap_pyfunction!(fcr_dpfs, m)?)?;
    m.add_function(wrap_pyfunction!(ffr_dpfs, m)?)?;
    m.add_function(wrap_pyfunction!(normalize_dpfs, m)?)?;
    m.add_function(wrap_pyfunction!(list_scenarios, m)?)?;
    m.add_function(wrap_pyfunction!(scenario_json, m)?)?;
    m.add_function(wrap_pyfunction!(synthesize, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(check, m)?)?;
    Ok(())
}

//! Python bindings: scenario construction, simulation runs, fault metrics
//! and the hold-up sizing helper, exposed as an in-process extension module.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use mvups::config::{parse_config, registry_listing, serialize_config};
use mvups::metrics::fault_window_metrics;
use mvups::scenario::get_key;
use mvups::{ControllerKind, Scenario as CoreScenario};

fn err<E: std::fmt::Display>(e: E) -> PyErr {
    PyRuntimeError::new_err(e.to_string())
}

/// A simulation scenario. Construct with defaults, a config string, or
/// keyword overrides drawn from the parameter registry.
#[pyclass(name = "Scenario")]
#[derive(Clone)]
struct PyScenario {
    inner: CoreScenario,
}

#[pymethods]
impl PyScenario {
    /// Scenario(controller="proposed", **overrides)
    #[new]
    #[pyo3(signature = (controller = "proposed", **overrides))]
    fn new(controller: &str, overrides: Option<&Bound<'_, PyDict>>) -> PyResult<Self> {
        let mut sc = CoreScenario::default();
        sc.controller = ControllerKind::parse(controller).map_err(err)?;
        if let Some(kw) = overrides {
            let mut pairs: Vec<(String, String)> = Vec::new();
            for (k, v) in kw.iter() {
                pairs.push((k.to_string(), v.to_string()));
            }
            sc = sc
                .apply_overrides(pairs.iter().map(|(a, b)| (a.as_str(), b.as_str())))
                .map_err(|e| PyValueError::new_err(e.to_string()))?;
        }
        Ok(Self { inner: sc })
    }

    /// Parse a flat INI config document.
    #[staticmethod]
    fn from_config(text: &str) -> PyResult<Self> {
        Ok(Self {
            inner: parse_config(text).map_err(|e| PyValueError::new_err(e.to_string()))?,
        })
    }

    /// Return a copy with `key=value` overrides applied.
    fn with_overrides(&self, overrides: &Bound<'_, PyDict>) -> PyResult<Self> {
        let mut pairs: Vec<(String, String)> = Vec::new();
        for (k, v) in overrides.iter() {
            pairs.push((k.to_string(), v.to_string()));
        }
        let sc = self
            .inner
            .apply_overrides(pairs.iter().map(|(a, b)| (a.as_str(), b.as_str())))
            .map_err(|e| PyValueError::new_err(e.to_string()))?;
        Ok(Self { inner: sc })
    }

    /// Value of one registry key.
    fn get(&self, key: &str) -> PyResult<String> {
        get_key(&self.inner, key)
            .ok_or_else(|| PyValueError::new_err(format!("unknown parameter `{key}`")))
    }

    /// Serialize to the flat INI config format.
    fn to_config(&self) -> String {
        serialize_config(&self.inner)
    }

    /// Run the averaged-dq simulation.
    fn run(&self) -> PyResult<PyTrace> {
        let tr = mvups::run_scenario(&self.inner).map_err(err)?;
        Ok(PyTrace { inner: tr })
    }

    /// Run the EMT-style abc simulation (50 us fixed step).
    fn run_emt(&self) -> PyResult<PyTrace> {
        let tr = mvups::emt::run_emt(&self.inner).map_err(err)?;
        Ok(PyTrace { inner: tr })
    }

    fn __repr__(&self) -> String {
        format!(
            "Scenario(controller='{}', scr={}, v_dip={}, dip=[{}, {}], duration={})",
            self.inner.controller.name(),
            self.inner.scr,
            self.inner.v_dip,
            self.inner.dip_start,
            self.inner.dip_end,
            self.inner.duration
        )
    }
}

/// A completed simulation trace.
#[pyclass(name = "Trace")]
struct PyTrace {
    inner: mvups::Trace,
}

#[pymethods]
impl PyTrace {
    /// Number of samples.
    fn __len__(&self) -> usize {
        self.inner.records.len()
    }

    /// One channel as a list of floats.
    fn column(&self, name: &str) -> PyResult<Vec<f64>> {
        let pick: fn(&mvups::TraceRecord) -> f64 = match name {
            "t" => |r| r.t,
            "p_draw" => |r| r.p_draw,
            "p_grid" => |r| r.p_grid,
            "p_load" => |r| r.p_load,
            "p_bess" => |r| r.p_bess,
            "soc" => |r| r.soc,
            "v_pcc_mag" => |r| r.v_pcc_mag,
            "i_mag" => |r| r.i_mag,
            "v_dc" => |r| r.v_dc,
            "p_draw_ref" => |r| r.p_draw_ref,
            "p_served" => |r| r.p_served,
            "mode" => |r| r.mode as f64,
            "in_fault" => |r| r.in_fault as u8 as f64,
            _ => {
                return Err(PyValueError::new_err(format!(
                    "unknown column `{name}`"
                )))
            }
        };
        Ok(self.inner.records.iter().map(pick).collect())
    }

    /// Full trace as CSV text.
    fn to_csv(&self) -> String {
        self.inner.to_csv()
    }

    /// Fault-window metrics as a dict; the window defaults to the scenario's
    /// dip window.
    #[pyo3(signature = (start = None, end = None))]
    fn metrics<'py>(
        &self,
        py: Python<'py>,
        start: Option<f64>,
        end: Option<f64>,
    ) -> PyResult<Bound<'py, PyDict>> {
        let sc = &self.inner.scenario;
        let w = (
            start.unwrap_or(sc.dip_start),
            end.unwrap_or(sc.dip_end),
        );
        let m = fault_window_metrics(&self.inner, w, sc.s_base_mw).map_err(err)?;
        let d = PyDict::new_bound(py);
        d.set_item("min_vpcc", m.min_vpcc)?;
        d.set_item("settled_min_vpcc", m.settled_min_vpcc)?;
        d.set_item("max_i", m.max_i)?;
        d.set_item("mean_p_draw", m.mean_p_draw)?;
        d.set_item("min_v_dc", m.min_v_dc)?;
        d.set_item("unserved_mwh", m.unserved_mwh)?;
        d.set_item("max_ref_rate", m.max_ref_rate)?;
        d.set_item("max_p_bess", m.max_p_bess)?;
        d.set_item("any_cessation", m.any_cessation)?;
        d.set_item("any_voltage_floor", m.any_voltage_floor)?;
        d.set_item("any_infeasible_min_draw", m.any_infeasible_min_draw)?;
        d.set_item("any_bus_collapse", m.any_bus_collapse)?;
        Ok(d)
    }

    /// Divergence message if the run aborted early.
    #[getter]
    fn diverged(&self) -> Option<String> {
        self.inner.diverged.clone()
    }
}

/// DC hold-up sizing: returns (energy_joules, capacitance_farads).
#[pyfunction]
fn holdup_budget(p_load_w: f64, dt_hold_s: f64, v_dc0_v: f64, ratio_min: f64) -> PyResult<(f64, f64)> {
    mvups::holdup_budget(p_load_w, dt_hold_s, v_dc0_v, ratio_min).map_err(err)
}

/// The parameter registry as human-readable text.
#[pyfunction]
fn list_parameters() -> String {
    registry_listing()
}

#[pymodule]
fn mvups_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyScenario>()?;
    m.add_class::<PyTrace>()?;
    m.add_function(wrap_pyfunction!(holdup_budget, m)?)?;
    m.add_function(wrap_pyfunction!(list_parameters, m)?)?;
    Ok(())
}

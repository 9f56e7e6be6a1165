//! Python module `wmst`.

use pyo3::exceptions::{PyArithmeticError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use wmst::harness::{fit_method, replication_rng};
use wmst::io as wio;
use wmst::report::{self, TestRow};
use wmst::{
    km_fit, Arm, EstimationMethod, Imputation, Observation, Outcome, PointDatum, StudyKind, SurvivalCurve,
    Tau1Policy, Tau1Rule, TestSpec, Window, WmstError,
};

fn py_err(e: WmstError) -> PyErr {
    if e.is_numerical() {
        PyArithmeticError::new_err(e.to_string())
    } else {
        PyValueError::new_err(e.to_string())
    }
}

fn parse_rule(rule: &str) -> PyResult<Tau1Rule> {
    match rule {
        "last-observed" => Ok(Tau1Rule::LastObserved),
        "last-event" => Ok(Tau1Rule::LastEvent),
        _ => Err(PyValueError::new_err(format!("unknown tau1 rule '{rule}' (last-observed, last-event)"))),
    }
}

fn parse_imputation(s: &str) -> PyResult<Imputation> {
    match s {
        "midpoint" => Ok(Imputation::Midpoint),
        "right-point" => Ok(Imputation::RightPoint),
        _ => Err(PyValueError::new_err(format!("unknown imputation '{s}' (midpoint, right-point)"))),
    }
}

fn policy(tau1: Option<f64>, rule: &str) -> PyResult<Tau1Policy> {
    Ok(match tau1 {
        Some(value) => Tau1Policy::Fixed { value },
        None => Tau1Policy::Data { rule: parse_rule(rule)?, cap: None },
    })
}

/// Two-arm interval-censored data. Rows are `(arm, left, right)`;
/// `right=None` is right-censored at `left`, `left == right` is exact.
#[pyclass(name = "Dataset", module = "wmst", frozen)]
struct PyDataset {
    rows: Vec<Observation>,
}

#[pymethods]
impl PyDataset {
    #[new]
    fn new(rows: Vec<(u8, f64, Option<f64>)>) -> PyResult<Self> {
        let mut out = Vec::with_capacity(rows.len());
        for (i, (arm, left, right)) in rows.into_iter().enumerate() {
            let arm = Arm::from_index(arm).ok_or_else(|| PyValueError::new_err(format!("row {i}: arm must be 0 or 1")))?;
            let outcome = match right {
                None => Outcome::right_censored(left),
                Some(r) if r == left => Outcome::exact(left),
                Some(r) => Outcome::interval(left, r),
            }
            .map_err(|e| PyValueError::new_err(format!("row {i}: {e}")))?;
            out.push(Observation { outcome, arm });
        }
        Ok(PyDataset { rows: out })
    }

    #[staticmethod]
    fn from_csv(path: std::path::PathBuf) -> PyResult<Self> {
        Ok(PyDataset { rows: wio::read_dataset(&path).map_err(py_err)? })
    }

    /// The bundled breast cosmesis data.
    #[staticmethod]
    fn bcos() -> Self {
        PyDataset { rows: wio::load_bcos() }
    }

    /// Simulated trial from a registry scenario with K exams and constant dropout.
    #[staticmethod]
    #[pyo3(signature = (scenario, n_per_arm=100, seed=0, k=5, dropout="medium", p_exact=0.0))]
    fn simulate(scenario: &str, n_per_arm: usize, seed: u64, k: usize, dropout: &str, p_exact: f64) -> PyResult<Self> {
        let profile = match dropout {
            "none" => wmst::DropoutProfile::None,
            "low" => wmst::DropoutProfile::Low,
            "medium" => wmst::DropoutProfile::Medium,
            "high" => wmst::DropoutProfile::High,
            _ => return Err(PyValueError::new_err(format!("unknown dropout profile '{dropout}'"))),
        };
        let design = wmst::datagen::TrialDesign {
            scenario: wmst::scenario(scenario).map_err(py_err)?,
            plan: wmst::VisitPlan::with_profile(k, profile, p_exact).map_err(py_err)?,
            n_per_arm,
            two_arms: true,
        };
        let rows = wmst::datagen::generate_trial(&design, &mut replication_rng(seed, 0));
        Ok(PyDataset { rows })
    }

    fn to_csv(&self, path: std::path::PathBuf) -> PyResult<()> {
        let f = std::fs::File::create(&path).map_err(|e| PyValueError::new_err(e.to_string()))?;
        wio::write_dataset(f, &self.rows).map_err(py_err)
    }

    fn rows(&self) -> Vec<(u8, f64, Option<f64>)> {
        self.rows
            .iter()
            .map(|o| match o.outcome {
                Outcome::Exact(t) => (o.arm.index(), t, Some(t)),
                Outcome::Interval { left, right } => (o.arm.index(), left, Some(right)),
                Outcome::RightCensored(c) => (o.arm.index(), c, None),
            })
            .collect()
    }

    fn __len__(&self) -> usize {
        self.rows.len()
    }

    fn __repr__(&self) -> String {
        let n1 = self.rows.iter().filter(|o| o.arm == Arm::Treatment).count();
        format!("Dataset(arm0={}, arm1={})", self.rows.len() - n1, n1)
    }
}

#[pyclass(name = "SurvivalCurve", module = "wmst", frozen)]
struct PyCurve {
    inner: SurvivalCurve,
}

#[pymethods]
impl PyCurve {
    fn __call__(&self, t: f64) -> f64 {
        self.inner.eval(t)
    }

    /// Survival just before `t`.
    fn left_limit(&self, t: f64) -> f64 {
        self.inner.eval_left(t)
    }

    /// Area under the curve over `[tau0, tau1]`.
    fn wmst(&self, tau0: f64, tau1: f64) -> PyResult<f64> {
        Ok(wmst::wmst(&self.inner, Window::new(tau0, tau1).map_err(py_err)?))
    }

    /// `(start, end, start_value, end_value)` per segment.
    fn segments(&self) -> Vec<(f64, f64, f64, f64)> {
        self.inner.segments().iter().map(|s| (s.start, s.end, s.start_value, s.end_value)).collect()
    }
}

/// Kaplan-Meier curve from point data.
#[pyfunction]
fn kaplan_meier(times: Vec<f64>, events: Vec<bool>) -> PyResult<PyCurve> {
    if times.len() != events.len() {
        return Err(PyValueError::new_err("times and events differ in length"));
    }
    let data: Vec<PointDatum> = times.into_iter().zip(events).map(|(time, event)| PointDatum { time, event }).collect();
    Ok(PyCurve { inner: km_fit(&data).map_err(py_err)?.curve })
}

/// Survival curve of one arm by mid-point KM, right-point KM or Turnbull.
#[pyfunction]
#[pyo3(signature = (data, arm, method="midpoint-km"))]
fn fit(data: &PyDataset, arm: u8, method: &str) -> PyResult<PyCurve> {
    let method: EstimationMethod = method.parse().map_err(py_err)?;
    let arm = Arm::from_index(arm).ok_or_else(|| PyValueError::new_err("arm must be 0 or 1"))?;
    let rows: Vec<Observation> = data.rows.iter().filter(|o| o.arm == arm).copied().collect();
    Ok(PyCurve { inner: fit_method(&rows, method).map_err(py_err)?.curve })
}

fn row_dict<'py>(py: Python<'py>, r: &TestRow) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("test", r.test.to_string())?;
    d.set_item("statistic", r.statistic)?;
    d.set_item("p_value", r.p_value)?;
    d.set_item("tau0", r.tau0)?;
    d.set_item("tau1", r.tau1)?;
    d.set_item("estimate", r.estimate)?;
    d.set_item("std_error", r.std_error)?;
    d.set_item("ci", r.ci_low.zip(r.ci_high))?;
    Ok(d)
}

/// Run tests written as `rmst`, `wmst:<tau0>`, `logrank`, `fh:<p>:<q>`.
/// Returns `(tau1, [result dict, ...])`.
#[pyfunction]
#[pyo3(signature = (data, tests, tau1=None, rule="last-observed", imputation="midpoint"))]
fn analyze<'py>(
    py: Python<'py>,
    data: &PyDataset,
    tests: Vec<String>,
    tau1: Option<f64>,
    rule: &str,
    imputation: &str,
) -> PyResult<(f64, Vec<Bound<'py, PyDict>>)> {
    let specs = tests
        .iter()
        .map(|t| t.parse::<TestSpec>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(py_err)?;
    let a = report::analyze(&data.rows, parse_imputation(imputation)?, &specs, policy(tau1, rule)?).map_err(py_err)?;
    let rows = a.rows.iter().map(|r| row_dict(py, r)).collect::<PyResult<Vec<_>>>()?;
    Ok((a.tau1, rows))
}

/// WMST difference test (arm 1 minus arm 0) on mid-point imputed data.
#[pyfunction]
#[pyo3(signature = (data, tau0, tau1=None, rule="last-observed"))]
fn wmst_test<'py>(py: Python<'py>, data: &PyDataset, tau0: f64, tau1: Option<f64>, rule: &str) -> PyResult<Bound<'py, PyDict>> {
    let spec = TestSpec::Wmst { tau0 };
    let a = report::analyze(&data.rows, Imputation::Midpoint, &[spec], policy(tau1, rule)?).map_err(py_err)?;
    row_dict(py, &a.rows[0])
}

/// Fleming-Harrington weighted log-rank; `p = q = 0` is the log-rank test.
#[pyfunction]
#[pyo3(signature = (data, p=0.0, q=0.0))]
fn weighted_logrank<'py>(py: Python<'py>, data: &PyDataset, p: f64, q: f64) -> PyResult<Bound<'py, PyDict>> {
    let spec = if p == 0.0 && q == 0.0 { TestSpec::Logrank } else { TestSpec::Fh { p, q } };
    let a = report::analyze(&data.rows, Imputation::Midpoint, &[spec], Tau1Policy::default()).map_err(py_err)?;
    row_dict(py, &a.rows[0])
}

/// True WMST of a registry scenario arm over `[tau0, tau1]`.
#[pyfunction]
fn true_wmst(scenario: &str, arm: u8, tau0: f64, tau1: f64) -> PyResult<f64> {
    let s = wmst::scenario(scenario).map_err(py_err)?;
    let arm = Arm::from_index(arm).ok_or_else(|| PyValueError::new_err("arm must be 0 or 1"))?;
    Ok(wmst::true_mean_survival(s.law(arm), Window::new(tau0, tau1).map_err(py_err)?))
}

/// Run a JSON simulation config; returns the results as CSV text.
#[pyfunction]
#[pyo3(signature = (config, replications=None, seed=None))]
fn simulate(py: Python<'_>, config: &str, replications: Option<usize>, seed: Option<u64>) -> PyResult<String> {
    let mut file = wio::parse_config(config).map_err(py_err)?;
    if let Some(r) = replications {
        file.replications = r;
    }
    if let Some(s) = seed {
        file.seed = s;
    }
    let study = file.study_config().map_err(py_err)?;
    let buf = py
        .detach(|| -> wmst::Result<Vec<u8>> {
            let mut buf = Vec::new();
            match file.kind {
                StudyKind::Estimation => {
                    let s = wmst::run_estimation_study(&study, &file.methods, &file.tau0)?;
                    wio::write_estimation_csv(&mut buf, &s.rows)?;
                }
                StudyKind::Test => {
                    let s = wmst::run_test_study(&study, &file.tests)?;
                    wio::write_power_csv(&mut buf, &s.rows)?;
                }
                StudyKind::Sweep => {
                    let family = file.family.expect("checked at parse time");
                    let rows = wmst::run_sweep(family, &file.x, &file.tau0, &file.delta, &study)?;
                    wio::write_sweep_csv(&mut buf, &rows)?;
                }
            }
            Ok(buf)
        })
        .map_err(py_err)?;
    String::from_utf8(buf).map_err(|e| PyValueError::new_err(e.to_string()))
}

#[pymodule]
#[pyo3(name = "wmst")]
fn wmst_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyDataset>()?;
    m.add_class::<PyCurve>()?;
    m.add_function(wrap_pyfunction!(kaplan_meier, m)?)?;
    m.add_function(wrap_pyfunction!(fit, m)?)?;
    m.add_function(wrap_pyfunction!(analyze, m)?)?;
    m.add_function(wrap_pyfunction!(wmst_test, m)?)?;
    m.add_function(wrap_pyfunction!(weighted_logrank, m)?)?;
    m.add_function(wrap_pyfunction!(true_wmst, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}

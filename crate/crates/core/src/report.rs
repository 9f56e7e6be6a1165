//! One-shot analyses of a single dataset, as run by the CLI and the Python
//! bindings.

use std::io::Write;

use serde::Serialize;

use crate::error::{Result, WmstError};
use crate::estimators::{impute, km_fit, Imputation};
use crate::harness::{fit_method, run_test, EstimationMethod, Tau1Policy, TestSpec};
use crate::mean_survival::{wmst, wmst_estimate_from_km, TestResult, Tau1Rule, Window};
use crate::observation::{split_arms, Arm, Observation};

/// Flat CSV row for one test on one dataset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TestRow {
    pub test: TestSpec,
    pub tau0: Option<f64>,
    pub tau1: Option<f64>,
    pub statistic: f64,
    pub p_value: f64,
    pub estimate: Option<f64>,
    pub std_error: Option<f64>,
    pub ci_low: Option<f64>,
    pub ci_high: Option<f64>,
}

impl TestRow {
    fn new(test: TestSpec, r: &TestResult) -> TestRow {
        TestRow {
            test,
            tau0: r.window.map(|w| w.tau0),
            tau1: r.window.map(|w| w.tau1),
            statistic: r.statistic,
            p_value: r.p_value,
            estimate: r.effect.map(|e| e.estimate),
            std_error: r.effect.map(|e| e.std_error),
            ci_low: r.effect.map(|e| e.ci_low),
            ci_high: r.effect.map(|e| e.ci_high),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Analysis {
    pub tau1: f64,
    pub rows: Vec<TestRow>,
}

fn both_arms(data: &[Observation]) -> Result<(Vec<Observation>, Vec<Observation>)> {
    let (a0, a1) = split_arms(data);
    if a0.is_empty() || a1.is_empty() {
        return Err(WmstError::EmptyInput("two-sample tests need subjects in arm 0 and arm 1".into()));
    }
    Ok((a0, a1))
}

/// Run a test battery on imputed data with one shared τ1.
///
/// A test that fails numerically aborts the whole battery.
pub fn analyze(data: &[Observation], how: Imputation, tests: &[TestSpec], tau1: Tau1Policy) -> Result<Analysis> {
    let (a0, a1) = both_arms(data)?;
    let (p0, p1) = (impute(&a0, how), impute(&a1, how));
    let (k0, k1) = (km_fit(&p0)?, km_fit(&p1)?);
    let tau1 = tau1.resolve_two_arm(&p0, &p1)?;
    let rows = tests
        .iter()
        .map(|&t| run_test(t, &p0, &p1, (&k0, &k1), tau1).map(|r| TestRow::new(t, &r)))
        .collect::<Result<Vec<_>>>()?;
    Ok(Analysis { tau1, rows })
}

/// Per-arm WMST estimate row. Turnbull fits carry no closed-form SE.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EstimateRow {
    pub arm: u8,
    pub method: EstimationMethod,
    pub tau0: f64,
    pub tau1: f64,
    pub wmst: f64,
    pub std_error: Option<f64>,
    pub n: usize,
}

/// WMST of each arm present in the data, for every τ0.
///
/// A data-driven τ1 uses the min-max rule over the arms present.
pub fn estimate_arms(
    data: &[Observation],
    method: EstimationMethod,
    tau0s: &[f64],
    tau1: Tau1Policy,
) -> Result<Vec<EstimateRow>> {
    let groups: Vec<(Arm, Vec<Observation>)> = [Arm::Control, Arm::Treatment]
        .into_iter()
        .map(|a| (a, data.iter().filter(|o| o.arm == a).copied().collect::<Vec<_>>()))
        .filter(|(_, d)| !d.is_empty())
        .collect();
    if groups.is_empty() {
        return Err(WmstError::EmptyInput("dataset has no subjects".into()));
    }
    let fits = groups
        .iter()
        .map(|(_, d)| fit_method(d, method))
        .collect::<Result<Vec<_>>>()?;
    let tau1 = match tau1 {
        Tau1Policy::Fixed { value } => value,
        Tau1Policy::Data { rule, cap } => {
            let t = fits.iter().map(|f| f.data_tau1(rule)).fold(f64::INFINITY, f64::min);
            cap.map_or(t, |c| t.min(c))
        }
    };
    let mut rows = Vec::new();
    for ((arm, d), fit) in groups.iter().zip(&fits) {
        for &tau0 in tau0s {
            let window = Window::new(tau0, tau1)?;
            let (value, se) = match method.imputation() {
                Some(how) => {
                    let points = impute(d, how);
                    let est = wmst_estimate_from_km(&km_fit(&points)?, &points, window)?;
                    (est.value, Some(est.std_error()))
                }
                None => (wmst(&fit.curve, window), None),
            };
            rows.push(EstimateRow { arm: arm.index(), method, tau0, tau1, wmst: value, std_error: se, n: d.len() });
        }
    }
    Ok(rows)
}

pub fn write_csv<W: Write, T: Serialize>(writer: W, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for r in rows {
        w.serialize(r).map_err(|e| WmstError::Io(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

/// The τ1 rule the bcos analysis uses: the smaller of the two arms' last
/// imputed event times.
pub const BCOS_TAU1_RULE: Tau1Rule = Tau1Rule::LastEvent;

/// The reference bcos battery: RMST, WMST at 12.5, 15 and 17.5 months,
/// log-rank and FH(0,1), mid-point imputation.
pub fn bcos_tests() -> Vec<TestSpec> {
    vec![
        TestSpec::Rmst,
        TestSpec::Wmst { tau0: 12.5 },
        TestSpec::Wmst { tau0: 15.0 },
        TestSpec::Wmst { tau0: 17.5 },
        TestSpec::Logrank,
        TestSpec::Fh { p: 0.0, q: 1.0 },
    ]
}

//! Dataset files, the bundled bcos data, simulation config files and the
//! CSV/JSON outputs of a study.
//!
//! Dataset CSV has the header `arm,left,right`:
//!
//! - `left == right`: exact event time
//! - `right` empty: right-censored at `left`
//! - `left < right`: event in `(left, right]`; an empty `left` means 0

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::datagen::{
    dropout_profile, scenario, ArmLaw, DropoutProfile, ExactFollowUp, Family, Scenario, VisitPlan,
};
use crate::error::{Result, WmstError};
use crate::estimators::Imputation;
use crate::harness::{
    EstimationMethod, EstimationRow, PowerRow, StudyConfig, SweepRow, Tau1Policy, TestSpec,
};
use crate::observation::{Arm, Observation, Outcome};

const BCOS_CSV: &str = include_str!("../data/bcos.csv");

#[derive(Debug, Deserialize, Serialize)]
struct DatasetRow {
    arm: u8,
    left: Option<f64>,
    right: Option<f64>,
}

fn row_to_observation(row: &DatasetRow) -> Result<Observation> {
    let arm = Arm::from_index(row.arm)
        .ok_or_else(|| WmstError::Parse(format!("arm must be 0 or 1, got {}", row.arm)))?;
    let outcome = match (row.left, row.right) {
        (Some(l), Some(r)) if l == r => Outcome::exact(l)?,
        (Some(l), Some(r)) => Outcome::interval(l, r)?,
        (None, Some(r)) => Outcome::interval(0.0, r)?,
        (Some(l), None) => Outcome::right_censored(l)?,
        (None, None) => return Err(WmstError::Parse("left and right are both empty".into())),
    };
    Ok(Observation { outcome, arm })
}

/// Parse dataset CSV. Errors name the 1-based line of the offending row.
pub fn parse_dataset<R: Read>(reader: R) -> Result<Vec<Observation>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers().map_err(|e| WmstError::Parse(e.to_string()))?.clone();
    if headers.iter().collect::<Vec<_>>() != ["arm", "left", "right"] {
        return Err(WmstError::Parse(format!(
            "line 1: expected header `arm,left,right`, got `{}`",
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut out = Vec::new();
    for (i, rec) in rdr.deserialize::<DatasetRow>().enumerate() {
        let line = i + 2;
        let row = rec.map_err(|e| WmstError::Parse(format!("line {line}: {e}")))?;
        let obs = row_to_observation(&row).map_err(|e| WmstError::Parse(format!("line {line}: {e}")))?;
        out.push(obs);
    }
    if out.is_empty() {
        return Err(WmstError::Parse("dataset has no rows".into()));
    }
    Ok(out)
}

pub fn read_dataset(path: &Path) -> Result<Vec<Observation>> {
    let file = File::open(path).map_err(|e| WmstError::Io(format!("{}: {e}", path.display())))?;
    parse_dataset(file)
}

pub fn write_dataset<W: Write>(writer: W, data: &[Observation]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for o in data {
        let (left, right) = match o.outcome {
            Outcome::Exact(t) => (Some(t), Some(t)),
            Outcome::Interval { left, right } => (Some(left), Some(right)),
            Outcome::RightCensored(c) => (Some(c), None),
        };
        w.serialize(DatasetRow { arm: o.arm.index(), left, right })
            .map_err(|e| WmstError::Io(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

/// The breast cosmesis data: arm 0 radiotherapy plus chemotherapy (48),
/// arm 1 radiotherapy alone (46), months to cosmetic deterioration.
pub fn load_bcos() -> Vec<Observation> {
    parse_dataset(BCOS_CSV.as_bytes()).expect("bundled bcos data parses")
}

/// `(time, survival)` rows at every knot of a curve, plot-ready.
pub fn write_curve<W: Write>(writer: W, curve: &crate::curve::SurvivalCurve) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["time", "survival"]).map_err(|e| WmstError::Io(e.to_string()))?;
    let mut emit = |t: f64, s: f64| w.write_record([t.to_string(), s.to_string()]);
    let mut ok = Ok(());
    for seg in curve.segments() {
        ok = ok.and_then(|_| emit(seg.start, seg.start_value));
        ok = ok.and_then(|_| emit(seg.end, seg.end_value));
    }
    ok.map_err(|e| WmstError::Io(e.to_string()))?;
    emit(curve.domain_end(), curve.tail_value()).map_err(|e| WmstError::Io(e.to_string()))?;
    w.flush()?;
    Ok(())
}

pub const CONFIG_SCHEMA: &str = "wmst-simulation/1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StudyKind {
    Estimation,
    Test,
    Sweep,
}

/// Dropout given by profile name or as an explicit per-exam vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DropoutSpec {
    Profile(DropoutProfile),
    Explicit(Vec<f64>),
}

fn default_k() -> usize {
    5
}

fn default_dropout() -> DropoutSpec {
    DropoutSpec::Profile(DropoutProfile::Medium)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VisitSpec {
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default = "default_dropout")]
    pub dropout: DropoutSpec,
    #[serde(default)]
    pub p_exact: f64,
    #[serde(default)]
    pub exact_follow_up: ExactFollowUp,
}

impl Default for VisitSpec {
    fn default() -> Self {
        VisitSpec {
            k: default_k(),
            dropout: default_dropout(),
            p_exact: 0.0,
            exact_follow_up: ExactFollowUp::default(),
        }
    }
}

impl VisitSpec {
    pub fn plan(&self) -> Result<VisitPlan> {
        let dropout = match &self.dropout {
            DropoutSpec::Profile(p) => dropout_profile(*p, self.k),
            DropoutSpec::Explicit(v) => v.clone(),
        };
        let plan = VisitPlan { k: self.k, dropout, p_exact: self.p_exact, exact_follow_up: self.exact_follow_up };
        plan.validate()?;
        Ok(plan)
    }
}

fn default_n() -> usize {
    100
}

fn default_replications() -> usize {
    2000
}

/// A simulation config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationFile {
    pub schema: String,
    pub kind: StudyKind,
    /// Registry id, e.g. `weibull-i`. Ignored by sweeps.
    #[serde(default)]
    pub scenario: Option<String>,
    /// Inline control law; overrides `scenario`.
    #[serde(default)]
    pub control: Option<ArmLaw>,
    /// Inline treatment law; defaults to the control law.
    #[serde(default)]
    pub treatment: Option<ArmLaw>,
    #[serde(default = "default_n")]
    pub n_per_arm: usize,
    #[serde(default = "default_replications")]
    pub replications: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub visits: VisitSpec,
    #[serde(default)]
    pub tau1: Option<Tau1Policy>,
    #[serde(default)]
    pub imputation: Option<Imputation>,
    /// Estimation methods.
    #[serde(default)]
    pub methods: Vec<EstimationMethod>,
    #[serde(default)]
    pub tau0: Vec<f64>,
    #[serde(default)]
    pub tests: Vec<TestSpec>,
    #[serde(default)]
    pub family: Option<Family>,
    #[serde(default)]
    pub x: Vec<f64>,
    #[serde(default)]
    pub delta: Vec<f64>,
}

fn config_error(path: &str, message: impl Into<String>) -> WmstError {
    WmstError::Config { path: path.into(), message: message.into() }
}

/// Parse a config, reporting the JSON path of the first bad field.
pub fn parse_config(text: &str) -> Result<SimulationFile> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let file: SimulationFile = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        config_error(&path, e.into_inner().to_string())
    })?;
    if file.schema != CONFIG_SCHEMA {
        return Err(config_error(
            "schema",
            format!("unsupported schema '{}', expected '{CONFIG_SCHEMA}'", file.schema),
        ));
    }
    file.check()?;
    Ok(file)
}

pub fn read_config(path: &Path) -> Result<SimulationFile> {
    let text = std::fs::read_to_string(path).map_err(|e| WmstError::Io(format!("{}: {e}", path.display())))?;
    parse_config(&text)
}

impl SimulationFile {
    fn check(&self) -> Result<()> {
        match self.kind {
            StudyKind::Estimation => {
                if self.methods.is_empty() {
                    return Err(config_error("methods", "estimation studies need at least one method"));
                }
                if self.tau0.is_empty() {
                    return Err(config_error("tau0", "estimation studies need at least one tau0"));
                }
            }
            StudyKind::Test => {
                if self.tests.is_empty() {
                    return Err(config_error("tests", "test studies need at least one test"));
                }
            }
            StudyKind::Sweep => {
                if self.family.is_none() {
                    return Err(config_error("family", "sweeps need a family"));
                }
                for (name, v) in [("x", &self.x), ("tau0", &self.tau0), ("delta", &self.delta)] {
                    if v.is_empty() {
                        return Err(config_error(name, "sweeps need a non-empty grid"));
                    }
                }
            }
        }
        if self.kind != StudyKind::Sweep && self.scenario.is_none() && self.control.is_none() {
            return Err(config_error("scenario", "give a scenario id or an inline control law"));
        }
        Ok(())
    }

    pub fn resolve_scenario(&self) -> Result<Scenario> {
        if let Some(control) = &self.control {
            let treatment = self.treatment.clone().unwrap_or_else(|| control.clone());
            return Scenario::new("inline", control.clone(), treatment)
                .map_err(|e| config_error("control", e.to_string()));
        }
        let id = self.scenario.as_deref().unwrap_or("weibull-i");
        scenario(id).map_err(|e| config_error("scenario", e.to_string()))
    }

    /// The study config, with estimation studies defaulting τ1 to the
    /// largest observed time capped at the unit horizon.
    pub fn study_config(&self) -> Result<StudyConfig> {
        let default_tau1 = match self.kind {
            StudyKind::Estimation => Tau1Policy::Data { rule: crate::mean_survival::Tau1Rule::LastObserved, cap: Some(1.0) },
            _ => Tau1Policy::default(),
        };
        let config = StudyConfig {
            scenario: self.resolve_scenario()?,
            plan: self.visits.plan().map_err(|e| config_error("visits", e.to_string()))?,
            n_per_arm: self.n_per_arm,
            replications: self.replications,
            seed: self.seed,
            tau1: self.tau1.unwrap_or(default_tau1),
            imputation: self.imputation.unwrap_or(Imputation::Midpoint),
            threads: None,
        };
        config.validate()?;
        Ok(config)
    }
}

fn write_rows<W: Write, T: Serialize>(writer: W, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for r in rows {
        w.serialize(r).map_err(|e| WmstError::Io(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

/// Columns: method, tau0, truth, mean, rbias, mse, mc_se, replications, failures.
pub fn write_estimation_csv<W: Write>(writer: W, rows: &[EstimationRow]) -> Result<()> {
    write_rows(writer, rows)
}

/// Columns: test, tau0, rejection_rate, mc_se, replications, degenerate.
pub fn write_power_csv<W: Write>(writer: W, rows: &[PowerRow]) -> Result<()> {
    write_rows(writer, rows)
}

/// Columns: family, x, delta, test, tau0, power, mc_se, replications, degenerate, infeasible.
pub fn write_sweep_csv<W: Write>(writer: W, rows: &[SweepRow]) -> Result<()> {
    write_rows(writer, rows)
}

/// What was run, for the record next to the results CSV.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub config: SimulationFile,
    pub seed: u64,
    pub replications: usize,
    pub failures: usize,
    pub threads: usize,
    pub wall_time_secs: f64,
    pub results: String,
}

pub fn write_manifest(path: &Path, manifest: &RunManifest) -> Result<()> {
    let text = serde_json::to_string_pretty(manifest).map_err(|e| WmstError::Io(e.to_string()))?;
    std::fs::write(path, text + "\n").map_err(|e| WmstError::Io(format!("{}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_all_row_kinds() {
        let text = "arm,left,right\n0,2,2\n1,1,3\n0,4,\n1,,5\n";
        let d = parse_dataset(text.as_bytes()).unwrap();
        assert_eq!(d[0].outcome, Outcome::Exact(2.0));
        assert_eq!(d[1].outcome, Outcome::Interval { left: 1.0, right: 3.0 });
        assert_eq!(d[1].arm, Arm::Treatment);
        assert_eq!(d[2].outcome, Outcome::RightCensored(4.0));
        assert_eq!(d[3].outcome, Outcome::Interval { left: 0.0, right: 5.0 });
    }

    #[test]
    fn errors_carry_line_numbers() {
        let err = parse_dataset("arm,left,right\n0,1,2\n0,3,1\n".as_bytes()).unwrap_err();
        assert!(err.to_string().contains("line 3"), "{err}");
        let err = parse_dataset("arm,left,right\n0,1,2\n2,1,2\n".as_bytes()).unwrap_err();
        assert!(err.to_string().contains("line 3"), "{err}");
        let err = parse_dataset("arm,left,right\n0,x,2\n".as_bytes()).unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
        assert!(parse_dataset("".as_bytes()).is_err());
        assert!(parse_dataset("arm,left,right\n".as_bytes()).is_err());
        assert!(parse_dataset("a,b,c\n0,1,2\n".as_bytes()).is_err());
    }

    #[test]
    fn dataset_round_trip() {
        let d = load_bcos();
        let mut buf = Vec::new();
        write_dataset(&mut buf, &d).unwrap();
        assert_eq!(parse_dataset(buf.as_slice()).unwrap(), d);
    }

    #[test]
    fn bcos_counts() {
        let d = load_bcos();
        let rad = d.iter().filter(|o| o.arm == Arm::Treatment).count();
        let radchem = d.iter().filter(|o| o.arm == Arm::Control).count();
        assert_eq!((rad, radchem), (46, 48));
    }

    #[test]
    fn config_errors_name_the_field() {
        let bad = r#"{"schema": "wmst-simulation/1", "kind": "test", "scenario": "weibull-i", "tests": ["rmst", "wmst"]}"#;
        match parse_config(bad) {
            Err(WmstError::Config { path, .. }) => assert_eq!(path, "tests[1]"),
            other => panic!("{other:?}"),
        }
        let unknown = r#"{"schema": "wmst-simulation/1", "kind": "test", "scenario": "weibull-i", "tests": ["rmst"], "reps": 3}"#;
        assert!(matches!(parse_config(unknown), Err(WmstError::Config { .. })));
        let schema = r#"{"schema": "wmst-simulation/9", "kind": "test", "scenario": "weibull-i", "tests": ["rmst"]}"#;
        assert!(matches!(parse_config(schema), Err(WmstError::Config { path, .. }) if path == "schema"));
        let nested = r#"{"schema": "wmst-simulation/1", "kind": "test", "scenario": "weibull-i", "tests": ["rmst"], "visits": {"k": "five"}}"#;
        assert!(matches!(parse_config(nested), Err(WmstError::Config { path, .. }) if path == "visits.k"));
    }

    #[test]
    fn config_defaults() {
        let ok = r#"{"schema": "wmst-simulation/1", "kind": "estimation", "scenario": "weibull-i", "methods": ["midpoint-km"], "tau0": [0.25]}"#;
        let c = parse_config(ok).unwrap().study_config().unwrap();
        assert_eq!(c.n_per_arm, 100);
        assert_eq!(c.replications, 2000);
        assert_eq!(c.plan.dropout, vec![0.2, 0.2, 0.2, 0.2, 0.4]);
        assert_eq!(c.tau1.horizon(), Some(1.0));
    }
}

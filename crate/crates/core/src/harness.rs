//! Monte Carlo studies: estimation accuracy, size/power of the test battery,
//! calibrated sweeps and the bootstrap standard error.
//!
//! Replication `r` draws from its own ChaCha8 stream `r` under the master
//! seed, and results are gathered in replication order, so the output does
//! not depend on how many worker threads ran.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::curve::SurvivalCurve;
use crate::datagen::{calibrate_scenario, generate_trial, true_mean_survival, Family, Scenario, TrialDesign, VisitPlan};
use crate::error::{Result, WmstError};
use crate::estimators::{impute, km_fit, Imputation, KaplanMeier, PointDatum};
use crate::mean_survival::{select_tau1_with, wmst, wmst_diff_test_from_km, Tau1Rule, TestMethod, TestResult, Window};
use crate::normal::ALPHA;
use crate::observation::{split_arms, Observation, Outcome};
use crate::rank_tests::{weighted_logrank, WeightFn};
use crate::turnbull::{turnbull_curve, DEFAULT_TOL};

/// EM iteration cap for Turnbull fits inside studies and the bootstrap.
/// Fits with near-zero masses on a few intervals can need well over the
/// library default to meet the 1e-8 tolerance.
pub const STUDY_TURNBULL_MAX_ITER: usize = 100_000;

/// Environment variable capping the worker thread count.
pub const THREADS_ENV: &str = "WMST_THREADS";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EstimationMethod {
    MidpointKm,
    RightpointKm,
    Turnbull,
}

impl EstimationMethod {
    pub const ALL: [EstimationMethod; 3] =
        [EstimationMethod::MidpointKm, EstimationMethod::RightpointKm, EstimationMethod::Turnbull];

    pub fn label(&self) -> &'static str {
        match self {
            EstimationMethod::MidpointKm => "midpoint-km",
            EstimationMethod::RightpointKm => "rightpoint-km",
            EstimationMethod::Turnbull => "turnbull",
        }
    }

    pub fn imputation(&self) -> Option<Imputation> {
        match self {
            EstimationMethod::MidpointKm => Some(Imputation::Midpoint),
            EstimationMethod::RightpointKm => Some(Imputation::RightPoint),
            EstimationMethod::Turnbull => None,
        }
    }
}

impl std::str::FromStr for EstimationMethod {
    type Err = WmstError;

    fn from_str(s: &str) -> Result<Self> {
        EstimationMethod::ALL
            .into_iter()
            .find(|m| m.label() == s)
            .ok_or_else(|| WmstError::Parse(format!("unknown method '{s}' (midpoint-km, rightpoint-km, turnbull)")))
    }
}

/// A fitted survival curve plus the data-driven candidates for τ1.
#[derive(Debug, Clone)]
pub struct Fitted {
    pub curve: SurvivalCurve,
    /// Largest finite time in the (imputed) data.
    pub last_observed: f64,
    /// Largest event time, or the largest finite endpoint of a
    /// non-censored observation for Turnbull.
    pub last_event: Option<f64>,
}

impl Fitted {
    pub fn data_tau1(&self, rule: Tau1Rule) -> f64 {
        match rule {
            Tau1Rule::LastObserved => self.last_observed,
            Tau1Rule::LastEvent => self.last_event.unwrap_or(self.last_observed),
        }
    }
}

fn max_or(it: impl Iterator<Item = f64>) -> Option<f64> {
    it.fold(None, |m: Option<f64>, t| Some(m.map_or(t, |m| m.max(t))))
}

pub fn fit_method(data: &[Observation], method: EstimationMethod) -> Result<Fitted> {
    match method.imputation() {
        Some(how) => {
            let points = impute(data, how);
            let km = km_fit(&points)?;
            Ok(Fitted {
                curve: km.curve,
                last_observed: max_or(points.iter().map(|p| p.time)).unwrap_or(0.0),
                last_event: max_or(points.iter().filter(|p| p.event).map(|p| p.time)),
            })
        }
        None => {
            let curve = turnbull_curve(data, DEFAULT_TOL, STUDY_TURNBULL_MAX_ITER)?;
            let finite = |o: &Outcome| match *o {
                Outcome::Exact(t) | Outcome::RightCensored(t) => t,
                Outcome::Interval { right, .. } => right,
            };
            Ok(Fitted {
                curve,
                last_observed: max_or(data.iter().map(|o| finite(&o.outcome))).unwrap_or(0.0),
                last_event: max_or(data.iter().filter(|o| !o.outcome.is_censored()).map(|o| finite(&o.outcome))),
            })
        }
    }
}

/// Where τ1 comes from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Tau1Policy {
    Fixed { value: f64 },
    /// Read off each replication's data, optionally capped.
    Data {
        #[serde(default)]
        rule: Tau1Rule,
        #[serde(default)]
        cap: Option<f64>,
    },
}

impl Default for Tau1Policy {
    fn default() -> Self {
        Tau1Policy::Data { rule: Tau1Rule::LastObserved, cap: None }
    }
}

impl Tau1Policy {
    fn capped(&self, t: f64) -> f64 {
        match *self {
            Tau1Policy::Fixed { value } => value,
            Tau1Policy::Data { cap, .. } => cap.map_or(t, |c| t.min(c)),
        }
    }

    /// Upper end of the window the truth is computed over.
    pub fn horizon(&self) -> Option<f64> {
        match *self {
            Tau1Policy::Fixed { value } => Some(value),
            Tau1Policy::Data { cap, .. } => cap,
        }
    }

    fn one_arm(&self, fit: &Fitted) -> f64 {
        match *self {
            Tau1Policy::Fixed { value } => value,
            Tau1Policy::Data { rule, .. } => self.capped(fit.data_tau1(rule)),
        }
    }

    pub fn resolve_two_arm(&self, arm0: &[PointDatum], arm1: &[PointDatum]) -> Result<f64> {
        match *self {
            Tau1Policy::Fixed { value } => Ok(value),
            Tau1Policy::Data { rule, .. } => Ok(self.capped(select_tau1_with(arm0, arm1, rule)?)),
        }
    }
}

/// One entry of the test battery, written `rmst`, `wmst:<tau0>`, `logrank`
/// or `fh:<p>:<q>`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum TestSpec {
    Rmst,
    Wmst { tau0: f64 },
    Logrank,
    Fh { p: f64, q: f64 },
}

impl TestSpec {
    pub fn method(&self) -> TestMethod {
        match *self {
            TestSpec::Rmst => TestMethod::Rmst,
            TestSpec::Wmst { tau0 } => TestMethod::Wmst { tau0 },
            TestSpec::Logrank => TestMethod::LogRank,
            TestSpec::Fh { p, q } => TestMethod::FlemingHarrington { p, q },
        }
    }

    pub fn label(&self) -> String {
        self.method().label()
    }

    pub fn tau0(&self) -> Option<f64> {
        match *self {
            TestSpec::Rmst => Some(0.0),
            TestSpec::Wmst { tau0 } => Some(tau0),
            _ => None,
        }
    }
}

impl std::str::FromStr for TestSpec {
    type Err = WmstError;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.trim().split(':').collect();
        let num = |p: &str| {
            p.trim()
                .parse::<f64>()
                .map_err(|_| WmstError::Parse(format!("bad number '{p}' in test '{s}'")))
        };
        match parts.as_slice() {
            ["rmst"] => Ok(TestSpec::Rmst),
            ["wmst", t] => Ok(TestSpec::Wmst { tau0: num(t)? }),
            ["logrank"] => Ok(TestSpec::Logrank),
            ["fh"] => Ok(TestSpec::Fh { p: 0.0, q: 1.0 }),
            ["fh", p, q] => Ok(TestSpec::Fh { p: num(p)?, q: num(q)? }),
            _ => Err(WmstError::Parse(format!(
                "unknown test '{s}' (rmst, wmst:<tau0>, logrank, fh:<p>:<q>)"
            ))),
        }
    }
}

impl std::fmt::Display for TestSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match *self {
            TestSpec::Rmst => write!(f, "rmst"),
            TestSpec::Wmst { tau0 } => write!(f, "wmst:{tau0}"),
            TestSpec::Logrank => write!(f, "logrank"),
            TestSpec::Fh { p, q } => write!(f, "fh:{p}:{q}"),
        }
    }
}

impl TryFrom<String> for TestSpec {
    type Error = WmstError;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<TestSpec> for String {
    fn from(t: TestSpec) -> String {
        t.to_string()
    }
}

/// Run one test on imputed two-arm data with the arms' Kaplan-Meier fits.
pub fn run_test(
    spec: TestSpec,
    arm0: &[PointDatum],
    arm1: &[PointDatum],
    fits: (&KaplanMeier, &KaplanMeier),
    tau1: f64,
) -> Result<TestResult> {
    match spec {
        TestSpec::Rmst => wmst_diff_test_from_km(fits.0, fits.1, Window::new(0.0, tau1)?),
        TestSpec::Wmst { tau0 } => wmst_diff_test_from_km(fits.0, fits.1, Window::new(tau0, tau1)?),
        TestSpec::Logrank => weighted_logrank(arm0, arm1, WeightFn::LogRank),
        TestSpec::Fh { p, q } => weighted_logrank(arm0, arm1, WeightFn::FlemingHarrington { p, q }),
    }
}

fn default_n() -> usize {
    100
}

fn default_replications() -> usize {
    2000
}

/// Everything a study needs besides the list of methods or tests.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyConfig {
    pub scenario: Scenario,
    pub plan: VisitPlan,
    #[serde(default = "default_n")]
    pub n_per_arm: usize,
    #[serde(default = "default_replications")]
    pub replications: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub tau1: Tau1Policy,
    /// Imputation used before the test battery.
    #[serde(default = "default_imputation")]
    pub imputation: Imputation,
    /// Worker cap; falls back to the environment, then to all cores.
    #[serde(skip)]
    pub threads: Option<usize>,
}

fn default_imputation() -> Imputation {
    Imputation::Midpoint
}

impl StudyConfig {
    pub fn validate(&self) -> Result<()> {
        if self.replications == 0 {
            return Err(WmstError::InvalidParameter("replications must be at least 1".into()));
        }
        if self.n_per_arm < 2 {
            return Err(WmstError::InvalidParameter("n per arm must be at least 2".into()));
        }
        self.plan.validate()?;
        self.scenario.control.validate()?;
        self.scenario.treatment.validate()?;
        if let Tau1Policy::Fixed { value } = self.tau1 {
            if !(value > 0.0 && value.is_finite()) {
                return Err(WmstError::InvalidParameter(format!("fixed tau1 {value} must be positive")));
            }
        }
        Ok(())
    }

    pub fn design(&self, two_arms: bool) -> TrialDesign {
        TrialDesign {
            scenario: self.scenario.clone(),
            plan: self.plan.clone(),
            n_per_arm: self.n_per_arm,
            two_arms,
        }
    }
}

/// Random stream for replication `rep`.
pub fn replication_rng(seed: u64, rep: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(rep);
    rng
}

fn thread_count(explicit: Option<usize>) -> Option<usize> {
    explicit
        .or_else(|| std::env::var(THREADS_ENV).ok().and_then(|v| v.trim().parse().ok()))
        .filter(|&n| n > 0)
}

/// Map `f` over `0..count` on a pool of at most `threads` workers, keeping index order.
pub fn par_map<T: Send>(count: usize, threads: Option<usize>, f: impl Fn(usize) -> T + Sync + Send) -> Vec<T> {
    let run = || (0..count).into_par_iter().map(&f).collect();
    match thread_count(threads) {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .expect("thread pool")
            .install(run),
        None => run(),
    }
}

/// Accuracy of one method at one τ0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimationRow {
    pub method: EstimationMethod,
    pub tau0: f64,
    pub truth: f64,
    pub mean: f64,
    pub rbias: f64,
    pub mse: f64,
    /// Monte Carlo standard error of `mean`.
    pub mc_se: f64,
    pub replications: usize,
    pub failures: usize,
    /// Per-replication estimates, `None` where the fit failed.
    #[serde(skip)]
    pub estimates: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimationSummary {
    pub rows: Vec<EstimationRow>,
}

impl EstimationSummary {
    pub fn row(&self, method: EstimationMethod, tau0: f64) -> Option<&EstimationRow> {
        self.rows.iter().find(|r| r.method == method && r.tau0 == tau0)
    }

    pub fn failures(&self) -> usize {
        self.rows.iter().map(|r| r.failures).sum()
    }
}

/// One-arm accuracy study on the control law. Per replication each method is
/// fitted once and integrated over every `(τ0, τ1)` window.
pub fn run_estimation_study(
    config: &StudyConfig,
    methods: &[EstimationMethod],
    tau0s: &[f64],
) -> Result<EstimationSummary> {
    config.validate()?;
    if methods.is_empty() || tau0s.is_empty() {
        return Err(WmstError::InvalidParameter("need at least one method and one tau0".into()));
    }
    let horizon = config.tau1.horizon().ok_or_else(|| {
        WmstError::InvalidParameter("estimation studies need a fixed tau1 or a capped data rule".into())
    })?;
    let truths = tau0s
        .iter()
        .map(|&t0| Ok(true_mean_survival(&config.scenario.control, Window::new(t0, horizon)?)))
        .collect::<Result<Vec<f64>>>()?;

    let design = config.design(false);
    let per_rep: Vec<Vec<Option<f64>>> = par_map(config.replications, config.threads, |rep| {
        let mut rng = replication_rng(config.seed, rep as u64);
        let data = generate_trial(&design, &mut rng);
        let mut out = Vec::with_capacity(methods.len() * tau0s.len());
        for &m in methods {
            let fit = fit_method(&data, m).ok();
            for &t0 in tau0s {
                out.push(fit.as_ref().map(|f| {
                    let t1 = config.tau1.one_arm(f);
                    if t1 > t0 {
                        wmst(&f.curve, Window { tau0: t0, tau1: t1 })
                    } else {
                        0.0
                    }
                }));
            }
        }
        out
    });

    let mut rows = Vec::new();
    for (mi, &method) in methods.iter().enumerate() {
        for (ti, &tau0) in tau0s.iter().enumerate() {
            let col = mi * tau0s.len() + ti;
            let estimates: Vec<Option<f64>> = per_rep.iter().map(|r| r[col]).collect();
            let ok: Vec<f64> = estimates.iter().flatten().copied().collect();
            let truth = truths[ti];
            let k = ok.len() as f64;
            let mean = ok.iter().sum::<f64>() / k;
            let mse = ok.iter().map(|e| (e - truth).powi(2)).sum::<f64>() / k;
            let var = if ok.len() > 1 {
                ok.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (k - 1.0)
            } else {
                0.0
            };
            rows.push(EstimationRow {
                method,
                tau0,
                truth,
                mean,
                rbias: (mean - truth) / truth,
                mse,
                mc_se: (var / k).sqrt(),
                replications: ok.len(),
                failures: estimates.len() - ok.len(),
                estimates,
            });
        }
    }
    Ok(EstimationSummary { rows })
}

/// Rejection rate of one test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerRow {
    pub test: String,
    pub tau0: Option<f64>,
    pub rejection_rate: f64,
    pub mc_se: f64,
    pub replications: usize,
    /// Replications where the test could not be computed.
    pub degenerate: usize,
    #[serde(skip)]
    pub spec: Option<TestSpec>,
}

impl PowerRow {
    fn from_flags(spec: TestSpec, flags: impl Iterator<Item = Option<bool>>) -> PowerRow {
        let (mut rejected, mut valid, mut degenerate) = (0usize, 0usize, 0usize);
        for f in flags {
            match f {
                Some(r) => {
                    valid += 1;
                    rejected += usize::from(r);
                }
                None => degenerate += 1,
            }
        }
        let rate = if valid > 0 { rejected as f64 / valid as f64 } else { f64::NAN };
        PowerRow {
            test: spec.to_string(),
            tau0: spec.tau0(),
            rejection_rate: rate,
            mc_se: (rate * (1.0 - rate) / valid as f64).sqrt(),
            replications: valid,
            degenerate,
            spec: Some(spec),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerSummary {
    pub rows: Vec<PowerRow>,
}

impl PowerSummary {
    pub fn row(&self, spec: TestSpec) -> Option<&PowerRow> {
        self.rows.iter().find(|r| r.spec == Some(spec))
    }

    pub fn degenerate(&self) -> usize {
        self.rows.iter().map(|r| r.degenerate).sum()
    }
}

/// Per-replication rejection flags, `None` for a degenerate replication.
fn test_flags(config: &StudyConfig, tests: &[TestSpec], rng: &mut ChaCha8Rng) -> Vec<Option<bool>> {
    let data = generate_trial(&config.design(true), rng);
    let (c, t) = split_arms(&data);
    let arm0 = impute(&c, config.imputation);
    let arm1 = impute(&t, config.imputation);
    let fits = km_fit(&arm0).and_then(|a| Ok((a, km_fit(&arm1)?)));
    let tau1 = config.tau1.resolve_two_arm(&arm0, &arm1);
    tests
        .iter()
        .map(|&spec| {
            let (Ok((k0, k1)), Ok(t1)) = (&fits, &tau1) else {
                return None;
            };
            run_test(spec, &arm0, &arm1, (k0, k1), *t1).ok().map(|r| r.rejects(ALPHA))
        })
        .collect()
}

/// Size or power of each test on two-arm trials from the scenario.
pub fn run_test_study(config: &StudyConfig, tests: &[TestSpec]) -> Result<PowerSummary> {
    config.validate()?;
    if tests.is_empty() {
        return Err(WmstError::InvalidParameter("no tests selected".into()));
    }
    let per_rep = par_map(config.replications, config.threads, |rep| {
        test_flags(config, tests, &mut replication_rng(config.seed, rep as u64))
    });
    let rows = tests
        .iter()
        .enumerate()
        .map(|(i, &spec)| PowerRow::from_flags(spec, per_rep.iter().map(|r| r[i])))
        .collect();
    Ok(PowerSummary { rows })
}

/// One (x, δ, test) cell of a calibrated sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub family: Family,
    pub x: f64,
    pub delta: f64,
    pub test: String,
    pub tau0: Option<f64>,
    pub power: f64,
    pub mc_se: f64,
    pub replications: usize,
    pub degenerate: usize,
    pub infeasible: bool,
}

/// Battery used for each sweep cell: RMST, WMST at every τ0, log-rank and FH(0, 1).
pub fn sweep_tests(tau0s: &[f64]) -> Vec<TestSpec> {
    let mut tests = vec![TestSpec::Rmst];
    tests.extend(tau0s.iter().map(|&tau0| TestSpec::Wmst { tau0 }));
    tests.push(TestSpec::Logrank);
    tests.push(TestSpec::Fh { p: 0.0, q: 1.0 });
    tests
}

/// Calibrate the family at each (x, δ) and run the test battery there.
/// Every cell reuses the base seed, so neighbouring cells share random numbers.
pub fn run_sweep(family: Family, xs: &[f64], tau0s: &[f64], deltas: &[f64], base: &StudyConfig) -> Result<Vec<SweepRow>> {
    let tests = sweep_tests(tau0s);
    let mut rows = Vec::new();
    for &x in xs {
        for &delta in deltas {
            let scenario = match calibrate_scenario(family, x, delta) {
                Ok(s) => s,
                Err(WmstError::InfeasibleCalibration(_)) => {
                    rows.extend(tests.iter().map(|t| SweepRow {
                        family,
                        x,
                        delta,
                        test: t.to_string(),
                        tau0: t.tau0(),
                        power: f64::NAN,
                        mc_se: f64::NAN,
                        replications: 0,
                        degenerate: 0,
                        infeasible: true,
                    }));
                    continue;
                }
                Err(e) => return Err(e),
            };
            let config = StudyConfig { scenario, ..base.clone() };
            let summary = run_test_study(&config, &tests)?;
            rows.extend(summary.rows.into_iter().map(|r| SweepRow {
                family,
                x,
                delta,
                test: r.test,
                tau0: r.tau0,
                power: r.rejection_rate,
                mc_se: r.mc_se,
                replications: r.replications,
                degenerate: r.degenerate,
                infeasible: false,
            }));
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BootstrapSe {
    pub se: f64,
    pub used: usize,
    pub skipped: usize,
}

/// Nonparametric bootstrap standard error of the window mean under `method`:
/// resample subjects with replacement `b` times.
pub fn bootstrap_se<R: Rng + ?Sized>(
    data: &[Observation],
    method: EstimationMethod,
    window: Window,
    b: usize,
    rng: &mut R,
) -> Result<BootstrapSe> {
    if b < 100 {
        return Err(WmstError::InvalidParameter(format!("need at least 100 resamples, got {b}")));
    }
    if data.is_empty() {
        return Err(WmstError::EmptyInput("bootstrap needs data".into()));
    }
    let n = data.len();
    let mut values = Vec::with_capacity(b);
    let mut sample = Vec::with_capacity(n);
    for _ in 0..b {
        sample.clear();
        sample.extend((0..n).map(|_| data[rng.random_range(0..n)]));
        if let Ok(fit) = fit_method(&sample, method) {
            values.push(wmst(&fit.curve, window));
        }
    }
    let used = values.len();
    if used < 2 {
        return Err(WmstError::DegenerateTest(format!("only {used} bootstrap fits succeeded")));
    }
    let mean = values.iter().sum::<f64>() / used as f64;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (used - 1) as f64;
    Ok(BootstrapSe { se: var.sqrt(), used, skipped: b - used })
}

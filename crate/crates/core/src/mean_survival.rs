//! Restricted and window mean survival time: point estimates, Greenwood-based
//! variances and the two-sample difference test.

use serde::{Deserialize, Serialize};

use crate::curve::SurvivalCurve;
use crate::error::{Result, WmstError};
use crate::estimators::{km_fit, KaplanMeier, PointDatum, RiskTable};
use crate::normal::{two_sided_p, Z_975};

/// Integration window `[tau0, tau1]`. `tau0 = 0` gives RMST.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub tau0: f64,
    pub tau1: f64,
}

impl Window {
    pub fn new(tau0: f64, tau1: f64) -> Result<Window> {
        let invalid = |reason: &str| WmstError::InvalidWindow { tau0, tau1, reason: reason.into() };
        if !tau0.is_finite() || !tau1.is_finite() {
            return Err(invalid("bounds must be finite"));
        }
        if tau0 < 0.0 {
            return Err(invalid("tau0 must be non-negative"));
        }
        if tau0 >= tau1 {
            return Err(invalid("tau0 must be below tau1"));
        }
        Ok(Window { tau0, tau1 })
    }

    pub fn restricted(tau1: f64) -> Result<Window> {
        Window::new(0.0, tau1)
    }

    pub fn width(&self) -> f64 {
        self.tau1 - self.tau0
    }
}

/// ∫_{τ0}^{τ1} S(t) dt.
pub fn wmst(curve: &SurvivalCurve, window: Window) -> f64 {
    curve
        .integrate(window.tau0, window.tau1)
        .expect("window bounds are ordered by construction")
}

/// ∫_0^{τ1} S(t) dt.
pub fn rmst(curve: &SurvivalCurve, tau1: f64) -> Result<f64> {
    Ok(wmst(curve, Window::restricted(tau1)?))
}

/// Greenwood-based variance of the window mean of a Kaplan-Meier curve.
///
/// The window is cut at τ0, at every event time strictly inside it and at
/// τ1. With widths `a_i` and left knots `t_i` this returns
/// `Σ a_i² var[Ŝ(t_i)] + 2 Σ_{i<j} a_i a_j cov[Ŝ(t_i), Ŝ(t_j)]`.
pub fn wmst_variance(curve: &SurvivalCurve, table: &RiskTable, window: Window) -> Result<f64> {
    let mut knots = vec![window.tau0];
    knots.extend(table.event_times().filter(|&t| t > window.tau0 && t < window.tau1));
    knots.push(window.tau1);

    // (width × Ŝ, cumulative Greenwood sum) at each left knot
    let rows = table.rows();
    let mut row = 0;
    let mut cum = 0.0;
    let mut terms = Vec::with_capacity(knots.len() - 1);
    for pair in knots.windows(2) {
        let (t, width) = (pair[0], pair[1] - pair[0]);
        let s = curve.eval(t);
        while row < rows.len() && rows[row].time <= t {
            let r = rows[row];
            if r.at_risk == r.events {
                if s > 0.0 {
                    return Err(WmstError::GreenwoodUndefined { time: r.time, at_risk: r.at_risk });
                }
                cum = f64::INFINITY;
            } else {
                let (d, n) = (r.events as f64, r.at_risk as f64);
                cum += d / (n * (n - d));
            }
            row += 1;
        }
        if s > 0.0 {
            terms.push((width * s, cum));
        } else {
            terms.push((0.0, 0.0));
        }
    }

    let mut var = 0.0;
    let mut suffix = 0.0;
    for &(ws, g) in terms.iter().rev() {
        if ws > 0.0 {
            var += ws * g * (ws + 2.0 * suffix);
        }
        suffix += ws;
    }
    Ok(var.max(0.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WmstEstimate {
    pub value: f64,
    pub variance: f64,
    pub window: Window,
    pub n_used: usize,
    /// τ1 lies beyond the last observed time, so the tail was extrapolated.
    pub extrapolated: bool,
}

impl WmstEstimate {
    pub fn std_error(&self) -> f64 {
        self.variance.sqrt()
    }
}

/// Kaplan-Meier fit plus window mean and its variance.
pub fn wmst_estimate(data: &[PointDatum], window: Window) -> Result<WmstEstimate> {
    wmst_estimate_from_km(&km_fit(data)?, data, window)
}

/// Same as [`wmst_estimate`] for an existing fit of `data`.
pub fn wmst_estimate_from_km(km: &KaplanMeier, data: &[PointDatum], window: Window) -> Result<WmstEstimate> {
    let last = data.iter().map(|d| d.time).fold(f64::NEG_INFINITY, f64::max);
    Ok(WmstEstimate {
        value: wmst(&km.curve, window),
        variance: wmst_variance(&km.curve, &km.table, window)?,
        window,
        n_used: data.len(),
        extrapolated: window.tau1 > last,
    })
}

/// Which two-sample test produced a result.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum TestMethod {
    Rmst,
    Wmst { tau0: f64 },
    LogRank,
    FlemingHarrington { p: f64, q: f64 },
}

impl TestMethod {
    pub fn label(&self) -> String {
        match *self {
            TestMethod::Rmst => "rmst".into(),
            TestMethod::Wmst { tau0 } => format!("wmst({tau0})"),
            TestMethod::LogRank => "logrank".into(),
            TestMethod::FlemingHarrington { p, q } => format!("fh({p},{q})"),
        }
    }
}

/// Treatment-minus-control difference with its 95% interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Effect {
    pub estimate: f64,
    pub std_error: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub method: TestMethod,
    pub statistic: f64,
    pub p_value: f64,
    pub effect: Option<Effect>,
    pub window: Option<Window>,
}

impl TestResult {
    pub fn rejects(&self, alpha: f64) -> bool {
        self.p_value < alpha
    }
}

/// Z test of Δ = WMST(arm1) − WMST(arm0) with σ_Δ² = σ0² + σ1².
pub fn wmst_diff_test(arm0: &[PointDatum], arm1: &[PointDatum], window: Window) -> Result<TestResult> {
    if arm0.is_empty() || arm1.is_empty() {
        return Err(WmstError::EmptyInput("both arms need subjects".into()));
    }
    let e0 = wmst_estimate(arm0, window)?;
    let e1 = wmst_estimate(arm1, window)?;
    diff_test_from_estimates(&e0, &e1)
}

/// [`wmst_diff_test`] from per-arm Kaplan-Meier fits.
pub fn wmst_diff_test_from_km(km0: &KaplanMeier, km1: &KaplanMeier, window: Window) -> Result<TestResult> {
    let estimate = |km: &KaplanMeier| -> Result<WmstEstimate> {
        Ok(WmstEstimate {
            value: wmst(&km.curve, window),
            variance: wmst_variance(&km.curve, &km.table, window)?,
            window,
            n_used: 0,
            extrapolated: false,
        })
    };
    diff_test_from_estimates(&estimate(km0)?, &estimate(km1)?)
}

fn diff_test_from_estimates(e0: &WmstEstimate, e1: &WmstEstimate) -> Result<TestResult> {
    let window = e0.window;
    let delta = e1.value - e0.value;
    let se = (e0.variance + e1.variance).sqrt();
    if !(se > 0.0) {
        return Err(WmstError::DegenerateTest(format!(
            "zero standard error for window [{}, {}]",
            window.tau0, window.tau1
        )));
    }
    let z = delta / se;
    let method = if window.tau0 == 0.0 {
        TestMethod::Rmst
    } else {
        TestMethod::Wmst { tau0: window.tau0 }
    };
    Ok(TestResult {
        method,
        statistic: z,
        p_value: two_sided_p(z),
        effect: Some(Effect {
            estimate: delta,
            std_error: se,
            ci_low: delta - Z_975 * se,
            ci_high: delta + Z_975 * se,
        }),
        window: Some(window),
    })
}

/// How τ1 is read off the data: the smaller of the two arms' largest times.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Tau1Rule {
    /// Largest observed time per arm, censored or not.
    #[default]
    LastObserved,
    /// Largest event time per arm. An arm without events falls back to its
    /// largest observed time.
    LastEvent,
}

fn arm_max(arm: &[PointDatum], rule: Tau1Rule) -> f64 {
    let max_of = |it: &mut dyn Iterator<Item = f64>| it.fold(f64::NEG_INFINITY, f64::max);
    let all = max_of(&mut arm.iter().map(|d| d.time));
    match rule {
        Tau1Rule::LastObserved => all,
        Tau1Rule::LastEvent => {
            let ev = max_of(&mut arm.iter().filter(|d| d.event).map(|d| d.time));
            if ev.is_finite() {
                ev
            } else {
                all
            }
        }
    }
}

/// τ1 with the default rule.
pub fn select_tau1(arm0: &[PointDatum], arm1: &[PointDatum]) -> Result<f64> {
    select_tau1_with(arm0, arm1, Tau1Rule::default())
}

pub fn select_tau1_with(arm0: &[PointDatum], arm1: &[PointDatum], rule: Tau1Rule) -> Result<f64> {
    if arm0.is_empty() || arm1.is_empty() {
        return Err(WmstError::EmptyInput("both arms need subjects to select tau1".into()));
    }
    Ok(arm_max(arm0, rule).min(arm_max(arm1, rule)))
}

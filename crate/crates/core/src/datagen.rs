//! Interval-censored trial generator: event-time laws, the visit schedule,
//! attendance and the censoring rule, the scenario registry and the
//! calibrated two-arm families used for sweeps.

use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, WmstError};
use crate::mean_survival::Window;
use crate::observation::{Arm, Observation, Outcome};

/// One linear hazard piece on `[start, end)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HazardPiece {
    pub start: f64,
    pub end: f64,
    pub h_start: f64,
    pub h_end: f64,
}

impl HazardPiece {
    pub fn constant(start: f64, end: f64, h: f64) -> HazardPiece {
        HazardPiece { start, end, h_start: h, h_end: h }
    }

    /// Hazard `a + b t` on `[start, end)`.
    pub fn affine(start: f64, end: f64, a: f64, b: f64) -> HazardPiece {
        HazardPiece { start, end, h_start: a + b * start, h_end: a + b * end }
    }

    fn slope(&self) -> f64 {
        (self.h_end - self.h_start) / (self.end - self.start)
    }

    fn cumulative(&self, u: f64) -> f64 {
        self.h_start * u + 0.5 * self.slope() * u * u
    }
}

/// Event-time law for one arm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ArmLaw {
    /// S(t) = exp(−(t/scale)^shape).
    Weibull { scale: f64, shape: f64 },
    /// Piecewise-linear hazard tiling `[0, 1]`; the final value carries on past 1.
    PiecewiseHazard { pieces: Vec<HazardPiece> },
}

impl ArmLaw {
    pub fn weibull(scale: f64, shape: f64) -> Result<ArmLaw> {
        let law = ArmLaw::Weibull { scale, shape };
        law.validate()?;
        Ok(law)
    }

    pub fn piecewise(pieces: Vec<HazardPiece>) -> Result<ArmLaw> {
        let law = ArmLaw::PiecewiseHazard { pieces };
        law.validate()?;
        Ok(law)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ArmLaw::Weibull { scale, shape } => {
                if !(scale.is_finite() && *scale > 0.0 && shape.is_finite() && *shape > 0.0) {
                    return Err(WmstError::InvalidHazard(format!(
                        "Weibull parameters must be positive, got scale {scale}, shape {shape}"
                    )));
                }
            }
            ArmLaw::PiecewiseHazard { pieces } => {
                let bad = |m: String| Err(WmstError::InvalidHazard(m));
                if pieces.is_empty() {
                    return bad("no hazard pieces".into());
                }
                let mut at = 0.0;
                for (i, p) in pieces.iter().enumerate() {
                    if p.start != at || !(p.end > p.start) || !p.end.is_finite() {
                        return bad(format!("piece {i} does not continue the tiling at {at}"));
                    }
                    if !(p.h_start >= 0.0 && p.h_end >= 0.0) || !p.h_start.is_finite() || !p.h_end.is_finite() {
                        return bad(format!("piece {i} has a negative or non-finite hazard"));
                    }
                    at = p.end;
                }
                if at != 1.0 {
                    return bad(format!("hazard pieces end at {at}, not 1"));
                }
            }
        }
        Ok(())
    }

    /// Piece boundaries inside `(0, 1)`.
    pub fn breakpoints(&self) -> Vec<f64> {
        match self {
            ArmLaw::Weibull { .. } => Vec::new(),
            ArmLaw::PiecewiseHazard { pieces } => pieces.iter().skip(1).map(|p| p.start).collect(),
        }
    }

    pub fn hazard(&self, t: f64) -> f64 {
        match self {
            ArmLaw::Weibull { scale, shape } => shape / scale * (t / scale).powf(shape - 1.0),
            ArmLaw::PiecewiseHazard { pieces } => {
                let last = pieces.last().expect("validated");
                if t >= last.end {
                    return last.h_end;
                }
                let p = pieces[pieces.partition_point(|p| p.end <= t)];
                p.h_start + p.slope() * (t - p.start)
            }
        }
    }

    pub fn cumulative_hazard(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        match self {
            ArmLaw::Weibull { scale, shape } => (t / scale).powf(*shape),
            ArmLaw::PiecewiseHazard { pieces } => {
                let mut acc = 0.0;
                for p in pieces {
                    if t < p.end {
                        return acc + p.cumulative(t - p.start);
                    }
                    acc += p.cumulative(p.end - p.start);
                }
                let last = pieces.last().expect("validated");
                acc + last.h_end * (t - last.end)
            }
        }
    }

    pub fn survival(&self, t: f64) -> f64 {
        (-self.cumulative_hazard(t)).exp()
    }

    /// H⁻¹(e); infinite when the hazard vanishes for good before reaching `e`.
    pub fn inverse_cumulative_hazard(&self, e: f64) -> f64 {
        if e <= 0.0 {
            return 0.0;
        }
        match self {
            ArmLaw::Weibull { scale, shape } => scale * e.powf(1.0 / shape),
            ArmLaw::PiecewiseHazard { pieces } => {
                let mut acc = 0.0;
                for p in pieces {
                    let width = p.end - p.start;
                    let full = p.cumulative(width);
                    if e < acc + full {
                        let rem = e - acc;
                        let (a, b) = (p.h_start, p.slope());
                        // root of a u + b u²/2 = rem, written to avoid cancellation
                        let u = 2.0 * rem / (a + (a * a + 2.0 * b * rem).max(0.0).sqrt());
                        return p.start + u.min(width);
                    }
                    acc += full;
                }
                let last = pieces.last().expect("validated");
                if last.h_end > 0.0 {
                    last.end + (e - acc) / last.h_end
                } else {
                    f64::INFINITY
                }
            }
        }
    }
}

/// Draw an event time by inverting the cumulative hazard at an Exp(1) draw.
pub fn sample_event_time<R: Rng + ?Sized>(rng: &mut R, law: &ArmLaw) -> f64 {
    let u: f64 = rng.random();
    law.inverse_cumulative_hazard(-(1.0 - u).ln())
}

fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let diff = left + right - whole;
    if depth == 0 || diff.abs() <= 15.0 * tol {
        return left + right + diff / 15.0;
    }
    simpson(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) + simpson(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}

/// Adaptive Simpson quadrature to absolute tolerance `tol`.
pub fn integrate_adaptive(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    let (fa, fm, fb) = (f(a), f(0.5 * (a + b)), f(b));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson(f, a, b, fa, fm, fb, whole, tol, 50)
}

/// ∫_{τ0}^{τ1} S(t) dt for a known law.
pub fn true_mean_survival(law: &ArmLaw, window: Window) -> f64 {
    true_mean_between(law, window.tau0, window.tau1)
}

pub(crate) fn true_mean_between(law: &ArmLaw, a: f64, b: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    if let ArmLaw::Weibull { scale, shape } = *law {
        if shape == 1.0 {
            return scale * ((-a / scale).exp() - (-b / scale).exp());
        }
    }
    let mut cuts = vec![a];
    cuts.extend(law.breakpoints().into_iter().filter(|&t| t > a && t < b));
    cuts.push(b);
    let tol = 1e-9 / (cuts.len() - 1) as f64;
    let s = |t: f64| law.survival(t);
    cuts.windows(2).map(|w| integrate_adaptive(&s, w[0], w[1], tol)).sum()
}

/// Control (arm 0) and treatment (arm 1) laws under one id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub id: String,
    pub control: ArmLaw,
    pub treatment: ArmLaw,
}

impl Scenario {
    pub fn new(id: impl Into<String>, control: ArmLaw, treatment: ArmLaw) -> Result<Scenario> {
        control.validate()?;
        treatment.validate()?;
        Ok(Scenario { id: id.into(), control, treatment })
    }

    pub fn law(&self, arm: Arm) -> &ArmLaw {
        match arm {
            Arm::Control => &self.control,
            Arm::Treatment => &self.treatment,
        }
    }

    pub fn is_null(&self) -> bool {
        self.control == self.treatment
    }

    /// True WMST(treatment) − WMST(control).
    pub fn true_difference(&self, window: Window) -> f64 {
        true_mean_survival(&self.treatment, window) - true_mean_survival(&self.control, window)
    }
}

pub const SCENARIO_IDS: [&str; 17] = [
    "weibull-i",
    "weibull-ii",
    "weibull-iii",
    "pwh-iv",
    "pwh-v",
    "weibull-vi",
    "weibull-vii",
    "weibull-viii",
    "pwh-ix",
    "pwh-x",
    "early-diff-xi",
    "late-diff-xii",
    "cross-haz-xiii",
    "cross-haz-xiv",
    "cross-early-xv",
    "cross-middle-xvi",
    "cross-late-xvii",
];

fn w(scale: f64, shape: f64) -> ArmLaw {
    ArmLaw::Weibull { scale, shape }
}

fn pw(pieces: &[HazardPiece]) -> ArmLaw {
    ArmLaw::PiecewiseHazard { pieces: pieces.to_vec() }
}

fn two_piece(cut: f64, first: (f64, f64), second: (f64, f64)) -> ArmLaw {
    pw(&[HazardPiece::affine(0.0, cut, first.0, first.1), HazardPiece::affine(cut, 1.0, second.0, second.1)])
}

/// Look up a registry scenario; hazards given as `(intercept, slope)` in t.
pub fn scenario(id: &str) -> Result<Scenario> {
    let (control, treatment) = match id {
        "weibull-i" => (w(1.0, 1.0), w(1.0, 1.0)),
        "weibull-ii" => (w(1.0, 0.5), w(1.0, 0.5)),
        "weibull-iii" => (w(1.0, 2.0), w(1.0, 2.0)),
        "pwh-iv" => {
            let h = two_piece(0.5, (2.0, 0.0), (1.0, 0.0));
            (h.clone(), h)
        }
        "pwh-v" => {
            let h = two_piece(0.5, (1.0, 0.0), (0.0, 2.0));
            (h.clone(), h)
        }
        "weibull-vi" => (w(0.5, 1.0), w(1.0, 1.0)),
        "weibull-vii" => (w(0.5, 0.5), w(1.0, 0.5)),
        "weibull-viii" => (w(0.75, 2.0), w(1.0, 2.0)),
        "pwh-ix" => (two_piece(0.5, (3.0, 0.0), (1.5, 0.0)), two_piece(0.5, (2.0, 0.0), (1.0, 0.0))),
        "pwh-x" => (two_piece(0.5, (1.5, 0.0), (0.0, 3.0)), two_piece(0.5, (1.0, 0.0), (0.0, 2.0))),
        "early-diff-xi" => (
            two_piece(0.5, (1.75, 0.0), (1.25, 1.0)),
            two_piece(0.5, (0.25, 3.0), (1.25, 1.0)),
        ),
        "late-diff-xii" => (two_piece(0.2, (2.0, 0.0), (1.2, 4.0)), two_piece(0.2, (2.0, 0.0), (2.4, -2.0))),
        "cross-haz-xiii" => (
            pw(&[HazardPiece::affine(0.0, 1.0, 2.0, -1.5)]),
            pw(&[HazardPiece::affine(0.0, 1.0, 0.5, 1.5)]),
        ),
        "cross-haz-xiv" => (two_piece(0.5, (1.5, 0.0), (0.5, 0.0)), pw(&[HazardPiece::affine(0.0, 1.0, 0.5, 1.0)])),
        "cross-early-xv" => (two_piece(0.2, (1.0, 10.0), (3.0, 0.0)), two_piece(0.2, (3.0, -10.0), (1.0, 0.0))),
        "cross-middle-xvi" => (two_piece(0.25, (1.0, 0.0), (3.0, 0.0)), two_piece(0.25, (2.0, 0.0), (2.0, 0.0))),
        "cross-late-xvii" => (two_piece(0.8, (1.0, 2.5), (3.0, 0.0)), two_piece(0.8, (3.0, -2.5), (1.0, 0.0))),
        other => return Err(WmstError::UnknownScenario(other.to_string())),
    };
    Scenario::new(id, control, treatment)
}

/// Named dropout levels; the final exam's dropout is twice the others.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DropoutProfile {
    None,
    Low,
    Medium,
    High,
}

impl DropoutProfile {
    fn base(self) -> f64 {
        match self {
            DropoutProfile::None => 0.0,
            DropoutProfile::Low => 0.1,
            DropoutProfile::Medium => 0.2,
            DropoutProfile::High => 0.3,
        }
    }
}

pub fn dropout_profile(profile: DropoutProfile, k: usize) -> Vec<f64> {
    let b = profile.base();
    let mut v = vec![b; k];
    if let Some(last) = v.last_mut() {
        *last = 2.0 * b;
    }
    v
}

/// When an exactly-observed event stops being observable.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ExactFollowUp {
    /// Exact events up to this time are seen; later ones are censored at the
    /// last attended exam.
    Horizon { time: f64 },
    /// Exact events after the final scheduled exam are censored there.
    FinalExam,
}

impl Default for ExactFollowUp {
    fn default() -> Self {
        ExactFollowUp::Horizon { time: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VisitPlan {
    /// Post-baseline exam count.
    pub k: usize,
    /// Per-exam probability of missing exams 1..=K.
    pub dropout: Vec<f64>,
    pub p_exact: f64,
    #[serde(default)]
    pub exact_follow_up: ExactFollowUp,
}

impl VisitPlan {
    pub fn new(k: usize, dropout: Vec<f64>, p_exact: f64) -> Result<VisitPlan> {
        let plan = VisitPlan { k, dropout, p_exact, exact_follow_up: ExactFollowUp::default() };
        plan.validate()?;
        Ok(plan)
    }

    pub fn with_profile(k: usize, profile: DropoutProfile, p_exact: f64) -> Result<VisitPlan> {
        VisitPlan::new(k, dropout_profile(profile, k), p_exact)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(WmstError::InvalidParameter(m));
        if self.k == 0 {
            return bad("at least one post-baseline exam is required".into());
        }
        if self.dropout.len() != self.k {
            return bad(format!("dropout has {} entries for K = {}", self.dropout.len(), self.k));
        }
        if self.dropout.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return bad("dropout probabilities must lie in [0, 1]".into());
        }
        if !(0.0..=1.0).contains(&self.p_exact) {
            return bad(format!("p_exact {} outside [0, 1]", self.p_exact));
        }
        if let ExactFollowUp::Horizon { time } = self.exact_follow_up {
            if !(time > 0.0) {
                return bad(format!("exact follow-up horizon {time} must be positive"));
            }
        }
        Ok(())
    }
}

/// Exam times `g_0 + k/(K+1)`, `k = 0..=K`, from a baseline offset.
pub fn schedule_from_baseline(g0: f64, k: usize) -> Vec<f64> {
    let step = 1.0 / (k + 1) as f64;
    (0..=k).map(|i| g0 + i as f64 * step).collect()
}

/// Baseline `g_0 ~ U(0, 1/(K+1))` then `K` equally spaced exams.
pub fn make_schedule<R: Rng + ?Sized>(rng: &mut R, k: usize) -> Vec<f64> {
    let u: f64 = rng.random();
    // keep g_0 strictly positive so an event at 0 still has a covering exam
    let g0 = (1.0 - u) / (k + 1) as f64;
    schedule_from_baseline(g0, k)
}

/// What the investigator sees for an event at `t`.
pub fn censor_observation(t: f64, schedule: &[f64], attended: &[bool], xi: bool, follow_up: ExactFollowUp) -> Outcome {
    assert_eq!(schedule.len(), attended.len(), "attendance must align with the schedule");
    let seen = || schedule.iter().zip(attended).filter(|(_, &a)| a).map(|(&g, _)| g);
    let last_seen = seen().last().unwrap_or(0.0);
    if xi {
        let limit = match follow_up {
            ExactFollowUp::Horizon { time } => time,
            ExactFollowUp::FinalExam => *schedule.last().expect("non-empty schedule"),
        };
        return if t <= limit { Outcome::Exact(t) } else { Outcome::RightCensored(last_seen) };
    }
    match seen().find(|&g| g >= t) {
        Some(right) => {
            let left = seen().take_while(|&g| g < t).last().unwrap_or(0.0);
            Outcome::Interval { left, right }
        }
        None => Outcome::RightCensored(last_seen),
    }
}

/// One subject. Draws, in order: baseline offset, event time, K attendance
/// flags and the exact flag, so the stream position per subject is fixed.
pub fn generate_subject<R: Rng + ?Sized>(rng: &mut R, law: &ArmLaw, plan: &VisitPlan, arm: Arm) -> Observation {
    let schedule = make_schedule(rng, plan.k);
    let t = sample_event_time(rng, law);
    let mut attended = Vec::with_capacity(plan.k + 1);
    attended.push(true);
    for &p in &plan.dropout {
        let u: f64 = rng.random();
        attended.push(u >= p);
    }
    let u: f64 = rng.random();
    let xi = u < plan.p_exact;
    Observation { outcome: censor_observation(t, &schedule, &attended, xi, plan.exact_follow_up), arm }
}

/// Subjects per arm and which arms to simulate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialDesign {
    pub scenario: Scenario,
    pub plan: VisitPlan,
    pub n_per_arm: usize,
    /// Simulate the treatment arm too.
    pub two_arms: bool,
}

/// All control subjects, then all treatment subjects.
pub fn generate_trial<R: Rng + ?Sized>(design: &TrialDesign, rng: &mut R) -> Vec<Observation> {
    let arms: &[Arm] = if design.two_arms { &[Arm::Control, Arm::Treatment] } else { &[Arm::Control] };
    let mut out = Vec::with_capacity(design.n_per_arm * arms.len());
    for &arm in arms {
        let law = design.scenario.law(arm);
        for _ in 0..design.n_per_arm {
            out.push(generate_subject(rng, law, &design.plan, arm));
        }
    }
    out
}

/// Two-arm families whose RMST(0, 1) difference is solved for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    /// Common hazard 2 until x; afterwards the control hazard climbs as
    /// 2 + 2b(t − x) and the treatment hazard falls as max(0, 2 − b(t − x)).
    LateDifference,
    /// Hazards 2 ∓ d at 0 meet at x and swap to 2 ± d afterwards, so the
    /// treatment arm starts worse and ends better.
    EarlyCrossing,
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Family::LateDifference => "late-difference",
            Family::EarlyCrossing => "early-crossing",
        })
    }
}

const LATE_SLOPE_MAX: f64 = 1e4;
const CALIBRATION_TOL: f64 = 1e-9;

fn family_laws(family: Family, x: f64, param: f64) -> (ArmLaw, ArmLaw) {
    match family {
        Family::LateDifference => {
            let b = param;
            let common = HazardPiece::constant(0.0, x, 2.0);
            let control = pw(&[common, HazardPiece::affine(x, 1.0, 2.0 - 2.0 * b * x, 2.0 * b)]);
            let zero_at = if b > 0.0 { x + 2.0 / b } else { f64::INFINITY };
            let treatment = if zero_at < 1.0 {
                pw(&[
                    common,
                    HazardPiece { start: x, end: zero_at, h_start: 2.0, h_end: 0.0 },
                    HazardPiece::constant(zero_at, 1.0, 0.0),
                ])
            } else {
                pw(&[common, HazardPiece::affine(x, 1.0, 2.0 + b * x, -b)])
            };
            (control, treatment)
        }
        Family::EarlyCrossing => {
            let d = param;
            let control = pw(&[
                HazardPiece::affine(0.0, x, 2.0 - d, 2.0 * d / x),
                HazardPiece::constant(x, 1.0, 2.0 + d),
            ]);
            let treatment = pw(&[
                HazardPiece::affine(0.0, x, 2.0 + d, -2.0 * d / x),
                HazardPiece::constant(x, 1.0, 2.0 - d),
            ]);
            (control, treatment)
        }
    }
}

fn rmst_gap(family: Family, x: f64, param: f64) -> f64 {
    let (c, t) = family_laws(family, x, param);
    true_mean_between(&t, 0.0, 1.0) - true_mean_between(&c, 0.0, 1.0)
}

/// Solve the family's free parameter so that RMST₁(0, 1) − RMST₀(0, 1) = δ.
pub fn calibrate_scenario(family: Family, x: f64, delta: f64) -> Result<Scenario> {
    if !(x > 0.0 && x < 1.0) {
        return Err(WmstError::InvalidParameter(format!("x = {x} must lie in (0, 1)")));
    }
    if !(delta >= 0.0 && delta.is_finite()) {
        return Err(WmstError::InvalidParameter(format!("delta = {delta} must be non-negative")));
    }
    let hi_param = match family {
        Family::LateDifference => LATE_SLOPE_MAX,
        Family::EarlyCrossing => 2.0,
    };
    let param = if delta == 0.0 {
        0.0
    } else {
        let reach = rmst_gap(family, x, hi_param);
        if reach < delta {
            return Err(WmstError::InfeasibleCalibration(format!(
                "{family} at x = {x} reaches at most delta = {reach:.4}"
            )));
        }
        let (mut lo, mut hi) = (0.0, hi_param);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            let gap = rmst_gap(family, x, mid) - delta;
            if gap.abs() < CALIBRATION_TOL {
                lo = mid;
                hi = mid;
                break;
            }
            if gap < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    };
    let (control, treatment) = family_laws(family, x, param);
    Scenario::new(format!("{family}(x={x},delta={delta})"), control, treatment)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn schedule_arithmetic() {
        let s = schedule_from_baseline(0.1, 5);
        let expect = [0.1, 0.2667, 0.4333, 0.6, 0.7667, 0.9333];
        for (a, b) in s.iter().zip(expect) {
            assert!((a - b).abs() < 1e-4);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..1000 {
            let s = make_schedule(&mut rng, 5);
            assert!(s[0] > 0.0 && s[0] <= 1.0 / 6.0 && s[5] < 1.0);
        }
    }

    #[test]
    fn piecewise_inversion() {
        let iv = scenario("pwh-iv").unwrap().control;
        assert!((iv.inverse_cumulative_hazard(0.5) - 0.25).abs() < 1e-12);
        assert!((iv.inverse_cumulative_hazard(1.2) - 0.7).abs() < 1e-12);
        // past 1 the last hazard (1) carries on: H(1) = 1.5
        assert!((iv.inverse_cumulative_hazard(2.0) - 1.5).abs() < 1e-12);
        let v = scenario("pwh-v").unwrap().control;
        for e in [0.1, 0.5, 0.6, 0.9, 1.4] {
            let t = v.inverse_cumulative_hazard(e);
            assert!((v.cumulative_hazard(t) - e).abs() < 1e-12, "{e}");
        }
    }

    #[test]
    fn decreasing_hazard_inversion() {
        let xii = scenario("late-diff-xii").unwrap().treatment;
        for e in [0.3, 0.4, 0.8, 1.1, 2.0] {
            let t = xii.inverse_cumulative_hazard(e);
            assert!((xii.cumulative_hazard(t) - e).abs() < 1e-12, "{e}");
        }
    }

    #[test]
    fn weibull_inversion() {
        let law = ArmLaw::weibull(1.0, 1.0).unwrap();
        assert!((law.inverse_cumulative_hazard(-(-1.0f64).exp().ln()) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn zero_tail_hazard_never_fails() {
        let law = ArmLaw::piecewise(vec![HazardPiece::constant(0.0, 1.0, 0.0)]).unwrap();
        assert_eq!(law.inverse_cumulative_hazard(0.3), f64::INFINITY);
    }

    #[test]
    fn rejects_bad_hazards() {
        assert!(ArmLaw::piecewise(vec![HazardPiece::constant(0.0, 1.0, -0.1)]).is_err());
        assert!(ArmLaw::piecewise(vec![HazardPiece::constant(0.0, 0.5, 1.0)]).is_err());
        assert!(ArmLaw::weibull(0.0, 1.0).is_err());
        assert!(scenario("nope").is_err());
    }

    #[test]
    fn censoring_rule() {
        let s = schedule_from_baseline(0.1, 5);
        let all = [true; 6];
        let fu = ExactFollowUp::FinalExam;
        match censor_observation(0.5, &s, &all, false, fu) {
            Outcome::Interval { left, right } => {
                assert!((left - s[2]).abs() < 1e-15 && (right - 0.6).abs() < 1e-12);
            }
            o => panic!("{o:?}"),
        }
        assert_eq!(censor_observation(0.5, &s, &all, true, fu), Outcome::Exact(0.5));
        assert_eq!(censor_observation(0.95, &s, &all, false, fu), Outcome::RightCensored(s[5]));
        assert_eq!(censor_observation(0.05, &s, &all, false, fu), Outcome::Interval { left: 0.0, right: 0.1 });
        let missed = [true, true, false, false, true, false];
        assert_eq!(
            censor_observation(0.5, &s, &missed, false, fu),
            Outcome::Interval { left: s[1], right: s[4] }
        );
        assert_eq!(censor_observation(0.8, &s, &missed, false, fu), Outcome::RightCensored(s[4]));
        // exact events past the last exam
        assert_eq!(censor_observation(0.95, &s, &all, true, fu), Outcome::RightCensored(s[5]));
        let h = ExactFollowUp::Horizon { time: 1.0 };
        assert_eq!(censor_observation(0.95, &s, &all, true, h), Outcome::Exact(0.95));
        assert_eq!(censor_observation(1.2, &s, &missed, true, h), Outcome::RightCensored(s[4]));
    }

    #[test]
    fn dropout_profiles() {
        assert_eq!(dropout_profile(DropoutProfile::Medium, 5), vec![0.2, 0.2, 0.2, 0.2, 0.4]);
        assert_eq!(dropout_profile(DropoutProfile::None, 4), vec![0.0; 4]);
        assert_eq!(dropout_profile(DropoutProfile::High, 3), vec![0.3, 0.3, 0.6]);
    }

    #[test]
    fn true_means() {
        let e = ArmLaw::weibull(1.0, 1.0).unwrap();
        let w25 = Window::new(0.25, 1.0).unwrap();
        let closed = (-0.25f64).exp() - (-1.0f64).exp();
        assert!((true_mean_survival(&e, w25) - closed).abs() < 1e-12);
        assert!((closed - 0.410922).abs() < 1e-6);
        assert!((true_mean_survival(&e, Window::new(0.5, 1.0).unwrap()) - 0.238651).abs() < 1e-6);
        assert_eq!(true_mean_between(&e, 0.4, 0.4), 0.0);
        // quadrature route agrees with the closed form
        let pw1 = ArmLaw::piecewise(vec![HazardPiece::constant(0.0, 1.0, 1.0)]).unwrap();
        assert!((true_mean_survival(&pw1, w25) - true_mean_survival(&e, w25)).abs() < 1e-9);
    }

    #[test]
    fn null_scenarios_have_identical_arms() {
        for id in &SCENARIO_IDS[..5] {
            assert!(scenario(id).unwrap().is_null(), "{id}");
        }
        for id in &SCENARIO_IDS[5..] {
            assert!(!scenario(id).unwrap().is_null(), "{id}");
        }
    }

    #[test]
    fn subject_is_deterministic() {
        let plan = VisitPlan::with_profile(5, DropoutProfile::Medium, 0.3).unwrap();
        let law = ArmLaw::weibull(1.0, 1.0).unwrap();
        let a = generate_subject(&mut ChaCha8Rng::seed_from_u64(9), &law, &plan, Arm::Control);
        let b = generate_subject(&mut ChaCha8Rng::seed_from_u64(9), &law, &plan, Arm::Control);
        assert_eq!(a, b);
    }

    #[test]
    fn calibration_hits_delta() {
        for family in [Family::LateDifference, Family::EarlyCrossing] {
            for x in [0.1, 0.2, 0.3] {
                for delta in [0.1, 0.15, 0.2] {
                    let s = calibrate_scenario(family, x, delta).unwrap();
                    let gap = s.true_difference(Window::new(0.0, 1.0).unwrap());
                    assert!((gap - delta).abs() < 1e-6, "{family} {x} {delta}: {gap}");
                }
            }
            assert!(calibrate_scenario(family, 0.2, 0.0).unwrap().is_null());
            assert!(matches!(
                calibrate_scenario(family, 0.2, 0.9),
                Err(WmstError::InfeasibleCalibration(_))
            ));
        }
    }
}

//! Turnbull's nonparametric MLE for interval-censored data, fitted with the
//! self-consistency (EM) iteration.
//!
//! Each observation is treated as a set of possible event times:
//! `(l, r]` for an interval, `{t}` for an exact time and `(c, ∞)` for a
//! right-censored subject. The NPMLE puts all of its mass on the innermost
//! intervals: places where a left endpoint is immediately followed by a
//! right endpoint once all endpoints are sorted.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::curve::{Segment, Shape, SurvivalCurve};
use crate::error::{Result, WmstError};
use crate::estimators::{impute_midpoint, km_fit};
use crate::observation::{Observation, Outcome};

pub const DEFAULT_TOL: f64 = 1e-8;
pub const DEFAULT_MAX_ITER: usize = 10_000;

/// One innermost interval. `left == right` marks a point mass at that time;
/// otherwise the support is `(left, right]`, with `right = ∞` allowed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TurnbullInterval {
    pub left: f64,
    pub right: f64,
}

impl TurnbullInterval {
    pub fn is_point(&self) -> bool {
        self.left == self.right
    }

    fn inside(&self, outcome: &Outcome) -> bool {
        match *outcome {
            Outcome::Exact(t) => self.is_point() && self.left == t,
            Outcome::Interval { left, right } => {
                if self.is_point() {
                    left < self.left && self.left <= right
                } else {
                    left <= self.left && self.right <= right
                }
            }
            Outcome::RightCensored(c) => {
                if self.is_point() {
                    c < self.left
                } else {
                    c <= self.left
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TurnbullFit {
    pub intervals: Vec<TurnbullInterval>,
    pub masses: Vec<f64>,
    /// Flat between intervals, linear across each positive-width interval.
    pub curve: SurvivalCurve,
    pub iterations: usize,
    pub final_change: f64,
    /// Log-likelihood Σ log P(T_i ∈ set_i) before each EM update and after the last.
    pub log_likelihood: Vec<f64>,
}

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum EndKind {
    // order matters: at equal values a closed start (exact time) comes
    // first, then closing endpoints, then open starts
    ClosedLeft,
    Right,
    OpenLeft,
}

fn innermost_intervals(data: &[Observation]) -> Vec<TurnbullInterval> {
    let mut ends: Vec<(f64, EndKind)> = Vec::with_capacity(2 * data.len());
    for o in data {
        match o.outcome {
            Outcome::Exact(t) => {
                ends.push((t, EndKind::ClosedLeft));
                ends.push((t, EndKind::Right));
            }
            Outcome::Interval { left, right } => {
                ends.push((left, EndKind::OpenLeft));
                ends.push((right, EndKind::Right));
            }
            Outcome::RightCensored(c) => {
                ends.push((c, EndKind::OpenLeft));
                ends.push((f64::INFINITY, EndKind::Right));
            }
        }
    }
    ends.sort_by(|a, b| match a.0.total_cmp(&b.0) {
        Ordering::Equal => a.1.cmp(&b.1),
        o => o,
    });
    let mut out: Vec<TurnbullInterval> = Vec::new();
    for w in ends.windows(2) {
        let (l, lk) = w[0];
        let (r, rk) = w[1];
        if lk != EndKind::Right && rk == EndKind::Right {
            let iv = TurnbullInterval { left: l, right: r };
            if out.last() != Some(&iv) {
                out.push(iv);
            }
        }
    }
    out
}

/// Fit the NPMLE with uniform starting masses, stopping once the largest
/// absolute mass update drops below `tol`.
pub fn turnbull_fit(data: &[Observation], tol: f64, max_iter: usize) -> Result<TurnbullFit> {
    if data.is_empty() {
        return Err(WmstError::EmptyInput("Turnbull needs at least one subject".into()));
    }
    if !(tol > 0.0) || max_iter == 0 {
        return Err(WmstError::InvalidParameter(format!(
            "need tol > 0 and max_iter >= 1, got {tol} and {max_iter}"
        )));
    }
    for o in data {
        o.outcome.validate()?;
    }
    if data.iter().all(|o| o.outcome.is_censored()) {
        return Err(WmstError::EmptyInput(
            "Turnbull needs at least one non-right-censored observation".into(),
        ));
    }

    let intervals = innermost_intervals(data);
    let m = intervals.len();
    let n = data.len() as f64;

    // each observation covers a contiguous run of innermost intervals
    let mut ranges = Vec::with_capacity(data.len());
    for o in data {
        let first = intervals.iter().position(|iv| iv.inside(&o.outcome));
        let Some(first) = first else {
            return Err(WmstError::InvalidObservation(format!(
                "observation {:?} contains no innermost interval",
                o.outcome
            )));
        };
        let len = intervals[first..].iter().take_while(|iv| iv.inside(&o.outcome)).count();
        ranges.push((first, first + len));
    }

    let mut masses = vec![1.0 / m as f64; m];
    let mut prefix = vec![0.0; m + 1];
    let mut weight = vec![0.0; m + 1];
    let mut log_likelihood = Vec::new();
    let mut iterations = 0;
    let mut final_change = f64::INFINITY;

    let loglik_and_weights = |masses: &[f64], prefix: &mut [f64], weight: &mut [f64]| {
        for j in 0..m {
            prefix[j + 1] = prefix[j] + masses[j];
        }
        weight.iter_mut().for_each(|w| *w = 0.0);
        let mut ll = 0.0;
        for &(a, b) in &ranges {
            let p = prefix[b] - prefix[a];
            ll += p.ln();
            // difference array: every interval in [a, b) gains 1 / p
            weight[a] += 1.0 / p;
            weight[b] -= 1.0 / p;
        }
        ll
    };

    while iterations < max_iter {
        log_likelihood.push(loglik_and_weights(&masses, &mut prefix, &mut weight));
        let mut change: f64 = 0.0;
        let mut acc = 0.0;
        let mut total = 0.0;
        for j in 0..m {
            acc += weight[j];
            let updated = masses[j] * acc / n;
            change = change.max((updated - masses[j]).abs());
            masses[j] = updated;
            total += updated;
        }
        // guard against drift in the normalization
        masses.iter_mut().for_each(|a| *a /= total);
        iterations += 1;
        final_change = change;
        if change < tol {
            break;
        }
    }
    log_likelihood.push(loglik_and_weights(&masses, &mut prefix, &mut weight));

    if final_change >= tol {
        return Err(WmstError::NotConverged { iterations, final_change });
    }

    let curve = curve_from_masses(&intervals, &masses)?;
    Ok(TurnbullFit {
        intervals,
        masses,
        curve,
        iterations,
        final_change,
        log_likelihood,
    })
}

/// NPMLE survival curve. Without interval-censored observations the NPMLE
/// is the Kaplan-Meier curve, which is returned in closed form; otherwise
/// the EM fit is run.
pub fn turnbull_curve(data: &[Observation], tol: f64, max_iter: usize) -> Result<SurvivalCurve> {
    if data.iter().any(|o| matches!(o.outcome, Outcome::Interval { .. })) {
        return Ok(turnbull_fit(data, tol, max_iter)?.curve);
    }
    Ok(km_fit(&impute_midpoint(data))?.curve)
}

fn curve_from_masses(intervals: &[TurnbullInterval], masses: &[f64]) -> Result<SurvivalCurve> {
    let mut segments = Vec::new();
    let mut cursor = 0.0;
    let mut value: f64 = 1.0;
    let flat_to = |segments: &mut Vec<Segment>, cursor: f64, to: f64, value: f64| {
        if to > cursor {
            segments.push(Segment {
                start: cursor,
                end: to,
                start_value: value,
                end_value: value,
                shape: Shape::Step,
            });
        }
    };
    for (iv, &mass) in intervals.iter().zip(masses) {
        if iv.right.is_infinite() {
            // mass beyond the last finite endpoint stays unplaced
            break;
        }
        let next = (value - mass).max(0.0);
        if iv.is_point() {
            flat_to(&mut segments, cursor, iv.left, value);
            cursor = cursor.max(iv.left);
        } else {
            flat_to(&mut segments, cursor, iv.left, value);
            segments.push(Segment {
                start: iv.left,
                end: iv.right,
                start_value: value,
                end_value: next,
                shape: Shape::Linear,
            });
            cursor = iv.right;
        }
        value = next;
    }
    SurvivalCurve::new(segments, value)
}

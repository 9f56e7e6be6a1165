//! Per-subject outcomes as they come out of a trial with periodic examinations.

use serde::{Deserialize, Serialize};

use crate::error::{Result, WmstError};

/// Two-arm label. Arm 0 is the control arm, arm 1 the treatment arm.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Arm {
    Control,
    Treatment,
}

impl Arm {
    pub fn index(self) -> u8 {
        match self {
            Arm::Control => 0,
            Arm::Treatment => 1,
        }
    }

    pub fn from_index(i: u8) -> Option<Arm> {
        match i {
            0 => Some(Arm::Control),
            1 => Some(Arm::Treatment),
            _ => None,
        }
    }
}

/// What is known about one subject's event time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Outcome {
    /// The event was observed at exactly this time.
    Exact(f64),
    /// The event happened in the half-open interval `(left, right]`.
    Interval { left: f64, right: f64 },
    /// The subject was last seen event-free at this time.
    RightCensored(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub outcome: Outcome,
    pub arm: Arm,
}

fn check_time(t: f64, what: &str) -> Result<()> {
    if !t.is_finite() || t < 0.0 {
        return Err(WmstError::InvalidObservation(format!(
            "{what} must be finite and non-negative, got {t}"
        )));
    }
    Ok(())
}

impl Outcome {
    pub fn exact(t: f64) -> Result<Outcome> {
        check_time(t, "exact time")?;
        Ok(Outcome::Exact(t))
    }

    pub fn interval(left: f64, right: f64) -> Result<Outcome> {
        check_time(left, "left endpoint")?;
        check_time(right, "right endpoint")?;
        if left >= right {
            return Err(WmstError::InvalidObservation(format!(
                "interval requires left < right, got ({left}, {right}]"
            )));
        }
        Ok(Outcome::Interval { left, right })
    }

    pub fn right_censored(c: f64) -> Result<Outcome> {
        check_time(c, "censoring time")?;
        Ok(Outcome::RightCensored(c))
    }

    /// Re-check the invariants of a value that may have been built directly.
    pub fn validate(&self) -> Result<()> {
        match *self {
            Outcome::Exact(t) => Outcome::exact(t).map(|_| ()),
            Outcome::Interval { left, right } => Outcome::interval(left, right).map(|_| ()),
            Outcome::RightCensored(c) => Outcome::right_censored(c).map(|_| ()),
        }
    }

    pub fn is_censored(&self) -> bool {
        matches!(self, Outcome::RightCensored(_))
    }

    /// Largest finite time carried by the outcome.
    pub fn last_finite_time(&self) -> f64 {
        match *self {
            Outcome::Exact(t) => t,
            Outcome::Interval { right, .. } => right,
            Outcome::RightCensored(c) => c,
        }
    }
}

impl Observation {
    pub fn new(outcome: Outcome, arm: Arm) -> Result<Observation> {
        outcome.validate()?;
        Ok(Observation { outcome, arm })
    }
}

/// Split a two-arm list into (control, treatment), preserving order.
pub fn split_arms(data: &[Observation]) -> (Vec<Observation>, Vec<Observation>) {
    data.iter().partition(|o| o.arm == Arm::Control)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interval_requires_strict_order() {
        assert!(Outcome::interval(2.0, 2.0).is_err());
        assert!(Outcome::interval(3.0, 2.0).is_err());
        assert!(Outcome::interval(2.0, 4.0).is_ok());
    }

    #[test]
    fn rejects_negative_and_non_finite() {
        assert!(Outcome::exact(-1.0).is_err());
        assert!(Outcome::right_censored(f64::INFINITY).is_err());
        assert!(Outcome::interval(0.0, f64::NAN).is_err());
    }

    #[test]
    fn split_preserves_order() {
        let data = vec![
            Observation::new(Outcome::Exact(1.0), Arm::Treatment).unwrap(),
            Observation::new(Outcome::Exact(2.0), Arm::Control).unwrap(),
            Observation::new(Outcome::Exact(3.0), Arm::Treatment).unwrap(),
        ];
        let (c, t) = split_arms(&data);
        assert_eq!(c.len(), 1);
        assert_eq!(t[1].outcome, Outcome::Exact(3.0));
    }
}

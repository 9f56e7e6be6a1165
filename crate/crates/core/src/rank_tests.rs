//! Weighted log-rank tests on pooled two-arm point data.

use serde::{Deserialize, Serialize};

use crate::error::{Result, WmstError};
use crate::estimators::PointDatum;
use crate::mean_survival::{TestMethod, TestResult};
use crate::normal::two_sided_p;

/// Weight applied to each pooled event time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum WeightFn {
    LogRank,
    /// Ŝ(t−)^p (1 − Ŝ(t−))^q with Ŝ the pooled Kaplan-Meier curve.
    FlemingHarrington { p: f64, q: f64 },
}

impl WeightFn {
    pub fn weight(&self, s_minus: f64) -> f64 {
        match *self {
            WeightFn::LogRank => 1.0,
            WeightFn::FlemingHarrington { p, q } => s_minus.powf(p) * (1.0 - s_minus).powf(q),
        }
    }

    pub fn method(&self) -> TestMethod {
        match *self {
            WeightFn::LogRank => TestMethod::LogRank,
            WeightFn::FlemingHarrington { p, q } => TestMethod::FlemingHarrington { p, q },
        }
    }

    fn validate(&self) -> Result<()> {
        if let WeightFn::FlemingHarrington { p, q } = *self {
            if !(p >= 0.0 && q >= 0.0 && p.is_finite() && q.is_finite()) {
                return Err(WmstError::InvalidParameter(format!(
                    "Fleming-Harrington exponents must be finite and non-negative, got ({p}, {q})"
                )));
            }
        }
        Ok(())
    }
}

pub fn fh_weight(p: f64, q: f64) -> WeightFn {
    WeightFn::FlemingHarrington { p, q }
}

/// One 2×2 table at a distinct pooled event time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WrtRow {
    pub time: f64,
    pub events: usize,
    pub at_risk: usize,
    pub at_risk1: usize,
    /// Arm-1 events.
    pub observed: f64,
    /// Arm-1 events expected under the null.
    pub expected: f64,
    pub variance: f64,
    pub weight: f64,
    pub s_minus: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WrtAccumulator {
    pub rows: Vec<WrtRow>,
}

impl WrtAccumulator {
    /// Sweep the pooled data once, one table per event time. Events at a
    /// tied time share a table; censorings at that time leave afterwards.
    pub fn build(arm0: &[PointDatum], arm1: &[PointDatum], weight: WeightFn) -> Result<WrtAccumulator> {
        weight.validate()?;
        let mut pooled: Vec<(f64, bool, bool)> = arm0
            .iter()
            .map(|d| (d.time, d.event, false))
            .chain(arm1.iter().map(|d| (d.time, d.event, true)))
            .collect();
        for &(t, _, _) in &pooled {
            if !t.is_finite() || t < 0.0 {
                return Err(WmstError::InvalidObservation(format!("bad time {t}")));
            }
        }
        pooled.sort_by(|a, b| a.0.total_cmp(&b.0));

        let mut at_risk = pooled.len();
        let mut at_risk1 = arm1.len();
        let mut surv = 1.0;
        let mut rows = Vec::new();
        let mut i = 0;
        while i < pooled.len() {
            let t = pooled[i].0;
            let (mut d, mut d1, mut leave1, mut leave) = (0, 0, 0, 0);
            while i < pooled.len() && pooled[i].0 == t {
                let (_, ev, is1) = pooled[i];
                d += usize::from(ev);
                d1 += usize::from(ev && is1);
                leave1 += usize::from(is1);
                leave += 1;
                i += 1;
            }
            if d > 0 {
                let (r, r1, df) = (at_risk as f64, at_risk1 as f64, d as f64);
                let frac = r1 / r;
                let variance = if at_risk > 1 {
                    df * frac * (1.0 - frac) * (r - df) / (r - 1.0)
                } else {
                    0.0
                };
                rows.push(WrtRow {
                    time: t,
                    events: d,
                    at_risk,
                    at_risk1,
                    observed: d1 as f64,
                    expected: df * frac,
                    variance,
                    weight: weight.weight(surv),
                    s_minus: surv,
                });
                surv *= 1.0 - df / r;
            }
            at_risk -= leave;
            at_risk1 -= leave1;
        }
        Ok(WrtAccumulator { rows })
    }

    /// Σ w (o − e).
    pub fn score(&self) -> f64 {
        self.rows.iter().map(|r| r.weight * (r.observed - r.expected)).sum()
    }

    /// Σ w² v.
    pub fn variance(&self) -> f64 {
        self.rows.iter().map(|r| r.weight * r.weight * r.variance).sum()
    }
}

/// Z = Σ w (o − e) / √(Σ w² v) with o, e counted on arm 1.
pub fn weighted_logrank(arm0: &[PointDatum], arm1: &[PointDatum], weight: WeightFn) -> Result<TestResult> {
    if arm0.is_empty() || arm1.is_empty() {
        return Err(WmstError::EmptyInput("both arms need subjects".into()));
    }
    let acc = WrtAccumulator::build(arm0, arm1, weight)?;
    if acc.rows.is_empty() {
        return Err(WmstError::DegenerateTest("no events in the pooled data".into()));
    }
    let var = acc.variance();
    if !(var > 0.0) {
        return Err(WmstError::DegenerateTest("weighted log-rank variance is zero".into()));
    }
    let z = acc.score() / var.sqrt();
    Ok(TestResult {
        method: weight.method(),
        statistic: z,
        p_value: two_sided_p(z),
        effect: None,
        window: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn events(ts: &[f64]) -> Vec<PointDatum> {
        ts.iter().copied().map(PointDatum::event).collect()
    }

    #[test]
    fn hand_tables() {
        let r = weighted_logrank(&events(&[3.0, 4.0]), &events(&[1.0, 2.0]), WeightFn::LogRank).unwrap();
        let expect = (7.0 / 6.0) / (17.0f64 / 36.0).sqrt();
        assert!((r.statistic - expect).abs() < 1e-12);
        assert!((r.statistic - 1.698).abs() < 1e-3);
    }

    #[test]
    fn identical_arms() {
        let a = vec![PointDatum::event(1.0), PointDatum::censored(1.5), PointDatum::event(2.0)];
        let r = weighted_logrank(&a, &a, WeightFn::LogRank).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert_eq!(r.p_value, 1.0);
    }

    #[test]
    fn fh_zero_zero_is_logrank() {
        let a = vec![PointDatum::event(1.0), PointDatum::censored(2.5), PointDatum::event(3.0)];
        let b = events(&[0.5, 2.0, 2.0, 4.0]);
        let lr = weighted_logrank(&a, &b, WeightFn::LogRank).unwrap();
        let fh = weighted_logrank(&a, &b, fh_weight(0.0, 0.0)).unwrap();
        assert_eq!(lr.statistic, fh.statistic);
        assert_eq!(lr.p_value, fh.p_value);
    }

    #[test]
    fn first_event_has_zero_late_weight() {
        let acc = WrtAccumulator::build(&events(&[1.0, 3.0]), &events(&[2.0]), fh_weight(0.0, 1.0)).unwrap();
        assert_eq!(acc.rows[0].s_minus, 1.0);
        assert_eq!(acc.rows[0].weight, 0.0);
        assert!((acc.rows[1].s_minus - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn tied_events_share_table() {
        let acc = WrtAccumulator::build(
            &[PointDatum::event(1.0), PointDatum::censored(1.0)],
            &events(&[1.0, 2.0]),
            WeightFn::LogRank,
        )
        .unwrap();
        let row = acc.rows[0];
        assert_eq!((row.events, row.at_risk, row.at_risk1), (2, 4, 2));
        // 2 · ½ · ½ · (4 − 2)/(4 − 1)
        assert!((row.variance - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(acc.rows[1].at_risk, 1);
        assert_eq!(acc.rows[1].variance, 0.0);
    }

    #[test]
    fn no_events_is_degenerate() {
        let a = vec![PointDatum::censored(1.0)];
        assert!(matches!(
            weighted_logrank(&a, &a, WeightFn::LogRank),
            Err(WmstError::DegenerateTest(_))
        ));
    }

    #[test]
    fn rejects_negative_exponent() {
        let a = events(&[1.0]);
        assert!(weighted_logrank(&a, &a, fh_weight(-1.0, 0.0)).is_err());
    }
}

//! Kaplan-Meier estimation on point data, the single-point imputations that
//! turn interval-censored outcomes into point data, and Greenwood's
//! variance/covariance for the product-limit curve.

use serde::{Deserialize, Serialize};

use crate::curve::SurvivalCurve;
use crate::error::{Result, WmstError};
use crate::observation::{Observation, Outcome};

/// A time with an event/censoring status, the input to Kaplan-Meier.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointDatum {
    pub time: f64,
    pub event: bool,
}

impl PointDatum {
    pub fn event(time: f64) -> PointDatum {
        PointDatum { time, event: true }
    }

    pub fn censored(time: f64) -> PointDatum {
        PointDatum { time, event: false }
    }
}

/// How interval-censored outcomes are collapsed to a single time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Imputation {
    Midpoint,
    RightPoint,
}

fn impute_with(data: &[Observation], f: impl Fn(f64, f64) -> f64) -> Vec<PointDatum> {
    data.iter()
        .map(|o| match o.outcome {
            Outcome::Exact(t) => PointDatum::event(t),
            Outcome::Interval { left, right } => PointDatum::event(f(left, right)),
            Outcome::RightCensored(c) => PointDatum::censored(c),
        })
        .collect()
}

/// Replace each interval `(l, r]` by an event at `(l + r) / 2`.
pub fn impute_midpoint(data: &[Observation]) -> Vec<PointDatum> {
    impute_with(data, |l, r| 0.5 * (l + r))
}

/// Replace each interval `(l, r]` by an event at `r`.
pub fn impute_rightpoint(data: &[Observation]) -> Vec<PointDatum> {
    impute_with(data, |_, r| r)
}

pub fn impute(data: &[Observation], how: Imputation) -> Vec<PointDatum> {
    match how {
        Imputation::Midpoint => impute_midpoint(data),
        Imputation::RightPoint => impute_rightpoint(data),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiskRow {
    pub time: f64,
    pub events: usize,
    pub at_risk: usize,
}

/// Event counts and risk-set sizes at the distinct event times.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RiskTable {
    rows: Vec<RiskRow>,
}

impl RiskTable {
    pub fn new(rows: Vec<RiskRow>) -> Result<RiskTable> {
        for (i, r) in rows.iter().enumerate() {
            if r.events == 0 || r.at_risk < r.events {
                return Err(WmstError::InvalidParameter(format!(
                    "risk row {i} needs 1 <= d <= r, got d = {}, r = {}",
                    r.events, r.at_risk
                )));
            }
            if i > 0 {
                let p = &rows[i - 1];
                if r.time <= p.time || r.at_risk > p.at_risk {
                    return Err(WmstError::InvalidParameter(format!(
                        "risk row {i} breaks time/at-risk ordering"
                    )));
                }
            }
        }
        Ok(RiskTable { rows })
    }

    pub fn rows(&self) -> &[RiskRow] {
        &self.rows
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn event_times(&self) -> impl Iterator<Item = f64> + '_ {
        self.rows.iter().map(|r| r.time)
    }

    /// Greenwood sum over rows with `time <= t`.
    ///
    /// Errors if a row with `r = d` falls in range; callers only reach that
    /// when S(t) > 0, which means the table and curve disagree.
    pub(crate) fn greenwood_sum(&self, t: f64) -> Result<f64> {
        let mut acc = 0.0;
        for r in self.rows.iter().take_while(|r| r.time <= t) {
            if r.at_risk == r.events {
                return Err(WmstError::GreenwoodUndefined {
                    time: r.time,
                    at_risk: r.at_risk,
                });
            }
            let (d, n) = (r.events as f64, r.at_risk as f64);
            acc += d / (n * (n - d));
        }
        Ok(acc)
    }
}

/// A fitted product-limit curve with the counts behind it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KaplanMeier {
    pub curve: SurvivalCurve,
    pub table: RiskTable,
}

/// Product-limit estimator. At tied times events are processed before
/// censorings, so subjects censored at `t` are still at risk for events at `t`.
pub fn km_fit(data: &[PointDatum]) -> Result<KaplanMeier> {
    if data.is_empty() {
        return Err(WmstError::EmptyInput("Kaplan-Meier needs at least one subject".into()));
    }
    for d in data {
        if !d.time.is_finite() || d.time < 0.0 {
            return Err(WmstError::InvalidObservation(format!("bad time {}", d.time)));
        }
    }
    let mut sorted: Vec<PointDatum> = data.to_vec();
    sorted.sort_by(|a, b| a.time.total_cmp(&b.time));

    let mut rows = Vec::new();
    let mut drops = Vec::new();
    let mut at_risk = sorted.len();
    let mut surv = 1.0;
    let mut i = 0;
    while i < sorted.len() {
        let t = sorted[i].time;
        let mut events = 0;
        let mut total = 0;
        while i < sorted.len() && sorted[i].time == t {
            events += usize::from(sorted[i].event);
            total += 1;
            i += 1;
        }
        if events > 0 {
            surv *= 1.0 - events as f64 / at_risk as f64;
            rows.push(RiskRow { time: t, events, at_risk });
            drops.push((t, surv));
        }
        at_risk -= total;
    }
    Ok(KaplanMeier {
        curve: SurvivalCurve::step(&drops)?,
        table: RiskTable { rows },
    })
}

/// Greenwood estimate of Var[Ŝ(t)] = Ŝ(t)² Σ_{t_k ≤ t} d_k / (r_k (r_k − d_k)).
///
/// Returns 0 once the curve has reached 0.
pub fn greenwood_var(curve: &SurvivalCurve, table: &RiskTable, t: f64) -> Result<f64> {
    greenwood_cov(curve, table, t, t)
}

/// Greenwood estimate of Cov[Ŝ(t_i), Ŝ(t_j)].
pub fn greenwood_cov(curve: &SurvivalCurve, table: &RiskTable, ti: f64, tj: f64) -> Result<f64> {
    let si = curve.eval(ti);
    let sj = curve.eval(tj);
    if si == 0.0 || sj == 0.0 {
        return Ok(0.0);
    }
    Ok(si * sj * table.greenwood_sum(ti.min(tj))?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::observation::Arm;

    fn obs(o: Outcome) -> Observation {
        Observation::new(o, Arm::Control).unwrap()
    }

    #[test]
    fn imputations() {
        let data = [
            obs(Outcome::Interval { left: 2.0, right: 4.0 }),
            obs(Outcome::Exact(5.0)),
            obs(Outcome::RightCensored(7.0)),
        ];
        let mid = impute_midpoint(&data);
        let right = impute_rightpoint(&data);
        assert_eq!(mid, vec![PointDatum::event(3.0), PointDatum::event(5.0), PointDatum::censored(7.0)]);
        assert_eq!(right, vec![PointDatum::event(4.0), PointDatum::event(5.0), PointDatum::censored(7.0)]);
    }

    #[test]
    fn km_uncensored() {
        let km = km_fit(&[1.0, 2.0, 3.0].map(PointDatum::event)).unwrap();
        assert!((km.curve.eval(1.0) - 2.0 / 3.0).abs() < 1e-15);
        assert!((km.curve.eval(2.0) - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(km.curve.eval(3.0), 0.0);
        assert_eq!(km.table.rows().len(), 3);
    }

    #[test]
    fn km_with_censoring() {
        let data = [PointDatum::event(1.0), PointDatum::censored(2.0), PointDatum::event(3.0)];
        let km = km_fit(&data).unwrap();
        assert!((km.curve.eval(1.0) - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(km.curve.eval(3.0), 0.0);
        assert_eq!(km.table.rows()[1], RiskRow { time: 3.0, events: 1, at_risk: 1 });
    }

    #[test]
    fn km_all_censored() {
        let km = km_fit(&[PointDatum::censored(1.0), PointDatum::censored(4.0)]).unwrap();
        assert!(km.table.is_empty());
        assert_eq!(km.curve.eval(10.0), 1.0);
    }

    #[test]
    fn km_tie_keeps_censored_at_risk() {
        // event and censoring both at 2: the censored subject counts in r
        let data = [PointDatum::event(2.0), PointDatum::censored(2.0), PointDatum::event(5.0)];
        let km = km_fit(&data).unwrap();
        assert_eq!(km.table.rows()[0].at_risk, 3);
        assert!((km.curve.eval(2.0) - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn km_rejects_empty() {
        assert!(matches!(km_fit(&[]), Err(WmstError::EmptyInput(_))));
    }

    #[test]
    fn greenwood_single_event() {
        let km = km_fit(&[PointDatum::event(1.0), PointDatum::censored(3.0)]).unwrap();
        let v = greenwood_var(&km.curve, &km.table, 1.5).unwrap();
        assert!((v - 0.125).abs() < 1e-15);
        assert_eq!(greenwood_var(&km.curve, &km.table, 0.5).unwrap(), 0.0);
    }

    #[test]
    fn greenwood_cov_two_events() {
        let km = km_fit(&[1.0, 2.0, 3.0].map(PointDatum::event)).unwrap();
        let c = greenwood_cov(&km.curve, &km.table, 1.5, 2.5).unwrap();
        assert!((c - 2.0 / 54.0).abs() < 1e-15);
        let diag = greenwood_cov(&km.curve, &km.table, 2.5, 2.5).unwrap();
        assert_eq!(diag, greenwood_var(&km.curve, &km.table, 2.5).unwrap());
        assert_eq!(greenwood_cov(&km.curve, &km.table, 0.5, 2.5).unwrap(), 0.0);
    }

    #[test]
    fn greenwood_zero_after_curve_hits_zero() {
        let km = km_fit(&[1.0, 2.0].map(PointDatum::event)).unwrap();
        assert_eq!(greenwood_var(&km.curve, &km.table, 2.5).unwrap(), 0.0);
    }

    #[test]
    fn greenwood_rejects_inconsistent_table() {
        let curve = SurvivalCurve::step(&[(1.0, 0.5)]).unwrap();
        let table = RiskTable::new(vec![RiskRow { time: 1.0, events: 2, at_risk: 2 }]).unwrap();
        assert!(matches!(
            greenwood_var(&curve, &table, 1.5),
            Err(WmstError::GreenwoodUndefined { .. })
        ));
    }
}

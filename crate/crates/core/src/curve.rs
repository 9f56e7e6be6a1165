//! Monotone survival curves made of step and linear pieces, with exact
//! evaluation and integration.

use serde::{Deserialize, Serialize};

use crate::error::{Result, WmstError};

const VALUE_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Shape {
    /// Constant `start_value` on `[start, end)`.
    Step,
    /// Straight line from `(start, start_value)` to `(end, end_value)`.
    Linear,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub start: f64,
    pub end: f64,
    pub start_value: f64,
    pub end_value: f64,
    pub shape: Shape,
}

impl Segment {
    fn value_at(&self, t: f64) -> f64 {
        match self.shape {
            Shape::Step => self.start_value,
            Shape::Linear => {
                let w = (t - self.start) / (self.end - self.start);
                self.start_value + w * (self.end_value - self.start_value)
            }
        }
    }

    /// Integral over `[a, b] ∩ [start, end]`.
    fn area(&self, a: f64, b: f64) -> f64 {
        let lo = a.max(self.start);
        let hi = b.min(self.end);
        if hi <= lo {
            return 0.0;
        }
        match self.shape {
            Shape::Step => self.start_value * (hi - lo),
            Shape::Linear => 0.5 * (self.value_at(lo) + self.value_at(hi)) * (hi - lo),
        }
    }
}

/// A right-continuous, non-increasing survival curve on `[0, ∞)`.
///
/// The segments tile `[0, domain_end]`; past `domain_end` the curve carries
/// `tail` forward. A drop at a knot shows up as the next segment starting
/// lower than the previous one ended.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurvivalCurve {
    segments: Vec<Segment>,
    tail: f64,
}

impl SurvivalCurve {
    /// Build from explicit segments and the value carried past the last one.
    pub fn new(segments: Vec<Segment>, tail: f64) -> Result<SurvivalCurve> {
        let bad = |msg: String| Err(WmstError::InvalidCurve(msg));
        let in_unit = |v: f64| (-VALUE_SLACK..=1.0 + VALUE_SLACK).contains(&v);
        if !in_unit(tail) {
            return bad(format!("tail value {tail} outside [0, 1]"));
        }
        let mut prev_end_time = 0.0;
        let mut prev_value = 1.0;
        for (i, s) in segments.iter().enumerate() {
            if !(s.start.is_finite() && s.end.is_finite()) || s.end <= s.start {
                return bad(format!("segment {i} has non-increasing times [{}, {}]", s.start, s.end));
            }
            if s.start != prev_end_time {
                return bad(format!(
                    "segment {i} starts at {} but previous ends at {prev_end_time}",
                    s.start
                ));
            }
            if !in_unit(s.start_value) || !in_unit(s.end_value) {
                return bad(format!("segment {i} values outside [0, 1]"));
            }
            if s.start_value > prev_value + VALUE_SLACK || s.end_value > s.start_value + VALUE_SLACK {
                return bad(format!("segment {i} increases"));
            }
            if s.shape == Shape::Step && s.end_value != s.start_value {
                return bad(format!("step segment {i} has differing end values"));
            }
            prev_end_time = s.end;
            prev_value = s.end_value;
        }
        if tail > prev_value + VALUE_SLACK {
            return bad("tail value exceeds the last segment".into());
        }
        Ok(SurvivalCurve { segments, tail })
    }

    /// Curve equal to 1 everywhere.
    pub fn constant_one() -> SurvivalCurve {
        SurvivalCurve { segments: Vec::new(), tail: 1.0 }
    }

    /// Right-continuous step function from `(time, value after the drop)` pairs.
    ///
    /// Times must be strictly increasing and positive; values non-increasing.
    pub fn step(drops: &[(f64, f64)]) -> Result<SurvivalCurve> {
        let mut segments = Vec::with_capacity(drops.len());
        let mut t_prev = 0.0;
        let mut v_prev = 1.0;
        for &(t, v) in drops {
            if t > t_prev {
                segments.push(Segment {
                    start: t_prev,
                    end: t,
                    start_value: v_prev,
                    end_value: v_prev,
                    shape: Shape::Step,
                });
            } else if !(t == 0.0 && segments.is_empty()) {
                return Err(WmstError::InvalidCurve(format!("step times not increasing at {t}")));
            }
            t_prev = t;
            v_prev = v;
        }
        SurvivalCurve::new(segments, v_prev)
    }

    /// Piecewise-linear curve through `points`, starting implicitly at `(0, 1)`.
    pub fn linear(points: &[(f64, f64)]) -> Result<SurvivalCurve> {
        let mut segments = Vec::with_capacity(points.len());
        let mut t_prev = 0.0;
        let mut v_prev = 1.0;
        for &(t, v) in points {
            if t <= t_prev {
                return Err(WmstError::InvalidCurve(format!("linear knots not increasing at {t}")));
            }
            segments.push(Segment {
                start: t_prev,
                end: t,
                start_value: v_prev,
                end_value: v,
                shape: Shape::Linear,
            });
            t_prev = t;
            v_prev = v;
        }
        SurvivalCurve::new(segments, v_prev)
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    /// Time of the last knot.
    pub fn domain_end(&self) -> f64 {
        self.segments.last().map_or(0.0, |s| s.end)
    }

    pub fn tail_value(&self) -> f64 {
        self.tail
    }

    /// Index of the segment containing `t` in `[start, end)`, if any.
    fn locate(&self, t: f64) -> Option<usize> {
        if t >= self.domain_end() {
            return None;
        }
        let idx = self.segments.partition_point(|s| s.end <= t);
        Some(idx)
    }

    /// S(t), using constant extrapolation past the last knot.
    pub fn eval(&self, t: f64) -> f64 {
        match self.locate(t.max(0.0)) {
            Some(i) => self.segments[i].value_at(t.max(0.0)),
            None => self.tail,
        }
    }

    /// Left limit S(t−); equals 1 at t = 0.
    pub fn eval_left(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 1.0;
        }
        let idx = self.segments.partition_point(|s| s.end < t);
        // segments tile [0, domain_end], so the first segment ending at or
        // after t also starts strictly before it
        match self.segments.get(idx) {
            Some(s) => s.value_at(t),
            None => self.tail,
        }
    }

    /// Exact area under the curve over `[a, b]`.
    pub fn integrate(&self, a: f64, b: f64) -> Result<f64> {
        if a > b || a.is_nan() || b.is_nan() {
            return Err(WmstError::BadBounds { a, b });
        }
        if a == b {
            return Ok(0.0);
        }
        let first = self.segments.partition_point(|s| s.end <= a);
        let mut area = 0.0;
        for s in &self.segments[first..] {
            if s.start >= b {
                break;
            }
            area += s.area(a, b);
        }
        let end = self.domain_end();
        if b > end {
            area += self.tail * (b - a.max(end));
        }
        Ok(area)
    }
}

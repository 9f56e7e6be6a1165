use statrs::function::erf::erfc;

/// 97.5% standard normal quantile used for all 95% intervals.
pub const Z_975: f64 = 1.959964;

pub const ALPHA: f64 = 0.05;

/// Two-sided p-value of a standard normal statistic.
pub fn two_sided_p(z: f64) -> f64 {
    if z.is_nan() {
        return f64::NAN;
    }
    erfc(z.abs() / std::f64::consts::SQRT_2).clamp(0.0, 1.0)
}

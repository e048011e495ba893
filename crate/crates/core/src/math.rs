//! Scalar helpers shared by the density code.
//!
//! Transcendental functions go through `libm` in every build so that results
//! are bit-identical between `std` and `no_std` configurations.

pub const LN_2PI: f64 = 1.837_877_066_409_345_5;

#[inline]
pub fn exp(x: f64) -> f64 {
    libm::exp(x)
}

#[inline]
pub fn ln(x: f64) -> f64 {
    libm::log(x)
}

#[inline]
pub fn cos(x: f64) -> f64 {
    libm::cos(x)
}

#[inline]
pub fn sin(x: f64) -> f64 {
    libm::sin(x)
}

#[inline]
pub fn sqrt(x: f64) -> f64 {
    libm::sqrt(x)
}

/// `ln(sum(exp(v)))`, returning `-inf` for an empty or all `-inf` input.
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if max == f64::INFINITY {
        return f64::INFINITY;
    }
    let sum: f64 = values.iter().map(|v| exp(v - max)).sum();
    max + ln(sum)
}

/// Natural log that maps exact zero to `-inf` (and never produces NaN for
/// nonnegative input).
#[inline]
pub fn ln_or_neg_inf(x: f64) -> f64 {
    if x > 0.0 {
        ln(x)
    } else {
        f64::NEG_INFINITY
    }
}

/// `weight * ln_value` with the convention `0 * -inf = 0`.
#[inline]
pub(crate) fn weighted_log(weight: f64, ln_value: f64) -> f64 {
    if weight == 0.0 {
        0.0
    } else {
        weight * ln_value
    }
}

/// Exponentiates log-masses after subtracting the maximum, then normalizes.
/// Returns `None` if every entry is `-inf`.
pub(crate) fn normalize_log_masses(log_mass: &[f64]) -> Option<alloc::vec::Vec<f64>> {
    let max = log_mass.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return None;
    }
    let mut out: alloc::vec::Vec<f64> = log_mass.iter().map(|l| exp(l - max)).collect();
    let total: f64 = out.iter().sum();
    if !(total > 0.0) || !total.is_finite() {
        return None;
    }
    out.iter_mut().for_each(|m| *m /= total);
    Some(out)
}

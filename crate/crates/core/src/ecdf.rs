//! Piecewise-linear empirical CDF and its inverse.
//!
//! Given a strictly increasing sample `z_1 < ... < z_n`, the CDF is the
//! continuous interpolant through the knots `(z_i, (i-1)/(n-1))`, clamped to
//! 0 below `z_1` and to 1 above `z_n`. The inverse maps `alpha` back onto the
//! same polyline, so for any `z` in `[z_1, z_n]`
//! `inverse(eval(z)) == z` up to rounding.
//!
//! Both functions are continuous in the sample values, which is what makes
//! quantile constraints usable with gradient-based solvers: when the sample
//! is produced by `z(theta, delta_i)` with a fixed sort order around `theta`,
//! the quantile is a convex combination of two order statistics and inherits
//! their smoothness.
//!
//! Ties must be broken before evaluation. [`break_ties`] does that with an
//! explicit epsilon; [`quantile`] and [`cdf`] sort and break ties
//! automatically using [`DEFAULT_TIE_EPSILON`] scaled by the sample range.

use crate::error::{Error, Result};

/// Relative tie-breaking step used by [`quantile`] and [`cdf`].
pub const DEFAULT_TIE_EPSILON: f64 = 1e-9;

/// A non-empty, strictly increasing, finite sample.
#[derive(Debug, Clone, PartialEq)]
pub struct SortedSample {
    values: Vec<f64>,
}

impl SortedSample {
    /// Wraps values that are already strictly increasing.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidInput("empty sample".into()));
        }
        if let Some((component, &value)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFinite { component, value });
        }
        if values.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidInput(
                "sample is not strictly increasing; break ties first".into(),
            ));
        }
        Ok(Self { values })
    }

    /// Sorts arbitrary finite values and breaks ties with the default
    /// range-scaled epsilon.
    pub fn from_unsorted(mut values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidInput("empty sample".into()));
        }
        sort_and_break_ties(&mut values)?;
        Ok(Self { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn first(&self) -> f64 {
        self.values[0]
    }

    pub fn last(&self) -> f64 {
        self.values[self.values.len() - 1]
    }

    /// Piecewise-linear CDF at `z`.
    pub fn eval(&self, z: f64) -> f64 {
        eval_sorted(&self.values, z)
    }

    /// Inverse CDF at `alpha`.
    pub fn inverse(&self, alpha: f64) -> Result<f64> {
        check_alpha(alpha)?;
        Ok(inverse_sorted(&self.values, alpha))
    }
}

/// Evaluates the piecewise-linear ECDF of `sample` at `z`.
pub fn ecdf_eval(sample: &SortedSample, z: f64) -> f64 {
    sample.eval(z)
}

/// Evaluates the inverse ECDF of `sample` at probability `alpha`.
pub fn ecdf_inverse(sample: &SortedSample, alpha: f64) -> Result<f64> {
    sample.inverse(alpha)
}

/// Sorts `values` (stable) and pushes every value up to at least
/// `epsilon` above its predecessor, so the result is strictly increasing.
pub fn break_ties(values: &[f64], epsilon: f64) -> Result<SortedSample> {
    if values.is_empty() {
        return Err(Error::InvalidInput("empty sample".into()));
    }
    if !(epsilon > 0.0) {
        return Err(Error::InvalidInput(format!("tie epsilon must be positive, got {epsilon}")));
    }
    let mut out = values.to_vec();
    check_finite(&out)?;
    out.sort_by(f64::total_cmp);
    separate(&mut out, epsilon);
    Ok(SortedSample { values: out })
}

/// Sorts `values` in place and breaks ties with the range-scaled default
/// epsilon. This is the allocation-free path used inside constraint
/// evaluations.
pub fn sort_and_break_ties(values: &mut [f64]) -> Result<()> {
    check_finite(values)?;
    values.sort_by(f64::total_cmp);
    let eps = DEFAULT_TIE_EPSILON * tie_scale(values);
    separate(values, eps);
    Ok(())
}

/// Inverse ECDF of an arbitrary finite sample. `values` is reordered.
pub fn quantile(values: &mut [f64], alpha: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::InvalidInput("empty sample".into()));
    }
    check_alpha(alpha)?;
    sort_and_break_ties(values)?;
    Ok(inverse_sorted(values, alpha))
}

/// ECDF of an arbitrary finite sample at `z`. `values` is reordered.
pub fn cdf(values: &mut [f64], z: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::InvalidInput("empty sample".into()));
    }
    sort_and_break_ties(values)?;
    Ok(eval_sorted(values, z))
}

/// Single-pass ECDF at `z` without sorting. Agrees with [`cdf`] whenever
/// no tie sits within the tie-breaking epsilon of `z`; used for large
/// samples evaluated at one point.
pub fn cdf_unsorted(values: &mut [f64], z: f64) -> f64 {
    let n = values.len();
    if n == 0 {
        return f64::NAN;
    }
    let mut below = 0usize;
    let mut lo = f64::NEG_INFINITY;
    let mut hi = f64::INFINITY;
    for &v in values.iter() {
        if v < z {
            below += 1;
            lo = lo.max(v);
        } else {
            hi = hi.min(v);
        }
    }
    if n == 1 {
        return if values[0] <= z { 1.0 } else { 0.0 };
    }
    if below == 0 {
        0.0
    } else if below == n {
        1.0
    } else {
        ((below - 1) as f64 + (z - lo) / (hi - lo)) / (n - 1) as f64
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::InvalidInput(format!("probability {alpha} outside [0, 1]")));
    }
    Ok(())
}

fn check_finite(values: &[f64]) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(component) => Err(Error::NonFinite {
            component,
            value: values[component],
        }),
        None => Ok(()),
    }
}

fn tie_scale(sorted: &[f64]) -> f64 {
    let range = sorted[sorted.len() - 1] - sorted[0];
    if range > 0.0 {
        range
    } else {
        sorted[0].abs().max(1.0)
    }
}

fn separate(sorted: &mut [f64], eps: f64) {
    for i in 1..sorted.len() {
        let floor = sorted[i - 1] + eps;
        if sorted[i] < floor {
            sorted[i] = floor;
        }
    }
}

fn eval_sorted(z_sorted: &[f64], z: f64) -> f64 {
    let n = z_sorted.len();
    if n == 1 {
        // point mass
        return if z < z_sorted[0] { 0.0 } else { 1.0 };
    }
    if z <= z_sorted[0] {
        return 0.0;
    }
    if z > z_sorted[n - 1] {
        return 1.0;
    }
    // count of knots strictly below z; z_lo < z <= z_hi
    let hi = z_sorted.partition_point(|&v| v < z);
    let lo = hi - 1;
    let frac = (z - z_sorted[lo]) / (z_sorted[hi] - z_sorted[lo]);
    (lo as f64 + frac) / (n - 1) as f64
}

fn inverse_sorted(z_sorted: &[f64], alpha: f64) -> f64 {
    let n = z_sorted.len();
    if n == 1 || alpha <= 0.0 {
        return z_sorted[0];
    }
    if alpha >= 1.0 {
        return z_sorted[n - 1];
    }
    let pos = (n - 1) as f64 * alpha;
    // largest knot index whose level does not exceed alpha
    let lo = (pos.floor() as usize).min(n - 2);
    let weight = pos - lo as f64;
    z_sorted[lo] + (z_sorted[lo + 1] - z_sorted[lo]) * weight
}

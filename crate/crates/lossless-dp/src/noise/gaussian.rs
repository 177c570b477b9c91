//! Gaussian base noise and the interpolation rules that let one noisy value
//! be refined or coarsened into another without spending fresh budget.
//!
//! A release at privacy level `rho` with l2-sensitivity `delta` carries
//! additive noise of variance `delta^2 / (2 rho)`. Given two existing
//! releases at neighboring levels `rho_lo < rho < rho_hi`, a new release at
//! `rho` is a convex combination of the neighbors plus a small independent
//! top-up; [`bridge_variance`] and [`combine_weights`] give the two
//! ingredients. `rho_lo = 0` means "no noisier release exists yet" and
//! `rho_hi = +inf` means "the exact value is available".

use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::error::{Error, Result};

/// Parameters of a one-dimensional Gaussian.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianSpec {
    pub mean: f64,
    pub variance: f64,
}

impl GaussianSpec {
    pub fn new(mean: f64, variance: f64) -> Result<Self> {
        if !mean.is_finite() {
            return Err(Error::invalid(format!("gaussian mean {mean} not finite")));
        }
        if !variance.is_finite() || variance < 0.0 {
            return Err(Error::invalid(format!(
                "gaussian variance {variance} must be finite and nonnegative"
            )));
        }
        Ok(Self { mean, variance })
    }

    pub fn std_dev(&self) -> f64 {
        self.variance.sqrt()
    }
}

/// Noise standard deviation of a Gaussian release: `delta / sqrt(2 rho)`.
pub fn release_std(rho: f64, delta: f64) -> f64 {
    delta / (2.0 * rho).sqrt()
}

/// Draw one Gaussian variate. Zero variance returns the mean exactly.
pub fn sample_gaussian<R: Rng + ?Sized>(mean: f64, variance: f64, rng: &mut R) -> Result<f64> {
    let spec = GaussianSpec::new(mean, variance)?;
    if spec.variance == 0.0 {
        return Ok(spec.mean);
    }
    let normal = Normal::new(spec.mean, spec.std_dev())
        .map_err(|e| Error::invalid(format!("gaussian sampler: {e}")))?;
    Ok(normal.sample(rng))
}

/// Standard normal draw, for hot loops that scale by hand.
#[inline]
pub fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

fn check_bracket(rho_lo: f64, rho: f64, rho_hi: f64) -> Result<()> {
    if rho_lo.is_nan() || rho.is_nan() || rho_hi.is_nan() {
        return Err(Error::invalid("rho values must not be NaN"));
    }
    if rho_lo < 0.0 || !rho_lo.is_finite() {
        return Err(Error::invalid(format!(
            "rho_lo = {rho_lo} must be finite and >= 0"
        )));
    }
    if !(rho > 0.0) || !rho.is_finite() {
        return Err(Error::invalid(format!("rho = {rho} must be finite and > 0")));
    }
    if !(rho_hi > 0.0) {
        return Err(Error::invalid(format!("rho_hi = {rho_hi} must be > 0")));
    }
    if !(rho_lo <= rho && rho <= rho_hi) {
        return Err(Error::invalid(format!(
            "need rho_lo <= rho <= rho_hi, got {rho_lo}, {rho}, {rho_hi}"
        )));
    }
    if rho_lo >= rho_hi {
        return Err(Error::invalid(format!(
            "neighbors must be distinct: rho_lo = {rho_lo}, rho_hi = {rho_hi}"
        )));
    }
    Ok(())
}

/// Variance of the independent top-up noise when interpolating a release at
/// `rho` between neighbors at `rho_lo` and `rho_hi`.
///
/// For finite neighbors this is
/// `delta^2 (1 - rho_lo/rho)(1/rho - 1/rho_hi) / (2 (1 - rho_lo/rho_hi))`;
/// the limits `rho_lo = 0` and `rho_hi = +inf` are taken exactly. A result
/// within `-1e-12` of zero is rounded up to zero (floating-point dust);
/// anything more negative is rejected.
pub fn bridge_variance(rho_lo: f64, rho: f64, rho_hi: f64, delta: f64) -> Result<f64> {
    check_bracket(rho_lo, rho, rho_hi)?;
    if !(delta > 0.0) || !delta.is_finite() {
        return Err(Error::invalid(format!(
            "sensitivity delta = {delta} must be finite and > 0"
        )));
    }
    let shrink = 1.0 - rho_lo / rho; // 1 at rho_lo = 0
    let gap = if rho_hi.is_infinite() {
        1.0 / rho
    } else {
        1.0 / rho - 1.0 / rho_hi
    };
    let denom = if rho_hi.is_infinite() {
        1.0
    } else {
        1.0 - rho_lo / rho_hi
    };
    let var = delta * delta * shrink * gap / (2.0 * denom);
    if var < 0.0 {
        if var > -1e-12 {
            return Ok(0.0);
        }
        return Err(Error::invalid(format!(
            "bridge variance {var} is negative beyond rounding tolerance"
        )));
    }
    Ok(var)
}

/// Convex weights `(w_lo, w_hi)` applied to the noisier / sharper neighbor
/// when interpolating at `rho`. They always sum to 1; `rho_lo = 0` gives
/// `(0, 1)` and `rho = rho_lo` gives `(1, 0)`.
pub fn combine_weights(rho_lo: f64, rho: f64, rho_hi: f64) -> Result<(f64, f64)> {
    check_bracket(rho_lo, rho, rho_hi)?;
    if rho_lo == 0.0 {
        return Ok((0.0, 1.0));
    }
    let (w_lo, w_hi) = if rho_hi.is_infinite() {
        (rho_lo / rho, 1.0 - rho_lo / rho)
    } else {
        let denom = 1.0 - rho_lo / rho_hi;
        ((rho_lo / rho - rho_lo / rho_hi) / denom, (1.0 - rho_lo / rho) / denom)
    };
    Ok((w_lo, w_hi))
}

/// Covariance between two Gaussian releases of the same query drawn from one
/// ledger: `delta^2 / (2 max(rho_a, rho_b))`, regardless of release order.
pub fn release_covariance(rho_a: f64, rho_b: f64, delta: f64) -> f64 {
    delta * delta / (2.0 * rho_a.max(rho_b))
}

/// Standard normal CDF, accurate in both tails.
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * statrs::function::erf::erfc(-z / std::f64::consts::SQRT_2)
}

/// Standard normal survival function `1 - cdf(z)` without cancellation.
pub fn normal_sf(z: f64) -> f64 {
    0.5 * statrs::function::erf::erfc(z / std::f64::consts::SQRT_2)
}

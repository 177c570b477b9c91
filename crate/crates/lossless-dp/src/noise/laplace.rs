//! Laplace noise, bridge draws between scales, and the conditional increment
//! used when a release lands between two existing scales.
//!
//! The increment `W1 = Y_new - Y_sharper` given the observed gap
//! `k = Y_noisier - Y_sharper` is a three-part mixture: an atom at zero
//! (the new release reuses the sharper sample), an atom at `k` (it reuses the
//! noisier sample), and a smooth part whose density is proportional to
//! `f_b(x) * f_bhi(k - x)`. The smooth part is piecewise exponential on three
//! intervals, so it admits exact inverse-CDF sampling with no rejection.

use rand::Rng;

use crate::error::{Error, Result};

/// Density of the zero-mean Laplace distribution with scale `b`.
pub fn laplace_density(x: f64, b: f64) -> f64 {
    (-x.abs() / b).exp() / (2.0 * b)
}

/// CDF of the zero-mean Laplace distribution with scale `b`.
pub fn laplace_cdf(x: f64, b: f64) -> f64 {
    if x < 0.0 {
        0.5 * (x / b).exp()
    } else {
        1.0 - 0.5 * (-x / b).exp()
    }
}

/// Density at `t` of the sum of independent zero-mean Laplace variables with
/// distinct scales `b1` and `b2`.
pub fn laplace_conv_density(t: f64, b1: f64, b2: f64) -> f64 {
    debug_assert!(b1 != b2, "convolution formula needs distinct scales");
    let num = b1 * (-t.abs() / b1).exp() - b2 * (-t.abs() / b2).exp();
    num / (2.0 * (b1 * b1 - b2 * b2))
}

fn check_scale(b: f64, what: &str) -> Result<()> {
    if !(b > 0.0) || !b.is_finite() {
        return Err(Error::invalid(format!(
            "{what} scale {b} must be finite and > 0"
        )));
    }
    Ok(())
}

/// Draw from the zero-mean Laplace distribution with scale `b`.
pub fn sample_laplace<R: Rng + ?Sized>(b: f64, rng: &mut R) -> f64 {
    // Inverse CDF on u ~ U(-1/2, 1/2); the loop discards the u = -1/2 atom.
    loop {
        let u: f64 = rng.random::<f64>() - 0.5;
        let mag = -(1.0 - 2.0 * u.abs()).ln();
        if mag.is_finite() {
            return b * mag * u.signum();
        }
    }
}

/// Refinement step from a sharper scale to a noisier one: returns `0` with
/// probability `(b_from / b_to)^2` and a fresh `Laplace(b_to)` draw otherwise.
///
/// Adding this to a Laplace sample of scale `b_from` yields one of scale
/// `b_to`, coupled so the pair has the joint law the release ledger relies on.
pub fn sample_laplace_bridge<R: Rng + ?Sized>(b_from: f64, b_to: f64, rng: &mut R) -> Result<f64> {
    check_scale(b_to, "bridge target")?;
    if !(b_from >= 0.0) || b_from > b_to {
        return Err(Error::invalid(format!(
            "bridge scales must satisfy 0 <= b_from <= b_to, got {b_from} -> {b_to}"
        )));
    }
    let stay = (b_from / b_to).powi(2);
    if rng.random::<f64>() < stay {
        Ok(0.0)
    } else {
        Ok(sample_laplace(b_to, rng))
    }
}

/// Branch probabilities of the conditional increment distribution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LaplaceMixtureWeights {
    /// Probability that the increment is exactly zero.
    pub p_zero: f64,
    /// Probability that the increment equals the observed gap `k`.
    pub p_jump: f64,
    /// Probability of the smooth component.
    pub p_smooth: f64,
}

/// Conditional branch weights for inserting scale `b` between an existing
/// sharper release at `b_lo` and a noisier one at `b_hi`, given the observed
/// gap `k` between the two.
pub fn laplace_conditional_weights(
    b_lo: f64,
    b: f64,
    b_hi: f64,
    k: f64,
) -> Result<LaplaceMixtureWeights> {
    check_scale(b_lo, "sharper neighbor")?;
    check_scale(b, "requested")?;
    check_scale(b_hi, "noisier neighbor")?;
    if !(b_lo < b && b < b_hi) {
        return Err(Error::invalid(format!(
            "conditional weights need b_lo < b < b_hi, got {b_lo}, {b}, {b_hi}"
        )));
    }
    if !k.is_finite() {
        return Err(Error::invalid(format!("observed gap {k} not finite")));
    }
    if k == 0.0 {
        // Both existing samples coincide, so the interpolant equals them too.
        return Ok(LaplaceMixtureWeights {
            p_zero: 1.0,
            p_jump: 0.0,
            p_smooth: 0.0,
        });
    }
    let mu1 = (b / b_hi).powi(2);
    let mu2 = (b_lo / b).powi(2);
    // All three raw weights are expressed relative to f_bhi(k) so huge gaps
    // cannot underflow: e = f-ratio exponential, shrinking as |k| grows.
    let e = (-k.abs() * (1.0 / b - 1.0 / b_hi)).exp();
    let jump_ratio = (b_hi / b) * e;
    let smooth_ratio = b_hi * (b_hi - b * e) / (b_hi * b_hi - b * b);
    let raw_zero = mu2 * (1.0 - mu1);
    let raw_jump = mu1 * (1.0 - mu2) * jump_ratio;
    let raw_smooth = (1.0 - mu1) * (1.0 - mu2) * smooth_ratio;
    let total = raw_zero + raw_jump + raw_smooth;
    debug_assert!(
        (total - (1.0 - mu1 * mu2)).abs() < 1e-9 * (1.0 - mu1 * mu2),
        "mixture normalizer identity violated: {total} vs {}",
        1.0 - mu1 * mu2
    );
    Ok(LaplaceMixtureWeights {
        p_zero: raw_zero / total,
        p_jump: raw_jump / total,
        p_smooth: raw_smooth / total,
    })
}

/// Sample the increment `W1` for a release at scale `b` between neighbors at
/// `b_lo` (sharper) and `b_hi` (noisier), given gap `k`. The new sample is
/// `Y_sharper + W1`.
pub fn sample_laplace_conditional<R: Rng + ?Sized>(
    b_lo: f64,
    b: f64,
    b_hi: f64,
    k: f64,
    rng: &mut R,
) -> Result<f64> {
    let w = laplace_conditional_weights(b_lo, b, b_hi, k)?;
    let u: f64 = rng.random();
    if u < w.p_zero {
        Ok(0.0)
    } else if u < w.p_zero + w.p_jump {
        Ok(k)
    } else {
        Ok(sample_smooth_component(b, b_hi, k, rng))
    }
}

/// Piecewise-exponential masses of the density `f_b(x) * f_bhi(k - x)` over
/// `x < 0`, `0 < x < k`, and `x > k`, for `k > 0`, up to the common factor
/// `1 / (4 b b_hi)`.
fn interval_masses(b: f64, b_hi: f64, k: f64) -> (f64, f64, f64) {
    let a = 1.0 / b + 1.0 / b_hi;
    let d = 1.0 / b - 1.0 / b_hi;
    let m1 = (-k / b_hi).exp() / a;
    let m2 = (-k / b_hi).exp() * (-(-k * d).exp_m1()) / d;
    let m3 = (-k / b).exp() / a;
    (m1, m2, m3)
}

fn sample_smooth_component<R: Rng + ?Sized>(b: f64, b_hi: f64, k: f64, rng: &mut R) -> f64 {
    let kk = k.abs();
    let (m1, m2, m3) = interval_masses(b, b_hi, kk);
    let a = 1.0 / b + 1.0 / b_hi;
    let d = 1.0 / b - 1.0 / b_hi;
    let total = m1 + m2 + m3;
    let pick = rng.random::<f64>() * total;
    let u: f64 = rng.random();
    let x = if pick < m1 {
        // Density proportional to e^{a x} on (-inf, 0).
        u.max(f64::MIN_POSITIVE).ln() / a
    } else if pick < m1 + m2 {
        // Density proportional to e^{-d x} on (0, k).
        -(u * (-kk * d).exp_m1()).ln_1p() / d
    } else {
        // Density proportional to e^{-a x} on (k, inf).
        kk - u.max(f64::MIN_POSITIVE).ln() / a
    };
    if k < 0.0 {
        -x
    } else {
        x
    }
}

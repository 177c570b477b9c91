//! One-sided exponential noise with coupled refinement across rates.
//!
//! A release with rate `r` (larger rate, less noise) refines to a noisier one
//! with rate `r' < r` by adding `0` with probability `r'/r` and an
//! independent `Exp(r')` draw otherwise. Inserting a rate between two
//! existing releases conditions that construction on the observed gap, which
//! gives a mixture of atoms at `0` and at the gap plus a truncated-exponential
//! interior.

use rand::Rng;
use rand_distr::{Distribution, Exp};

use crate::error::{Error, Result};

fn check_rate(rate: f64, what: &str) -> Result<()> {
    if !(rate > 0.0) || !rate.is_finite() {
        return Err(Error::invalid(format!(
            "{what} rate {rate} must be finite and > 0"
        )));
    }
    Ok(())
}

/// CDF of the exponential distribution with rate `rate`.
pub fn exponential_cdf(x: f64, rate: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        -(-rate * x).exp_m1()
    }
}

/// Draw from the exponential distribution with rate `rate`.
pub fn sample_exponential<R: Rng + ?Sized>(rate: f64, rng: &mut R) -> Result<f64> {
    check_rate(rate, "exponential")?;
    let dist =
        Exp::new(rate).map_err(|e| Error::invalid(format!("exponential rate {rate}: {e}")))?;
    Ok(dist.sample(rng))
}

/// Refinement step from rate `rate_from` down to `rate_to <= rate_from`:
/// returns `0` with probability `rate_to / rate_from` and a fresh
/// `Exp(rate_to)` draw otherwise. Adding it to an `Exp(rate_from)` release
/// yields an `Exp(rate_to)` one.
pub fn sample_exponential_bridge<R: Rng + ?Sized>(
    rate_from: f64,
    rate_to: f64,
    rng: &mut R,
) -> Result<f64> {
    check_rate(rate_from, "bridge source")?;
    check_rate(rate_to, "bridge target")?;
    if rate_to > rate_from {
        return Err(Error::invalid(format!(
            "bridge rates must satisfy rate_to <= rate_from, got {rate_from} -> {rate_to}"
        )));
    }
    if rng.random::<f64>() < rate_to / rate_from {
        Ok(0.0)
    } else {
        sample_exponential(rate_to, rng)
    }
}

/// Branch probabilities `(p_zero, p_jump, p_smooth)` of the conditional
/// increment for inserting rate `rate` between a sharper release at
/// `rate_hi` and a noisier one at `rate_lo`, given gap `k > 0`.
fn conditional_weights(rate_lo: f64, rate: f64, rate_hi: f64, k: f64) -> (f64, f64, f64) {
    let a1 = rate / rate_hi;
    let a2 = rate_lo / rate;
    let g = rate - rate_lo;
    // All weights relative to rate_lo * exp(-rate_lo * k), which keeps the
    // arithmetic finite for arbitrarily large gaps.
    let decay = (-g * k).exp();
    let raw_zero = a1 * (1.0 - a2);
    let raw_jump = (1.0 - a1) * a2 * (rate / rate_lo) * decay;
    let raw_smooth = (1.0 - a1) * (1.0 - a2) * rate * (-(-g * k).exp_m1()) / g;
    let total = raw_zero + raw_jump + raw_smooth;
    debug_assert!(
        (total - (1.0 - a1 * a2)).abs() < 1e-9 * (1.0 - a1 * a2),
        "mixture normalizer identity violated: {total} vs {}",
        1.0 - a1 * a2
    );
    (raw_zero / total, raw_jump / total, raw_smooth / total)
}

/// Increment `W1 = Y_new - Y_sharper` for a release at `rate` between
/// neighbors at `rate_hi` (sharper) and `rate_lo` (noisier), given the
/// observed nonnegative gap `k` between them.
pub fn sample_exponential_conditional<R: Rng + ?Sized>(
    rate_lo: f64,
    rate: f64,
    rate_hi: f64,
    k: f64,
    rng: &mut R,
) -> Result<f64> {
    check_rate(rate_lo, "noisier neighbor")?;
    check_rate(rate, "requested")?;
    check_rate(rate_hi, "sharper neighbor")?;
    if !(rate_lo < rate && rate < rate_hi) {
        return Err(Error::invalid(format!(
            "conditional needs rate_lo < rate < rate_hi, got {rate_lo}, {rate}, {rate_hi}"
        )));
    }
    if !(k >= 0.0) || !k.is_finite() {
        return Err(Error::invalid(format!(
            "gap {k} must be finite and >= 0 for one-sided noise"
        )));
    }
    if k == 0.0 {
        return Ok(0.0);
    }
    let (p_zero, p_jump, _) = conditional_weights(rate_lo, rate, rate_hi, k);
    let u: f64 = rng.random();
    if u < p_zero {
        Ok(0.0)
    } else if u < p_zero + p_jump {
        Ok(k)
    } else {
        // Interior density proportional to exp(-(rate - rate_lo) x) on (0, k).
        let g = rate - rate_lo;
        let v: f64 = rng.random();
        Ok(-(v * (-g * k).exp_m1()).ln_1p() / g)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::root;

    fn ks_against_exponential(xs: &mut [f64], rate: f64) -> f64 {
        xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let n = xs.len() as f64;
        let mut d: f64 = 0.0;
        for (i, &x) in xs.iter().enumerate() {
            let model = exponential_cdf(x, rate);
            d = d.max((model - (i as f64 + 1.0) / n).abs());
            d = d.max((model - i as f64 / n).abs());
        }
        d
    }

    #[test]
    fn bridge_recovers_target_marginal() {
        let mut rng = root(41);
        let (hi, lo) = (3.0, 0.8);
        let n = 100_000;
        let mut xs: Vec<f64> = (0..n)
            .map(|_| {
                let sharp = sample_exponential(hi, &mut rng).unwrap();
                sharp + sample_exponential_bridge(hi, lo, &mut rng).unwrap()
            })
            .collect();
        let d = ks_against_exponential(&mut xs, lo);
        assert!(d < 1.63 / (n as f64).sqrt(), "KS D = {d}");
    }

    #[test]
    fn conditional_insertion_recovers_marginal_and_ordering() {
        let mut rng = root(43);
        let (lo, mid, hi) = (0.5, 1.2, 4.0);
        let n = 100_000;
        let mut mids = Vec::with_capacity(n);
        for _ in 0..n {
            let y_sharp = sample_exponential(hi, &mut rng).unwrap();
            let y_noisy = y_sharp + sample_exponential_bridge(hi, lo, &mut rng).unwrap();
            let k = y_noisy - y_sharp;
            let w1 = sample_exponential_conditional(lo, mid, hi, k, &mut rng).unwrap();
            assert!(w1 >= 0.0 && w1 <= k, "increment {w1} outside [0, {k}]");
            mids.push(y_sharp + w1);
        }
        let d = ks_against_exponential(&mut mids, mid);
        assert!(d < 1.63 / (n as f64).sqrt(), "KS D = {d}");
    }

    #[test]
    fn zero_gap_pins_increment() {
        let mut rng = root(47);
        assert_eq!(
            sample_exponential_conditional(0.5, 1.0, 2.0, 0.0, &mut rng).unwrap(),
            0.0
        );
    }

    #[test]
    fn parameter_validation() {
        let mut rng = root(53);
        assert!(sample_exponential(0.0, &mut rng).is_err());
        assert!(sample_exponential_bridge(1.0, 2.0, &mut rng).is_err());
        assert!(sample_exponential_conditional(1.0, 0.5, 2.0, 1.0, &mut rng).is_err());
        assert!(sample_exponential_conditional(0.5, 1.0, 2.0, -0.1, &mut rng).is_err());
    }
}

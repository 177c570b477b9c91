//! Poisson noise with additive refinement between privacy levels.
//!
//! Poisson noise composes by superposition: a noisier release equals a
//! sharper one plus an independent Poisson count of the rate difference.
//! Inserting a level between two existing ones is a binomial split of the
//! observed integer gap.

use rand::Rng;
use rand_distr::{Binomial, Distribution, Poisson};

use crate::error::{Error, Result};

fn check_rate(lambda: f64, what: &str) -> Result<()> {
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(Error::invalid(format!(
            "{what} rate {lambda} must be finite and >= 0"
        )));
    }
    Ok(())
}

/// Draw a Poisson count with mean `lambda` (`lambda = 0` gives 0).
pub fn sample_poisson<R: Rng + ?Sized>(lambda: f64, rng: &mut R) -> Result<u64> {
    check_rate(lambda, "poisson")?;
    if lambda == 0.0 {
        return Ok(0);
    }
    let dist = Poisson::new(lambda)
        .map_err(|e| Error::invalid(format!("poisson rate {lambda}: {e}")))?;
    let x: f64 = dist.sample(rng);
    Ok(x as u64)
}

/// Refinement step between noise means `lambda_from <= lambda_to`: an
/// independent Poisson count of the difference. Adding it to a release with
/// mean `lambda_from` yields one with mean `lambda_to`.
pub fn sample_poisson_bridge<R: Rng + ?Sized>(
    lambda_from: f64,
    lambda_to: f64,
    rng: &mut R,
) -> Result<u64> {
    check_rate(lambda_from, "bridge source")?;
    check_rate(lambda_to, "bridge target")?;
    if lambda_from > lambda_to {
        return Err(Error::invalid(format!(
            "bridge means must satisfy lambda_from <= lambda_to, got {lambda_from} -> {lambda_to}"
        )));
    }
    sample_poisson(lambda_to - lambda_from, rng)
}

fn split_probability(lambda_lo: f64, lambda: f64, lambda_hi: f64) -> Result<f64> {
    check_rate(lambda_lo, "sharper neighbor")?;
    check_rate(lambda, "requested")?;
    check_rate(lambda_hi, "noisier neighbor")?;
    if !(lambda_lo < lambda && lambda < lambda_hi) {
        return Err(Error::invalid(format!(
            "conditional needs lambda_lo < lambda < lambda_hi, got {lambda_lo}, {lambda}, {lambda_hi}"
        )));
    }
    Ok((lambda - lambda_lo) / (lambda_hi - lambda_lo))
}

/// Increment `W1 = Y_new - Y_sharper` for a release with noise mean `lambda`
/// between existing releases at `lambda_lo` (sharper) and `lambda_hi`
/// (noisier), given the observed integer gap `n` between the neighbors.
///
/// The gap splits as `Binomial(n, p)` with
/// `p = (lambda - lambda_lo) / (lambda_hi - lambda_lo)`.
pub fn sample_poisson_conditional<R: Rng + ?Sized>(
    lambda_lo: f64,
    lambda: f64,
    lambda_hi: f64,
    n: u64,
    rng: &mut R,
) -> Result<u64> {
    let p = split_probability(lambda_lo, lambda, lambda_hi)?;
    if n == 0 {
        return Ok(0);
    }
    let dist = Binomial::new(n, p)
        .map_err(|e| Error::invalid(format!("binomial split p = {p}: {e}")))?;
    Ok(dist.sample(rng))
}

/// Probability that [`sample_poisson_conditional`] returns `w` given gap `n`.
pub fn poisson_conditional_pmf(
    lambda_lo: f64,
    lambda: f64,
    lambda_hi: f64,
    n: u64,
    w: u64,
) -> Result<f64> {
    let p = split_probability(lambda_lo, lambda, lambda_hi)?;
    if w > n {
        return Ok(0.0);
    }
    let dist = statrs::distribution::Binomial::new(p, n)
        .map_err(|e| Error::invalid(format!("binomial split p = {p}: {e}")))?;
    use statrs::distribution::Discrete;
    Ok(dist.pmf(w))
}

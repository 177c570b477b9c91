//! Privacy accounting: composition in the zero-concentrated model, the cost
//! of multiple coupled releases, and the approximate-DP guarantee of
//! Poisson-noised counts.

use crate::error::{Error, Result};
use crate::noise::gaussian::release_std;

fn check_budgets(rhos: &[f64]) -> Result<()> {
    if rhos.iter().any(|&r| !(r >= 0.0) || !r.is_finite()) {
        return Err(Error::invalid("budgets must be finite and >= 0"));
    }
    Ok(())
}

/// Total budget of independently composed releases: the sum.
pub fn zcdp_compose(rhos: &[f64]) -> Result<f64> {
    check_budgets(rhos)?;
    Ok(rhos.iter().sum())
}

/// Total budget of coupled releases from one ledger: the maximum, however
/// many levels were released and in whatever order.
pub fn multiple_release_budget(rhos: &[f64]) -> Result<f64> {
    check_budgets(rhos)?;
    Ok(rhos.iter().copied().fold(0.0, f64::max))
}

/// Gaussian noise level that spends budget `rho` on a query with
/// l2-sensitivity `delta`.
pub fn gaussian_sigma(rho: f64, delta: f64) -> Result<f64> {
    if !(rho > 0.0) || !rho.is_finite() {
        return Err(Error::invalid(format!("rho {rho} must be finite and > 0")));
    }
    if !(delta > 0.0) || !delta.is_finite() {
        return Err(Error::invalid(format!(
            "sensitivity {delta} must be finite and > 0"
        )));
    }
    Ok(release_std(rho, delta))
}

/// Sensitivity profile of a vector-valued counting query.
#[derive(Debug, Clone, Copy)]
pub struct Sensitivities {
    /// l1 sensitivity.
    pub l1: f64,
    /// l2 sensitivity.
    pub l2: f64,
    /// l-infinity (per-coordinate) sensitivity.
    pub linf: f64,
}

impl Sensitivities {
    /// All three norms equal to one: a histogram-style query where each
    /// record moves a single count by one.
    pub const UNIT: Sensitivities = Sensitivities {
        l1: 1.0,
        l2: 1.0,
        linf: 1.0,
    };

    fn validate(&self) -> Result<()> {
        for (name, v) in [("l1", self.l1), ("l2", self.l2), ("linf", self.linf)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::invalid(format!(
                    "{name} sensitivity {v} must be finite and > 0"
                )));
            }
        }
        if self.linf > self.l2 || self.l2 > self.l1 {
            return Err(Error::invalid(format!(
                "sensitivities must satisfy linf <= l2 <= l1, got {} / {} / {}",
                self.linf, self.l2, self.l1
            )));
        }
        Ok(())
    }
}

fn check_poisson_domain(lambda: f64, delta: f64, dim: u64, linf: f64) -> Result<()> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::invalid(format!(
            "noise mean {lambda} must be finite and > 0"
        )));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::invalid(format!("delta {delta} must lie in (0, 1)")));
    }
    if dim == 0 {
        return Err(Error::invalid("dimension must be at least 1"));
    }
    let required = (23.0 * (10.0 * dim as f64 / delta).ln()).max(2.0 * linf);
    if lambda <= required {
        return Err(Error::PreconditionFailed {
            what: "poisson noise mean",
            required,
            actual: lambda,
        });
    }
    Ok(())
}

/// `(epsilon, delta)` guarantee of adding `Poisson(lambda)` noise to each of
/// `dim` counts, for a query with the given sensitivity profile.
///
/// Requires `lambda > max(23 ln(10 dim / delta), 2 linf)`.
pub fn poisson_epsilon(lambda: f64, delta: f64, dim: u64, sens: Sensitivities) -> Result<f64> {
    sens.validate()?;
    check_poisson_domain(lambda, delta, dim, sens.linf)?;
    let d = dim as f64;
    let gaussian_part = sens.l2 * (2.0 * (1.25 / delta).ln()).sqrt() / lambda.sqrt();
    let drift_part = (5.0 * std::f64::consts::SQRT_2 * sens.l2 * (10.0 / delta).ln().sqrt()
        + 5.0 / 3.0 * sens.l1)
        / (lambda * (1.0 - delta / 10.0));
    let tail_part = (2.0 / 3.0 * sens.linf * (1.25 / delta).ln()
        + 4.0 / 3.0 * sens.linf * (20.0 * d / delta).ln() * (10.0 / delta).ln())
        / lambda;
    Ok(gaussian_part + drift_part + tail_part)
}

/// Simplified guarantee for unit sensitivities and `delta < 1/100`:
/// `sqrt(2 ln(1.25/delta)) / sqrt(lambda) + 2 ln(20 dim/delta) ln(10/delta) / lambda`.
pub fn poisson_epsilon_unit(lambda: f64, delta: f64, dim: u64) -> Result<f64> {
    check_poisson_domain(lambda, delta, dim, 1.0)?;
    if delta >= 0.01 {
        return Err(Error::invalid(format!(
            "simplified bound needs delta < 1/100, got {delta}"
        )));
    }
    let d = dim as f64;
    Ok((2.0 * (1.25 / delta).ln()).sqrt() / lambda.sqrt()
        + 2.0 * (20.0 * d / delta).ln() * (10.0 / delta).ln() / lambda)
}

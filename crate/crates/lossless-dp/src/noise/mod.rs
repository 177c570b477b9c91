//! Noise distributions, indexed by the privacy parameter `rho`, together
//! with the coupled refinement ("bridge") and insertion ("conditional")
//! samplers each family needs for re-releasable queries.

pub mod exponential;
pub mod gaussian;
pub mod laplace;
pub mod poisson;
pub mod truncated;

pub use exponential::{
    exponential_cdf, sample_exponential, sample_exponential_bridge, sample_exponential_conditional,
};
pub use gaussian::{
    bridge_variance, combine_weights, normal_cdf, normal_sf, release_covariance, release_std,
    sample_gaussian, standard_normal, GaussianSpec,
};
pub use laplace::{
    laplace_cdf, laplace_conditional_weights, laplace_conv_density, laplace_density,
    sample_laplace, sample_laplace_bridge, sample_laplace_conditional, LaplaceMixtureWeights,
};
pub use poisson::{
    poisson_conditional_pmf, sample_poisson, sample_poisson_bridge, sample_poisson_conditional,
};
pub use truncated::sample_truncated_gaussian;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Noise family a ledger is built on.
///
/// Every family is indexed by the budget parameter `rho`: larger `rho` means
/// more budget spent and less noise. Sensitivity scales the Gaussian family
/// directly; for the others it is carried as metadata on the ledger and the
/// `rho`-to-parameter maps below are fixed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mechanism {
    /// `N(0, delta^2 / (2 rho))`; the only family with an unbounded ledger.
    Gaussian,
    /// Zero-mean Laplace with scale `1 / rho`.
    Laplace,
    /// Poisson count with mean `1 / rho`.
    Poisson,
    /// One-sided exponential with rate `rho`.
    Exponential,
}

impl Mechanism {
    /// All supported families.
    pub const ALL: [Mechanism; 4] = [
        Mechanism::Gaussian,
        Mechanism::Laplace,
        Mechanism::Poisson,
        Mechanism::Exponential,
    ];

    /// Lowercase family name.
    pub fn name(self) -> &'static str {
        match self {
            Mechanism::Gaussian => "gaussian",
            Mechanism::Laplace => "laplace",
            Mechanism::Poisson => "poisson",
            Mechanism::Exponential => "exponential",
        }
    }

    /// Parse a family name (case-insensitive).
    pub fn from_name(name: &str) -> Result<Self> {
        match name.to_ascii_lowercase().as_str() {
            "gaussian" | "normal" => Ok(Mechanism::Gaussian),
            "laplace" => Ok(Mechanism::Laplace),
            "poisson" => Ok(Mechanism::Poisson),
            "exponential" | "exp" => Ok(Mechanism::Exponential),
            other => Err(Error::invalid(format!("unknown mechanism '{other}'"))),
        }
    }

    /// Whether a ledger over this family can be opened with an unlimited
    /// budget. Only the Gaussian family supports interpolation below an
    /// exact value, which is what an unbounded ledger requires.
    pub fn supports_unbounded(self) -> bool {
        matches!(self, Mechanism::Gaussian)
    }

    /// Variance of a fresh release at budget `rho` with sensitivity `delta`.
    pub fn fresh_variance(self, rho: f64, delta: f64) -> f64 {
        match self {
            Mechanism::Gaussian => delta * delta / (2.0 * rho),
            Mechanism::Laplace => 2.0 / (rho * rho),
            Mechanism::Poisson => 1.0 / rho,
            Mechanism::Exponential => 1.0 / (rho * rho),
        }
    }

    /// Draw the noise added by a fresh release at budget `rho` with
    /// sensitivity `delta` (`delta` only affects the Gaussian family).
    pub fn sample_fresh<R: Rng + ?Sized>(self, rho: f64, delta: f64, rng: &mut R) -> Result<f64> {
        if !(rho > 0.0) || !rho.is_finite() {
            return Err(Error::invalid(format!(
                "fresh release needs finite rho > 0, got {rho}"
            )));
        }
        match self {
            Mechanism::Gaussian => sample_gaussian(0.0, delta * delta / (2.0 * rho), rng),
            Mechanism::Laplace => Ok(sample_laplace(1.0 / rho, rng)),
            Mechanism::Poisson => Ok(sample_poisson(1.0 / rho, rng)? as f64),
            Mechanism::Exponential => sample_exponential(rho, rng),
        }
    }
}

impl std::fmt::Display for Mechanism {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Mechanism {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Mechanism::from_name(s)
    }
}

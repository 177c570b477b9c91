//! The release ledger: re-releasable noisy answers to a single query.
//!
//! A ledger is opened once per query with a noise family, a sensitivity, and
//! a budget bound. Every call to [`Ledger::release`] returns an answer whose
//! marginal distribution is exactly that of a fresh release at the requested
//! level, but the answers are coupled: releasing at levels `S` reveals no
//! more about the underlying data than the single strongest level in `S`.
//! Requests may arrive in any order, and repeating a level returns the
//! recorded answer unchanged.
//!
//! New answers are built from the recorded neighbors of the requested level.
//! Gaussian ledgers interpolate (convex combination of the two neighbors
//! plus an independent top-up); the other families add a coupled increment
//! to the sharper neighbor, conditioned on the gap to the noisier one.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::noise::{
    bridge_variance, combine_weights, sample_exponential_bridge, sample_exponential_conditional,
    sample_laplace_bridge, sample_laplace_conditional, sample_poisson_bridge,
    sample_poisson_conditional, standard_normal, Mechanism,
};

/// Upper budget bound fixed when a ledger is opened.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RhoBound {
    /// Releases up to this total budget are allowed; the exact answer is
    /// noised once at this level and then forgotten.
    Finite(f64),
    /// No upper bound; the ledger must retain the exact answer.
    Infinite,
}

impl RhoBound {
    pub fn is_finite(self) -> bool {
        matches!(self, RhoBound::Finite(_))
    }

    fn allows(self, rho: f64) -> bool {
        match self {
            RhoBound::Finite(bound) => rho <= bound,
            RhoBound::Infinite => true,
        }
    }
}

impl Serialize for RhoBound {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            RhoBound::Finite(x) => s.serialize_f64(*x),
            RhoBound::Infinite => s.serialize_str("infinity"),
        }
    }
}

impl<'de> Deserialize<'de> for RhoBound {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Number(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Number(x) => Ok(RhoBound::Finite(x)),
            Raw::Text(s) if s == "infinity" => Ok(RhoBound::Infinite),
            Raw::Text(s) => Err(D::Error::custom(format!(
                "rho_inf must be a number or \"infinity\", got \"{s}\""
            ))),
        }
    }
}

/// One recorded answer: the level it was released at and its value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Release {
    pub rho: f64,
    pub value: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct LedgerDoc {
    version: u32,
    mechanism: Mechanism,
    sensitivity: f64,
    rho_inf: RhoBound,
    dimension: usize,
    entries: Vec<Release>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    secret: Option<Vec<f64>>,
}

/// Release history for one query, with enough state to extend it.
#[derive(Debug, Clone)]
pub struct Ledger {
    mechanism: Mechanism,
    sensitivity: f64,
    rho_inf: RhoBound,
    dimension: usize,
    /// Sorted ascending by `rho`; at most one entry per level.
    entries: Vec<Release>,
    /// Exact query answer; present only on unbounded ledgers (or bounded
    /// ones reloaded from a trusted store that kept it).
    secret: Option<Vec<f64>>,
}

fn check_common(mechanism: Mechanism, sensitivity: f64, secret: &[f64]) -> Result<()> {
    if !(sensitivity > 0.0) || !sensitivity.is_finite() {
        return Err(Error::invalid(format!(
            "sensitivity {sensitivity} must be finite and > 0"
        )));
    }
    if secret.is_empty() {
        return Err(Error::invalid("query answer must have at least one coordinate"));
    }
    if secret.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("query answer coordinates must be finite"));
    }
    if mechanism == Mechanism::Poisson && secret.iter().any(|v| v.fract() != 0.0) {
        return Err(Error::invalid(
            "poisson ledgers require integer query answers",
        ));
    }
    Ok(())
}

impl Ledger {
    /// Open a ledger with no budget ceiling. The exact answer is retained,
    /// so this is only available for families that can interpolate beneath
    /// an exact value (Gaussian).
    pub fn new_unbounded(mechanism: Mechanism, sensitivity: f64, secret: Vec<f64>) -> Result<Self> {
        check_common(mechanism, sensitivity, &secret)?;
        if !mechanism.supports_unbounded() {
            return Err(Error::UnboundedUnsupported(mechanism.name()));
        }
        Ok(Ledger {
            mechanism,
            sensitivity,
            rho_inf: RhoBound::Infinite,
            dimension: secret.len(),
            entries: Vec::new(),
            secret: Some(secret),
        })
    }

    /// Open a ledger capped at total budget `rho_inf`. The strongest
    /// possible answer is drawn immediately and recorded, and the exact
    /// answer is discarded: afterwards the ledger alone suffices to serve
    /// every level up to the cap.
    pub fn new_bounded<R: Rng + ?Sized>(
        mechanism: Mechanism,
        sensitivity: f64,
        rho_inf: f64,
        secret: Vec<f64>,
        rng: &mut R,
    ) -> Result<Self> {
        check_common(mechanism, sensitivity, &secret)?;
        if !(rho_inf > 0.0) || !rho_inf.is_finite() {
            return Err(Error::invalid(format!(
                "budget cap {rho_inf} must be finite and > 0"
            )));
        }
        let value: Vec<f64> = secret
            .iter()
            .map(|&v| Ok(v + mechanism.sample_fresh(rho_inf, sensitivity, rng)?))
            .collect::<Result<_>>()?;
        Ok(Ledger {
            mechanism,
            sensitivity,
            rho_inf: RhoBound::Finite(rho_inf),
            dimension: value.len(),
            entries: vec![Release { rho: rho_inf, value }],
            secret: None,
        })
    }

    pub fn mechanism(&self) -> Mechanism {
        self.mechanism
    }

    pub fn sensitivity(&self) -> f64 {
        self.sensitivity
    }

    pub fn rho_bound(&self) -> RhoBound {
        self.rho_inf
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    /// Recorded releases, sorted by level.
    pub fn entries(&self) -> &[Release] {
        &self.entries
    }

    /// Strongest level released so far.
    pub fn max_released_rho(&self) -> Option<f64> {
        self.entries.last().map(|e| e.rho)
    }

    /// Whether the exact answer is still held.
    pub fn has_secret(&self) -> bool {
        self.secret.is_some()
    }

    /// Total budget consumed: the strongest level ever released.
    pub fn budget_spent(&self) -> f64 {
        self.max_released_rho().unwrap_or(0.0)
    }

    /// Answer the query at level `rho`.
    ///
    /// Marginally the answer is distributed exactly as a fresh release at
    /// `rho`; jointly with everything already recorded it reveals no more
    /// than the strongest level released so far. Repeating a level returns
    /// the recorded answer.
    pub fn release<R: Rng + ?Sized>(&mut self, rho: f64, rng: &mut R) -> Result<Release> {
        if !(rho > 0.0) || !rho.is_finite() {
            return Err(Error::invalid(format!(
                "release level must be finite and > 0, got {rho}"
            )));
        }
        if !self.rho_inf.allows(rho) {
            let RhoBound::Finite(bound) = self.rho_inf else {
                unreachable!()
            };
            return Err(Error::BudgetExceeded {
                requested: rho,
                bound,
            });
        }
        match self.entries.binary_search_by(|e| e.rho.total_cmp(&rho)) {
            Ok(found) => Ok(self.entries[found].clone()),
            Err(insert_at) => {
                let value = self.fresh_value(rho, insert_at, rng)?;
                let release = Release { rho, value };
                self.entries.insert(insert_at, release.clone());
                Ok(release)
            }
        }
    }

    /// Convenience for one-dimensional ledgers.
    pub fn release_scalar<R: Rng + ?Sized>(&mut self, rho: f64, rng: &mut R) -> Result<f64> {
        Ok(self.release(rho, rng)?.value[0])
    }

    fn fresh_value<R: Rng + ?Sized>(
        &self,
        rho: f64,
        insert_at: usize,
        rng: &mut R,
    ) -> Result<Vec<f64>> {
        let left = insert_at.checked_sub(1).map(|i| &self.entries[i]);
        let right = self.entries.get(insert_at);
        match self.mechanism {
            Mechanism::Gaussian => self.gaussian_value(rho, left, right, rng),
            Mechanism::Laplace => self.laplace_value(rho, left, right, rng),
            Mechanism::Poisson => self.poisson_value(rho, left, right, rng),
            Mechanism::Exponential => self.exponential_value(rho, left, right, rng),
        }
    }

    fn gaussian_value<R: Rng + ?Sized>(
        &self,
        rho: f64,
        left: Option<&Release>,
        right: Option<&Release>,
        rng: &mut R,
    ) -> Result<Vec<f64>> {
        let rho_lo = left.map_or(0.0, |e| e.rho);
        let rho_hi = right.map_or(f64::INFINITY, |e| e.rho);
        let upper: &[f64] = match right {
            Some(e) => &e.value,
            None => match &self.secret {
                Some(secret) => secret,
                None => return Err(Error::SecretUnavailable(rho_lo)),
            },
        };
        let var = bridge_variance(rho_lo, rho, rho_hi, self.sensitivity)?;
        let (w_lo, w_hi) = combine_weights(rho_lo, rho, rho_hi)?;
        let sd = var.sqrt();
        let mut value = Vec::with_capacity(self.dimension);
        for i in 0..self.dimension {
            let lo = left.map_or(0.0, |e| e.value[i]);
            value.push(w_lo * lo + w_hi * upper[i] + sd * standard_normal(rng));
        }
        Ok(value)
    }

    /// Sharper neighbor, which every non-Gaussian release is built on.
    fn right_or_err<'a>(&self, right: Option<&'a Release>) -> Result<&'a Release> {
        right.ok_or(Error::UnboundedUnsupported(self.mechanism.name()))
    }

    fn laplace_value<R: Rng + ?Sized>(
        &self,
        rho: f64,
        left: Option<&Release>,
        right: Option<&Release>,
        rng: &mut R,
    ) -> Result<Vec<f64>> {
        let right = self.right_or_err(right)?;
        let b = 1.0 / rho;
        let b_sharp = 1.0 / right.rho;
        let mut value = Vec::with_capacity(self.dimension);
        match left {
            None => {
                for i in 0..self.dimension {
                    value.push(right.value[i] + sample_laplace_bridge(b_sharp, b, rng)?);
                }
            }
            Some(left) => {
                let b_noisy = 1.0 / left.rho;
                for i in 0..self.dimension {
                    let gap = left.value[i] - right.value[i];
                    let w1 = sample_laplace_conditional(b_sharp, b, b_noisy, gap, rng)?;
                    value.push(right.value[i] + w1);
                }
            }
        }
        Ok(value)
    }

    fn poisson_value<R: Rng + ?Sized>(
        &self,
        rho: f64,
        left: Option<&Release>,
        right: Option<&Release>,
        rng: &mut R,
    ) -> Result<Vec<f64>> {
        let right = self.right_or_err(right)?;
        let lambda = 1.0 / rho;
        let lambda_sharp = 1.0 / right.rho;
        let mut value = Vec::with_capacity(self.dimension);
        match left {
            None => {
                for i in 0..self.dimension {
                    let w = sample_poisson_bridge(lambda_sharp, lambda, rng)?;
                    value.push(right.value[i] + w as f64);
                }
            }
            Some(left) => {
                let lambda_noisy = 1.0 / left.rho;
                for i in 0..self.dimension {
                    // The gap is a count; rounding shields against the last
                    // ulp of the two float subtractions.
                    let gap = (left.value[i] - right.value[i]).round().max(0.0);
                    let w1 =
                        sample_poisson_conditional(lambda_sharp, lambda, lambda_noisy, gap as u64, rng)?;
                    value.push(right.value[i] + w1 as f64);
                }
            }
        }
        Ok(value)
    }

    fn exponential_value<R: Rng + ?Sized>(
        &self,
        rho: f64,
        left: Option<&Release>,
        right: Option<&Release>,
        rng: &mut R,
    ) -> Result<Vec<f64>> {
        let right = self.right_or_err(right)?;
        let mut value = Vec::with_capacity(self.dimension);
        match left {
            None => {
                for i in 0..self.dimension {
                    value.push(right.value[i] + sample_exponential_bridge(right.rho, rho, rng)?);
                }
            }
            Some(left) => {
                for i in 0..self.dimension {
                    let gap = (left.value[i] - right.value[i]).max(0.0);
                    let w1 = sample_exponential_conditional(left.rho, rho, right.rho, gap, rng)?;
                    value.push(right.value[i] + w1);
                }
            }
        }
        Ok(value)
    }

    /// Serialize to the versioned JSON document. `include_secret` must only
    /// be used when the output stays in the trusted store: the secret is the
    /// exact query answer.
    pub fn to_json(&self, include_secret: bool) -> Result<String> {
        let doc = LedgerDoc {
            version: 1,
            mechanism: self.mechanism,
            sensitivity: self.sensitivity,
            rho_inf: self.rho_inf,
            dimension: self.dimension,
            entries: self.entries.clone(),
            secret: if include_secret {
                self.secret.clone()
            } else {
                None
            },
        };
        Ok(serde_json::to_string_pretty(&doc)?)
    }

    /// Parse and validate a JSON document produced by [`Ledger::to_json`].
    ///
    /// A ledger reloaded without its secret still serves every level at or
    /// below its strongest recorded release; on an unbounded ledger,
    /// stronger requests fail with [`Error::SecretUnavailable`].
    pub fn from_json(text: &str) -> Result<Self> {
        let doc: LedgerDoc = serde_json::from_str(text)?;
        if doc.version != 1 {
            return Err(Error::Document(format!(
                "unsupported ledger version {}",
                doc.version
            )));
        }
        if !(doc.sensitivity > 0.0) || !doc.sensitivity.is_finite() {
            return Err(Error::Document(format!(
                "sensitivity {} must be finite and > 0",
                doc.sensitivity
            )));
        }
        if doc.dimension == 0 {
            return Err(Error::Document("dimension must be at least 1".into()));
        }
        match doc.rho_inf {
            RhoBound::Infinite => {
                if !doc.mechanism.supports_unbounded() {
                    return Err(Error::UnboundedUnsupported(doc.mechanism.name()));
                }
            }
            RhoBound::Finite(bound) => {
                if !(bound > 0.0) || !bound.is_finite() {
                    return Err(Error::Document(format!(
                        "rho_inf {bound} must be finite and > 0"
                    )));
                }
                if !doc.entries.iter().any(|e| e.rho == bound) {
                    return Err(Error::Document(
                        "bounded ledger must contain its cap-level release".into(),
                    ));
                }
            }
        }
        let mut entries = doc.entries;
        entries.sort_by(|a, b| a.rho.total_cmp(&b.rho));
        for pair in entries.windows(2) {
            if pair[0].rho == pair[1].rho {
                return Err(Error::Document(format!(
                    "duplicate release level {}",
                    pair[0].rho
                )));
            }
        }
        for e in &entries {
            if !(e.rho > 0.0) || !e.rho.is_finite() {
                return Err(Error::Document(format!(
                    "release level {} must be finite and > 0",
                    e.rho
                )));
            }
            if !doc.rho_inf.allows(e.rho) {
                return Err(Error::Document(format!(
                    "release level {} exceeds the ledger bound",
                    e.rho
                )));
            }
            if e.value.len() != doc.dimension {
                return Err(Error::Document(format!(
                    "release at {} has {} coordinates, expected {}",
                    e.rho,
                    e.value.len(),
                    doc.dimension
                )));
            }
            if e.value.iter().any(|v| !v.is_finite()) {
                return Err(Error::Document(format!(
                    "release at {} has non-finite coordinates",
                    e.rho
                )));
            }
        }
        if let Some(secret) = &doc.secret {
            if secret.len() != doc.dimension {
                return Err(Error::Document(format!(
                    "secret has {} coordinates, expected {}",
                    secret.len(),
                    doc.dimension
                )));
            }
            if secret.iter().any(|v| !v.is_finite()) {
                return Err(Error::Document("secret has non-finite coordinates".into()));
            }
        }
        Ok(Ledger {
            mechanism: doc.mechanism,
            sensitivity: doc.sensitivity,
            rho_inf: doc.rho_inf,
            dimension: doc.dimension,
            entries,
            secret: doc.secret,
        })
    }

    /// Write the JSON document to a file.
    pub fn save_file(&self, path: &std::path::Path, include_secret: bool) -> Result<()> {
        std::fs::write(path, self.to_json(include_secret)?)?;
        Ok(())
    }

    /// Load a ledger from a JSON file.
    pub fn load_file(path: &std::path::Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

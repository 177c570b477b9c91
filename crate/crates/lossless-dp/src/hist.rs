//! Thresholded release of sparse histograms under a growing privacy budget.
//!
//! A histogram over `d` buckets is released repeatedly at strictly increasing
//! budgets `rho_1 < rho_2 < ...` with a per-round threshold `tau_r`. Each round
//! tops up the Gaussian noise on every count so the accumulated noise is
//! distributed as `N(0, delta^2 / (2 rho_r))`, reports the coordinates whose
//! noisy value strictly exceeds `tau_r`, and suppresses the rest.
//!
//! [`NaiveHistogramRelease`] materializes all `d` coordinates and costs
//! `O(d)` noise draws per round. [`EfficientHistogramRelease`] produces an
//! output law identical to the naive release while touching only the support
//! of the histogram plus the coordinates that have ever crossed a threshold:
//! the suppressed zero coordinates are exchangeable, so the number of them
//! that first cross at round `r` is binomial with success probability
//! [`crossing_probability`], and each newly crossing coordinate has its noise
//! history reconstructed by sampling the increments conditioned on the
//! crossing event. The total number of Gaussian draws after `m` rounds is
//! exactly `(k + c) * m`, where `k` is the support size and `c` the number of
//! coordinates that ever crossed.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::sync::{Arc, Mutex, OnceLock};

use rand::Rng;
use rand_distr::{Binomial, Distribution};

use crate::error::{Error, Result};
use crate::noise::{normal_sf, sample_gaussian, sample_truncated_gaussian, standard_normal};

/// Number of nodes in each conditional density grid.
const GRID_POINTS: usize = 16384;
/// Half-width of the grids in standard deviations of the final noise sum.
const GRID_SPAN_SDS: f64 = 10.0;

/// A sparse nonnegative integer histogram over `dimension` buckets.
///
/// Counts are stored as `f64` so releases can be compared against noisy
/// values without conversions; bucket values must be finite and nonzero
/// entries are kept sorted by index.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    dimension: usize,
    nonzeros: BTreeMap<usize, f64>,
}

impl Histogram {
    /// Builds a histogram from `(index, count)` pairs; zero counts are dropped.
    pub fn new(dimension: usize, entries: impl IntoIterator<Item = (usize, f64)>) -> Result<Self> {
        if dimension == 0 {
            return Err(Error::invalid("histogram dimension must be at least 1"));
        }
        let mut nonzeros = BTreeMap::new();
        for (index, count) in entries {
            if index >= dimension {
                return Err(Error::invalid(format!(
                    "bucket index {index} out of range for dimension {dimension}"
                )));
            }
            if !count.is_finite() {
                return Err(Error::invalid(format!(
                    "bucket {index} has non-finite count {count}"
                )));
            }
            if count == 0.0 {
                continue;
            }
            if nonzeros.insert(index, count).is_some() {
                return Err(Error::invalid(format!("bucket index {index} appears twice")));
            }
        }
        Ok(Self { dimension, nonzeros })
    }

    /// Builds a histogram from a dense slice of counts.
    pub fn from_dense(values: &[f64]) -> Result<Self> {
        Self::new(
            values.len(),
            values.iter().enumerate().map(|(i, &v)| (i, v)),
        )
    }

    /// Number of buckets.
    pub fn dimension(&self) -> usize {
        self.dimension
    }

    /// Number of nonzero buckets.
    pub fn support_size(&self) -> usize {
        self.nonzeros.len()
    }

    /// Count stored at `index`, zero when the bucket is empty.
    pub fn value(&self, index: usize) -> f64 {
        self.nonzeros.get(&index).copied().unwrap_or(0.0)
    }

    /// Sorted view of the nonzero buckets.
    pub fn nonzeros(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.nonzeros.iter().map(|(&i, &v)| (i, v))
    }

    /// Materializes the dense count vector.
    pub fn to_dense(&self) -> Vec<f64> {
        let mut dense = vec![0.0; self.dimension];
        for (&i, &v) in &self.nonzeros {
            dense[i] = v;
        }
        dense
    }
}

fn check_delta(delta: f64) -> Result<()> {
    if !(delta.is_finite() && delta > 0.0) {
        return Err(Error::invalid(format!(
            "sensitivity must be positive and finite, got {delta}"
        )));
    }
    Ok(())
}

fn check_round(rho_prev: f64, rho: f64, tau: f64) -> Result<()> {
    if !(rho.is_finite() && rho > 0.0) {
        return Err(Error::invalid(format!(
            "budget must be positive and finite, got {rho}"
        )));
    }
    if rho <= rho_prev {
        return Err(Error::BudgetOrder {
            previous: rho_prev,
            current: rho,
        });
    }
    if tau.is_nan() {
        return Err(Error::invalid("threshold must not be NaN"));
    }
    Ok(())
}

/// Standard deviation of the fresh noise increment between budgets.
fn increment_sd(delta: f64, rho_prev: f64, rho: f64) -> f64 {
    (0.5 * delta * delta * (rho - rho_prev)).sqrt()
}

/// Reference implementation touching every coordinate each round.
///
/// The state keeps the running scaled noise sum `T_j`; the round-`r` output at
/// coordinate `j` is `H_j + T_j / rho_r` when that value strictly exceeds the
/// round's threshold and zero otherwise.
#[derive(Debug, Clone)]
pub struct NaiveHistogramRelease {
    values: Vec<f64>,
    scaled: Vec<f64>,
    delta: f64,
    rho_prev: f64,
    rounds: usize,
}

impl NaiveHistogramRelease {
    /// Starts a release sequence for `histogram` with L2 sensitivity `delta`.
    pub fn new(histogram: &Histogram, delta: f64) -> Result<Self> {
        check_delta(delta)?;
        Ok(Self {
            values: histogram.to_dense(),
            scaled: vec![0.0; histogram.dimension()],
            delta,
            rho_prev: 0.0,
            rounds: 0,
        })
    }

    /// Releases the thresholded noisy histogram at budget `rho`.
    ///
    /// Suppressed coordinates are reported as zero. Budgets must strictly
    /// increase across calls; thresholds may vary freely per round.
    pub fn release<R: Rng + ?Sized>(
        &mut self,
        rho: f64,
        tau: f64,
        rng: &mut R,
    ) -> Result<Vec<f64>> {
        check_round(self.rho_prev, rho, tau)?;
        let sd = increment_sd(self.delta, self.rho_prev, rho);
        let mut out = vec![0.0; self.values.len()];
        for j in 0..self.values.len() {
            self.scaled[j] += sd * standard_normal(rng);
            let y = self.values[j] + self.scaled[j] / rho;
            if y > tau {
                out[j] = y;
            }
        }
        self.rho_prev = rho;
        self.rounds += 1;
        Ok(out)
    }

    /// Number of rounds released so far.
    pub fn rounds(&self) -> usize {
        self.rounds
    }
}

fn check_schedule_prefix(r: usize, budgets: &[f64], thresholds: &[f64], delta: f64) -> Result<()> {
    check_delta(delta)?;
    if r == 0 {
        return Err(Error::invalid("round index must be at least 1"));
    }
    if budgets.len() != thresholds.len() {
        return Err(Error::invalid(format!(
            "{} budgets but {} thresholds",
            budgets.len(),
            thresholds.len()
        )));
    }
    if r > budgets.len() {
        return Err(Error::invalid(format!(
            "round {r} exceeds the {} scheduled rounds",
            budgets.len()
        )));
    }
    let mut prev = 0.0;
    for (i, &rho) in budgets[..r].iter().enumerate() {
        check_round(prev, rho, thresholds[i])?;
        prev = rho;
    }
    Ok(())
}

/// Uniform grid over `[lo, lo + (n - 1) step]` used to tabulate densities.
#[derive(Debug, Clone)]
struct StepGrid {
    lo: f64,
    step: f64,
    /// Probability of completing the remaining crossing event from each node.
    backward: Vec<f64>,
}

impl StepGrid {
    fn node(&self, i: usize) -> f64 {
        self.lo + self.step * i as f64
    }
}

/// Precomputed description of the event "first crossing happens at round `r`".
#[derive(Debug)]
struct RoundPlan {
    /// Standard deviations of the scaled noise increments, rounds `1..=r`.
    sigmas: Vec<f64>,
    /// Scaled thresholds `rho_k tau_k`, rounds `1..=r`.
    bounds: Vec<f64>,
    /// Probability that a zero coordinate still suppressed before round `r`
    /// crosses at round `r`.
    p: f64,
    /// Grids over the intermediate scaled sums `T_1 .. T_{r-1}`, absent when
    /// the probability is degenerate.
    grids: Vec<StepGrid>,
}

#[derive(PartialEq, Eq, Hash)]
struct PlanKey(Vec<u64>);

fn plan_key(budgets: &[f64], thresholds: &[f64], delta: f64) -> PlanKey {
    let mut bits = Vec::with_capacity(budgets.len() + thresholds.len() + 1);
    bits.push(delta.to_bits());
    bits.extend(budgets.iter().map(|b| b.to_bits()));
    bits.extend(thresholds.iter().map(|t| t.to_bits()));
    PlanKey(bits)
}

fn plan_cache() -> &'static Mutex<HashMap<PlanKey, Arc<RoundPlan>>> {
    static CACHE: OnceLock<Mutex<HashMap<PlanKey, Arc<RoundPlan>>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

fn trapezoid_weight(i: usize, n: usize, step: f64) -> f64 {
    if i == 0 || i == n - 1 {
        0.5 * step
    } else {
        step
    }
}

/// Unnormalized Gaussian kernel with scale `sigma`.
fn kernel(x: f64, sigma: f64) -> f64 {
    let z = x / sigma;
    (-0.5 * z * z).exp()
}

fn build_plan(r: usize, budgets: &[f64], thresholds: &[f64], delta: f64) -> Result<RoundPlan> {
    let mut sigmas = Vec::with_capacity(r);
    let mut bounds = Vec::with_capacity(r);
    let mut prev = 0.0;
    for k in 0..r {
        sigmas.push(increment_sd(delta, prev, budgets[k]));
        bounds.push(budgets[k] * thresholds[k]);
        prev = budgets[k];
    }

    // A `-inf` bound before round `r` makes survival impossible, and a `+inf`
    // bound at round `r` cannot be exceeded; both degenerate to p = 0.
    if bounds[..r - 1].contains(&f64::NEG_INFINITY) || bounds[r - 1] == f64::INFINITY {
        return Ok(RoundPlan {
            sigmas,
            bounds,
            p: 0.0,
            grids: Vec::new(),
        });
    }

    if r == 1 {
        let p = normal_sf(bounds[0] / sigmas[0]);
        return Ok(RoundPlan {
            sigmas,
            bounds,
            p,
            grids: Vec::new(),
        });
    }

    // Grid geometry for the intermediate scaled sums T_1 .. T_{r-1}.
    let total_var: f64 = sigmas.iter().map(|s| s * s).sum();
    let spread = GRID_SPAN_SDS * total_var.sqrt();
    let mut grids = Vec::with_capacity(r - 1);
    for k in 0..r - 1 {
        let hi = bounds[k].min(spread);
        let lo = hi - 2.0 * spread;
        grids.push(StepGrid {
            lo,
            step: (hi - lo) / (GRID_POINTS - 1) as f64,
            backward: Vec::new(),
        });
    }

    // Forward pass: survivor density of T_k given all earlier bounds held.
    let mut density: Vec<f64> = (0..GRID_POINTS)
        .map(|i| kernel(grids[0].node(i), sigmas[0]))
        .collect();
    normalize(&mut density, grids[0].step)?;
    for k in 1..r - 1 {
        let (src, dst) = (&grids[k - 1], &grids[k]);
        let mut next = vec![0.0; GRID_POINTS];
        for (j, &g) in density.iter().enumerate() {
            if g == 0.0 {
                continue;
            }
            let w = g * trapezoid_weight(j, GRID_POINTS, src.step);
            let t = src.node(j);
            for (i, slot) in next.iter_mut().enumerate() {
                *slot += w * kernel(dst.node(i) - t, sigmas[k]);
            }
        }
        density = next;
        normalize(&mut density, dst.step)?;
    }
    let last = &grids[r - 2];
    let mut p = 0.0;
    for (j, &g) in density.iter().enumerate() {
        let w = trapezoid_weight(j, GRID_POINTS, last.step);
        p += w * g * normal_sf((bounds[r - 1] - last.node(j)) / sigmas[r - 1]);
    }
    p = p.clamp(0.0, 1.0);

    // Backward pass: probability of completing the crossing event from each
    // intermediate state, B_k(t) = P(stay below through round r-1, cross at r).
    let mut backward = vec![Vec::new(); r - 1];
    backward[r - 2] = (0..GRID_POINTS)
        .map(|i| normal_sf((bounds[r - 1] - grids[r - 2].node(i)) / sigmas[r - 1]))
        .collect();
    for k in (0..r - 2).rev() {
        let (src, dst) = (&grids[k], &grids[k + 1]);
        let ahead = &backward[k + 1];
        let mut values = vec![0.0; GRID_POINTS];
        for (i, slot) in values.iter_mut().enumerate() {
            let t = src.node(i);
            let mut acc = 0.0;
            for (j, &b) in ahead.iter().enumerate() {
                if b == 0.0 {
                    continue;
                }
                let w = trapezoid_weight(j, GRID_POINTS, dst.step);
                acc += w * b * kernel(dst.node(j) - t, sigmas[k + 1]) / (sigmas[k + 1] * (2.0 * std::f64::consts::PI).sqrt());
            }
            *slot = acc.clamp(0.0, 1.0);
        }
        backward[k] = values;
    }
    for (grid, values) in grids.iter_mut().zip(backward) {
        grid.backward = values;
    }

    Ok(RoundPlan { sigmas, bounds, p, grids })
}

fn normalize(density: &mut [f64], step: f64) -> Result<()> {
    let n = density.len();
    let total: f64 = density
        .iter()
        .enumerate()
        .map(|(i, &v)| v * trapezoid_weight(i, n, step))
        .sum();
    if !(total.is_finite() && total > 0.0) {
        return Err(Error::ImpossibleConditioning);
    }
    for v in density.iter_mut() {
        *v /= total;
    }
    Ok(())
}

fn round_plan(budgets: &[f64], thresholds: &[f64], delta: f64) -> Result<Arc<RoundPlan>> {
    let r = budgets.len();
    let key = plan_key(budgets, thresholds, delta);
    let mut cache = plan_cache().lock().expect("plan cache poisoned");
    if let Some(plan) = cache.get(&key) {
        return Ok(Arc::clone(plan));
    }
    let plan = Arc::new(build_plan(r, budgets, thresholds, delta)?);
    cache.insert(key, Arc::clone(&plan));
    Ok(plan)
}

/// Probability that a zero coordinate suppressed in rounds `1..r` crosses the
/// threshold at round `r`.
///
/// Round `r` uses the first `r` entries of `budgets` and `thresholds`; the
/// histogram's L2 sensitivity is `delta`. The round-1 probability is the
/// Gaussian survival function at the scaled threshold; later rounds integrate
/// the survivor density of the running noise sum on a fixed grid, so results
/// are accurate to roughly single-precision rather than machine precision.
pub fn crossing_probability(
    r: usize,
    budgets: &[f64],
    thresholds: &[f64],
    delta: f64,
) -> Result<f64> {
    check_schedule_prefix(r, budgets, thresholds, delta)?;
    Ok(round_plan(&budgets[..r], &thresholds[..r], delta)?.p)
}

/// Draws from a piecewise linear density tabulated on a uniform grid.
fn sample_piecewise_linear<R: Rng + ?Sized>(
    lo: f64,
    step: f64,
    weights: &[f64],
    rng: &mut R,
) -> Result<f64> {
    let n = weights.len();
    let total: f64 = (0..n - 1).map(|i| weights[i] + weights[i + 1]).sum();
    if !(total.is_finite() && total > 0.0) {
        return Err(Error::ImpossibleConditioning);
    }
    let target = rng.random::<f64>() * total;
    let mut acc = 0.0;
    for i in 0..n - 1 {
        let cell = weights[i] + weights[i + 1];
        if acc + cell >= target && cell > 0.0 {
            let rem = (target - acc) / cell;
            let (a, b) = (weights[i], weights[i + 1]);
            let diff = b - a;
            // Invert the CDF of the linear density a + (b - a) x on [0, 1].
            let x = if diff.abs() <= 1e-12 * (a + b) {
                rem
            } else {
                let disc = (a * a + diff * (a + b) * rem).max(0.0);
                ((disc.sqrt() - a) / diff).clamp(0.0, 1.0)
            };
            return Ok(lo + (i as f64 + x) * step);
        }
        acc += cell;
    }
    Ok(lo + ((n - 1) as f64) * step)
}

/// Samples the scaled noise sum `T_r` of a coordinate conditioned on first
/// crossing at round `r`, consuming exactly `r` noise draws.
fn sample_crossing_path<R: Rng + ?Sized>(
    plan: &RoundPlan,
    rng: &mut R,
    draws: &mut u64,
) -> Result<f64> {
    let r = plan.sigmas.len();
    let mut t = 0.0;
    for (k, grid) in plan.grids.iter().enumerate() {
        let sigma = plan.sigmas[k];
        let weights: Vec<f64> = grid
            .backward
            .iter()
            .enumerate()
            .map(|(i, &b)| b * kernel(grid.node(i) - t, sigma))
            .collect();
        t = sample_piecewise_linear(grid.lo, grid.step, &weights, rng)?;
        *draws += 1;
    }
    let sigma = plan.sigmas[r - 1];
    let lower = plan.bounds[r - 1] - t;
    let z = if lower == f64::NEG_INFINITY {
        sample_gaussian(0.0, sigma * sigma, rng)?
    } else {
        sample_truncated_gaussian(0.0, sigma * sigma, lower, f64::INFINITY, rng)?
    };
    *draws += 1;
    Ok(t + z)
}

/// Chooses `count` distinct indices uniformly from the buckets not in `taken`.
fn sample_untracked_indices<R: Rng + ?Sized>(
    dimension: usize,
    taken: &BTreeMap<usize, f64>,
    count: usize,
    rng: &mut R,
) -> Vec<usize> {
    let free = dimension - taken.len();
    debug_assert!(count <= free);
    if free <= 4096 || count * 3 >= free {
        let mut pool: Vec<usize> = (0..dimension).filter(|i| !taken.contains_key(i)).collect();
        for i in 0..count {
            let j = i + rng.random_range(0..pool.len() - i);
            pool.swap(i, j);
        }
        pool.truncate(count);
        pool
    } else {
        let mut chosen = HashSet::with_capacity(count);
        let mut out = Vec::with_capacity(count);
        while out.len() < count {
            let i = rng.random_range(0..dimension);
            if !taken.contains_key(&i) && chosen.insert(i) {
                out.push(i);
            }
        }
        out
    }
}

/// Sparse release whose output law matches [`NaiveHistogramRelease`].
///
/// Tracks noise only for the histogram support and for coordinates that have
/// crossed a threshold in some round. Each round consumes one Gaussian draw
/// per tracked coordinate plus `r` draws per coordinate first crossing at
/// round `r`, so after `m` rounds the draw counter equals `(k + c) m` with
/// `k` the support size and `c` the number of crossers.
#[derive(Debug, Clone)]
pub struct EfficientHistogramRelease {
    histogram: Histogram,
    delta: f64,
    budgets: Vec<f64>,
    thresholds: Vec<f64>,
    /// Accumulated noise `T_j / rho_r` for each tracked coordinate.
    tracked: BTreeMap<usize, f64>,
    draws: u64,
}

impl EfficientHistogramRelease {
    /// Starts a release sequence for `histogram` with L2 sensitivity `delta`.
    pub fn new(histogram: Histogram, delta: f64) -> Result<Self> {
        check_delta(delta)?;
        let tracked = histogram.nonzeros().map(|(i, _)| (i, 0.0)).collect();
        Ok(Self {
            histogram,
            delta,
            budgets: Vec::new(),
            thresholds: Vec::new(),
            tracked,
            draws: 0,
        })
    }

    /// Releases the thresholded noisy histogram at budget `rho`.
    ///
    /// Returns the coordinates strictly above the threshold as sorted
    /// `(index, value)` pairs; everything omitted is zero.
    pub fn release<R: Rng + ?Sized>(
        &mut self,
        rho: f64,
        tau: f64,
        rng: &mut R,
    ) -> Result<Vec<(usize, f64)>> {
        let rho_prev = self.budgets.last().copied().unwrap_or(0.0);
        check_round(rho_prev, rho, tau)?;
        let sd = increment_sd(self.delta, rho_prev, rho);
        for noise in self.tracked.values_mut() {
            let fresh = sd * standard_normal(rng);
            self.draws += 1;
            *noise = (rho_prev * *noise + fresh) / rho;
        }
        self.budgets.push(rho);
        self.thresholds.push(tau);

        let untracked = self.histogram.dimension() - self.tracked.len();
        if untracked > 0 {
            let plan = round_plan(&self.budgets, &self.thresholds, self.delta)?;
            let crossers = if plan.p <= 0.0 {
                0
            } else if plan.p >= 1.0 {
                untracked
            } else {
                let binomial = Binomial::new(untracked as u64, plan.p)
                    .map_err(|e| Error::invalid(e.to_string()))?;
                binomial.sample(rng) as usize
            };
            if crossers > 0 {
                for index in sample_untracked_indices(
                    self.histogram.dimension(),
                    &self.tracked,
                    crossers,
                    rng,
                ) {
                    let scaled = sample_crossing_path(&plan, rng, &mut self.draws)?;
                    let noise = scaled / rho;
                    assert!(
                        noise > tau,
                        "crossing coordinate {index} landed at {noise}, not above {tau}"
                    );
                    self.tracked.insert(index, noise);
                }
            }
        }

        let mut out = Vec::new();
        for (&index, &noise) in &self.tracked {
            let y = self.histogram.value(index) + noise;
            if y > tau {
                out.push((index, y));
            }
        }
        Ok(out)
    }

    /// Total Gaussian noise draws consumed so far.
    pub fn gaussian_draws(&self) -> u64 {
        self.draws
    }

    /// Number of coordinates currently tracked (support plus crossers).
    pub fn tracked_count(&self) -> usize {
        self.tracked.len()
    }

    /// Number of rounds released so far.
    pub fn rounds(&self) -> usize {
        self.budgets.len()
    }
}

/// Simulates a single-round thresholded release at budget `rho`.
///
/// Equivalent to one round of [`NaiveHistogramRelease`] but touches only the
/// support: the number of zero coordinates crossing the threshold is binomial
/// and their values are threshold-truncated Gaussians.
pub fn static_threshold_simulate<R: Rng + ?Sized>(
    histogram: &Histogram,
    rho: f64,
    tau: f64,
    delta: f64,
    rng: &mut R,
) -> Result<Vec<(usize, f64)>> {
    check_delta(delta)?;
    check_round(0.0, rho, tau)?;
    let sd = increment_sd(delta, 0.0, rho) / rho;
    let mut tracked = BTreeMap::new();
    for (index, value) in histogram.nonzeros() {
        let y = value + sd * standard_normal(rng);
        if y > tau {
            tracked.insert(index, y);
        }
    }
    let zeros = histogram.dimension() - histogram.support_size();
    if zeros > 0 {
        let p = normal_sf(tau / sd);
        let crossers = if p <= 0.0 {
            0
        } else if p >= 1.0 {
            zeros
        } else {
            let binomial =
                Binomial::new(zeros as u64, p).map_err(|e| Error::invalid(e.to_string()))?;
            binomial.sample(rng) as usize
        };
        if crossers > 0 {
            let support: BTreeMap<usize, f64> = histogram.nonzeros().collect();
            for index in sample_untracked_indices(histogram.dimension(), &support, crossers, rng) {
                let y = if tau == f64::NEG_INFINITY {
                    sample_gaussian(0.0, sd * sd, rng)?
                } else {
                    sample_truncated_gaussian(0.0, sd * sd, tau, f64::INFINITY, rng)?
                };
                tracked.insert(index, y);
            }
        }
    }
    Ok(tracked.into_iter().collect())
}

//! Statistical invariant batteries for every component, runnable on demand.
//!
//! Each check exercises one documented invariant: bridge identities for the
//! noise families, marginal and covariance laws of the ledger, sparse
//! histogram equivalence and draw accounting, accountant algebra, and
//! factorization recovery. Checks are seeded deterministically, so a passing
//! seed passes forever; statistical tests run at significance 0.01.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha12Rng;

use crate::account::{
    multiple_release_budget, poisson_epsilon, zcdp_compose, Sensitivities,
};
use crate::error::Result;
use crate::experiment::{compare_protocols, log_grid, write_csv};
use crate::factorization::{prefix_sum_query, FactorizedLedger};
use crate::hist::{
    crossing_probability, EfficientHistogramRelease, Histogram, NaiveHistogramRelease,
};
use crate::ledger::Ledger;
use crate::noise::{
    laplace_conditional_weights, laplace_conv_density, normal_cdf, poisson_conditional_pmf,
    sample_exponential, sample_exponential_bridge, sample_laplace, sample_laplace_bridge,
    sample_poisson, sample_poisson_bridge, sample_truncated_gaussian, standard_normal, Mechanism,
};
use crate::rng::substream;
use crate::stats::{
    adaptive_simpson, chi_square_two_sample, ks_test_one_sample, ks_test_two_sample,
    CovarianceAccumulator, RunningMoments,
};

/// Sample size preset for the batteries.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SuiteScale {
    /// Reduced sample sizes for fast runs.
    Quick,
    /// Full sample sizes.
    Full,
}

impl SuiteScale {
    /// Samples per statistical test.
    fn samples(self) -> usize {
        match self {
            SuiteScale::Quick => 10_000,
            SuiteScale::Full => 100_000,
        }
    }

    /// Trials for the histogram equivalence battery.
    fn hist_trials(self) -> usize {
        match self {
            SuiteScale::Quick => 2_000,
            SuiteScale::Full => 10_000,
        }
    }
}

/// Result of one invariant check.
#[derive(Debug, Clone, serde::Serialize)]
pub struct CheckOutcome {
    /// Stable slash-separated check name.
    pub name: &'static str,
    /// Whether the invariant held.
    pub passed: bool,
    /// Human-readable evidence.
    pub detail: String,
}

/// Outcomes of a whole battery run.
#[derive(Debug, Clone)]
pub struct SuiteReport {
    pub checks: Vec<CheckOutcome>,
}

impl SuiteReport {
    /// True when every check passed.
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

const ALPHA: f64 = 0.01;

fn outcome(name: &'static str, passed: bool, detail: String) -> CheckOutcome {
    CheckOutcome { name, passed, detail }
}

/// Runs a check whose verdict is exact (no sampling variability).
fn run_exact(
    name: &'static str,
    seed: u64,
    stream: u64,
    body: impl FnOnce(&mut ChaCha12Rng) -> Result<(bool, String)>,
) -> CheckOutcome {
    let mut rng = substream(seed, stream);
    match body(&mut rng) {
        Ok((passed, detail)) => outcome(name, passed, detail),
        Err(e) => outcome(name, false, format!("error: {e}")),
    }
}

/// Runs a statistical check, confirming any rejection on one independent
/// redraw. A single unlucky sample at significance [`ALPHA`] then passes,
/// while a genuine distributional defect still rejects both times.
fn run_statistical(
    name: &'static str,
    seed: u64,
    stream: u64,
    mut body: impl FnMut(&mut ChaCha12Rng) -> Result<(bool, String)>,
) -> CheckOutcome {
    let mut first = String::new();
    for attempt in 0..2u64 {
        let mut rng = substream(seed, stream + attempt);
        match body(&mut rng) {
            Ok((true, detail)) => {
                let detail = if attempt == 0 {
                    detail
                } else {
                    format!("{detail}; first draw rejected ({first}), redraw passed")
                };
                return outcome(name, true, detail);
            }
            Ok((false, detail)) => first = detail,
            Err(e) => return outcome(name, false, format!("error: {e}")),
        }
    }
    outcome(name, false, format!("rejected on two independent draws: {first}"))
}

/// Runs every battery at the given scale; results are deterministic in `seed`.
pub fn run_suite(scale: SuiteScale, seed: u64) -> SuiteReport {
    let n = scale.samples();
    let checks = vec![
        run_statistical("noise/convolution-preorder", seed, 0, |rng| {
            convolution_preorder_check(n, rng)
        }),
        run_exact("noise/laplace-weights-normalized", seed, 10, |rng| {
            laplace_weights_check(rng)
        }),
        run_exact("noise/poisson-conditional-pmf", seed, 20, |_| {
            poisson_pmf_check()
        }),
        run_exact("noise/truncated-gaussian-interval", seed, 30, |rng| {
            truncated_interval_check(n / 5, rng)
        }),
        run_exact("noise/laplace-convolution-normalized", seed, 40, |rng| {
            conv_density_check(rng)
        }),
        run_statistical("ledger/marginal-correctness", seed, 50, |rng| {
            ledger_marginals_check(n, rng)
        }),
        run_statistical("ledger/gaussian-difference-structure", seed, 60, |rng| {
            gaussian_difference_check(n, rng)
        }),
        run_statistical("ledger/order-invariance", seed, 70, |rng| {
            order_invariance_check(n, rng)
        }),
        run_exact("ledger/entry-growth", seed, 80, entry_growth_check),
        run_exact("ledger/one-sided-monotonicity", seed, 90, one_sided_monotonicity_check),
        run_statistical("hist/naive-noise-variance", seed, 100, |rng| {
            naive_variance_check(n, rng)
        }),
        run_exact("hist/draw-counter", seed, 110, draw_counter_check),
        run_statistical("hist/crossing-telescoping", seed, 120, |rng| {
            telescoping_check(n, rng)
        }),
        run_statistical("hist/efficient-matches-naive", seed, 130, |rng| {
            hist_equivalence_check(scale.hist_trials(), rng)
        }),
        run_exact("account/compose-algebra", seed, 140, |rng| {
            compose_algebra_check(rng)
        }),
        run_exact("account/poisson-epsilon-monotonicity", seed, 150, |_| {
            accountant_monotonicity_check()
        }),
        run_statistical("fact/prefix-sum-recovery", seed, 160, |rng| {
            factorization_recovery_check(n / 4, rng)
        }),
        run_statistical("fact/release-marginals", seed, 170, |rng| {
            factorization_marginals_check(n, rng)
        }),
        run_exact("experiment/deterministic-csv", seed, 180, |_| {
            experiment_determinism_check(seed)
        }),
    ];

    SuiteReport { checks }
}

fn convolution_preorder_check(n: usize, rng: &mut ChaCha12Rng) -> Result<(bool, String)> {
    let mut worst: f64 = 1.0;
    let mut detail = String::new();
    for pair in 0..5 {
        let rho_lo = 0.2 + 0.8 * rng.random::<f64>();
        let rho_hi = rho_lo * (1.5 + 3.0 * rng.random::<f64>());

        // Gaussian: sharper release plus a zero-mean top-up.
        let bridge_sd = (0.5 * (1.0 / rho_lo - 1.0 / rho_hi)).sqrt();
        let mut composed: Vec<f64> = (0..n)
            .map(|_| {
                Mechanism::Gaussian.sample_fresh(rho_hi, 1.0, rng).unwrap()
                    + bridge_sd * standard_normal(rng)
            })
            .collect();
        let mut fresh: Vec<f64> = (0..n)
            .map(|_| Mechanism::Gaussian.sample_fresh(rho_lo, 1.0, rng).unwrap())
            .collect();
        let test = ks_test_two_sample(&mut composed, &mut fresh)?;
        worst = worst.min(test.p_value);

        // Laplace: scales grow as budgets shrink.
        let (b_from, b_to) = (1.0 / rho_hi, 1.0 / rho_lo);
        let mut composed: Vec<f64> = (0..n)
            .map(|_| {
                Ok(sample_laplace(b_from, rng) + sample_laplace_bridge(b_from, b_to, rng)?)
            })
            .collect::<Result<_>>()?;
        let mut fresh: Vec<f64> = (0..n).map(|_| sample_laplace(b_to, rng)).collect();
        let test = ks_test_two_sample(&mut composed, &mut fresh)?;
        worst = worst.min(test.p_value);

        // Exponential: rates equal budgets.
        let mut composed: Vec<f64> = (0..n)
            .map(|_| {
                Ok(sample_exponential(rho_hi, rng)?
                    + sample_exponential_bridge(rho_hi, rho_lo, rng)?)
            })
            .collect::<Result<_>>()?;
        let mut fresh: Vec<f64> = (0..n)
            .map(|_| sample_exponential(rho_lo, rng))
            .collect::<Result<_>>()?;
        let test = ks_test_two_sample(&mut composed, &mut fresh)?;
        worst = worst.min(test.p_value);

        // Poisson: means equal inverse budgets; compare binned counts.
        let (l_from, l_to) = (1.0 / rho_hi, 1.0 / rho_lo);
        let composed: Vec<u64> = (0..n)
            .map(|_| Ok(sample_poisson(l_from, rng)? + sample_poisson_bridge(l_from, l_to, rng)?))
            .collect::<Result<_>>()?;
        let fresh: Vec<u64> = (0..n).map(|_| sample_poisson(l_to, rng)).collect::<Result<_>>()?;
        let hi = *composed.iter().chain(fresh.iter()).max().unwrap() as usize;
        let mut ca = vec![0u64; hi + 1];
        let mut cb = vec![0u64; hi + 1];
        for &v in &composed {
            ca[v as usize] += 1;
        }
        for &v in &fresh {
            cb[v as usize] += 1;
        }
        let test = chi_square_two_sample(&ca, &cb)?;
        worst = worst.min(test.p_value);
        if pair == 0 {
            detail = format!("5 pairs x 4 families, N = {n}");
        }
    }
    Ok((worst > ALPHA, format!("{detail}, min p = {worst:.4}")))
}

fn laplace_weights_check(rng: &mut ChaCha12Rng) -> Result<(bool, String)> {
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let b_lo = 0.2 + 2.0 * rng.random::<f64>();
        let b = b_lo * (1.0 + rng.random::<f64>());
        let b_hi = b * (1.0 + rng.random::<f64>());
        let k = 6.0 * b_hi * (rng.random::<f64>() - 0.5);
        let w = laplace_conditional_weights(b_lo, b, b_hi, k)?;
        worst = worst.max((w.p_zero + w.p_jump + w.p_smooth - 1.0).abs());
    }
    Ok((worst <= 1e-9, format!("max |sum - 1| = {worst:.2e} over 1000 draws")))
}

fn poisson_pmf_check() -> Result<(bool, String)> {
    // Exact joint enumeration: the conditional mass of the sharper component
    // at w given a total of n is proportional to Poi(l_mid - l_lo)(w) times
    // Poi(l_hi - l_mid)(n - w).
    let lambdas = [0.5, 1.0, 2.0, 5.0];
    let fractions = [0.3, 0.5, 0.8];
    let mut worst: f64 = 0.0;
    for &l_lo in &lambdas {
        for &l_hi in &lambdas {
            if l_hi <= l_lo {
                continue;
            }
            for &f in &fractions {
            let l_mid = l_lo + f * (l_hi - l_lo);
            for n in 0..=12u64 {
                let mut masses = Vec::with_capacity(n as usize + 1);
                for w in 0..=n {
                    let a = poisson_mass(l_mid - l_lo, w);
                    let b = poisson_mass(l_hi - l_mid, n - w);
                    masses.push(a * b);
                }
                let total: f64 = masses.iter().sum();
                for w in 0..=n {
                    let expected = masses[w as usize] / total;
                    let got = poisson_conditional_pmf(l_lo, l_mid, l_hi, n, w)?;
                    worst = worst.max((got - expected).abs());
                }
            }
            }
        }
    }
    Ok((worst < 1e-12, format!("max abs pmf error = {worst:.2e}")))
}

fn poisson_mass(lambda: f64, k: u64) -> f64 {
    let mut log = -lambda + k as f64 * lambda.ln();
    for i in 1..=k {
        log -= (i as f64).ln();
    }
    log.exp()
}

fn truncated_interval_check(n: usize, rng: &mut ChaCha12Rng) -> Result<(bool, String)> {
    let intervals = [
        (-1.0, 2.5),
        (2.0, f64::INFINITY),
        (-0.3, 0.1),
        (8.0, 9.0),
        (f64::NEG_INFINITY, -8.0),
    ];
    for &(lo, hi) in &intervals {
        for _ in 0..n {
            let z = sample_truncated_gaussian(0.0, 1.0, lo, hi, rng)?;
            if !(z > lo && z <= hi) {
                return Ok((false, format!("sample {z} escaped ({lo}, {hi}]")));
            }
        }
    }
    Ok((true, format!("{} samples across {} intervals in range", n * intervals.len(), intervals.len())))
}

fn conv_density_check(rng: &mut ChaCha12Rng) -> Result<(bool, String)> {
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let b1 = 0.3 + 2.0 * rng.random::<f64>();
        let b2 = b1 * (1.15 + 2.0 * rng.random::<f64>());
        let span = 50.0 * b2;
        let f = |t: f64| laplace_conv_density(t, b1, b2);
        let mass = adaptive_simpson(&f, -span, 0.0, 1e-9) + adaptive_simpson(&f, 0.0, span, 1e-9);
        worst = worst.max((mass - 1.0).abs());
    }
    Ok((worst <= 1e-6, format!("max |integral - 1| = {worst:.2e} over 20 scale pairs")))
}

fn ledger_marginals_check(n: usize, rng: &mut ChaCha12Rng) -> Result<(bool, String)> {
    let mut worst: f64 = 1.0;
    let mut worst_at = String::new();
    for mechanism in Mechanism::ALL {
        let mut rhos: Vec<f64> = (0..5).map(|_| 0.15 + 1.8 * rng.random::<f64>()).collect();
        rhos.shuffle(rng);
        let secret = if mechanism == Mechanism::Poisson { 3.0 } else { 0.7 };
        let cap = rhos.iter().cloned().fold(0.0, f64::max) * 1.5;
        let mut per_rho: Vec<Vec<f64>> = vec![Vec::with_capacity(n); rhos.len()];
        for _ in 0..n {
            let mut ledger = if mechanism == Mechanism::Gaussian {
                Ledger::new_unbounded(mechanism, 1.0, vec![secret])?
            } else {
                Ledger::new_bounded(mechanism, 1.0, cap, vec![secret], rng)?
            };
            for (i, &rho) in rhos.iter().enumerate() {
                per_rho[i].push(ledger.release_scalar(rho, rng)?);
            }
        }
        for (i, &rho) in rhos.iter().enumerate() {
            let p = if mechanism == Mechanism::Poisson {
                let noise: Vec<u64> = per_rho[i].iter().map(|y| (y - secret) as u64).collect();
                let fresh: Vec<u64> = (0..n)
                    .map(|_| sample_poisson(1.0 / rho, rng))
                    .collect::<Result<_>>()?;
                let hi = *noise.iter().chain(fresh.iter()).max().unwrap() as usize;
                let mut ca = vec![0u64; hi + 1];
                let mut cb = vec![0u64; hi + 1];
                for &v in &noise {
                    ca[v as usize] += 1;
                }
                for &v in &fresh {
                    cb[v as usize] += 1;
                }
                chi_square_two_sample(&ca, &cb)?.p_value
            } else {
                let mut fresh: Vec<f64> = (0..n)
                    .map(|_| Ok(secret + mechanism.sample_fresh(rho, 1.0, rng)?))
                    .collect::<Result<_>>()?;
                ks_test_two_sample(&mut per_rho[i], &mut fresh)?.p_value
            };
            if p < worst {
                worst = p;
                worst_at = format!("{mechanism} at rho = {rho:.3} (release {} of 5)", i + 1);
            }
        }
    }
    Ok((
        worst > ALPHA,
        format!("4 mechanisms x 5 budgets, N = {n}, min p = {worst:.4} ({worst_at})"),
    ))
}

fn gaussian_difference_check(n: usize, rng: &mut ChaCha12Rng) -> Result<(bool, String)> {
    let (rho, rho_hi): (f64, f64) = (0.6, 1.7);
    let sd = (0.5 * (1.0 / rho - 1.0 / rho_hi)).sqrt();
    let mut diffs = Vec::with_capacity(n);
    for _ in 0..n {
        let mut ledger = Ledger::new_unbounded(Mechanism::Gaussian, 1.0, vec![0.0])?;
        let upper = ledger.release_scalar(rho_hi, rng)?;
        let lower = ledger.release_scalar(rho, rng)?;
        diffs.push(lower - upper);
    }
    let test = ks_test_one_sample(&mut diffs, |x| normal_cdf(x / sd))?;
    Ok((
        test.p_value > ALPHA,
        format!("Y_rho - Y_rho' vs N(0, {:.4}), p = {:.4}", sd * sd, test.p_value),
    ))
}

fn order_invariance_check(n: usize, rng: &mut ChaCha12Rng) -> Result<(bool, String)> {
    let budgets = [0.5, 1.2, 3.1];
    let orders = [[1usize, 0, 2], [2, 1, 0]];
    let mut accs = Vec::new();
    for order in orders {
        let mut acc = CovarianceAccumulator::new(3);
        for _ in 0..n {
            let mut ledger = Ledger::new_unbounded(Mechanism::Gaussian, 1.0, vec![0.0])?;
            let mut row = [0.0; 3];
            for &i in &order {
                row[i] = ledger.release_scalar(budgets[i], rng)?;
            }
            acc.push(&row);
        }
        accs.push(acc);
    }
    let mut worst = 0.0f64;
    for i in 0..3 {
        for j in 0..3 {
            let a = accs[0].covariance(i, j);
            let b = accs[1].covariance(i, j);
            let var = (accs[0].covariance(i, i) * accs[0].covariance(j, j) + a * a) / n as f64;
            let z = (a - b).abs() / (2.0 * var).sqrt();
            worst = worst.max(z);
        }
    }
    Ok((worst < 5.0, format!("max |z| between orderings = {worst:.2}")))
}

fn entry_growth_check(rng: &mut ChaCha12Rng) -> Result<(bool, String)> {
    let mut ledger = Ledger::new_unbounded(Mechanism::Gaussian, 1.0, vec![0.0])?;
    let requests = [0.9, 0.3, 0.9, 2.0, 0.3, 1.4];
    let mut expected = 0usize;
    let mut seen: Vec<f64> = Vec::new();
    for &rho in &requests {
        ledger.release_scalar(rho, rng)?;
        if !seen.contains(&rho) {
            seen.push(rho);
            expected += 1;
        }
        if ledger.entries().len() != expected {
            return Ok((
                false,
                format!("after rho = {rho}: {} entries, expected {expected}", ledger.entries().len()),
            ));
        }
    }
    let mut bounded = Ledger::new_bounded(Mechanism::Laplace, 1.0, 5.0, vec![0.0], rng)?;
    let before = bounded.entries().len();
    bounded.release_scalar(1.0, rng)?;
    bounded.release_scalar(1.0, rng)?;
    let grown = bounded.entries().len() - before;
    Ok((grown == 1, format!("novel budgets grow entries by one, repeats by zero (grew {grown})")))
}

fn one_sided_monotonicity_check(rng: &mut ChaCha12Rng) -> Result<(bool, String)> {
    for mechanism in [Mechanism::Poisson, Mechanism::Exponential] {
        let secret = if mechanism == Mechanism::Poisson { 4.0 } else { 0.5 };
        for _ in 0..200 {
            let mut rhos: Vec<f64> = (0..6).map(|_| 0.2 + 2.0 * rng.random::<f64>()).collect();
            let mut ledger = Ledger::new_bounded(mechanism, 1.0, 4.0, vec![secret], rng)?;
            rhos.shuffle(rng);
            let mut pairs: Vec<(f64, f64)> = Vec::new();
            for &rho in &rhos {
                pairs.push((rho, ledger.release_scalar(rho, rng)?));
            }
            pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
            for w in pairs.windows(2) {
                if w[1].1 > w[0].1 + 1e-12 {
                    return Ok((
                        false,
                        format!(
                            "{mechanism}: value rose from {} to {} as rho rose {} -> {}",
                            w[0].1, w[1].1, w[0].0, w[1].0
                        ),
                    ));
                }
            }
        }
    }
    Ok((true, "noisier releases dominate sharper ones in 400 runs".into()))
}

fn naive_variance_check(n: usize, rng: &mut ChaCha12Rng) -> Result<(bool, String)> {
    let d = 40;
    let hist = Histogram::new(d, [])?;
    let budgets = [0.3, 1.0, 3.0];
    let trials = (n / d).max(500);
    let mut per_round = vec![RunningMoments::new(); budgets.len()];
    for _ in 0..trials {
        let mut naive = NaiveHistogramRelease::new(&hist, 1.0)?;
        for (r, &rho) in budgets.iter().enumerate() {
            let out = naive.release(rho, f64::NEG_INFINITY, rng)?;
            for y in out {
                per_round[r].push(y);
            }
        }
    }
    let mut worst = 0.0f64;
    for (r, &rho) in budgets.iter().enumerate() {
        let expect = 1.0 / (2.0 * rho);
        worst = worst.max((per_round[r].variance() / expect - 1.0).abs());
    }
    let tol = (5.0 * (2.0 / (trials * d) as f64).sqrt()).max(0.01);
    Ok((worst <= tol, format!("max variance error {worst:.4} (tolerance {tol:.4}) at {trials} trials")))
}

fn draw_counter_check(rng: &mut ChaCha12Rng) -> Result<(bool, String)> {
    let hist = Histogram::new(60, [(0, 9.0), (7, 8.0), (21, 7.0), (44, 6.0)])?;
    for _ in 0..200 {
        let mut eff = EfficientHistogramRelease::new(hist.clone(), 1.0)?;
        for (rho, tau) in [(0.3, 3.0), (1.0, 2.0), (3.0, 1.5)] {
            let out = eff.release(rho, tau, rng)?;
            if !out.iter().all(|(_, y)| *y > tau) {
                return Ok((false, "released value at or below threshold".into()));
            }
        }
        let expected = eff.tracked_count() as u64 * 3;
        if eff.gaussian_draws() != expected {
            return Ok((
                false,
                format!("{} draws, expected {expected}", eff.gaussian_draws()),
            ));
        }
    }
    Ok((true, "draws = (k + c) m exactly in 200 runs".into()))
}

fn telescoping_check(n: usize, rng: &mut ChaCha12Rng) -> Result<(bool, String)> {
    let budgets = [0.3, 1.0, 3.0];
    let thresholds = [3.0, 2.0, 1.5];
    let mut survive = 1.0;
    let mut p_any = 0.0;
    for r in 1..=3 {
        let p = crossing_probability(r, &budgets, &thresholds, 1.0)?;
        p_any += survive * p;
        survive *= 1.0 - p;
    }
    let mut crossed = 0u64;
    for _ in 0..n {
        let mut t = 0.0;
        let mut prev = 0.0;
        for (r, &rho) in budgets.iter().enumerate() {
            t += increment(1.0, prev, rho) * standard_normal(rng);
            prev = rho;
            if t > rho * thresholds[r] {
                crossed += 1;
                break;
            }
        }
    }
    let hat = crossed as f64 / n as f64;
    let se = (p_any * (1.0 - p_any) / n as f64).sqrt();
    let z = (hat - p_any).abs() / se;
    Ok((
        z <= 3.0,
        format!("chained p = {p_any:.5}, MC = {hat:.5} (z = {z:.2}, N = {n})"),
    ))
}

fn increment(delta: f64, rho_prev: f64, rho: f64) -> f64 {
    (0.5 * delta * delta * (rho - rho_prev)).sqrt()
}

fn hist_equivalence_check(trials: usize, rng: &mut ChaCha12Rng) -> Result<(bool, String)> {
    let d = 100;
    let hist = Histogram::new(
        d,
        [(4, 9.0), (17, 7.0), (33, 5.0), (58, 4.0), (91, 3.0)],
    )?;
    let budgets = [0.3, 1.0, 3.0];
    let thresholds = [3.0, 2.0, 1.5];
    let support: Vec<usize> = hist.nonzeros().map(|(i, _)| i).collect();
    let rounds = budgets.len();

    let mut naive_zero = vec![Vec::new(); rounds];
    let mut eff_zero = vec![Vec::new(); rounds];
    let mut naive_support = vec![Vec::new(); rounds];
    let mut eff_support = vec![Vec::new(); rounds];
    let mut naive_counts = vec![Vec::new(); rounds];
    let mut eff_counts = vec![Vec::new(); rounds];

    for _ in 0..trials {
        let mut naive = NaiveHistogramRelease::new(&hist, 1.0)?;
        let mut eff = EfficientHistogramRelease::new(hist.clone(), 1.0)?;
        for r in 0..rounds {
            let dense = naive.release(budgets[r], thresholds[r], rng)?;
            let sparse = eff.release(budgets[r], thresholds[r], rng)?;
            let mut count = 0u64;
            for (i, &y) in dense.iter().enumerate() {
                if y != 0.0 {
                    count += 1;
                    if support.contains(&i) {
                        naive_support[r].push(y);
                    } else {
                        naive_zero[r].push(y);
                    }
                }
            }
            naive_counts[r].push(count);
            eff_counts[r].push(sparse.len() as u64);
            for &(i, y) in &sparse {
                if support.contains(&i) {
                    eff_support[r].push(y);
                } else {
                    eff_zero[r].push(y);
                }
            }
        }
        let expected = eff.tracked_count() as u64 * rounds as u64;
        if eff.gaussian_draws() != expected {
            return Ok((
                false,
                format!("draw counter {} != {expected}", eff.gaussian_draws()),
            ));
        }
    }

    let mut worst: f64 = 1.0;
    for r in 0..rounds {
        let hi = *naive_counts[r]
            .iter()
            .chain(eff_counts[r].iter())
            .max()
            .unwrap() as usize;
        let mut ca = vec![0u64; hi + 1];
        let mut cb = vec![0u64; hi + 1];
        for &c in &naive_counts[r] {
            ca[c as usize] += 1;
        }
        for &c in &eff_counts[r] {
            cb[c as usize] += 1;
        }
        worst = worst.min(chi_square_two_sample(&ca, &cb)?.p_value);
        worst = worst.min(
            ks_test_two_sample(&mut naive_support[r], &mut eff_support[r])?.p_value,
        );
        if naive_zero[r].len() >= 8 && eff_zero[r].len() >= 8 {
            worst = worst.min(ks_test_two_sample(&mut naive_zero[r], &mut eff_zero[r])?.p_value);
        }
    }
    Ok((
        worst > ALPHA,
        format!("{trials} trials, per-round class tests, min p = {worst:.4}"),
    ))
}

fn compose_algebra_check(rng: &mut ChaCha12Rng) -> Result<(bool, String)> {
    for _ in 0..200 {
        let k = 2 + (rng.random::<u64>() % 5) as usize;
        let mut budgets: Vec<f64> = (0..k).map(|_| 0.05 + 3.0 * rng.random::<f64>()).collect();
        let total = zcdp_compose(&budgets)?;
        let max = multiple_release_budget(&budgets)?;
        budgets.shuffle(rng);
        let total_shuffled = zcdp_compose(&budgets)?;
        if (total - total_shuffled).abs() > 1e-12 * total {
            return Ok((false, "composition is order-dependent".into()));
        }
        if max > total {
            return Ok((false, format!("max {max} exceeds sum {total}")));
        }
        let (a, rest) = budgets.split_first().unwrap();
        let nested = zcdp_compose(&[*a, zcdp_compose(rest)?])?;
        if (nested - total).abs() > 1e-12 * total {
            return Ok((false, "composition is not associative".into()));
        }
    }
    Ok((true, "compose associative/commutative; max <= sum on 200 random sets".into()))
}

fn accountant_monotonicity_check() -> Result<(bool, String)> {
    let delta = 1e-6;
    let mut prev = f64::INFINITY;
    for lam in [400.0, 800.0, 1600.0, 3200.0, 6400.0] {
        let eps = poisson_epsilon(lam, delta, 1, Sensitivities::UNIT)?;
        if eps >= prev {
            return Ok((false, format!("epsilon rose from {prev} at lambda = {lam}")));
        }
        prev = eps;
    }
    let mut prev = 0.0;
    for d in [1u64, 10, 100, 10_000] {
        let eps = poisson_epsilon(2000.0, delta, d, Sensitivities::UNIT)?;
        if eps <= prev {
            return Ok((false, format!("epsilon fell to {eps} at d = {d}")));
        }
        prev = eps;
    }
    Ok((true, "epsilon decreasing in lambda, increasing in d".into()))
}

fn factorization_recovery_check(n: usize, rng: &mut ChaCha12Rng) -> Result<(bool, String)> {
    let query = prefix_sum_query(8)?;
    let inverse = query.left_inverse()?;
    let data: Vec<f64> = (0..8).map(|i| (i as f64) - 3.0).collect();
    let budgets = [1.0, 0.1, 5.0];
    let exact = query.workload() * nalgebra::DVector::from_vec(data.clone());
    let mut acc = CovarianceAccumulator::new(3);
    for _ in 0..n {
        let mut fact = FactorizedLedger::new(query.clone(), &data)?;
        let mut row = [0.0; 3];
        for (i, &rho) in budgets.iter().enumerate() {
            let y = nalgebra::DVector::from_vec(fact.release(rho, rng)?);
            let z = &inverse * (y - &exact);
            row[i] = z[3];
        }
        acc.push(&row);
    }
    let mut worst = 0.0f64;
    for i in 0..3 {
        for j in i..3 {
            let expect = 1.0 / (2.0 * budgets[i].max(budgets[j]));
            let got = acc.covariance(i, j);
            let var = (acc.covariance(i, i) * acc.covariance(j, j) + got * got) / n as f64;
            let z = (got - expect).abs() / var.sqrt();
            worst = worst.max(z);
        }
    }
    Ok((
        worst < 5.0,
        format!("recovered-stream covariance max |z| = {worst:.2} at N = {n}"),
    ))
}

fn factorization_marginals_check(n: usize, rng: &mut ChaCha12Rng) -> Result<(bool, String)> {
    let query = prefix_sum_query(4)?;
    let data = vec![1.0, -0.5, 2.0, 0.25];
    let exact = query.workload() * nalgebra::DVector::from_vec(data.clone());
    let rho = 0.8;
    let mut samples: Vec<Vec<f64>> = (0..4).map(|_| Vec::with_capacity(n)).collect();
    for _ in 0..n {
        let mut fact = FactorizedLedger::new(query.clone(), &data)?;
        let y = fact.release(rho, rng)?;
        for i in 0..4 {
            samples[i].push(y[i]);
        }
    }
    let mut worst: f64 = 1.0;
    for i in 0..4 {
        let sd = ((i as f64 + 1.0) / (2.0 * rho)).sqrt();
        let mean = exact[i];
        let test = ks_test_one_sample(&mut samples[i], |x| normal_cdf((x - mean) / sd))?;
        worst = worst.min(test.p_value);
    }
    Ok((
        worst > ALPHA,
        format!("per-coordinate KS vs N((Ax)_i, (LL^T)_ii/(2 rho)), min p = {worst:.4}"),
    ))
}

fn experiment_determinism_check(seed: u64) -> Result<(bool, String)> {
    let grid = log_grid(0.01, 1.0, 4)?;
    let a = compare_protocols(&grid, 1.0, 3000, seed)?;
    let b = compare_protocols(&grid, 1.0, 3000, seed)?;
    let mut csv_a = Vec::new();
    let mut csv_b = Vec::new();
    write_csv(&a, &mut csv_a)?;
    write_csv(&b, &mut csv_b)?;
    if csv_a != csv_b {
        return Ok((false, "identical seeds produced different CSV bytes".into()));
    }
    let single = compare_protocols(&[0.7], 1.0, 2000, seed)?;
    let coincide =
        (single[0].theoretical_variance - single[1].theoretical_variance).abs() < 1e-15;
    Ok((
        coincide,
        "byte-identical CSV across repeat runs; single-point grid modes coincide".into(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quick_suite_passes() {
        let report = run_suite(SuiteScale::Quick, 11);
        for check in &report.checks {
            assert!(check.passed, "{}: {}", check.name, check.detail);
        }
        assert_eq!(report.checks.len(), 19);
        assert!(report.all_passed());
    }

    #[test]
    #[ignore = "full-scale batteries, run on demand with --ignored"]
    fn full_suite_passes() {
        let report = run_suite(SuiteScale::Full, 11);
        for check in &report.checks {
            assert!(check.passed, "{}: {}", check.name, check.detail);
        }
    }
}

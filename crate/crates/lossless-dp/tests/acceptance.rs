//! Acceptance gate: ten end-to-end criteria, one test per criterion.
//!
//! Every test prints one `[criterion N] PASS/FAIL` line with the measured
//! numbers (visible with `--nocapture`) and asserts the same condition, so
//! the per-test summary `cargo test --test acceptance` prints is itself one
//! pass/fail line per criterion. Seeds are fixed; every run sees identical
//! data.

// Frozen reference constants keep every digit they were computed with.
#![allow(clippy::excessive_precision)]

use lossless_dp::account::{poisson_epsilon, poisson_epsilon_unit, Sensitivities};
use lossless_dp::error::Error;
use lossless_dp::experiment::{compare_protocols, log_grid, Mode};
use lossless_dp::factorization::{prefix_sum_query, FactorizedLedger};
use lossless_dp::hist::{
    crossing_probability, EfficientHistogramRelease, Histogram, NaiveHistogramRelease,
};
use lossless_dp::noise::{
    laplace_conditional_weights, poisson_conditional_pmf, sample_exponential,
    sample_exponential_bridge, sample_laplace, sample_laplace_bridge, sample_poisson,
    sample_poisson_bridge, standard_normal, Mechanism,
};
use lossless_dp::rng::substream;
use lossless_dp::stats::{
    chi_square_two_sample, ks_test_one_sample, ks_test_two_sample, CovarianceAccumulator,
    RunningMoments,
};
use lossless_dp::Ledger;
use rand::Rng;

const BUDGETS: [f64; 3] = [0.3, 1.0, 3.0];
const THRESHOLDS: [f64; 3] = [3.0, 2.0, 1.5];

fn verdict(criterion: u32, passed: bool, detail: &str) {
    let status = if passed { "PASS" } else { "FAIL" };
    println!("[criterion {criterion}] {status}: {detail}");
    assert!(passed, "[criterion {criterion}] {status}: {detail}");
}

fn chi_square_counts(a: &[u64], b: &[u64]) -> f64 {
    let hi = *a.iter().chain(b.iter()).max().unwrap() as usize;
    let mut ca = vec![0u64; hi + 1];
    let mut cb = vec![0u64; hi + 1];
    for &v in a {
        ca[v as usize] += 1;
    }
    for &v in b {
        cb[v as usize] += 1;
    }
    chi_square_two_sample(&ca, &cb).unwrap().p_value
}

#[test]
fn criterion_01_gaussian_marginal_variance() {
    let mut rng = substream(101, 0);
    let order = [1.0, 0.1, 5.0];
    let n = 1_000_000;
    let mut moments = [RunningMoments::new(), RunningMoments::new(), RunningMoments::new()];
    for _ in 0..n {
        let mut ledger = Ledger::new_unbounded(Mechanism::Gaussian, 1.0, vec![0.0]).unwrap();
        for (slot, &rho) in moments.iter_mut().zip(&order) {
            slot.push(ledger.release_scalar(rho, &mut rng).unwrap());
        }
    }
    let mut worst = 0.0f64;
    for (slot, &rho) in moments.iter().zip(&order) {
        let expect = 1.0 / (2.0 * rho);
        worst = worst.max((slot.variance() / expect - 1.0).abs());
    }
    verdict(
        1,
        worst <= 0.01,
        &format!("marginal variances for rho requested as (1, 0.1, 5), max relative error {worst:.5} (limit 0.01) at {n} trials"),
    );
}

#[test]
fn criterion_02_covariance_law() {
    let mut rng = substream(102, 0);
    let order = [1.0, 0.1, 5.0];
    let n = 100_000;
    let mut acc = CovarianceAccumulator::new(3);
    for _ in 0..n {
        let mut ledger = Ledger::new_unbounded(Mechanism::Gaussian, 1.0, vec![0.0]).unwrap();
        let mut row = [0.0; 3];
        for (slot, &rho) in row.iter_mut().zip(&order) {
            *slot = ledger.release_scalar(rho, &mut rng).unwrap();
        }
        acc.push(&row);
    }
    let mut worst = 0.0f64;
    for i in 0..3 {
        for j in 0..3 {
            let expect = 1.0 / (2.0 * order[i].max(order[j]));
            let var = (1.0 / (4.0 * order[i] * order[j]) + expect * expect) / n as f64;
            let z = (acc.covariance(i, j) - expect).abs() / var.sqrt();
            worst = worst.max(z);
        }
    }
    verdict(
        2,
        worst <= 4.0,
        &format!("3x3 covariance vs 1/(2 max(rho_i, rho_j)), max |z| = {worst:.2} (limit 4) at {n} trials"),
    );
}

#[test]
fn criterion_03_bridge_identities() {
    let mut rng = substream(103, 0);
    let n = 100_000;
    // 60 tests at alpha = 0.01 reject a correct identity for ~45% of seeds,
    // so a rejecting pair is redrawn once from an independent substream and
    // fails only if both draws reject (per-pair false positive ~1e-4).
    let mut min_p = 1.0f64;
    let mut confirmed_failures = 0u32;
    let mut redraws = 0u32;
    let mut pair_index = 0u64;

    let laplace_p = |b_from: f64, b_to: f64, rng: &mut rand_chacha::ChaCha12Rng| {
        let mut composed: Vec<f64> = (0..n)
            .map(|_| {
                sample_laplace(b_from, rng) + sample_laplace_bridge(b_from, b_to, rng).unwrap()
            })
            .collect();
        let mut fresh: Vec<f64> = (0..n).map(|_| sample_laplace(b_to, rng)).collect();
        ks_test_two_sample(&mut composed, &mut fresh).unwrap().p_value
    };
    let poisson_p = |l_from: f64, l_to: f64, rng: &mut rand_chacha::ChaCha12Rng| {
        let composed: Vec<u64> = (0..n)
            .map(|_| {
                sample_poisson(l_from, rng).unwrap()
                    + sample_poisson_bridge(l_from, l_to, rng).unwrap()
            })
            .collect();
        let fresh: Vec<u64> = (0..n).map(|_| sample_poisson(l_to, rng).unwrap()).collect();
        chi_square_counts(&composed, &fresh)
    };
    let exponential_p = |r_from: f64, r_to: f64, rng: &mut rand_chacha::ChaCha12Rng| {
        let mut composed: Vec<f64> = (0..n)
            .map(|_| {
                sample_exponential(r_from, rng).unwrap()
                    + sample_exponential_bridge(r_from, r_to, rng).unwrap()
            })
            .collect();
        let mut fresh: Vec<f64> = (0..n)
            .map(|_| sample_exponential(r_to, rng).unwrap())
            .collect();
        ks_test_two_sample(&mut composed, &mut fresh).unwrap().p_value
    };

    for family in 0..3 {
        for _ in 0..20 {
            let (from, to) = match family {
                0 | 1 => {
                    let from = 0.3 + 1.7 * rng.random::<f64>();
                    (from, from * (1.2 + 1.8 * rng.random::<f64>()))
                }
                _ => {
                    let from = 0.5 + 2.5 * rng.random::<f64>();
                    (from, from / (1.2 + 1.8 * rng.random::<f64>()))
                }
            };
            pair_index += 1;
            let mut p = 0.0;
            for attempt in 0..2u64 {
                let mut draw_rng = substream(103, 100 * (attempt + 1) + pair_index);
                p = match family {
                    0 => laplace_p(from, to, &mut draw_rng),
                    1 => poisson_p(from, to, &mut draw_rng),
                    _ => exponential_p(from, to, &mut draw_rng),
                };
                if p > 0.01 {
                    break;
                }
                if attempt == 0 {
                    redraws += 1;
                } else {
                    confirmed_failures += 1;
                }
            }
            min_p = min_p.min(p);
        }
    }
    verdict(
        3,
        confirmed_failures == 0,
        &format!("laplace/poisson/exponential bridge identities, 20 random pairs each, N = {n}: {confirmed_failures} confirmed rejections at alpha 0.01 ({redraws} of 60 pairs redrawn once, final min p = {min_p:.4})"),
    );
}

#[test]
fn criterion_04_laplace_end_to_end() {
    let mut rng = substream(104, 0);
    let n = 100_000;
    // Scales b in {1, 2, 4) are budgets rho = 1, 0.5, 0.25; requesting the
    // middle scale last forces the interior conditional sampler.
    let order = [1.0, 0.25, 0.5];
    let mut per_rho: Vec<Vec<f64>> = (0..3).map(|_| Vec::with_capacity(n)).collect();
    for _ in 0..n {
        let mut ledger =
            Ledger::new_bounded(Mechanism::Laplace, 1.0, 1.0, vec![0.0], &mut rng).unwrap();
        for (slot, &rho) in per_rho.iter_mut().zip(&order) {
            slot.push(ledger.release_scalar(rho, &mut rng).unwrap());
        }
    }
    let mut min_p = 1.0f64;
    for (values, &rho) in per_rho.iter_mut().zip(&order) {
        let b = 1.0 / rho;
        let cdf = move |x: f64| {
            if x < 0.0 {
                0.5 * (x / b).exp()
            } else {
                1.0 - 0.5 * (-x / b).exp()
            }
        };
        min_p = min_p.min(ks_test_one_sample(values, cdf).unwrap().p_value);
    }

    let mut worst_sum = 0.0f64;
    for _ in 0..1000 {
        let b_lo = 0.2 + 2.0 * rng.random::<f64>();
        let b = b_lo * (1.0 + rng.random::<f64>());
        let b_hi = b * (1.0 + rng.random::<f64>());
        let k = 8.0 * b_hi * (rng.random::<f64>() - 0.5);
        let w = laplace_conditional_weights(b_lo, b, b_hi, k).unwrap();
        worst_sum = worst_sum.max((w.p_zero + w.p_jump + w.p_smooth - 1.0).abs());
    }
    verdict(
        4,
        min_p > 0.01 && worst_sum <= 1e-9,
        &format!("laplace multiple release at b in {{1,2,4}}: per-marginal KS min p = {min_p:.4} at N = {n}; weight sums off by at most {worst_sum:.2e} on 1000 inputs (limit 1e-9)"),
    );
}

#[test]
fn criterion_05_poisson_conditional_pmf() {
    let increments = [0.5, 1.0, 2.0, 5.0];
    let mut worst = 0.0f64;
    for &inc_lo in &increments {
        for &inc_hi in &increments {
            let l_lo = 0.3;
            let l_mid = l_lo + inc_lo;
            let l_hi = l_mid + inc_hi;
            for n in 0..=12u64 {
                let mut masses = Vec::with_capacity(n as usize + 1);
                for w in 0..=n {
                    masses.push(poisson_mass(inc_lo, w) * poisson_mass(inc_hi, n - w));
                }
                let total: f64 = masses.iter().sum();
                for w in 0..=n {
                    let got = poisson_conditional_pmf(l_lo, l_mid, l_hi, n, w).unwrap();
                    worst = worst.max((got - masses[w as usize] / total).abs());
                }
            }
        }
    }
    verdict(
        5,
        worst < 1e-12,
        &format!("conditional pmf vs joint enumeration, k <= 12, 16 increment pairs, max abs error {worst:.2e} (limit 1e-12)"),
    );
}

fn poisson_mass(lambda: f64, k: u64) -> f64 {
    let mut log = -lambda + k as f64 * lambda.ln();
    for i in 1..=k {
        log -= (i as f64).ln();
    }
    log.exp()
}

#[test]
fn criterion_06_sparse_histogram_equivalence() {
    let mut rng = substream(106, 0);
    let trials = 10_000;
    let hist = Histogram::new(
        100,
        [(4, 9.0), (17, 7.0), (33, 5.0), (58, 4.0), (91, 3.0)],
    )
    .unwrap();
    let support: Vec<usize> = hist.nonzeros().map(|(i, _)| i).collect();
    let rounds = BUDGETS.len();

    let mut naive_zero = vec![Vec::new(); rounds];
    let mut eff_zero = vec![Vec::new(); rounds];
    let mut naive_support = vec![Vec::new(); rounds];
    let mut eff_support = vec![Vec::new(); rounds];
    let mut naive_counts = vec![Vec::new(); rounds];
    let mut eff_counts = vec![Vec::new(); rounds];
    let mut counter_exact = true;

    for _ in 0..trials {
        let mut naive = NaiveHistogramRelease::new(&hist, 1.0).unwrap();
        let mut eff = EfficientHistogramRelease::new(hist.clone(), 1.0).unwrap();
        for r in 0..rounds {
            let dense = naive.release(BUDGETS[r], THRESHOLDS[r], &mut rng).unwrap();
            let sparse = eff.release(BUDGETS[r], THRESHOLDS[r], &mut rng).unwrap();
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
        // k support coordinates plus c activated crossers, m draws each.
        counter_exact &= eff.gaussian_draws() == eff.tracked_count() as u64 * rounds as u64;
    }

    let mut min_p = 1.0f64;
    for r in 0..rounds {
        min_p = min_p.min(chi_square_counts(&naive_counts[r], &eff_counts[r]));
        min_p = min_p.min(
            ks_test_two_sample(&mut naive_support[r], &mut eff_support[r])
                .unwrap()
                .p_value,
        );
        min_p = min_p.min(
            ks_test_two_sample(&mut naive_zero[r], &mut eff_zero[r])
                .unwrap()
                .p_value,
        );
    }
    verdict(
        6,
        min_p > 0.01 && counter_exact,
        &format!("d=100, k=5, m=3 efficient vs naive over {trials} trials: per-round frequency and value tests min p = {min_p:.4} (alpha 0.01); draw counter == (k+c)m in every trial: {counter_exact}"),
    );
}

#[test]
fn criterion_07_variance_comparison() {
    let reps = 1_000_000;
    let grid20 = log_grid(0.001, 5.0, 20).unwrap();
    let grid40 = log_grid(0.001, 5.0, 40).unwrap();
    let points20 = compare_protocols(&grid20, 1.0, reps, 107).unwrap();
    let points40 = compare_protocols(&grid40, 1.0, reps, 207).unwrap();

    let mut worst_lossless = 0.0f64;
    let mut independent_strictly_larger = true;
    for (i, pair) in points20.chunks(2).enumerate() {
        let (lossless, independent) = (&pair[0], &pair[1]);
        assert_eq!(lossless.mode, Mode::Lossless);
        assert_eq!(independent.mode, Mode::Independent);
        let expect = 1.0 / (2.0 * lossless.rho);
        worst_lossless = worst_lossless.max((lossless.empirical_variance / expect - 1.0).abs());
        if i > 0 && independent.empirical_variance <= lossless.empirical_variance {
            independent_strictly_larger = false;
        }
    }
    let last20 = &points20[points20.len() - 1];
    let last40 = &points40[points40.len() - 1];
    assert_eq!(last20.mode, Mode::Independent);
    assert_eq!(last40.mode, Mode::Independent);
    let gap20 = last20.empirical_variance - points20[points20.len() - 2].empirical_variance;
    let gap40 = last40.empirical_variance - points40[points40.len() - 2].empirical_variance;
    let gap_grows = gap40 > gap20 && gap20 > 0.0;
    verdict(
        7,
        worst_lossless <= 0.01 && independent_strictly_larger && gap_grows,
        &format!("20-point log grid on [0.001, 5] at {reps} reps: lossless max relative variance error {worst_lossless:.5} (limit 0.01); independent strictly larger at every interior point: {independent_strictly_larger}; gap at rho=5 grows from {gap20:.4} to {gap40:.4} on a 40-point grid"),
    );
}

#[test]
fn criterion_08_factorized_stream_recovery() {
    let mut rng = substream(108, 0);
    let query = prefix_sum_query(8).unwrap();
    let inverse = query.left_inverse().unwrap();
    let data: Vec<f64> = (0..8).map(|i| (i as f64) * 0.5 - 2.0).collect();
    let exact = query.workload() * nalgebra::DVector::from_vec(data.clone());
    let order = [1.0, 0.1, 5.0];
    let n_var = 1_000_000;
    let n_cov = 100_000;

    let mut var_acc = vec![[RunningMoments::new(); 3]; 8];
    let mut cov_acc: Vec<CovarianceAccumulator> =
        (0..8).map(|_| CovarianceAccumulator::new(3)).collect();
    for trial in 0..n_var {
        let mut fact = FactorizedLedger::new(query.clone(), &data).unwrap();
        let mut rows = [[0.0; 3]; 8];
        for (j, &rho) in order.iter().enumerate() {
            let y = nalgebra::DVector::from_vec(fact.release(rho, &mut rng).unwrap());
            let z = &inverse * (y - &exact);
            for i in 0..8 {
                var_acc[i][j].push(z[i]);
                rows[i][j] = z[i];
            }
        }
        if trial < n_cov {
            for i in 0..8 {
                cov_acc[i].push(&rows[i]);
            }
        }
    }

    let mut worst_var = 0.0f64;
    for coord in &var_acc {
        for (slot, &rho) in coord.iter().zip(&order) {
            let expect = 1.0 / (2.0 * rho);
            worst_var = worst_var.max((slot.variance() / expect - 1.0).abs());
        }
    }
    let mut worst_z = 0.0f64;
    for acc in &cov_acc {
        for i in 0..3 {
            for j in 0..3 {
                let expect = 1.0 / (2.0 * order[i].max(order[j]));
                let var = (1.0 / (4.0 * order[i] * order[j]) + expect * expect) / n_cov as f64;
                let z = (acc.covariance(i, j) - expect).abs() / var.sqrt();
                worst_z = worst_z.max(z);
            }
        }
    }
    verdict(
        8,
        worst_var <= 0.01 && worst_z <= 4.0,
        &format!("8x8 prefix-sum releases mapped back through the left inverse: per-coordinate variance max relative error {worst_var:.5} at {n_var} trials (limit 0.01); covariance max |z| = {worst_z:.2} at {n_cov} trials (limit 4)"),
    );
}

#[test]
fn criterion_09_poisson_accountant() {
    let eps = poisson_epsilon_unit(1000.0, 1e-6, 1).unwrap();
    let against_worked = (eps - 0.709).abs();
    let against_recomputed = (eps - 0.709_493_288_502_827_68).abs();
    let full = poisson_epsilon(1000.0, 1e-6, 1, Sensitivities::UNIT).unwrap();
    let rejected = matches!(
        poisson_epsilon_unit(370.0, 1e-6, 1),
        Err(Error::PreconditionFailed { .. })
    );
    let barely_accepted = poisson_epsilon_unit(371.0, 1e-6, 1).is_ok();
    verdict(
        9,
        against_worked <= 1e-3
            && against_recomputed <= 1e-12
            && full.is_finite()
            && full > 0.0
            && rejected
            && barely_accepted,
        &format!("unit-sensitivity epsilon {eps:.6} vs worked 0.709 (|diff| = {against_worked:.2e}, limit 1e-3) and vs independent recomputation (|diff| = {against_recomputed:.2e}); lambda = 370 < 23 ln(10d/delta) rejected as a typed precondition failure: {rejected}"),
    );
}

#[test]
fn criterion_10_crossing_probability_oracle() {
    let mut rng = substream(110, 0);
    let n = 10_000_000u64;
    let sigmas: Vec<f64> = (0..3)
        .map(|k| {
            let prev = if k == 0 { 0.0 } else { BUDGETS[k - 1] };
            (0.5 * (BUDGETS[k] - prev)).sqrt()
        })
        .collect();
    let bounds: Vec<f64> = BUDGETS.iter().zip(&THRESHOLDS).map(|(r, t)| r * t).collect();

    let mut at_risk = [0u64; 3];
    let mut crossed = [0u64; 3];
    for _ in 0..n {
        let mut t = 0.0;
        for k in 0..3 {
            at_risk[k] += 1;
            t += sigmas[k] * standard_normal(&mut rng);
            if t > bounds[k] {
                crossed[k] += 1;
                break;
            }
        }
    }

    let mut worst_z = 0.0f64;
    let mut detail = String::new();
    for r in 1..=3 {
        let p = crossing_probability(r, &BUDGETS, &THRESHOLDS, 1.0).unwrap();
        let hat = crossed[r - 1] as f64 / at_risk[r - 1] as f64;
        let se = (p * (1.0 - p) / at_risk[r - 1] as f64).sqrt();
        let z = (hat - p).abs() / se;
        worst_z = worst_z.max(z);
        detail.push_str(&format!("p({r}) = {p:.6} vs MC {hat:.6} (z = {z:.2}); "));
    }
    verdict(
        10,
        worst_z <= 3.0,
        &format!("{detail}10^7 paths, limit 3 standard errors"),
    );
}

//! Randomized invariant checks. Every property here is exact (structural or
//! within floating-point tolerance), never statistical, so shrinking reports
//! a genuine counterexample whenever one exists.

use lossless_dp::account::{multiple_release_budget, zcdp_compose};
use lossless_dp::experiment::log_grid;
use lossless_dp::factorization::prefix_sum_query;
use lossless_dp::noise::{
    bridge_variance, combine_weights, laplace_conditional_weights, poisson_conditional_pmf,
    Mechanism,
};
use lossless_dp::rng::substream;
use lossless_dp::Ledger;
use proptest::collection::vec;
use proptest::prelude::*;

fn budget() -> impl Strategy<Value = f64> {
    1e-3f64..10.0
}

proptest! {
    /// The three conditional branch weights form a probability distribution
    /// for every valid scale bracket and observed gap.
    #[test]
    fn laplace_weights_form_a_distribution(
        b_lo in 1e-3f64..5.0,
        step1 in 1e-6f64..4.0,
        step2 in 1e-6f64..4.0,
        k in -50.0f64..50.0,
    ) {
        let b = b_lo + step1;
        let b_hi = b + step2;
        let w = laplace_conditional_weights(b_lo, b, b_hi, k).unwrap();
        for p in [w.p_zero, w.p_jump, w.p_smooth] {
            prop_assert!((0.0..=1.0).contains(&p), "branch weight {p} outside [0, 1]");
        }
        let total = w.p_zero + w.p_jump + w.p_smooth;
        prop_assert!((total - 1.0).abs() <= 1e-9, "weights sum to {total}");
    }

    /// Refining between two existing releases never needs more noise than a
    /// fresh release at the requested level.
    #[test]
    fn gaussian_bridge_variance_bounded(
        rho_lo in 0.0f64..5.0,
        step1 in 1e-6f64..5.0,
        step2 in 1e-6f64..5.0,
        delta in 0.1f64..10.0,
        unbounded_above in any::<bool>(),
    ) {
        let rho = rho_lo + step1;
        let rho_hi = if unbounded_above { f64::INFINITY } else { rho + step2 };
        let var = bridge_variance(rho_lo, rho, rho_hi, delta).unwrap();
        let fresh = delta * delta / (2.0 * rho);
        prop_assert!(var >= 0.0, "negative variance {var}");
        prop_assert!(var <= fresh * (1.0 + 1e-12), "bridge variance {var} exceeds fresh {fresh}");
    }

    /// Interpolation weights are convex for every bracket.
    #[test]
    fn combine_weights_convex(
        rho_lo in 0.0f64..5.0,
        step1 in 1e-6f64..5.0,
        step2 in 1e-6f64..5.0,
        unbounded_above in any::<bool>(),
    ) {
        let rho = rho_lo + step1;
        let rho_hi = if unbounded_above { f64::INFINITY } else { rho + step2 };
        let (w_lo, w_hi) = combine_weights(rho_lo, rho, rho_hi).unwrap();
        prop_assert!(w_lo >= 0.0 && w_hi >= 0.0, "negative weight ({w_lo}, {w_hi})");
        prop_assert!(((w_lo + w_hi) - 1.0).abs() <= 1e-12, "weights sum to {}", w_lo + w_hi);
    }

    /// The count-splitting conditional pmf is a distribution over 0..=n.
    #[test]
    fn poisson_conditional_pmf_sums_to_one(
        lambda_lo in 1e-3f64..5.0,
        step1 in 1e-3f64..5.0,
        step2 in 1e-3f64..5.0,
        n in 0u64..40,
    ) {
        let lambda = lambda_lo + step1;
        let lambda_hi = lambda + step2;
        let mut total = 0.0;
        for w in 0..=n {
            let p = poisson_conditional_pmf(lambda_lo, lambda, lambda_hi, n, w).unwrap();
            prop_assert!((0.0..=1.0).contains(&p), "pmf value {p} outside [0, 1]");
            total += p;
        }
        prop_assert!((total - 1.0).abs() <= 1e-9, "pmf sums to {total} for n = {n}");
    }

    /// Logarithmic grids hit both endpoints exactly and increase strictly.
    #[test]
    fn log_grid_pins_endpoints(
        lo in 1e-6f64..1.0,
        span in 1.001f64..1e4,
        n in 2usize..200,
    ) {
        let hi = lo * span;
        let grid = log_grid(lo, hi, n).unwrap();
        prop_assert_eq!(grid.len(), n);
        prop_assert_eq!(grid[0], lo, "first point moved off the endpoint");
        prop_assert_eq!(grid[n - 1], hi, "last point moved off the endpoint");
        for pair in grid.windows(2) {
            prop_assert!(pair[0] < pair[1], "grid not strictly increasing at {pair:?}");
        }
    }

    /// Repeating a request returns the recorded answer bit for bit and never
    /// grows the ledger, whatever the interleaving.
    #[test]
    fn ledger_repeats_are_idempotent(
        seed in any::<u64>(),
        budgets in vec(budget(), 1..6),
    ) {
        for mechanism in Mechanism::ALL {
            let secret = if mechanism == Mechanism::Poisson { 3.0 } else { 0.25 };
            let mut rng = substream(seed, 900);
            let mut ledger = if mechanism.supports_unbounded() {
                Ledger::new_unbounded(mechanism, 1.0, vec![secret]).unwrap()
            } else {
                Ledger::new_bounded(mechanism, 1.0, 12.0, vec![secret], &mut rng).unwrap()
            };
            let mut first = Vec::new();
            for &rho in &budgets {
                first.push(ledger.release(rho, &mut rng).unwrap().value);
            }
            let recorded = ledger.entries().len();
            for (&rho, value) in budgets.iter().rev().zip(first.iter().rev()) {
                let again = ledger.release(rho, &mut rng).unwrap().value;
                prop_assert_eq!(&again, value, "repeat at rho = {} changed the answer", rho);
            }
            prop_assert_eq!(ledger.entries().len(), recorded, "repeats grew the ledger");
        }
    }

    /// Ledger entries stay sorted by budget with no duplicates.
    #[test]
    fn ledger_entries_stay_sorted(
        seed in any::<u64>(),
        budgets in vec(budget(), 1..8),
    ) {
        let mut rng = substream(seed, 901);
        let mut ledger = Ledger::new_unbounded(Mechanism::Gaussian, 1.0, vec![0.0]).unwrap();
        for &rho in &budgets {
            ledger.release(rho, &mut rng).unwrap();
        }
        for pair in ledger.entries().windows(2) {
            prop_assert!(pair[0].rho < pair[1].rho, "entries out of order");
        }
    }

    /// Serialization round-trips bit for bit, with and without the secret,
    /// and a ledger restored without its secret still serves the recorded
    /// levels.
    #[test]
    fn ledger_persistence_roundtrip(
        seed in any::<u64>(),
        budgets in vec(budget(), 1..5),
    ) {
        let mut rng = substream(seed, 902);
        let mut ledger = Ledger::new_unbounded(Mechanism::Gaussian, 1.0, vec![1.5, -0.5]).unwrap();
        for &rho in &budgets {
            ledger.release(rho, &mut rng).unwrap();
        }
        let restored = Ledger::from_json(&ledger.to_json(true).unwrap()).unwrap();
        prop_assert!(restored.has_secret());
        prop_assert_eq!(ledger.entries(), restored.entries(), "entries changed in transit");

        let mut public = Ledger::from_json(&ledger.to_json(false).unwrap()).unwrap();
        prop_assert!(!public.has_secret());
        prop_assert_eq!(ledger.entries(), public.entries());
        let max = budgets.iter().cloned().fold(f64::MIN, f64::max);
        let replay = public.release(max, &mut rng).unwrap();
        let original = ledger.release(max, &mut rng).unwrap();
        prop_assert_eq!(replay.value, original.value, "public replay diverged");
    }

    /// Total privacy cost of a release set is the maximum budget, never the
    /// sum, and never exceeds sequential composition.
    #[test]
    fn release_budget_below_composition(budgets in vec(budget(), 1..10)) {
        let once = multiple_release_budget(&budgets).unwrap();
        let sum = zcdp_compose(&budgets).unwrap();
        let max = budgets.iter().cloned().fold(f64::MIN, f64::max);
        prop_assert_eq!(once, max);
        prop_assert!(once <= sum * (1.0 + 1e-15), "max {once} above sum {sum}");
    }

    /// The stream-recovery matrix really is a left inverse of the workload
    /// factor.
    #[test]
    fn prefix_left_inverse_roundtrip(n in 1usize..12) {
        let query = prefix_sum_query(n).unwrap();
        let product = query.left_inverse().unwrap() * query.left();
        for i in 0..n {
            for j in 0..n {
                let expect = if i == j { 1.0 } else { 0.0 };
                prop_assert!(
                    (product[(i, j)] - expect).abs() <= 1e-10,
                    "left inverse off at ({i}, {j}): {}",
                    product[(i, j)]
                );
            }
        }
    }
}

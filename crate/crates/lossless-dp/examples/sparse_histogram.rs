//! Threshold releases of a sparse histogram without touching every bucket.
//!
//! Coordinates are published only when their noisy value clears the round's
//! threshold. The efficient sampler draws noise for the handful of buckets
//! that ever matter (the support plus the few empty buckets that cross),
//! while matching the naive dense release in distribution, so the cost
//! scales with the support, not the domain.
//!
//! ```bash
//! cargo run --example sparse_histogram
//! ```

use lossless_dp::hist::{EfficientHistogramRelease, Histogram};
use lossless_dp::rng::root;

fn main() {
    let mut rng = root(5);
    let dimension = 100_000;
    let hist = Histogram::new(
        dimension,
        [(7, 41.0), (128, 17.0), (999, 8.0), (31_337, 5.0)],
    )
    .unwrap();
    let mut release = EfficientHistogramRelease::new(hist, 1.0).unwrap();

    let budgets = [0.3, 1.0, 3.0];
    let thresholds = [6.0, 4.0, 3.0];
    for (round, (&rho, &tau)) in budgets.iter().zip(&thresholds).enumerate() {
        let out = release.release(rho, tau, &mut rng).unwrap();
        println!("round {} (rho = {rho}, tau = {tau}):", round + 1);
        for (index, value) in out {
            println!("    bucket {index:>6}: {value:.3}");
        }
    }

    println!();
    println!(
        "noise draws used: {} (a dense release would need {})",
        release.gaussian_draws(),
        dimension * budgets.len()
    );
}

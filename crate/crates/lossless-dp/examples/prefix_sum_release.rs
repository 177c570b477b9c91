//! Gradual release of correlated linear queries through a factorization.
//!
//! A workload A = L R is answered by adding Gaussian noise to R x and
//! mapping through L, so the releases stay consistent across privacy levels
//! coordinate by coordinate. Here A is the running-total (prefix sum)
//! workload over an 8-day series.
//!
//! ```bash
//! cargo run --example prefix_sum_release
//! ```

use lossless_dp::factorization::{prefix_sum_query, FactorizedLedger};
use lossless_dp::rng::root;

fn main() {
    let mut rng = root(11);
    let daily = [3.0, 1.0, 4.0, 1.0, 5.0, 9.0, 2.0, 6.0];
    let query = prefix_sum_query(daily.len()).unwrap();
    let exact = query.workload() * nalgebra::DVector::from_row_slice(&daily);
    let mut ledger = FactorizedLedger::new(query, &daily).unwrap();

    println!("{:>6} {:>8} {:>8} {:>8}", "day", "exact", "rho=0.2", "rho=2");
    let coarse = ledger.release(0.2, &mut rng).unwrap();
    let sharp = ledger.release(2.0, &mut rng).unwrap();
    for day in 0..daily.len() {
        println!(
            "{:>6} {:>8.2} {:>8.2} {:>8.2}",
            day + 1,
            exact[day],
            coarse[day],
            sharp[day]
        );
    }
    println!();
    println!("each column is one coherent noisy series; sharper answers refine coarser ones");
}

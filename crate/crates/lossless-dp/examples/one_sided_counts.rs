//! Gradual release with one-sided noise families.
//!
//! Laplace, Poisson, and Exponential ledgers are opened with a finite budget
//! cap: the sharpest answer is drawn up front and every noisier level is
//! derived from it. Poisson and Exponential noise is nonnegative, so for a
//! fixed ledger the answers only move toward the capped answer as rho grows.
//!
//! ```bash
//! cargo run --example one_sided_counts
//! ```

use lossless_dp::rng::root;
use lossless_dp::{Ledger, Mechanism};

fn main() {
    let mut rng = root(21);
    let count = 128.0;
    let cap = 4.0;
    let levels = [0.25, 0.5, 1.0, 2.0, 4.0];

    for mechanism in [Mechanism::Laplace, Mechanism::Poisson, Mechanism::Exponential] {
        let mut ledger =
            Ledger::new_bounded(mechanism, 1.0, cap, vec![count], &mut rng).unwrap();
        print!("{:>12}:", mechanism.name());
        for &rho in &levels {
            print!(" {:>9.3}", ledger.release_scalar(rho, &mut rng).unwrap());
        }
        println!();
    }
    print!("{:>12}:", "rho");
    for &rho in &levels {
        print!(" {rho:>9.3}");
    }
    println!("   (true count {count}, cap {cap})");
}

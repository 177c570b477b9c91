//! Release the same statistic at growing precision and pay only for the
//! sharpest level.
//!
//! A ledger records every answer it has given. Noisier answers are derived
//! from sharper ones, sharper answers are drawn consistently with everything
//! already public, and repeating a request returns the recorded answer,
//! so publishing the whole history costs max(rho), not sum(rho).
//!
//! ```bash
//! cargo run --example gradual_release
//! ```

use lossless_dp::account::{multiple_release_budget, zcdp_compose};
use lossless_dp::rng::root;
use lossless_dp::{Ledger, Mechanism};

fn main() {
    let mut rng = root(7);
    let secret = 42.0;
    let mut ledger = Ledger::new_unbounded(Mechanism::Gaussian, 1.0, vec![secret]).unwrap();

    println!("secret query answer: {secret}");
    println!();
    println!("{:>8}  {:>10}  {:>10}", "rho", "answer", "std dev");
    for rho in [0.05, 0.2, 1.0, 5.0] {
        let value = ledger.release_scalar(rho, &mut rng).unwrap();
        let sd = (1.0 / (2.0 * rho)).sqrt();
        println!("{rho:>8}  {value:>10.4}  {sd:>10.4}");
    }

    let again = ledger.release_scalar(0.2, &mut rng).unwrap();
    println!();
    println!("asking at rho = 0.2 again returns the recorded answer: {again:.4}");

    let asked = [0.05, 0.2, 1.0, 5.0, 0.2];
    println!();
    println!(
        "privacy cost of the whole history: {} (sequential composition would charge {})",
        multiple_release_budget(&asked).unwrap(),
        zcdp_compose(&asked).unwrap()
    );
}

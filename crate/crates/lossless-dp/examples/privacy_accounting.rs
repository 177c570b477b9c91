//! Budget arithmetic for release histories and the count-noise calibrator.
//!
//! ```bash
//! cargo run --example privacy_accounting
//! ```

use lossless_dp::account::{
    gaussian_sigma, multiple_release_budget, poisson_epsilon, poisson_epsilon_unit, zcdp_compose,
    Sensitivities,
};

fn main() {
    let history = [0.1, 0.5, 0.5, 2.5];
    println!("release history rho = {history:?}");
    println!("    independent releases compose to {}", zcdp_compose(&history).unwrap());
    println!(
        "    one ledger serving the same history costs {}",
        multiple_release_budget(&history).unwrap()
    );

    println!();
    for rho in [0.1, 1.0, 10.0] {
        println!(
            "Gaussian noise scale at rho = {rho:>4}: sigma = {:.4}",
            gaussian_sigma(rho, 1.0).unwrap()
        );
    }

    println!();
    let (lambda, delta) = (1000.0, 1e-6);
    let eps = poisson_epsilon_unit(lambda, delta, 1).unwrap();
    println!("Poisson count noise with mean {lambda} is ({eps:.3}, {delta})-DP per release");

    let sens = Sensitivities { l1: 4.0, l2: 2.0, linf: 1.0 };
    let eps = poisson_epsilon(5000.0, 1e-5, 32, sens).unwrap();
    println!("32-dim histogram, mean 5000, sensitivities (4, 2, 1): epsilon = {eps:.3}");

    println!();
    match poisson_epsilon_unit(100.0, delta, 1) {
        Err(err) => println!("mean 100 is rejected: {err}"),
        Ok(_) => unreachable!("mean below the guarantee's precondition"),
    }
}

//! The coupling primitives underneath the ledger, shown directly.
//!
//! A noisier release is derived from a sharper one by adding an independent
//! "bridge" increment; a level between two existing releases is drawn from
//! the exact conditional law given both neighbors. Summing a sharp sample
//! and its bridge reproduces the fresh distribution at the target level.
//!
//! ```bash
//! cargo run --example noise_refinement
//! ```

use lossless_dp::noise::{
    bridge_variance, combine_weights, laplace_conditional_weights, sample_laplace,
    sample_laplace_bridge,
};
use lossless_dp::rng::root;
use lossless_dp::stats::RunningMoments;

fn main() {
    let mut rng = root(17);

    let (b_sharp, b_noisy) = (0.5, 2.0);
    let mut derived = RunningMoments::new();
    for _ in 0..200_000 {
        let sharp = sample_laplace(b_sharp, &mut rng);
        derived.push(sharp + sample_laplace_bridge(b_sharp, b_noisy, &mut rng).unwrap());
    }
    println!(
        "Laplace scale {b_sharp} plus bridge to {b_noisy}: variance {:.4} (fresh target {:.4})",
        derived.variance(),
        2.0 * b_noisy * b_noisy
    );

    let w = laplace_conditional_weights(0.5, 1.0, 2.0, 1.3).unwrap();
    println!();
    println!("inserting scale 1 between 0.5 and 2 after observing gap 1.3:");
    println!("    stay at the sharp answer : {:.4}", w.p_zero);
    println!("    jump to the noisy answer : {:.4}", w.p_jump);
    println!("    smooth in-between density: {:.4}", w.p_smooth);

    println!();
    let (rho_lo, rho, rho_hi) = (0.4, 1.0, 3.0);
    let (w_lo, w_hi) = combine_weights(rho_lo, rho, rho_hi).unwrap();
    let var = bridge_variance(rho_lo, rho, rho_hi, 1.0).unwrap();
    println!("Gaussian insertion at rho = {rho} between {rho_lo} and {rho_hi}:");
    println!("    mean = {w_lo:.4} x noisier answer + {w_hi:.4} x sharper answer");
    println!("    extra variance {var:.4} vs {:.4} for a fresh draw", 1.0 / (2.0 * rho));
}

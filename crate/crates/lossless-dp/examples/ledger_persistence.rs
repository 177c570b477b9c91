//! Persist a ledger and keep serving releases after a restart.
//!
//! The JSON document stores every (rho, answer) pair bit for bit. Written
//! with the secret it can extend to sharper levels later; written without,
//! it can still serve anything at or below what is already public, which is
//! the right artifact to hand to an untrusted replica.
//!
//! ```bash
//! cargo run --example ledger_persistence
//! ```

use lossless_dp::rng::root;
use lossless_dp::{Ledger, Mechanism};

fn main() {
    let mut rng = root(3);
    let mut ledger = Ledger::new_unbounded(Mechanism::Gaussian, 1.0, vec![10.0, -4.0]).unwrap();
    ledger.release(0.5, &mut rng).unwrap();
    ledger.release(2.0, &mut rng).unwrap();

    let path = std::env::temp_dir().join("gradual-release-demo.json");
    ledger.save_file(&path, true).unwrap();
    println!("saved {} entries to {}", ledger.entries().len(), path.display());

    let mut restored = Ledger::load_file(&path).unwrap();
    let sharper = restored.release(8.0, &mut rng).unwrap();
    println!("restored ledger extends to rho = 8: {:?}", sharper.value);

    let public = Ledger::from_json(&ledger.to_json(false).unwrap()).unwrap();
    println!(
        "secret-free copy serves {} recorded levels and has_secret() = {}",
        public.entries().len(),
        public.has_secret()
    );

    let replayed = Ledger::from_json(&public.to_json(false).unwrap()).unwrap();
    assert_eq!(public.entries(), replayed.entries());
    println!("round-trip reproduced every recorded answer bit for bit");

    std::fs::remove_file(&path).ok();
}

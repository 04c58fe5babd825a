//! CLEF against its baselines and single-component removals on one seed.
//!
//! cargo run --release --example ablations -- [seed]

use clef::experiments::{Arm, Protocol};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let seed = std::env::args().nth(1).map_or(Ok(0), |s| s.parse())?;
    let t = std::time::Instant::now();
    for (arm, acc) in Protocol::default().compare(&Arm::ALL, seed)? {
        println!("{:<18} {acc:.4}", arm.label());
    }
    println!("{:.1?}", t.elapsed());
    Ok(())
}

//! Finite-difference checks of every loss and both encoders.

use clef::gradsuite::{run_all, TOLERANCE};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let t = std::time::Instant::now();
    let outcomes = run_all()?;
    for o in &outcomes {
        println!(
            "{:<18} {:.2e} over {:>4} coords {}",
            o.name,
            o.report.max_relative_error,
            o.report.coords_checked,
            if o.passed() { "ok" } else { "FAIL" }
        );
    }
    println!("tolerance {TOLERANCE:e}, {:.1?}", t.elapsed());
    assert!(outcomes.iter().all(|o| o.passed()));
    Ok(())
}

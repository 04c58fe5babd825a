//! Activity pre-training versus self-view-only pre-training, read out with
//! identity and activity linear probes.
//!
//! cargo run --release --example pretrain_probe -- [seed]

use clef::experiments::Protocol;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let seed = std::env::args().nth(1).map_or(Ok(0), |s| s.parse())?;
    let mut p = Protocol::default();
    p.synth.samples_per_activity = 200;
    let t = std::time::Instant::now();
    let (activity, ssl) = p.disentanglement(seed)?;
    println!("                identity  activity");
    println!("activity text   {:>8.3}  {:>8.3}", activity.identity, activity.activity);
    println!("self-view only  {:>8.3}  {:>8.3}", ssl.identity, ssl.activity);
    println!("{:.1?}", t.elapsed());
    Ok(())
}

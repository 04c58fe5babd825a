//! Fine-tune on three classes, then classify four never-trained classes by
//! their descriptions.
//!
//! cargo run --release --example zero_shot -- [seed]

use clef::experiments::Protocol;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let seed = std::env::args().nth(1).map_or(Ok(0), |s| s.parse())?;
    let p = Protocol::default();
    let (seen, unseen) = ([0, 1, 2], [3, 4, 5, 6]);
    let labels = p.data(seed)?.labels;
    for &c in &unseen {
        println!("unseen {:>10}: {}", labels[c].name, labels[c].description);
    }
    let report = p.zero_shot(&seen, &unseen, seed)?;
    println!("zero-shot accuracy {:.3} (chance {:.3})", report.accuracy, 1.0 / unseen.len() as f32);
    for (c, row) in unseen.iter().zip(&report.confusion) {
        println!("{:>10} {row:?}", labels[*c].name);
    }
    Ok(())
}

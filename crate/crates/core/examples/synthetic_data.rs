//! Generate a synthetic FER dataset, look at its factors and write it as JSONL.
//!
//! cargo run --release --example synthetic_data -- [out.jsonl]

use std::collections::BTreeMap;

use clef::data::{generate_synthetic, load_jsonl, synthetic_labels, write_jsonl, SynthConfig};
use clef::text::write_labels;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = SynthConfig {
        samples_per_activity: 50,
        ..SynthConfig::default()
    };
    let data = generate_synthetic(&cfg)?;
    let labels = synthetic_labels(&cfg)?;
    println!("{} samples of {}x{}, {:?}", data.len(), data.height, data.width, data.task);

    // activity peaks on its target class
    let mut per_activity: BTreeMap<usize, BTreeMap<usize, usize>> = BTreeMap::new();
    for s in &data.samples {
        *per_activity.entry(s.activity).or_default().entry(s.target.class().unwrap()).or_default() += 1;
    }
    for (a, classes) in &per_activity {
        let (top, n) = classes.iter().max_by_key(|(_, &n)| n).unwrap();
        println!("activity {a}: target {} ({n}/{})", labels[*top].name, cfg.samples_per_activity);
    }
    println!("e.g. {:?}", data.samples[0].activity_text);
    for l in labels.iter().take(3) {
        println!("{:>10}: {}", l.name, l.description);
    }

    let out = std::env::args().nth(1).unwrap_or_else(|| std::env::temp_dir().join("clef_synth.jsonl").display().to_string());
    write_jsonl(&out, &data)?;
    write_labels(std::path::Path::new(&out).with_extension("labels.jsonl"), &labels)?;
    let back = load_jsonl(&out)?;
    assert_eq!(back.len(), data.len());
    println!("wrote {out}");
    Ok(())
}

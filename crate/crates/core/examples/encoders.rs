//! Embed images and label texts into the shared space with a fresh model.

use clef::data::{generate_synthetic, synthetic_labels, SynthConfig};
use clef::eval::{class_embeddings, ClassText};
use clef::model::{init_params, ArchConfig};
use clef::train::Prompts;
use clef::Task;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let arch = ArchConfig::default();
    let model = init_params(&arch, 0)?;
    println!("{} parameters, {}", model.store.ids().map(|id| model.store.value(id).len()).sum::<usize>(), arch.fingerprint());

    let cfg = SynthConfig {
        samples_per_activity: 4,
        ..SynthConfig::default()
    };
    let data = generate_synthetic(&cfg)?;
    let images: Vec<_> = data.samples.iter().map(|s| s.image.clone()).collect();
    let zi = model.embed_images(&images, 16)?;
    let zt = class_embeddings(&model, &synthetic_labels(&cfg)?, ClassText::Names, Task::Fer, &Prompts::builtin())?;
    println!("images {:?}, names {:?}", zi.shape(), zt.shape());

    let cos = |a: &[f32], b: &[f32]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f32>();
    println!("|z| = {:.6}", cos(zi.row(0), zi.row(0)).sqrt());
    println!("cos(image 0, image 1) = {:.3}", cos(zi.row(0), zi.row(1)));
    println!("cos(image 0, name 0)  = {:.3}", cos(zi.row(0), zt.row(0)));
    println!("temperature {:.4}", model.temperature());
    Ok(())
}

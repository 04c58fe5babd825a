//! The full pipeline: activity pre-training, label-text fine-tuning, test
//! evaluation and a checkpoint on disk.

use clef::data::{generate_synthetic, synthetic_labels, AugmentPolicy, SynthConfig};
use clef::eval::{evaluate, EvalOptions};
use clef::model::ArchConfig;
use clef::train::{finetune, load_checkpoint, pretrain, save_checkpoint, Prompts, RunConfig};
use clef::Task;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let synth = SynthConfig {
        samples_per_activity: 150,
        ..SynthConfig::default()
    };
    let (train, test) = generate_synthetic(&synth)?.split(0.8, 0);
    let labels = synthetic_labels(&synth)?;
    let arch = ArchConfig::default();
    let prompts = Prompts::builtin();

    let pre_cfg = RunConfig {
        epochs: 3,
        augment: AugmentPolicy::identity(),
        ..RunConfig::pretrain()
    };
    let pre = pretrain(&pre_cfg, &arch, &train, &prompts)?;
    println!("pre-training loss by epoch {:?}", pre.log.epoch_means());

    let ft_cfg = RunConfig {
        epochs: 3,
        ..RunConfig::finetune(Task::Fer)
    };
    let ft = finetune(&ft_cfg, &arch, &train, &labels, &prompts, Some(&pre.model))?;
    println!("fine-tuning loss by epoch {:?}", ft.log.epoch_means());

    let report = evaluate(&ft.model, &test, &labels, &prompts, &EvalOptions::default())?;
    println!("test accuracy {:.3}, macro F1 {:.3}", report.accuracy, report.macro_f1);

    let path = std::env::temp_dir().join("clef_example.ckpt");
    save_checkpoint(&ft.checkpoint(&ft_cfg), &path)?;
    let back = load_checkpoint(&path)?;
    assert_eq!(back.params, ft.model);
    println!("checkpoint at step {} -> {}", back.meta.step, path.display());
    Ok(())
}

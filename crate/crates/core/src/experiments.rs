//! Reference protocols on synthetic data: the pipeline comparison against
//! baselines and ablations, identity/activity probes of pre-trained
//! embeddings, and zero-shot transfer to held-out classes.

use crate::data::{generate_synthetic, synthetic_labels, AugmentPolicy, Dataset, SynthConfig};
use crate::eval::{evaluate, zero_shot_eval, ClassText, EvalOptions, EvalReport, LinearProbe};
use crate::model::{ArchConfig, ModelParams};
use crate::text::LabelEntry;
use crate::train::{finetune, pretrain, Prompts, RunConfig};
use crate::{Error, Task};

/// One way of producing a fine-tuned model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Arm {
    /// Activity pre-training, then names plus descriptions.
    Clef,
    /// Names plus descriptions from random initialization.
    TextOnly,
    /// A linear classifier on the image encoder, from random initialization.
    LinearHead,
    /// Pre-training without the image–activity term.
    NoActivityText,
    /// Fine-tuning against descriptions only.
    NoNames,
    /// Fine-tuning against names only.
    NoDescriptions,
}

impl Arm {
    pub const ALL: [Arm; 6] = [
        Arm::Clef,
        Arm::TextOnly,
        Arm::LinearHead,
        Arm::NoActivityText,
        Arm::NoNames,
        Arm::NoDescriptions,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Arm::Clef => "clef",
            Arm::TextOnly => "text-only",
            Arm::LinearHead => "linear-head",
            Arm::NoActivityText => "no-activity-text",
            Arm::NoNames => "no-names",
            Arm::NoDescriptions => "no-descriptions",
        }
    }

    fn pretraining(self) -> Option<bool> {
        match self {
            Arm::TextOnly | Arm::LinearHead => None,
            Arm::NoActivityText => Some(false),
            _ => Some(true),
        }
    }
}

/// Linear-probe accuracies on frozen image embeddings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeScores {
    pub identity: f32,
    pub activity: f32,
}

/// Data, architecture and both stages' settings. `seed` arguments replace
/// every seed inside.
#[derive(Debug, Clone, PartialEq)]
pub struct Protocol {
    pub synth: SynthConfig,
    pub arch: ArchConfig,
    pub pretrain: RunConfig,
    pub finetune: RunConfig,
    pub train_fraction: f32,
    pub probe: LinearProbe,
}

impl Default for Protocol {
    fn default() -> Self {
        Self {
            synth: SynthConfig {
                class_signal: 0.1,
                ..SynthConfig::default()
            },
            arch: ArchConfig::default(),
            pretrain: RunConfig {
                augment: AugmentPolicy::identity(),
                ..RunConfig::pretrain()
            },
            finetune: RunConfig {
                epochs: 3,
                ..RunConfig::finetune(Task::Fer)
            },
            train_fraction: 0.8,
            probe: LinearProbe {
                steps: 200,
                ..LinearProbe::default()
            },
        }
    }
}

/// Generated data split into train and test, with its labels.
#[derive(Debug, Clone)]
pub struct SplitData {
    pub train: Dataset,
    pub test: Dataset,
    pub labels: Vec<LabelEntry>,
}

impl Protocol {
    pub fn data(&self, seed: u64) -> Result<SplitData, Error> {
        let synth = SynthConfig {
            seed,
            ..self.synth.clone()
        };
        let all = generate_synthetic(&synth)?;
        let (train, test) = all.split(self.train_fraction, seed);
        Ok(SplitData {
            train,
            test,
            labels: synthetic_labels(&synth)?,
        })
    }

    /// Pre-trains on `data` with or without the image–activity term.
    pub fn pretrained(&self, data: &Dataset, activity_text: bool, seed: u64) -> Result<ModelParams, Error> {
        let cfg = RunConfig {
            seed,
            use_activity_text: activity_text,
            ..self.pretrain.clone()
        };
        Ok(pretrain(&cfg, &self.arch, data, &Prompts::builtin())?.model)
    }

    /// Fine-tunes `arm` and returns its test report.
    pub fn run_arm(
        &self,
        arm: Arm,
        split: &SplitData,
        init: Option<&ModelParams>,
        seed: u64,
    ) -> Result<EvalReport, Error> {
        let mut cfg = RunConfig {
            seed,
            task: split.train.task,
            ..self.finetune.clone()
        };
        match arm {
            Arm::LinearHead => cfg.linear_head = true,
            Arm::NoNames => cfg.use_names = false,
            Arm::NoDescriptions => cfg.use_descriptions = false,
            _ => {}
        }
        let prompts = Prompts::builtin();
        let model = finetune(&cfg, &self.arch, &split.train, &split.labels, &prompts, init)?.model;
        let opts = EvalOptions {
            class_text: if cfg.use_names {
                ClassText::Names
            } else {
                ClassText::Descriptions
            },
            ..EvalOptions::default()
        };
        evaluate(&model, &split.test, &split.labels, &prompts, &opts)
    }

    /// Test headline metric of each arm on one seed, in the order given.
    pub fn compare(&self, arms: &[Arm], seed: u64) -> Result<Vec<(Arm, f32)>, Error> {
        let split = self.data(seed)?;
        let mut full = None;
        let mut image_only = None;
        let mut out = Vec::with_capacity(arms.len());
        for &arm in arms {
            let init = match arm.pretraining() {
                None => None,
                Some(true) => {
                    if full.is_none() {
                        full = Some(self.pretrained(&split.train, true, seed)?);
                    }
                    full.as_ref()
                }
                Some(false) => {
                    if image_only.is_none() {
                        image_only = Some(self.pretrained(&split.train, false, seed)?);
                    }
                    image_only.as_ref()
                }
            };
            out.push((arm, self.run_arm(arm, &split, init, seed)?.headline()));
        }
        Ok(out)
    }

    /// Probe scores of the test embeddings of `model`.
    pub fn probe_scores(&self, model: &ModelParams, data: &Dataset) -> Result<ProbeScores, Error> {
        let images: Vec<_> = data.samples.iter().map(|s| s.image.clone()).collect();
        let z = model.embed_images(&images, 256)?;
        let identity: Vec<usize> = data.samples.iter().map(|s| s.identity).collect();
        let activity: Vec<usize> = data.samples.iter().map(|s| s.activity).collect();
        Ok(ProbeScores {
            identity: self.probe.run(&z, &identity)?,
            activity: self.probe.run(&z, &activity)?,
        })
    }

    /// Pre-trains on `data` with the image–image term only, where each
    /// sample's only positive is its other view.
    pub fn pretrained_self_view(&self, data: &Dataset, seed: u64) -> Result<ModelParams, Error> {
        let cfg = RunConfig {
            seed,
            use_activity_text: false,
            instance_positives: true,
            ..self.pretrain.clone()
        };
        Ok(pretrain(&cfg, &self.arch, data, &Prompts::builtin())?.model)
    }

    /// Probes after activity pre-training and after self-view-only
    /// pre-training.
    pub fn disentanglement(&self, seed: u64) -> Result<(ProbeScores, ProbeScores), Error> {
        let split = self.data(seed)?;
        let activity = self.pretrained(&split.train, true, seed)?;
        let ssl = self.pretrained_self_view(&split.train, seed)?;
        Ok((
            self.probe_scores(&activity, &split.test)?,
            self.probe_scores(&ssl, &split.test)?,
        ))
    }

    /// Fine-tunes `init` on the `seen` classes only and classifies test
    /// samples of `unseen` by their descriptions.
    pub fn zero_shot_from(
        &self,
        split: &SplitData,
        init: &ModelParams,
        seen: &[usize],
        unseen: &[usize],
        seed: u64,
    ) -> Result<EvalReport, Error> {
        let pick = |ids: &[usize]| ids.iter().map(|&c| split.labels[c].clone()).collect::<Vec<_>>();
        let cfg = RunConfig {
            seed,
            task: Task::Fer,
            ..self.finetune.clone()
        };
        let prompts = Prompts::builtin();
        let train = split.train.restrict_classes(seen);
        let model = finetune(&cfg, &self.arch, &train, &pick(seen), &prompts, Some(init))?.model;
        let test = split.test.restrict_classes(unseen);
        zero_shot_eval(&model, &test, &pick(unseen), seen, unseen, &prompts)
    }

    /// [`Protocol::zero_shot_from`] after activity pre-training on all classes.
    pub fn zero_shot(&self, seen: &[usize], unseen: &[usize], seed: u64) -> Result<EvalReport, Error> {
        let split = self.data(seed)?;
        let init = self.pretrained(&split.train, true, seed)?;
        self.zero_shot_from(&split, &init, seen, unseen, seed)
    }
}

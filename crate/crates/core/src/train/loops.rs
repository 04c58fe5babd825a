use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{adamw_step, Checkpoint, FinetuneMode, OptimState, RunConfig, Schedule, Stage, TrainError};
use crate::data::{make_batches, Batch, BatchPlan, Dataset, Target};
use crate::losses::{
    au_image_name_loss, class_weights, fer_image_name_loss, finetune_loss, name_description_loss, pretrain_loss,
    weighted_binary_cross_entropy, weighted_cross_entropy, ClassWeights, LossError, Temperature,
};
use crate::model::{init_params, ArchConfig, ModelParams, TextRole};
use crate::numerics::{Bound, NumericsError, Tape, Var};
use crate::text::{render_prompt, sample_template, LabelEntry, TemplateKind, TemplateSet, TokenizedText, Tokenizer};
use crate::{Error, Task};

/// Template sets used to turn labels and activity texts into prompts.
#[derive(Debug, Clone, PartialEq)]
pub struct Prompts {
    pub label_name: TemplateSet,
    pub fe_description: TemplateSet,
    pub au_description: TemplateSet,
    pub activity: TemplateSet,
}

impl Default for Prompts {
    fn default() -> Self {
        Self::builtin()
    }
}

impl Prompts {
    pub fn builtin() -> Self {
        Self {
            label_name: TemplateSet::builtin(TemplateKind::LabelName),
            fe_description: TemplateSet::builtin(TemplateKind::FeDescription),
            au_description: TemplateSet::builtin(TemplateKind::AuDescription),
            activity: TemplateSet::builtin(TemplateKind::ActivityDescription),
        }
    }

    /// Built-in sets, replaced by any `<kind>.txt` found in `dir`.
    pub fn from_dir(dir: impl AsRef<Path>) -> Result<Self, Error> {
        let dir = dir.as_ref();
        let load = |kind: TemplateKind, file: &str| -> Result<TemplateSet, Error> {
            let path = dir.join(file);
            Ok(if path.exists() {
                TemplateSet::from_file(kind, path)?
            } else {
                TemplateSet::builtin(kind)
            })
        };
        Ok(Self {
            label_name: load(TemplateKind::LabelName, "label_name.txt")?,
            fe_description: load(TemplateKind::FeDescription, "fe_description.txt")?,
            au_description: load(TemplateKind::AuDescription, "au_description.txt")?,
            activity: load(TemplateKind::ActivityDescription, "activity_description.txt")?,
        })
    }

    pub fn description(&self, task: Task) -> &TemplateSet {
        match task {
            Task::Fer => &self.fe_description,
            Task::Aur => &self.au_description,
        }
    }
}

/// One optimizer step. `parts` holds the two loss terms of the stage
/// (image–image and image–activity, or image–name and name–description).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossRecord {
    pub step: u64,
    pub epoch: usize,
    pub lr: f32,
    pub loss: f32,
    pub parts: [Option<f32>; 2],
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossLog {
    pub stage: Stage,
    pub records: Vec<LossRecord>,
}

impl LossLog {
    pub fn header(&self) -> &'static str {
        match self.stage {
            Stage::Pretrain => "step,epoch,lr,loss,loss_ii,loss_ia",
            Stage::Finetune => "step,epoch,lr,loss,loss_in,loss_dn",
        }
    }

    /// Absent terms are left empty.
    pub fn to_csv(&self) -> String {
        let mut out = format!("{}\n", self.header());
        let opt = |v: Option<f32>| v.map(|x| x.to_string()).unwrap_or_default();
        for r in &self.records {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                r.step,
                r.epoch,
                r.lr,
                r.loss,
                opt(r.parts[0]),
                opt(r.parts[1])
            );
        }
        out
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<(), TrainError> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }

    /// Mean loss over the records of each epoch.
    pub fn epoch_means(&self) -> Vec<f32> {
        let mut sums: BTreeMap<usize, (f64, usize)> = BTreeMap::new();
        for r in &self.records {
            let e = sums.entry(r.epoch).or_default();
            e.0 += r.loss as f64;
            e.1 += 1;
        }
        sums.values().map(|(s, n)| (s / *n as f64) as f32).collect()
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: ModelParams,
    pub optim: OptimState,
    pub log: LossLog,
    pub steps: u64,
}

impl TrainOutcome {
    pub fn checkpoint(&self, cfg: &RunConfig) -> Checkpoint {
        Checkpoint::new(self.model.clone(), Some(self.optim.clone()), self.steps, cfg.seed, cfg.task)
    }
}

/// Independent stream per (purpose, index) pair.
fn derive_seed(seed: u64, purpose: u64, index: u64) -> u64 {
    let mut z = seed ^ purpose.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ index.wrapping_mul(0xD1B5_4A32_D192_ED03);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

const SHUFFLE: u64 = 1;
const AUGMENT: u64 = 2;
const PROMPTS: u64 = 3;
const HEAD: u64 = 4;

fn check_images(data: &Dataset, arch: &ArchConfig) -> Result<(), TrainError> {
    if data.height != arch.image_height || data.width != arch.image_width {
        return Err(TrainError::Config(format!(
            "dataset images are {}×{}, architecture expects {}×{}",
            data.height, data.width, arch.image_height, arch.image_width
        )));
    }
    Ok(())
}

struct Stepper {
    schedule: Schedule,
    per_epoch: u64,
}

impl Stepper {
    fn new(cfg: &RunConfig, per_epoch: usize) -> Result<Self, TrainError> {
        let per_epoch = per_epoch as u64;
        let schedule = Schedule::new(
            cfg.lr,
            cfg.min_lr,
            per_epoch * cfg.warmup_epochs as u64,
            per_epoch * cfg.epochs as u64,
        )?;
        Ok(Self { schedule, per_epoch })
    }
}

/// Backward, AdamW update with the lr of the step being taken, logit-scale
/// clamp and gradient reset.
fn apply_step(
    model: &mut ModelParams,
    optim: &mut OptimState,
    cfg: &RunConfig,
    lr: f32,
    mut tape: Tape,
    bound: &Bound,
    loss: Var,
) -> Result<f32, Error> {
    let value = tape.value(loss).item();
    if !value.is_finite() {
        return Err(NumericsError::NonFinite.into());
    }
    tape.backward(loss)?;
    model.store.accumulate_grads(&tape, bound);
    adamw_step(&mut model.store, optim, lr, &cfg.optimizer)?;
    model.clamp_logit_scales();
    model.store.zero_grads();
    Ok(value)
}

/// Activity-supervised contrastive pre-training from random initialization.
pub fn pretrain(cfg: &RunConfig, arch: &ArchConfig, data: &Dataset, prompts: &Prompts) -> Result<TrainOutcome, Error> {
    cfg.validate()?;
    if cfg.stage != Stage::Pretrain {
        return Err(TrainError::Config("stage: pretrain() needs stage = pretrain".into()).into());
    }
    let arch = cfg.model_arch(arch);
    check_images(data, &arch)?;
    let per_epoch = data.len() / cfg.batch_size;
    if per_epoch == 0 {
        return Err(TrainError::Config(format!(
            "batch_size: {} exceeds the {} available samples",
            cfg.batch_size,
            data.len()
        ))
        .into());
    }
    let mut model = init_params(&arch, cfg.seed)?;
    let mut optim = OptimState::new(&model.store);
    let stepper = Stepper::new(cfg, per_epoch)?;
    let tokenizer = Tokenizer::new(arch.vocab_size, arch.context_len);
    let mut log = LossLog {
        stage: Stage::Pretrain,
        records: Vec::new(),
    };
    let mut step = 0u64;
    for epoch in 0..cfg.epochs {
        let plan = BatchPlan {
            batch_size: cfg.batch_size,
            shuffle_seed: Some(derive_seed(cfg.seed, SHUFFLE, epoch as u64)),
            two_views: true,
            policy: cfg.augment,
            drop_last: true,
            contrastive: true,
            augment_seed: derive_seed(cfg.seed, AUGMENT, epoch as u64),
        };
        for batch in make_batches(data, &plan)?.iter().take(stepper.per_epoch as usize) {
            let lr = stepper.schedule.lr_at(step + 1)?;
            let mut tape = Tape::new();
            let bound = model.store.bind(&mut tape);
            let n = batch.len();
            let z = model.image_encoder().encode(&mut tape, &bound, &batch.views.concat())?;
            let v1 = tape.gather_rows(z, &(0..n).collect::<Vec<_>>());
            let v2 = tape.gather_rows(z, &(n..2 * n).collect::<Vec<_>>());
            let labels = if cfg.instance_positives {
                batch.indices.clone()
            } else {
                batch.activities.clone()
            };
            let text = if cfg.use_activity_text {
                let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, PROMPTS, step));
                Some(activity_embeddings(&model, &mut tape, &bound, data, batch, prompts, &tokenizer, &mut rng)?)
            } else {
                None
            };
            let (t_ii, t_ia) = pretrain_temperatures(&model, &bound, cfg.epsilon);
            let parts = pretrain_loss(&mut tape, v1, v2, text, &labels, t_ii, t_ia, cfg.symmetric_anchors)?;
            let total = match (cfg.use_pretrained_image, parts.image_activity) {
                (false, Some(ia)) => ia,
                _ => parts.total,
            };
            let ii = tape.value(parts.image_image).item();
            let ia = parts.image_activity.map(|v| tape.value(v).item());
            let loss = apply_step(&mut model, &mut optim, cfg, lr, tape, &bound, total)?;
            step += 1;
            log.records.push(LossRecord {
                step,
                epoch,
                lr,
                loss,
                parts: [Some(ii), ia],
            });
        }
    }
    Ok(TrainOutcome {
        model,
        optim,
        log,
        steps: step,
    })
}

fn pretrain_temperatures(model: &ModelParams, bound: &Bound, epsilon: f32) -> (Temperature, Temperature) {
    let learned = |name: &str| model.store.id(name).map(|id| Temperature::LogScale(bound.var(id)));
    match (learned("pretrain.logit_scale_ii"), learned("pretrain.logit_scale_ia")) {
        (Some(ii), Some(ia)) => (ii, ia),
        _ => (Temperature::Fixed(epsilon), Temperature::Fixed(epsilon)),
    }
}

/// One prompted activity-text embedding per batch sample. Each distinct
/// prompt is encoded once and its row repeated.
#[allow(clippy::too_many_arguments)]
fn activity_embeddings(
    model: &ModelParams,
    tape: &mut Tape,
    bound: &Bound,
    data: &Dataset,
    batch: &Batch,
    prompts: &Prompts,
    tokenizer: &Tokenizer,
    rng: &mut ChaCha8Rng,
) -> Result<Var, Error> {
    let mut unique: Vec<String> = Vec::new();
    let mut rows = Vec::with_capacity(batch.len());
    for &i in &batch.indices {
        let k = sample_template(&prompts.activity, rng)?;
        let prompt = render_prompt(&prompts.activity, k, &data.samples[i].activity_text)?;
        let row = match unique.iter().position(|p| *p == prompt) {
            Some(r) => r,
            None => {
                unique.push(prompt);
                unique.len() - 1
            }
        };
        rows.push(row);
    }
    let tokens: Vec<TokenizedText> = unique.iter().map(|p| tokenizer.tokenize(p)).collect();
    let z = model.text_encoder(TextRole::Name).encode(tape, bound, &tokens)?;
    Ok(tape.gather_rows(z, &rows))
}

/// Per-batch targets in the shape the task's loss expects.
#[derive(Debug, Clone, PartialEq)]
pub(crate) enum BatchTargets {
    Classes(Vec<usize>),
    MultiHot(Vec<Vec<u8>>),
}

pub(crate) fn batch_targets(targets: &[Target], task: Task) -> Result<BatchTargets, LossError> {
    let mismatch = |i: usize| LossError::SizeMismatch(format!("sample {i} target does not fit task {task:?}"));
    match task {
        Task::Fer => targets
            .iter()
            .enumerate()
            .map(|(i, t)| t.class().ok_or_else(|| mismatch(i)))
            .collect::<Result<_, _>>()
            .map(BatchTargets::Classes),
        Task::Aur => targets
            .iter()
            .enumerate()
            .map(|(i, t)| t.multi_hot().map(<[u8]>::to_vec).ok_or_else(|| mismatch(i)))
            .collect::<Result<_, _>>()
            .map(BatchTargets::MultiHot),
    }
}

/// Starting point for fine-tuning: a copy of `init` adapted to the run's
/// text-sharing switch, or a fresh model.
fn finetune_start(cfg: &RunConfig, arch: &ArchConfig, init: Option<&ModelParams>) -> Result<ModelParams, Error> {
    let want = cfg.model_arch(arch);
    let Some(init) = init else {
        return Ok(init_params(&want, cfg.seed)?);
    };
    let (have, need) = (init.arch.dims_fingerprint(), want.dims_fingerprint());
    if have != need {
        return Err(TrainError::ArchMismatch(format!("checkpoint is {have}, config is {need}")).into());
    }
    let mut model = init.clone();
    if !want.share_text_encoder {
        model.unshare_text_encoder();
    } else if !model.arch.share_text_encoder {
        return Err(TrainError::ArchMismatch(
            "checkpoint has a separate description encoder but the run shares one".into(),
        )
        .into());
    }
    Ok(model)
}

/// Label-text fine-tuning, or linear-head training when no text is enabled.
pub fn finetune(
    cfg: &RunConfig,
    arch: &ArchConfig,
    data: &Dataset,
    labels: &[LabelEntry],
    prompts: &Prompts,
    init: Option<&ModelParams>,
) -> Result<TrainOutcome, Error> {
    cfg.validate()?;
    if cfg.stage != Stage::Finetune {
        return Err(TrainError::Config("stage: finetune() needs stage = finetune".into()).into());
    }
    if data.task != cfg.task {
        return Err(TrainError::Config(format!("task: dataset is {:?}, run is {:?}", data.task, cfg.task)).into());
    }
    if labels.len() != data.n_classes {
        return Err(TrainError::Config(format!(
            "labels: {} entries for {} classes",
            labels.len(),
            data.n_classes
        ))
        .into());
    }
    let mut model = finetune_start(cfg, arch, init)?;
    check_images(data, &model.arch)?;
    let mode = cfg.finetune_mode();
    if mode == FinetuneMode::LinearHead {
        model.add_linear_head(data.n_classes, derive_seed(cfg.seed, HEAD, 0));
    }
    let weights = class_weights(data, cfg.task)?;
    let tokenizer = Tokenizer::new(model.arch.vocab_size, model.arch.context_len);
    let names = labels
        .iter()
        .map(|l| Ok(tokenizer.tokenize(&render_prompt(&prompts.label_name, 0, &l.name)?)))
        .collect::<Result<Vec<_>, Error>>()?;
    let per_epoch = data.len().div_ceil(cfg.batch_size);
    if per_epoch == 0 {
        return Err(TrainError::Config("data: no samples to fine-tune on".into()).into());
    }
    let mut optim = OptimState::new(&model.store);
    let stepper = Stepper::new(cfg, per_epoch)?;
    let mut log = LossLog {
        stage: Stage::Finetune,
        records: Vec::new(),
    };
    let mut step = 0u64;
    for epoch in 0..cfg.epochs {
        let plan = BatchPlan {
            batch_size: cfg.batch_size,
            shuffle_seed: Some(derive_seed(cfg.seed, SHUFFLE, epoch as u64)),
            two_views: false,
            policy: cfg.augment,
            drop_last: false,
            contrastive: false,
            augment_seed: derive_seed(cfg.seed, AUGMENT, epoch as u64),
        };
        for batch in &make_batches(data, &plan)? {
            let lr = stepper.schedule.lr_at(step + 1)?;
            let mut tape = Tape::new();
            let bound = model.store.bind(&mut tape);
            let targets = batch_targets(&batch.targets, cfg.task)?;
            let (total, parts) = if mode == FinetuneMode::LinearHead {
                let f = model.image_encoder().features(&mut tape, &bound, &batch.views[0])?;
                let logits = model.head_logits(&mut tape, &bound, f);
                let l = match &targets {
                    BatchTargets::Classes(y) => weighted_cross_entropy(&mut tape, logits, y, &weights)?,
                    BatchTargets::MultiHot(y) => weighted_binary_cross_entropy(&mut tape, logits, y, &weights)?,
                };
                (l, [Some(l), None])
            } else {
                let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, PROMPTS, step));
                text_finetune_loss(
                    &model, &mut tape, &bound, cfg, mode, batch, &targets, &weights, labels, &names, prompts,
                    &tokenizer, &mut rng,
                )?
            };
            let parts = parts.map(|p| p.map(|v| tape.value(v).item()));
            let loss = apply_step(&mut model, &mut optim, cfg, lr, tape, &bound, total)?;
            step += 1;
            log.records.push(LossRecord {
                step,
                epoch,
                lr,
                loss,
                parts,
            });
        }
    }
    Ok(TrainOutcome {
        model,
        optim,
        log,
        steps: step,
    })
}

/// Image–class term against names (or descriptions) plus, when both are
/// enabled, the name–description term.
#[allow(clippy::too_many_arguments)]
fn text_finetune_loss(
    model: &ModelParams,
    tape: &mut Tape,
    bound: &Bound,
    cfg: &RunConfig,
    mode: FinetuneMode,
    batch: &Batch,
    targets: &BatchTargets,
    weights: &ClassWeights,
    labels: &[LabelEntry],
    names: &[TokenizedText],
    prompts: &Prompts,
    tokenizer: &Tokenizer,
    rng: &mut ChaCha8Rng,
) -> Result<(Var, [Option<Var>; 2]), Error> {
    let zi = model.image_encoder().encode(tape, bound, &batch.views[0])?;
    let t = Temperature::LogScale(bound.var(model.logit_scale_id()));
    let zn = match mode {
        FinetuneMode::NamesAndDescriptions | FinetuneMode::NamesOnly => {
            Some(model.text_encoder(TextRole::Name).encode(tape, bound, names)?)
        }
        _ => None,
    };
    let zd = match mode {
        FinetuneMode::NamesAndDescriptions | FinetuneMode::DescriptionsOnly => {
            let set = prompts.description(cfg.task);
            let tokens = labels
                .iter()
                .map(|l| {
                    let k = sample_template(set, rng)?;
                    Ok(tokenizer.tokenize(&render_prompt(set, k, &l.description)?))
                })
                .collect::<Result<Vec<_>, Error>>()?;
            Some(model.text_encoder(TextRole::Description).encode(tape, bound, &tokens)?)
        }
        _ => None,
    };
    let classes = zn.or(zd).expect("text mode encodes names or descriptions");
    let l_in = match targets {
        BatchTargets::Classes(y) => fer_image_name_loss(tape, zi, classes, y, weights, t)?,
        BatchTargets::MultiHot(y) => au_image_name_loss(tape, zi, classes, y, weights, t)?,
    };
    Ok(match (zn, zd) {
        (Some(zn), Some(zd)) => {
            let l_dn = name_description_loss(tape, zd, zn, t)?;
            (finetune_loss(tape, l_in, l_dn, cfg.lambda)?, [Some(l_in), Some(l_dn)])
        }
        _ => (tape.scale(l_in, cfg.lambda * 0.5), [Some(l_in), None]),
    })
}

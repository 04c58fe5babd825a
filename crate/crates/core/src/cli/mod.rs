//! The `clef` command line: config resolution and one handler per subcommand.
//!
//! Every config key doubles as a flag. `--lr 1e-3` sets `run.lr`,
//! `--synth.class_signal 0.1` a key in another section, and a bare name
//! shared by several sections (`--seed`, `--task`) sets all of them.

mod config;

use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};

pub use config::{is_bool_flag, is_config_flag, resolve, CliConfig, Override, Sources};

use crate::data::{generate_synthetic, load_jsonl, synthetic_labels, write_jsonl, DataError, Dataset};
use crate::eval::{evaluate, zero_shot_eval, ClassText, EvalError, EvalOptions, EvalReport};
use crate::gradsuite;
use crate::model::{ArchConfig, ModelError};
use crate::numerics::NumericsError;
use crate::text::{load_labels, write_labels, LabelEntry, TextError};
use crate::train::{finetune, load_checkpoint, pretrain, save_checkpoint, Checkpoint, Prompts, RunConfig, TrainError};
use crate::{Error, Task};

/// File names inside a run directory.
pub const CONFIG_FILE: &str = "config.toml";
pub const LOSS_FILE: &str = "loss.csv";
pub const CHECKPOINT_FILE: &str = "checkpoint.ckpt";
pub const SWEEP_FILE: &str = "sweep.csv";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("UsageError: {0}")]
    Usage(String),
    #[error("ConfigError: {0}")]
    Config(String),
    #[error("CheckFailed: {0}")]
    CheckFailed(String),
    #[error(transparent)]
    Lib(#[from] Error),
    #[error("IoError: {0}")]
    Io(#[from] std::io::Error),
}

macro_rules! via_lib {
    ($($t:ty),*) => {$(
        impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                CliError::Lib(e.into())
            }
        }
    )*};
}
via_lib!(DataError, TextError, TrainError, EvalError, ModelError, NumericsError);

impl CliError {
    /// 1 for anything the caller can fix by changing inputs, 2 otherwise.
    pub fn exit_code(&self) -> i32 {
        use Error as E;
        match self {
            CliError::Usage(_) | CliError::Config(_) => 1,
            CliError::Lib(
                E::Train(TrainError::Config(_) | TrainError::ArchMismatch(_))
                | E::Model(ModelError::Config(_) | ModelError::ArchMismatch(_))
                | E::Data(DataError::Config(_))
                | E::Eval(EvalError::ClassOverlap(_) | EvalError::SizeMismatch(_))
                | E::Numerics(NumericsError::UnknownCheck(_)),
            ) => 1,
            _ => 2,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "clef",
    version,
    about = "Activity-supervised contrastive pre-training and label-text fine-tuning",
    after_help = "Any config key is also a flag: --lr 0.001, --arch.width 32, --no-names, --linear-head.\n\
                  Precedence: CLEF_SEED < --config file < flags."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, clap::Args)]
struct Common {
    /// TOML file with [run], [synth] and [arch] sections.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ClassTextArg {
    Names,
    Descriptions,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a synthetic dataset (--out data.jsonl) and its labels next to it.
    GenData {
        #[command(flatten)]
        common: Common,
    },
    /// Activity pre-training into the run directory given by --out.
    Pretrain {
        #[command(flatten)]
        common: Common,
    },
    /// Label-text fine-tuning into the run directory given by --out.
    Finetune {
        #[command(flatten)]
        common: Common,
        /// Train on these class ids only, renumbered in the given order.
        #[arg(long, value_delimiter = ',')]
        classes: Option<Vec<usize>>,
    },
    /// Score a checkpoint on a labelled dataset.
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long)]
        report: Option<PathBuf>,
        /// Label text used as the class side.
        #[arg(long, value_enum, default_value = "names")]
        class_text: ClassTextArg,
    },
    /// Classify held-out classes by their description embeddings.
    ZeroShot {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long)]
        unseen_labels: PathBuf,
        /// Pick these class ids out of the data and the label file.
        #[arg(long, value_delimiter = ',')]
        classes: Option<Vec<usize>>,
        /// Class ids seen in training, checked against the unseen ones.
        #[arg(long, value_delimiter = ',')]
        seen: Option<Vec<usize>>,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Finite-difference checks of the losses and encoders.
    GradCheck {
        #[arg(long, conflicts_with = "loss")]
        all: bool,
        #[arg(long)]
        loss: Option<String>,
    },
    /// Fine-tune and evaluate once per lambda; prints `lambda,metric`.
    SweepLambda {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f32>,
        /// Held-out data; without it 20% of the data is held out.
        #[arg(long)]
        test_data: Option<PathBuf>,
    },
}

/// Splits config-key flags off `args`, leaving the rest for clap.
fn split_overrides(args: Vec<String>) -> (Vec<String>, Vec<Override>) {
    let mut rest = Vec::new();
    let mut overrides = Vec::new();
    let mut it = args.into_iter().peekable();
    while let Some(arg) = it.next() {
        let Some(body) = arg.strip_prefix("--") else {
            rest.push(arg);
            continue;
        };
        let (flag, inline) = match body.split_once('=') {
            Some((k, v)) => (k.to_string(), Some(v.to_string())),
            None => (body.to_string(), None),
        };
        if !is_config_flag(&flag) {
            rest.push(arg);
            continue;
        }
        let value = match inline {
            Some(v) => Some(v),
            None if is_bool_flag(&flag) => it.next_if(|v| v == "true" || v == "false"),
            None => it.next_if(|v| !v.starts_with("--")),
        };
        overrides.push(Override { flag, value });
    }
    (rest, overrides)
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code. Diagnostics go to stderr on one line.
pub fn main_with(args: Vec<String>, env_seed: Option<String>) -> i32 {
    match run(args, env_seed) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {}", e.to_string().replace('\n', " "));
            e.exit_code()
        }
    }
}

pub fn run(args: Vec<String>, env_seed: Option<String>) -> Result<(), CliError> {
    let (rest, overrides) = split_overrides(args);
    let cli = match Cli::try_parse_from(rest) {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            print!("{e}");
            return Ok(());
        }
        Err(e) => {
            let msg = e.to_string();
            let first = msg.lines().next().unwrap_or_default().trim_start_matches("error: ");
            return Err(CliError::Usage(first.to_string()));
        }
    };
    let resolve_for = |run: RunConfig, common: &Common| {
        resolve(
            run,
            &Sources {
                env_seed: env_seed.clone(),
                file: common.config.as_deref(),
                overrides: &overrides,
            },
        )
    };
    match cli.command {
        Command::GenData { common } => gen_data(&resolve_for(RunConfig::pretrain(), &common)?),
        Command::Pretrain { common } => run_pretrain(&resolve_for(RunConfig::pretrain(), &common)?),
        Command::Finetune { common, classes } => {
            run_finetune(&resolve_for(RunConfig::finetune(Task::Fer), &common)?, classes.as_deref())
        }
        Command::Eval {
            common,
            ckpt,
            report,
            class_text,
        } => {
            let text = match class_text {
                ClassTextArg::Names => ClassText::Names,
                ClassTextArg::Descriptions => ClassText::Descriptions,
            };
            run_eval(&resolve_for(RunConfig::finetune(Task::Fer), &common)?, &ckpt, report.as_deref(), text)
        }
        Command::ZeroShot {
            common,
            ckpt,
            unseen_labels,
            classes,
            seen,
            report,
        } => run_zero_shot(
            &resolve_for(RunConfig::finetune(Task::Fer), &common)?,
            &ckpt,
            &unseen_labels,
            classes.as_deref(),
            seen.as_deref().unwrap_or(&[]),
            report.as_deref(),
        ),
        Command::GradCheck { all, loss } => {
            if !overrides.is_empty() {
                return Err(CliError::Usage("grad-check takes no config keys".into()));
            }
            grad_check(if all { None } else { loss.as_deref() })
        }
        Command::SweepLambda {
            common,
            values,
            test_data,
        } => sweep_lambda(
            &resolve_for(RunConfig::finetune(Task::Fer), &common)?,
            &values,
            test_data.as_deref(),
        ),
    }
}

fn required<'a>(v: &'a Option<PathBuf>, key: &str) -> Result<&'a Path, CliError> {
    v.as_deref().ok_or_else(|| CliError::Config(format!("{key}: required")))
}

/// Labels stored next to a data file: `data.jsonl` → `data.labels.jsonl`.
pub fn labels_path(data: &Path) -> PathBuf {
    data.with_extension("labels.jsonl")
}

/// `path` itself, or the checkpoint inside it when it is a run directory.
pub fn checkpoint_path(path: &Path) -> PathBuf {
    if path.is_dir() {
        path.join(CHECKPOINT_FILE)
    } else {
        path.to_path_buf()
    }
}

fn load_data(cfg: &CliConfig) -> Result<(Dataset, Vec<LabelEntry>), CliError> {
    let Some(path) = &cfg.run.data else {
        return Ok((generate_synthetic(&cfg.synth)?, synthetic_labels(&cfg.synth)?));
    };
    let data = load_jsonl(path)?;
    let labels = match &cfg.run.labels {
        Some(l) => load_labels(l)?,
        None if labels_path(path).exists() => load_labels(labels_path(path))?,
        None => Vec::new(),
    };
    Ok((data, labels))
}

fn prompts(cfg: &CliConfig) -> Result<Prompts, CliError> {
    Ok(match &cfg.run.templates {
        Some(dir) => Prompts::from_dir(dir)?,
        None => Prompts::builtin(),
    })
}

fn load_ckpt(path: &Path, cfg: &CliConfig) -> Result<Checkpoint, CliError> {
    let ckpt = load_checkpoint(checkpoint_path(path))?;
    if cfg.arch != ArchConfig::default() {
        ckpt.check_arch(&cfg.arch)?;
    }
    Ok(ckpt)
}

fn check_data_dims(data: &Dataset, arch: &ArchConfig) -> Result<(), CliError> {
    if data.height != arch.image_height || data.width != arch.image_width {
        return Err(TrainError::ArchMismatch(format!(
            "data images are {}×{}, checkpoint expects {}×{}",
            data.height, data.width, arch.image_height, arch.image_width
        ))
        .into());
    }
    Ok(())
}

fn emit_report(report: &EvalReport, path: Option<&Path>) -> Result<(), CliError> {
    match path {
        Some(p) => {
            report.write(p)?;
            println!("{:?} headline {:.4} -> {}", report.task, report.headline(), p.display());
        }
        None => println!("{}", report.to_json()),
    }
    Ok(())
}

fn gen_data(cfg: &CliConfig) -> Result<(), CliError> {
    let out = required(&cfg.run.out, "out")?;
    let data = generate_synthetic(&cfg.synth)?;
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    write_jsonl(out, &data)?;
    write_labels(labels_path(out), &synthetic_labels(&cfg.synth)?)?;
    println!("{} samples -> {}", data.len(), out.display());
    Ok(())
}

fn run_pretrain(cfg: &CliConfig) -> Result<(), CliError> {
    let out = required(&cfg.run.out, "out")?;
    let (data, _) = load_data(cfg)?;
    let outcome = pretrain(&cfg.run, &cfg.arch, &data, &prompts(cfg)?)?;
    cfg.echo(out)?;
    outcome.log.write_csv(out.join(LOSS_FILE))?;
    save_checkpoint(&outcome.checkpoint(&cfg.run), out.join(CHECKPOINT_FILE))?;
    print_epochs(&outcome.log.epoch_means());
    Ok(())
}

fn print_epochs(means: &[f32]) {
    let mut stdout = std::io::stdout().lock();
    for (e, m) in means.iter().enumerate() {
        let _ = writeln!(stdout, "epoch {e} loss {m:.5}");
    }
}

fn select_classes(
    data: Dataset,
    labels: Vec<LabelEntry>,
    classes: Option<&[usize]>,
) -> Result<(Dataset, Vec<LabelEntry>), CliError> {
    let Some(ids) = classes else {
        return Ok((data, labels));
    };
    if data.task != Task::Fer {
        return Err(CliError::Config("classes: only single-label data can be restricted".into()));
    }
    if let Some(&bad) = ids.iter().find(|&&c| c >= labels.len()) {
        return Err(CliError::Config(format!("classes: id {bad} has no label among {}", labels.len())));
    }
    Ok((data.restrict_classes(ids), ids.iter().map(|&c| labels[c].clone()).collect()))
}

fn run_finetune(cfg: &CliConfig, classes: Option<&[usize]>) -> Result<(), CliError> {
    let out = required(&cfg.run.out, "out")?;
    let (data, labels) = load_data(cfg)?;
    let (data, labels) = select_classes(data, labels, classes)?;
    let init = match &cfg.run.init {
        Some(p) => Some(load_checkpoint(checkpoint_path(p))?.params),
        None => None,
    };
    let outcome = finetune(&cfg.run, &cfg.arch, &data, &labels, &prompts(cfg)?, init.as_ref())?;
    cfg.echo(out)?;
    outcome.log.write_csv(out.join(LOSS_FILE))?;
    save_checkpoint(&outcome.checkpoint(&cfg.run), out.join(CHECKPOINT_FILE))?;
    print_epochs(&outcome.log.epoch_means());
    Ok(())
}

fn run_eval(cfg: &CliConfig, ckpt: &Path, report: Option<&Path>, class_text: ClassText) -> Result<(), CliError> {
    let ckpt = load_ckpt(ckpt, cfg)?;
    let (data, labels) = load_data(cfg)?;
    check_data_dims(&data, &ckpt.params.arch)?;
    let opts = EvalOptions {
        class_text,
        ..EvalOptions::default()
    };
    let r = evaluate(&ckpt.params, &data, &labels, &prompts(cfg)?, &opts)?;
    emit_report(&r, report)
}

fn run_zero_shot(
    cfg: &CliConfig,
    ckpt: &Path,
    unseen_labels: &Path,
    classes: Option<&[usize]>,
    seen: &[usize],
    report: Option<&Path>,
) -> Result<(), CliError> {
    let ckpt = load_ckpt(ckpt, cfg)?;
    let (data, _) = load_data(cfg)?;
    check_data_dims(&data, &ckpt.params.arch)?;
    let (data, labels) = select_classes(data, load_labels(unseen_labels)?, classes)?;
    let unseen: Vec<usize> = match classes {
        Some(ids) => ids.to_vec(),
        None => (0..labels.len()).collect(),
    };
    let r = zero_shot_eval(&ckpt.params, &data, &labels, seen, &unseen, &prompts(cfg)?)?;
    emit_report(&r, report)
}

fn grad_check(only: Option<&str>) -> Result<(), CliError> {
    let outcomes = match only {
        Some(name) => vec![gradsuite::run_check(name)?],
        None => gradsuite::run_all()?,
    };
    let mut failed = Vec::new();
    for o in &outcomes {
        let verdict = if o.passed() { "ok" } else { "FAIL" };
        println!("{:<18} max rel err {:.3e}  {verdict}", o.name, o.report.max_relative_error);
        if !o.passed() {
            failed.push(o.name);
        }
    }
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::CheckFailed(failed.join(", ")))
    }
}

fn sweep_lambda(cfg: &CliConfig, values: &[f32], test_data: Option<&Path>) -> Result<(), CliError> {
    let (data, labels) = load_data(cfg)?;
    let (train, test) = match test_data {
        Some(p) => (data, load_jsonl(p)?),
        None => data.split(0.8, cfg.run.seed),
    };
    let init = match &cfg.run.init {
        Some(p) => Some(load_checkpoint(checkpoint_path(p))?.params),
        None => None,
    };
    let prompts = prompts(cfg)?;
    let class_text = if cfg.run.use_names {
        ClassText::Names
    } else {
        ClassText::Descriptions
    };
    let mut csv = String::from("lambda,metric\n");
    for &lambda in values {
        let run = RunConfig { lambda, ..cfg.run.clone() };
        let outcome = finetune(&run, &cfg.arch, &train, &labels, &prompts, init.as_ref())?;
        let opts = EvalOptions {
            class_text,
            ..EvalOptions::default()
        };
        let r = evaluate(&outcome.model, &test, &labels, &prompts, &opts)?;
        let line = format!("{lambda},{}\n", r.headline());
        print!("{line}");
        csv.push_str(&line);
    }
    if let Some(out) = &cfg.run.out {
        cfg.echo(out)?;
        std::fs::write(out.join(SWEEP_FILE), csv)?;
    }
    Ok(())
}

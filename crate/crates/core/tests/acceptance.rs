//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any fail.

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use clef::data::{generate_synthetic, synthetic_labels, AugmentPolicy, SynthConfig};
use clef::eval::{evaluate, EvalOptions};
use clef::experiments::{Arm, ProbeScores, Protocol};
use clef::gradsuite;
use clef::losses::{
    au_image_name_loss, fer_image_name_loss, finetune_total, name_description_loss, oracle, supcon_loss, ClassWeights,
    PairMasks, Temperature,
};
use clef::model::{init_params, ArchConfig};
use clef::numerics::{Tape, Var};
use clef::train::{
    adamw_step, decode_checkpoint, encode_checkpoint, finetune, load_checkpoint, save_checkpoint, AdamW, Checkpoint,
    OptimState, Prompts, RunConfig, Schedule,
};
use clef::{Task, Tensor};

type Verdict = Result<String, String>;

const SEEDS: [u64; 3] = [0, 1, 2];

fn check(ok: bool, detail: String) -> Verdict {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn mean(xs: impl IntoIterator<Item = f32>) -> f32 {
    let v: Vec<f32> = xs.into_iter().collect();
    v.iter().sum::<f32>() / v.len() as f32
}

fn gradient_suite() -> Verdict {
    let t = Instant::now();
    let outcomes = gradsuite::run_all().map_err(|e| e.to_string())?;
    let worst = outcomes
        .iter()
        .max_by(|a, b| a.report.max_relative_error.total_cmp(&b.report.max_relative_error))
        .expect("checks");
    let failed: Vec<_> = outcomes.iter().filter(|o| !o.passed()).map(|o| o.name).collect();
    let elapsed = t.elapsed();
    check(
        failed.is_empty() && elapsed < Duration::from_secs(120),
        format!(
            "{} checks, worst {} at {:.2e}, failed {failed:?}, {elapsed:.1?}",
            outcomes.len(),
            worst.name,
            worst.report.max_relative_error
        ),
    )
}

fn unit_rows(rng: &mut ChaCha8Rng, n: usize, d: usize) -> Tensor {
    let mut data = Vec::with_capacity(n * d);
    for _ in 0..n {
        let row: Vec<f32> = (0..d).map(|_| rng.random_range(-1.0f32..1.0)).collect();
        let norm = row.iter().map(|x| x * x).sum::<f32>().sqrt().max(1e-6);
        data.extend(row.iter().map(|x| x / norm));
    }
    Tensor::matrix(n, d, data)
}

fn tape_value(f: impl FnOnce(&mut Tape) -> Result<Var, clef::losses::LossError>) -> f64 {
    let mut tape = Tape::new();
    let v = f(&mut tape).expect("loss");
    tape.value(v).item() as f64
}

fn oracle_suite() -> Verdict {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst = [0.0f64; 4];
    for _ in 0..100 {
        let n = rng.random_range(1..=5);
        let c = rng.random_range(1..=6);
        let d = rng.random_range(2..=8);
        let temp = rng.random_range(0.05f32..1.0);
        let (tf, t64) = (Temperature::Fixed(temp), temp as f64);
        let (v1, v2) = (unit_rows(&mut rng, n, d), unit_rows(&mut rng, n, d));
        let labels: Vec<usize> = (0..n).map(|_| rng.random_range(0..3)).collect();
        let masks = PairMasks::image_image(&labels);
        let cands = Tensor::matrix(2 * n, d, [v1.data(), v2.data()].concat());
        let got = tape_value(|tp| {
            let (a, b) = (tp.constant(v1.clone()), tp.constant(cands.clone()));
            supcon_loss(tp, a, b, &masks, tf)
        });
        let want = oracle::supcon(&v1, &cands, &masks, t64);
        // summed over anchors, so compare relative to the value's size
        worst[0] = worst[0].max((got - want).abs() / want.abs().max(1.0));

        let (zd, zn) = (unit_rows(&mut rng, c, d), unit_rows(&mut rng, c, d));
        let got = tape_value(|tp| {
            let (a, b) = (tp.constant(zd.clone()), tp.constant(zn.clone()));
            name_description_loss(tp, a, b, tf)
        });
        worst[1] = worst[1].max((got - oracle::name_description(&zd, &zn, t64)).abs());

        let raw: Vec<f64> = (0..c).map(|_| rng.random_range(0.1..2.0)).collect();
        let w = ClassWeights::normalized(&raw);
        let targets: Vec<usize> = (0..n).map(|_| rng.random_range(0..c)).collect();
        let got = tape_value(|tp| {
            let (a, b) = (tp.constant(v1.clone()), tp.constant(zn.clone()));
            fer_image_name_loss(tp, a, b, &targets, &w, tf)
        });
        worst[2] = worst[2].max((got - oracle::fer_image_name(&v1, &zn, &targets, &w.w, t64)).abs());

        let hot: Vec<Vec<u8>> = (0..n).map(|_| (0..c).map(|_| rng.random_range(0..2u8)).collect()).collect();
        let got = tape_value(|tp| {
            let (a, b) = (tp.constant(v1.clone()), tp.constant(zn.clone()));
            au_image_name_loss(tp, a, b, &hot, &w, tf)
        });
        worst[3] = worst[3].max((got - oracle::au_image_name(&v1, &zn, &hot, &w.w, t64)).abs());
    }
    let elapsed = t.elapsed();
    check(
        worst.iter().all(|&e| e < 1e-5) && elapsed < Duration::from_secs(60),
        format!("100 instances each, worst errors supcon/dn/fer/au {:.1e} {:.1e} {:.1e} {:.1e}, {elapsed:.1?}", worst[0], worst[1], worst[2], worst[3]),
    )
}

fn analytic_anchors() -> Verdict {
    let ln2 = std::f64::consts::LN_2;
    let mut notes = Vec::new();
    let mut ok = true;

    // one candidate, which is the positive
    let a = Tensor::matrix(1, 2, vec![0.6, 0.8]);
    let c = Tensor::matrix(1, 2, vec![1.0, 0.0]);
    let masks = PairMasks {
        n_anchors: 1,
        n_candidates: 1,
        positive: vec![true],
        valid: vec![true],
        positive_count: vec![1],
    };
    let single = tape_value(|tp| {
        let (x, y) = (tp.constant(a.clone()), tp.constant(c.clone()));
        supcon_loss(tp, x, y, &masks, Temperature::Fixed(0.25))
    });
    ok &= single.abs() < 1e-7;
    notes.push(format!("single-candidate supcon {single:.1e}"));

    let one = Tensor::matrix(1, 2, vec![0.6, 0.8]);
    let dn1 = tape_value(|tp| {
        let (x, y) = (tp.constant(one.clone()), tp.constant(one.clone()));
        name_description_loss(tp, x, y, Temperature::Fixed(0.5))
    });
    ok &= dn1.abs() < 1e-7;
    notes.push(format!("L_DN(C=1) {dn1:.1e}"));

    // orthogonal names give equal logits for both classes
    let d = Tensor::matrix(2, 3, vec![0.0, 0.0, 1.0, 0.0, 0.0, 1.0]);
    let n = Tensor::matrix(2, 3, vec![1.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
    let dn2 = tape_value(|tp| {
        let (x, y) = (tp.constant(d.clone()), tp.constant(n.clone()));
        name_description_loss(tp, x, y, Temperature::Fixed(0.5))
    });
    ok &= (dn2 - ln2).abs() <= 1e-6;
    notes.push(format!("uniform L_DN(C=2) - ln2 = {:.1e}", dn2 - ln2));

    let zi = Tensor::matrix(2, 4, vec![0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0]);
    let zn = Tensor::matrix(3, 4, vec![1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
    let y = vec![vec![1, 0, 1], vec![0, 1, 1]];
    let au = tape_value(|tp| {
        let (x, z) = (tp.constant(zi.clone()), tp.constant(zn.clone()));
        au_image_name_loss(tp, x, z, &y, &ClassWeights::uniform(3), Temperature::Fixed(0.07))
    });
    ok &= (au - 3.0 * ln2).abs() <= 1e-6;
    notes.push(format!("zero-logit AU - 3 ln2 = {:.1e}", au - 3.0 * ln2));

    let total = finetune_total(0.5, 0.7, 2.0).map_err(|e| e.to_string())?;
    ok &= total == 0.85;
    notes.push(format!("(2*0.5+0.7)/2 = {total}"));
    check(ok, notes.join("; "))
}

fn clef_bin() -> &'static str {
    env!("CARGO_BIN_EXE_clef")
}

fn run_cli(args: &[&str], dir: &Path) -> Result<(), String> {
    let out = Command::new(clef_bin())
        .args(args)
        .current_dir(dir)
        .env_remove("CLEF_SEED")
        .output()
        .map_err(|e| e.to_string())?;
    if out.status.success() {
        Ok(())
    } else {
        Err(format!("{args:?}: {}", String::from_utf8_lossy(&out.stderr).trim()))
    }
}

fn determinism() -> Verdict {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let common = ["--samples-per-activity", "16", "--epochs", "2", "--batch-size", "16", "--seed", "7"];
    for run in ["a", "b"] {
        let mut pre = vec!["pretrain", "--out"];
        let pre_dir = format!("pre_{run}");
        pre.push(&pre_dir);
        pre.extend(common);
        run_cli(&pre, dir.path())?;
        let ft_dir = format!("ft_{run}");
        let mut ft = vec!["finetune", "--init", "pre_a", "--out", &ft_dir];
        ft.extend(common);
        run_cli(&ft, dir.path())?;
    }
    let read = |p: &str| std::fs::read(dir.path().join(p)).map_err(|e| format!("{p}: {e}"));
    let mut compared = 0;
    for stage in ["pre", "ft"] {
        for file in ["checkpoint.ckpt", "loss.csv"] {
            let (a, b) = (read(&format!("{stage}_a/{file}"))?, read(&format!("{stage}_b/{file}"))?);
            if a != b {
                return Err(format!("{stage}/{file} differs between runs"));
            }
            compared += a.len();
        }
    }
    check(true, format!("pre-training and fine-tuning reruns byte-identical ({compared} bytes compared)"))
}

fn overfit_one_batch(task: Task) -> Result<f32, String> {
    let synth = SynthConfig {
        n_activities: 4,
        n_classes: 4,
        samples_per_activity: 4,
        task,
        seed: 3,
        ..SynthConfig::default()
    };
    let data = generate_synthetic(&synth).map_err(|e| e.to_string())?;
    let labels = synthetic_labels(&synth).map_err(|e| e.to_string())?;
    let cfg = RunConfig {
        batch_size: 16,
        epochs: 200,
        warmup_epochs: 0,
        min_lr: 1e-3,
        augment: AugmentPolicy::identity(),
        ..RunConfig::finetune(task)
    };
    let prompts = Prompts::builtin();
    let out = finetune(&cfg, &ArchConfig::default(), &data, &labels, &prompts, None).map_err(|e| e.to_string())?;
    let r = evaluate(&out.model, &data, &labels, &prompts, &EvalOptions::default()).map_err(|e| e.to_string())?;
    Ok(match task {
        Task::Fer => r.accuracy,
        Task::Aur => r.macro_f1,
    })
}

fn overfit_harness() -> Verdict {
    let fer = overfit_one_batch(Task::Fer)?;
    let aur = overfit_one_batch(Task::Aur)?;
    check(
        fer == 1.0 && aur == 1.0,
        format!("16 samples, 200 steps: FER accuracy {fer}, AUR macro F1 {aur}"),
    )
}

struct SeedResults {
    arms: Vec<(Arm, f32)>,
    activity_probe: ProbeScores,
    self_view_probe: ProbeScores,
    zero_shot: f32,
    elapsed: Duration,
}

/// Everything criteria 6 to 8 need from one seed, sharing one activity
/// pre-training.
fn run_seed(p: &Protocol, seed: u64) -> Result<SeedResults, String> {
    let t = Instant::now();
    let e = |e: clef::Error| e.to_string();
    let split = p.data(seed).map_err(e)?;
    let full = p.pretrained(&split.train, true, seed).map_err(e)?;
    let image_only = p.pretrained(&split.train, false, seed).map_err(e)?;
    let mut arms = Vec::new();
    for arm in Arm::ALL {
        let init = match arm {
            Arm::TextOnly | Arm::LinearHead => None,
            Arm::NoActivityText => Some(&image_only),
            _ => Some(&full),
        };
        arms.push((arm, p.run_arm(arm, &split, init, seed).map_err(e)?.headline()));
    }
    let benchmark = t.elapsed();
    let self_view = p.pretrained_self_view(&split.train, seed).map_err(e)?;
    let activity_probe = p.probe_scores(&full, &split.test).map_err(e)?;
    let self_view_probe = p.probe_scores(&self_view, &split.test).map_err(e)?;
    let zero_shot = p.zero_shot_from(&split, &full, &[0, 1, 2], &[3, 4, 5, 6], seed).map_err(e)?.accuracy;
    Ok(SeedResults {
        arms,
        activity_probe,
        self_view_probe,
        zero_shot,
        elapsed: benchmark,
    })
}

fn benchmark(results: &[SeedResults]) -> Verdict {
    let arm_mean = |arm: Arm| mean(results.iter().map(|r| r.arms.iter().find(|(a, _)| *a == arm).expect("arm").1));
    let means: Vec<(Arm, f32)> = Arm::ALL.iter().map(|&a| (a, arm_mean(a))).collect();
    let clef = arm_mean(Arm::Clef);
    let baselines = clef > arm_mean(Arm::TextOnly) && clef > arm_mean(Arm::LinearHead);
    let ablations = [Arm::NoActivityText, Arm::NoNames, Arm::NoDescriptions]
        .iter()
        .all(|&a| clef >= arm_mean(a));
    let slowest = results.iter().map(|r| r.elapsed).max().unwrap_or_default();
    let table: Vec<String> = means.iter().map(|(a, m)| format!("{} {m:.4}", a.label())).collect();
    check(
        baselines && ablations && slowest < Duration::from_secs(600),
        format!(
            "mean test accuracy over {} seeds: {}; beats baselines {baselines}, >= ablations {ablations}; slowest run {slowest:.0?}",
            results.len(),
            table.join(", ")
        ),
    )
}

fn disentanglement(results: &[SeedResults]) -> Verdict {
    let act_id = mean(results.iter().map(|r| r.activity_probe.identity));
    let ssl_id = mean(results.iter().map(|r| r.self_view_probe.identity));
    let act_act = mean(results.iter().map(|r| r.activity_probe.activity));
    let ssl_act = mean(results.iter().map(|r| r.self_view_probe.activity));
    check(
        act_id < ssl_id && act_act >= ssl_act,
        format!("identity probe {act_id:.3} (activity) vs {ssl_id:.3} (self-view); activity probe {act_act:.3} vs {ssl_act:.3}"),
    )
}

fn zero_shot(results: &[SeedResults]) -> Verdict {
    let accs: Vec<f32> = results.iter().map(|r| r.zero_shot).collect();
    let m = mean(accs.iter().copied());
    check(m > 1.5 * 0.25, format!("train 3 classes, test 4 held out: accuracy {accs:.3?}, mean {m:.3} vs bar 0.375"))
}

fn schedule_and_optimizer() -> Verdict {
    let mut notes = Vec::new();
    let s = Schedule::new(1e-3, 1e-5, 10, 110).map_err(|e| e.to_string())?;
    let lr = |k| s.lr_at(k).map_err(|e| e.to_string());
    let mid = 1e-5 + 0.5 * (1e-3 - 1e-5);
    let ok_sched = lr(0)? == 0.0 && lr(10)? == 1e-3 && lr(110)? == 1e-5 && lr(60)? == mid as f32;
    notes.push(format!("lr_at 0/10/60/110 = {}/{}/{}/{}", lr(0)?, lr(10)?, lr(60)?, lr(110)?));

    let mut store = clef::numerics::ParamStore::new();
    store.insert("w", Tensor::matrix(2, 2, vec![1.0, -2.0, 0.5, 3.0]));
    let before = store.value(store.ids().next().expect("param")).data().to_vec();
    let mut state = OptimState::new(&store);
    let hp = AdamW {
        weight_decay: 0.1,
        ..AdamW::default()
    };
    adamw_step(&mut store, &mut state, 0.01, &hp).map_err(|e| e.to_string())?;
    let after = store.value(store.ids().next().expect("param")).data().to_vec();
    let factor = 1.0f32 - 0.01 * 0.1;
    let ok_decay = before.iter().zip(&after).all(|(b, a)| *a == b * factor);
    notes.push(format!("zero-grad step factor {factor}: {after:?}"));

    let model = init_params(&ArchConfig::default(), 11).map_err(|e| e.to_string())?;
    let mut optim = OptimState::new(&model.store);
    optim.m[0][0] = 0.25;
    optim.step = 9;
    let ckpt = Checkpoint::new(model, Some(optim), 9, 11, Task::Aur);
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let path = dir.path().join("m.ckpt");
    save_checkpoint(&ckpt, &path).map_err(|e| e.to_string())?;
    let back = load_checkpoint(&path).map_err(|e| e.to_string())?;
    let bytes = encode_checkpoint(&ckpt).map_err(|e| e.to_string())?;
    let ok_round = back.params == ckpt.params
        && back.optim == ckpt.optim
        && back.meta == ckpt.meta
        && encode_checkpoint(&back).map_err(|e| e.to_string())? == bytes;
    std::fs::write(&path, &bytes[..bytes.len() / 2]).map_err(|e| e.to_string())?;
    let truncated = load_checkpoint(&path).is_err() && decode_checkpoint(&bytes[..bytes.len() - 1]).is_err();
    notes.push(format!("checkpoint round trip bit-exact {ok_round}, truncated file rejected {truncated}"));
    check(ok_sched && ok_decay && ok_round && truncated, notes.join("; "))
}

fn main() {
    let mut verdicts: Vec<(u32, &str, Verdict)> = Vec::new();
    let mut report = |n: u32, name: &'static str, v: Verdict| {
        match &v {
            Ok(d) => println!("PASS criterion {n} ({name}): {d}"),
            Err(d) => println!("FAIL criterion {n} ({name}): {d}"),
        }
        verdicts.push((n, name, v));
    };
    report(1, "gradient suite", gradient_suite());
    report(2, "oracle suite", oracle_suite());
    report(3, "analytic anchors", analytic_anchors());
    report(4, "determinism", determinism());
    report(5, "overfit harness", overfit_harness());

    let protocol = Protocol::default();
    let seeds: Result<Vec<SeedResults>, String> = SEEDS.iter().map(|&s| run_seed(&protocol, s)).collect();
    match seeds {
        Ok(results) => {
            report(6, "end-to-end benchmark", benchmark(&results));
            report(7, "disentanglement", disentanglement(&results));
            report(8, "zero-shot", zero_shot(&results));
        }
        Err(e) => {
            for (n, name) in [(6, "end-to-end benchmark"), (7, "disentanglement"), (8, "zero-shot")] {
                report(n, name, Err(e.clone()));
            }
        }
    }
    report(9, "schedule, optimizer, checkpoint", schedule_and_optimizer());

    let failed = verdicts.iter().filter(|(_, _, v)| v.is_err()).count();
    println!("{} of {} criteria passed", verdicts.len() - failed, verdicts.len());
    if failed > 0 {
        std::process::exit(1);
    }
}

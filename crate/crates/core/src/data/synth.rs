//! Synthetic facial-behavior data with controllable identity, activity and
//! class factors.
//!
//! Every class switches on a fixed subset of visual attributes. An image is a
//! mid-gray canvas plus an identity template, the attribute patterns of its
//! class and Gaussian noise. Templates and patterns are left-right symmetric,
//! like faces, so horizontal flips keep the class evidence intact.
//!
//! Samples are grouped by activity. Each activity elicits one target class
//! with probability `activity_target_peak` and otherwise a uniformly chosen
//! other class. Activity texts and class descriptions are built from the same
//! attribute words, which is what makes description-based zero-shot possible.

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{DataError, Dataset, Image, Sample, Target};
use crate::text::LabelEntry;
use crate::Task;

/// Words naming the visual attributes, index-aligned with attribute ids.
pub const ATTRIBUTE_WORDS: [&str; 16] = [
    "brows", "squint", "cheeks", "dimples", "frown", "smile", "jaw", "nostrils", "pout", "lids",
    "wrinkles", "gape", "chin", "teeth", "glare", "grimace",
];

const CLASS_NAMES: [&str; 16] = [
    "anger", "contempt", "disgust", "fear", "happiness", "neutral", "sadness", "surprise", "pride",
    "shame", "boredom", "relief", "awe", "guilt", "envy", "calm",
];

const STIMULI: [&str; 16] = [
    "joke", "documentary", "noise", "song", "threat", "icewater", "insult", "odor", "avatar",
    "phonecall", "quiz", "darts", "puzzle", "music", "story", "gift",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthConfig {
    pub n_identities: usize,
    pub n_activities: usize,
    pub n_classes: usize,
    pub n_attributes: usize,
    pub attributes_per_class: usize,
    pub samples_per_activity: usize,
    pub activity_target_peak: f32,
    pub identity_signal: f32,
    pub class_signal: f32,
    pub noise_sigma: f32,
    pub height: usize,
    pub width: usize,
    pub task: Task,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_identities: 20,
            n_activities: 8,
            n_classes: 8,
            n_attributes: 12,
            attributes_per_class: 3,
            samples_per_activity: 500,
            activity_target_peak: 0.7,
            identity_signal: 0.3,
            class_signal: 0.2,
            noise_sigma: 0.1,
            height: 16,
            width: 16,
            task: Task::Fer,
            seed: 0,
        }
    }
}

fn binomial(n: usize, k: usize) -> usize {
    (0..k).fold(1usize, |acc, i| acc.saturating_mul(n - i) / (i + 1))
}

impl SynthConfig {
    pub fn validate(&self) -> Result<(), DataError> {
        let err = |m: String| Err(DataError::Config(m));
        if self.n_identities == 0 || self.n_activities == 0 || self.n_classes < 2 {
            return err("n_identities and n_activities must be positive, n_classes at least 2".into());
        }
        if self.n_attributes == 0 || self.n_attributes > ATTRIBUTE_WORDS.len() {
            return err(format!("n_attributes must be in 1..={}", ATTRIBUTE_WORDS.len()));
        }
        if self.n_classes > CLASS_NAMES.len() || self.n_activities > STIMULI.len() {
            return err(format!(
                "at most {} classes and {} activities are supported",
                CLASS_NAMES.len(),
                STIMULI.len()
            ));
        }
        if self.attributes_per_class == 0 || self.attributes_per_class > self.n_attributes {
            return err("attributes_per_class must be in 1..=n_attributes".into());
        }
        if binomial(self.n_attributes, self.attributes_per_class) < self.n_classes {
            return err("too few attribute combinations for n_classes distinct classes".into());
        }
        let peak = self.activity_target_peak;
        if !(peak > 1.0 / self.n_classes as f32 && peak <= 1.0) {
            return err(format!("activity_target_peak {peak} must be in (1/n_classes, 1]"));
        }
        for (name, v) in [
            ("identity_signal", self.identity_signal),
            ("class_signal", self.class_signal),
            ("noise_sigma", self.noise_sigma),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return err(format!("{name} must be finite and non-negative"));
            }
        }
        if self.height < 2 || self.width < 2 {
            return err("image must be at least 2×2".into());
        }
        Ok(())
    }

    /// Number of target entries per sample: classes for FER, attributes for AUR.
    pub fn n_targets(&self) -> usize {
        match self.task {
            Task::Fer => self.n_classes,
            Task::Aur => self.n_attributes,
        }
    }
}

/// Structural factors shared by all samples of one configuration.
struct World {
    identity_templates: Vec<Vec<f32>>,
    attribute_patterns: Vec<Vec<f32>>,
    class_attributes: Vec<Vec<usize>>,
    activity_targets: Vec<usize>,
}

fn mirror_fill(h: usize, w: usize, mut left: impl FnMut(usize, usize) -> f32) -> Vec<f32> {
    let mut out = vec![0.0; h * w];
    let half = w.div_ceil(2);
    for r in 0..h {
        for c in 0..half {
            let v = left(r, c);
            out[r * w + c] = v;
            out[r * w + (w - 1 - c)] = v;
        }
    }
    out
}

fn box_blur(src: &[f32], h: usize, w: usize) -> Vec<f32> {
    let mut out = vec![0.0; h * w];
    for r in 0..h {
        for c in 0..w {
            let mut s = 0.0;
            let mut n = 0.0;
            for dr in -1i64..=1 {
                for dc in -1i64..=1 {
                    let (rr, cc) = (r as i64 + dr, c as i64 + dc);
                    if rr >= 0 && cc >= 0 && (rr as usize) < h && (cc as usize) < w {
                        s += src[rr as usize * w + cc as usize];
                        n += 1.0;
                    }
                }
            }
            out[r * w + c] = s / n;
        }
    }
    out
}

fn normalize_peak(v: &mut [f32]) {
    let m = v.iter().fold(0.0f32, |a, x| a.max(x.abs()));
    if m > 0.0 {
        v.iter_mut().for_each(|x| *x /= m);
    }
}

impl World {
    fn build(cfg: &SynthConfig) -> World {
        let (h, w) = (cfg.height, cfg.width);
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(0);

        let identity_templates = (0..cfg.n_identities)
            .map(|_| {
                let raw = mirror_fill(h, w, |_, _| rng.random_range(-1.0f32..1.0));
                let blurred = box_blur(&box_blur(&raw, h, w), h, w);
                // blur sums in a different order on each side; restore exact symmetry
                let mut t = mirror_fill(h, w, |r, c| blurred[r * w + c]);
                normalize_peak(&mut t);
                t
            })
            .collect();

        let half = w.div_ceil(2);
        let attribute_patterns = (0..cfg.n_attributes)
            .map(|_| {
                let ph = rng.random_range(3..=5.min(h));
                let pw = rng.random_range(2..=4.min(half));
                let r0 = rng.random_range(0..=h - ph);
                let c0 = rng.random_range(0..=half - pw);
                let texture: Vec<f32> = (0..ph * pw)
                    .map(|_| if rng.random_bool(0.5) { 1.0 } else { -1.0 })
                    .collect();
                mirror_fill(h, w, |r, c| {
                    if (r0..r0 + ph).contains(&r) && (c0..c0 + pw).contains(&c) {
                        texture[(r - r0) * pw + (c - c0)]
                    } else {
                        0.0
                    }
                })
            })
            .collect();

        let mut class_attributes: Vec<Vec<usize>> = Vec::with_capacity(cfg.n_classes);
        let all: Vec<usize> = (0..cfg.n_attributes).collect();
        while class_attributes.len() < cfg.n_classes {
            let mut pick: Vec<usize> = all
                .choose_multiple(&mut rng, cfg.attributes_per_class)
                .copied()
                .collect();
            pick.sort_unstable();
            if !class_attributes.contains(&pick) {
                class_attributes.push(pick);
            }
        }

        let activity_targets = (0..cfg.n_activities).map(|a| a % cfg.n_classes).collect();
        World {
            identity_templates,
            attribute_patterns,
            class_attributes,
            activity_targets,
        }
    }
}

fn attribute_phrase(attrs: &[usize]) -> String {
    let words: Vec<&str> = attrs.iter().map(|&a| ATTRIBUTE_WORDS[a]).collect();
    match words.as_slice() {
        [] => String::new(),
        [one] => (*one).to_string(),
        [init @ .., last] => format!("{} and {}", init.join(", "), last),
    }
}

fn activity_text(activity: usize, target_attrs: &[usize]) -> String {
    format!(
        "Experience the {} task. The target expression shows {}",
        STIMULI[activity],
        attribute_phrase(target_attrs)
    )
}

/// Name and description per target index of a synthetic configuration.
pub fn synthetic_labels(cfg: &SynthConfig) -> Result<Vec<LabelEntry>, DataError> {
    cfg.validate()?;
    let world = World::build(cfg);
    Ok(match cfg.task {
        Task::Fer => world
            .class_attributes
            .iter()
            .enumerate()
            .map(|(c, attrs)| LabelEntry {
                name: CLASS_NAMES[c].to_string(),
                description: format!("The face shows {}", attribute_phrase(attrs)),
            })
            .collect(),
        Task::Aur => (0..cfg.n_attributes)
            .map(|a| LabelEntry {
                name: format!("{} action", ATTRIBUTE_WORDS[a]),
                description: format!("The {} of the face are activated", ATTRIBUTE_WORDS[a]),
            })
            .collect(),
    })
}

/// Deterministic synthetic dataset; sample `i` draws from its own rng stream.
pub fn generate_synthetic(cfg: &SynthConfig) -> Result<Dataset, DataError> {
    cfg.validate()?;
    let world = World::build(cfg);
    let (h, w) = (cfg.height, cfg.width);
    let normal = Normal::new(0.0f32, 1.0).expect("unit normal");
    let total = cfg.n_activities * cfg.samples_per_activity;
    let mut samples = Vec::with_capacity(total);
    for i in 0..total {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(i as u64 + 1);
        let activity = i / cfg.samples_per_activity;
        let target_class = world.activity_targets[activity];
        let class = if rng.random::<f32>() < cfg.activity_target_peak {
            target_class
        } else {
            let k = rng.random_range(0..cfg.n_classes - 1);
            if k >= target_class {
                k + 1
            } else {
                k
            }
        };
        let identity = rng.random_range(0..cfg.n_identities);
        let id_t = &world.identity_templates[identity];
        let attrs = &world.class_attributes[class];
        let pixels = (0..h * w)
            .map(|p| {
                let class_part: f32 = attrs.iter().map(|&a| world.attribute_patterns[a][p]).sum();
                let noise = if cfg.noise_sigma > 0.0 {
                    cfg.noise_sigma * normal.sample(&mut rng)
                } else {
                    0.0
                };
                (0.5 + cfg.identity_signal * id_t[p] + cfg.class_signal * class_part + noise).clamp(0.0, 1.0)
            })
            .collect();
        let target = match cfg.task {
            Task::Fer => Target::Class(class),
            Task::Aur => {
                let mut hot = vec![0u8; cfg.n_attributes];
                attrs.iter().for_each(|&a| hot[a] = 1);
                Target::MultiHot(hot)
            }
        };
        samples.push(Sample {
            id: format!("s{i:05}"),
            image: Image::new(h, w, pixels),
            identity,
            activity,
            activity_text: activity_text(activity, &world.class_attributes[target_class]),
            target,
        });
    }
    Ok(Dataset {
        height: h,
        width: w,
        task: cfg.task,
        n_classes: cfg.n_targets(),
        samples,
    })
}

/// Latent class of each sample, recoverable for both tasks.
#[cfg(test)]
pub(crate) fn latent_classes(cfg: &SynthConfig, ds: &Dataset) -> Vec<usize> {
    let world = World::build(cfg);
    ds.samples
        .iter()
        .map(|s| match &s.target {
            Target::Class(c) => *c,
            Target::MultiHot(hot) => {
                let on: Vec<usize> = (0..hot.len()).filter(|&a| hot[a] == 1).collect();
                world.class_attributes.iter().position(|a| *a == on).unwrap()
            }
        })
        .collect()
}

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{augment, AugmentPolicy, DataError, Dataset, Image, Target};

/// How to cut a dataset into batches for one pass.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchPlan {
    pub batch_size: usize,
    /// `None` keeps dataset order.
    pub shuffle_seed: Option<u64>,
    pub two_views: bool,
    pub policy: AugmentPolicy,
    pub drop_last: bool,
    /// Contrastive batches need at least two samples.
    pub contrastive: bool,
    pub augment_seed: u64,
}

impl BatchPlan {
    /// Sequential, un-augmented, keep-last batches for evaluation.
    pub fn eval(batch_size: usize) -> Self {
        Self {
            batch_size,
            shuffle_seed: None,
            two_views: false,
            policy: AugmentPolicy::identity(),
            drop_last: false,
            contrastive: false,
            augment_seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    /// Dataset positions of the samples in this batch.
    pub indices: Vec<usize>,
    /// One entry per view; each holds `indices.len()` images.
    pub views: Vec<Vec<Image>>,
    pub activities: Vec<usize>,
    pub identities: Vec<usize>,
    pub targets: Vec<Target>,
}

impl Batch {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// Activity labels repeated once per view (2n for two views).
    pub fn view_activity_labels(&self) -> Vec<usize> {
        (0..self.views.len()).flat_map(|_| self.activities.iter().copied()).collect()
    }
}

pub fn make_batches(dataset: &Dataset, plan: &BatchPlan) -> Result<Vec<Batch>, DataError> {
    if plan.batch_size == 0 {
        return Err(DataError::Config("batch_size must be positive".into()));
    }
    if plan.contrastive && plan.batch_size < 2 {
        return Err(DataError::BatchTooSmall { size: plan.batch_size });
    }
    plan.policy.validate(dataset.height.max(1), dataset.width.max(1))?;

    let mut order: Vec<usize> = (0..dataset.len()).collect();
    if let Some(seed) = plan.shuffle_seed {
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    }
    let n_views = if plan.two_views { 2 } else { 1 };
    let mut batches = Vec::new();
    for chunk in order.chunks(plan.batch_size) {
        if plan.drop_last && chunk.len() < plan.batch_size {
            break;
        }
        if plan.contrastive && chunk.len() < 2 {
            return Err(DataError::BatchTooSmall { size: chunk.len() });
        }
        let views = (0..n_views)
            .map(|view| {
                chunk
                    .iter()
                    .map(|&i| {
                        let mut rng = ChaCha8Rng::seed_from_u64(plan.augment_seed);
                        rng.set_stream((i * 2 + view) as u64);
                        augment(&dataset.samples[i].image, &plan.policy, &mut rng)
                    })
                    .collect()
            })
            .collect();
        batches.push(Batch {
            indices: chunk.to_vec(),
            views,
            activities: chunk.iter().map(|&i| dataset.samples[i].activity).collect(),
            identities: chunk.iter().map(|&i| dataset.samples[i].identity).collect(),
            targets: chunk.iter().map(|&i| dataset.samples[i].target.clone()).collect(),
        });
    }
    if plan.contrastive && batches.is_empty() && !dataset.is_empty() {
        return Err(DataError::BatchTooSmall { size: dataset.len() });
    }
    Ok(batches)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate_synthetic, SynthConfig};

    fn ds(n_per_activity: usize) -> Dataset {
        generate_synthetic(&SynthConfig {
            samples_per_activity: n_per_activity,
            n_activities: 2,
            n_classes: 2,
            ..SynthConfig::default()
        })
        .unwrap()
    }

    fn plan(bs: usize) -> BatchPlan {
        BatchPlan {
            batch_size: bs,
            shuffle_seed: Some(1),
            two_views: true,
            policy: AugmentPolicy::full(),
            drop_last: true,
            contrastive: true,
            augment_seed: 3,
        }
    }

    #[test]
    fn drop_last_sizes() {
        let b = make_batches(&ds(5), &plan(4)).unwrap();
        assert_eq!(b.iter().map(Batch::len).collect::<Vec<_>>(), vec![4, 4]);
    }

    #[test]
    fn keep_last_for_eval() {
        let b = make_batches(&ds(5), &BatchPlan::eval(4)).unwrap();
        assert_eq!(b.iter().map(Batch::len).collect::<Vec<_>>(), vec![4, 4, 2]);
        assert_eq!(b[0].indices, vec![0, 1, 2, 3]);
        assert_eq!(b[0].views.len(), 1);
    }

    #[test]
    fn two_views_duplicate_labels() {
        let d = ds(5);
        let b = make_batches(&d, &plan(4)).unwrap();
        for batch in &b {
            assert_eq!(batch.views.len(), 2);
            assert_eq!(batch.views[0].len(), batch.views[1].len());
            let labels = batch.view_activity_labels();
            assert_eq!(labels.len(), 2 * batch.len());
            assert_eq!(labels[..batch.len()], labels[batch.len()..]);
            for (k, &i) in batch.indices.iter().enumerate() {
                assert_eq!(batch.activities[k], d.samples[i].activity);
            }
        }
    }

    #[test]
    fn same_seed_same_batches() {
        let d = ds(5);
        assert_eq!(make_batches(&d, &plan(4)).unwrap(), make_batches(&d, &plan(4)).unwrap());
        let other = BatchPlan {
            shuffle_seed: Some(2),
            ..plan(4)
        };
        assert_ne!(
            make_batches(&d, &plan(4)).unwrap()[0].indices,
            make_batches(&d, &other).unwrap()[0].indices
        );
    }

    #[test]
    fn contrastive_batches_need_two_samples() {
        assert!(matches!(
            make_batches(&ds(5), &plan(1)),
            Err(DataError::BatchTooSmall { size: 1 })
        ));
        let keep = BatchPlan {
            drop_last: false,
            ..plan(3)
        };
        // 10 samples in threes leaves a singleton
        assert!(matches!(
            make_batches(&ds(5), &keep),
            Err(DataError::BatchTooSmall { size: 1 })
        ));
    }
}

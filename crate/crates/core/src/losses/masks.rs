use super::LossError;

/// Positive and valid anchor/candidate pairs, row-major `[n_anchors × n_candidates]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PairMasks {
    pub n_anchors: usize,
    pub n_candidates: usize,
    pub positive: Vec<bool>,
    pub valid: Vec<bool>,
    pub positive_count: Vec<usize>,
}

/// Candidate `j` is valid for anchor `i` unless `self_map[i] == j`; it is
/// positive when also its label equals the anchor's.
pub fn build_pair_masks(
    anchor_labels: &[usize],
    candidate_labels: &[usize],
    self_map: Option<&[usize]>,
) -> Result<PairMasks, LossError> {
    let (n, m) = (anchor_labels.len(), candidate_labels.len());
    if let Some(map) = self_map {
        if map.len() != n {
            return Err(LossError::LengthMismatch {
                what: "self_map",
                expected: n,
                got: map.len(),
            });
        }
        if let Some(&bad) = map.iter().find(|&&j| j >= m) {
            return Err(LossError::LengthMismatch {
                what: "self_map target",
                expected: m,
                got: bad,
            });
        }
    }
    let mut positive = vec![false; n * m];
    let mut valid = vec![true; n * m];
    let mut positive_count = vec![0; n];
    for i in 0..n {
        if let Some(map) = self_map {
            valid[i * m + map[i]] = false;
        }
        for j in 0..m {
            if valid[i * m + j] && anchor_labels[i] == candidate_labels[j] {
                positive[i * m + j] = true;
                positive_count[i] += 1;
            }
        }
    }
    Ok(PairMasks {
        n_anchors: n,
        n_candidates: m,
        positive,
        valid,
        positive_count,
    })
}

impl PairMasks {
    /// View-1 anchors against view-1 ++ view-2 candidates.
    pub fn image_image(labels: &[usize]) -> PairMasks {
        let cands: Vec<usize> = labels.iter().chain(labels).copied().collect();
        let self_map: Vec<usize> = (0..labels.len()).collect();
        build_pair_masks(labels, &cands, Some(&self_map)).expect("consistent layout")
    }

    /// View-1 anchors against view-1 ++ text candidates.
    pub fn image_text(labels: &[usize], text_labels: &[usize]) -> PairMasks {
        let cands: Vec<usize> = labels.iter().chain(text_labels).copied().collect();
        let self_map: Vec<usize> = (0..labels.len()).collect();
        build_pair_masks(labels, &cands, Some(&self_map)).expect("consistent layout")
    }

    pub fn is_positive(&self, i: usize, j: usize) -> bool {
        self.positive[i * self.n_candidates + j]
    }

    pub fn is_valid(&self, i: usize, j: usize) -> bool {
        self.valid[i * self.n_candidates + j]
    }
}

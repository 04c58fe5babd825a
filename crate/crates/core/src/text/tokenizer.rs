use serde::{Deserialize, Serialize};

use super::{render_prompt, TemplateKind, TemplateSet};

pub const PAD_ID: u32 = 0;
pub const BOS_ID: u32 = 1;
pub const EOS_ID: u32 = 2;
const RESERVED: u32 = 3;

/// 64-bit FNV-1a. Stable across platforms and releases.
pub fn stable_hash(word: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in word.as_bytes() {
        h ^= *b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Fixed-length token ids. Valid positions are `0..true_len`; the last of
/// them is EOS and everything after is padding.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenizedText {
    pub ids: Vec<u32>,
    pub true_len: usize,
    pub end_index: usize,
}

/// Word-hashing tokenizer: lowercase, split on anything non-alphanumeric,
/// map each word into the non-reserved id range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tokenizer {
    pub vocab_size: usize,
    pub context_len: usize,
}

impl Default for Tokenizer {
    fn default() -> Self {
        Self {
            vocab_size: 1024,
            context_len: 32,
        }
    }
}

impl Tokenizer {
    pub fn new(vocab_size: usize, context_len: usize) -> Self {
        assert!(vocab_size > RESERVED as usize, "vocabulary must exceed reserved ids");
        assert!(context_len >= 3, "context must fit BOS, one token and EOS");
        Self {
            vocab_size,
            context_len,
        }
    }

    pub fn word_id(&self, word: &str) -> u32 {
        (stable_hash(word) % (self.vocab_size as u64 - RESERVED as u64)) as u32 + RESERVED
    }

    pub fn words(text: &str) -> Vec<String> {
        text.to_lowercase()
            .split(|c: char| !c.is_alphanumeric())
            .filter(|w| !w.is_empty())
            .map(String::from)
            .collect()
    }

    pub fn tokenize(&self, text: &str) -> TokenizedText {
        let mut ids = Vec::with_capacity(self.context_len);
        ids.push(BOS_ID);
        ids.extend(
            Self::words(text)
                .iter()
                .take(self.context_len - 2)
                .map(|w| self.word_id(w)),
        );
        ids.push(EOS_ID);
        let true_len = ids.len();
        ids.resize(self.context_len, PAD_ID);
        TokenizedText {
            ids,
            true_len,
            end_index: true_len - 1,
        }
    }
}

/// Fraction of label pairs whose name prompts tokenize to identical id
/// sequences.
pub fn name_collision_rate(names: &[&str], tokenizer: &Tokenizer) -> f32 {
    let set = TemplateSet::builtin(TemplateKind::LabelName);
    let seqs: Vec<TokenizedText> = names
        .iter()
        .map(|n| tokenizer.tokenize(&render_prompt(&set, 0, n).expect("non-empty name")))
        .collect();
    let mut pairs = 0usize;
    let mut collisions = 0usize;
    for i in 0..seqs.len() {
        for j in i + 1..seqs.len() {
            if names[i].to_lowercase() == names[j].to_lowercase() {
                continue;
            }
            pairs += 1;
            if seqs[i] == seqs[j] {
                collisions += 1;
            }
        }
    }
    if pairs == 0 {
        0.0
    } else {
        collisions as f32 / pairs as f32
    }
}

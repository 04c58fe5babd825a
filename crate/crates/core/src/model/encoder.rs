use rand_chacha::ChaCha8Rng;

use super::{ArchConfig, Init, ModelError};
use crate::data::Image;
use crate::numerics::{Bound, ParamId, ParamStore, Tape, Var};
use crate::text::TokenizedText;
use crate::{Error, Tensor};

/// Which text parameter set to use when the encoder is not shared.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TextRole {
    /// Label names and activity texts.
    Name,
    Description,
}

impl TextRole {
    pub fn prefix(self) -> &'static str {
        match self {
            TextRole::Name => "text",
            TextRole::Description => "desc_text",
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Block {
    ln1: (ParamId, ParamId),
    qkv: (ParamId, ParamId),
    out: (ParamId, ParamId),
    ln2: (ParamId, ParamId),
    fc: (ParamId, ParamId),
    proj: (ParamId, ParamId),
}

fn id(store: &ParamStore, name: String) -> ParamId {
    store.id(&name).unwrap_or_else(|| panic!("missing parameter {name}"))
}

fn register_ln(prefix: &str, width: usize, store: &mut ParamStore) {
    store.insert(format!("{prefix}.g"), Tensor::full(&[width], 1.0));
    store.insert(format!("{prefix}.b"), Tensor::zeros(&[width]));
}

fn register_linear(prefix: &str, fan_in: usize, fan_out: usize, store: &mut ParamStore, init: &Init, rng: &mut ChaCha8Rng) {
    store.insert(format!("{prefix}.w"), init.matrix(fan_in, fan_out, rng));
    store.insert(format!("{prefix}.b"), Tensor::zeros(&[fan_out]));
}

impl Block {
    fn register(prefix: &str, width: usize, mlp: usize, store: &mut ParamStore, init: &Init, rng: &mut ChaCha8Rng) {
        register_ln(&format!("{prefix}.ln1"), width, store);
        register_linear(&format!("{prefix}.attn.qkv"), width, 3 * width, store, init, rng);
        register_linear(&format!("{prefix}.attn.out"), width, width, store, init, rng);
        register_ln(&format!("{prefix}.ln2"), width, store);
        register_linear(&format!("{prefix}.mlp.fc"), width, mlp, store, init, rng);
        register_linear(&format!("{prefix}.mlp.proj"), mlp, width, store, init, rng);
    }

    fn lookup(prefix: &str, store: &ParamStore) -> Block {
        let pair = |name: &str, a: &str, b: &str| {
            (
                id(store, format!("{prefix}.{name}.{a}")),
                id(store, format!("{prefix}.{name}.{b}")),
            )
        };
        Block {
            ln1: pair("ln1", "g", "b"),
            qkv: pair("attn.qkv", "w", "b"),
            out: pair("attn.out", "w", "b"),
            ln2: pair("ln2", "g", "b"),
            fc: pair("mlp.fc", "w", "b"),
            proj: pair("mlp.proj", "w", "b"),
        }
    }

    /// Pre-norm residual block over `batch` sequences of length `seq`.
    fn forward(
        &self,
        tape: &mut Tape,
        bound: &Bound,
        x: Var,
        batch: usize,
        seq: usize,
        heads: usize,
        key_valid: Option<&[bool]>,
    ) -> Var {
        let v = |id: ParamId| bound.var(id);
        let h = tape.layer_norm(x, v(self.ln1.0), v(self.ln1.1));
        let qkv = linear(tape, h, v(self.qkv.0), v(self.qkv.1));
        let att = tape.attention(qkv, batch, seq, heads, key_valid);
        let att = linear(tape, att, v(self.out.0), v(self.out.1));
        let x = tape.add(x, att);
        let h = tape.layer_norm(x, v(self.ln2.0), v(self.ln2.1));
        let h = linear(tape, h, v(self.fc.0), v(self.fc.1));
        let h = tape.quick_gelu(h);
        let h = linear(tape, h, v(self.proj.0), v(self.proj.1));
        tape.add(x, h)
    }
}

fn linear(tape: &mut Tape, x: Var, w: Var, b: Var) -> Var {
    let y = tape.matmul(x, w);
    tape.add_row(y, b)
}

/// Parameter handles of the image tower.
#[derive(Debug, Clone)]
pub struct ImageEncoder {
    height: usize,
    width: usize,
    patch: usize,
    heads: usize,
    patch_proj: (ParamId, ParamId),
    cls: ParamId,
    pos: ParamId,
    blocks: Vec<Block>,
    ln_post: (ParamId, ParamId),
    proj: ParamId,
}

impl ImageEncoder {
    pub(crate) fn register(arch: &ArchConfig, store: &mut ParamStore, init: &Init, rng: &mut ChaCha8Rng) {
        let w = arch.width;
        register_linear("image.patch", arch.patch * arch.patch, w, store, init, rng);
        store.insert("image.cls", init.embedding(&[1, w], rng));
        store.insert("image.pos", init.embedding(&[arch.n_patches() + 1, w], rng));
        for l in 0..arch.layers {
            Block::register(&format!("image.block{l}"), w, w * arch.mlp_ratio, store, init, rng);
        }
        register_ln("image.ln_post", w, store);
        store.insert("image.proj", init.matrix(w, arch.embed_dim, rng));
    }

    pub(crate) fn new(arch: &ArchConfig, store: &ParamStore) -> Self {
        Self {
            height: arch.image_height,
            width: arch.image_width,
            patch: arch.patch,
            heads: arch.heads,
            patch_proj: (id(store, "image.patch.w".into()), id(store, "image.patch.b".into())),
            cls: id(store, "image.cls".into()),
            pos: id(store, "image.pos".into()),
            blocks: (0..arch.layers)
                .map(|l| Block::lookup(&format!("image.block{l}"), store))
                .collect(),
            ln_post: (id(store, "image.ln_post.g".into()), id(store, "image.ln_post.b".into())),
            proj: id(store, "image.proj".into()),
        }
    }

    /// Rows `b·N + p` hold patch `p` of image `b`, pixels centered at 0.
    fn patchify(&self, images: &[Image]) -> Result<Tensor, ModelError> {
        let p = self.patch;
        let (gh, gw) = (self.height / p, self.width / p);
        let mut data = Vec::with_capacity(images.len() * self.height * self.width);
        for img in images {
            if (img.height, img.width) != (self.height, self.width) {
                return Err(ModelError::ShapeMismatch {
                    expected: format!("{}×{} image", self.height, self.width),
                    got: format!("{}×{}", img.height, img.width),
                });
            }
            for pr in 0..gh {
                for pc in 0..gw {
                    for dy in 0..p {
                        for dx in 0..p {
                            data.push(img.at(pr * p + dy, pc * p + dx) - 0.5);
                        }
                    }
                }
            }
        }
        Ok(Tensor::matrix(images.len() * gh * gw, p * p, data))
    }

    /// Cls-token features after the final layer norm, `[B×width]`.
    pub fn features(&self, tape: &mut Tape, bound: &Bound, images: &[Image]) -> Result<Var, Error> {
        if images.is_empty() {
            return Err(ModelError::ShapeMismatch {
                expected: "at least one image".into(),
                got: "0".into(),
            }
            .into());
        }
        let b = images.len();
        let n = (self.height / self.patch) * (self.width / self.patch);
        let seq = n + 1;
        let patches = tape.constant(self.patchify(images)?);
        let emb = linear(tape, patches, bound.var(self.patch_proj.0), bound.var(self.patch_proj.1));
        // row 0 is the cls token, rows 1.. the patch embeddings
        let stacked = tape.concat_rows(&[bound.var(self.cls), emb]);
        let order: Vec<usize> = (0..b)
            .flat_map(|i| std::iter::once(0).chain((0..n).map(move |p| 1 + i * n + p)))
            .collect();
        let tokens = tape.gather_rows(stacked, &order);
        let pos_idx: Vec<usize> = (0..b).flat_map(|_| 0..seq).collect();
        let pos = tape.gather_rows(bound.var(self.pos), &pos_idx);
        let mut x = tape.add(tokens, pos);
        for blk in &self.blocks {
            x = blk.forward(tape, bound, x, b, seq, self.heads, None);
        }
        let cls_rows: Vec<usize> = (0..b).map(|i| i * seq).collect();
        let cls = tape.gather_rows(x, &cls_rows);
        Ok(tape.layer_norm(cls, bound.var(self.ln_post.0), bound.var(self.ln_post.1)))
    }

    /// Unit-norm embeddings `[B×d]`.
    pub fn encode(&self, tape: &mut Tape, bound: &Bound, images: &[Image]) -> Result<Var, Error> {
        let f = self.features(tape, bound, images)?;
        let z = tape.matmul(f, bound.var(self.proj));
        Ok(tape.l2_normalize_rows(z)?)
    }
}

/// Parameter handles of one text tower.
#[derive(Debug, Clone)]
pub struct TextEncoder {
    vocab: usize,
    context: usize,
    heads: usize,
    token: ParamId,
    pos: ParamId,
    blocks: Vec<Block>,
    ln_final: (ParamId, ParamId),
    proj: ParamId,
}

impl TextEncoder {
    pub(crate) fn register(
        arch: &ArchConfig,
        role: TextRole,
        store: &mut ParamStore,
        init: &Init,
        rng: &mut ChaCha8Rng,
    ) {
        let pre = role.prefix();
        let w = arch.text_width;
        store.insert(format!("{pre}.token"), init.embedding(&[arch.vocab_size, w], rng));
        store.insert(format!("{pre}.pos"), init.embedding(&[arch.context_len, w], rng));
        for l in 0..arch.text_layers {
            Block::register(&format!("{pre}.block{l}"), w, w * arch.mlp_ratio, store, init, rng);
        }
        register_ln(&format!("{pre}.ln_final"), w, store);
        store.insert(format!("{pre}.proj"), init.matrix(w, arch.embed_dim, rng));
    }

    pub(crate) fn new(arch: &ArchConfig, role: TextRole, store: &ParamStore) -> Self {
        let pre = role.prefix();
        Self {
            vocab: arch.vocab_size,
            context: arch.context_len,
            heads: arch.text_heads,
            token: id(store, format!("{pre}.token")),
            pos: id(store, format!("{pre}.pos")),
            blocks: (0..arch.text_layers)
                .map(|l| Block::lookup(&format!("{pre}.block{l}"), store))
                .collect(),
            ln_final: (id(store, format!("{pre}.ln_final.g")), id(store, format!("{pre}.ln_final.b"))),
            proj: id(store, format!("{pre}.proj")),
        }
    }

    /// Unit-norm embeddings `[B×d]` pooled at each sequence's end marker.
    ///
    /// Sequences are cut to the longest true length in the batch; padded
    /// keys are masked, so the cut does not change any output.
    pub fn encode(&self, tape: &mut Tape, bound: &Bound, texts: &[TokenizedText]) -> Result<Var, Error> {
        if texts.is_empty() {
            return Err(ModelError::ShapeMismatch {
                expected: "at least one text".into(),
                got: "0".into(),
            }
            .into());
        }
        for t in texts {
            if t.ids.len() != self.context || t.true_len == 0 || t.true_len > self.context {
                return Err(ModelError::ShapeMismatch {
                    expected: format!("{} token ids", self.context),
                    got: format!("{} ids, true length {}", t.ids.len(), t.true_len),
                }
                .into());
            }
            if let Some(&bad) = t.ids.iter().find(|&&i| i as usize >= self.vocab) {
                return Err(ModelError::TokenOutOfRange {
                    id: bad,
                    vocab: self.vocab,
                }
                .into());
            }
        }
        let b = texts.len();
        let seq = texts.iter().map(|t| t.true_len).max().unwrap_or(1);
        let ids: Vec<usize> = texts
            .iter()
            .flat_map(|t| t.ids[..seq].iter().map(|&i| i as usize))
            .collect();
        let valid: Vec<bool> = texts.iter().flat_map(|t| (0..seq).map(move |p| p < t.true_len)).collect();
        let tok = tape.gather_rows(bound.var(self.token), &ids);
        let pos_idx: Vec<usize> = (0..b).flat_map(|_| 0..seq).collect();
        let pos = tape.gather_rows(bound.var(self.pos), &pos_idx);
        let mut x = tape.add(tok, pos);
        for blk in &self.blocks {
            x = blk.forward(tape, bound, x, b, seq, self.heads, Some(&valid));
        }
        let end_rows: Vec<usize> = texts.iter().enumerate().map(|(i, t)| i * seq + t.end_index).collect();
        let pooled = tape.gather_rows(x, &end_rows);
        let pooled = tape.layer_norm(pooled, bound.var(self.ln_final.0), bound.var(self.ln_final.1));
        let z = tape.matmul(pooled, bound.var(self.proj));
        Ok(tape.l2_normalize_rows(z)?)
    }
}

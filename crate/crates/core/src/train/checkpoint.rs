//! Binary checkpoint: `"CLEF"`, version byte, u32 tensor count, then per
//! tensor a u16-prefixed UTF-8 name, u8 rank, u32 dims and little-endian f32
//! payload; finally a u32-prefixed JSON metadata trailer.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{OptimState, TrainError};
use crate::model::{init_params, ArchConfig, ModelParams};
use crate::numerics::ParamStore;
use crate::{Task, Tensor};

const MAGIC: &[u8; 4] = b"CLEF";
const VERSION: u8 = 1;
const MOMENT_PREFIX: [&str; 2] = ["optim.m.", "optim.v."];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckpointMeta {
    pub fingerprint: String,
    pub arch: ArchConfig,
    pub step: u64,
    pub seed: u64,
    pub task: Task,
    /// Width of the linear head, when present.
    pub head_classes: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub params: ModelParams,
    pub optim: Option<OptimState>,
    pub meta: CheckpointMeta,
}

impl Checkpoint {
    pub fn new(params: ModelParams, optim: Option<OptimState>, step: u64, seed: u64, task: Task) -> Self {
        let head_classes = params
            .store
            .id("head.b")
            .map(|id| params.store.value(id).len());
        let meta = CheckpointMeta {
            fingerprint: params.arch.fingerprint(),
            arch: params.arch.clone(),
            step,
            seed,
            task,
            head_classes,
        };
        Self { params, optim, meta }
    }

    /// Fails unless the encoder dimensions equal `arch`'s.
    pub fn check_arch(&self, arch: &ArchConfig) -> Result<(), TrainError> {
        let (have, want) = (self.params.arch.dims_fingerprint(), arch.dims_fingerprint());
        if have != want {
            return Err(TrainError::ArchMismatch(format!("checkpoint is {have}, config is {want}")));
        }
        Ok(())
    }
}

fn put_tensor(out: &mut Vec<u8>, name: &str, shape: &[usize], data: &[f32]) -> Result<(), TrainError> {
    let too_big = |what: &str| TrainError::Config(format!("tensor {name}: {what} does not fit the format"));
    let len = u16::try_from(name.len()).map_err(|_| too_big("name"))?;
    out.extend_from_slice(&len.to_le_bytes());
    out.extend_from_slice(name.as_bytes());
    out.push(u8::try_from(shape.len()).map_err(|_| too_big("rank"))?);
    for &d in shape {
        out.extend_from_slice(&u32::try_from(d).map_err(|_| too_big("dimension"))?.to_le_bytes());
    }
    for x in data {
        out.extend_from_slice(&x.to_le_bytes());
    }
    Ok(())
}

pub fn encode_checkpoint(ckpt: &Checkpoint) -> Result<Vec<u8>, TrainError> {
    let store = &ckpt.params.store;
    let mut count = store.len();
    if let Some(o) = &ckpt.optim {
        if o.m.len() != store.len() || o.v.len() != store.len() {
            return Err(TrainError::ShapeMismatch("optimizer state does not cover the parameters".into()));
        }
        count *= 3;
    }
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.push(VERSION);
    out.extend_from_slice(&(count as u32).to_le_bytes());
    for id in store.ids() {
        let t = store.value(id);
        put_tensor(&mut out, store.name(id), t.shape(), t.data())?;
    }
    if let Some(o) = &ckpt.optim {
        for (prefix, moments) in MOMENT_PREFIX.iter().zip([&o.m, &o.v]) {
            for (id, data) in store.ids().zip(moments.iter()) {
                let name = format!("{prefix}{}", store.name(id));
                put_tensor(&mut out, &name, store.value(id).shape(), data)?;
            }
        }
    }
    let mut meta = serde_json::to_value(&ckpt.meta).expect("meta serializes");
    if let Some(o) = &ckpt.optim {
        meta["optim_step"] = o.step.into();
    }
    let json = serde_json::to_vec(&meta).expect("meta serializes");
    out.extend_from_slice(&(json.len() as u32).to_le_bytes());
    out.extend_from_slice(&json);
    Ok(out)
}

pub fn save_checkpoint(ckpt: &Checkpoint, path: impl AsRef<Path>) -> Result<(), TrainError> {
    std::fs::write(path, encode_checkpoint(ckpt)?)?;
    Ok(())
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8], TrainError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let Some(end) = end else {
            return Err(TrainError::Format {
                offset: self.pos,
                message: format!("truncated {what}"),
            });
        };
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self, what: &str) -> Result<u8, TrainError> {
        Ok(self.take(1, what)?[0])
    }

    fn u16(&mut self, what: &str) -> Result<u16, TrainError> {
        Ok(u16::from_le_bytes(self.take(2, what)?.try_into().expect("2 bytes")))
    }

    fn u32(&mut self, what: &str) -> Result<u32, TrainError> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().expect("4 bytes")))
    }

    fn fail<T>(&self, at: usize, message: impl Into<String>) -> Result<T, TrainError> {
        Err(TrainError::Format {
            offset: at,
            message: message.into(),
        })
    }
}

/// Parses a whole checkpoint image; nothing is returned unless every byte
/// checks out.
pub fn decode_checkpoint(bytes: &[u8]) -> Result<Checkpoint, TrainError> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4, "magic")? != MAGIC {
        return r.fail(0, "bad magic");
    }
    let version = r.u8("version")?;
    if version != VERSION {
        return Err(TrainError::Version(version));
    }
    let count = r.u32("tensor count")? as usize;
    let mut tensors: Vec<(String, Tensor)> = Vec::new();
    for _ in 0..count {
        let at = r.pos;
        let len = r.u16("name length")? as usize;
        let Ok(name) = std::str::from_utf8(r.take(len, "name")?) else {
            return r.fail(at, "name is not UTF-8");
        };
        let rank = r.u8("rank")? as usize;
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            shape.push(r.u32("dimension")? as usize);
        }
        let n = shape.iter().try_fold(1usize, |a, &d| a.checked_mul(d));
        let Some(bytes) = n.and_then(|n| n.checked_mul(4)) else {
            return r.fail(at, "tensor size overflows");
        };
        let payload = r.take(bytes, "payload")?;
        let data = payload
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
            .collect();
        tensors.push((name.to_string(), Tensor::new(shape, data)));
    }
    let at = r.pos;
    let len = r.u32("metadata length")? as usize;
    let json = r.take(len, "metadata")?;
    if r.pos != bytes.len() {
        return r.fail(r.pos, "trailing bytes after metadata");
    }
    let mut meta_value: serde_json::Value = match serde_json::from_slice(json) {
        Ok(v) => v,
        Err(e) => return r.fail(at, format!("metadata: {e}")),
    };
    let optim_step = meta_value.as_object_mut().and_then(|m| m.remove("optim_step"));
    let meta: CheckpointMeta = match serde_json::from_value(meta_value) {
        Ok(m) => m,
        Err(e) => return r.fail(at, format!("metadata: {e}")),
    };
    assemble(tensors, meta, optim_step.and_then(|v| v.as_u64()))
}

fn assemble(tensors: Vec<(String, Tensor)>, meta: CheckpointMeta, optim_step: Option<u64>) -> Result<Checkpoint, TrainError> {
    let mut store = ParamStore::new();
    let mut moments: [BTreeMap<String, Tensor>; 2] = Default::default();
    for (name, t) in tensors {
        if let Some(k) = MOMENT_PREFIX.iter().position(|p| name.starts_with(p)) {
            moments[k].insert(name[MOMENT_PREFIX[k].len()..].to_string(), t);
        } else if store.id(&name).is_some() {
            return Err(TrainError::Format {
                offset: 0,
                message: format!("duplicate tensor {name}"),
            });
        } else {
            store.insert(name, t);
        }
    }
    if meta.fingerprint != meta.arch.fingerprint() {
        return Err(TrainError::ArchMismatch(format!(
            "metadata fingerprint {} disagrees with its architecture {}",
            meta.fingerprint,
            meta.arch.fingerprint()
        )));
    }
    check_layout(&store, &meta)?;
    let optim = match optim_step {
        None => None,
        Some(step) => {
            let mut state = OptimState {
                m: Vec::new(),
                v: Vec::new(),
                step,
            };
            for id in store.ids() {
                let name = store.name(id);
                for (k, dst) in [&mut state.m, &mut state.v].into_iter().enumerate() {
                    let Some(t) = moments[k].remove(name).filter(|t| t.shape() == store.value(id).shape()) else {
                        return Err(TrainError::Format {
                            offset: 0,
                            message: format!("missing or misshapen optimizer moment for {name}"),
                        });
                    };
                    dst.push(t.into_data());
                }
            }
            Some(state)
        }
    };
    Ok(Checkpoint {
        params: ModelParams {
            arch: meta.arch.clone(),
            store,
        },
        optim,
        meta,
    })
}

/// The stored tensors must be exactly what the recorded architecture builds,
/// plus an optional linear head.
fn check_layout(store: &ParamStore, meta: &CheckpointMeta) -> Result<(), TrainError> {
    let expected = init_params(&meta.arch, 0)?;
    let mut want: BTreeMap<&str, &[usize]> = expected
        .store
        .ids()
        .map(|id| (expected.store.name(id), expected.store.value(id).shape()))
        .collect();
    let head_w = meta.head_classes.map(|c| [meta.arch.width, c]);
    let head_b = meta.head_classes.map(|c| [c]);
    if let (Some(w), Some(b)) = (&head_w, &head_b) {
        want.insert("head.w", w);
        want.insert("head.b", b);
    }
    let have: BTreeMap<&str, &[usize]> = store.ids().map(|id| (store.name(id), store.value(id).shape())).collect();
    if have != want {
        let missing: Vec<&str> = want.keys().filter(|k| have.get(*k) != want.get(*k)).copied().collect();
        let extra: Vec<&str> = have.keys().filter(|k| !want.contains_key(*k)).copied().collect();
        return Err(TrainError::ArchMismatch(format!(
            "tensors do not match the recorded architecture (missing or misshapen: {missing:?}, unexpected: {extra:?})"
        )));
    }
    Ok(())
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint, TrainError> {
    decode_checkpoint(&std::fs::read(path)?)
}

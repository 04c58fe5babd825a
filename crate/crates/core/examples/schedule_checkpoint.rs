//! Warmup plus cosine learning rate, one AdamW step and a checkpoint round
//! trip through bytes.

use clef::model::{init_params, ArchConfig};
use clef::numerics::ParamStore;
use clef::train::{adamw_step, decode_checkpoint, encode_checkpoint, AdamW, Checkpoint, OptimState, Schedule};
use clef::{Task, Tensor};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let s = Schedule::new(1e-3, 1e-5, 10, 100)?;
    for step in [0, 5, 10, 55, 100] {
        println!("lr_at({step:>3}) = {:.3e}", s.lr_at(step)?);
    }

    let mut store = ParamStore::new();
    store.insert("w", Tensor::matrix(1, 2, vec![1.0, -2.0]));
    let mut state = OptimState::new(&store);
    let hp = AdamW::default();
    adamw_step(&mut store, &mut state, 0.1, &hp)?;
    println!("zero-gradient step shrinks by {}: {:?}", 1.0 - 0.1 * hp.weight_decay, store.value(store.ids().next().unwrap()).data());

    let ckpt = Checkpoint::new(init_params(&ArchConfig::default(), 3)?, None, 0, 3, Task::Fer);
    let bytes = encode_checkpoint(&ckpt)?;
    assert_eq!(decode_checkpoint(&bytes)?.params, ckpt.params);
    println!("{} bytes; truncated: {}", bytes.len(), decode_checkpoint(&bytes[..bytes.len() - 3]).unwrap_err());
    Ok(())
}

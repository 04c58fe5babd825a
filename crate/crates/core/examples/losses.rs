//! The contrastive and fine-tuning losses on small hand-made embeddings.

use clef::losses::{
    au_image_name_loss, fer_image_name_loss, finetune_total, name_description_loss, supcon_loss, ClassWeights, PairMasks,
    Temperature,
};
use clef::numerics::Tape;
use clef::Tensor;

fn unit(tape: &mut Tape, rows: usize, cols: usize, data: Vec<f32>) -> clef::numerics::Var {
    let v = tape.constant(Tensor::matrix(rows, cols, data));
    tape.l2_normalize_rows(v).unwrap()
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut tape = Tape::new();
    // two activities, two samples each
    let view1 = unit(&mut tape, 4, 2, vec![1.0, 0.1, 0.9, 0.2, -1.0, 0.1, -0.8, -0.3]);
    let view2 = unit(&mut tape, 4, 2, vec![0.9, 0.0, 1.0, 0.3, -0.9, 0.2, -1.0, -0.1]);
    let both = tape.concat_rows(&[view1, view2]);
    let masks = PairMasks::image_image(&[0, 0, 1, 1]);
    let l = supcon_loss(&mut tape, view1, both, &masks, Temperature::Fixed(0.25))?;
    println!("supcon (aligned)   {:.4}", tape.value(l).item());
    let mixed = PairMasks::image_image(&[0, 1, 0, 1]);
    let l = supcon_loss(&mut tape, view1, both, &mixed, Temperature::Fixed(0.25))?;
    println!("supcon (shuffled)  {:.4}", tape.value(l).item());

    let names = unit(&mut tape, 2, 2, vec![1.0, 0.0, -1.0, 0.0]);
    let descs = unit(&mut tape, 2, 2, vec![0.9, 0.1, -0.9, 0.2]);
    let t = Temperature::Fixed(0.5);
    let l_in = fer_image_name_loss(&mut tape, view1, names, &[0, 0, 1, 1], &ClassWeights::uniform(2), t)?;
    let l_dn = name_description_loss(&mut tape, descs, names, t)?;
    let (l_in, l_dn) = (tape.value(l_in).item(), tape.value(l_dn).item());
    println!("L_IN {l_in:.4}  L_DN {l_dn:.4}  total(λ=2) {:.4}", finetune_total(l_in, l_dn, 2.0)?);

    let zero = tape.constant(Tensor::matrix(1, 3, vec![0.0; 3]));
    let zn = tape.constant(Tensor::matrix(3, 3, vec![0.0; 9]));
    let l = au_image_name_loss(&mut tape, zero, zn, &[vec![1, 0, 1]], &ClassWeights::uniform(3), t)?;
    println!("AU loss at zero logits {:.6} = 3 ln 2 = {:.6}", tape.value(l).item(), 3.0 * 2f32.ln());
    Ok(())
}

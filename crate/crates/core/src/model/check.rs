//! Finite-difference check of a whole model at toy dimensions.

use rand::Rng as _;

use crate::datastore::Sample;
use crate::error::Result;
use crate::model::{Model, ModelConfig, Variant};
use crate::numerics::{grad_check, rng_stream, GradCheckOptions, GradCheckReport};

/// Toy model with weights jittered off their initial values (so biases
/// and gains are not at special points), plus a random sample with both
/// feature kinds.
pub fn toy_instance(variant: Variant, seed: u64, src_len: usize, trg_len: usize) -> Result<(Model<f64>, Sample)> {
    let mut m = Model::<f64>::new(ModelConfig::toy(variant), seed)?;
    let mut rng = rng_stream(seed, 99);
    for (_, t) in m.params_mut().iter_mut() {
        for x in t.data_mut() {
            *x += rng.random_range(-0.3..0.3);
        }
    }
    let cfg = m.config();
    let src: Vec<u32> = (0..src_len).map(|_| rng.random_range(4..cfg.src_vocab as u32)).collect();
    let trg: Vec<u32> = (0..trg_len).map(|_| rng.random_range(4..cfg.trg_vocab as u32)).collect();
    let mut s = Sample::from_ids(&src, &trg);
    s.global_feat = Some((0..cfg.global_dim).map(|_| rng.random_range(-1.0..1.0)).collect());
    s.spatial_feat = Some((0..cfg.spatial_cells * cfg.spatial_dim).map(|_| rng.random_range(-1.0..1.0)).collect());
    Ok((m, s))
}

/// Gradient check of the sentence loss (dropout off) for one variant.
pub fn toy_grad_check(variant: Variant, seed: u64, opts: GradCheckOptions) -> Result<GradCheckReport> {
    let (m, s) = toy_instance(variant, seed, 3, 3)?;
    grad_check(m.params(), |t| m.loss_on_tape(t, &s.view(), None), opts)
}

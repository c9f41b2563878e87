//! Optimization loop: Adam with L2, global-norm clipping, dropout, periodic
//! beam-search validation and early stopping, and multi-seed runs.

mod adam;
mod runlog;

use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use crate::numerics::apply_dropout;
pub use adam::{adam_step, AdamParams, AdamState};
pub use runlog::{LogEvent, RunLog, StopReason};

use crate::datastore::{make_batches, Sample};
use crate::decoder::{beam_search, BeamConfig};
use crate::error::{Error, Result};
use crate::evalkit::meteor_surrogate;
use crate::model::{Features, Model, ModelConfig};
use crate::numerics::{clip_global_norm, global_norm, rng_stream, Grads, Real};
use crate::textpipe::{bpe_undo, Vocabulary};

/// Stream numbers derived from a run seed.
pub const SHUFFLE_STREAM: u64 = 1;
pub const DROPOUT_STREAM: u64 = 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub lr: f64,
    pub batch_size: usize,
    pub clip: f64,
    pub l2: f64,
    /// Validate every this many updates.
    pub eval_every: usize,
    /// Stop after this many validations in a row without improvement.
    pub patience: usize,
    pub seeds: Vec<u64>,
    pub beam_for_validation: usize,
    pub max_updates: usize,
    pub shuffle: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lr: 4e-4,
            batch_size: 32,
            clip: 5.0,
            l2: 1e-5,
            eval_every: 1000,
            patience: 10,
            seeds: vec![1, 2, 3, 4, 5],
            beam_for_validation: 12,
            max_updates: 100_000,
            shuffle: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let pos = [
            ("batch_size", self.batch_size),
            ("eval_every", self.eval_every),
            ("patience", self.patience),
            ("beam_for_validation", self.beam_for_validation),
            ("max_updates", self.max_updates),
        ];
        if let Some((n, _)) = pos.iter().find(|(_, v)| *v == 0) {
            return Err(Error::Config(format!("{n} must be at least 1")));
        }
        if !(self.lr > 0.0 && self.clip > 0.0 && self.l2 >= 0.0) {
            return Err(Error::Config("lr and clip must be positive, l2 non-negative".into()));
        }
        Ok(())
    }
}

/// Training and validation data for one language pair.
#[derive(Debug, Clone, Copy)]
pub struct TrainData<'a> {
    pub train: &'a [Sample],
    pub valid: &'a [Sample],
    /// Tokenized (not BPE-split) references for the validation samples.
    pub valid_refs: &'a [Vec<String>],
    pub trg_vocab: &'a Vocabulary,
}

pub struct TrainOutcome {
    pub log: RunLog,
    /// Parameters at the best validation, or at the end if there was none.
    pub best: Model<f32>,
    pub last: Model<f32>,
}

/// Output ids to scoring tokens: specials dropped, subwords merged.
pub fn postprocess(ids: &[u32], vocab: &Vocabulary) -> Vec<String> {
    bpe_undo(&vocab.decode_sentence(ids))
}

/// Beam-decodes `samples` and scores them against `refs` with the METEOR surrogate.
pub fn validation_metric<T: Real>(
    models: &[&Model<T>],
    samples: &[Sample],
    refs: &[Vec<String>],
    vocab: &Vocabulary,
    beam: usize,
) -> Result<f64> {
    let hyps = translate_all(models, samples, vocab, &BeamConfig::with_beam(beam))?;
    meteor_surrogate(&hyps, refs)
}

pub fn translate_all<T: Real>(
    models: &[&Model<T>],
    samples: &[Sample],
    vocab: &Vocabulary,
    cfg: &BeamConfig,
) -> Result<Vec<Vec<String>>> {
    samples
        .iter()
        .map(|s| {
            let t = beam_search(models, &s.src_ids, Features::of(&s.view()), cfg)?;
            Ok(postprocess(&t.ids, vocab))
        })
        .collect()
}

/// Mean teacher-forced NLL per target token (dropout off).
pub fn per_token_nll<T: Real>(model: &Model<T>, samples: &[Sample]) -> Result<f64> {
    let mut total = 0.0;
    let mut tokens = 0usize;
    for s in samples {
        total += model.sentence_nll(&s.view(), None)?.to_f64();
        tokens += s.trg_ids.len() - 1;
    }
    Ok(total / tokens.max(1) as f64)
}

/// One training run. Writes `log.jsonl`, `best.ckpt` and `last.ckpt`
/// into `out_dir` when given.
pub fn train(
    model_cfg: &ModelConfig,
    cfg: &TrainConfig,
    data: TrainData<'_>,
    seed: u64,
    out_dir: Option<&Path>,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if data.train.is_empty() {
        return Err(Error::Data("empty training set".into()));
    }
    if data.valid.len() != data.valid_refs.len() {
        return Err(Error::Data(format!(
            "{} validation samples but {} references",
            data.valid.len(),
            data.valid_refs.len()
        )));
    }
    if let Some(d) = out_dir {
        fs::create_dir_all(d).map_err(|e| Error::io(d, e))?;
    }
    let mut model = Model::<f32>::new(model_cfg.clone(), seed)?;
    let mut adam = AdamState::new(model.params());
    let hp = AdamParams::new(cfg.lr, cfg.l2);
    let mut shuffle_rng = rng_stream(seed, SHUFFLE_STREAM);
    let mut drop_rng = rng_stream(seed, DROPOUT_STREAM);
    let mut log = RunLog::new(seed);
    let mut best: Option<(f64, usize, Model<f32>)> = None;
    let mut bad_validations = 0;
    let mut update = 0;
    let mut epoch = 0;
    let best_path = out_dir.map(|d| d.join("best.ckpt"));

    let reason = 'outer: loop {
        let batches = make_batches(data.train, cfg.batch_size, &mut shuffle_rng, cfg.shuffle);
        for (bi, batch) in batches.iter().enumerate() {
            let mut grads = Grads::new(model.params());
            let scale = 1.0 / batch.len() as f32;
            let mut loss = 0.0f64;
            for i in 0..batch.len() {
                let view = batch.view(i);
                let mut tape = crate::numerics::Tape::new(model.params());
                let l = model.loss_on_tape(&mut tape, &view, Some(&mut drop_rng))?;
                loss += tape.scalar(l) as f64;
                tape.backward_into(l, scale, &mut grads)?;
            }
            update += 1;
            let loss = loss / batch.len() as f64;
            if !loss.is_finite() {
                return Err(Error::NanLoss { update, batch: bi });
            }
            let (grad_norm, applied_norm) = {
                let mut dense = grads.dense(model.params());
                let pre = clip_global_norm(&mut dense, cfg.clip)?;
                (pre, global_norm(&dense))
            };
            adam_step(model.params_mut(), &grads, &mut adam, &hp)?;
            log.events.push(LogEvent::Update { update, epoch, batch: bi, loss, grad_norm, applied_norm });

            if update % cfg.eval_every == 0 {
                let metric =
                    validation_metric(&[&model], data.valid, data.valid_refs, data.trg_vocab, cfg.beam_for_validation)?;
                let improved = best.as_ref().is_none_or(|b| metric > b.0);
                log::info!(
                    "seed {seed} update {update}: loss {loss:.4}, validation {metric:.4}{}",
                    if improved { " *" } else { "" }
                );
                log.events.push(LogEvent::Validation { update, metric, improved });
                if improved {
                    bad_validations = 0;
                    if let Some(p) = &best_path {
                        model.save(p)?;
                    }
                    best = Some((metric, update, model.clone()));
                } else {
                    bad_validations += 1;
                    if bad_validations >= cfg.patience {
                        break 'outer StopReason::EarlyStop;
                    }
                }
            }
            if update >= cfg.max_updates {
                break 'outer StopReason::MaxUpdates;
            }
        }
        epoch += 1;
    };

    log.stop_reason = Some(reason);
    log.best_metric = best.as_ref().map(|b| b.0);
    log.best_update = best.as_ref().map(|b| b.1);
    log.events.push(LogEvent::Stop { update, reason, best_update: log.best_update, best_metric: log.best_metric });
    let best_model = match best {
        Some((_, _, m)) => m,
        None => {
            if let Some(p) = &best_path {
                model.save(p)?;
            }
            model.clone()
        }
    };
    if let Some(d) = out_dir {
        model.save(&d.join("last.ckpt"))?;
        log.best_checkpoint = best_path;
        log.write_jsonl(&d.join("log.jsonl"))?;
    }
    Ok(TrainOutcome { log, best: best_model, last: model })
}

/// Independent runs, one per seed, returned in seed order. Each run goes to
/// `out_dir/seed-{s}` when `out_dir` is given.
pub fn train_multi(
    model_cfg: &ModelConfig,
    cfg: &TrainConfig,
    data: TrainData<'_>,
    seeds: &[u64],
    out_dir: Option<&Path>,
    parallel: bool,
) -> Result<Vec<TrainOutcome>> {
    let mut seen = HashSet::new();
    if let Some(d) = seeds.iter().find(|s| !seen.insert(**s)) {
        return Err(Error::Config(format!("duplicate seed {d}")));
    }
    let mut order: Vec<u64> = seeds.to_vec();
    order.sort_unstable();
    let dir = |s: u64| -> Option<PathBuf> { out_dir.map(|d| d.join(format!("seed-{s}"))) };
    let run = |&s: &u64| train(model_cfg, cfg, data, s, dir(s).as_deref());
    if parallel {
        order.par_iter().map(run).collect()
    } else {
        order.iter().map(run).collect()
    }
}

#[cfg(test)]
mod tests;

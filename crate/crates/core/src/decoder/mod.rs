//! Beam search over one model or an ensemble of models.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{DecoderState, EncodedSource, Features, Model};
use crate::numerics::Real;
use crate::textpipe::{BOS_ID, EOS_ID};

pub const DEFAULT_BEAM: usize = 12;

/// How member distributions are combined at each step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EnsembleMode {
    /// Arithmetic mean of probabilities.
    #[default]
    Arith,
    /// Renormalized geometric mean (mean of log-probabilities).
    Geo,
}

impl std::str::FromStr for EnsembleMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "arith" => Ok(EnsembleMode::Arith),
            "geo" => Ok(EnsembleMode::Geo),
            _ => Err(Error::Config(format!("unknown ensemble mode {s:?} (arith or geo)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BeamConfig {
    pub beam_size: usize,
    /// Maximum generated tokens (including `<eos>`); `None` means
    /// `3 × source length + 5`.
    pub max_len: Option<usize>,
    /// Rank finished hypotheses by log-probability per token.
    pub length_norm: bool,
    pub ensemble: EnsembleMode,
}

impl Default for BeamConfig {
    fn default() -> Self {
        BeamConfig { beam_size: DEFAULT_BEAM, max_len: None, length_norm: false, ensemble: EnsembleMode::Arith }
    }
}

impl BeamConfig {
    pub fn with_beam(beam_size: usize) -> Self {
        BeamConfig { beam_size, ..Default::default() }
    }

    pub fn max_len_for(&self, src_len: usize) -> usize {
        self.max_len.unwrap_or(3 * src_len + 5)
    }
}

/// A partial or complete output sequence during search.
#[derive(Debug, Clone)]
pub struct Hypothesis<T> {
    /// Generated ids, without `<bos>`; ends with `<eos>` iff finished.
    pub trg_ids: Vec<u32>,
    pub log_prob: f64,
    /// One decoder state per ensemble member.
    pub states: Vec<DecoderState<T>>,
    pub finished: bool,
}

/// Search result.
#[derive(Debug, Clone, PartialEq)]
pub struct Translation {
    /// Output ids without `<bos>` and without the final `<eos>`.
    pub ids: Vec<u32>,
    pub log_prob: f64,
    /// False when `max_len` was hit before any hypothesis finished; `ids`
    /// is then the best unfinished hypothesis.
    pub finished: bool,
}

/// Combines per-model distributions over the same vocabulary.
pub fn ensemble_step<T: Real>(dists: &[Vec<T>], mode: EnsembleMode) -> Result<Vec<T>> {
    let first = dists.first().ok_or_else(|| Error::InvalidArgument("ensemble of no distributions".into()))?;
    let n = first.len();
    if let Some(d) = dists.iter().find(|d| d.len() != n) {
        return Err(Error::Shape(format!("distribution lengths differ: {n} vs {}", d.len())));
    }
    if dists.len() == 1 {
        return Ok(first.clone());
    }
    let k = T::from_f64(dists.len() as f64);
    match mode {
        EnsembleMode::Arith => Ok((0..n).map(|i| dists.iter().map(|d| d[i]).sum::<T>() / k).collect()),
        EnsembleMode::Geo => {
            let logs: Vec<T> = (0..n).map(|i| dists.iter().map(|d| d[i].ln()).sum::<T>() / k).collect();
            crate::numerics::softmax(&logs).or_else(|_| {
                // Every entry is -inf in some member: fall back to uniform.
                Ok(vec![T::one() / T::from_f64(n as f64); n])
            })
        }
    }
}

fn check_ensemble<T: Real>(models: &[&Model<T>]) -> Result<usize> {
    let first = models.first().ok_or_else(|| Error::InvalidArgument("no models to decode with".into()))?;
    let v = first.config().trg_vocab;
    if let Some(m) = models.iter().find(|m| m.config().trg_vocab != v) {
        return Err(Error::Config(format!(
            "ensemble members disagree on target vocabulary size ({v} vs {})",
            m.config().trg_vocab
        )));
    }
    Ok(v)
}

struct Ensemble<'m, T: Real> {
    models: &'m [&'m Model<T>],
    encoded: Vec<EncodedSource<T>>,
    mode: EnsembleMode,
}

impl<'m, T: Real> Ensemble<'m, T> {
    fn start(
        models: &'m [&'m Model<T>],
        src: &[u32],
        feats: Features<'_>,
        mode: EnsembleMode,
    ) -> Result<(Self, Vec<DecoderState<T>>)> {
        check_ensemble(models)?;
        let mut encoded = Vec::with_capacity(models.len());
        let mut states = Vec::with_capacity(models.len());
        for m in models {
            let (e, s) = m.start(src, feats)?;
            encoded.push(e);
            states.push(s);
        }
        Ok((Ensemble { models, encoded, mode }, states))
    }

    fn step(&self, y: u32, states: &[DecoderState<T>]) -> Result<(Vec<T>, Vec<DecoderState<T>>)> {
        let mut dists = Vec::with_capacity(self.models.len());
        let mut next = Vec::with_capacity(self.models.len());
        for ((m, e), s) in self.models.iter().zip(&self.encoded).zip(states) {
            let (p, n) = m.decode_step(e, y, s)?;
            dists.push(p);
            next.push(n);
        }
        Ok((ensemble_step(&dists, self.mode)?, next))
    }
}

fn rank_score(h: &Hypothesis<impl Sized>, length_norm: bool) -> f64 {
    if length_norm && !h.trg_ids.is_empty() {
        h.log_prob / h.trg_ids.len() as f64
    } else {
        h.log_prob
    }
}

/// Beam search with summed token log-probabilities.
///
/// At every step the `beam_size - finished` best extensions of the live
/// hypotheses survive; extensions ending in `<eos>` retire to the finished
/// list. Search ends when `beam_size` hypotheses have finished or after
/// `max_len` tokens. No token is ever masked.
pub fn beam_search<T: Real>(
    models: &[&Model<T>],
    src: &[u32],
    feats: Features<'_>,
    cfg: &BeamConfig,
) -> Result<Translation> {
    if cfg.beam_size == 0 {
        return Err(Error::InvalidArgument("beam size must be at least 1".into()));
    }
    let (ens, states) = Ensemble::start(models, src, feats, cfg.ensemble)?;
    let max_len = cfg.max_len_for(src.len());
    let mut live = vec![Hypothesis { trg_ids: Vec::new(), log_prob: 0.0, states, finished: false }];
    let mut finished: Vec<Hypothesis<T>> = Vec::new();

    for _ in 0..max_len {
        if live.is_empty() || finished.len() >= cfg.beam_size {
            break;
        }
        let mut expanded = Vec::with_capacity(live.len());
        let mut cands: Vec<(f64, usize, u32)> = Vec::new();
        for (hi, h) in live.iter().enumerate() {
            let y = h.trg_ids.last().copied().unwrap_or(BOS_ID);
            let (p, next) = ens.step(y, &h.states)?;
            for (v, &pv) in p.iter().enumerate() {
                cands.push((h.log_prob + pv.to_f64().ln(), hi, v as u32));
            }
            expanded.push(next);
        }
        // Stable: ties keep hypothesis order, then token order.
        cands.sort_by(|a, b| b.0.total_cmp(&a.0));
        cands.truncate(cfg.beam_size - finished.len());
        let mut next_live = Vec::with_capacity(cands.len());
        for (lp, hi, v) in cands {
            let mut trg_ids = live[hi].trg_ids.clone();
            trg_ids.push(v);
            let done = v == EOS_ID;
            let h = Hypothesis { trg_ids, log_prob: lp, states: expanded[hi].clone(), finished: done };
            if done {
                finished.push(h);
            } else {
                next_live.push(h);
            }
        }
        live = next_live;
    }

    let best_of = |hs: &[Hypothesis<T>]| -> Option<usize> {
        (0..hs.len()).reduce(|a, b| {
            if rank_score(&hs[b], cfg.length_norm) > rank_score(&hs[a], cfg.length_norm) {
                b
            } else {
                a
            }
        })
    };
    if let Some(i) = best_of(&finished) {
        let h = &finished[i];
        return Ok(Translation {
            ids: h.trg_ids[..h.trg_ids.len() - 1].to_vec(),
            log_prob: h.log_prob,
            finished: true,
        });
    }
    let i = best_of(&live).expect("live hypotheses remain when none finished");
    log::warn!("no hypothesis finished within {max_len} tokens; returning the best unfinished one");
    Ok(Translation { ids: live[i].trg_ids.clone(), log_prob: live[i].log_prob, finished: false })
}

/// Picks the most probable token at every step.
pub fn greedy_decode<T: Real>(
    models: &[&Model<T>],
    src: &[u32],
    feats: Features<'_>,
    max_len: Option<usize>,
    mode: EnsembleMode,
) -> Result<Translation> {
    let (ens, mut states) = Ensemble::start(models, src, feats, mode)?;
    let max_len = max_len.unwrap_or(3 * src.len() + 5);
    let mut ids = Vec::new();
    let mut lp = 0.0;
    let mut y = BOS_ID;
    for _ in 0..max_len {
        let (p, next) = ens.step(y, &states)?;
        let (best, pb) =
            p.iter().enumerate().fold((0, T::neg_infinity()), |acc, (i, &x)| if x > acc.1 { (i, x) } else { acc });
        lp += pb.to_f64().ln();
        y = best as u32;
        states = next;
        if y == EOS_ID {
            return Ok(Translation { ids, log_prob: lp, finished: true });
        }
        ids.push(y);
    }
    Ok(Translation { ids, log_prob: lp, finished: false })
}

#[cfg(test)]
mod tests;

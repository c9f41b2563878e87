//! Attentive encoder-decoder with a bidirectional layer-normalized GRU
//! encoder, a two-GRU conditional decoder and seven ways of using image
//! features.

mod check;
mod config;
mod layout;
mod net;

use std::path::Path;

pub use check::{toy_grad_check, toy_instance};
pub use config::{Dropout, ModelConfig, Variant};
pub use layout::{count_params, param_breakdown, ParamGroup};
pub use net::Features;

use crate::datastore::SampleView;
use crate::error::{Error, Result};
use crate::numerics::{rng_stream, softmax, ParamStore, Real, Rng, Tape, Var};
use layout::Ids;
use net::EncVars;

/// Stream of the seed used for parameter initialization.
pub const INIT_STREAM: u64 = 0;

/// Annotations of one source sentence.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderOutput<T> {
    /// Row-major M×C.
    pub s: Vec<T>,
    pub rows: usize,
    /// Initial state of both encoder directions.
    pub e0: Vec<T>,
}

/// Recurrent state between decoder steps. Attention weights are empty
/// before the first step.
#[derive(Debug, Clone, PartialEq)]
pub struct DecoderState<T> {
    pub h: Vec<T>,
    pub h_tilde: Vec<T>,
    pub c: Vec<T>,
    pub v: Option<Vec<T>>,
    pub alpha: Vec<T>,
    pub beta: Option<Vec<T>>,
}

/// Everything decoder steps need from the source side, precomputed once.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedSource<T> {
    rows: usize,
    s_att: Vec<T>,
    att_proj: Vec<T>,
    spatial: Option<Vec<T>>,
    spatial_proj: Option<Vec<T>>,
    trg_gate: Option<Vec<T>>,
}

impl<T> EncodedSource<T> {
    pub fn src_len(&self) -> usize {
        self.rows
    }
}

#[derive(Debug, Clone)]
pub struct Model<T: Real> {
    cfg: ModelConfig,
    params: ParamStore<T>,
    ids: Ids,
}

impl<T: Real> Model<T> {
    /// Fresh model: Xavier weights and embeddings, zero biases, unit gains.
    pub fn new(cfg: ModelConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let params = layout::init_params(&cfg, seed, &mut rng_stream(seed, INIT_STREAM))?;
        let ids = Ids::resolve(&params);
        Ok(Model { cfg, params, ids })
    }

    pub fn from_params(cfg: ModelConfig, params: ParamStore<T>) -> Result<Self> {
        cfg.validate()?;
        layout::check_store(&cfg, &params)?;
        let ids = Ids::resolve(&params);
        Ok(Model { cfg, params, ids })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.cfg
    }

    pub fn params(&self) -> &ParamStore<T> {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore<T> {
        &mut self.params
    }

    pub fn into_params(self) -> ParamStore<T> {
        self.params
    }

    /// Same weights in another precision.
    pub fn cast<U: Real>(&self) -> Model<U> {
        Model { cfg: self.cfg.clone(), params: self.params.cast(), ids: self.ids.clone() }
    }

    /// Records the summed token NLL of `sample` on `tape`, which must be
    /// built over this model's parameters (or a same-layout copy). Dropout
    /// is applied when `rng` is given.
    pub fn loss_on_tape(&self, tape: &mut Tape<'_, T>, sample: &SampleView<'_>, rng: Option<&mut Rng>) -> Result<Var> {
        net::sentence_loss(&self.cfg, &self.ids, tape, sample, rng)
    }

    /// Summed teacher-forced NLL; training mode when `rng` is given.
    pub fn sentence_nll(&self, sample: &SampleView<'_>, rng: Option<&mut Rng>) -> Result<T> {
        let mut tape = Tape::new(&self.params);
        let loss = self.loss_on_tape(&mut tape, sample, rng)?;
        Ok(tape.scalar(loss))
    }

    pub fn encode(&self, src_ids: &[u32], feats: Features<'_>) -> Result<EncoderOutput<T>> {
        let mut tape = Tape::new(&self.params);
        let (global, _) = net::feature_vars(&self.cfg, &mut tape, feats)?;
        let (s, e0) = net::encoder(&self.cfg, &self.ids, &mut tape, src_ids, global, &mut None)?;
        Ok(EncoderOutput { s: tape.value(s).to_vec(), rows: src_ids.len(), e0: tape.value(e0).to_vec() })
    }

    /// `h0` for the variant, from annotations and (if used) the global feature.
    pub fn init_decoder(&self, enc: &EncoderOutput<T>, feats: Features<'_>) -> Result<Vec<T>> {
        if enc.rows == 0 {
            return Err(Error::InvalidArgument("init_decoder on empty annotations".into()));
        }
        let mut tape = Tape::new(&self.params);
        let (global, _) = net::feature_vars(&self.cfg, &mut tape, feats)?;
        let s = tape.constant(enc.rows, self.cfg.ctx_dim(), enc.s.clone());
        let h0 = net::decoder_init(&self.cfg, &self.ids, &mut tape, s, global)?;
        Ok(tape.value(h0).to_vec())
    }

    /// Textual attention of query `h_t` over annotations `s` (M×C).
    /// Returns (alpha, c_t).
    pub fn text_attention(&self, h_t: &[T], s: &[T]) -> Result<(Vec<T>, Vec<T>)> {
        self.attention(&self.ids.att, h_t, s, self.cfg.ctx_dim())
    }

    /// Visual attention of `h_t` over spatial rows `s_prime` (P×D_s).
    /// Returns (beta, v_t). Only fusion-conv has this attention.
    pub fn visual_attention(&self, h_t: &[T], s_prime: &[T]) -> Result<(Vec<T>, Vec<T>)> {
        let a =
            self.ids.vatt.as_ref().ok_or_else(|| {
                Error::InvalidArgument(format!("variant {} has no visual attention", self.cfg.variant))
            })?;
        self.attention(a, h_t, s_prime, self.cfg.spatial_dim)
    }

    fn attention(&self, a: &layout::AttIds, h_t: &[T], keys: &[T], width: usize) -> Result<(Vec<T>, Vec<T>)> {
        if h_t.len() != self.cfg.rnn_dim {
            return Err(Error::Shape(format!("query has {} values, expected {}", h_t.len(), self.cfg.rnn_dim)));
        }
        if keys.is_empty() || !keys.len().is_multiple_of(width) {
            return Err(Error::Shape(format!("{} key values do not form rows of {width}", keys.len())));
        }
        let mut tape = Tape::new(&self.params);
        let k = tape.constant(keys.len() / width, width, keys.to_vec());
        let h = tape.row(h_t.to_vec());
        let proj = net::project_keys(&mut tape, a, k);
        let (w, c) = net::attend(&mut tape, a, proj, k, h);
        Ok((tape.value(w).to_vec(), tape.value(c).to_vec()))
    }

    /// Encodes the source and returns the decoder's starting state.
    pub fn start(&self, src_ids: &[u32], feats: Features<'_>) -> Result<(EncodedSource<T>, DecoderState<T>)> {
        let mut tape = Tape::new(&self.params);
        let ev = net::encode_all(&self.cfg, &self.ids, &mut tape, src_ids, feats, &mut None)?;
        let val = |v: Var| tape.value(v).to_vec();
        let enc = EncodedSource {
            rows: src_ids.len(),
            s_att: val(ev.s_att),
            att_proj: val(ev.att_proj),
            spatial: ev.spatial.map(val),
            spatial_proj: ev.spatial_proj.map(val),
            trg_gate: ev.trg_gate.map(val),
        };
        let (r, c) = (self.cfg.rnn_dim, self.cfg.ctx_dim());
        let state = DecoderState {
            h: vec![T::zero(); r],
            h_tilde: val(ev.h0),
            c: vec![T::zero(); c],
            v: self.cfg.variant.uses_spatial().then(|| vec![T::zero(); self.cfg.spatial_dim]),
            alpha: Vec::new(),
            beta: None,
        };
        Ok((enc, state))
    }

    /// Output distribution after feeding `y_prev`, and the next state.
    pub fn decode_step(
        &self,
        enc: &EncodedSource<T>,
        y_prev: u32,
        state: &DecoderState<T>,
    ) -> Result<(Vec<T>, DecoderState<T>)> {
        let logits = self.step_logits(enc, y_prev, state)?;
        Ok((softmax(&logits.0)?, logits.1))
    }

    /// Like [`Model::decode_step`] but returns unnormalized scores.
    pub fn step_logits(
        &self,
        enc: &EncodedSource<T>,
        y_prev: u32,
        state: &DecoderState<T>,
    ) -> Result<(Vec<T>, DecoderState<T>)> {
        if y_prev as usize >= self.cfg.trg_vocab {
            return Err(Error::InvalidArgument(format!(
                "target id {y_prev} out of range (vocabulary {})",
                self.cfg.trg_vocab
            )));
        }
        let (m, c, ds, p) = (enc.rows, self.cfg.ctx_dim(), self.cfg.spatial_dim, self.cfg.spatial_cells);
        let mut tape = Tape::new(&self.params);
        let s_att = tape.constant(m, c, enc.s_att.clone());
        let att_proj = tape.constant(m, c, enc.att_proj.clone());
        let spatial = enc.spatial.as_ref().map(|x| tape.constant(p, ds, x.clone()));
        let spatial_proj = enc.spatial_proj.as_ref().map(|x| tape.constant(p, ds, x.clone()));
        let trg_gate = enc.trg_gate.as_ref().map(|x| tape.row(x.clone()));
        let h_prev = tape.row(state.h_tilde.clone());
        let ev = EncVars { s_att, att_proj, h0: h_prev, spatial, spatial_proj, trg_gate };
        let st = net::step(&self.cfg, &self.ids, &mut tape, &ev, y_prev, h_prev, &mut None)?;
        let val = |v: Var| tape.value(v).to_vec();
        let next = DecoderState {
            h: val(st.h),
            h_tilde: val(st.h_tilde),
            c: val(st.c),
            v: st.v.map(val),
            alpha: val(st.alpha),
            beta: st.beta.map(val),
        };
        Ok((val(st.logits), next))
    }

    /// Writes a checkpoint (32-bit values) with the config as its header.
    pub fn save(&self, path: &Path) -> Result<()> {
        self.params.cast::<f32>().save(path, Some(&self.cfg.to_json()))
    }
}

impl Model<f32> {
    pub fn load(path: &Path) -> Result<Self> {
        let (params, header) = ParamStore::<f32>::load(path)?;
        let header = header.ok_or_else(|| Error::format(path, "checkpoint has no model config header"))?;
        let cfg: ModelConfig =
            serde_json::from_str(&header).map_err(|e| Error::format(path, format!("config header: {e}")))?;
        Model::from_params(cfg, params)
    }
}

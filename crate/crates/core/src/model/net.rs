//! The network expressed once, on a tape. Training, gradient checks and
//! decoding all run through these functions.

use crate::datastore::SampleView;
use crate::error::{Error, Result};
use crate::model::layout::{AttIds, GruIds, Ids};
use crate::model::ModelConfig;
use crate::numerics::{dropout_mask, Real, Rng, Tape, Var, LAYER_NORM_EPS};

/// Visual inputs for one sentence, as stored on disk.
#[derive(Debug, Clone, Copy, Default)]
pub struct Features<'a> {
    pub global: Option<&'a [f32]>,
    /// Row-major `(P, D_s)`.
    pub spatial: Option<&'a [f32]>,
}

impl<'a> Features<'a> {
    pub const NONE: Features<'static> = Features { global: None, spatial: None };

    pub fn of(view: &SampleView<'a>) -> Self {
        Features { global: view.global_feat, spatial: view.spatial_feat }
    }
}

/// Per-sentence encoder-side nodes reused by every decoder step.
#[derive(Debug, Clone, Copy)]
pub(crate) struct EncVars {
    /// Annotations as attended: after dropout, and modulated for ctx-mul
    /// variants.
    pub s_att: Var,
    /// `W_s s_i + b_s` per row.
    pub att_proj: Var,
    pub h0: Var,
    pub spatial: Option<Var>,
    pub spatial_proj: Option<Var>,
    pub trg_gate: Option<Var>,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct StepVars {
    pub h: Var,
    pub h_tilde: Var,
    pub c: Var,
    pub v: Option<Var>,
    pub alpha: Var,
    pub beta: Option<Var>,
    pub logits: Var,
}

pub(crate) fn dropout<T: Real>(tape: &mut Tape<T>, x: Var, p: f64, rng: &mut Option<&mut Rng>) -> Result<Var> {
    match rng.as_deref_mut() {
        Some(r) if p > 0.0 => {
            let (a, b) = tape.shape(x);
            let mask = dropout_mask(a * b, p, r)?;
            let m = tape.constant(a, b, mask);
            Ok(tape.mul(x, m))
        }
        _ => Ok(x),
    }
}

pub(crate) fn gru_step<T: Real>(tape: &mut Tape<T>, g: &GruIds, x: Var, h: Var, r: usize) -> Var {
    let (w, u, b) = (tape.param(g.w), tape.param(g.u), tape.param(g.b));
    let xw = tape.linear(x, w);
    let xw = tape.add(xw, b);
    let hu = tape.linear(h, u);
    let part = |tape: &mut Tape<T>, v: Var, k: usize| tape.slice_cols(v, k * r, r);
    let (xz, xr, xn) = (part(tape, xw, 0), part(tape, xw, 1), part(tape, xw, 2));
    let (hz, hr, hn) = (part(tape, hu, 0), part(tape, hu, 1), part(tape, hu, 2));
    let norm = |tape: &mut Tape<T>, v: Var, k: usize| match &g.ln {
        Some(ln) => {
            let (gain, bias) = (tape.param(ln[k].0), tape.param(ln[k].1));
            tape.layer_norm(v, gain, bias, LAYER_NORM_EPS)
        }
        None => v,
    };
    let pz = tape.add(xz, hz);
    let pz = norm(tape, pz, 0);
    let z = tape.sigmoid(pz);
    let pr = tape.add(xr, hr);
    let pr = norm(tape, pr, 1);
    let rg = tape.sigmoid(pr);
    let rhn = tape.mul(rg, hn);
    let pn = tape.add(xn, rhn);
    let pn = norm(tape, pn, 2);
    let n = tape.tanh(pn);
    // (1 - z)·n + z·h
    let d = tape.sub(h, n);
    let zd = tape.mul(z, d);
    tape.add(n, zd)
}

/// Attention over the rows of `keys`; returns (weights 1×M, context 1×width).
pub(crate) fn attend<T: Real>(tape: &mut Tape<T>, a: &AttIds, proj: Var, keys: Var, h: Var) -> (Var, Var) {
    let w_h = tape.param(a.w_h);
    let q = tape.linear(h, w_h);
    let pre = tape.add(proj, q);
    let act = tape.tanh(pre);
    let w_a = tape.param(a.w_a);
    let g = tape.linear(w_a, act);
    let b_a = tape.param(a.b_a);
    let g = tape.add(g, b_a);
    let alpha = tape.softmax(g);
    let ctx = tape.matmul(alpha, keys);
    (alpha, ctx)
}

pub(crate) fn project_keys<T: Real>(tape: &mut Tape<T>, a: &AttIds, keys: Var) -> Var {
    let (w_s, b_s) = (tape.param(a.w_s), tape.param(a.b_s));
    let p = tape.linear(keys, w_s);
    tape.add(p, b_s)
}

fn to_real<T: Real>(x: &[f32], normalize: Option<usize>) -> Vec<T> {
    let mut v: Vec<T> = x.iter().map(|&a| T::from_f32(a)).collect();
    if let Some(chunk) = normalize {
        for c in v.chunks_mut(chunk) {
            let n = c.iter().map(|&a| a * a).sum::<T>().sqrt();
            if n > T::zero() {
                c.iter_mut().for_each(|a| *a /= n);
            }
        }
    }
    v
}

/// Feature constants for the variant; errors when a required input is
/// missing or mis-sized. Inputs the variant does not use are ignored.
pub(crate) fn feature_vars<T: Real>(
    cfg: &ModelConfig,
    tape: &mut Tape<T>,
    feats: Features<'_>,
) -> Result<(Option<Var>, Option<Var>)> {
    let v = cfg.variant;
    let global = if v.uses_global() {
        let g =
            feats.global.ok_or_else(|| Error::InvalidArgument(format!("variant {v} needs a global feature vector")))?;
        if g.len() != cfg.global_dim {
            return Err(Error::Shape(format!("global feature has {} values, expected {}", g.len(), cfg.global_dim)));
        }
        let data = to_real(g, cfg.normalize_features.then_some(cfg.global_dim));
        Some(tape.constant(1, cfg.global_dim, data))
    } else {
        None
    };
    let spatial = if v.uses_spatial() {
        let s = feats.spatial.ok_or_else(|| Error::InvalidArgument(format!("variant {v} needs spatial features")))?;
        let (p, ds) = (cfg.spatial_cells, cfg.spatial_dim);
        if s.len() != p * ds {
            return Err(Error::Shape(format!("spatial feature has {} values, expected {p}x{ds}", s.len())));
        }
        let data = to_real(s, cfg.normalize_features.then_some(ds));
        Some(tape.constant(p, ds, data))
    } else {
        None
    };
    Ok((global, spatial))
}

fn image_gate<T: Real>(tape: &mut Tape<T>, w: Option<crate::numerics::ParamId>, global: Option<Var>) -> Option<Var> {
    let (w, g) = (w?, global?);
    let w = tape.param(w);
    let p = tape.linear(g, w);
    Some(tape.tanh(p))
}

pub(crate) fn check_ids(ids: &[u32], vocab: usize, what: &str) -> Result<()> {
    if ids.is_empty() {
        return Err(Error::InvalidArgument(format!("empty {what} sequence")));
    }
    if let Some(&bad) = ids.iter().find(|&&i| i as usize >= vocab) {
        return Err(Error::InvalidArgument(format!("{what} id {bad} out of range (vocabulary {vocab})")));
    }
    Ok(())
}

/// Bidirectional encoder. Returns the raw annotations (M×C) and `e0`.
pub(crate) fn encoder<T: Real>(
    cfg: &ModelConfig,
    ids: &Ids,
    tape: &mut Tape<T>,
    src: &[u32],
    global: Option<Var>,
    rng: &mut Option<&mut Rng>,
) -> Result<(Var, Var)> {
    check_ids(src, cfg.src_vocab, "source")?;
    let r = cfg.rnn_dim;
    let mut xs = Vec::with_capacity(src.len());
    for &id in src {
        let x = tape.embed(ids.src_emb, id as usize)?;
        xs.push(dropout(tape, x, cfg.dropout.emb, rng)?);
    }
    let e0 = if cfg.variant == crate::model::Variant::EncdecInit {
        image_gate(tape, ids.img_init, global)
            .ok_or_else(|| Error::InvalidArgument("encdec-init needs a global feature".into()))?
    } else {
        tape.zeros(1, r)
    };
    let m = xs.len();
    let mut fwd = Vec::with_capacity(m);
    let mut h = e0;
    for &x in &xs {
        h = gru_step(tape, &ids.enc[0], x, h, r);
        fwd.push(h);
    }
    let mut bwd = vec![e0; m];
    let mut h = e0;
    for t in (0..m).rev() {
        h = gru_step(tape, &ids.enc[1], xs[t], h, r);
        bwd[t] = h;
    }
    let rows: Vec<Var> = fwd.iter().zip(&bwd).map(|(&f, &b)| tape.concat_cols(f, b)).collect();
    Ok((tape.stack_rows(&rows), e0))
}

/// Decoder initial state `h0` from annotations `s` (already dropped out).
pub(crate) fn decoder_init<T: Real>(
    cfg: &ModelConfig,
    ids: &Ids,
    tape: &mut Tape<T>,
    s: Var,
    global: Option<Var>,
) -> Result<Var> {
    let v = cfg.variant;
    if v.mean_init() {
        let mean = tape.mean_rows(s);
        let w = tape.param(ids.w_init.expect("mean-init variant has W_init"));
        let p = tape.linear(mean, w);
        Ok(tape.tanh(p))
    } else if v.image_init() {
        image_gate(tape, ids.img_init, global)
            .ok_or_else(|| Error::InvalidArgument(format!("variant {v} needs a global feature")))
    } else {
        Ok(tape.zeros(1, cfg.rnn_dim))
    }
}

pub(crate) fn encode_all<T: Real>(
    cfg: &ModelConfig,
    ids: &Ids,
    tape: &mut Tape<T>,
    src: &[u32],
    feats: Features<'_>,
    rng: &mut Option<&mut Rng>,
) -> Result<EncVars> {
    let (global, spatial) = feature_vars(cfg, tape, feats)?;
    let (s_raw, _) = encoder(cfg, ids, tape, src, global, rng)?;
    let s = dropout(tape, s_raw, cfg.dropout.annot, rng)?;
    let h0 = decoder_init(cfg, ids, tape, s, global)?;
    let s_att = match image_gate(tape, ids.img_ctx, global) {
        Some(gate) => tape.mul(s, gate),
        None => s,
    };
    let att_proj = project_keys(tape, &ids.att, s_att);
    let spatial_proj = match (spatial, &ids.vatt) {
        (Some(sp), Some(a)) => Some(project_keys(tape, a, sp)),
        _ => None,
    };
    let trg_gate = image_gate(tape, ids.img_trg, global);
    Ok(EncVars { s_att, att_proj, h0, spatial, spatial_proj, trg_gate })
}

pub(crate) fn step<T: Real>(
    cfg: &ModelConfig,
    ids: &Ids,
    tape: &mut Tape<T>,
    enc: &EncVars,
    y_prev: u32,
    h_tilde_prev: Var,
    rng: &mut Option<&mut Rng>,
) -> Result<StepVars> {
    let r = cfg.rnn_dim;
    let mut y = tape.embed(ids.trg_emb, y_prev as usize)?;
    if let Some(gate) = enc.trg_gate {
        y = tape.mul(y, gate);
    }
    let h = gru_step(tape, &ids.dec1, y, h_tilde_prev, r);
    let (alpha, c) = attend(tape, &ids.att, enc.att_proj, enc.s_att, h);
    let (beta, v) = match (enc.spatial, enc.spatial_proj, &ids.vatt) {
        (Some(sp), Some(proj), Some(a)) => {
            let (b, v) = attend(tape, a, proj, sp, h);
            (Some(b), Some(v))
        }
        _ => (None, None),
    };
    let h_tilde = gru_step(tape, &ids.dec2, c, h, r);
    let ctx = match v {
        Some(v) => tape.concat_cols(c, v),
        None => c,
    };
    let (w_dec, w_ctx, w_o) = (tape.param(ids.w_dec), tape.param(ids.w_ctx), tape.param(ids.w_o));
    let a = tape.linear(h_tilde, w_dec);
    let b = tape.linear(ctx, w_ctx);
    let sum = tape.add(y, a);
    let sum = tape.add(sum, b);
    let o = tape.tanh(sum);
    let o = dropout(tape, o, cfg.dropout.out, rng)?;
    let logits = tape.linear(o, w_o);
    Ok(StepVars { h, h_tilde, c, v, alpha, beta, logits })
}

/// Teacher-forced summed token NLL of one sentence pair.
pub(crate) fn sentence_loss<T: Real>(
    cfg: &ModelConfig,
    ids: &Ids,
    tape: &mut Tape<T>,
    sample: &SampleView<'_>,
    mut rng: Option<&mut Rng>,
) -> Result<Var> {
    let trg = sample.trg_ids;
    if trg.len() < 2 {
        return Err(Error::InvalidArgument("target needs <bos> and at least one token".into()));
    }
    check_ids(trg, cfg.trg_vocab, "target")?;
    let enc = encode_all(cfg, ids, tape, sample.src_ids, Features::of(sample), &mut rng)?;
    let mut h_tilde = enc.h0;
    let mut terms = Vec::with_capacity(trg.len() - 1);
    for t in 1..trg.len() {
        let st = step(cfg, ids, tape, &enc, trg[t - 1], h_tilde, &mut rng)?;
        terms.push(tape.softmax_xent(st.logits, trg[t] as usize)?);
        h_tilde = st.h_tilde;
    }
    let all = tape.stack_rows(&terms);
    Ok(tape.sum(all))
}

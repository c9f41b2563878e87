//! Parameter inventory per variant.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::ModelConfig;
use crate::numerics::{xavier_init, ParamId, ParamStore, Real, Rng, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Init {
    Xavier,
    Zeros,
    Ones,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct ParamSpec {
    pub name: String,
    pub shape: Vec<usize>,
    pub init: Init,
}

/// One line of the parameter-count breakdown.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ParamGroup {
    pub group: &'static str,
    pub formula: String,
    pub count: usize,
}

pub(crate) const GATES: [&str; 3] = ["z", "r", "n"];

pub(crate) fn specs(cfg: &ModelConfig) -> Vec<ParamSpec> {
    let (e, r, c) = (cfg.emb_dim, cfg.rnn_dim, cfg.ctx_dim());
    let (dg, ds) = (cfg.global_dim, cfg.spatial_dim);
    let v = cfg.variant;
    let mut out = Vec::new();
    let mut add = |name: String, shape: Vec<usize>, init: Init| out.push(ParamSpec { name, shape, init });
    add("src_emb".into(), vec![cfg.src_vocab, e], Init::Xavier);
    add("trg_emb".into(), vec![cfg.trg_vocab, e], Init::Xavier);
    for dir in ["enc_fwd", "enc_bwd"] {
        add(format!("{dir}.W"), vec![3 * r, e], Init::Xavier);
        add(format!("{dir}.U"), vec![3 * r, r], Init::Xavier);
        add(format!("{dir}.b"), vec![3 * r], Init::Zeros);
        for g in GATES {
            add(format!("{dir}.ln_{g}.gain"), vec![r], Init::Ones);
            add(format!("{dir}.ln_{g}.bias"), vec![r], Init::Zeros);
        }
    }
    if v.mean_init() {
        add("W_init".into(), vec![r, c], Init::Xavier);
    }
    add("att.W_s".into(), vec![c, c], Init::Xavier);
    add("att.b_s".into(), vec![c], Init::Zeros);
    add("att.W_h".into(), vec![c, r], Init::Xavier);
    add("att.W_a".into(), vec![1, c], Init::Xavier);
    add("att.b_a".into(), vec![1], Init::Zeros);
    for (gru, input) in [("dec1", e), ("dec2", c)] {
        add(format!("{gru}.W"), vec![3 * r, input], Init::Xavier);
        add(format!("{gru}.U"), vec![3 * r, r], Init::Xavier);
        add(format!("{gru}.b"), vec![3 * r], Init::Zeros);
    }
    let ctx_in = if v.uses_spatial() { c + ds } else { c };
    add("out.W_dec".into(), vec![e, r], Init::Xavier);
    add("out.W_ctx".into(), vec![e, ctx_in], Init::Xavier);
    add("out.W_o".into(), vec![cfg.trg_vocab, e], Init::Xavier);
    if v.image_init() {
        add("img.W_init".into(), vec![r, dg], Init::Xavier);
    }
    if v.ctx_modulation() {
        add("img.W_ctx".into(), vec![c, dg], Init::Xavier);
    }
    if v.trg_modulation() {
        add("img.W_trg".into(), vec![e, dg], Init::Xavier);
    }
    if v.uses_spatial() {
        add("vatt.W_s".into(), vec![ds, ds], Init::Xavier);
        add("vatt.b_s".into(), vec![ds], Init::Zeros);
        add("vatt.W_h".into(), vec![ds, r], Init::Xavier);
        add("vatt.W_a".into(), vec![1, ds], Init::Xavier);
        add("vatt.b_a".into(), vec![1], Init::Zeros);
    }
    out
}

/// Exact number of trainable scalars for `cfg`.
pub fn count_params(cfg: &ModelConfig) -> usize {
    specs(cfg).iter().map(|s| s.shape.iter().product::<usize>()).sum()
}

/// Per-component closed-form counts; they sum to [`count_params`].
pub fn param_breakdown(cfg: &ModelConfig) -> Vec<ParamGroup> {
    let (e, r, c) = (cfg.emb_dim, cfg.rnn_dim, cfg.ctx_dim());
    let (dg, ds, vs, vt) = (cfg.global_dim, cfg.spatial_dim, cfg.src_vocab, cfg.trg_vocab);
    let v = cfg.variant;
    let mut g = vec![
        ParamGroup { group: "embeddings", formula: format!("(Vs + Vt)·E = ({vs} + {vt})·{e}"), count: (vs + vt) * e },
        ParamGroup {
            group: "encoder",
            formula: format!("2·(3R·E + 3R·R + 3R + 6R), R={r}"),
            count: 2 * (3 * r * e + 3 * r * r + 3 * r + 6 * r),
        },
    ];
    if v.mean_init() {
        g.push(ParamGroup { group: "decoder init", formula: "R·C".into(), count: r * c });
    }
    g.push(ParamGroup {
        group: "attention",
        formula: "C·C + C + C·R + C + 1".into(),
        count: c * c + c + c * r + c + 1,
    });
    g.push(ParamGroup {
        group: "decoder",
        formula: "3R·E + 3R·C + 2·(3R·R + 3R)".into(),
        count: 3 * r * e + 3 * r * c + 2 * (3 * r * r + 3 * r),
    });
    let ctx_in = if v.uses_spatial() { c + ds } else { c };
    g.push(ParamGroup {
        group: "output",
        formula: if v.uses_spatial() { "E·R + E·(C + Ds) + Vt·E" } else { "E·R + E·C + Vt·E" }.into(),
        count: e * r + e * ctx_in + vt * e,
    });
    let mut img = Vec::new();
    if v.image_init() {
        img.push(("R·Dg", r * dg));
    }
    if v.ctx_modulation() {
        img.push(("C·Dg", c * dg));
    }
    if v.trg_modulation() {
        img.push(("E·Dg", e * dg));
    }
    if !img.is_empty() {
        g.push(ParamGroup {
            group: "image transforms",
            formula: img.iter().map(|x| x.0).collect::<Vec<_>>().join(" + "),
            count: img.iter().map(|x| x.1).sum(),
        });
    }
    if v.uses_spatial() {
        g.push(ParamGroup {
            group: "visual attention",
            formula: "Ds·Ds + Ds + Ds·R + Ds + 1".into(),
            count: ds * ds + ds + ds * r + ds + 1,
        });
    }
    g
}

/// Ids of every parameter, resolved once per model.
#[derive(Debug, Clone)]
pub(crate) struct Ids {
    pub src_emb: ParamId,
    pub trg_emb: ParamId,
    pub enc: [GruIds; 2],
    pub w_init: Option<ParamId>,
    pub att: AttIds,
    pub dec1: GruIds,
    pub dec2: GruIds,
    pub w_dec: ParamId,
    pub w_ctx: ParamId,
    pub w_o: ParamId,
    pub img_init: Option<ParamId>,
    pub img_ctx: Option<ParamId>,
    pub img_trg: Option<ParamId>,
    pub vatt: Option<AttIds>,
}

#[derive(Debug, Clone)]
pub(crate) struct GruIds {
    pub w: ParamId,
    pub u: ParamId,
    pub b: ParamId,
    /// Gain and bias per gate; encoder only.
    pub ln: Option<[(ParamId, ParamId); 3]>,
}

#[derive(Debug, Clone)]
pub(crate) struct AttIds {
    pub w_s: ParamId,
    pub b_s: ParamId,
    pub w_h: ParamId,
    pub w_a: ParamId,
    pub b_a: ParamId,
}

impl Ids {
    pub fn resolve<T: Real>(store: &ParamStore<T>) -> Ids {
        let id = |n: &str| store.id(n).unwrap_or_else(|| panic!("parameter {n} missing"));
        let opt = |n: &str| store.id(n);
        let gru = |p: &str, ln: bool| GruIds {
            w: id(&format!("{p}.W")),
            u: id(&format!("{p}.U")),
            b: id(&format!("{p}.b")),
            ln: ln.then(|| GATES.map(|g| (id(&format!("{p}.ln_{g}.gain")), id(&format!("{p}.ln_{g}.bias"))))),
        };
        let att = |p: &str| AttIds {
            w_s: id(&format!("{p}.W_s")),
            b_s: id(&format!("{p}.b_s")),
            w_h: id(&format!("{p}.W_h")),
            w_a: id(&format!("{p}.W_a")),
            b_a: id(&format!("{p}.b_a")),
        };
        Ids {
            src_emb: id("src_emb"),
            trg_emb: id("trg_emb"),
            enc: [gru("enc_fwd", true), gru("enc_bwd", true)],
            w_init: opt("W_init"),
            att: att("att"),
            dec1: gru("dec1", false),
            dec2: gru("dec2", false),
            w_dec: id("out.W_dec"),
            w_ctx: id("out.W_ctx"),
            w_o: id("out.W_o"),
            img_init: opt("img.W_init"),
            img_ctx: opt("img.W_ctx"),
            img_trg: opt("img.W_trg"),
            vatt: opt("vatt.W_s").map(|_| att("vatt")),
        }
    }
}

pub(crate) fn init_params<T: Real>(cfg: &ModelConfig, seed: u64, rng: &mut Rng) -> Result<ParamStore<T>> {
    let mut store = ParamStore::new(seed);
    for s in specs(cfg) {
        let n: usize = s.shape.iter().product();
        let t = match s.init {
            Init::Xavier => {
                let (rows, cols) = (s.shape[0], s.shape.get(1).copied().unwrap_or(1));
                let m = xavier_init::<T>(rows, cols, rng)?;
                Tensor::new(s.shape.clone(), m.into_data())?
            }
            Init::Zeros => Tensor::zeros(s.shape.clone()),
            Init::Ones => Tensor::new(s.shape.clone(), vec![T::one(); n])?,
        };
        store.insert(s.name, t)?;
    }
    Ok(store)
}

/// Checks that `store` holds exactly the parameters `cfg` calls for.
pub(crate) fn check_store<T>(cfg: &ModelConfig, store: &ParamStore<T>) -> Result<()>
where
    T: Real,
{
    let specs = specs(cfg);
    if specs.len() != store.len() {
        return Err(Error::Config(format!(
            "{} variant expects {} parameter tensors, checkpoint has {}",
            cfg.variant,
            specs.len(),
            store.len()
        )));
    }
    for s in &specs {
        match store.by_name(&s.name) {
            None => return Err(Error::Config(format!("parameter {} missing for variant {}", s.name, cfg.variant))),
            Some(t) if t.shape() != s.shape.as_slice() => {
                return Err(Error::Config(format!(
                    "parameter {} has shape {:?}, expected {:?}",
                    s.name,
                    t.shape(),
                    s.shape
                )))
            }
            _ => {}
        }
    }
    Ok(())
}

use std::path::PathBuf;

use clap::Args;
use mmtl_core::datastore::{attach_features, read_lines, Sample};
use mmtl_core::decoder::{BeamConfig, EnsembleMode};
use mmtl_core::model::Model;
use mmtl_core::textpipe::Vocabulary;
use mmtl_core::trainer::translate_all;
use mmtl_core::Error;
use serde::Serialize;

use super::data::load_features;
use super::{create_dir, join_lines, write_file};
use crate::{CliError, CliResult};

#[derive(Debug, Args)]
pub struct TranslateArgs {
    /// Checkpoint; repeat for an ensemble.
    #[arg(long = "model", required = true)]
    pub models: Vec<PathBuf>,
    #[arg(long)]
    pub src_vocab: PathBuf,
    #[arg(long)]
    pub trg_vocab: PathBuf,
    /// Tokenized source sentences, one per line.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub global: Option<PathBuf>,
    #[arg(long)]
    pub spatial: Option<PathBuf>,
    #[arg(long, default_value_t = mmtl_core::decoder::DEFAULT_BEAM)]
    pub beam: usize,
    #[arg(long)]
    pub max_len: Option<usize>,
    #[arg(long)]
    pub length_norm: bool,
    #[arg(long, default_value = "arith")]
    pub ensemble_mode: EnsembleMode,
    /// Receives `hyp.txt` and `translate.json`.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Serialize)]
struct Echo<'a> {
    models: &'a [PathBuf],
    input: &'a PathBuf,
    global: &'a Option<PathBuf>,
    spatial: &'a Option<PathBuf>,
    decode: BeamConfig,
}

pub fn run(a: TranslateArgs) -> CliResult {
    if a.beam == 0 {
        return Err(CliError::Usage("--beam must be at least 1".into()));
    }
    let models = a.models.iter().map(|p| Model::<f32>::load(p)).collect::<Result<Vec<_>, _>>()?;
    let cfg = models[0].config().clone();
    for (m, p) in models.iter().zip(&a.models).skip(1) {
        let c = m.config();
        if (c.variant, c.src_vocab, c.trg_vocab) != (cfg.variant, cfg.src_vocab, cfg.trg_vocab) {
            return Err(Error::Data(format!("{} is not compatible with {}", p.display(), a.models[0].display())).into());
        }
    }
    let src_vocab = Vocabulary::load(&a.src_vocab)?;
    let trg_vocab = Vocabulary::load(&a.trg_vocab)?;
    if (src_vocab.len(), trg_vocab.len()) != (cfg.src_vocab, cfg.trg_vocab) {
        return Err(Error::Data(format!(
            "vocabulary sizes {}/{} do not match the checkpoint ({}/{})",
            src_vocab.len(),
            trg_vocab.len(),
            cfg.src_vocab,
            cfg.trg_vocab
        ))
        .into());
    }
    let mut samples: Vec<Sample> = read_lines(&a.input)?
        .iter()
        .map(|l| {
            let toks: Vec<String> = l.split_whitespace().map(String::from).collect();
            Sample::from_ids(&src_vocab.encode_all(&toks), &[])
        })
        .collect();
    let (g, s) = load_features(&cfg, a.global.as_deref(), a.spatial.as_deref())?;
    attach_features(&mut samples, g.as_ref(), s.as_ref())?;

    let decode =
        BeamConfig { beam_size: a.beam, max_len: a.max_len, length_norm: a.length_norm, ensemble: a.ensemble_mode };
    let refs: Vec<&Model<f32>> = models.iter().collect();
    let hyps = translate_all(&refs, &samples, &trg_vocab, &decode)?;

    create_dir(&a.out)?;
    write_file(&a.out.join("hyp.txt"), join_lines(&hyps))?;
    let echo = Echo { models: &a.models, input: &a.input, global: &a.global, spatial: &a.spatial, decode };
    write_file(&a.out.join("translate.json"), serde_json::to_string_pretty(&echo).expect("echo serializes") + "\n")?;
    println!("translated {} sentences with {} model(s)", hyps.len(), models.len());
    Ok(())
}

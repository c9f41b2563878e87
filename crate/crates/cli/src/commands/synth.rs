use std::path::PathBuf;

use clap::Args;
use mmtl_core::datastore::{synth_generate, SynthConfig};
use mmtl_core::textpipe::vocab_build;
use mmtl_core::Error;

use super::{copy_file, create_dir};
use crate::CliResult;

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Generator config (JSON); omitted fields take their defaults.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

/// Writes the corpus, `manifest.json`, and `src.vocab`/`trg.vocab` built
/// from the training split.
pub fn run(a: SynthArgs) -> CliResult {
    let cfg: SynthConfig = match &a.config {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| Error::Io { path: p.clone(), source: e })?;
            serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", p.display())))?
        }
        None => SynthConfig::default(),
    };
    let corpus = synth_generate(&cfg, a.seed)?;
    create_dir(&a.out)?;
    corpus.write_to(&a.out)?;
    vocab_build(&corpus.train.src).save(&a.out.join("src.vocab"))?;
    vocab_build(&corpus.train.trg).save(&a.out.join("trg.vocab"))?;
    if let Some(p) = &a.config {
        copy_file(p, &a.out.join("synth_config.json"))?;
    }
    println!(
        "wrote {} / {} / {} sentences to {}",
        corpus.train.len(),
        corpus.valid.len(),
        corpus.test.len(),
        a.out.display()
    );
    Ok(())
}

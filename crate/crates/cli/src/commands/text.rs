use std::path::PathBuf;

use clap::Args;
use mmtl_core::datastore::read_lines;
use mmtl_core::textpipe::{bpe_learn, normalize_line, vocab_build, BpeModel};

use super::{create_dir, join_lines, tokenized_lines, write_file};
use crate::{CliError, CliResult};

#[derive(Debug, Args)]
pub struct LearnBpeArgs {
    /// Raw text files (normalized before learning).
    #[arg(long, required = true, num_args = 1..)]
    pub input: Vec<PathBuf>,
    #[arg(long)]
    pub merges: usize,
    /// Written as `<out>/bpe.codes`.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ApplyBpeArgs {
    #[arg(long)]
    pub codes: PathBuf,
    /// Each input is written under its own file name in `--out`.
    #[arg(long, required = true, num_args = 1..)]
    pub input: Vec<PathBuf>,
    /// Input is already tokenized: split on whitespace only.
    #[arg(long)]
    pub pretokenized: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct BuildVocabArgs {
    /// Tokenized text files.
    #[arg(long, required = true, num_args = 1..)]
    pub input: Vec<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value = "vocab.txt")]
    pub name: String,
}

fn normalized(path: &std::path::Path) -> CliResult<Vec<Vec<String>>> {
    Ok(read_lines(path)?.iter().map(|l| normalize_line(l)).collect())
}

pub fn learn_bpe(a: LearnBpeArgs) -> CliResult {
    let mut corpus = Vec::new();
    for p in &a.input {
        corpus.extend(normalized(p)?);
    }
    let model = bpe_learn(&corpus, a.merges)?;
    create_dir(&a.out)?;
    model.save(&a.out.join("bpe.codes"))?;
    println!("learned {} merges from {} lines", model.merges().len(), corpus.len());
    Ok(())
}

pub fn apply_bpe(a: ApplyBpeArgs) -> CliResult {
    let model = BpeModel::load(&a.codes)?;
    create_dir(&a.out)?;
    for p in &a.input {
        let name = p.file_name().ok_or_else(|| CliError::Usage(format!("{} is not a file", p.display())))?;
        let lines = if a.pretokenized { tokenized_lines(p)? } else { normalized(p)? };
        let seg: Vec<Vec<String>> = lines.iter().map(|l| model.apply(l)).collect();
        write_file(&a.out.join(name), join_lines(&seg))?;
    }
    Ok(())
}

pub fn build_vocab(a: BuildVocabArgs) -> CliResult {
    let mut corpus = Vec::new();
    for p in &a.input {
        corpus.extend(tokenized_lines(p)?);
    }
    let vocab = vocab_build(&corpus);
    create_dir(&a.out)?;
    vocab.save(&a.out.join(&a.name))?;
    println!("{} entries", vocab.len());
    Ok(())
}

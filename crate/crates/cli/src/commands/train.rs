use std::path::{Path, PathBuf};

use clap::Args;
use mmtl_core::model::Variant;
use mmtl_core::textpipe::{vocab_build, Vocabulary};
use mmtl_core::trainer::{train_multi, TrainData};
use serde::Serialize;

use super::data::{load_split, with_suffix};
use super::{create_dir, tokenized_lines, word_lines, write_file};
use crate::{thread_cap, CliError, CliResult, ConfigArgs, DataConfig, ExperimentConfig};

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub config: ConfigArgs,
    /// Directory written by `synth` (sets the train and valid prefixes).
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub variant: Option<Variant>,
    /// Comma-separated seeds, e.g. `1,2,3,4,5`.
    #[arg(long, value_delimiter = ',')]
    pub seeds: Option<Vec<u64>>,
    /// Runs trained concurrently.
    #[arg(long, default_value_t = 1)]
    pub parallel: usize,
    #[arg(long)]
    pub max_updates: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub eval_every: Option<usize>,
    #[arg(long)]
    pub patience: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Serialize)]
struct RunSummary {
    seed: u64,
    updates: usize,
    stop_reason: Option<String>,
    best_metric: Option<f64>,
    best_update: Option<usize>,
}

/// Flags override config fields.
pub fn effective_config(a: &TrainArgs) -> CliResult<ExperimentConfig> {
    let mut cfg = ExperimentConfig::resolve(a.config.config.as_deref(), a.config.preset.as_deref(), "synthetic")?;
    if let Some(d) = &a.data {
        let DataConfig { src_vocab, trg_vocab, .. } = cfg.data;
        cfg.data = DataConfig { src_vocab, trg_vocab, ..DataConfig::from_dir(d) };
        if cfg.data.src_vocab.is_none() && d.join("src.vocab").exists() {
            cfg.data.src_vocab = Some(d.join("src.vocab"));
            cfg.data.trg_vocab = Some(d.join("trg.vocab"));
        }
    }
    if let Some(v) = a.variant {
        cfg.model.variant = v;
    }
    if let Some(s) = &a.seeds {
        cfg.train.seeds = s.clone();
    }
    if let Some(n) = a.max_updates {
        cfg.train.max_updates = n;
    }
    if let Some(lr) = a.lr {
        cfg.train.lr = lr;
    }
    if let Some(n) = a.eval_every {
        cfg.train.eval_every = n;
    }
    if let Some(n) = a.patience {
        cfg.train.patience = n;
    }
    cfg.train.validate()?;
    Ok(cfg)
}

fn vocab_for(given: Option<&Path>, prefix: &Path, suffix: &str) -> CliResult<Vocabulary> {
    match given {
        Some(p) => Ok(Vocabulary::load(p)?),
        None => Ok(vocab_build(&tokenized_lines(&with_suffix(prefix, suffix))?)),
    }
}

/// Writes `config.json` (effective), `config.input.json` (the `--config`
/// file verbatim, if any), `src.vocab`, `trg.vocab`,
/// `seed-{s}/{best.ckpt,last.ckpt,log.jsonl}` and `summary.json`.
pub fn run(a: TrainArgs) -> CliResult {
    if a.parallel == 0 {
        return Err(CliError::Usage("--parallel must be at least 1".into()));
    }
    let mut cfg = effective_config(&a)?;
    let (train_p, valid_p) = match (&cfg.data.train, &cfg.data.valid) {
        (Some(t), Some(v)) => (t.clone(), v.clone()),
        _ => return Err(CliError::Usage("training needs data.train and data.valid (or --data DIR)".into())),
    };
    let src_vocab = vocab_for(cfg.data.src_vocab.as_deref(), &train_p, ".src")?;
    let trg_vocab = vocab_for(cfg.data.trg_vocab.as_deref(), &train_p, ".trg")?;
    cfg.model.src_vocab = src_vocab.len();
    cfg.model.trg_vocab = trg_vocab.len();
    cfg.model.validate()?;

    let train = load_split(&train_p, &src_vocab, &trg_vocab, &cfg.model)?;
    let valid = load_split(&valid_p, &src_vocab, &trg_vocab, &cfg.model)?;
    let refs = word_lines(&with_suffix(&valid_p, ".trg"))?;

    create_dir(&a.out)?;
    write_file(&a.out.join("config.json"), cfg.to_json())?;
    if let Some(p) = &a.config.config {
        super::copy_file(p, &a.out.join("config.input.json"))?;
    }
    src_vocab.save(&a.out.join("src.vocab"))?;
    trg_vocab.save(&a.out.join("trg.vocab"))?;

    let workers = a.parallel.min(thread_cap()?.unwrap_or(usize::MAX)).min(cfg.train.seeds.len()).max(1);
    log::info!(
        "training {} on {} sentences, seeds {:?}, {} worker(s)",
        cfg.model.variant,
        train.len(),
        cfg.train.seeds,
        workers
    );
    let data = TrainData { train: &train, valid: &valid, valid_refs: &refs, trg_vocab: &trg_vocab };
    let outcomes = if workers > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| CliError::Usage(format!("thread pool: {e}")))?;
        pool.install(|| train_multi(&cfg.model, &cfg.train, data, &cfg.train.seeds, Some(&a.out), true))?
    } else {
        train_multi(&cfg.model, &cfg.train, data, &cfg.train.seeds, Some(&a.out), false)?
    };

    let summary: Vec<RunSummary> = outcomes
        .iter()
        .map(|o| RunSummary {
            seed: o.log.seed,
            updates: o.log.updates(),
            stop_reason: o.log.stop_reason.map(|r| format!("{r:?}")),
            best_metric: o.log.best_metric,
            best_update: o.log.best_update,
        })
        .collect();
    write_file(
        &a.out.join("summary.json"),
        serde_json::to_string_pretty(&summary).expect("summary serializes") + "\n",
    )?;
    for s in &summary {
        println!(
            "seed {}: {} updates, best validation {} at update {}",
            s.seed,
            s.updates,
            s.best_metric.map_or("-".into(), |m| format!("{m:.4}")),
            s.best_update.map_or("-".into(), |u| u.to_string())
        );
    }
    Ok(())
}

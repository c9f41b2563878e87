use std::path::PathBuf;

use clap::{Args, ValueEnum};
use mmtl_core::datastore::load_senses;
use mmtl_core::evalkit::{aggregate_runs, ar_test, sense_accuracy, Comparison, EvalReport, Metric, DEFAULT_SHUFFLES};
use mmtl_core::Error;

use super::{create_dir, word_lines, write_file};
use crate::{CliError, CliResult};

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Hypotheses of one run; repeat for several seeds of the same system.
    #[arg(long = "hyp", required = true)]
    pub hyps: Vec<PathBuf>,
    #[arg(long = "ref")]
    pub reference: PathBuf,
    /// Output of the ensemble of those runs.
    #[arg(long)]
    pub ensemble: Option<PathBuf>,
    #[arg(long, default_value = "system")]
    pub name: String,
    /// Baseline output compared against the ensemble (or first run).
    #[arg(long)]
    pub baseline: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_SHUFFLES)]
    pub shuffles: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Sense labels of the synthetic test split; adds ambiguous-token accuracy.
    #[arg(long)]
    pub senses: Option<PathBuf>,
    /// Senses per ambiguous word in the synthetic corpus.
    #[arg(long, default_value_t = 2)]
    pub senses_per_word: usize,
    /// Receives `report.json`.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MetricArg {
    Bleu,
    Meteor,
    Both,
}

#[derive(Debug, Args)]
pub struct SignificanceArgs {
    #[arg(long)]
    pub a: PathBuf,
    #[arg(long)]
    pub b: PathBuf,
    #[arg(long = "ref")]
    pub reference: PathBuf,
    #[arg(long, value_enum, default_value_t = MetricArg::Both)]
    pub metric: MetricArg,
    #[arg(long, default_value_t = DEFAULT_SHUFFLES)]
    pub shuffles: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
}

fn metrics(m: MetricArg) -> Vec<Metric> {
    match m {
        MetricArg::Bleu => vec![Metric::Bleu],
        MetricArg::Meteor => vec![Metric::Meteor],
        MetricArg::Both => vec![Metric::Bleu, Metric::Meteor],
    }
}

pub fn evaluate(a: EvaluateArgs) -> CliResult {
    let refs = word_lines(&a.reference)?;
    let runs = a.hyps.iter().map(|p| word_lines(p)).collect::<CliResult<Vec<_>>>()?;
    let ens = a.ensemble.as_deref().map(word_lines).transpose()?;
    let system = aggregate_runs(&a.name, &runs, ens.as_deref(), &refs)?;
    let mut report = EvalReport::new(vec![system]);
    if let Some(b) = &a.baseline {
        let base = word_lines(b)?;
        let ours = ens.as_ref().unwrap_or(&runs[0]);
        for m in metrics(MetricArg::Both) {
            let p = ar_test(m, ours, &base, &refs, a.shuffles, a.seed)?;
            report.comparisons.push(Comparison {
                system_a: a.name.clone(),
                system_b: b.display().to_string(),
                metric: m.name().to_string(),
                p_value: p,
            });
        }
    }
    print!("{}", report.render());
    let mut json: serde_json::Value = serde_json::from_str(&report.to_json()).expect("report is JSON");
    if let Some(sp) = &a.senses {
        let labels = load_senses(sp)?;
        let mut accs = Vec::new();
        for (h, p) in runs.iter().zip(&a.hyps).chain(ens.iter().zip(a.ensemble.iter())) {
            let acc = sense_accuracy(h, &labels, a.senses_per_word)?;
            println!("ambiguous-token accuracy {}: {:.1}%", p.display(), 100.0 * acc);
            accs.push(serde_json::json!({ "hyp": p, "accuracy": acc }));
        }
        json["sense_accuracy"] = serde_json::Value::Array(accs);
    }
    if let Some(out) = &a.out {
        create_dir(out)?;
        write_file(&out.join("report.json"), serde_json::to_string_pretty(&json).expect("report serializes") + "\n")?;
    }
    Ok(())
}

pub fn significance(a: SignificanceArgs) -> CliResult {
    if a.shuffles == 0 {
        return Err(CliError::Usage("--shuffles must be at least 1".into()));
    }
    let refs = word_lines(&a.reference)?;
    let (ha, hb) = (word_lines(&a.a)?, word_lines(&a.b)?);
    if ha.len() != refs.len() || hb.len() != refs.len() {
        return Err(
            Error::Data(format!("line counts differ: a {}, b {}, ref {}", ha.len(), hb.len(), refs.len())).into()
        );
    }
    for m in metrics(a.metric) {
        let p = ar_test(m, &ha, &hb, &refs, a.shuffles, a.seed)?;
        println!("{}: p = {p:.4} ({} shuffles)", m.name(), a.shuffles);
    }
    Ok(())
}

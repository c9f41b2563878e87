//! Corpus BLEU, an exact-match METEOR surrogate, multi-run aggregation and
//! the approximate-randomization significance test, and ambiguous-token
//! accuracy for the synthetic corpus.

mod accuracy;
mod bleu;
mod meteor;
mod report;
mod significance;

pub use accuracy::{sense_accuracy, sense_correct};
pub use bleu::{bleu, bleu_stats, BleuStats, BLEU_ORDER};
pub use meteor::{align, meteor_sentences, meteor_surrogate, MeteorStats, METEOR_LABEL};
pub use report::{aggregate_runs, Comparison, EvalReport, MetricSummary, SystemReport};
pub use significance::{ar_test, Metric, DEFAULT_SHUFFLES};

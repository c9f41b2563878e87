use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evalkit::bleu::{check_aligned, BleuStats};
use crate::evalkit::meteor::align;
use crate::numerics::rng_stream;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Metric {
    Bleu,
    Meteor,
}

impl Metric {
    pub fn name(self) -> &'static str {
        match self {
            Metric::Bleu => "bleu",
            Metric::Meteor => "meteor",
        }
    }
}

pub const DEFAULT_SHUFFLES: usize = 10_000;

/// Per-sentence statistics from which a corpus score can be re-assembled
/// for any mix of two systems.
enum SentStats {
    Bleu(Vec<BleuStats>),
    Meteor(Vec<f64>),
}

impl SentStats {
    fn new<S: AsRef<str>>(metric: Metric, hyps: &[Vec<S>], refs: &[Vec<S>]) -> Self {
        match metric {
            Metric::Bleu => SentStats::Bleu(hyps.iter().zip(refs).map(|(h, r)| BleuStats::sentence(h, r)).collect()),
            Metric::Meteor => SentStats::Meteor(hyps.iter().zip(refs).map(|(h, r)| align(h, r).score()).collect()),
        }
    }

    /// Corpus score where sentence i comes from `b` when `pick_b[i]`.
    fn score(a: &SentStats, b: &SentStats, pick_b: impl Fn(usize) -> bool) -> f64 {
        match (a, b) {
            (SentStats::Bleu(a), SentStats::Bleu(b)) => {
                let mut t = BleuStats::default();
                for i in 0..a.len() {
                    t.add(if pick_b(i) { &b[i] } else { &a[i] });
                }
                t.score()
            }
            (SentStats::Meteor(a), SentStats::Meteor(b)) => {
                (0..a.len()).map(|i| if pick_b(i) { b[i] } else { a[i] }).sum::<f64>() / a.len() as f64
            }
            _ => unreachable!("same metric on both sides"),
        }
    }
}

/// Approximate-randomization test of `|metric(A) - metric(B)|`.
///
/// Each shuffle swaps the two systems' outputs per sentence with
/// probability 1/2; shuffle `k` draws from its own stream of `seed`, so
/// the result does not depend on scheduling. Returns
/// `(#{Δ' ≥ Δ} + 1) / (n_shuffles + 1)`.
pub fn ar_test<S: AsRef<str> + Sync>(
    metric: Metric,
    hyps_a: &[Vec<S>],
    hyps_b: &[Vec<S>],
    refs: &[Vec<S>],
    n_shuffles: usize,
    seed: u64,
) -> Result<f64> {
    check_aligned(hyps_a, refs)?;
    check_aligned(hyps_b, refs)?;
    if n_shuffles == 0 {
        return Err(Error::InvalidArgument("n_shuffles must be at least 1".into()));
    }
    let a = SentStats::new(metric, hyps_a, refs);
    let b = SentStats::new(metric, hyps_b, refs);
    let n = refs.len();
    let observed = (SentStats::score(&a, &b, |_| false) - SentStats::score(&a, &b, |_| true)).abs();
    let hits: usize = (0..n_shuffles)
        .into_par_iter()
        .map(|k| {
            let mut rng = rng_stream(seed, k as u64 + 1);
            let swap: Vec<bool> = (0..n).map(|_| rng.random::<bool>()).collect();
            let x = SentStats::score(&a, &b, |i| swap[i]);
            let y = SentStats::score(&a, &b, |i| !swap[i]);
            usize::from((x - y).abs() >= observed)
        })
        .sum();
    Ok((hits + 1) as f64 / (n_shuffles + 1) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn corpus(n: usize, seed: u64, vocab: u32) -> Vec<Vec<String>> {
        let mut rng = rng_stream(seed, 0);
        (0..n).map(|_| (0..8).map(|_| format!("w{}", rng.random_range(0..vocab))).collect()).collect()
    }

    #[test]
    fn self_comparison_gives_one() {
        let r = corpus(50, 1, 10);
        let h = corpus(50, 2, 10);
        for m in [Metric::Bleu, Metric::Meteor] {
            assert_eq!(ar_test(m, &h, &h, &r, 200, 3).unwrap(), 1.0);
        }
    }

    #[test]
    fn dominant_system_is_significant() {
        let r = corpus(200, 1, 10);
        let bad: Vec<Vec<String>> = (0..200).map(|i| vec![format!("zz{i}"); 8]).collect();
        for m in [Metric::Bleu, Metric::Meteor] {
            let p = ar_test(m, &r, &bad, &r, 1000, 5).unwrap();
            assert!(p <= 0.05, "{m:?}: p = {p}");
            assert!(p > 0.0);
        }
    }

    #[test]
    fn deterministic_given_seed() {
        let r = corpus(40, 1, 6);
        let a = corpus(40, 2, 6);
        let b = corpus(40, 3, 6);
        let p1 = ar_test(Metric::Meteor, &a, &b, &r, 300, 9).unwrap();
        let p2 = ar_test(Metric::Meteor, &a, &b, &r, 300, 9).unwrap();
        assert_eq!(p1, p2);
        assert!(ar_test(Metric::Bleu, &a, &b[..3], &r, 10, 0).is_err());
        assert!(ar_test(Metric::Bleu, &a, &b, &r, 0, 0).is_err());
    }
}

use std::collections::HashMap;

use crate::error::{Error, Result};

pub const BLEU_ORDER: usize = 4;

/// Sufficient statistics of corpus BLEU; they add over sentences.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct BleuStats {
    pub matches: [u64; BLEU_ORDER],
    pub totals: [u64; BLEU_ORDER],
    pub hyp_len: u64,
    pub ref_len: u64,
}

fn ngram_counts<S: AsRef<str>>(toks: &[S], n: usize) -> HashMap<Vec<&str>, u64> {
    let mut m = HashMap::new();
    if toks.len() >= n {
        for w in toks.windows(n) {
            *m.entry(w.iter().map(AsRef::as_ref).collect()).or_insert(0) += 1;
        }
    }
    m
}

impl BleuStats {
    pub fn sentence<S: AsRef<str>>(hyp: &[S], reference: &[S]) -> Self {
        let mut s = BleuStats { hyp_len: hyp.len() as u64, ref_len: reference.len() as u64, ..Default::default() };
        for n in 1..=BLEU_ORDER {
            let h = ngram_counts(hyp, n);
            let r = ngram_counts(reference, n);
            s.totals[n - 1] = hyp.len().saturating_sub(n - 1) as u64;
            s.matches[n - 1] = h.iter().map(|(g, &c)| c.min(r.get(g).copied().unwrap_or(0))).sum();
        }
        s
    }

    pub fn add(&mut self, o: &BleuStats) {
        for n in 0..BLEU_ORDER {
            self.matches[n] += o.matches[n];
            self.totals[n] += o.totals[n];
        }
        self.hyp_len += o.hyp_len;
        self.ref_len += o.ref_len;
    }

    /// Clipped precision of order `n` (1-based); 0 when there are no n-grams.
    pub fn precision(&self, n: usize) -> f64 {
        let (m, t) = (self.matches[n - 1], self.totals[n - 1]);
        if t == 0 {
            0.0
        } else {
            m as f64 / t as f64
        }
    }

    pub fn brevity_penalty(&self) -> f64 {
        if self.hyp_len == 0 {
            0.0
        } else if self.hyp_len < self.ref_len {
            (1.0 - self.ref_len as f64 / self.hyp_len as f64).exp()
        } else {
            1.0
        }
    }

    /// BLEU on the 0-100 scale, unsmoothed.
    pub fn score(&self) -> f64 {
        let p: Vec<f64> = (1..=BLEU_ORDER).map(|n| self.precision(n)).collect();
        if p.contains(&0.0) {
            return 0.0;
        }
        let log_mean = p.iter().map(|x| x.ln()).sum::<f64>() / BLEU_ORDER as f64;
        100.0 * self.brevity_penalty() * log_mean.exp()
    }
}

pub(crate) fn check_aligned<A, B>(hyps: &[A], refs: &[B]) -> Result<()> {
    if hyps.len() != refs.len() {
        return Err(Error::InvalidArgument(format!("{} hypotheses but {} references", hyps.len(), refs.len())));
    }
    if refs.is_empty() {
        return Err(Error::InvalidArgument("empty corpus".into()));
    }
    Ok(())
}

pub fn bleu_stats<S: AsRef<str>>(hyps: &[Vec<S>], refs: &[Vec<S>]) -> Result<BleuStats> {
    check_aligned(hyps, refs)?;
    let mut total = BleuStats::default();
    for (h, r) in hyps.iter().zip(refs) {
        total.add(&BleuStats::sentence(h, r));
    }
    Ok(total)
}

/// Corpus-level BLEU-4 over tokenized sentences, single reference.
pub fn bleu<S: AsRef<str>>(hyps: &[Vec<S>], refs: &[Vec<S>]) -> Result<f64> {
    Ok(bleu_stats(hyps, refs)?.score())
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    fn toks(s: &str) -> Vec<String> {
        s.split_whitespace().map(String::from).collect()
    }

    #[test]
    fn identical_corpus_scores_100() {
        let c = vec![toks("a cat sat on the mat"), toks("the dog barked at night")];
        assert_eq!(bleu(&c, &c).unwrap(), 100.0);
    }

    #[test]
    fn clipped_precision_example() {
        let h = vec![toks("the the the the the the the")];
        let r = vec![toks("the cat is on the mat")];
        let s = bleu_stats(&h, &r).unwrap();
        assert_eq!((s.matches[0], s.totals[0]), (2, 7));
        assert_eq!(s.precision(1), 2.0 / 7.0);
        assert_eq!(s.matches[3], 0);
        assert_eq!(s.score(), 0.0);
    }

    #[test]
    fn hand_computed_partial_match() {
        // hyp 5 tokens, ref 6: p1 = 4/5, p2 = 2/4, p3 = 1/3, p4 = 0/2 -> 0
        let h = vec![toks("a b c d x")];
        let r = vec![toks("a b c y d z")];
        let s = bleu_stats(&h, &r).unwrap();
        assert_eq!(s.matches, [4, 2, 1, 0]);
        assert_eq!(s.totals, [5, 4, 3, 2]);
        assert_eq!(s.score(), 0.0);

        // two sentences pooled: all orders positive
        let h = vec![toks("a b c d e"), toks("p q r s")];
        let r = vec![toks("a b c d e f"), toks("p q r s")];
        let s = bleu_stats(&h, &r).unwrap();
        assert_eq!(s.matches, [9, 7, 5, 3]);
        assert_eq!(s.totals, [9, 7, 5, 3]);
        let want = 100.0 * (1.0f64 - 10.0 / 9.0).exp();
        assert!((s.score() - want).abs() < 1e-12);
    }

    #[test]
    fn misaligned_input_rejected() {
        assert!(bleu(&[toks("a")], &[toks("a"), toks("b")]).is_err());
        assert!(bleu::<String>(&[], &[]).is_err());
    }

    proptest! {
        #[test]
        fn self_bleu_is_100_and_order_free(
            corpus in prop::collection::vec(prop::collection::vec(0u8..6, 4..12), 1..8),
            seed in any::<u64>(),
        ) {
            let c: Vec<Vec<String>> = corpus.iter().map(|s| s.iter().map(|t| format!("w{t}")).collect()).collect();
            prop_assert_eq!(bleu(&c, &c).unwrap(), 100.0);
            let refs: Vec<Vec<String>> = c.iter().rev().cloned().collect();
            let base = bleu(&c, &refs).unwrap();
            let mut order: Vec<usize> = (0..c.len()).collect();
            let k = (seed as usize) % order.len();
            order.rotate_left(k);
            let ph: Vec<_> = order.iter().map(|&i| c[i].clone()).collect();
            let pr: Vec<_> = order.iter().map(|&i| refs[i].clone()).collect();
            prop_assert_eq!(bleu(&ph, &pr).unwrap(), base);
            prop_assert!((0.0..=100.0).contains(&base));
        }
    }
}

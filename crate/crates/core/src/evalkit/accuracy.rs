//! Ambiguous-token accuracy on the synthetic corpus.

use crate::datastore::{sense_token, SenseLabel};
use crate::error::{Error, Result};

/// A hypothesis is correct when it contains the gold sense token of its
/// ambiguous word and no other sense of that word.
pub fn sense_correct(hyp: &[String], label: &SenseLabel, senses_per_word: usize) -> bool {
    let gold = label.target_token();
    let mut found = false;
    for tok in hyp {
        if *tok == gold {
            found = true;
        } else if (0..senses_per_word).any(|k| *tok == sense_token(label.word, k)) {
            return false;
        }
    }
    found
}

pub fn sense_accuracy(hyps: &[Vec<String>], labels: &[SenseLabel], senses_per_word: usize) -> Result<f64> {
    if hyps.len() != labels.len() {
        return Err(Error::Shape(format!("{} hypotheses for {} labels", hyps.len(), labels.len())));
    }
    if hyps.is_empty() {
        return Err(Error::InvalidArgument("accuracy over an empty set".into()));
    }
    let hits = hyps.iter().zip(labels).filter(|(h, l)| sense_correct(h, l, senses_per_word)).count();
    Ok(hits as f64 / hyps.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<String> {
        s.split_whitespace().map(String::from).collect()
    }

    #[test]
    fn scoring_rules() {
        let l = SenseLabel { word: 2, sense: 1, position: 0 };
        assert!(sense_correct(&toks("t_a2_1 t_f3"), &l, 2));
        assert!(!sense_correct(&toks("t_a2_0 t_f3"), &l, 2));
        assert!(!sense_correct(&toks("t_a2_1 t_a2_0"), &l, 2));
        assert!(!sense_correct(&toks("t_f3"), &l, 2));
        assert!(sense_correct(&toks("t_a1_0 t_a2_1"), &l, 2));
        let labels = [l, SenseLabel { word: 0, sense: 0, position: 1 }];
        let acc = sense_accuracy(&[toks("t_a2_1"), toks("t_a0_1")], &labels, 2).unwrap();
        assert_eq!(acc, 0.5);
        assert!(sense_accuracy(&[], &[], 2).is_err());
        assert!(sense_accuracy(&[toks("x")], &labels, 2).is_err());
    }
}

//! Byte-pair encoding: learning merges from a corpus and applying them.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

/// Appended to every non-final subword of a word.
pub const BPE_MARKER: &str = "@@";
const FILE_HEADER: &str = "mmtl-bpe v1";

type Pair = (String, String);

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BpeModel {
    merges: Vec<Pair>,
    ranks: HashMap<Pair, usize>,
}

impl BpeModel {
    pub fn from_merges(merges: Vec<Pair>) -> Result<Self> {
        let mut ranks = HashMap::with_capacity(merges.len());
        for (i, m) in merges.iter().enumerate() {
            if ranks.insert(m.clone(), i).is_some() {
                return Err(Error::InvalidArgument(format!("duplicate merge {m:?}")));
            }
        }
        Ok(BpeModel { merges, ranks })
    }

    pub fn merges(&self) -> &[Pair] {
        &self.merges
    }

    pub fn marker(&self) -> &'static str {
        BPE_MARKER
    }

    /// The model restricted to its first `n` merges.
    pub fn truncated(&self, n: usize) -> Self {
        Self::from_merges(self.merges[..n.min(self.merges.len())].to_vec()).expect("prefix of a valid model")
    }

    /// Segments one word, without markers.
    pub fn segment_word(&self, word: &str) -> Vec<String> {
        let mut syms: Vec<String> = word.chars().map(String::from).collect();
        // Equivalent to applying the merges one after another in learned
        // order: only merges ranked after the last one applied may fire.
        let mut min_rank = 0;
        loop {
            let best = syms
                .windows(2)
                .filter_map(|w| self.ranks.get(&(w[0].clone(), w[1].clone())).copied())
                .filter(|&r| r >= min_rank)
                .min();
            let Some(rank) = best else { break };
            let (l, r) = &self.merges[rank];
            syms = merge_symbols(&syms, l, r);
            min_rank = rank + 1;
        }
        syms
    }

    /// Splits every token into subwords; all but the last piece of each
    /// word carry [`BPE_MARKER`]. Characters the model has never seen pass
    /// through as single-character subwords.
    pub fn apply(&self, tokens: &[String]) -> Vec<String> {
        let mut out = Vec::with_capacity(tokens.len() * 2);
        for tok in tokens {
            let pieces = self.segment_word(tok);
            let last = pieces.len().saturating_sub(1);
            for (i, p) in pieces.into_iter().enumerate() {
                if i < last {
                    out.push(p + BPE_MARKER);
                } else {
                    out.push(p);
                }
            }
        }
        out
    }

    pub fn to_text(&self) -> String {
        let mut s = String::from(FILE_HEADER);
        s.push('\n');
        for (l, r) in &self.merges {
            s.push_str(l);
            s.push(' ');
            s.push_str(r);
            s.push('\n');
        }
        s
    }

    pub fn from_text(text: &str, path: &Path) -> Result<Self> {
        let mut lines = text.lines();
        if lines.next() != Some(FILE_HEADER) {
            return Err(Error::format(path, format!("first line must be {FILE_HEADER:?}")));
        }
        let mut merges = Vec::new();
        for (i, line) in lines.enumerate() {
            let mut parts = line.split(' ');
            match (parts.next(), parts.next(), parts.next()) {
                (Some(l), Some(r), None) if !l.is_empty() && !r.is_empty() => {
                    merges.push((l.to_string(), r.to_string()))
                }
                _ => return Err(Error::format(path, format!("line {}: expected \"left right\"", i + 2))),
            }
        }
        Self::from_merges(merges).map_err(|e| Error::format(path, e.to_string()))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text, path)
    }
}

/// Replaces every left-to-right, non-overlapping occurrence of `(l, r)`.
fn merge_symbols(syms: &[String], l: &str, r: &str) -> Vec<String> {
    let mut out = Vec::with_capacity(syms.len());
    let mut i = 0;
    while i < syms.len() {
        if i + 1 < syms.len() && syms[i] == l && syms[i + 1] == r {
            out.push(format!("{l}{r}"));
            i += 2;
        } else {
            out.push(syms[i].clone());
            i += 1;
        }
    }
    out
}

/// Learns up to `n_merges` merges by repeatedly fusing the most frequent
/// adjacent symbol pair, counted over word types weighted by frequency.
/// Ties go to the lexicographically smallest pair; learning stops early
/// once no pair occurs at least twice.
pub fn bpe_learn(corpus: &[Vec<String>], n_merges: usize) -> Result<BpeModel> {
    if corpus.iter().all(|l| l.is_empty()) {
        return Err(Error::InvalidArgument("cannot learn BPE from an empty corpus".into()));
    }
    let mut freq: BTreeMap<&str, i64> = BTreeMap::new();
    for tok in corpus.iter().flatten() {
        *freq.entry(tok.as_str()).or_default() += 1;
    }
    let mut words: Vec<(Vec<String>, i64)> =
        freq.into_iter().map(|(w, f)| (w.chars().map(String::from).collect(), f)).collect();

    let mut counts: HashMap<Pair, i64> = HashMap::new();
    let mut heap: BTreeSet<(Reverse<i64>, Pair)> = BTreeSet::new();
    let mut where_: HashMap<Pair, HashSet<usize>> = HashMap::new();

    fn bump(counts: &mut HashMap<Pair, i64>, heap: &mut BTreeSet<(Reverse<i64>, Pair)>, pair: &Pair, delta: i64) {
        let c = counts.entry(pair.clone()).or_default();
        if *c > 0 {
            heap.remove(&(Reverse(*c), pair.clone()));
        }
        *c += delta;
        if *c > 0 {
            heap.insert((Reverse(*c), pair.clone()));
        }
    }

    for (wi, (syms, f)) in words.iter().enumerate() {
        for w in syms.windows(2) {
            let p = (w[0].clone(), w[1].clone());
            bump(&mut counts, &mut heap, &p, *f);
            where_.entry(p).or_default().insert(wi);
        }
    }

    let mut merges = Vec::new();
    while merges.len() < n_merges {
        let Some((Reverse(c), pair)) = heap.first().cloned() else { break };
        if c < 2 {
            break;
        }
        let affected: Vec<usize> = {
            let mut v: Vec<usize> = where_.get(&pair).map(|s| s.iter().copied().collect()).unwrap_or_default();
            v.sort_unstable();
            v
        };
        for wi in affected {
            let (syms, f) = &words[wi];
            let f = *f;
            if !syms.windows(2).any(|w| w[0] == pair.0 && w[1] == pair.1) {
                continue;
            }
            for w in syms.windows(2) {
                bump(&mut counts, &mut heap, &(w[0].clone(), w[1].clone()), -f);
            }
            let merged = merge_symbols(syms, &pair.0, &pair.1);
            for w in merged.windows(2) {
                let p = (w[0].clone(), w[1].clone());
                bump(&mut counts, &mut heap, &p, f);
                where_.entry(p).or_default().insert(wi);
            }
            words[wi].0 = merged;
        }
        merges.push(pair);
    }
    BpeModel::from_merges(merges)
}

/// Joins marker-carrying subwords with their successors. A marker left
/// dangling at the end of the sequence is stripped with a warning.
pub fn bpe_undo(subwords: &[String]) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur = String::new();
    let mut open = false;
    for s in subwords {
        match s.strip_suffix(BPE_MARKER) {
            Some(stem) => {
                cur.push_str(stem);
                open = true;
            }
            None => {
                cur.push_str(s);
                out.push(std::mem::take(&mut cur));
                open = false;
            }
        }
    }
    if open {
        log::warn!("dangling BPE marker at end of sequence; stripped");
        out.push(cur);
    }
    out
}

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

pub const PAD_ID: u32 = 0;
pub const BOS_ID: u32 = 1;
pub const EOS_ID: u32 = 2;
pub const UNK_ID: u32 = 3;
pub const SPECIALS: [&str; 4] = ["<pad>", "<bos>", "<eos>", "<unk>"];

/// Token ↔ id bijection with the four reserved specials at ids 0..=3.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, u32>,
}

impl Vocabulary {
    /// Builds from an ordered token list (specials excluded; they are prepended).
    pub fn from_tokens<I: IntoIterator<Item = String>>(tokens: I) -> Result<Self> {
        let mut all: Vec<String> = SPECIALS.iter().map(|s| s.to_string()).collect();
        all.extend(tokens);
        let mut index = HashMap::with_capacity(all.len());
        for (i, t) in all.iter().enumerate() {
            if index.insert(t.clone(), i as u32).is_some() {
                return Err(Error::InvalidArgument(format!("token {t:?} listed twice")));
            }
        }
        Ok(Vocabulary { tokens: all, index })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn encode(&self, token: &str) -> u32 {
        self.index.get(token).copied().unwrap_or(UNK_ID)
    }

    pub fn encode_all(&self, tokens: &[String]) -> Vec<u32> {
        tokens.iter().map(|t| self.encode(t)).collect()
    }

    pub fn decode(&self, id: u32) -> Option<&str> {
        self.tokens.get(id as usize).map(String::as_str)
    }

    /// Maps ids to tokens, stopping at `<eos>` and skipping `<bos>`/`<pad>`.
    pub fn decode_sentence(&self, ids: &[u32]) -> Vec<String> {
        ids.iter()
            .take_while(|&&id| id != EOS_ID)
            .filter(|&&id| id != BOS_ID && id != PAD_ID)
            .map(|&id| self.decode(id).unwrap_or(SPECIALS[UNK_ID as usize]).to_string())
            .collect()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn to_text(&self) -> String {
        self.tokens.iter().enumerate().map(|(i, t)| format!("{t}\t{i}\n")).collect()
    }

    pub fn from_text(text: &str, path: &Path) -> Result<Self> {
        let mut tokens = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let (tok, id) = line
                .rsplit_once('\t')
                .ok_or_else(|| Error::format(path, format!("line {}: expected token<TAB>id", i + 1)))?;
            let id: usize = id.parse().map_err(|_| Error::format(path, format!("line {}: bad id {id:?}", i + 1)))?;
            if id != i {
                return Err(Error::format(path, format!("line {}: id {id} out of sequence", i + 1)));
            }
            tokens.push(tok.to_string());
        }
        if tokens.len() < SPECIALS.len() || tokens[..SPECIALS.len()] != SPECIALS {
            return Err(Error::format(path, "reserved specials missing from ids 0..=3"));
        }
        Self::from_tokens(tokens.into_iter().skip(SPECIALS.len())).map_err(|e| Error::format(path, e.to_string()))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text, path)
    }
}

/// Collects every distinct token, most frequent first, ties lexicographic.
pub fn vocab_build(corpus: &[Vec<String>]) -> Vocabulary {
    let mut freq: HashMap<&str, u64> = HashMap::new();
    for t in corpus.iter().flatten() {
        if !SPECIALS.contains(&t.as_str()) {
            *freq.entry(t.as_str()).or_default() += 1;
        }
    }
    let mut entries: Vec<(&str, u64)> = freq.into_iter().collect();
    entries.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    Vocabulary::from_tokens(entries.into_iter().map(|(t, _)| t.to_string())).expect("distinct tokens")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn corpus(v: &[&[&str]]) -> Vec<Vec<String>> {
        v.iter().map(|l| l.iter().map(|s| s.to_string()).collect()).collect()
    }

    #[test]
    fn frequency_order_after_specials() {
        let v = vocab_build(&corpus(&[&["a", "b"], &["a"]]));
        assert_eq!(v.tokens(), &["<pad>", "<bos>", "<eos>", "<unk>", "a", "b"]);
        assert_eq!(v.encode("a"), 4);
        assert_eq!(v.encode("b"), 5);
        assert_eq!(v.len(), 6);
    }

    #[test]
    fn unseen_maps_to_unk_and_roundtrips() {
        let v = vocab_build(&corpus(&[&["x", "y", "y", "z"]]));
        assert_eq!(v.encode("nope"), UNK_ID);
        for t in ["x", "y", "z"] {
            assert_eq!(v.decode(v.encode(t)), Some(t));
        }
        assert_eq!(v.decode_sentence(&[BOS_ID, v.encode("y"), v.encode("x"), EOS_ID, 4]), vec!["y", "x"]);
    }

    #[test]
    fn ties_break_lexicographically() {
        let v = vocab_build(&corpus(&[&["b", "a", "c", "c"]]));
        assert_eq!(&v.tokens()[4..], &["c", "a", "b"]);
    }

    #[test]
    fn file_round_trip_and_validation() {
        let v = vocab_build(&corpus(&[&["über", "a", "a"]]));
        let text = v.to_text();
        assert!(text.starts_with("<pad>\t0\n<bos>\t1\n<eos>\t2\n<unk>\t3\n"));
        assert_eq!(Vocabulary::from_text(&text, Path::new("v")).unwrap(), v);
        assert!(Vocabulary::from_text("a\t0\n", Path::new("v")).is_err());
        assert!(Vocabulary::from_text("<pad>\t0\n<bos>\t1\n<eos>\t2\n<unk>\t4\n", Path::new("v")).is_err());
    }
}

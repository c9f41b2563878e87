use std::fs;
use std::path::Path;

use crate::datastore::FeatureStore;
use crate::error::{Error, Result};
use crate::textpipe::{Vocabulary, BOS_ID, EOS_ID};

/// One training or test pair with its optional visual features.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    /// Source ids, `<eos>`-terminated.
    pub src_ids: Vec<u32>,
    /// Target ids, `<bos>`-prefixed and `<eos>`-terminated.
    pub trg_ids: Vec<u32>,
    pub global_feat: Option<Vec<f32>>,
    /// Row-major `(cells, dim)` map.
    pub spatial_feat: Option<Vec<f32>>,
}

/// Borrowed view of a sample, as consumed by the model.
#[derive(Debug, Clone, Copy)]
pub struct SampleView<'a> {
    pub src_ids: &'a [u32],
    pub trg_ids: &'a [u32],
    pub global_feat: Option<&'a [f32]>,
    pub spatial_feat: Option<&'a [f32]>,
}

impl Sample {
    /// Wraps raw token ids with the sentence delimiters.
    pub fn from_ids(src: &[u32], trg: &[u32]) -> Self {
        let mut src_ids = src.to_vec();
        src_ids.push(EOS_ID);
        let mut trg_ids = Vec::with_capacity(trg.len() + 2);
        trg_ids.push(BOS_ID);
        trg_ids.extend_from_slice(trg);
        trg_ids.push(EOS_ID);
        Sample { src_ids, trg_ids, global_feat: None, spatial_feat: None }
    }

    pub fn view(&self) -> SampleView<'_> {
        SampleView {
            src_ids: &self.src_ids,
            trg_ids: &self.trg_ids,
            global_feat: self.global_feat.as_deref(),
            spatial_feat: self.spatial_feat.as_deref(),
        }
    }
}

pub fn read_lines(path: &Path) -> Result<Vec<String>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(text.lines().map(str::to_string).collect())
}

/// Pairs line `i` of the source file with line `i` of the target file.
/// Lines hold whitespace-separated (subword) tokens.
pub fn load_parallel(
    src_path: &Path,
    trg_path: &Path,
    src_vocab: &Vocabulary,
    trg_vocab: &Vocabulary,
) -> Result<Vec<Sample>> {
    let src = read_lines(src_path)?;
    let trg = read_lines(trg_path)?;
    if src.len() != trg.len() {
        return Err(Error::Data(format!(
            "line count mismatch: {} has {} lines, {} has {}",
            src_path.display(),
            src.len(),
            trg_path.display(),
            trg.len()
        )));
    }
    let mut samples = Vec::with_capacity(src.len());
    for (i, (s, t)) in src.iter().zip(&trg).enumerate() {
        let s: Vec<String> = s.split_whitespace().map(String::from).collect();
        let t: Vec<String> = t.split_whitespace().map(String::from).collect();
        for (toks, path) in [(&s, src_path), (&t, trg_path)] {
            if toks.is_empty() {
                return Err(Error::Data(format!("{}: line {} is empty", path.display(), i + 1)));
            }
        }
        samples.push(Sample::from_ids(&src_vocab.encode_all(&s), &trg_vocab.encode_all(&t)));
    }
    Ok(samples)
}

/// Attaches feature rows to samples; row `i` goes to sample `i`.
pub fn attach_features(
    samples: &mut [Sample],
    global: Option<&FeatureStore>,
    spatial: Option<&FeatureStore>,
) -> Result<()> {
    for (fs, name) in [(global, "global"), (spatial, "spatial")] {
        if let Some(fs) = fs {
            if fs.len() != samples.len() {
                return Err(Error::Data(format!(
                    "{name} feature file has {} rows but the corpus has {} samples",
                    fs.len(),
                    samples.len()
                )));
            }
        }
    }
    for (i, s) in samples.iter_mut().enumerate() {
        s.global_feat = global.map(|g| g.row(i).to_vec());
        s.spatial_feat = spatial.map(|g| g.row(i).to_vec());
    }
    Ok(())
}

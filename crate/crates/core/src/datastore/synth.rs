//! Toy grounded-disambiguation corpus.
//!
//! Every source sentence holds fillers that translate one-to-one and exactly
//! one ambiguous word `a{w}` whose translation `t_a{w}_{k}` depends on a sense
//! `k` drawn independently of the text. Only the visual features carry `k`.

use std::fs;
use std::path::Path;

use rand::Rng as _;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::datastore::{FeatureStore, Sample};
use crate::error::{Error, Result};
use crate::numerics::{rng_stream, Rng};
use crate::textpipe::Vocabulary;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub n_train: usize,
    pub n_valid: usize,
    pub n_test: usize,
    pub n_ambiguous_words: usize,
    pub senses_per_word: usize,
    pub n_fillers: usize,
    pub min_len: usize,
    pub max_len: usize,
    pub d_g: usize,
    pub p: usize,
    pub d_s: usize,
    pub noise_sigma: f64,
    pub signal: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_train: 1000,
            n_valid: 100,
            n_test: 200,
            n_ambiguous_words: 5,
            senses_per_word: 2,
            n_fillers: 20,
            min_len: 3,
            max_len: 6,
            d_g: 32,
            p: 16,
            d_s: 16,
            noise_sigma: 0.1,
            signal: 1.0,
        }
    }
}

impl SynthConfig {
    pub fn n_senses(&self) -> usize {
        self.n_ambiguous_words * self.senses_per_word
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.senses_per_word < 2 {
            return bad(format!("senses_per_word must be >= 2, got {}", self.senses_per_word));
        }
        if self.n_ambiguous_words == 0 || self.n_fillers == 0 {
            return bad("need at least one ambiguous word and one filler".into());
        }
        if self.min_len == 0 || self.min_len > self.max_len {
            return bad(format!("sentence length range {}..={} is empty", self.min_len, self.max_len));
        }
        if self.d_g < self.n_senses() || self.d_s < self.n_senses() {
            return bad(format!(
                "feature dims (d_g={}, d_s={}) must be >= total senses {}",
                self.d_g,
                self.d_s,
                self.n_senses()
            ));
        }
        if self.p == 0 {
            return bad("p must be >= 1".into());
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return bad(format!("noise_sigma must be finite and >= 0, got {}", self.noise_sigma));
        }
        Ok(())
    }
}

/// The ambiguous word and its sense for one sentence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SenseLabel {
    pub word: usize,
    pub sense: usize,
    /// Token position of the ambiguous word in the source sentence.
    pub position: usize,
}

impl SenseLabel {
    pub fn source_token(&self) -> String {
        format!("a{}", self.word)
    }

    pub fn target_token(&self) -> String {
        sense_token(self.word, self.sense)
    }
}

pub fn sense_token(word: usize, sense: usize) -> String {
    format!("t_a{word}_{sense}")
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSplit {
    pub src: Vec<Vec<String>>,
    pub trg: Vec<Vec<String>>,
    pub labels: Vec<SenseLabel>,
    pub global: FeatureStore,
    pub spatial: FeatureStore,
}

impl SynthSplit {
    pub fn len(&self) -> usize {
        self.src.len()
    }

    pub fn is_empty(&self) -> bool {
        self.src.is_empty()
    }

    /// Samples with both feature kinds attached.
    pub fn samples(&self, src_vocab: &Vocabulary, trg_vocab: &Vocabulary) -> Vec<Sample> {
        (0..self.len())
            .map(|i| {
                let mut s = Sample::from_ids(&src_vocab.encode_all(&self.src[i]), &trg_vocab.encode_all(&self.trg[i]));
                s.global_feat = Some(self.global.row(i).to_vec());
                s.spatial_feat = Some(self.spatial.row(i).to_vec());
                s
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthCorpus {
    pub config: SynthConfig,
    pub seed: u64,
    pub train: SynthSplit,
    pub valid: SynthSplit,
    pub test: SynthSplit,
}

pub const SPLIT_NAMES: [&str; 3] = ["train", "valid", "test"];

#[derive(Serialize)]
struct Manifest<'a> {
    generator: &'static str,
    seed: u64,
    config: &'a SynthConfig,
    splits: Vec<ManifestSplit>,
}

#[derive(Serialize)]
struct ManifestSplit {
    name: &'static str,
    sentences: usize,
    files: [String; 5],
}

impl SynthCorpus {
    pub fn split(&self, name: &str) -> Option<&SynthSplit> {
        match name {
            "train" => Some(&self.train),
            "valid" => Some(&self.valid),
            "test" => Some(&self.test),
            _ => None,
        }
    }

    /// All source and target sentences, for building vocabularies.
    pub fn all_sentences(&self) -> (Vec<Vec<String>>, Vec<Vec<String>>) {
        let splits = [&self.train, &self.valid, &self.test];
        (
            splits.iter().flat_map(|s| s.src.iter().cloned()).collect(),
            splits.iter().flat_map(|s| s.trg.iter().cloned()).collect(),
        )
    }

    /// Writes `{split}.src`, `.trg`, `.global.mmtf`, `.spatial.mmtf`,
    /// `.senses` for each split, plus `manifest.json`.
    pub fn write_to(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let write = |name: &str, text: String| {
            let p = dir.join(name);
            fs::write(&p, text).map_err(|e| Error::io(&p, e))
        };
        let join = |lines: &[Vec<String>]| lines.iter().map(|l| l.join(" ") + "\n").collect::<String>();
        let mut splits = Vec::new();
        for name in SPLIT_NAMES {
            let s = self.split(name).expect("known split");
            let files = split_files(name);
            write(&files[0], join(&s.src))?;
            write(&files[1], join(&s.trg))?;
            s.global.save(&dir.join(&files[2]))?;
            s.spatial.save(&dir.join(&files[3]))?;
            write(&files[4], s.labels.iter().map(|l| format!("{}\t{}\t{}\n", l.word, l.sense, l.position)).collect())?;
            splits.push(ManifestSplit { name, sentences: s.len(), files });
        }
        let manifest = Manifest { generator: "mmtl-synth v1", seed: self.seed, config: &self.config, splits };
        write("manifest.json", serde_json::to_string_pretty(&manifest)? + "\n")
    }
}

pub fn split_files(name: &str) -> [String; 5] {
    [
        format!("{name}.src"),
        format!("{name}.trg"),
        format!("{name}.global.mmtf"),
        format!("{name}.spatial.mmtf"),
        format!("{name}.senses"),
    ]
}

/// Reads a `.senses` file written by [`SynthCorpus::write_to`].
pub fn load_senses(path: &Path) -> Result<Vec<SenseLabel>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .enumerate()
        .map(|(i, line)| {
            let f: Vec<usize> = line
                .split('\t')
                .map(|x| x.parse::<usize>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::format(path, format!("line {}: {e}", i + 1)))?;
            match f[..] {
                [word, sense, position] => Ok(SenseLabel { word, sense, position }),
                _ => Err(Error::format(path, format!("line {}: expected 3 fields", i + 1))),
            }
        })
        .collect()
}

/// Index of the basis direction that carries sense `k` of word `w`.
pub fn sense_direction(cfg: &SynthConfig, word: usize, sense: usize) -> usize {
    word * cfg.senses_per_word + sense
}

pub fn synth_generate(cfg: &SynthConfig, seed: u64) -> Result<SynthCorpus> {
    cfg.validate()?;
    let gen = |n: usize, stream: u64| generate_split(cfg, n, &mut rng_stream(seed, stream));
    Ok(SynthCorpus {
        config: cfg.clone(),
        seed,
        train: gen(cfg.n_train, 0),
        valid: gen(cfg.n_valid, 1),
        test: gen(cfg.n_test, 2),
    })
}

/// Source and target sentences, aligned by index.
pub type ParallelText = (Vec<Vec<String>>, Vec<Vec<String>>);

/// `n` distinct text-only pairs over a vocabulary of `n_words` words that
/// translate one-to-one (`w{i}` to `t_w{i}`). Fully memorizable.
pub fn toy_parallel(n: usize, n_words: usize, min_len: usize, max_len: usize, seed: u64) -> Result<ParallelText> {
    if n_words == 0 || min_len == 0 || min_len > max_len {
        return Err(Error::InvalidArgument(format!(
            "toy corpus needs n_words > 0 and 0 < min_len <= max_len, got {n_words}, {min_len}..={max_len}"
        )));
    }
    let capacity: f64 = (min_len..=max_len).map(|l| (n_words as f64).powi(l as i32)).sum();
    if (n as f64) > capacity {
        return Err(Error::InvalidArgument(format!("cannot draw {n} distinct sentences")));
    }
    let mut rng = rng_stream(seed, 0);
    let mut seen = std::collections::HashSet::new();
    let (mut src, mut trg) = (Vec::with_capacity(n), Vec::with_capacity(n));
    while src.len() < n {
        let len = rng.random_range(min_len..=max_len);
        let words: Vec<usize> = (0..len).map(|_| rng.random_range(0..n_words)).collect();
        if seen.insert(words.clone()) {
            src.push(words.iter().map(|w| format!("w{w}")).collect());
            trg.push(words.iter().map(|w| format!("t_w{w}")).collect());
        }
    }
    Ok((src, trg))
}

fn generate_split(cfg: &SynthConfig, n: usize, rng: &mut Rng) -> SynthSplit {
    let noise = Normal::new(0.0, cfg.noise_sigma).expect("validated sigma");
    let mut src = Vec::with_capacity(n);
    let mut trg = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    let mut global = Vec::with_capacity(n * cfg.d_g);
    let mut spatial = Vec::with_capacity(n * cfg.p * cfg.d_s);
    for _ in 0..n {
        let len = rng.random_range(cfg.min_len..=cfg.max_len);
        let position = rng.random_range(0..len);
        let word = rng.random_range(0..cfg.n_ambiguous_words);
        let sense = rng.random_range(0..cfg.senses_per_word);
        let label = SenseLabel { word, sense, position };
        let mut s = Vec::with_capacity(len);
        let mut t = Vec::with_capacity(len);
        for i in 0..len {
            if i == position {
                s.push(label.source_token());
                t.push(label.target_token());
            } else {
                let f = rng.random_range(0..cfg.n_fillers);
                s.push(format!("f{f}"));
                t.push(format!("t_f{f}"));
            }
        }
        let dir = sense_direction(cfg, word, sense);
        let mut g: Vec<f32> = (0..cfg.d_g).map(|_| noise.sample(rng) as f32).collect();
        g[dir] += cfg.signal as f32;
        global.extend(g);
        let cell = rng.random_range(0..cfg.p);
        let mut m: Vec<f32> = (0..cfg.p * cfg.d_s).map(|_| noise.sample(rng) as f32).collect();
        m[cell * cfg.d_s + dir] += cfg.signal as f32;
        spatial.extend(m);
        src.push(s);
        trg.push(t);
        labels.push(label);
    }
    SynthSplit {
        src,
        trg,
        labels,
        global: FeatureStore::new(vec![cfg.d_g], global).expect("consistent dims"),
        spatial: FeatureStore::new(vec![cfg.p, cfg.d_s], spatial).expect("consistent dims"),
    }
}

#[cfg(test)]
mod tests {
    use std::collections::HashMap;

    use statrs::distribution::{ChiSquared, ContinuousCDF};

    use super::*;

    fn chi_square_p(table: &HashMap<(String, usize), usize>, n_senses: usize) -> f64 {
        let mut rows: HashMap<&str, Vec<f64>> = HashMap::new();
        for ((ctx, k), &c) in table {
            rows.entry(ctx.as_str()).or_insert_with(|| vec![0.0; n_senses])[*k] += c as f64;
        }
        let total: f64 = rows.values().flatten().sum();
        let col: Vec<f64> = (0..n_senses).map(|k| rows.values().map(|r| r[k]).sum()).collect();
        let mut stat = 0.0;
        for r in rows.values() {
            let rs: f64 = r.iter().sum();
            for k in 0..n_senses {
                let e = rs * col[k] / total;
                stat += (r[k] - e).powi(2) / e;
            }
        }
        let df = ((rows.len() - 1) * (n_senses - 1)) as f64;
        1.0 - ChiSquared::new(df).unwrap().cdf(stat)
    }

    #[test]
    fn sense_is_independent_of_source_text() {
        let c = synth_generate(&SynthConfig::default(), 11).unwrap();
        let cfg = &c.config;
        // Context available to a text-only model: ambiguous word identity and
        // its position. Sense must be independent of both.
        let mut table = HashMap::new();
        for l in &c.train.labels {
            *table.entry((format!("{}@{}", l.word, l.position.min(2)), l.sense)).or_insert(0) += 1;
        }
        let p = chi_square_p(&table, cfg.senses_per_word);
        assert!(p > 0.01, "independence rejected, p = {p}");

        // The emitted target text agrees with the labels.
        for ((s, t), l) in c.train.src.iter().zip(&c.train.trg).zip(&c.train.labels) {
            assert_eq!(s[l.position], l.source_token());
            assert_eq!(t[l.position], l.target_token());
        }
        // Per word, each sense is roughly equally frequent.
        for w in 0..cfg.n_ambiguous_words {
            let ks: Vec<usize> = c.train.labels.iter().filter(|l| l.word == w).map(|l| l.sense).collect();
            let frac = ks.iter().filter(|&&k| k == 0).count() as f64 / ks.len() as f64;
            assert!((frac - 0.5).abs() < 0.15, "word {w}: sense-0 fraction {frac}");
        }
    }

    #[test]
    fn noiseless_features_determine_the_sense() {
        let cfg = SynthConfig { noise_sigma: 0.0, ..SynthConfig::default() };
        let c = synth_generate(&cfg, 3).unwrap();
        let argmax = |v: &[f32]| v.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap().0;
        for (i, l) in c.test.labels.iter().enumerate() {
            let dir = sense_direction(&cfg, l.word, l.sense);
            assert_eq!(argmax(c.test.global.row(i)), dir);
            let spatial = c.test.spatial.row(i);
            let hot: Vec<usize> = (0..spatial.len()).filter(|&j| spatial[j] != 0.0).collect();
            assert_eq!(hot.len(), 1);
            assert_eq!(hot[0] % cfg.d_s, dir);
        }
    }

    #[test]
    fn default_noise_keeps_clusters_separable() {
        let c = synth_generate(&SynthConfig::default(), 5).unwrap();
        let cfg = &c.config;
        let argmax = |v: &[f32]| v.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap().0;
        let correct = c
            .train
            .labels
            .iter()
            .enumerate()
            .filter(|(i, l)| argmax(c.train.global.row(*i)) == sense_direction(cfg, l.word, l.sense))
            .count();
        assert!(correct as f64 / c.train.len() as f64 > 0.99);
    }

    #[test]
    fn same_seed_gives_identical_files() {
        let cfg = SynthConfig { n_train: 50, n_valid: 5, n_test: 10, ..SynthConfig::default() };
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        synth_generate(&cfg, 7).unwrap().write_to(a.path()).unwrap();
        synth_generate(&cfg, 7).unwrap().write_to(b.path()).unwrap();
        let mut names: Vec<_> = fs::read_dir(a.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
        names.sort();
        assert_eq!(names.len(), 16);
        for n in names {
            assert_eq!(fs::read(a.path().join(&n)).unwrap(), fs::read(b.path().join(&n)).unwrap(), "{n:?}");
        }
        let labels = load_senses(&a.path().join("test.senses")).unwrap();
        assert_eq!(labels, synth_generate(&cfg, 7).unwrap().test.labels);
        let other = synth_generate(&cfg, 8).unwrap();
        assert_ne!(other.train.src, synth_generate(&cfg, 7).unwrap().train.src);
    }

    #[test]
    fn toy_pairs_are_distinct_and_aligned() {
        let (src, trg) = toy_parallel(50, 12, 3, 6, 4).unwrap();
        assert_eq!(src.len(), 50);
        let distinct: std::collections::HashSet<_> = src.iter().collect();
        assert_eq!(distinct.len(), 50);
        for (s, t) in src.iter().zip(&trg) {
            assert!(s.iter().zip(t).all(|(a, b)| *b == format!("t_{a}")));
        }
        assert_eq!(toy_parallel(50, 12, 3, 6, 4).unwrap(), (src, trg));
        assert!(toy_parallel(10, 2, 1, 2, 0).is_err());
    }

    #[test]
    fn inconsistent_dims_rejected() {
        let cfg = SynthConfig { d_g: 8, ..SynthConfig::default() };
        assert!(matches!(synth_generate(&cfg, 0), Err(Error::Config(_))));
        let cfg = SynthConfig { senses_per_word: 1, ..SynthConfig::default() };
        assert!(synth_generate(&cfg, 0).is_err());
    }
}

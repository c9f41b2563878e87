//! Shared fixtures for the benchmarks.

use mmtl_core::datastore::{synth_generate, Sample, SynthConfig, SynthCorpus};
use mmtl_core::model::{Dropout, ModelConfig, Variant};
use mmtl_core::numerics::rng_stream;
use mmtl_core::textpipe::{vocab_build, Vocabulary};
use rand::Rng as _;

pub struct Fixture {
    pub corpus: SynthCorpus,
    pub src_vocab: Vocabulary,
    pub trg_vocab: Vocabulary,
    pub train: Vec<Sample>,
    pub test: Vec<Sample>,
}

/// The default synthetic corpus with vocabularies from its training split.
pub fn synthetic() -> Fixture {
    let corpus = synth_generate(&SynthConfig::default(), 1).expect("default config is valid");
    let src_vocab = vocab_build(&corpus.train.src);
    let trg_vocab = vocab_build(&corpus.train.trg);
    let train = corpus.train.samples(&src_vocab, &trg_vocab);
    let test = corpus.test.samples(&src_vocab, &trg_vocab);
    Fixture { corpus, src_vocab, trg_vocab, train, test }
}

impl Fixture {
    /// Desk-scale dimensions used by the synthetic experiments.
    pub fn model_config(&self, variant: Variant) -> ModelConfig {
        let c = &self.corpus.config;
        ModelConfig {
            variant,
            emb_dim: 16,
            rnn_dim: 32,
            src_vocab: self.src_vocab.len(),
            trg_vocab: self.trg_vocab.len(),
            global_dim: c.d_g,
            spatial_cells: c.p,
            spatial_dim: c.d_s,
            dropout: Dropout::OFF,
            normalize_features: false,
        }
    }
}

/// `n` random sentences of 8 to 24 tokens over `vocab` word types.
pub fn random_sentences(n: usize, vocab: usize, seed: u64) -> Vec<Vec<String>> {
    let mut rng = rng_stream(seed, 0);
    (0..n).map(|_| (0..rng.random_range(8..25)).map(|_| format!("w{}", rng.random_range(0..vocab))).collect()).collect()
}

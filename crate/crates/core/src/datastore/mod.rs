//! Corpus and feature ingestion, batching, and the synthetic corpus.

mod batch;
mod features;
mod sample;
mod synth;

pub use batch::{make_batches, Batch, DEFAULT_BATCH_SIZE};
pub use features::{FeatureKind, FeatureStore, FEATURE_MAGIC, FEATURE_VERSION};
pub use sample::{attach_features, load_parallel, read_lines, Sample, SampleView};
pub use synth::{
    load_senses, sense_direction, sense_token, split_files, synth_generate, toy_parallel, ParallelText, SenseLabel,
    SynthConfig, SynthCorpus, SynthSplit, SPLIT_NAMES,
};

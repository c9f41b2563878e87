//! Tokenization, subword segmentation and vocabularies.

mod bpe;
mod normalize;
mod vocab;

pub use bpe::{bpe_learn, bpe_undo, BpeModel, BPE_MARKER};
pub use normalize::{normalize_line, TOKENIZER_VERSION};
pub use vocab::{vocab_build, Vocabulary, BOS_ID, EOS_ID, PAD_ID, SPECIALS, UNK_ID};

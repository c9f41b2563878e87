//! Attentive GRU encoder-decoder translation with visual fusion.
//!
//! The crate covers the full pipeline: text preprocessing and BPE
//! ([`textpipe`]), corpora and visual features ([`datastore`]), the
//! baseline and six multimodal architectures ([`model`]), training
//! ([`trainer`]), beam search and ensembling ([`decoder`]), and scoring
//! with significance testing ([`evalkit`]). All arithmetic, including
//! differentiation, lives in [`numerics`].

mod binio;
pub mod datastore;
pub mod decoder;
pub mod error;
pub mod evalkit;
pub mod model;
pub mod numerics;
pub mod textpipe;
pub mod trainer;

pub use error::{Error, Result};

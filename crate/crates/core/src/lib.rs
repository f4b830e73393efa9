//! Corpus refinement, augmentation and evaluation toolkit for low-resource
//! machine translation.
//!
//! Every stage is a pure function over in-memory corpora plus a small
//! on-disk format; [`pipeline`] strings them together from a manifest.

pub mod align;
pub mod augment;
pub mod bpe;
pub mod clean;
pub mod corpus;
pub mod denoise;
pub mod error;
pub mod external;
pub mod metrics;
pub mod pipeline;
pub mod rdrop;
pub mod report;
pub mod sampling;

pub use corpus::{Corpus, LangCode, MonoCorpus, ParallelFile, Provenance, SentencePair};
pub use error::{Error, Result};
pub use report::StageReport;

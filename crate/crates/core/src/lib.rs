//! Tokenizer training and intrinsic evaluation for multilingual corpora.

pub mod analysis;
pub mod corpus;
pub mod cost;
pub mod error;
pub mod metrics;
pub mod pipeline;
pub mod preprocess;
pub mod synth;
pub mod tok;
pub mod train;
pub mod util;

pub use corpus::{DocId, Document, MixtureSpec};
pub use cost::{CostParams, CostReport};
pub use error::{Error, Result};
pub use metrics::{FertilityResult, ParallelCorpus, ParityResult};
pub use pipeline::{ExperimentConfig, LoadedConfig};
pub use preprocess::{DedupParams, FilterPolicy};
pub use tok::{Algorithm, Profile, ProfileName, TokenizerModel};
pub use train::{TrainConfig, TrainReport};

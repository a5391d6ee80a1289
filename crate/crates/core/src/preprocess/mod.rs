//! The four-stage cleaning pipeline: combine, filter, deduplicate, shuffle.

mod dedup;
mod filter;
mod minhash;

pub use dedup::{dedup, find_duplicates, DedupAnalysis, DedupCluster, DedupParams, DedupReport};
pub use filter::{drop_reason, filter, DropReason, FilterPolicy, FilterTally};
pub use minhash::{lsh_candidates, minhash, shingles, MinHashSignature, MinHasher, ShingleSet};

use crate::corpus::Document;
use crate::util;

/// Seeded uniform permutation (Fisher-Yates over xoshiro256**).
pub fn shuffle(mut corpus: Vec<Document>, seed: u64) -> Vec<Document> {
    util::fisher_yates(&mut corpus, seed);
    corpus
}

//! Shared fixtures for the criterion benches.

use toklab_core::synth::Synth;
use toklab_core::tok::{Algorithm, Profile, TokenizerModel};
use toklab_core::train::{train, TrainConfig};
use toklab_core::util;

/// Synthetic bilingual documents totalling roughly `bytes`.
pub fn documents(seed: u64, bytes: usize) -> Vec<String> {
    let s = Synth::new(seed, 20_000);
    let mut rng = util::seeded_rng(seed);
    let mut out = Vec::new();
    let mut total = 0;
    while total < bytes {
        let lang = if out.len() % 2 == 0 { "en" } else { "de" };
        let d = s.document(lang, &mut rng, 60).expect("known language");
        total += d.len();
        out.push(d);
    }
    out
}

pub fn model(
    docs: &[String],
    algorithm: Algorithm,
    profile: Profile,
    vocab_size: usize,
) -> TokenizerModel {
    train(docs, &TrainConfig::new(algorithm, profile, vocab_size))
        .expect("bench training")
        .model
}

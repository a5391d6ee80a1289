//! BPE and Unigram trainers.

mod bpe;
mod unigram;

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tok::{
    normalize, pretokenize, reserved_prefix, Algorithm, Profile, TokenizerModel, WORD_MARKER,
};

/// Longest training unit in bytes; longer pre-tokens are cut into chunks.
pub const MAX_SENTENCE_BYTES: usize = 4192;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct UnigramParams {
    pub seed_multiplier: f64,
    pub prune_keep: f64,
    pub em_iters: usize,
}

impl Default for UnigramParams {
    fn default() -> Self {
        UnigramParams {
            seed_multiplier: 10.0,
            prune_keep: 0.75,
            em_iters: 2,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub algorithm: Algorithm,
    pub profile: Profile,
    pub vocab_size: usize,
    pub character_coverage: f64,
    pub unigram: UnigramParams,
    /// Thread count for the counting phases; `None` uses the global pool.
    /// Output does not depend on it.
    #[serde(skip)]
    pub workers: Option<usize>,
}

impl TrainConfig {
    pub fn new(algorithm: Algorithm, profile: Profile, vocab_size: usize) -> Self {
        TrainConfig {
            algorithm,
            profile,
            vocab_size,
            character_coverage: 0.9999,
            unigram: UnigramParams::default(),
            workers: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.profile.validate()?;
        if !(self.character_coverage > 0.0 && self.character_coverage <= 1.0) {
            return Err(Error::Config(format!(
                "character_coverage {} outside (0, 1]",
                self.character_coverage
            )));
        }
        let u = &self.unigram;
        if !(u.prune_keep > 0.0 && u.prune_keep < 1.0) {
            return Err(Error::Config(format!(
                "prune_keep {} outside (0, 1)",
                u.prune_keep
            )));
        }
        if u.seed_multiplier.is_nan() || u.seed_multiplier < 1.0 || u.em_iters == 0 {
            return Err(Error::Config(
                "seed_multiplier must be >= 1 and em_iters > 0".into(),
            ));
        }
        if self.vocab_size == 0 {
            return Err(Error::Config("vocab_size must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub algorithm: Algorithm,
    pub profile: crate::tok::ProfileName,
    pub requested_vocab_size: usize,
    pub vocab_size: usize,
    /// False when training ran out of mergeable pairs or pieces early.
    pub reached_target: bool,
    pub alphabet_size: usize,
    /// Merge rounds (BPE) or prune rounds (Unigram).
    pub rounds: usize,
    /// Unigram only: corpus log-likelihood at the start of each EM block and
    /// after every re-estimation within it.
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub likelihood_trace: Vec<Vec<f64>>,
}

pub struct Trained {
    pub model: TokenizerModel,
    pub report: TrainReport,
}

/// Pre-token frequencies, sorted by pre-token.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct WordCounts {
    entries: Vec<(String, u64)>,
}

impl WordCounts {
    /// Normalizes and pre-tokenizes every text under `profile`. Pre-tokens
    /// that must go through byte fallback are skipped.
    pub fn from_texts<S: AsRef<str> + Sync>(texts: &[S], profile: &Profile) -> Self {
        let maps: Vec<HashMap<String, u64>> = texts
            .par_chunks(256)
            .map(|chunk| {
                let mut m = HashMap::new();
                for t in chunk {
                    let norm = normalize(t.as_ref(), profile);
                    for p in pretokenize(&norm, profile) {
                        if p.raw {
                            continue;
                        }
                        for piece in chunk_str(&p.text, MAX_SENTENCE_BYTES) {
                            *m.entry(piece.to_owned()).or_insert(0) += 1;
                        }
                    }
                }
                m
            })
            .collect();
        let mut total: HashMap<String, u64> = HashMap::new();
        for m in maps {
            for (k, v) in m {
                *total.entry(k).or_insert(0) += v;
            }
        }
        Self::from_map(total)
    }

    pub fn from_map(map: HashMap<String, u64>) -> Self {
        let mut entries: Vec<(String, u64)> = map
            .into_iter()
            .filter(|(w, c)| *c > 0 && !w.is_empty())
            .collect();
        entries.sort_unstable();
        WordCounts { entries }
    }

    pub fn entries(&self) -> &[(String, u64)] {
        &self.entries
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    fn char_counts(&self) -> HashMap<char, u64> {
        let mut counts = HashMap::new();
        for (w, c) in &self.entries {
            for ch in w.chars() {
                *counts.entry(ch).or_insert(0) += c;
            }
        }
        counts
    }
}

/// Splits `s` into pieces of at most `max` bytes at character boundaries.
fn chunk_str(s: &str, max: usize) -> impl Iterator<Item = &str> {
    let mut rest = s;
    std::iter::from_fn(move || {
        if rest.is_empty() {
            return None;
        }
        let mut cut = rest.len().min(max);
        while !rest.is_char_boundary(cut) {
            cut -= 1;
        }
        if cut == 0 {
            cut = rest.chars().next().map_or(rest.len(), char::len_utf8);
        }
        let (head, tail) = rest.split_at(cut);
        rest = tail;
        Some(head)
    })
}

/// Base characters, most frequent first (ties by code point).
///
/// Byte-level profiles always get the full 256-symbol alphabet. Otherwise
/// this is the smallest frequency-ordered prefix covering `coverage` of all
/// character occurrences, plus the word marker; other characters are left to
/// byte fallback.
pub fn select_alphabet(counts: &WordCounts, profile: &Profile, coverage: f64) -> Vec<char> {
    let freq = counts.char_counts();
    let mut chars: Vec<(char, u64)> = if profile.byte_level_pretok {
        (0..=255u8)
            .map(crate::tok::byte_to_char)
            .map(|c| (c, freq.get(&c).copied().unwrap_or(0)))
            .collect()
    } else {
        freq.into_iter().collect()
    };
    chars.sort_unstable_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    if profile.byte_level_pretok {
        return chars.into_iter().map(|(c, _)| c).collect();
    }
    let total: u64 = chars.iter().map(|c| c.1).sum();
    let mut covered = 0u64;
    let mut out = Vec::new();
    for (c, n) in chars {
        if total > 0 && covered as f64 >= coverage * total as f64 {
            break;
        }
        if let Some(limit) = profile.limit_alphabet {
            if out.len() >= limit {
                break;
            }
        }
        covered += n;
        out.push(c);
    }
    if !out.contains(&WORD_MARKER) {
        out.push(WORD_MARKER);
    }
    out
}

/// Cuts every word at characters outside `alphabet` and re-aggregates the
/// pieces, sorted. Characters outside the alphabet are never learned.
fn segment_words(counts: &WordCounts, alphabet: &[char]) -> Vec<(String, u64)> {
    let allowed: std::collections::HashSet<char> = alphabet.iter().copied().collect();
    let mut map: HashMap<String, u64> = HashMap::new();
    for (w, c) in counts.entries() {
        for seg in w.split(|ch: char| !allowed.contains(&ch)) {
            if !seg.is_empty() {
                *map.entry(seg.to_owned()).or_insert(0) += c;
            }
        }
    }
    let mut out: Vec<_> = map.into_iter().collect();
    out.sort_unstable();
    out
}

/// Trains on raw texts (normalization and pre-tokenization included).
pub fn train<S: AsRef<str> + Sync>(texts: &[S], config: &TrainConfig) -> Result<Trained> {
    config.validate()?;
    with_workers(config.workers, || {
        let counts = WordCounts::from_texts(texts, &config.profile);
        train_counts(&counts, config)
    })
}

pub fn train_from_word_counts(counts: &WordCounts, config: &TrainConfig) -> Result<Trained> {
    config.validate()?;
    with_workers(config.workers, || train_counts(counts, config))
}

fn train_counts(counts: &WordCounts, config: &TrainConfig) -> Result<Trained> {
    if counts.is_empty() {
        return Err(Error::InvalidInput("training corpus is empty".into()));
    }
    let trained = match config.algorithm {
        Algorithm::Bpe => bpe::train(counts, config)?,
        Algorithm::Unigram => unigram::train(counts, config)?,
    };
    if !trained.report.reached_target {
        log::warn!(
            "{} {} stopped at vocab size {} of {} requested",
            trained.report.algorithm,
            trained.report.profile,
            trained.report.vocab_size,
            trained.report.requested_vocab_size
        );
    }
    Ok(trained)
}

fn with_workers<T: Send>(
    workers: Option<usize>,
    f: impl FnOnce() -> Result<T> + Send,
) -> Result<T> {
    match workers {
        None => f(),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build()
                .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
            pool.install(f)
        }
    }
}

fn check_floor(config: &TrainConfig, alphabet: usize) -> Result<usize> {
    let floor = reserved_prefix(&config.profile).len() + alphabet;
    if config.vocab_size < floor {
        return Err(Error::VocabTooSmall {
            requested: config.vocab_size,
            floor,
        });
    }
    Ok(floor)
}

fn trainer_info(config: &TrainConfig) -> serde_json::Value {
    let mut info = serde_json::json!({
        "requested_vocab_size": config.vocab_size,
        "character_coverage": config.character_coverage,
    });
    if config.algorithm == Algorithm::Unigram {
        info["unigram"] = serde_json::to_value(&config.unigram).expect("plain struct");
    }
    info
}

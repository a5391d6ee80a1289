use std::collections::{HashMap, HashSet};

use rayon::prelude::*;

use super::{
    check_floor, segment_words, select_alphabet, trainer_info, TrainConfig, TrainReport, Trained,
    WordCounts,
};
use crate::error::Result;
use crate::tok::lattice::{self, PieceTable};
use crate::tok::{reserved_prefix, Algorithm, TokenizerModel};

const MAX_SEED_CHARS: usize = 8;

struct State {
    pieces: Vec<String>,
    logp: Vec<f64>,
    required: Vec<bool>,
}

impl State {
    fn table(&self) -> PieceTable {
        let min = self
            .logp
            .iter()
            .copied()
            .filter(|p| p.is_finite())
            .fold(0.0, f64::min);
        PieceTable::new(
            self.pieces.iter().cloned().zip(0u32..),
            self.logp.clone(),
            min - 10.0,
        )
    }

    fn retain(&mut self, keep: &[bool]) {
        let mut k = keep.iter();
        self.pieces.retain(|_| *k.next().unwrap());
        let mut k = keep.iter();
        self.logp.retain(|_| *k.next().unwrap());
        let mut k = keep.iter();
        self.required.retain(|_| *k.next().unwrap());
    }
}

/// Chunk size for the E-step; depends only on the data so the reduction
/// order (and thus every float) is the same for any thread count.
fn chunk_len(n: usize) -> usize {
    (n / 64).max(512)
}

/// Expected piece counts and corpus log-likelihood under the current model.
fn e_step(table: &PieceTable, pieces: usize, words: &[(String, u64)]) -> (Vec<f64>, f64) {
    let parts: Vec<(Vec<f64>, f64)> = words
        .par_chunks(chunk_len(words.len()))
        .map(|chunk| {
            let mut expected = vec![0.0; pieces];
            let mut ll = 0.0;
            for (w, c) in chunk {
                ll += *c as f64 * lattice::accumulate_marginals(table, w, *c as f64, &mut expected);
            }
            (expected, ll)
        })
        .collect();
    let mut expected = vec![0.0; pieces];
    let mut ll = 0.0;
    for (e, l) in parts {
        for (a, b) in expected.iter_mut().zip(e) {
            *a += b;
        }
        ll += l;
    }
    (expected, ll)
}

fn log_likelihood(table: &PieceTable, words: &[(String, u64)]) -> f64 {
    let parts: Vec<f64> = words
        .par_chunks(chunk_len(words.len()))
        .map(|chunk| {
            chunk
                .iter()
                .map(|(w, c)| *c as f64 * lattice::log_marginal(table, w))
                .sum()
        })
        .collect();
    parts.into_iter().sum()
}

/// `iters` rounds of maximum-likelihood EM. Returns the likelihood before
/// the first round and after each one.
fn em_block(state: &mut State, words: &[(String, u64)], iters: usize) -> Vec<f64> {
    let mut trace = Vec::with_capacity(iters + 1);
    for _ in 0..iters {
        let (expected, ll) = e_step(&state.table(), state.pieces.len(), words);
        trace.push(ll);
        let total: f64 = expected.iter().sum();
        let log_total = total.ln();
        for (lp, e) in state.logp.iter_mut().zip(&expected) {
            *lp = e.ln() - log_total;
        }
    }
    trace.push(log_likelihood(&state.table(), words));
    trace
}

/// Viterbi usage counts of each piece across the corpus.
fn viterbi_freq(table: &PieceTable, pieces: usize, words: &[(String, u64)]) -> Vec<u64> {
    let parts: Vec<Vec<u64>> = words
        .par_chunks(chunk_len(words.len()))
        .map(|chunk| {
            let mut freq = vec![0u64; pieces];
            for (w, c) in chunk {
                for e in lattice::viterbi(table, w, None).1 {
                    if let Some(id) = e.piece {
                        freq[id as usize] += c;
                    }
                }
            }
            freq
        })
        .collect();
    let mut freq = vec![0u64; pieces];
    for f in parts {
        for (a, b) in freq.iter_mut().zip(f) {
            *a += b;
        }
    }
    freq
}

/// Drops pieces whose removal costs the least likelihood, estimated by
/// re-segmenting each piece without itself. Keeps at least `target`.
fn prune(state: &mut State, words: &[(String, u64)], target: usize) {
    let table = state.table();
    let n = state.pieces.len();
    let freq = viterbi_freq(&table, n, words);
    let vsum: u64 = freq.iter().sum();
    let vsum = vsum as f64;

    let alternatives: Vec<Option<Vec<u32>>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let (score, path) = lattice::viterbi(&table, &state.pieces[i], Some(i as u32));
            if !score.is_finite() || path.iter().any(|e| e.piece.is_none()) {
                return None;
            }
            Some(path.into_iter().filter_map(|e| e.piece).collect())
        })
        .collect();

    let mut keep = vec![false; n];
    let mut candidates: Vec<(f64, usize)> = Vec::new();
    for i in 0..n {
        if state.required[i] {
            keep[i] = true;
            continue;
        }
        if freq[i] == 0 {
            // Unused by any best segmentation: first to go.
            candidates.push((f64::NEG_INFINITY, i));
            continue;
        }
        let Some(alt) = &alternatives[i] else {
            keep[i] = true;
            continue;
        };
        let f = freq[i] as f64;
        let logprob_piece = f.ln() - vsum.ln();
        let new_sum = vsum + f * (alt.len() as f64 - 1.0);
        let logprob_alt: f64 = alt
            .iter()
            .map(|&a| (freq[a as usize] as f64 + f).ln() - new_sum.ln())
            .sum();
        let loss = (f / vsum) * (logprob_piece - logprob_alt);
        candidates.push((loss, i));
    }
    candidates.sort_by(|a, b| {
        b.0.total_cmp(&a.0)
            .then_with(|| state.logp[b.1].total_cmp(&state.logp[a.1]))
            .then_with(|| state.pieces[a.1].cmp(&state.pieces[b.1]))
    });
    let room = target.saturating_sub(keep.iter().filter(|k| **k).count());
    for (_, i) in candidates.into_iter().take(room) {
        keep[i] = true;
    }
    state.retain(&keep);
}

/// Multi-character substrings (up to 8 chars) seen at least twice, best
/// `cap` by frequency × length.
fn seed_substrings(
    words: &[(String, u64)],
    cap: usize,
    reserved: &HashSet<&str>,
) -> Vec<(String, f64)> {
    let maps: Vec<HashMap<&str, u64>> = words
        .par_chunks(chunk_len(words.len()))
        .map(|chunk| {
            let mut m: HashMap<&str, u64> = HashMap::new();
            for (w, c) in chunk {
                let offsets: Vec<usize> = w
                    .char_indices()
                    .map(|(i, _)| i)
                    .chain(std::iter::once(w.len()))
                    .collect();
                let n = offsets.len() - 1;
                for i in 0..n {
                    for len in 2..=MAX_SEED_CHARS.min(n - i) {
                        *m.entry(&w[offsets[i]..offsets[i + len]]).or_insert(0) += c;
                    }
                }
            }
            m
        })
        .collect();
    let mut total: HashMap<&str, u64> = HashMap::new();
    for m in maps {
        for (k, v) in m {
            *total.entry(k).or_insert(0) += v;
        }
    }
    let mut seeds: Vec<(String, f64)> = total
        .into_iter()
        .filter(|(s, f)| *f >= 2 && !reserved.contains(s))
        .map(|(s, f)| (s.to_owned(), f as f64 * s.chars().count() as f64))
        .collect();
    seeds.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    seeds.truncate(cap);
    seeds
}

pub(super) fn train(counts: &WordCounts, config: &TrainConfig) -> Result<Trained> {
    let profile = &config.profile;
    let params = &config.unigram;
    let alphabet = select_alphabet(counts, profile, config.character_coverage);
    let floor = check_floor(config, alphabet.len())?;
    let reserved = reserved_prefix(profile);
    let reserved_set: HashSet<&str> = reserved.iter().map(String::as_str).collect();
    let budget = config.vocab_size - reserved.len();

    let words = segment_words(counts, &alphabet);
    let mut char_freq: HashMap<char, u64> = HashMap::new();
    for (w, c) in &words {
        for ch in w.chars() {
            *char_freq.entry(ch).or_insert(0) += c;
        }
    }
    let cap = (params.seed_multiplier * config.vocab_size as f64) as usize;
    let mut scored: Vec<(String, f64, bool)> = alphabet
        .iter()
        // Unseen characters still need a finite score.
        .map(|c| {
            (
                c.to_string(),
                char_freq.get(c).copied().unwrap_or(0).max(1) as f64,
                true,
            )
        })
        .collect();
    scored.extend(
        seed_substrings(&words, cap, &reserved_set)
            .into_iter()
            .map(|(s, score)| (s, score, false)),
    );
    let total: f64 = scored.iter().map(|s| s.1).sum();
    let mut state = State {
        logp: scored.iter().map(|s| s.1.ln() - total.ln()).collect(),
        required: scored.iter().map(|s| s.2).collect(),
        pieces: scored.into_iter().map(|s| s.0).collect(),
    };

    let desired = ((budget as f64) * 1.1).ceil() as usize;
    let mut trace = Vec::new();
    let mut rounds = 0;
    loop {
        trace.push(em_block(&mut state, &words, params.em_iters));
        if state.pieces.len() <= desired {
            break;
        }
        let before = state.pieces.len();
        let target = desired.max((before as f64 * params.prune_keep) as usize);
        prune(&mut state, &words, target);
        rounds += 1;
        if state.pieces.len() == before {
            break;
        }
    }

    // Final cut to the exact budget by probability, keeping the alphabet.
    let mut order: Vec<usize> = (0..state.pieces.len())
        .filter(|&i| state.required[i] || state.logp[i].is_finite())
        .collect();
    order.sort_by(|&a, &b| {
        state.required[b]
            .cmp(&state.required[a])
            .then_with(|| state.logp[b].total_cmp(&state.logp[a]))
            .then_with(|| state.pieces[a].cmp(&state.pieces[b]))
    });
    order.truncate(budget);
    order.sort_by(|&a, &b| {
        state.logp[b]
            .total_cmp(&state.logp[a])
            .then_with(|| state.pieces[a].cmp(&state.pieces[b]))
    });

    let finite_min = order
        .iter()
        .map(|&i| state.logp[i])
        .filter(|p| p.is_finite())
        .fold(0.0, f64::min);
    let mut vocab = reserved;
    let mut logprobs = vec![0.0; vocab.len()];
    for &i in &order {
        vocab.push(state.pieces[i].clone());
        let lp = state.logp[i];
        // A required character nobody uses would otherwise be -inf.
        logprobs.push(if lp.is_finite() {
            lp.min(0.0)
        } else {
            finite_min - 10.0
        });
    }
    let achieved = vocab.len();
    debug_assert!(achieved >= floor);
    let model = TokenizerModel::new_unigram(profile.clone(), vocab, logprobs)?
        .with_trainer_info(trainer_info(config));
    let report = TrainReport {
        algorithm: Algorithm::Unigram,
        profile: profile.name,
        requested_vocab_size: config.vocab_size,
        vocab_size: achieved,
        reached_target: achieved == config.vocab_size,
        alphabet_size: alphabet.len(),
        rounds,
        likelihood_trace: trace,
    };
    Ok(Trained { model, report })
}

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap, HashSet};
use std::sync::Arc;

use rayon::prelude::*;

use super::{
    check_floor, segment_words, select_alphabet, trainer_info, TrainConfig, TrainReport, Trained,
    WordCounts,
};
use crate::error::Result;
use crate::tok::{reserved_prefix, Algorithm, TokenizerModel};

type Pair = (u32, u32);

struct Candidate {
    count: i64,
    left: Arc<str>,
    right: Arc<str>,
    pair: Pair,
}

impl PartialEq for Candidate {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Candidate {}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Candidate {
    // Highest count first, then the lexicographically smallest pair.
    fn cmp(&self, other: &Self) -> Ordering {
        self.count
            .cmp(&other.count)
            .then_with(|| (&other.left, &other.right).cmp(&(&self.left, &self.right)))
    }
}

struct Word {
    syms: Vec<u32>,
    count: i64,
}

pub(super) fn train(counts: &WordCounts, config: &TrainConfig) -> Result<Trained> {
    let profile = &config.profile;
    let alphabet = select_alphabet(counts, profile, config.character_coverage);
    check_floor(config, alphabet.len())?;

    let reserved = reserved_prefix(profile);
    let reserved_set: HashSet<&str> = reserved.iter().map(String::as_str).collect();
    let mut tokens: Vec<Arc<str>> = reserved.iter().map(|s| Arc::from(s.as_str())).collect();
    let mut index: HashMap<Arc<str>, u32> = HashMap::new();
    for c in &alphabet {
        let s: Arc<str> = Arc::from(c.to_string());
        index.insert(s.clone(), tokens.len() as u32);
        tokens.push(s);
    }

    let mut words: Vec<Word> = segment_words(counts, &alphabet)
        .into_iter()
        .filter(|(w, _)| w.chars().nth(1).is_some())
        .map(|(w, c)| Word {
            syms: w.chars().map(|ch| index[ch.to_string().as_str()]).collect(),
            count: c as i64,
        })
        .collect();

    let (mut pair_counts, mut locations) = count_pairs(&words);
    let mut heap: BinaryHeap<Candidate> = pair_counts
        .iter()
        .map(|(&pair, &count)| candidate(&tokens, pair, count))
        .collect();

    let mut merges: Vec<(String, String)> = Vec::new();
    let mut reached = true;
    while tokens.len() < config.vocab_size {
        let best = loop {
            match heap.pop() {
                None => break None,
                Some(c) if pair_counts.get(&c.pair) != Some(&c.count) => continue,
                Some(c) if reserved_set.contains(format!("{}{}", c.left, c.right).as_str()) => {
                    continue
                }
                Some(c) => break Some(c),
            }
        };
        let Some(best) = best.filter(|c| c.count >= 2) else {
            reached = false;
            break;
        };
        let joined: Arc<str> = Arc::from(format!("{}{}", best.left, best.right));
        let out = match index.get(&joined) {
            Some(&id) => id,
            None => {
                let id = tokens.len() as u32;
                index.insert(joined.clone(), id);
                tokens.push(joined);
                id
            }
        };
        merges.push((best.left.to_string(), best.right.to_string()));

        let mut changed: HashSet<Pair> = HashSet::new();
        let affected = locations.remove(&best.pair).unwrap_or_default();
        for &w in &affected {
            let word = &mut words[w as usize];
            if !word.syms.windows(2).any(|p| (p[0], p[1]) == best.pair) {
                continue;
            }
            for p in word.syms.windows(2) {
                let key = (p[0], p[1]);
                let e = pair_counts.get_mut(&key).expect("counted pair");
                *e -= word.count;
                if *e == 0 {
                    pair_counts.remove(&key);
                }
                changed.insert(key);
            }
            word.syms = apply_merge(&word.syms, best.pair, out);
            for p in word.syms.windows(2) {
                let key = (p[0], p[1]);
                *pair_counts.entry(key).or_insert(0) += word.count;
                changed.insert(key);
                let locs = locations.entry(key).or_default();
                if locs.last() != Some(&w) {
                    locs.push(w);
                }
            }
        }
        // Every word holding the pair was rewritten, so its count is gone.
        debug_assert!(!pair_counts.contains_key(&best.pair));
        let mut changed: Vec<Pair> = changed.into_iter().collect();
        changed.sort_unstable();
        for pair in changed {
            if let Some(&count) = pair_counts.get(&pair) {
                heap.push(candidate(&tokens, pair, count));
            }
        }
    }

    let vocab: Vec<String> = tokens.iter().map(|t| t.to_string()).collect();
    let achieved = vocab.len();
    let model = TokenizerModel::new_bpe(profile.clone(), vocab, &merges)?
        .with_trainer_info(trainer_info(config));
    let report = TrainReport {
        algorithm: Algorithm::Bpe,
        profile: profile.name,
        requested_vocab_size: config.vocab_size,
        vocab_size: achieved,
        reached_target: reached && achieved == config.vocab_size,
        alphabet_size: alphabet.len(),
        rounds: merges.len(),
        likelihood_trace: Vec::new(),
    };
    Ok(Trained { model, report })
}

fn candidate(tokens: &[Arc<str>], pair: Pair, count: i64) -> Candidate {
    Candidate {
        count,
        left: tokens[pair.0 as usize].clone(),
        right: tokens[pair.1 as usize].clone(),
        pair,
    }
}

/// Replaces non-overlapping occurrences of `pair`, scanning left to right.
fn apply_merge(syms: &[u32], pair: Pair, out: u32) -> Vec<u32> {
    let mut next = Vec::with_capacity(syms.len());
    let mut i = 0;
    while i < syms.len() {
        if i + 1 < syms.len() && (syms[i], syms[i + 1]) == pair {
            next.push(out);
            i += 2;
        } else {
            next.push(syms[i]);
            i += 1;
        }
    }
    next
}

type Locations = HashMap<Pair, Vec<u32>>;

/// Weighted pair counts and, per pair, the ascending indices of words that
/// contain it. Shards are reduced in order, so the result is independent of
/// the thread count.
fn count_pairs(words: &[Word]) -> (HashMap<Pair, i64>, Locations) {
    const SHARD: usize = 4096;
    let shards: Vec<(HashMap<Pair, i64>, Locations)> = words
        .par_chunks(SHARD)
        .enumerate()
        .map(|(k, chunk)| {
            let mut counts: HashMap<Pair, i64> = HashMap::new();
            let mut locs: Locations = HashMap::new();
            for (j, word) in chunk.iter().enumerate() {
                let w = (k * SHARD + j) as u32;
                for p in word.syms.windows(2) {
                    let key = (p[0], p[1]);
                    *counts.entry(key).or_insert(0) += word.count;
                    let l = locs.entry(key).or_default();
                    if l.last() != Some(&w) {
                        l.push(w);
                    }
                }
            }
            (counts, locs)
        })
        .collect();
    let mut counts: HashMap<Pair, i64> = HashMap::new();
    let mut locs: Locations = HashMap::new();
    for (c, l) in shards {
        for (k, v) in c {
            *counts.entry(k).or_insert(0) += v;
        }
        for (k, v) in l {
            locs.entry(k).or_default().extend(v);
        }
    }
    (counts, locs)
}

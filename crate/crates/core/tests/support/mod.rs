//! Reference implementations used as test oracles. Each one is written for
//! clarity over speed and shares no code with the library beyond its public
//! data types.

#![allow(dead_code)]

use std::collections::{BTreeMap, HashMap, HashSet};

use rand::prelude::*;
use rand::rngs::StdRng;
use toklab_core::tok::{
    byte_to_char, reserved_prefix, Algorithm, Profile, TokenKind, TokenizerModel, WORD_MARKER,
};
use toklab_core::train::{train_from_word_counts, TrainConfig, Trained, WordCounts};

/// Naive BPE: recounts every adjacent pair from scratch each round.
///
/// Same conventions as the trainer under test: the alphabet is the
/// frequency-ordered coverage prefix (all 256 byte symbols for byte-level
/// profiles), words are cut at characters outside it, the most frequent pair
/// wins with ties going to the lexicographically smallest `(left, right)`,
/// merges that would produce a reserved string are never taken, and training
/// stops once no pair occurs at least twice.
pub struct NaiveBpe {
    pub vocab: Vec<String>,
    pub merges: Vec<(String, String)>,
}

pub fn naive_alphabet(entries: &[(String, u64)], profile: &Profile, coverage: f64) -> Vec<char> {
    let mut freq: BTreeMap<char, u64> = BTreeMap::new();
    for (w, c) in entries {
        for ch in w.chars() {
            *freq.entry(ch).or_default() += c;
        }
    }
    let mut chars: Vec<(char, u64)> = if profile.byte_level_pretok {
        (0..=255u8)
            .map(|b| {
                let c = byte_to_char(b);
                (c, freq.get(&c).copied().unwrap_or(0))
            })
            .collect()
    } else {
        freq.into_iter().collect()
    };
    chars.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    if profile.byte_level_pretok {
        return chars.into_iter().map(|c| c.0).collect();
    }
    let total: u64 = chars.iter().map(|c| c.1).sum();
    let mut out: Vec<char> = Vec::new();
    let mut covered = 0u64;
    for (c, n) in chars {
        let enough = covered as f64 >= coverage * total as f64;
        let full = profile.limit_alphabet.is_some_and(|l| out.len() >= l);
        if enough || full {
            break;
        }
        covered += n;
        out.push(c);
    }
    if !out.contains(&WORD_MARKER) {
        out.push(WORD_MARKER);
    }
    out
}

pub fn naive_bpe(
    entries: &[(String, u64)],
    profile: &Profile,
    vocab_size: usize,
    coverage: f64,
) -> NaiveBpe {
    let alphabet = naive_alphabet(entries, profile, coverage);
    let allowed: HashSet<char> = alphabet.iter().copied().collect();
    let reserved = reserved_prefix(profile);
    let reserved_set: HashSet<&String> = reserved.iter().collect();

    let mut pieces: BTreeMap<String, u64> = BTreeMap::new();
    for (w, c) in entries {
        let mut cur = String::new();
        for ch in w.chars() {
            if allowed.contains(&ch) {
                cur.push(ch);
            } else if !cur.is_empty() {
                *pieces.entry(std::mem::take(&mut cur)).or_default() += c;
            }
        }
        if !cur.is_empty() {
            *pieces.entry(cur).or_default() += c;
        }
    }
    let mut words: Vec<(Vec<String>, u64)> = pieces
        .into_iter()
        .map(|(w, c)| (w.chars().map(String::from).collect(), c))
        .collect();

    let mut vocab: Vec<String> = reserved.clone();
    vocab.extend(alphabet.iter().map(|c| c.to_string()));
    let mut known: HashSet<String> = vocab.iter().cloned().collect();
    let mut merges = Vec::new();
    while vocab.len() < vocab_size {
        let mut counts: BTreeMap<(String, String), u64> = BTreeMap::new();
        for (syms, c) in &words {
            for p in syms.windows(2) {
                *counts.entry((p[0].clone(), p[1].clone())).or_default() += c;
            }
        }
        // BTreeMap iterates in ascending pair order, so keeping the first
        // maximum gives the smallest pair among ties.
        let mut best: Option<(&(String, String), u64)> = None;
        for (pair, &n) in &counts {
            if reserved_set.contains(&format!("{}{}", pair.0, pair.1)) {
                continue;
            }
            if best.is_none_or(|b| n > b.1) {
                best = Some((pair, n));
            }
        }
        let Some(((l, r), n)) = best else { break };
        if n < 2 {
            break;
        }
        let (l, r) = (l.clone(), r.clone());
        let joined = format!("{l}{r}");
        if known.insert(joined.clone()) {
            vocab.push(joined.clone());
        }
        for (syms, _) in &mut words {
            let mut next = Vec::with_capacity(syms.len());
            let mut i = 0;
            while i < syms.len() {
                if i + 1 < syms.len() && syms[i] == l && syms[i + 1] == r {
                    next.push(joined.clone());
                    i += 2;
                } else {
                    next.push(syms[i].clone());
                    i += 1;
                }
            }
            *syms = next;
        }
        merges.push((l, r));
    }
    NaiveBpe { vocab, merges }
}

/// Best segmentation score of `word` under a Unigram model by trying every
/// one of the 2^(n-1) ways to cut it. A segment scores its piece's log
/// probability; a single character that has no piece of its own scores the
/// model's unknown-character penalty; anything else is impossible.
pub fn exhaustive_best_score(model: &TokenizerModel, word: &str) -> f64 {
    let chars: Vec<char> = word.chars().collect();
    let n = chars.len();
    if n == 0 {
        return 0.0;
    }
    let unk = model.unknown_char_score().expect("unigram model");
    let seg_score = |s: &str| -> f64 {
        let piece = model
            .token_id(s)
            .filter(|&id| model.kind(id) == Some(TokenKind::Piece));
        match piece {
            Some(id) => model.logprob(id).expect("unigram logprob"),
            None if s.chars().count() == 1 => unk,
            None => f64::NEG_INFINITY,
        }
    };
    let mut best = f64::NEG_INFINITY;
    for mask in 0u32..(1 << (n - 1)) {
        let mut total = 0.0;
        let mut start = 0;
        for i in 0..n {
            let cut_after = i == n - 1 || mask & (1 << i) != 0;
            if cut_after {
                let seg: String = chars[start..=i].iter().collect();
                total += seg_score(&seg);
                start = i + 1;
            }
        }
        if total > best {
            best = total;
        }
    }
    best
}

/// Score of a segmentation given as piece strings, using the same rules.
pub fn segmentation_score(model: &TokenizerModel, segments: &[(&str, bool)]) -> f64 {
    let unk = model.unknown_char_score().expect("unigram model");
    segments
        .iter()
        .map(|&(s, known)| {
            if known {
                model
                    .logprob(model.token_id(s).expect("piece"))
                    .expect("logprob")
            } else {
                unk
            }
        })
        .sum()
}

/// Mid-ranks by direct counting: rank = #smaller + (#equal + 1) / 2.
pub fn brute_ranks(xs: &[f64]) -> Vec<f64> {
    xs.iter()
        .map(|&x| {
            let less = xs.iter().filter(|&&y| y < x).count() as f64;
            let equal = xs.iter().filter(|&&y| y == x).count() as f64;
            less + (equal + 1.0) / 2.0
        })
        .collect()
}

pub fn brute_pearson(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some(sxy / (sxx * syy).sqrt())
}

pub fn brute_spearman(xs: &[f64], ys: &[f64]) -> Option<f64> {
    brute_pearson(&brute_ranks(xs), &brute_ranks(ys))
}

/// Kendall tau-b from all n(n-1)/2 pairs.
pub fn brute_kendall(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let n = xs.len();
    let (mut concordant, mut discordant, mut tied_x, mut tied_y) = (0i64, 0i64, 0i64, 0i64);
    for i in 0..n {
        for j in i + 1..n {
            let dx = xs[i] - xs[j];
            let dy = ys[i] - ys[j];
            if dx == 0.0 {
                tied_x += 1;
            }
            if dy == 0.0 {
                tied_y += 1;
            }
            if dx != 0.0 && dy != 0.0 {
                if (dx > 0.0) == (dy > 0.0) {
                    concordant += 1;
                } else {
                    discordant += 1;
                }
            }
        }
    }
    let n0 = (n * (n - 1) / 2) as i64;
    let denom = ((n0 - tied_x) as f64 * (n0 - tied_y) as f64).sqrt();
    if denom == 0.0 {
        return None;
    }
    Some((concordant - discordant) as f64 / denom)
}

/// Exact word k-gram Jaccard on the strings themselves (no hashing).
pub fn exact_jaccard(a: &str, b: &str, k: usize) -> f64 {
    let grams = |t: &str| -> HashSet<Vec<String>> {
        let words: Vec<String> = t.split_whitespace().map(|w| w.to_lowercase()).collect();
        if words.is_empty() {
            return HashSet::new();
        }
        if words.len() < k {
            return HashSet::from([words]);
        }
        words.windows(k).map(|w| w.to_vec()).collect()
    };
    let (sa, sb) = (grams(a), grams(b));
    if sa.is_empty() && sb.is_empty() {
        return 1.0;
    }
    let inter = sa.intersection(&sb).count() as f64;
    inter / sa.union(&sb).count() as f64
}

/// Training cost in its expanded form: 96Bslh² + 16Bs²lh + 6BshV.
pub fn direct_step_cost(b: f64, s: f64, l: f64, h: f64, v: f64) -> f64 {
    96.0 * b * s * l * h * h + 16.0 * b * s * s * l * h + 6.0 * b * s * h * v
}

/// Whitespace-delimited words, counted character by character.
pub fn brute_word_count(text: &str) -> u64 {
    let mut n = 0;
    let mut in_word = false;
    for c in text.chars() {
        if c.is_whitespace() {
            in_word = false;
        } else if !in_word {
            in_word = true;
            n += 1;
        }
    }
    n
}

/// Tokens that are neither specials nor pure whitespace once decoded.
pub fn brute_content_tokens(model: &TokenizerModel, text: &str) -> u64 {
    model
        .encode(text)
        .into_iter()
        .filter(|&id| {
            if model.kind(id) == Some(TokenKind::Special) {
                return false;
            }
            let tok = model.token(id).expect("in range");
            let surface: Vec<u8> = match model.kind(id) {
                Some(TokenKind::Byte(b)) => vec![b],
                _ if model.profile().byte_level_pretok => tok
                    .chars()
                    .map(|c| toklab_core::tok::char_to_byte(c).expect("byte symbol"))
                    .collect(),
                _ => tok.replace(WORD_MARKER, " ").into_bytes(),
            };
            match std::str::from_utf8(&surface) {
                Ok(s) => !s.chars().all(char::is_whitespace),
                Err(_) => true,
            }
        })
        .count() as u64
}

const SCRIPTS: &[&str] = &[
    "abcdefghijklmnopqrstuvwxyz",
    "ABCDEFGHIJKLMNOPQRSTUVWXYZ",
    "äöüßéèêàçñøå",
    "абвгдежзийклмнопрстуфхцчшщыэюя",
    "αβγδεζηθικλμνξοπρστυφχψω",
    "的一是不了人我在有他这中大来上个国",
    "ابتثجحخدذرزسشصضطظعغفقكلمنهوي",
    "अआइईउऊएऐओऔकखगघङचछजझञ",
    "0123456789",
    ".,;:!?-'\"()[]{}/@#%&*+=<>|~^_`$",
    "😀😂🥲🚀🌍👍🏽🇩🇪❤️‍🔥",
    "\u{0}\u{1}\u{7}\u{8}\u{b}\u{c}\u{1b}\u{7f}\u{85}\u{200b}\u{200d}\u{feff}",
    "ﬁﬀ①²ｶﾞＡ\u{301}\u{308}",
    "▁",
    " \t\n\r\u{a0}\u{3000}",
];

/// Random text mixing scripts, emoji, control and compatibility characters.
pub fn random_multilingual(rng: &mut StdRng, max_chars: usize) -> String {
    let n = rng.random_range(0..=max_chars);
    let mut s = String::new();
    let mut script: Vec<char> = SCRIPTS[0].chars().collect();
    for _ in 0..n {
        if rng.random_bool(0.2) {
            script = SCRIPTS[rng.random_range(0..SCRIPTS.len())]
                .chars()
                .collect();
        }
        if rng.random_bool(0.15) {
            s.push(' ');
        } else {
            s.push(script[rng.random_range(0..script.len())]);
        }
    }
    s
}

/// Small random corpus over a skewed alphabet so that pairs repeat.
pub fn random_corpus(rng: &mut StdRng, max_bytes: usize) -> Vec<String> {
    let alphabets = ["aabbbcdeeeilmnorst", "äöüßenrstaä", "абвгдеёжз", "xyz"];
    let mut docs = Vec::new();
    let mut bytes = 0;
    let target = rng.random_range(max_bytes / 10..=max_bytes);
    while bytes < target {
        let mut doc = String::new();
        for _ in 0..rng.random_range(1..20) {
            let a: Vec<char> = alphabets[rng.random_range(0..alphabets.len())]
                .chars()
                .collect();
            let len = rng.random_range(1..9);
            for _ in 0..len {
                doc.push(a[rng.random_range(0..a.len())]);
            }
            doc.push(if rng.random_bool(0.1) { '.' } else { ' ' });
        }
        if bytes + doc.len() > max_bytes {
            break;
        }
        bytes += doc.len();
        docs.push(doc);
    }
    docs
}

pub fn rng(seed: u64) -> StdRng {
    StdRng::seed_from_u64(seed)
}

pub fn count_map(xs: &[String]) -> HashMap<&str, usize> {
    let mut m = HashMap::new();
    for x in xs {
        *m.entry(x.as_str()).or_default() += 1;
    }
    m
}

/// Trains `extra` entries above the smallest vocabulary the corpus admits.
pub fn train_above_floor(
    docs: &[String],
    algorithm: Algorithm,
    profile: &Profile,
    extra: usize,
) -> Trained {
    let counts = WordCounts::from_texts(docs, profile);
    let probe = TrainConfig::new(algorithm, profile.clone(), 1);
    let floor = match train_from_word_counts(&counts, &probe) {
        Err(toklab_core::Error::VocabTooSmall { floor, .. }) => floor,
        other => panic!("expected a floor error, got {:?}", other.map(|t| t.report)),
    };
    let cfg = TrainConfig::new(algorithm, profile.clone(), floor + extra);
    train_from_word_counts(&counts, &cfg).expect("training above the floor")
}

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::ser::SerializeMap;
use serde::{Deserialize, Serialize, Serializer};

use super::lattice::{self, PieceTable};
use super::normalize::normalize;
use super::pretok::{char_to_byte, pretokenize, PreToken};
use super::profile::{Profile, WORD_MARKER};
use crate::error::{Error, Result};
use crate::util;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Bpe,
    Unigram,
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Algorithm::Bpe => "BPE",
            Algorithm::Unigram => "UNI",
        })
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "bpe" => Ok(Algorithm::Bpe),
            "unigram" | "uni" => Ok(Algorithm::Unigram),
            _ => Err(Error::InvalidInput(format!("unknown algorithm {s:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TokenKind {
    Special,
    /// Byte-fallback token `<0xHH>`.
    Byte(u8),
    Piece,
}

/// What a token stands for once profile conventions are removed: markers
/// become spaces and byte-level characters become the bytes they encode.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Surface {
    Text(String),
    Bytes(Vec<u8>),
}

pub fn byte_token(b: u8) -> String {
    format!("<0x{b:02X}>")
}

/// A trained tokenizer. Immutable; encode and decode take `&self`.
#[derive(Clone, Debug)]
pub struct TokenizerModel {
    algorithm: Algorithm,
    profile: Profile,
    vocab: Vec<String>,
    kinds: Vec<TokenKind>,
    boundary: Vec<bool>,
    index: HashMap<String, u32>,
    char_ids: HashMap<char, u32>,
    byte_ids: Option<Vec<u32>>,
    merges: Vec<(u32, u32)>,
    merge_table: HashMap<(u32, u32), (u32, u32)>,
    logprobs: Vec<f64>,
    pieces: Option<PieceTable>,
    trainer: Option<serde_json::Value>,
}

impl TokenizerModel {
    pub fn new_bpe(
        profile: Profile,
        vocab: Vec<String>,
        merges: &[(String, String)],
    ) -> Result<Self> {
        let mut model = Self::skeleton(Algorithm::Bpe, profile, vocab)?;
        let mut produced = vec![false; model.vocab.len()];
        for (rank, (l, r)) in merges.iter().enumerate() {
            let side = |s: &str, produced: &[bool]| -> Result<u32> {
                let id = model.piece_id(s).ok_or_else(|| {
                    Error::Model(format!("merge side {s:?} is not a vocabulary piece"))
                })?;
                if s.chars().count() == 1 || produced[id as usize] {
                    Ok(id)
                } else {
                    Err(Error::Model(format!(
                        "merge {rank} uses {s:?} before any merge produces it"
                    )))
                }
            };
            let lid = side(l, &produced)?;
            let rid = side(r, &produced)?;
            let joined = format!("{l}{r}");
            let out = model.piece_id(&joined).ok_or_else(|| {
                Error::Model(format!("merge output {joined:?} missing from vocabulary"))
            })?;
            if model
                .merge_table
                .insert((lid, rid), (rank as u32, out))
                .is_some()
            {
                return Err(Error::Model(format!("duplicate merge ({l:?}, {r:?})")));
            }
            produced[out as usize] = true;
            model.merges.push((lid, rid));
        }
        Ok(model)
    }

    pub fn new_unigram(profile: Profile, vocab: Vec<String>, logprobs: Vec<f64>) -> Result<Self> {
        let mut model = Self::skeleton(Algorithm::Unigram, profile, vocab)?;
        if logprobs.len() != model.vocab.len() {
            return Err(Error::Model(format!(
                "{} logprobs for {} tokens",
                logprobs.len(),
                model.vocab.len()
            )));
        }
        if let Some(bad) = logprobs.iter().find(|p| !p.is_finite() || **p > 0.0) {
            return Err(Error::Model(format!(
                "log probability {bad} is not finite and <= 0"
            )));
        }
        let mut min = 0.0f64;
        let mut entries = Vec::new();
        for (id, tok) in model.vocab.iter().enumerate() {
            if model.kinds[id] == TokenKind::Piece {
                min = min.min(logprobs[id]);
                entries.push((tok.clone(), id as u32));
            }
        }
        model.pieces = Some(PieceTable::new(entries, logprobs.clone(), min - 10.0));
        model.logprobs = logprobs;
        Ok(model)
    }

    /// Attaches free-form training metadata, stored in the model file.
    pub fn with_trainer_info(mut self, info: serde_json::Value) -> Self {
        self.trainer = Some(info);
        self
    }

    fn skeleton(algorithm: Algorithm, profile: Profile, vocab: Vec<String>) -> Result<Self> {
        profile.validate()?;
        let specials = profile.specials.len();
        if vocab.len() < specials || vocab[..specials] != profile.specials[..] {
            return Err(Error::Model(
                "vocabulary must start with the profile's specials".into(),
            ));
        }
        let mut kinds = vec![TokenKind::Special; specials];
        let mut byte_ids = None;
        if profile.byte_fallback {
            if vocab.len() < specials + 256 {
                return Err(Error::Model("byte-fallback tokens missing".into()));
            }
            let mut ids = Vec::with_capacity(256);
            for b in 0..=255u8 {
                let id = specials + b as usize;
                if vocab[id] != byte_token(b) {
                    return Err(Error::Model(format!(
                        "expected {} at id {id}",
                        byte_token(b)
                    )));
                }
                kinds.push(TokenKind::Byte(b));
                ids.push(id as u32);
            }
            byte_ids = Some(ids);
        }
        kinds.resize(vocab.len(), TokenKind::Piece);

        let mut index = HashMap::with_capacity(vocab.len());
        for (id, tok) in vocab.iter().enumerate() {
            if index.insert(tok.clone(), id as u32).is_some() {
                return Err(Error::Model(format!("duplicate token {tok:?}")));
            }
        }
        let mut char_ids = HashMap::new();
        for (id, tok) in vocab.iter().enumerate() {
            if kinds[id] != TokenKind::Piece {
                continue;
            }
            if tok.is_empty() {
                return Err(Error::Model(format!("empty piece at id {id}")));
            }
            if profile.byte_level_pretok && tok.chars().any(|c| char_to_byte(c).is_none()) {
                return Err(Error::Model(format!(
                    "piece {tok:?} is outside the byte-level alphabet"
                )));
            }
            let mut chars = tok.chars();
            if let (Some(c), None) = (chars.next(), chars.next()) {
                char_ids.insert(c, id as u32);
            }
        }
        if profile.byte_level_pretok {
            if char_ids.len() < 256 {
                return Err(Error::Model("byte-level alphabet incomplete".into()));
            }
        } else if !char_ids.contains_key(&WORD_MARKER) {
            return Err(Error::Model("word marker piece missing".into()));
        }

        let mut model = TokenizerModel {
            algorithm,
            profile,
            boundary: Vec::new(),
            vocab,
            kinds,
            index,
            char_ids,
            byte_ids,
            merges: Vec::new(),
            merge_table: HashMap::new(),
            logprobs: Vec::new(),
            pieces: None,
            trainer: None,
        };
        model.boundary = (0..model.vocab.len() as u32)
            .map(|id| match model.surface(id) {
                Surface::Text(s) => !s.is_empty() && s.chars().all(char::is_whitespace),
                Surface::Bytes(_) => false,
            })
            .collect();
        Ok(model)
    }

    fn piece_id(&self, s: &str) -> Option<u32> {
        self.index
            .get(s)
            .copied()
            .filter(|&id| self.kinds[id as usize] == TokenKind::Piece)
    }

    pub fn algorithm(&self) -> Algorithm {
        self.algorithm
    }

    pub fn profile(&self) -> &Profile {
        &self.profile
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab.len()
    }

    pub fn vocab(&self) -> &[String] {
        &self.vocab
    }

    pub fn token(&self, id: u32) -> Option<&str> {
        self.vocab.get(id as usize).map(String::as_str)
    }

    pub fn token_id(&self, token: &str) -> Option<u32> {
        self.index.get(token).copied()
    }

    pub fn kind(&self, id: u32) -> Option<TokenKind> {
        self.kinds.get(id as usize).copied()
    }

    /// BPE merges as (left, right) ids, in rank order.
    pub fn merges(&self) -> &[(u32, u32)] {
        &self.merges
    }

    /// Unigram log probability; `None` for BPE models or bad ids.
    pub fn logprob(&self, id: u32) -> Option<f64> {
        self.logprobs.get(id as usize).copied()
    }

    /// Score given to a character that has no single-character piece.
    pub fn unknown_char_score(&self) -> Option<f64> {
        self.pieces.as_ref().map(PieceTable::unk_score)
    }

    pub fn trainer_info(&self) -> Option<&serde_json::Value> {
        self.trainer.as_ref()
    }

    /// Tokens made only of whitespace (the bare word marker, newlines, ...).
    pub fn is_boundary(&self, id: u32) -> bool {
        self.boundary.get(id as usize).copied().unwrap_or(false)
    }

    /// Counted by fertility and parity: everything except specials and
    /// pure-whitespace tokens.
    pub fn is_content(&self, id: u32) -> bool {
        !matches!(self.kind(id), Some(TokenKind::Special) | None) && !self.is_boundary(id)
    }

    pub fn surface(&self, id: u32) -> Surface {
        let tok = &self.vocab[id as usize];
        match self.kinds[id as usize] {
            TokenKind::Special => Surface::Text(tok.clone()),
            TokenKind::Byte(b) => match std::str::from_utf8(&[b]) {
                Ok(s) => Surface::Text(s.to_owned()),
                Err(_) => Surface::Bytes(vec![b]),
            },
            TokenKind::Piece if self.profile.byte_level_pretok => {
                let bytes: Vec<u8> = tok.chars().filter_map(char_to_byte).collect();
                match String::from_utf8(bytes) {
                    Ok(s) => Surface::Text(s),
                    Err(e) => Surface::Bytes(e.into_bytes()),
                }
            }
            TokenKind::Piece => Surface::Text(tok.replace(WORD_MARKER, " ")),
        }
    }

    /// Normalizes, pre-tokenizes and segments. Never fails.
    pub fn encode(&self, text: &str) -> Vec<u32> {
        self.encode_normalized(&normalize(text, &self.profile))
    }

    /// Encodes text that is already normalized under this model's profile.
    pub fn encode_normalized(&self, text: &str) -> Vec<u32> {
        let mut out = Vec::with_capacity(text.len() / 3 + 1);
        for piece in pretokenize(text, &self.profile) {
            self.encode_pretoken(&piece, &mut out);
        }
        out
    }

    /// Number of content tokens in the encoding of `text`.
    pub fn count_content_tokens(&self, text: &str) -> usize {
        self.encode(text)
            .into_iter()
            .filter(|&id| self.is_content(id))
            .count()
    }

    pub(crate) fn encode_pretoken(&self, piece: &PreToken, out: &mut Vec<u32>) {
        if piece.raw {
            self.push_bytes(&piece.text, out);
            return;
        }
        match self.algorithm {
            Algorithm::Bpe => self.encode_bpe(&piece.text, out),
            Algorithm::Unigram => self.encode_unigram(&piece.text, out),
        }
    }

    fn push_bytes(&self, s: &str, out: &mut Vec<u32>) {
        match &self.byte_ids {
            Some(ids) => out.extend(s.bytes().map(|b| ids[b as usize])),
            // Byte-level profiles cover every character; nothing reaches here.
            None => unreachable!("no byte fallback for {s:?}"),
        }
    }

    fn encode_bpe(&self, word: &str, out: &mut Vec<u32>) {
        let mut syms: Vec<u32> = Vec::with_capacity(word.len());
        for c in word.chars() {
            match self.char_ids.get(&c) {
                Some(&id) => syms.push(id),
                None => {
                    let mut buf = [0u8; 4];
                    self.push_bytes(c.encode_utf8(&mut buf), &mut syms);
                }
            }
        }
        if syms.len() < 2 || self.merge_table.is_empty() {
            out.extend(syms);
            return;
        }
        let n = syms.len();
        let mut next: Vec<usize> = (1..=n).collect();
        let mut prev: Vec<usize> = (0..n).map(|i| i.wrapping_sub(1)).collect();
        let mut alive = vec![true; n];
        let mut heap = BinaryHeap::new();
        let push = |heap: &mut BinaryHeap<_>, syms: &[u32], i: usize, j: usize| {
            if let Some(&(rank, _)) = self.merge_table.get(&(syms[i], syms[j])) {
                heap.push(Reverse((rank, i, syms[i], syms[j])));
            }
        };
        for i in 0..n - 1 {
            push(&mut heap, &syms, i, i + 1);
        }
        while let Some(Reverse((_, i, l, r))) = heap.pop() {
            if !alive[i] || syms[i] != l {
                continue;
            }
            let j = next[i];
            if j >= n || syms[j] != r {
                continue;
            }
            let (_, merged) = self.merge_table[&(l, r)];
            syms[i] = merged;
            alive[j] = false;
            next[i] = next[j];
            if next[i] < n {
                prev[next[i]] = i;
                push(&mut heap, &syms, i, next[i]);
            }
            if prev[i] != usize::MAX {
                push(&mut heap, &syms, prev[i], i);
            }
        }
        let mut i = 0;
        while i < n {
            out.push(syms[i]);
            i = next[i];
        }
    }

    fn encode_unigram(&self, word: &str, out: &mut Vec<u32>) {
        let table = self
            .pieces
            .as_ref()
            .expect("unigram model has a piece table");
        let (_, path) = lattice::viterbi(table, word, None);
        for edge in path {
            match edge.piece {
                Some(id) => out.push(id),
                None => self.push_bytes(&word[edge.start..edge.end], out),
            }
        }
    }

    /// Best segmentation of one pre-token as (score, edges); unknown
    /// characters appear as edges without a piece.
    pub fn segment_unigram(&self, word: &str) -> Option<(f64, Vec<lattice::Edge>)> {
        self.pieces
            .as_ref()
            .map(|t| lattice::viterbi(t, word, None))
    }

    pub fn decode(&self, ids: &[u32]) -> Result<String> {
        let mut bytes = Vec::new();
        for &id in ids {
            let kind = self.kind(id).ok_or(Error::TokenOutOfRange {
                id,
                vocab_size: self.vocab.len(),
            })?;
            let tok = &self.vocab[id as usize];
            match kind {
                TokenKind::Special => bytes.extend_from_slice(tok.as_bytes()),
                TokenKind::Byte(b) => bytes.push(b),
                TokenKind::Piece if self.profile.byte_level_pretok => {
                    bytes.extend(tok.chars().filter_map(char_to_byte))
                }
                TokenKind::Piece => {
                    for c in tok.chars() {
                        let c = if c == WORD_MARKER { ' ' } else { c };
                        let mut buf = [0u8; 4];
                        bytes.extend_from_slice(c.encode_utf8(&mut buf).as_bytes());
                    }
                }
            }
        }
        let text = String::from_utf8_lossy(&bytes);
        let text = if self.profile.dummy_prefix {
            text.strip_prefix(' ').unwrap_or(&text)
        } else {
            &text
        };
        Ok(text.to_owned())
    }

    pub fn to_json(&self) -> String {
        let file = ModelFileOut {
            format_version: FORMAT_VERSION,
            algorithm: self.algorithm,
            profile: &self.profile,
            specials: &self.profile.specials,
            vocab: VocabOut(&self.vocab),
            merges: (self.algorithm == Algorithm::Bpe).then(|| {
                self.merges
                    .iter()
                    .map(|&(l, r)| {
                        [
                            self.vocab[l as usize].as_str(),
                            self.vocab[r as usize].as_str(),
                        ]
                    })
                    .collect()
            }),
            logprobs: (self.algorithm == Algorithm::Unigram).then_some(&self.logprobs[..]),
            trainer: self.trainer.as_ref(),
        };
        let mut s = serde_json::to_string_pretty(&file).expect("model serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        #[derive(Deserialize)]
        struct Probe {
            format_version: u32,
        }
        let probe: Probe = serde_json::from_str(text)?;
        if probe.format_version != FORMAT_VERSION {
            return Err(Error::UnsupportedVersion(probe.format_version));
        }
        let file: ModelFileIn = serde_json::from_str(text)?;
        let mut vocab = vec![None; file.vocab.len()];
        for (tok, id) in file.vocab {
            let slot = vocab
                .get_mut(id as usize)
                .ok_or_else(|| Error::Model(format!("id {id} is not dense")))?;
            if slot.replace(tok).is_some() {
                return Err(Error::Model(format!("id {id} assigned twice")));
            }
        }
        let vocab: Vec<String> = vocab
            .into_iter()
            .collect::<Option<_>>()
            .ok_or_else(|| Error::Model("vocabulary ids are not dense".into()))?;
        let mut profile = file.profile;
        profile.specials = file.specials;
        let model = match file.algorithm {
            Algorithm::Bpe => {
                let merges = file
                    .merges
                    .ok_or_else(|| Error::Model("BPE model without merges".into()))?;
                let merges: Vec<(String, String)> =
                    merges.into_iter().map(|[l, r]| (l, r)).collect();
                Self::new_bpe(profile, vocab, &merges)?
            }
            Algorithm::Unigram => {
                let logprobs = file
                    .logprobs
                    .ok_or_else(|| Error::Model("unigram model without logprobs".into()))?;
                Self::new_unigram(profile, vocab, logprobs)?
            }
        };
        Ok(match file.trainer {
            Some(t) => model.with_trainer_info(t),
            None => model,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        util::write_atomic(path, self.to_json().as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Read {
            path: path.to_owned(),
            source,
        })?;
        Self::from_json(&text)
    }
}

struct VocabOut<'a>(&'a [String]);

impl Serialize for VocabOut<'_> {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut map = s.serialize_map(Some(self.0.len()))?;
        for (id, tok) in self.0.iter().enumerate() {
            map.serialize_entry(tok, &id)?;
        }
        map.end()
    }
}

#[derive(Serialize)]
struct ModelFileOut<'a> {
    format_version: u32,
    algorithm: Algorithm,
    profile: &'a Profile,
    specials: &'a [String],
    vocab: VocabOut<'a>,
    #[serde(skip_serializing_if = "Option::is_none")]
    merges: Option<Vec<[&'a str; 2]>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    logprobs: Option<&'a [f64]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    trainer: Option<&'a serde_json::Value>,
}

#[derive(Deserialize)]
struct ModelFileIn {
    algorithm: Algorithm,
    profile: Profile,
    specials: Vec<String>,
    vocab: HashMap<String, u32>,
    merges: Option<Vec<[String; 2]>>,
    logprobs: Option<Vec<f64>>,
    trainer: Option<serde_json::Value>,
}

/// Vocabulary prefix every model of this profile starts with: specials,
/// then byte-fallback tokens when the profile uses them.
pub fn reserved_prefix(profile: &Profile) -> Vec<String> {
    let mut v = profile.specials.clone();
    if profile.byte_fallback {
        v.extend((0..=255u8).map(byte_token));
    }
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tok::pretok::byte_to_char;

    fn sp_vocab(extra: &[&str]) -> Vec<String> {
        let mut v = reserved_prefix(&Profile::sentencepiece());
        v.extend(extra.iter().map(|s| s.to_string()));
        v
    }

    fn hf_vocab(extra: &[&str]) -> Vec<String> {
        let mut v = reserved_prefix(&Profile::huggingface());
        v.extend((0..=255u8).map(|b| byte_to_char(b).to_string()));
        v.extend(extra.iter().map(|s| s.to_string()));
        v
    }

    fn pair(l: &str, r: &str) -> (String, String) {
        (l.into(), r.into())
    }

    fn toy_bpe() -> TokenizerModel {
        let vocab = sp_vocab(&[
            "▁", "h", "e", "l", "o", "he", "ll", "hell", "▁hell", "▁hello",
        ]);
        let merges = [
            pair("h", "e"),
            pair("l", "l"),
            pair("he", "ll"),
            pair("▁", "hell"),
            pair("▁hell", "o"),
        ];
        TokenizerModel::new_bpe(Profile::sentencepiece(), vocab, &merges).unwrap()
    }

    #[test]
    fn single_token_text() {
        let m = toy_bpe();
        assert_eq!(m.encode("hello"), [m.token_id("▁hello").unwrap()]);
        assert_eq!(m.decode(&m.encode("hello")).unwrap(), "hello");
    }

    #[test]
    fn empty_roundtrip() {
        let m = toy_bpe();
        assert!(m.encode("").is_empty());
        assert_eq!(m.decode(&[]).unwrap(), "");
    }

    #[test]
    fn emoji_falls_back_to_bytes() {
        let m = toy_bpe();
        let ids = m.encode("😀");
        // "▁" then the four UTF-8 bytes.
        assert_eq!(ids.len(), 5);
        assert!(ids[1..]
            .iter()
            .all(|&id| matches!(m.kind(id), Some(TokenKind::Byte(_)))));
        assert_eq!(m.decode(&ids).unwrap(), "😀");
    }

    #[test]
    fn unigram_prefers_cheaper_whole_piece() {
        let mut vocab = sp_vocab(&["▁", "a", "b", "ab"]);
        let mut lp = vec![0.0; vocab.len()];
        let n = lp.len();
        lp[n - 4] = -3.0;
        lp[n - 3] = -1.0;
        lp[n - 2] = -1.0;
        lp[n - 1] = -1.5;
        let profile = Profile {
            dummy_prefix: false,
            ..Profile::sentencepiece()
        };
        vocab.truncate(n);
        let m = TokenizerModel::new_unigram(profile, vocab, lp).unwrap();
        assert_eq!(m.encode("ab"), [m.token_id("ab").unwrap()]);
    }

    #[test]
    fn out_of_range_decode_fails() {
        let m = toy_bpe();
        let err = m.decode(&[m.vocab_size() as u32]).unwrap_err();
        assert!(matches!(err, Error::TokenOutOfRange { .. }));
    }

    #[test]
    fn rejects_broken_merge_derivations() {
        let vocab = sp_vocab(&["▁", "a", "b", "c", "ab", "abc"]);
        let bad = [pair("ab", "c"), pair("a", "b")];
        assert!(TokenizerModel::new_bpe(Profile::sentencepiece(), vocab.clone(), &bad).is_err());
        let missing = [pair("a", "c")];
        assert!(
            TokenizerModel::new_bpe(Profile::sentencepiece(), vocab.clone(), &missing).is_err()
        );
        let ok = [pair("a", "b"), pair("ab", "c")];
        assert!(TokenizerModel::new_bpe(Profile::sentencepiece(), vocab, &ok).is_ok());
    }

    #[test]
    fn rejects_duplicate_tokens_and_missing_bytes() {
        let vocab = sp_vocab(&["▁", "a", "a"]);
        assert!(TokenizerModel::new_bpe(Profile::sentencepiece(), vocab, &[]).is_err());
        let mut vocab = sp_vocab(&["▁"]);
        vocab.remove(300);
        assert!(TokenizerModel::new_bpe(Profile::sentencepiece(), vocab, &[]).is_err());
        let mut vocab = hf_vocab(&[]);
        vocab.pop();
        assert!(TokenizerModel::new_bpe(Profile::huggingface(), vocab, &[]).is_err());
    }

    #[test]
    fn hf_bpe_roundtrips_bytes() {
        let vocab = hf_vocab(&["he", "Ġw"]);
        let m = TokenizerModel::new_bpe(
            Profile::huggingface(),
            vocab,
            &[pair("h", "e"), pair("Ġ", "w")],
        )
        .unwrap();
        let ids = m.encode("hello world ☃");
        assert_eq!(ids[0], m.token_id("he").unwrap());
        assert!(ids.contains(&m.token_id("Ġw").unwrap()));
        assert_eq!(m.decode(&ids).unwrap(), "hello world ☃");
    }

    #[test]
    fn marker_tokens_are_boundaries() {
        let m = toy_bpe();
        assert!(m.is_boundary(m.token_id("▁").unwrap()));
        assert!(!m.is_content(m.token_id("▁").unwrap()));
        assert!(m.is_content(m.token_id("▁hello").unwrap()));
        assert!(!m.is_content(0));
        assert!(m.is_boundary(m.token_id("<0x0A>").unwrap()));
        assert_eq!(m.count_content_tokens("hello  hello"), 2);
    }

    #[test]
    fn literal_marker_survives_roundtrip() {
        let m = toy_bpe();
        let s = "he\u{2581}llo";
        assert_eq!(m.decode(&m.encode(s)).unwrap(), s);
    }

    #[test]
    fn model_file_roundtrip() {
        let bpe = toy_bpe().with_trainer_info(serde_json::json!({"rounds": 5}));
        let back = TokenizerModel::from_json(&bpe.to_json()).unwrap();
        assert_eq!(back.vocab(), bpe.vocab());
        assert_eq!(back.merges(), bpe.merges());
        assert_eq!(back.trainer_info(), bpe.trainer_info());
        assert_eq!(back.to_json(), bpe.to_json());

        let vocab = sp_vocab(&["▁", "x"]);
        let lp: Vec<f64> = (0..vocab.len()).map(|i| -(i as f64) / 100.0).collect();
        let uni = TokenizerModel::new_unigram(Profile::sentencepiece(), vocab, lp).unwrap();
        let back = TokenizerModel::from_json(&uni.to_json()).unwrap();
        assert_eq!(back.to_json(), uni.to_json());
    }

    #[test]
    fn unknown_version_is_rejected() {
        let json =
            toy_bpe()
                .to_json()
                .replacen("\"format_version\": 1", "\"format_version\": 7", 1);
        assert!(matches!(
            TokenizerModel::from_json(&json),
            Err(Error::UnsupportedVersion(7))
        ));
    }

    #[test]
    fn positive_logprob_rejected() {
        let vocab = sp_vocab(&["▁"]);
        let mut lp = vec![0.0; vocab.len()];
        *lp.last_mut().unwrap() = 0.5;
        assert!(TokenizerModel::new_unigram(Profile::sentencepiece(), vocab, lp).is_err());
    }
}

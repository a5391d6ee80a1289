//! Documents, line-delimited ingestion, mixture composition and held-out
//! splitting.

use std::collections::{BTreeSet, HashSet};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::util;

/// 128-bit content digest identifying a document.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DocId(pub u128);

impl DocId {
    pub fn derive(source: &str, ordinal: u64, text: &str) -> Self {
        let mut h = Sha256::new();
        h.update(source.as_bytes());
        h.update([0u8]);
        h.update(ordinal.to_le_bytes());
        h.update(text.as_bytes());
        let digest = h.finalize();
        let mut bytes = [0u8; 16];
        bytes.copy_from_slice(&digest[..16]);
        DocId(u128::from_be_bytes(bytes))
    }
}

impl fmt::Display for DocId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:032x}", self.0)
    }
}

impl fmt::Debug for DocId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "DocId({self})")
    }
}

impl FromStr for DocId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.len() != 32 {
            return Err(Error::InvalidInput(format!("bad document id {s:?}")));
        }
        u128::from_str_radix(s, 16)
            .map(DocId)
            .map_err(|_| Error::InvalidInput(format!("bad document id {s:?}")))
    }
}

impl Serialize for DocId {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for DocId {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QualityWarning {
    Tiny,
    ShortSentences,
    Header,
    Footer,
    Noisy,
    Adult,
}

impl QualityWarning {
    pub const ALL: [QualityWarning; 6] = [
        QualityWarning::Tiny,
        QualityWarning::ShortSentences,
        QualityWarning::Header,
        QualityWarning::Footer,
        QualityWarning::Noisy,
        QualityWarning::Adult,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            QualityWarning::Tiny => "tiny",
            QualityWarning::ShortSentences => "short_sentences",
            QualityWarning::Header => "header",
            QualityWarning::Footer => "footer",
            QualityWarning::Noisy => "noisy",
            QualityWarning::Adult => "adult",
        }
    }
}

impl FromStr for QualityWarning {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        QualityWarning::ALL
            .into_iter()
            .find(|w| w.as_str() == s)
            .ok_or_else(|| Error::InvalidInput(format!("unknown quality warning {s:?}")))
    }
}

impl fmt::Display for QualityWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Document {
    pub id: DocId,
    pub source: String,
    pub language: String,
    pub text: String,
    #[serde(default)]
    pub quality_warnings: BTreeSet<QualityWarning>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub harmful_ppl: Option<f64>,
}

impl Document {
    pub fn new(source: &str, language: &str, ordinal: u64, text: String) -> Self {
        Document {
            id: DocId::derive(source, ordinal, &text),
            source: source.to_owned(),
            language: language.to_owned(),
            text,
            quality_warnings: BTreeSet::new(),
            harmful_ppl: None,
        }
    }

    pub fn word_count(&self) -> u64 {
        count_words(&self.text)
    }
}

/// Number of maximal runs of non-whitespace characters (Unicode White_Space).
pub fn count_words(text: &str) -> u64 {
    text.split_whitespace().count() as u64
}

#[derive(Deserialize)]
struct RawRecord {
    text: Option<String>,
    #[serde(default)]
    quality_warnings: Option<Vec<String>>,
    #[serde(default)]
    harmful_ppl: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct IngestStats {
    pub documents: u64,
    pub malformed: u64,
    pub missing_text: u64,
    pub invalid_utf8: u64,
    pub empty_text: u64,
}

impl IngestStats {
    pub fn skipped(&self) -> u64 {
        self.malformed + self.missing_text + self.invalid_utf8 + self.empty_text
    }
}

enum Mode {
    Raw { source: String, language: String },
    Stage,
}

/// Streams documents from a line-delimited JSON source. Bad lines are
/// skipped and tallied in [`DocumentReader::stats`].
pub struct DocumentReader<R> {
    inner: R,
    mode: Mode,
    line: u64,
    buf: Vec<u8>,
    stats: IngestStats,
    error: Option<std::io::Error>,
}

impl<R: BufRead> DocumentReader<R> {
    pub fn raw(inner: R, source: &str, language: &str) -> Self {
        Self::with_mode(
            inner,
            Mode::Raw {
                source: source.to_owned(),
                language: language.to_owned(),
            },
        )
    }

    /// Reads full document records as written by [`write_documents`].
    pub fn stage(inner: R) -> Self {
        Self::with_mode(inner, Mode::Stage)
    }

    fn with_mode(inner: R, mode: Mode) -> Self {
        DocumentReader {
            inner,
            mode,
            line: 0,
            buf: Vec::new(),
            stats: IngestStats::default(),
            error: None,
        }
    }

    pub fn stats(&self) -> &IngestStats {
        &self.stats
    }

    /// An I/O error that terminated the stream early, if any.
    pub fn take_error(&mut self) -> Option<std::io::Error> {
        self.error.take()
    }

    fn parse_line(&mut self, ordinal: u64, line: &str) -> Option<Document> {
        match &self.mode {
            Mode::Stage => match serde_json::from_str::<Document>(line) {
                Ok(doc) if !doc.text.is_empty() => Some(doc),
                Ok(_) => {
                    self.stats.empty_text += 1;
                    None
                }
                Err(_) => {
                    self.stats.malformed += 1;
                    None
                }
            },
            Mode::Raw { source, language } => {
                let Ok(rec) = serde_json::from_str::<RawRecord>(line) else {
                    self.stats.malformed += 1;
                    return None;
                };
                let Some(text) = rec.text else {
                    self.stats.missing_text += 1;
                    return None;
                };
                if text.is_empty() {
                    self.stats.empty_text += 1;
                    return None;
                }
                let mut warnings = BTreeSet::new();
                for label in rec.quality_warnings.unwrap_or_default() {
                    match label.parse() {
                        Ok(w) => {
                            warnings.insert(w);
                        }
                        Err(_) => {
                            self.stats.malformed += 1;
                            return None;
                        }
                    }
                }
                if rec.harmful_ppl.is_some_and(|p| p.is_nan() || p < 0.0) {
                    self.stats.malformed += 1;
                    return None;
                }
                let mut doc = Document::new(source, language, ordinal, text);
                doc.quality_warnings = warnings;
                doc.harmful_ppl = rec.harmful_ppl;
                Some(doc)
            }
        }
    }
}

impl<R: BufRead> Iterator for DocumentReader<R> {
    type Item = Document;

    fn next(&mut self) -> Option<Document> {
        loop {
            self.buf.clear();
            match self.inner.read_until(b'\n', &mut self.buf) {
                Ok(0) => return None,
                Ok(_) => {}
                Err(e) => {
                    self.error = Some(e);
                    return None;
                }
            }
            let ordinal = self.line;
            self.line += 1;
            let bytes = std::mem::take(&mut self.buf);
            let parsed = match std::str::from_utf8(&bytes) {
                Ok(s) => {
                    let s = s.trim_end_matches(['\n', '\r']);
                    if s.trim().is_empty() {
                        None
                    } else {
                        let doc = self.parse_line(ordinal, s);
                        if doc.is_some() {
                            self.stats.documents += 1;
                        }
                        doc
                    }
                }
                Err(_) => {
                    self.stats.invalid_utf8 += 1;
                    None
                }
            };
            self.buf = bytes;
            if parsed.is_some() {
                return parsed;
            }
        }
    }
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|source| Error::Read {
            path: path.to_path_buf(),
            source,
        })
}

/// Opens a raw record file. Ids derive from `(source, line ordinal, text)`.
pub fn ingest(
    path: &Path,
    source: &str,
    language: &str,
) -> Result<DocumentReader<BufReader<File>>> {
    Ok(DocumentReader::raw(open(path)?, source, language))
}

/// Reads a stage file fully; any skipped line is an error since stage files
/// are produced by this crate.
pub fn read_documents(path: &Path) -> Result<Vec<Document>> {
    let mut reader = DocumentReader::stage(open(path)?);
    let docs: Vec<Document> = reader.by_ref().collect();
    if let Some(source) = reader.take_error() {
        return Err(Error::Read {
            path: path.to_path_buf(),
            source,
        });
    }
    if reader.stats().skipped() > 0 {
        return Err(Error::InvalidInput(format!(
            "{}: {} unreadable document records",
            path.display(),
            reader.stats().skipped()
        )));
    }
    Ok(docs)
}

pub fn documents_to_jsonl(docs: &[Document]) -> Vec<u8> {
    let mut out = Vec::new();
    for doc in docs {
        serde_json::to_writer(&mut out, doc).expect("document serializes");
        out.push(b'\n');
    }
    out
}

pub fn write_documents(path: &Path, docs: &[Document]) -> Result<()> {
    util::write_atomic(path, &documents_to_jsonl(docs))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MixtureEntry {
    pub source: String,
    pub language: String,
    pub target_words: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MixtureSpec {
    entries: Vec<MixtureEntry>,
    total_words: u64,
}

impl MixtureSpec {
    pub fn new(entries: Vec<MixtureEntry>) -> Result<Self> {
        let mut seen = HashSet::new();
        for e in &entries {
            if !seen.insert((e.source.as_str(), e.language.as_str())) {
                return Err(Error::Config(format!(
                    "duplicate mixture entry ({}, {})",
                    e.source, e.language
                )));
            }
        }
        let total_words = entries.iter().map(|e| e.target_words).sum();
        if total_words == 0 {
            return Err(Error::Config("mixture total must be positive".into()));
        }
        Ok(MixtureSpec {
            entries,
            total_words,
        })
    }

    /// Splits `total_words` by relative `share`s with largest-remainder
    /// rounding, so the targets always sum to the total.
    pub fn from_shares(total_words: u64, shares: &[(String, String, f64)]) -> Result<Self> {
        let sum: f64 = shares.iter().map(|s| s.2).sum();
        if shares.iter().any(|s| s.2.is_nan() || s.2 < 0.0) || sum.is_nan() || sum <= 0.0 {
            return Err(Error::Config(
                "mixture shares must be non-negative with a positive sum".into(),
            ));
        }
        let exact: Vec<f64> = shares
            .iter()
            .map(|s| total_words as f64 * s.2 / sum)
            .collect();
        let mut targets: Vec<u64> = exact.iter().map(|x| x.floor() as u64).collect();
        let assigned: u64 = targets.iter().sum();
        let mut order: Vec<usize> = (0..shares.len()).collect();
        order.sort_by(|&a, &b| {
            let fa = exact[a] - exact[a].floor();
            let fb = exact[b] - exact[b].floor();
            fb.total_cmp(&fa).then(a.cmp(&b))
        });
        for &i in order
            .iter()
            .take(total_words.saturating_sub(assigned) as usize)
        {
            targets[i] += 1;
        }
        let entries = shares
            .iter()
            .zip(targets)
            .map(|((source, language, _), target_words)| MixtureEntry {
                source: source.clone(),
                language: language.clone(),
                target_words,
            })
            .collect();
        Self::new(entries)
    }

    pub fn entries(&self) -> &[MixtureEntry] {
        &self.entries
    }

    pub fn total_words(&self) -> u64 {
        self.total_words
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct MixtureOutcome {
    pub source: String,
    pub language: String,
    pub target_words: u64,
    pub realized_words: u64,
    pub documents: u64,
    /// Words missing because the stream ran dry; zero when the target was met.
    pub shortfall: u64,
}

/// Takes documents from each stream in order until its running word count
/// first reaches the entry's target. `streams[i]` feeds `spec.entries()[i]`.
pub fn compose_mixture<I>(
    spec: &MixtureSpec,
    streams: Vec<I>,
) -> Result<(Vec<Document>, Vec<MixtureOutcome>)>
where
    I: IntoIterator<Item = Document>,
{
    if streams.len() != spec.entries.len() {
        return Err(Error::InvalidInput(format!(
            "mixture has {} entries but {} streams were supplied",
            spec.entries.len(),
            streams.len()
        )));
    }
    let mut corpus = Vec::new();
    let mut outcomes = Vec::with_capacity(streams.len());
    for (entry, stream) in spec.entries.iter().zip(streams) {
        let mut realized = 0u64;
        let mut taken = 0u64;
        if entry.target_words > 0 {
            for doc in stream {
                realized += doc.word_count();
                taken += 1;
                corpus.push(doc);
                if realized >= entry.target_words {
                    break;
                }
            }
        }
        let shortfall = entry.target_words.saturating_sub(realized);
        if shortfall > 0 {
            log::warn!(
                "mixture entry ({}, {}) exhausted {} words short of its target",
                entry.source,
                entry.language,
                shortfall
            );
        }
        outcomes.push(MixtureOutcome {
            source: entry.source.clone(),
            language: entry.language.clone(),
            target_words: entry.target_words,
            realized_words: realized,
            documents: taken,
            shortfall,
        });
    }
    Ok((corpus, outcomes))
}

#[derive(Clone, Debug, PartialEq)]
pub struct CorpusSplit {
    pub train: Vec<Document>,
    pub holdout: Vec<Document>,
    pub seed: u64,
}

/// Draws a seeded uniform sample of exactly `n` documents as the held-out
/// set. Both halves keep the original corpus order.
pub fn split_holdout(corpus: Vec<Document>, n: usize, seed: u64) -> Result<CorpusSplit> {
    if n > corpus.len() {
        return Err(Error::HoldoutTooLarge {
            requested: n,
            available: corpus.len(),
        });
    }
    let mut order: Vec<usize> = (0..corpus.len()).collect();
    util::fisher_yates(&mut order, seed);
    let mut in_holdout = vec![false; corpus.len()];
    for &i in &order[..n] {
        in_holdout[i] = true;
    }
    let mut train = Vec::with_capacity(corpus.len() - n);
    let mut holdout = Vec::with_capacity(n);
    for (doc, held) in corpus.into_iter().zip(in_holdout) {
        if held {
            holdout.push(doc);
        } else {
            train.push(doc);
        }
    }
    Ok(CorpusSplit {
        train,
        holdout,
        seed,
    })
}

/// Order-independent digest over a set of document ids.
pub fn id_set_digest<'a>(ids: impl IntoIterator<Item = &'a DocId>) -> String {
    let mut sorted: Vec<u128> = ids.into_iter().map(|d| d.0).collect();
    sorted.sort_unstable();
    let mut h = Sha256::new();
    for id in sorted {
        h.update(id.to_be_bytes());
    }
    hex::encode(h.finalize())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Cursor;

    fn docs_of(words: &[usize], source: &str) -> Vec<Document> {
        words
            .iter()
            .enumerate()
            .map(|(i, &n)| Document::new(source, "en", i as u64, vec!["w"; n].join(" ")))
            .collect()
    }

    #[test]
    fn count_words_examples() {
        assert_eq!(count_words("a b  c"), 3);
        assert_eq!(count_words(""), 0);
        assert_eq!(count_words(" leading and trailing "), 3);
        assert_eq!(count_words("tab\tand\u{3000}ideographic\nnewline"), 4);
    }

    #[test]
    fn ingest_valid_and_malformed() {
        let input = "{\"text\":\"one\"}\n{\"text\":\"two two\"}\n{\"text\":\"three\",\"quality_warnings\":[\"adult\"],\"harmful_ppl\":3.5}\n";
        let docs: Vec<_> = DocumentReader::raw(Cursor::new(input), "src", "en").collect();
        assert_eq!(docs.len(), 3);
        assert!(docs[2].quality_warnings.contains(&QualityWarning::Adult));
        assert_eq!(docs[2].harmful_ppl, Some(3.5));

        let input = "{\"text\":\"ok\"}\nnot json\n";
        let mut reader = DocumentReader::raw(Cursor::new(input), "src", "en");
        assert_eq!(reader.by_ref().count(), 1);
        assert_eq!(reader.stats().skipped(), 1);
        assert_eq!(reader.stats().malformed, 1);
    }

    #[test]
    fn ingest_counts_each_skip_reason() {
        let mut input = b"{\"quality_warnings\":[]}\n{\"text\":\"\"}\n{\"text\":\"x\",\"quality_warnings\":[\"bogus\"]}\n".to_vec();
        input.extend_from_slice(b"{\"text\":\"\xff\xfe\"}\n{\"text\":\"fine\"}\n");
        let mut reader = DocumentReader::raw(Cursor::new(input), "s", "de");
        let docs: Vec<_> = reader.by_ref().collect();
        assert_eq!(docs.len(), 1);
        let s = reader.stats();
        assert_eq!(
            (s.missing_text, s.empty_text, s.malformed, s.invalid_utf8),
            (1, 1, 1, 1)
        );
    }

    #[test]
    fn ingest_is_deterministic() {
        let input = "{\"text\":\"a\"}\n{\"text\":\"a\"}\n{\"text\":\"b\"}\n";
        let ids = || {
            DocumentReader::raw(Cursor::new(input), "s", "en")
                .map(|d| d.id)
                .collect::<Vec<_>>()
        };
        let first = ids();
        assert_eq!(first, ids());
        // Same text at different ordinals still yields distinct ids.
        assert_ne!(first[0], first[1]);
    }

    #[test]
    fn stage_roundtrip() {
        let mut docs = docs_of(&[2, 3], "web");
        docs[1].harmful_ppl = Some(12.5);
        docs[1].quality_warnings.insert(QualityWarning::Noisy);
        let bytes = documents_to_jsonl(&docs);
        let back: Vec<_> = DocumentReader::stage(Cursor::new(bytes)).collect();
        assert_eq!(back, docs);
    }

    #[test]
    fn greedy_mixture_overshoots_by_at_most_one_doc() {
        let spec = MixtureSpec::new(vec![MixtureEntry {
            source: "A".into(),
            language: "en".into(),
            target_words: 10,
        }])
        .unwrap();
        let (corpus, report) = compose_mixture(&spec, vec![docs_of(&[4, 4, 4, 4], "A")]).unwrap();
        assert_eq!(corpus.len(), 3);
        assert_eq!(report[0].realized_words, 12);
        assert_eq!(report[0].shortfall, 0);
    }

    #[test]
    fn zero_target_takes_nothing() {
        let spec = MixtureSpec::new(vec![
            MixtureEntry {
                source: "A".into(),
                language: "en".into(),
                target_words: 0,
            },
            MixtureEntry {
                source: "B".into(),
                language: "en".into(),
                target_words: 1,
            },
        ])
        .unwrap();
        let (corpus, report) =
            compose_mixture(&spec, vec![docs_of(&[3, 3], "A"), docs_of(&[1], "B")]).unwrap();
        assert_eq!(report[0].documents, 0);
        assert_eq!(corpus.len(), 1);
    }

    #[test]
    fn shares_80_20() {
        let spec = MixtureSpec::from_shares(
            100,
            &[
                ("web".into(), "en".into(), 0.8),
                ("curated".into(), "en".into(), 0.2),
            ],
        )
        .unwrap();
        let (_, report) = compose_mixture(
            &spec,
            vec![docs_of(&[5; 40], "web"), docs_of(&[5; 40], "curated")],
        )
        .unwrap();
        assert_eq!(report[0].documents, 16);
        assert_eq!(report[1].documents, 4);
    }

    #[test]
    fn shares_always_sum_to_total() {
        let shares: Vec<_> = (0..7)
            .map(|i| (format!("s{i}"), "en".to_string(), 1.0 + i as f64 / 3.0))
            .collect();
        for total in [1u64, 7, 99, 1001, 70_000_000_000] {
            let spec = MixtureSpec::from_shares(total, &shares).unwrap();
            assert_eq!(
                spec.entries().iter().map(|e| e.target_words).sum::<u64>(),
                total
            );
        }
    }

    #[test]
    fn exhausted_stream_reports_shortfall() {
        let spec = MixtureSpec::new(vec![MixtureEntry {
            source: "A".into(),
            language: "en".into(),
            target_words: 100,
        }])
        .unwrap();
        let (_, report) = compose_mixture(&spec, vec![docs_of(&[4, 4], "A")]).unwrap();
        assert_eq!(report[0].shortfall, 92);
    }

    #[test]
    fn duplicate_mixture_entries_rejected() {
        let e = MixtureEntry {
            source: "A".into(),
            language: "en".into(),
            target_words: 1,
        };
        assert!(MixtureSpec::new(vec![e.clone(), e]).is_err());
    }

    #[test]
    fn holdout_boundaries() {
        let corpus = docs_of(&[1; 10], "A");
        let all = split_holdout(corpus.clone(), 10, 1).unwrap();
        assert!(all.train.is_empty());
        let none = split_holdout(corpus.clone(), 0, 1).unwrap();
        assert_eq!(none.train, corpus);
        assert!(matches!(
            split_holdout(corpus, 11, 1),
            Err(Error::HoldoutTooLarge { .. })
        ));
    }

    #[test]
    fn holdout_is_seeded() {
        let corpus: Vec<_> = (0..100)
            .map(|i| Document::new("A", "en", i, format!("doc {i}")))
            .collect();
        let a = split_holdout(corpus.clone(), 10, 42).unwrap();
        let b = split_holdout(corpus.clone(), 10, 42).unwrap();
        let c = split_holdout(corpus.clone(), 10, 43).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.holdout, c.holdout);
        let mut ids: Vec<_> = a.train.iter().chain(&a.holdout).map(|d| d.id).collect();
        ids.sort();
        let mut expected: Vec<_> = corpus.iter().map(|d| d.id).collect();
        expected.sort();
        assert_eq!(ids, expected);
    }
}

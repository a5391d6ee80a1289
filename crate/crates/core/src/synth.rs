//! Deterministic synthetic corpora for tests, benches and desk-scale runs.
//!
//! Every language draws from the same Zipf-distributed concept inventory and
//! renders each concept with its own syllable-built word, so parallel rows
//! are translations of one another with different surface statistics.

use std::collections::{BTreeSet, HashSet};
use std::io::Write;
use std::path::Path;

use rand_xoshiro::Xoshiro256StarStar;
use serde::Serialize;

use crate::corpus::{count_words, Document, QualityWarning};
use crate::error::{Error, Result};
use crate::metrics::ParallelCorpus;
use crate::util::{self, uniform_below, uniform_unit};

struct Phonology {
    code: &'static str,
    onsets: &'static [&'static str],
    nuclei: &'static [&'static str],
    codas: &'static [&'static str],
    extra_syllables: usize,
}

const PHONOLOGIES: [Phonology; 2] = [
    Phonology {
        code: "en",
        onsets: &[
            "", "b", "c", "d", "f", "g", "h", "l", "m", "n", "p", "r", "s", "t", "w", "th", "sh",
            "st", "br", "cl",
        ],
        nuclei: &["a", "e", "i", "o", "u", "ea", "ou", "y"],
        codas: &["", "", "n", "t", "s", "r", "d", "ng", "ck", "st", "l"],
        extra_syllables: 0,
    },
    Phonology {
        code: "de",
        onsets: &[
            "", "b", "d", "f", "g", "h", "k", "l", "m", "n", "r", "s", "t", "w", "z", "sch", "st",
            "pf", "kr", "gr",
        ],
        nuclei: &[
            "a", "e", "i", "o", "u", "ei", "au", "ie", "ä", "ö", "ü", "eu",
        ],
        codas: &[
            "", "n", "t", "s", "r", "ch", "ng", "ß", "tz", "lich", "keit", "ung",
        ],
        extra_syllables: 1,
    },
];

/// Language codes the generator knows.
pub fn languages() -> Vec<&'static str> {
    PHONOLOGIES.iter().map(|p| p.code).collect()
}

const NUMBER_EVERY: usize = 41;

pub struct Synth {
    cdf: Vec<f64>,
    lexicons: Vec<Vec<String>>,
}

impl Synth {
    /// `concepts` shared word meanings, Zipf exponent 1.05.
    pub fn new(seed: u64, concepts: usize) -> Self {
        assert!(concepts > 0, "need at least one concept");
        let mut cdf = Vec::with_capacity(concepts);
        let mut acc = 0.0;
        for r in 0..concepts {
            acc += 1.0 / ((r + 1) as f64).powf(1.05);
            cdf.push(acc);
        }
        for c in &mut cdf {
            *c /= acc;
        }
        let lexicons = PHONOLOGIES
            .iter()
            .enumerate()
            .map(|(k, ph)| {
                lexicon(
                    ph,
                    concepts,
                    seed ^ (0x9e37_79b9_7f4a_7c15u64.wrapping_mul(k as u64 + 1)),
                )
            })
            .collect();
        Synth { cdf, lexicons }
    }

    fn lang_index(&self, lang: &str) -> Result<usize> {
        PHONOLOGIES
            .iter()
            .position(|p| p.code == lang)
            .ok_or_else(|| Error::InvalidInput(format!("no synthetic language {lang:?}")))
    }

    fn sample_concept(&self, rng: &mut Xoshiro256StarStar) -> usize {
        let u = uniform_unit(rng);
        self.cdf.partition_point(|&c| c < u).min(self.cdf.len() - 1)
    }

    fn sentence_concepts(&self, rng: &mut Xoshiro256StarStar) -> Vec<usize> {
        let n = 5 + uniform_below(rng, 14) as usize;
        (0..n).map(|_| self.sample_concept(rng)).collect()
    }

    fn render(&self, lang: usize, concepts: &[usize]) -> String {
        let mut out = String::new();
        for (i, &c) in concepts.iter().enumerate() {
            if i > 0 {
                out.push(' ');
            }
            let w = &self.lexicons[lang][c];
            if i == 0 {
                let mut chars = w.chars();
                if let Some(first) = chars.next() {
                    out.extend(first.to_uppercase());
                    out.push_str(chars.as_str());
                }
            } else {
                out.push_str(w);
            }
        }
        out.push('.');
        out
    }

    /// A sentence in every language from the same concepts.
    pub fn parallel_sentence(&self, rng: &mut Xoshiro256StarStar) -> Vec<String> {
        let concepts = self.sentence_concepts(rng);
        (0..self.lexicons.len())
            .map(|l| self.render(l, &concepts))
            .collect()
    }

    /// Paragraphs of sentences, at least `min_words` words long.
    pub fn document(
        &self,
        lang: &str,
        rng: &mut Xoshiro256StarStar,
        min_words: u64,
    ) -> Result<String> {
        let l = self.lang_index(lang)?;
        let mut text = String::new();
        let mut words = 0u64;
        loop {
            let sentences = 2 + uniform_below(rng, 5);
            for s in 0..sentences {
                if s > 0 {
                    text.push(' ');
                }
                let concepts = self.sentence_concepts(rng);
                words += concepts.len() as u64;
                text.push_str(&self.render(l, &concepts));
            }
            if words >= min_words && uniform_below(rng, 3) == 0 {
                return Ok(text);
            }
            text.push('\n');
        }
    }

    pub fn parallel_corpus(&self, rows: usize, seed: u64) -> ParallelCorpus {
        let mut rng = util::seeded_rng(seed);
        let rows = (0..rows)
            .map(|_| self.parallel_sentence(&mut rng))
            .collect();
        ParallelCorpus::new(languages().into_iter().map(String::from).collect(), rows)
            .expect("generated rows are complete")
    }

    /// Raw records for one language, about `target_bytes` of text, with
    /// quality annotations (a few tiny, noisy or adult documents), some
    /// near-copies of earlier records and harmful-perplexity scores (some
    /// low, some missing).
    pub fn raw_records(
        &self,
        lang: &str,
        target_bytes: usize,
        seed: u64,
    ) -> Result<Vec<RawRecord>> {
        self.lang_index(lang)?;
        let mut rng = util::seeded_rng(seed);
        let mut out = Vec::new();
        let mut bytes = 0usize;
        while bytes < target_bytes {
            let roll = uniform_below(&mut rng, 100);
            let mut warnings = BTreeSet::new();
            let text = match roll {
                0..=2 => {
                    warnings.insert(QualityWarning::Tiny);
                    let l = self.lang_index(lang)?;
                    let c = self.sample_concept(&mut rng);
                    self.render(l, &[c])
                }
                3..=4 => {
                    warnings.insert(QualityWarning::Noisy);
                    noise(&mut rng)
                }
                5 => {
                    warnings.insert(QualityWarning::Adult);
                    self.document(lang, &mut rng, 20)?
                }
                6..=7 => {
                    warnings.insert(QualityWarning::ShortSentences);
                    self.document(lang, &mut rng, 40)?
                }
                8 if !out.is_empty() => {
                    // Near-copy of an earlier record with one word swapped.
                    let src: &RawRecord = &out[uniform_below(&mut rng, out.len() as u64) as usize];
                    if !src.quality_warnings.is_empty() {
                        continue;
                    }
                    let mut words: Vec<&str> = src.text.split(' ').collect();
                    let at = uniform_below(&mut rng, words.len() as u64) as usize;
                    let l = self.lang_index(lang)?;
                    let c = self.sample_concept(&mut rng);
                    words[at] = &self.lexicons[l][c];
                    words.join(" ")
                }
                _ => self.document(lang, &mut rng, 60)?,
            };
            let ppl_roll = uniform_below(&mut rng, 100);
            let harmful_ppl = match ppl_roll {
                0..=1 => None,
                2..=4 => Some(1.0 + 3.9 * uniform_unit(&mut rng)),
                _ => Some(5.0 + 995.0 * uniform_unit(&mut rng).powi(2)),
            };
            bytes += text.len();
            out.push(RawRecord {
                text,
                quality_warnings: warnings.iter().map(|w| w.as_str()).collect(),
                harmful_ppl: harmful_ppl.map(|p| (p * 100.0).round() / 100.0),
            });
        }
        Ok(out)
    }
}

fn lexicon(ph: &Phonology, concepts: usize, seed: u64) -> Vec<String> {
    let mut rng = util::seeded_rng(seed);
    let mut seen = HashSet::new();
    let mut words = Vec::with_capacity(concepts);
    for rank in 0..concepts {
        if rank % NUMBER_EVERY == NUMBER_EVERY - 1 {
            // Numerals are shared across languages.
            words.push(format!("{}", 10 + rank * 7));
            continue;
        }
        let base = 1 + ((rank + 1) as f64).log10().floor() as usize;
        loop {
            let syllables = base + ph.extra_syllables * uniform_below(&mut rng, 2) as usize;
            let mut w = String::new();
            for _ in 0..syllables {
                for part in [ph.onsets, ph.nuclei, ph.codas] {
                    w.push_str(part[uniform_below(&mut rng, part.len() as u64) as usize]);
                }
            }
            if w.chars().count() >= 1 && seen.insert(w.clone()) {
                words.push(w);
                break;
            }
        }
    }
    words
}

fn noise(rng: &mut Xoshiro256StarStar) -> String {
    const PARTS: &[&str] = &[
        "#", "@@", "%%", "😀", "🚀", "\u{7}", "~", "|", "¤", "§", "0x", "ΩΩ", "→", "\t", "…",
    ];
    let n = 5 + uniform_below(rng, 30) as usize;
    let mut s = String::new();
    for i in 0..n {
        if i > 0 && uniform_below(rng, 3) == 0 {
            s.push(' ');
        }
        s.push_str(PARTS[uniform_below(rng, PARTS.len() as u64) as usize]);
    }
    s
}

/// One line of a raw source file.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RawRecord {
    pub text: String,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub quality_warnings: Vec<&'static str>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub harmful_ppl: Option<f64>,
}

pub fn write_raw_jsonl(path: &Path, records: &[RawRecord]) -> Result<()> {
    let mut out = Vec::new();
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    util::write_atomic(path, &out)
}

pub fn write_parallel_tsv(path: &Path, corpus: &ParallelCorpus) -> Result<()> {
    let mut out = corpus.languages().join("\t");
    out.push('\n');
    let columns: Vec<Vec<&str>> = corpus
        .languages()
        .iter()
        .map(|l| corpus.column(l).map(Iterator::collect))
        .collect::<Result<_>>()?;
    for i in 0..corpus.len() {
        let row: Vec<&str> = columns.iter().map(|c| c[i]).collect();
        out.push_str(&row.join("\t"));
        out.push('\n');
    }
    util::write_atomic(path, out.as_bytes())
}

/// Paths written by [`write_dataset`].
#[derive(Clone, Debug)]
pub struct Dataset {
    pub sources: Vec<(String, std::path::PathBuf)>,
    pub parallel: std::path::PathBuf,
}

/// Raw sources of about `bytes_per_language` each plus a parallel corpus.
pub fn write_dataset(
    dir: &Path,
    bytes_per_language: usize,
    parallel_rows: usize,
    seed: u64,
) -> Result<Dataset> {
    std::fs::create_dir_all(dir).map_err(|source| Error::Write {
        path: dir.to_owned(),
        source,
    })?;
    let synth = Synth::new(seed, 20_000);
    let mut sources = Vec::new();
    for (k, lang) in languages().into_iter().enumerate() {
        let records =
            synth.raw_records(lang, bytes_per_language, seed.wrapping_add(1 + k as u64))?;
        let path = dir.join(format!("web_{lang}.jsonl"));
        write_raw_jsonl(&path, &records)?;
        sources.push((lang.to_owned(), path));
    }
    let parallel = dir.join("parallel.tsv");
    write_parallel_tsv(
        &parallel,
        &synth.parallel_corpus(parallel_rows, seed.wrapping_add(99)),
    )?;
    Ok(Dataset { sources, parallel })
}

/// `docs` documents of at least 150 words where `pairs` of them are copies
/// of another with a single word replaced. Returns the corpus (shuffled) and
/// the index pairs (original, copy).
pub fn planted_near_duplicates(
    docs: usize,
    pairs: usize,
    seed: u64,
) -> (Vec<Document>, Vec<(usize, usize)>) {
    assert!(2 * pairs <= docs, "not enough documents for {pairs} pairs");
    let synth = Synth::new(seed, 20_000);
    let mut rng = util::seeded_rng(seed.wrapping_add(1));
    let originals = docs - pairs;
    let mut texts: Vec<String> = (0..originals)
        .map(|_| synth.document("en", &mut rng, 150).expect("known language"))
        .collect();
    let mut source_of: Vec<Option<usize>> = vec![None; originals];
    for p in 0..pairs {
        // The first `pairs` originals are the ones copied.
        let mut words: Vec<&str> = texts[p].split(' ').collect();
        let at = uniform_below(&mut rng, words.len() as u64) as usize;
        let replacement = format!("zq{}", p);
        words[at] = &replacement;
        let copy = words.join(" ");
        texts.push(copy);
        source_of.push(Some(p));
    }
    let mut order: Vec<usize> = (0..docs).collect();
    util::fisher_yates(&mut order, seed.wrapping_add(2));
    let mut position = vec![0usize; docs];
    for (pos, &orig) in order.iter().enumerate() {
        position[orig] = pos;
    }
    let corpus: Vec<Document> = order
        .iter()
        .enumerate()
        .map(|(pos, &i)| Document::new("synthetic", "en", pos as u64, texts[i].clone()))
        .collect();
    let mut planted: Vec<(usize, usize)> = source_of
        .iter()
        .enumerate()
        .filter_map(|(i, s)| s.map(|orig| (position[orig], position[i])))
        .collect();
    planted.sort_unstable();
    debug_assert!(corpus.iter().all(|d| count_words(&d.text) >= 150));
    (corpus, planted)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::preprocess::shingles;

    #[test]
    fn deterministic() {
        let a = Synth::new(7, 500);
        let b = Synth::new(7, 500);
        let mut ra = util::seeded_rng(1);
        let mut rb = util::seeded_rng(1);
        assert_eq!(
            a.document("de", &mut ra, 50).unwrap(),
            b.document("de", &mut rb, 50).unwrap()
        );
        assert!(a.document("xx", &mut ra, 1).is_err());
    }

    #[test]
    fn parallel_rows_share_numerals_not_words() {
        let s = Synth::new(3, 2000);
        let pc = s.parallel_corpus(50, 4);
        assert_eq!(pc.languages(), ["en", "de"]);
        let en: Vec<&str> = pc.column("en").unwrap().collect();
        let de: Vec<&str> = pc.column("de").unwrap().collect();
        for (e, d) in en.iter().zip(&de) {
            assert_eq!(count_words(e), count_words(d));
        }
        assert_ne!(en, de);
    }

    #[test]
    fn planted_pairs_are_near_duplicates() {
        let (docs, pairs) = planted_near_duplicates(200, 20, 11);
        assert_eq!(docs.len(), 200);
        assert_eq!(pairs.len(), 20);
        for &(a, b) in &pairs {
            let j = shingles(&docs[a].text, 5).jaccard(&shingles(&docs[b].text, 5));
            assert!((0.9..1.0).contains(&j), "{j}");
        }
    }

    #[test]
    fn raw_records_carry_annotations() {
        let s = Synth::new(5, 1000);
        let recs = s.raw_records("en", 200_000, 6).unwrap();
        assert!(recs.iter().map(|r| r.text.len()).sum::<usize>() >= 200_000);
        assert!(recs.iter().any(|r| r.quality_warnings.contains(&"tiny")));
        assert!(recs.iter().any(|r| r.harmful_ppl.is_none()));
        assert!(recs.iter().any(|r| r.harmful_ppl.is_some_and(|p| p < 5.0)));
    }
}

//! Fertility and parity.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::count_words;
use crate::error::{Error, Result};
use crate::tok::TokenizerModel;

/// The same sentences in several languages: `rows[i][j]` is sentence `i` in
/// `languages[j]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParallelCorpus {
    languages: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl ParallelCorpus {
    pub fn new(languages: Vec<String>, rows: Vec<Vec<String>>) -> Result<Self> {
        if languages.is_empty() {
            return Err(Error::InvalidInput(
                "parallel corpus has no languages".into(),
            ));
        }
        let mut seen = std::collections::HashSet::new();
        if let Some(dup) = languages.iter().find(|l| !seen.insert(l.as_str())) {
            return Err(Error::InvalidInput(format!(
                "language {dup:?} appears twice"
            )));
        }
        if rows.is_empty() {
            return Err(Error::InvalidInput("parallel corpus has no rows".into()));
        }
        for (i, row) in rows.iter().enumerate() {
            if row.len() != languages.len() {
                return Err(Error::InvalidInput(format!(
                    "row {} has {} columns, expected {}",
                    i + 1,
                    row.len(),
                    languages.len()
                )));
            }
            if let Some(j) = row.iter().position(|c| c.trim().is_empty()) {
                return Err(Error::InvalidInput(format!(
                    "row {} has no {} sentence",
                    i + 1,
                    languages[j]
                )));
            }
        }
        Ok(ParallelCorpus { languages, rows })
    }

    /// Tab-separated, header row of language codes.
    pub fn parse_tsv(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.is_empty());
        let header = lines
            .next()
            .ok_or_else(|| Error::InvalidInput("empty parallel corpus".into()))?;
        let languages = header.split('\t').map(|s| s.trim().to_owned()).collect();
        let rows = lines
            .map(|l| l.split('\t').map(str::to_owned).collect())
            .collect();
        Self::new(languages, rows)
    }

    pub fn read_tsv(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Read {
            path: path.to_owned(),
            source,
        })?;
        Self::parse_tsv(&text)
    }

    pub fn languages(&self) -> &[String] {
        &self.languages
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn column(&self, language: &str) -> Result<impl Iterator<Item = &str>> {
        let j = self
            .languages
            .iter()
            .position(|l| l == language)
            .ok_or_else(|| Error::MissingLanguage(language.to_owned()))?;
        Ok(self.rows.iter().map(move |r| r[j].as_str()))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FertilityResult {
    pub tokenizer: String,
    pub corpus: String,
    pub tokens: u64,
    pub words: u64,
    pub fertility: f64,
    /// Word-marker and special tokens are not counted.
    pub markers_excluded: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParityResult {
    pub tokenizer: String,
    pub lang_a: String,
    pub lang_b: String,
    pub tokens_a: u64,
    pub tokens_b: u64,
    pub premium: f64,
    pub markers_excluded: bool,
}

fn content_tokens<'a, I>(model: &TokenizerModel, texts: I) -> u64
where
    I: IntoParallelIterator<Item = &'a str>,
{
    texts
        .into_par_iter()
        .map(|t| model.count_content_tokens(t) as u64)
        .sum()
}

/// Content tokens per whitespace-delimited word over `texts`.
pub fn fertility<S: AsRef<str> + Sync>(
    model: &TokenizerModel,
    texts: &[S],
    tokenizer: &str,
    corpus: &str,
) -> Result<FertilityResult> {
    let words: u64 = texts.par_iter().map(|t| count_words(t.as_ref())).sum();
    if words == 0 {
        return Err(Error::ZeroWords);
    }
    let tokens = content_tokens(model, texts.par_iter().map(|t| t.as_ref()));
    Ok(FertilityResult {
        tokenizer: tokenizer.to_owned(),
        corpus: corpus.to_owned(),
        tokens,
        words,
        fertility: tokens as f64 / words as f64,
        markers_excluded: true,
    })
}

/// Corpus-level premium of `lang_a` relative to `lang_b`.
pub fn parity(
    model: &TokenizerModel,
    corpus: &ParallelCorpus,
    lang_a: &str,
    lang_b: &str,
    tokenizer: &str,
) -> Result<ParityResult> {
    let count = |lang: &str| -> Result<u64> {
        let col: Vec<&str> = corpus.column(lang)?.collect();
        Ok(content_tokens(model, col))
    };
    let tokens_a = count(lang_a)?;
    let tokens_b = if lang_a == lang_b {
        tokens_a
    } else {
        count(lang_b)?
    };
    if tokens_b == 0 {
        return Err(Error::ZeroTokens(lang_b.to_owned()));
    }
    Ok(ParityResult {
        tokenizer: tokenizer.to_owned(),
        lang_a: lang_a.to_owned(),
        lang_b: lang_b.to_owned(),
        tokens_a,
        tokens_b,
        premium: tokens_a as f64 / tokens_b as f64,
        markers_excluded: true,
    })
}

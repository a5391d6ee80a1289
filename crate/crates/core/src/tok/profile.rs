use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Meta symbol standing for a space in the SentencePiece-style profile.
pub const WORD_MARKER: char = '\u{2581}';

/// `<s>`, `</s>`, `<pad>`, `<eod>` and 255 placeholders `<ph_1>`..`<ph_255>`.
pub fn default_specials() -> Vec<String> {
    let mut specials: Vec<String> = ["<s>", "</s>", "<pad>", "<eod>"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    specials.extend((1..=255).map(|i| format!("<ph_{i}>")));
    specials
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProfileName {
    Sp,
    Hf,
}

impl fmt::Display for ProfileName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ProfileName::Sp => "SP",
            ProfileName::Hf => "HF",
        })
    }
}

impl FromStr for ProfileName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sp" | "sentencepiece" | "sp-profile" => Ok(ProfileName::Sp),
            "hf" | "huggingface" | "hf-profile" => Ok(ProfileName::Hf),
            _ => Err(Error::InvalidInput(format!("unknown profile {s:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Normalization {
    Nfkc,
}

/// Normalization and pre-tokenization settings mirroring one of the two
/// reference tokenizer libraries.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Profile {
    pub name: ProfileName,
    pub normalization: Normalization,
    pub strip_accents: bool,
    pub lowercase: bool,
    pub dummy_prefix: bool,
    pub digit_split: bool,
    pub byte_level_pretok: bool,
    pub byte_fallback: bool,
    pub limit_alphabet: Option<usize>,
    #[serde(skip, default = "default_specials")]
    pub specials: Vec<String>,
}

impl Profile {
    /// NFKC, dummy prefix, digit splitting, byte fallback.
    pub fn sentencepiece() -> Self {
        Profile {
            name: ProfileName::Sp,
            normalization: Normalization::Nfkc,
            strip_accents: false,
            lowercase: false,
            dummy_prefix: true,
            digit_split: true,
            byte_level_pretok: false,
            byte_fallback: true,
            limit_alphabet: None,
            specials: default_specials(),
        }
    }

    /// NFKC plus accent stripping, digit splitting, byte-level alphabet.
    pub fn huggingface() -> Self {
        Profile {
            name: ProfileName::Hf,
            normalization: Normalization::Nfkc,
            strip_accents: true,
            lowercase: false,
            dummy_prefix: false,
            digit_split: true,
            byte_level_pretok: true,
            byte_fallback: false,
            limit_alphabet: Some(512),
            specials: default_specials(),
        }
    }

    pub fn for_name(name: ProfileName) -> Self {
        match name {
            ProfileName::Sp => Self::sentencepiece(),
            ProfileName::Hf => Self::huggingface(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.byte_level_pretok == self.byte_fallback {
            return Err(Error::Config(
                "exactly one of byte_level_pretok and byte_fallback must be set".into(),
            ));
        }
        let mut seen = std::collections::HashSet::new();
        if let Some(dup) = self.specials.iter().find(|s| !seen.insert(s.as_str())) {
            return Err(Error::Config(format!("duplicate special token {dup:?}")));
        }
        if self.specials.iter().any(|s| s.is_empty()) {
            return Err(Error::Config("empty special token".into()));
        }
        Ok(())
    }
}

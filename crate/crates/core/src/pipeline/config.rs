//! Experiment configuration: one TOML file describing the whole grid.
//!
//! ```toml
//! name = "desk"
//!
//! [[source]]
//! name = "web"
//! language = "en"
//! path = "data/web_en.jsonl"   # relative to this file
//! share = 0.5
//!
//! [mixture]
//! total_words = 1_000_000
//!
//! [filter]                      # optional, defaults shown
//! drop_warnings = ["tiny", "noisy", "adult"]
//! harmful_threshold = 5.0
//! drop_missing_harmful = false
//!
//! [dedup]
//! seed = 1                      # required; other keys default
//!
//! [shuffle]
//! seed = 2
//!
//! [holdout]
//! documents = 1000
//! seed = 3
//!
//! [[tokenizer]]
//! algorithm = "bpe"             # or "unigram"
//! profile = "sp"                # or "hf"
//! vocab_size = 2000
//!
//! [training]                    # optional
//! character_coverage = 0.9999
//!
//! [evaluation]
//! parallel = "data/parallel.tsv"
//! pivot = "en"
//! scores = "data/scores.tsv"    # optional
//!
//! [cost]                        # optional, vocab comes from each tokenizer
//! batch = 1
//! ```

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::corpus::{MixtureSpec, QualityWarning};
use crate::cost::CostParams;
use crate::error::{Error, Result};
use crate::preprocess::{DedupParams, FilterPolicy};
use crate::tok::{Algorithm, Profile, ProfileName};
use crate::train::{TrainConfig, UnigramParams};
use crate::util;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceConfig {
    pub name: String,
    pub language: String,
    pub path: PathBuf,
    pub share: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixtureConfig {
    pub total_words: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FilterConfig {
    #[serde(default = "default_drop_warnings")]
    pub drop_warnings: BTreeSet<QualityWarning>,
    #[serde(default = "default_harmful_threshold")]
    pub harmful_threshold: f64,
    #[serde(default)]
    pub drop_missing_harmful: bool,
}

fn default_drop_warnings() -> BTreeSet<QualityWarning> {
    FilterPolicy::default().drop_warnings
}

fn default_harmful_threshold() -> f64 {
    FilterPolicy::default().harmful_threshold
}

impl Default for FilterConfig {
    fn default() -> Self {
        let p = FilterPolicy::default();
        FilterConfig {
            drop_warnings: p.drop_warnings,
            harmful_threshold: p.harmful_threshold,
            drop_missing_harmful: p.drop_missing_harmful,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DedupConfig {
    pub seed: u64,
    pub shingle_width: Option<usize>,
    pub num_perm: Option<usize>,
    pub bands: Option<usize>,
    pub rows: Option<usize>,
    pub jaccard_confirm: Option<f64>,
    pub per_language: Option<bool>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeedConfig {
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HoldoutConfig {
    pub documents: usize,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TokenizerEntry {
    /// Defaults to `ALG-PROFILE-VOCAB`, e.g. `BPE-SP-2000`.
    pub name: Option<String>,
    pub algorithm: Algorithm,
    pub profile: ProfileName,
    pub vocab_size: usize,
}

impl TokenizerEntry {
    pub fn display_name(&self) -> String {
        self.name
            .clone()
            .unwrap_or_else(|| format!("{}-{}-{}", self.algorithm, self.profile, self.vocab_size))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainingConfig {
    #[serde(default = "default_coverage")]
    pub character_coverage: f64,
    #[serde(default)]
    pub unigram: UnigramParams,
}

fn default_coverage() -> f64 {
    0.9999
}

impl Default for TrainingConfig {
    fn default() -> Self {
        TrainingConfig {
            character_coverage: default_coverage(),
            unigram: UnigramParams::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvaluationConfig {
    pub parallel: PathBuf,
    pub pivot: String,
    pub scores: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostConfig {
    pub batch: u64,
    pub seq_len: u64,
    pub layers: u64,
    pub hidden: u64,
}

impl Default for CostConfig {
    fn default() -> Self {
        let p = CostParams::default();
        CostConfig {
            batch: p.batch,
            seq_len: p.seq_len,
            layers: p.layers,
            hidden: p.hidden,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    #[serde(rename = "source")]
    pub sources: Vec<SourceConfig>,
    pub mixture: MixtureConfig,
    #[serde(default)]
    pub filter: FilterConfig,
    pub dedup: DedupConfig,
    pub shuffle: SeedConfig,
    pub holdout: HoldoutConfig,
    #[serde(rename = "tokenizer")]
    pub tokenizers: Vec<TokenizerEntry>,
    #[serde(default)]
    pub training: TrainingConfig,
    pub evaluation: EvaluationConfig,
    #[serde(default)]
    pub cost: CostConfig,
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Checks everything that can be checked without touching the file system.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.name.is_empty() || self.name.contains(['/', '\\']) || self.name.starts_with('.') {
            return bad(format!(
                "run name {:?} must be a plain directory name",
                self.name
            ));
        }
        if self.sources.is_empty() {
            return bad("at least one [[source]] is required".into());
        }
        let mut names = BTreeSet::new();
        for s in &self.sources {
            if !names.insert(s.name.as_str()) {
                return bad(format!("source {:?} is listed twice", s.name));
            }
        }
        self.mixture_spec()?;
        if !self.filter.harmful_threshold.is_finite() {
            return bad("filter.harmful_threshold must be finite".into());
        }
        self.dedup_params().validate()?;
        if self.tokenizers.is_empty() {
            return bad("the tokenizer grid is empty".into());
        }
        let mut tok_names = BTreeSet::new();
        for t in &self.tokenizers {
            let name = t.display_name();
            if name.is_empty() || name.contains(['/', '\\', '\t', '\n']) || name.starts_with('.') {
                return bad(format!(
                    "tokenizer name {name:?} is not usable as a file name"
                ));
            }
            if !tok_names.insert(name.clone()) {
                return bad(format!("tokenizer {name:?} appears twice in the grid"));
            }
            self.train_config(t).validate()?;
        }
        if self.holdout.documents == 0 {
            return bad("holdout.documents must be positive".into());
        }
        self.cost_params(1).validate()
    }

    pub fn mixture_spec(&self) -> Result<MixtureSpec> {
        let shares: Vec<(String, String, f64)> = self
            .sources
            .iter()
            .map(|s| (s.name.clone(), s.language.clone(), s.share))
            .collect();
        MixtureSpec::from_shares(self.mixture.total_words, &shares)
    }

    pub fn filter_policy(&self) -> FilterPolicy {
        FilterPolicy {
            drop_warnings: self.filter.drop_warnings.clone(),
            harmful_threshold: self.filter.harmful_threshold,
            drop_missing_harmful: self.filter.drop_missing_harmful,
        }
    }

    pub fn dedup_params(&self) -> DedupParams {
        let d = DedupParams::default();
        let c = &self.dedup;
        DedupParams {
            shingle_width: c.shingle_width.unwrap_or(d.shingle_width),
            num_perm: c.num_perm.unwrap_or(d.num_perm),
            seed: c.seed,
            bands: c.bands.unwrap_or(d.bands),
            rows: c.rows.unwrap_or(d.rows),
            jaccard_confirm: c.jaccard_confirm.unwrap_or(d.jaccard_confirm),
            per_language: c.per_language.unwrap_or(d.per_language),
        }
    }

    pub fn train_config(&self, t: &TokenizerEntry) -> TrainConfig {
        let mut cfg = TrainConfig::new(t.algorithm, Profile::for_name(t.profile), t.vocab_size);
        cfg.character_coverage = self.training.character_coverage;
        cfg.unigram = self.training.unigram.clone();
        cfg
    }

    pub fn cost_params(&self, vocab: u64) -> CostParams {
        CostParams {
            batch: self.cost.batch,
            seq_len: self.cost.seq_len,
            layers: self.cost.layers,
            hidden: self.cost.hidden,
            vocab,
        }
    }

    /// Digest of the parsed configuration, independent of formatting and
    /// comments in the file.
    pub fn digest(&self) -> String {
        util::sha256_hex(&serde_json::to_vec(self).expect("config serializes"))
    }
}

/// A parsed config together with the directory its relative paths resolve
/// against.
#[derive(Clone, Debug)]
pub struct LoadedConfig {
    pub config: ExperimentConfig,
    pub base_dir: PathBuf,
}

impl LoadedConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Read {
            path: path.to_owned(),
            source,
        })?;
        let config = ExperimentConfig::parse(&text)?;
        let base_dir = path.parent().map(Path::to_owned).unwrap_or_default();
        Ok(LoadedConfig { config, base_dir })
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_owned()
        } else {
            self.base_dir.join(p)
        }
    }

    /// Every referenced input path must exist.
    pub fn check_paths(&self) -> Result<()> {
        let c = &self.config;
        let mut paths: Vec<&Path> = c.sources.iter().map(|s| s.path.as_path()).collect();
        paths.push(&c.evaluation.parallel);
        if let Some(s) = &c.evaluation.scores {
            paths.push(s);
        }
        for p in paths {
            let full = self.resolve(p);
            if !full.is_file() {
                return Err(Error::Config(format!(
                    "input {} does not exist",
                    full.display()
                )));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
name = "t"
[[source]]
name = "web"
language = "en"
path = "web.jsonl"
share = 1.0
[mixture]
total_words = 100
[dedup]
seed = 1
[shuffle]
seed = 2
[holdout]
documents = 2
seed = 3
[[tokenizer]]
algorithm = "bpe"
profile = "sp"
vocab_size = 300
[evaluation]
parallel = "p.tsv"
pivot = "en"
"#;

    #[test]
    fn minimal_config_parses_with_defaults() {
        let c = ExperimentConfig::parse(MINIMAL).unwrap();
        assert_eq!(c.filter_policy(), FilterPolicy::default());
        assert_eq!(c.dedup_params().seed, 1);
        assert_eq!(c.tokenizers[0].display_name(), "BPE-SP-300");
        assert_eq!(c.cost_params(7).seq_len, 2048);
    }

    #[test]
    fn seeds_are_required() {
        let without = MINIMAL.replace("[shuffle]\nseed = 2\n", "[shuffle]\n");
        assert!(matches!(
            ExperimentConfig::parse(&without),
            Err(Error::Config(_))
        ));
        let without = MINIMAL.replace("[dedup]\nseed = 1\n", "[dedup]\n");
        assert!(ExperimentConfig::parse(&without).is_err());
    }

    #[test]
    fn rejects_bad_grids() {
        let empty = MINIMAL.replace(
            "[[tokenizer]]\nalgorithm = \"bpe\"\nprofile = \"sp\"\nvocab_size = 300\n",
            "",
        );
        assert!(ExperimentConfig::parse(&empty).is_err());
        let dup = format!(
            "{MINIMAL}\n[[tokenizer]]\nalgorithm = \"bpe\"\nprofile = \"sp\"\nvocab_size = 300\n"
        );
        // The second entry lands after [evaluation], which toml accepts.
        assert!(ExperimentConfig::parse(&dup).is_err());
        assert!(
            ExperimentConfig::parse(&MINIMAL.replace("vocab_size = 300", "vocab_size = 0"))
                .is_err()
        );
        assert!(ExperimentConfig::parse(&format!("{MINIMAL}\nbogus = 1\n")).is_err());
    }

    #[test]
    fn digest_ignores_formatting() {
        let a = ExperimentConfig::parse(MINIMAL).unwrap();
        let b = ExperimentConfig::parse(&format!("# comment\n{MINIMAL}")).unwrap();
        assert_eq!(a.digest(), b.digest());
        let c = ExperimentConfig::parse(&MINIMAL.replace("seed = 3", "seed = 4")).unwrap();
        assert_ne!(a.digest(), c.digest());
    }
}

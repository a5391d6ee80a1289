use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::corpus::{Document, QualityWarning};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FilterPolicy {
    pub drop_warnings: BTreeSet<QualityWarning>,
    /// Documents whose harmful perplexity is strictly below this are dropped.
    pub harmful_threshold: f64,
    pub drop_missing_harmful: bool,
}

impl Default for FilterPolicy {
    /// Drops whole-document defects (`tiny`, `noisy`, `adult`) and anything
    /// with a harmful perplexity below 5.
    fn default() -> Self {
        FilterPolicy {
            drop_warnings: [
                QualityWarning::Tiny,
                QualityWarning::Noisy,
                QualityWarning::Adult,
            ]
            .into_iter()
            .collect(),
            harmful_threshold: 5.0,
            drop_missing_harmful: false,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum DropReason {
    Warning(QualityWarning),
    HarmfulPerplexity,
    MissingHarmfulPerplexity,
}

impl fmt::Display for DropReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DropReason::Warning(w) => write!(f, "{w}"),
            DropReason::HarmfulPerplexity => f.write_str("harmful_ppl"),
            DropReason::MissingHarmfulPerplexity => f.write_str("missing_harmful_ppl"),
        }
    }
}

/// First rule that fires, checking warnings (in label order), then the
/// perplexity threshold, then the missing-score rule.
pub fn drop_reason(doc: &Document, policy: &FilterPolicy) -> Option<DropReason> {
    if let Some(w) = doc
        .quality_warnings
        .iter()
        .find(|w| policy.drop_warnings.contains(w))
    {
        return Some(DropReason::Warning(*w));
    }
    match doc.harmful_ppl {
        Some(p) if p < policy.harmful_threshold => Some(DropReason::HarmfulPerplexity),
        None if policy.drop_missing_harmful => Some(DropReason::MissingHarmfulPerplexity),
        _ => None,
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct FilterTally {
    pub kept: u64,
    pub dropped: u64,
    pub by_reason: BTreeMap<String, u64>,
}

pub fn filter<I>(docs: I, policy: &FilterPolicy) -> (Vec<Document>, FilterTally)
where
    I: IntoIterator<Item = Document>,
{
    let mut tally = FilterTally::default();
    let mut kept = Vec::new();
    for doc in docs {
        match drop_reason(&doc, policy) {
            Some(reason) => {
                tally.dropped += 1;
                *tally.by_reason.entry(reason.to_string()).or_default() += 1;
            }
            None => {
                tally.kept += 1;
                kept.push(doc);
            }
        }
    }
    (kept, tally)
}

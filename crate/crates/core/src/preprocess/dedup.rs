use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::minhash::{lsh_candidates, shingles, MinHashSignature, MinHasher, ShingleSet};
use crate::corpus::{DocId, Document};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DedupParams {
    pub shingle_width: usize,
    pub num_perm: usize,
    pub seed: u64,
    pub bands: usize,
    pub rows: usize,
    pub jaccard_confirm: f64,
    /// Only pair documents that share a language.
    pub per_language: bool,
}

impl Default for DedupParams {
    /// Word 5-grams, 128 permutations in 16 bands of 8 rows (LSH threshold
    /// near 0.71), confirmed at exact Jaccard 0.8.
    fn default() -> Self {
        DedupParams {
            shingle_width: 5,
            num_perm: 128,
            seed: 0,
            bands: 16,
            rows: 8,
            jaccard_confirm: 0.8,
            per_language: false,
        }
    }
}

impl DedupParams {
    pub fn validate(&self) -> Result<()> {
        if self.shingle_width == 0 || self.num_perm == 0 {
            return Err(Error::Config(
                "shingle_width and num_perm must be positive".into(),
            ));
        }
        if self.bands * self.rows != self.num_perm {
            return Err(Error::BandMismatch {
                bands: self.bands,
                rows: self.rows,
                num_perm: self.num_perm,
            });
        }
        if !(0.0..=1.0).contains(&self.jaccard_confirm) {
            return Err(Error::Config("jaccard_confirm must lie in [0, 1]".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DedupCluster {
    pub kept: DocId,
    /// All members in corpus order, `kept` first.
    pub members: Vec<DocId>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DedupReport {
    pub candidate_pairs: u64,
    pub confirmed_pairs: u64,
    pub clusters: Vec<DedupCluster>,
    pub removed_docs: u64,
}

struct DisjointSet {
    parent: Vec<u32>,
}

impl DisjointSet {
    fn new(n: usize) -> Self {
        DisjointSet {
            parent: (0..n as u32).collect(),
        }
    }

    fn find(&mut self, mut x: u32) -> u32 {
        while self.parent[x as usize] != x {
            let p = self.parent[x as usize];
            self.parent[x as usize] = self.parent[p as usize];
            x = p;
        }
        x
    }

    /// Keeps the smaller index as root, so a root is always its set's
    /// earliest corpus position.
    fn union(&mut self, a: u32, b: u32) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent[hi as usize] = lo;
        }
    }
}

/// Confirmed near-duplicate pairs `(i, j, jaccard)` by corpus position.
pub struct DedupAnalysis {
    pub candidates: Vec<(u32, u32)>,
    pub confirmed: Vec<(u32, u32, f64)>,
}

/// Candidate generation and exact confirmation without touching the corpus.
pub fn find_duplicates(corpus: &[Document], params: &DedupParams) -> Result<DedupAnalysis> {
    params.validate()?;
    let hasher = MinHasher::new(params.num_perm, params.seed);
    let sets: Vec<ShingleSet> = corpus
        .par_iter()
        .map(|d| shingles(&d.text, params.shingle_width))
        .collect();
    // Documents with no words have no signature and are never paired.
    let indexed: Vec<(u32, MinHashSignature)> = sets
        .par_iter()
        .enumerate()
        .filter_map(|(i, s)| hasher.signature(s).ok().map(|sig| (i as u32, sig)))
        .collect();
    let (positions, signatures): (Vec<u32>, Vec<MinHashSignature>) = indexed.into_iter().unzip();
    let mut candidates: Vec<(u32, u32)> = lsh_candidates(&signatures, params.bands, params.rows)?
        .into_iter()
        .map(|(a, b)| (positions[a as usize], positions[b as usize]))
        .collect();
    if params.per_language {
        candidates.retain(|&(a, b)| corpus[a as usize].language == corpus[b as usize].language);
    }
    let confirmed: Vec<(u32, u32, f64)> = candidates
        .par_iter()
        .filter_map(|&(a, b)| {
            let j = sets[a as usize].jaccard(&sets[b as usize]);
            (j >= params.jaccard_confirm).then_some((a, b, j))
        })
        .collect();
    Ok(DedupAnalysis {
        candidates,
        confirmed,
    })
}

/// Removes near-duplicates: LSH candidates confirmed by exact Jaccard are
/// clustered, and each cluster keeps only its earliest document. Survivors
/// keep their relative order.
pub fn dedup(corpus: Vec<Document>, params: &DedupParams) -> Result<(Vec<Document>, DedupReport)> {
    let analysis = find_duplicates(&corpus, params)?;
    let mut sets = DisjointSet::new(corpus.len());
    for &(a, b, _) in &analysis.confirmed {
        sets.union(a, b);
    }
    let mut members: Vec<Vec<u32>> = vec![Vec::new(); corpus.len()];
    let mut touched: Vec<u32> = analysis
        .confirmed
        .iter()
        .flat_map(|&(a, b, _)| [a, b])
        .collect();
    touched.sort_unstable();
    touched.dedup();
    for i in touched {
        let root = sets.find(i);
        members[root as usize].push(i);
    }
    let mut removed = vec![false; corpus.len()];
    let mut clusters = Vec::new();
    for (root, group) in members.iter().enumerate() {
        if group.len() < 2 {
            continue;
        }
        debug_assert_eq!(group[0] as usize, root);
        for &m in &group[1..] {
            removed[m as usize] = true;
        }
        clusters.push(DedupCluster {
            kept: corpus[root].id,
            members: group.iter().map(|&m| corpus[m as usize].id).collect(),
        });
    }
    let survivors: Vec<Document> = corpus
        .into_iter()
        .zip(&removed)
        .filter_map(|(d, &r)| (!r).then_some(d))
        .collect();
    let report = DedupReport {
        candidate_pairs: analysis.candidates.len() as u64,
        confirmed_pairs: analysis.confirmed.len() as u64,
        removed_docs: removed.iter().filter(|&&r| r).count() as u64,
        clusters,
    };
    Ok((survivors, report))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn doc(i: u64, text: &str) -> Document {
        Document::new("s", "en", i, text.to_owned())
    }

    fn long_text(seed: u64, words: usize) -> String {
        (0..words)
            .map(|i| format!("w{}", (seed * 7919 + i as u64 * 104729) % 100_003))
            .collect::<Vec<_>>()
            .join(" ")
    }

    #[test]
    fn identical_documents_collapse() {
        let text = long_text(1, 40);
        let corpus = vec![doc(0, &text), doc(1, &text), doc(2, &text)];
        let first = corpus[0].id;
        let (kept, report) = dedup(corpus, &DedupParams::default()).unwrap();
        assert_eq!(kept.len(), 1);
        assert_eq!(kept[0].id, first);
        assert_eq!(report.clusters.len(), 1);
        assert_eq!(report.clusters[0].members.len(), 3);
        assert_eq!(report.removed_docs, 2);
    }

    #[test]
    fn distinct_documents_untouched() {
        let corpus: Vec<_> = (0..20).map(|i| doc(i, &long_text(i + 1, 30))).collect();
        let (kept, report) = dedup(corpus.clone(), &DedupParams::default()).unwrap();
        assert_eq!(kept, corpus);
        assert!(report.clusters.is_empty());
    }

    #[test]
    fn per_language_option_separates_languages() {
        let text = long_text(3, 40);
        let mut other = doc(1, &text);
        other.language = "de".into();
        let corpus = vec![doc(0, &text), other];
        let params = DedupParams {
            per_language: true,
            ..DedupParams::default()
        };
        assert_eq!(dedup(corpus.clone(), &params).unwrap().0.len(), 2);
        assert_eq!(dedup(corpus, &DedupParams::default()).unwrap().0.len(), 1);
    }

    #[test]
    fn whitespace_only_documents_are_ignored() {
        let corpus = vec![doc(0, "  "), doc(1, "  "), doc(2, &long_text(9, 10))];
        assert_eq!(dedup(corpus, &DedupParams::default()).unwrap().0.len(), 3);
    }

    #[test]
    fn invalid_banding_rejected() {
        let params = DedupParams {
            bands: 10,
            ..DedupParams::default()
        };
        assert!(matches!(
            dedup(vec![doc(0, "a")], &params),
            Err(Error::BandMismatch { .. })
        ));
    }
}

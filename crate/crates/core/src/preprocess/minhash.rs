//! Word-shingle sets, MinHash signatures and LSH banding.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use xxhash_rust::xxh3::xxh3_64;

use crate::error::{Error, Result};
use crate::util;

const MERSENNE_61: u64 = (1 << 61) - 1;

/// Sorted, de-duplicated shingle hashes of one document.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ShingleSet(Vec<u64>);

impl ShingleSet {
    pub fn from_hashes(mut hashes: Vec<u64>) -> Self {
        hashes.sort_unstable();
        hashes.dedup();
        ShingleSet(hashes)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn hashes(&self) -> &[u64] {
        &self.0
    }

    /// Exact Jaccard similarity.
    pub fn jaccard(&self, other: &ShingleSet) -> f64 {
        let (a, b) = (&self.0, &other.0);
        if a.is_empty() && b.is_empty() {
            return 1.0;
        }
        let (mut i, mut j, mut inter) = (0, 0, 0usize);
        while i < a.len() && j < b.len() {
            match a[i].cmp(&b[j]) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    inter += 1;
                    i += 1;
                    j += 1;
                }
            }
        }
        inter as f64 / (a.len() + b.len() - inter) as f64
    }
}

/// Hashes of every `k`-gram of casefolded whitespace-split words. A text
/// with fewer than `k` words (but at least one) yields a single hash of the
/// whole word sequence.
pub fn shingles(text: &str, k: usize) -> ShingleSet {
    assert!(k >= 1, "shingle width must be positive");
    let words: Vec<String> = text.split_whitespace().map(str::to_lowercase).collect();
    if words.is_empty() {
        return ShingleSet::default();
    }
    let hash = |ws: &[String]| xxh3_64(ws.join("\u{1f}").as_bytes());
    if words.len() < k {
        return ShingleSet(vec![hash(&words)]);
    }
    ShingleSet::from_hashes(words.windows(k).map(hash).collect())
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MinHashSignature {
    pub values: Vec<u64>,
    pub num_perm: usize,
    pub seed: u64,
}

impl MinHashSignature {
    /// Fraction of agreeing components: the MinHash Jaccard estimate.
    pub fn agreement(&self, other: &MinHashSignature) -> f64 {
        assert_eq!(self.num_perm, other.num_perm);
        let same = self
            .values
            .iter()
            .zip(&other.values)
            .filter(|(a, b)| a == b)
            .count();
        same as f64 / self.num_perm as f64
    }
}

/// SplitMix64 finalizer. Linear hashes alone are far from min-wise on
/// structured inputs (arithmetic progressions), so inputs are mixed first.
#[inline]
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[inline]
fn mod_mersenne(x: u128) -> u64 {
    let lo = (x as u64) & MERSENNE_61;
    let hi = (x >> 61) as u64;
    let mut r = lo + (hi & MERSENNE_61) + (hi >> 61);
    while r >= MERSENNE_61 {
        r -= MERSENNE_61;
    }
    r
}

/// A family of `num_perm` universal hashes `(a*x + b) mod (2^61 - 1)` with
/// coefficients drawn from xoshiro256** seeded by `seed`.
#[derive(Clone, Debug)]
pub struct MinHasher {
    seed: u64,
    coeffs: Vec<(u64, u64)>,
}

impl MinHasher {
    pub fn new(num_perm: usize, seed: u64) -> Self {
        assert!(num_perm > 0, "num_perm must be positive");
        let mut rng = util::seeded_rng(seed);
        let coeffs = (0..num_perm)
            .map(|_| {
                let a = 1 + util::uniform_below(&mut rng, MERSENNE_61 - 1);
                let b = util::uniform_below(&mut rng, MERSENNE_61);
                (a, b)
            })
            .collect();
        MinHasher { seed, coeffs }
    }

    pub fn num_perm(&self) -> usize {
        self.coeffs.len()
    }

    pub fn signature(&self, shingles: &ShingleSet) -> Result<MinHashSignature> {
        if shingles.is_empty() {
            return Err(Error::EmptyShingleSet);
        }
        let mut values = vec![u64::MAX; self.coeffs.len()];
        for &h in shingles.hashes() {
            let x = (mix64(h) % MERSENNE_61) as u128;
            for (v, &(a, b)) in values.iter_mut().zip(&self.coeffs) {
                let hv = mod_mersenne(a as u128 * x + b as u128);
                if hv < *v {
                    *v = hv;
                }
            }
        }
        Ok(MinHashSignature {
            values,
            num_perm: self.coeffs.len(),
            seed: self.seed,
        })
    }
}

pub fn minhash(shingles: &ShingleSet, num_perm: usize, seed: u64) -> Result<MinHashSignature> {
    MinHasher::new(num_perm, seed).signature(shingles)
}

/// Index pairs `(i, j)`, `i < j`, whose signatures agree on at least one band
/// of `rows` consecutive components. Sorted and unique.
pub fn lsh_candidates(
    signatures: &[MinHashSignature],
    bands: usize,
    rows: usize,
) -> Result<Vec<(u32, u32)>> {
    let Some(first) = signatures.first() else {
        return Ok(Vec::new());
    };
    let num_perm = first.num_perm;
    if bands * rows != num_perm || bands == 0 {
        return Err(Error::BandMismatch {
            bands,
            rows,
            num_perm,
        });
    }
    if signatures.iter().any(|s| s.num_perm != num_perm) {
        return Err(Error::InvalidInput("signatures differ in num_perm".into()));
    }
    let mut pairs: Vec<(u32, u32)> = (0..bands)
        .into_par_iter()
        .flat_map_iter(|band| {
            let range = band * rows..(band + 1) * rows;
            let mut buckets: HashMap<&[u64], Vec<u32>> = HashMap::new();
            for (i, sig) in signatures.iter().enumerate() {
                buckets
                    .entry(&sig.values[range.clone()])
                    .or_default()
                    .push(i as u32);
            }
            let mut out = Vec::new();
            for members in buckets.values().filter(|m| m.len() > 1) {
                for (x, &a) in members.iter().enumerate() {
                    for &b in &members[x + 1..] {
                        out.push((a, b));
                    }
                }
            }
            out
        })
        .collect();
    pairs.par_sort_unstable();
    pairs.dedup();
    Ok(pairs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_core::Rng;

    fn random_id_set(rng: &mut impl Rng, size: usize) -> Vec<u64> {
        (0..size).map(|_| rng.next_u64()).collect()
    }

    fn set(xs: &[u64]) -> ShingleSet {
        ShingleSet::from_hashes(xs.to_vec())
    }

    #[test]
    fn shingle_examples() {
        assert_eq!(shingles("a b c", 2).len(), 2);
        assert_eq!(shingles("a a a a", 2).len(), 1);
        assert_eq!(shingles("a b", 5).len(), 1);
        assert!(shingles("   ", 3).is_empty());
        assert_eq!(shingles("A B c", 2), shingles("a b C", 2));
        assert_ne!(shingles("a b", 5), shingles("a", 5));
    }

    #[test]
    fn equal_sets_equal_signatures() {
        let s = shingles("the quick brown fox jumps over the lazy dog", 3);
        assert_eq!(
            minhash(&s, 64, 3).unwrap(),
            minhash(&s.clone(), 64, 3).unwrap()
        );
        assert_ne!(minhash(&s, 64, 3).unwrap(), minhash(&s, 64, 4).unwrap());
    }

    #[test]
    fn empty_set_rejected() {
        assert!(matches!(
            minhash(&ShingleSet::default(), 8, 0),
            Err(Error::EmptyShingleSet)
        ));
    }

    #[test]
    fn half_overlap_estimate() {
        // {a,b,c} vs {b,c,d}: exact Jaccard 2/4.
        let (a, b) = (set(&[11, 22, 33]), set(&[22, 33, 44]));
        assert_eq!(a.jaccard(&b), 0.5);
        let h = MinHasher::new(512, 2024);
        let est = h
            .signature(&a)
            .unwrap()
            .agreement(&h.signature(&b).unwrap());
        assert!((est - 0.5).abs() <= 0.07, "estimate {est}");
    }

    #[test]
    fn disjoint_sets_rarely_agree() {
        let mut rng = util::seeded_rng(5);
        let h = MinHasher::new(128, 77);
        for _ in 0..20 {
            let a = set(&random_id_set(&mut rng, 50));
            let b = set(&random_id_set(&mut rng, 50));
            let agree = h
                .signature(&a)
                .unwrap()
                .agreement(&h.signature(&b).unwrap());
            assert!(agree <= 3.0 / 128.0);
        }
    }

    #[test]
    fn mersenne_reduction() {
        let p = MERSENNE_61 as u128;
        for x in [
            0u128,
            1,
            p - 1,
            p,
            p + 1,
            p * p - 1,
            (p - 1) * (p - 1) + p - 1,
        ] {
            assert_eq!(mod_mersenne(x) as u128, x % p);
        }
    }

    #[test]
    fn lsh_band_rules() {
        let sig = |values: Vec<u64>| MinHashSignature {
            num_perm: values.len(),
            values,
            seed: 0,
        };
        let a = sig((0..8).collect());
        let b = sig((0..8).collect());
        let c = sig((100..108).collect());
        assert_eq!(
            lsh_candidates(&[a.clone(), b, c.clone()], 4, 2).unwrap(),
            vec![(0, 1)]
        );
        assert!(lsh_candidates(&[a.clone(), c], 4, 2).unwrap().is_empty());
        // One band agreeing is enough.
        let mut d = a.clone();
        for v in &mut d.values[2..] {
            *v += 1000;
        }
        assert_eq!(lsh_candidates(&[a.clone(), d], 4, 2).unwrap(), vec![(0, 1)]);
        assert!(matches!(
            lsh_candidates(&[a], 3, 2),
            Err(Error::BandMismatch { .. })
        ));
    }
}

//! Segmentation lattice over the characters of one pre-token.

use std::collections::HashMap;

/// Scored piece inventory. Ids index `logp`; a single character without a
/// piece of its own is covered by an "unknown" edge scored `unk_score`.
#[derive(Clone, Debug)]
pub struct PieceTable {
    index: HashMap<String, u32>,
    logp: Vec<f64>,
    max_chars: usize,
    unk_score: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Edge {
    /// Byte range within the pre-token.
    pub start: usize,
    pub end: usize,
    /// `None` for an unknown-character edge.
    pub piece: Option<u32>,
}

impl PieceTable {
    /// `logp` is indexed by id; ids missing from `pieces` are never looked up.
    pub fn new(
        pieces: impl IntoIterator<Item = (String, u32)>,
        logp: Vec<f64>,
        unk_score: f64,
    ) -> Self {
        let index: HashMap<String, u32> = pieces.into_iter().collect();
        let max_chars = index.keys().map(|k| k.chars().count()).max().unwrap_or(1);
        PieceTable {
            index,
            logp,
            max_chars,
            unk_score,
        }
    }

    pub fn unk_score(&self) -> f64 {
        self.unk_score
    }

    /// Calls `f(end_char, edge, score)` for every edge leaving char `i`.
    fn for_each_edge(
        &self,
        word: &str,
        offsets: &[usize],
        i: usize,
        exclude: Option<u32>,
        mut f: impl FnMut(usize, Edge, f64),
    ) {
        let n = offsets.len() - 1;
        let mut has_single = false;
        for len in 1..=self.max_chars.min(n - i) {
            let (s, e) = (offsets[i], offsets[i + len]);
            if let Some(&id) = self.index.get(&word[s..e]) {
                if len == 1 {
                    has_single = true;
                }
                if Some(id) == exclude {
                    continue;
                }
                let lp = self.logp[id as usize];
                if lp > f64::NEG_INFINITY {
                    f(
                        i + len,
                        Edge {
                            start: s,
                            end: e,
                            piece: Some(id),
                        },
                        lp,
                    );
                }
            }
        }
        if !has_single {
            f(
                i + 1,
                Edge {
                    start: offsets[i],
                    end: offsets[i + 1],
                    piece: None,
                },
                self.unk_score,
            );
        }
    }
}

fn char_offsets(word: &str) -> Vec<usize> {
    word.char_indices()
        .map(|(i, _)| i)
        .chain(std::iter::once(word.len()))
        .collect()
}

/// Highest-scoring segmentation, optionally forbidding one piece. Ties keep
/// the earliest-found path. Returns `(-inf, [])` when no segmentation exists.
pub fn viterbi(table: &PieceTable, word: &str, exclude: Option<u32>) -> (f64, Vec<Edge>) {
    let offsets = char_offsets(word);
    let n = offsets.len() - 1;
    if n == 0 {
        return (0.0, Vec::new());
    }
    let mut best = vec![f64::NEG_INFINITY; n + 1];
    let mut back: Vec<Option<(usize, Edge)>> = vec![None; n + 1];
    best[0] = 0.0;
    for i in 0..n {
        if best[i] == f64::NEG_INFINITY {
            continue;
        }
        let base = best[i];
        table.for_each_edge(word, &offsets, i, exclude, |j, edge, lp| {
            let s = base + lp;
            if s > best[j] {
                best[j] = s;
                back[j] = Some((i, edge));
            }
        });
    }
    if best[n] == f64::NEG_INFINITY {
        return (f64::NEG_INFINITY, Vec::new());
    }
    let mut path = Vec::new();
    let mut j = n;
    while j > 0 {
        let (i, edge) = back[j].expect("reachable node has a back pointer");
        path.push(edge);
        j = i;
    }
    path.reverse();
    (best[n], path)
}

fn log_add(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// Forward-backward over the lattice: adds `weight` times each piece's
/// posterior occurrence count into `expected` and returns the log marginal
/// likelihood of `word`.
pub fn accumulate_marginals(
    table: &PieceTable,
    word: &str,
    weight: f64,
    expected: &mut [f64],
) -> f64 {
    let offsets = char_offsets(word);
    let n = offsets.len() - 1;
    if n == 0 {
        return 0.0;
    }
    let mut edges: Vec<(usize, usize, Option<u32>, f64)> = Vec::new();
    for i in 0..n {
        table.for_each_edge(word, &offsets, i, None, |j, edge, lp| {
            edges.push((i, j, edge.piece, lp));
        });
    }
    let mut alpha = vec![f64::NEG_INFINITY; n + 1];
    alpha[0] = 0.0;
    // Edges are generated in increasing start order.
    for &(i, j, _, lp) in &edges {
        alpha[j] = log_add(alpha[j], alpha[i] + lp);
    }
    let mut beta = vec![f64::NEG_INFINITY; n + 1];
    beta[n] = 0.0;
    for &(i, j, _, lp) in edges.iter().rev() {
        beta[i] = log_add(beta[i], beta[j] + lp);
    }
    let z = alpha[n];
    if !z.is_finite() {
        return z;
    }
    for &(i, j, piece, lp) in &edges {
        if let Some(id) = piece {
            let post = (alpha[i] + lp + beta[j] - z).exp();
            expected[id as usize] += weight * post;
        }
    }
    z
}

/// Log marginal likelihood of `word` (forward pass only).
pub fn log_marginal(table: &PieceTable, word: &str) -> f64 {
    let offsets = char_offsets(word);
    let n = offsets.len() - 1;
    let mut alpha = vec![f64::NEG_INFINITY; n + 1];
    alpha[0] = 0.0;
    for i in 0..n {
        if alpha[i] == f64::NEG_INFINITY {
            continue;
        }
        let a = alpha[i];
        table.for_each_edge(word, &offsets, i, None, |j, _, lp| {
            alpha[j] = log_add(alpha[j], a + lp);
        });
    }
    alpha[n]
}

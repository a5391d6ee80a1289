//! Downstream score aggregation and rank correlation.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoreRow {
    pub model: String,
    pub task: String,
    pub language: String,
    pub accuracy: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ScoreTable {
    rows: Vec<ScoreRow>,
}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|source| Error::Read {
        path: path.to_owned(),
        source,
    })
}

/// Non-empty, non-comment lines split on tabs, after a header that must
/// start with `expected`.
fn tsv_records<'a>(text: &'a str, expected: &[&str]) -> Result<Vec<(usize, Vec<&'a str>)>> {
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty() && !l.starts_with('#'));
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::InvalidInput("table is empty".into()))?;
    let cols: Vec<&str> = header.split('\t').map(str::trim).collect();
    if cols.len() < expected.len()
        || !cols
            .iter()
            .zip(expected)
            .all(|(a, b)| a.eq_ignore_ascii_case(b))
    {
        return Err(Error::InvalidInput(format!(
            "header must begin with {}",
            expected.join(", ")
        )));
    }
    Ok(lines
        .map(|(i, l)| (i + 1, l.split('\t').map(str::trim).collect()))
        .collect())
}

impl ScoreTable {
    /// Rows must have accuracies in [0, 1] and be unique per
    /// (model, task, language).
    pub fn new(rows: Vec<ScoreRow>) -> Result<Self> {
        let mut seen = HashSet::new();
        for r in &rows {
            if !(0.0..=1.0).contains(&r.accuracy) {
                return Err(Error::InvalidInput(format!(
                    "accuracy {} for {}/{}/{} outside [0, 1]",
                    r.accuracy, r.model, r.task, r.language
                )));
            }
            if !seen.insert((&r.model, &r.task, &r.language)) {
                return Err(Error::InvalidInput(format!(
                    "duplicate score for {}/{}/{}",
                    r.model, r.task, r.language
                )));
            }
        }
        Ok(ScoreTable { rows })
    }

    /// Header `model  task  language  accuracy`, tab-separated.
    pub fn parse_tsv(text: &str) -> Result<Self> {
        let mut rows = Vec::new();
        for (line, f) in tsv_records(text, &["model", "task", "language", "accuracy"])? {
            if f.len() != 4 {
                return Err(Error::InvalidInput(format!(
                    "line {line}: expected 4 columns"
                )));
            }
            let accuracy = f[3].parse().map_err(|_| {
                Error::InvalidInput(format!("line {line}: bad accuracy {:?}", f[3]))
            })?;
            rows.push(ScoreRow {
                model: f[0].into(),
                task: f[1].into(),
                language: f[2].into(),
                accuracy,
            });
        }
        Self::new(rows)
    }

    pub fn read_tsv(path: &Path) -> Result<Self> {
        Self::parse_tsv(&read_text(path)?)
    }

    pub fn rows(&self) -> &[ScoreRow] {
        &self.rows
    }

    pub fn models(&self) -> BTreeSet<&str> {
        self.rows.iter().map(|r| r.model.as_str()).collect()
    }
}

/// Mean over languages of the per-language mean over tasks, so every
/// language weighs the same however many tasks it has.
pub fn weighted_average(table: &ScoreTable, model: &str) -> Result<f64> {
    let mut by_lang: BTreeMap<&str, (f64, usize)> = BTreeMap::new();
    for r in table.rows.iter().filter(|r| r.model == model) {
        let e = by_lang.entry(&r.language).or_insert((0.0, 0));
        e.0 += r.accuracy;
        e.1 += 1;
    }
    if by_lang.is_empty() {
        return Err(Error::MissingModel(model.to_owned()));
    }
    let sum: f64 = by_lang.values().map(|(s, n)| s / *n as f64).sum();
    Ok(sum / by_lang.len() as f64)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Pearson,
    Spearman,
    Kendall,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Pearson, Method::Spearman, Method::Kendall];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Pearson => "pearson",
            Method::Spearman => "spearman",
            Method::Kendall => "kendall",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidInput(format!("unknown correlation method {s:?}")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrelationResult {
    pub method: Method,
    /// `None` when either input has zero variance.
    pub coefficient: Option<f64>,
    pub n: usize,
}

pub fn correlate(xs: &[f64], ys: &[f64], method: Method) -> Result<CorrelationResult> {
    if xs.len() != ys.len() {
        return Err(Error::InvalidInput(format!(
            "correlation inputs differ in length ({} vs {})",
            xs.len(),
            ys.len()
        )));
    }
    if xs.len() < 2 {
        return Err(Error::InvalidInput(
            "correlation needs at least two points".into(),
        ));
    }
    if xs.iter().chain(ys).any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput(
            "correlation inputs must be finite".into(),
        ));
    }
    let coefficient = match method {
        Method::Pearson => pearson(xs, ys),
        Method::Spearman => pearson(&average_ranks(xs), &average_ranks(ys)),
        Method::Kendall => kendall_tau_b(xs, ys),
    };
    Ok(CorrelationResult {
        method,
        coefficient,
        n: xs.len(),
    })
}

fn pearson(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        let (dx, dy) = (x - mx, y - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// 1-based ranks; tied values share the mean of their positions.
pub fn average_ranks(xs: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut ranks = vec![0.0; xs.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && xs[order[j + 1]] == xs[order[i]] {
            j += 1;
        }
        let rank = (i + j + 2) as f64 / 2.0;
        for &k in &order[i..=j] {
            ranks[k] = rank;
        }
        i = j + 1;
    }
    ranks
}

/// Pairs tied within each run of equal keys.
fn tied_pairs<T: PartialEq>(sorted: impl Iterator<Item = T>) -> u64 {
    let mut total = 0u64;
    let mut run = 0u64;
    let mut prev: Option<T> = None;
    for v in sorted {
        if prev.as_ref() == Some(&v) {
            run += 1;
        } else {
            total += run * (run + 1) / 2;
            run = 0;
        }
        prev = Some(v);
    }
    total + run * (run + 1) / 2
}

/// Sorts `ys` in place and returns the number of inversions.
fn merge_sort_swaps(ys: &mut [f64], buf: &mut Vec<f64>) -> u64 {
    let n = ys.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let mut swaps = merge_sort_swaps(&mut ys[..mid], buf) + merge_sort_swaps(&mut ys[mid..], buf);
    buf.clear();
    let (mut i, mut j) = (0, mid);
    while i < mid && j < n {
        if ys[j] < ys[i] {
            buf.push(ys[j]);
            swaps += (mid - i) as u64;
            j += 1;
        } else {
            buf.push(ys[i]);
            i += 1;
        }
    }
    buf.extend_from_slice(&ys[i..mid]);
    buf.extend_from_slice(&ys[j..n]);
    ys.copy_from_slice(buf);
    swaps
}

/// Kendall's tau-b in O(n log n) (Knight's algorithm).
fn kendall_tau_b(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let n = xs.len() as u64;
    let mut pairs: Vec<(f64, f64)> = xs.iter().copied().zip(ys.iter().copied()).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let n0 = n * (n - 1) / 2;
    let tx = tied_pairs(pairs.iter().map(|p| p.0));
    let txy = tied_pairs(pairs.iter().copied());
    let mut ys_sorted: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let swaps = merge_sort_swaps(&mut ys_sorted, &mut Vec::with_capacity(pairs.len()));
    let ty = tied_pairs(ys_sorted.iter().copied());
    if tx == n0 || ty == n0 {
        return None;
    }
    let numerator = n0 as i128 - tx as i128 - ty as i128 + txy as i128 - 2 * swaps as i128;
    let denom = (((n0 - tx) as f64) * ((n0 - ty) as f64)).sqrt();
    Some((numerator as f64 / denom).clamp(-1.0, 1.0))
}

/// Per-(model, language) values of one intrinsic metric.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct MetricTable {
    pub name: String,
    pub values: BTreeMap<(String, String), f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HeatmapRow {
    pub metric: String,
    pub language: String,
    /// Correlation across models, one column per task.
    pub per_task: BTreeMap<String, Option<f64>>,
    /// Correlation over all (model, task) points of the language.
    pub pooled: Option<f64>,
    pub pooled_n: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Heatmap {
    pub method: Method,
    pub tasks: Vec<String>,
    pub rows: Vec<HeatmapRow>,
}

/// Correlates every metric with downstream accuracy, per language: once per
/// task across models, and once pooled over the language's tasks. Cells with
/// fewer than two points or constant inputs are undefined.
pub fn heatmap(metrics: &[MetricTable], scores: &ScoreTable, method: Method) -> Heatmap {
    let tasks: BTreeSet<&str> = scores.rows.iter().map(|r| r.task.as_str()).collect();
    let languages: BTreeSet<&str> = scores.rows.iter().map(|r| r.language.as_str()).collect();
    let cell = |xs: &[f64], ys: &[f64]| -> Option<f64> {
        correlate(xs, ys, method).ok().and_then(|r| r.coefficient)
    };
    let mut rows = Vec::new();
    for m in metrics {
        for &lang in &languages {
            let points: Vec<(&str, f64, f64)> = scores
                .rows
                .iter()
                .filter(|r| r.language == lang)
                .filter_map(|r| {
                    m.values
                        .get(&(r.model.clone(), lang.to_owned()))
                        .map(|&x| (r.task.as_str(), x, r.accuracy))
                })
                .collect();
            if points.is_empty() {
                continue;
            }
            let per_task = tasks
                .iter()
                .map(|&t| {
                    let (xs, ys): (Vec<f64>, Vec<f64>) = points
                        .iter()
                        .filter(|p| p.0 == t)
                        .map(|p| (p.1, p.2))
                        .unzip();
                    (t.to_owned(), cell(&xs, &ys))
                })
                .collect();
            let (xs, ys): (Vec<f64>, Vec<f64>) = points.iter().map(|p| (p.1, p.2)).unzip();
            rows.push(HeatmapRow {
                metric: m.name.clone(),
                language: lang.to_owned(),
                per_task,
                pooled: cell(&xs, &ys),
                pooled_n: xs.len(),
            });
        }
    }
    Heatmap {
        method,
        tasks: tasks.into_iter().map(str::to_owned).collect(),
        rows,
    }
}

impl Heatmap {
    /// Matrix of metric-language rows by task columns, `NA` for undefined.
    pub fn to_tsv(&self) -> String {
        let fmt = |v: Option<f64>| v.map_or_else(|| "NA".to_owned(), |x| format!("{x:.6}"));
        let mut out = format!("metric_language\t{}\tpooled\n", self.tasks.join("\t"));
        for r in &self.rows {
            out.push_str(&format!("{}-{}", r.metric, r.language));
            for t in &self.tasks {
                out.push('\t');
                out.push_str(&fmt(r.per_task.get(t).copied().flatten()));
            }
            out.push('\t');
            out.push_str(&fmt(r.pooled));
            out.push('\n');
        }
        out
    }
}

/// Named rows of per-column values, e.g. per-word cost by tokenizer and
/// document language.
#[derive(Clone, Debug, PartialEq)]
pub struct ValueTable {
    pub columns: Vec<String>,
    pub rows: Vec<(String, Vec<f64>)>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExtremalRatio {
    pub column: String,
    pub max_row: String,
    pub max_value: f64,
    pub min_row: String,
    pub min_value: f64,
    pub ratio: f64,
}

impl ValueTable {
    /// First column names the row; header required; `#` lines are comments.
    pub fn parse_tsv(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .filter(|l| !l.trim().is_empty() && !l.starts_with('#'));
        let header = lines
            .next()
            .ok_or_else(|| Error::InvalidInput("table is empty".into()))?;
        let columns: Vec<String> = header
            .split('\t')
            .skip(1)
            .map(|s| s.trim().to_owned())
            .collect();
        let mut rows = Vec::new();
        for line in lines {
            let f: Vec<&str> = line.split('\t').map(str::trim).collect();
            if f.len() != columns.len() + 1 {
                return Err(Error::InvalidInput(format!(
                    "row {:?} has {} columns",
                    f[0],
                    f.len()
                )));
            }
            let values = f[1..]
                .iter()
                .map(|v| {
                    v.parse::<f64>()
                        .ok()
                        .filter(|x| x.is_finite())
                        .ok_or_else(|| {
                            Error::InvalidInput(format!("bad value {v:?} in row {:?}", f[0]))
                        })
                })
                .collect::<Result<Vec<_>>>()?;
            rows.push((f[0].to_owned(), values));
        }
        Ok(ValueTable { columns, rows })
    }

    pub fn read_tsv(path: &Path) -> Result<Self> {
        Self::parse_tsv(&read_text(path)?)
    }

    /// Largest over smallest value in `column`. Ties keep the first row.
    pub fn max_ratio(&self, column: &str) -> Result<ExtremalRatio> {
        let j = self
            .columns
            .iter()
            .position(|c| c == column)
            .ok_or_else(|| Error::InvalidInput(format!("no column {column:?}")))?;
        let mut it = self.rows.iter().map(|(name, v)| (name, v[j]));
        let first = it
            .next()
            .ok_or_else(|| Error::InvalidInput("table has no rows".into()))?;
        let (mut max, mut min) = (first, first);
        for r in it {
            if r.1 > max.1 {
                max = r;
            }
            if r.1 < min.1 {
                min = r;
            }
        }
        if min.1 <= 0.0 {
            return Err(Error::InvalidInput(format!(
                "non-positive minimum in {column:?}"
            )));
        }
        Ok(ExtremalRatio {
            column: column.to_owned(),
            max_row: max.0.clone(),
            max_value: max.1,
            min_row: min.0.clone(),
            min_value: min.1,
            ratio: max.1 / min.1,
        })
    }
}

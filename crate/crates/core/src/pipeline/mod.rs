//! End-to-end experiment runs: ingest, preprocess, split, train, evaluate and
//! analyze, each stage leaving its artifacts and a manifest in the run
//! directory.

mod config;
mod report;

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

pub use config::{
    CostConfig, DedupConfig, EvaluationConfig, ExperimentConfig, FilterConfig, HoldoutConfig,
    LoadedConfig, MixtureConfig, SeedConfig, SourceConfig, TokenizerEntry, TrainingConfig,
};
pub use report::{jsonl_report, Tsv};

use crate::analysis::{heatmap, weighted_average, Method, MetricTable, ScoreTable};
use crate::corpus::{self, id_set_digest, Document};
use crate::cost::{cost_per_word, gflops};
use crate::error::{Error, Result};
use crate::metrics::{fertility, parity, FertilityResult, ParallelCorpus, ParityResult};
use crate::preprocess;
use crate::tok::{vocab_overlap, ProfileName, TokenizerModel};
use crate::train::{train_from_word_counts, TrainReport, WordCounts};
use crate::util;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Where a finished run left its reports.
#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub run_dir: PathBuf,
    pub config_digest: String,
    /// Report path (relative to the run directory) to SHA-256.
    pub reports: BTreeMap<String, String>,
}

#[derive(Serialize)]
struct StageManifest<'a> {
    stage: &'a str,
    config_digest: &'a str,
    version: &'a str,
    inputs: BTreeMap<String, String>,
    outputs: BTreeMap<String, String>,
    details: serde_json::Value,
}

struct RunDir {
    root: PathBuf,
    digest: String,
}

impl RunDir {
    fn write(&self, rel: &str, bytes: &[u8], into: &mut BTreeMap<String, String>) -> Result<()> {
        util::write_atomic(&self.root.join(rel), bytes)?;
        into.insert(rel.to_owned(), util::sha256_hex(bytes));
        Ok(())
    }

    fn manifest(
        &self,
        stage: &str,
        inputs: BTreeMap<String, String>,
        outputs: BTreeMap<String, String>,
        details: serde_json::Value,
    ) -> Result<String> {
        let m = StageManifest {
            stage,
            config_digest: &self.digest,
            version: VERSION,
            inputs,
            outputs,
            details,
        };
        let rel = format!("{stage}/manifest.json");
        util::write_atomic(&self.root.join(&rel), &pretty(&m)?)?;
        Ok(rel)
    }
}

fn pretty<T: Serialize>(v: &T) -> Result<Vec<u8>> {
    let mut out = serde_json::to_vec_pretty(v)?;
    out.push(b'\n');
    Ok(out)
}

fn staged<T>(stage: &'static str, f: impl FnOnce() -> Result<T>) -> Result<T> {
    log::info!("stage {stage}");
    f().map_err(|e| Error::Stage {
        stage,
        source: Box::new(e),
    })
}

/// Runs every stage into `run_root/<name>`. Re-running with the same config
/// and inputs reproduces every report byte for byte; only the training
/// manifests carry wall-clock times.
pub fn run(loaded: &LoadedConfig, run_root: &Path) -> Result<RunOutcome> {
    let cfg = &loaded.config;
    staged("config", || {
        cfg.validate()?;
        loaded.check_paths()
    })?;
    let dir = RunDir {
        root: run_root.join(&cfg.name),
        digest: cfg.digest(),
    };
    let mut stages = Vec::new();
    let mut reports = BTreeMap::new();

    let mixed = staged("ingest", || ingest(loaded, &dir, &mut stages))?;
    let cleaned = staged("preprocess", || {
        preprocess_stage(cfg, &dir, mixed, &mut stages)
    })?;
    let (train_docs, holdout) = staged("split", || split(cfg, &dir, cleaned, &mut stages))?;
    let models = staged("train", || train_stage(cfg, &dir, &train_docs, &mut stages))?;
    drop(train_docs);
    let metrics = staged("evaluate", || {
        evaluate(loaded, &dir, &models, &holdout, &mut reports)
    })?;
    if let Some(scores) = &cfg.evaluation.scores {
        staged("analyze", || {
            analyze(&loaded.resolve(scores), &dir, &metrics, &mut reports)
        })?;
    }

    let top = json!({
        "name": cfg.name,
        "config_digest": dir.digest,
        "version": VERSION,
        "stages": stages,
        "reports": reports,
    });
    util::write_atomic(&dir.root.join("manifest.json"), &pretty(&top)?)?;
    Ok(RunOutcome {
        run_dir: dir.root,
        config_digest: dir.digest,
        reports,
    })
}

fn ingest(loaded: &LoadedConfig, dir: &RunDir, stages: &mut Vec<String>) -> Result<Vec<Document>> {
    let cfg = &loaded.config;
    let spec = cfg.mixture_spec()?;
    let mut inputs = BTreeMap::new();
    let mut readers = Vec::new();
    for s in &cfg.sources {
        let path = loaded.resolve(&s.path);
        inputs.insert(format!("source:{}", s.name), util::file_digest(&path)?);
        readers.push((path.clone(), corpus::ingest(&path, &s.name, &s.language)?));
    }
    let (docs, outcomes) =
        corpus::compose_mixture(&spec, readers.iter_mut().map(|(_, r)| r.by_ref()).collect())?;
    let mut stats = BTreeMap::new();
    for ((path, reader), s) in readers.iter_mut().zip(&cfg.sources) {
        if let Some(source) = reader.take_error() {
            return Err(Error::Read {
                path: path.clone(),
                source,
            });
        }
        stats.insert(s.name.clone(), reader.stats().clone());
    }
    let mut outputs = BTreeMap::new();
    dir.write(
        "ingest/corpus.jsonl",
        &corpus::documents_to_jsonl(&docs),
        &mut outputs,
    )?;
    stages.push(dir.manifest(
        "ingest",
        inputs,
        outputs,
        json!({ "mixture": outcomes, "ingest": stats, "documents": docs.len() }),
    )?);
    Ok(docs)
}

fn preprocess_stage(
    cfg: &ExperimentConfig,
    dir: &RunDir,
    docs: Vec<Document>,
    stages: &mut Vec<String>,
) -> Result<Vec<Document>> {
    let input_ids = id_set_digest(docs.iter().map(|d| &d.id));
    let (kept, tally) = preprocess::filter(docs, &cfg.filter_policy());
    let (deduped, dedup_report) = preprocess::dedup(kept, &cfg.dedup_params())?;
    let shuffled = preprocess::shuffle(deduped, cfg.shuffle.seed);

    let mut outputs = BTreeMap::new();
    dir.write(
        "preprocess/corpus.jsonl",
        &corpus::documents_to_jsonl(&shuffled),
        &mut outputs,
    )?;
    let mut clusters = Vec::new();
    for c in &dedup_report.clusters {
        serde_json::to_writer(&mut clusters, c)?;
        clusters.push(b'\n');
    }
    dir.write("preprocess/dedup_clusters.jsonl", &clusters, &mut outputs)?;
    stages.push(dir.manifest(
        "preprocess",
        BTreeMap::from([("documents".to_owned(), input_ids)]),
        outputs,
        json!({
            "filter": tally,
            "dedup": {
                "candidate_pairs": dedup_report.candidate_pairs,
                "confirmed_pairs": dedup_report.confirmed_pairs,
                "clusters": dedup_report.clusters.len(),
                "removed_docs": dedup_report.removed_docs,
            },
            "shuffle_seed": cfg.shuffle.seed,
            "documents": shuffled.len(),
        }),
    )?);
    Ok(shuffled)
}

fn split(
    cfg: &ExperimentConfig,
    dir: &RunDir,
    docs: Vec<Document>,
    stages: &mut Vec<String>,
) -> Result<(Vec<Document>, Vec<Document>)> {
    let input_ids = id_set_digest(docs.iter().map(|d| &d.id));
    let s = corpus::split_holdout(docs, cfg.holdout.documents, cfg.holdout.seed)?;
    let held: HashSet<_> = s.holdout.iter().map(|d| d.id).collect();
    if let Some(d) = s.train.iter().find(|d| held.contains(&d.id)) {
        return Err(Error::InvalidInput(format!(
            "document {} is in both train and holdout",
            d.id
        )));
    }
    let mut outputs = BTreeMap::new();
    dir.write(
        "split/train.jsonl",
        &corpus::documents_to_jsonl(&s.train),
        &mut outputs,
    )?;
    dir.write(
        "split/holdout.jsonl",
        &corpus::documents_to_jsonl(&s.holdout),
        &mut outputs,
    )?;
    stages.push(dir.manifest(
        "split",
        BTreeMap::from([("documents".to_owned(), input_ids)]),
        outputs,
        json!({
            "seed": s.seed,
            "train_documents": s.train.len(),
            "holdout_documents": s.holdout.len(),
            "train_ids": id_set_digest(s.train.iter().map(|d| &d.id)),
            "holdout_ids": id_set_digest(s.holdout.iter().map(|d| &d.id)),
        }),
    )?);
    Ok((s.train, s.holdout))
}

struct TrainedEntry {
    name: String,
    model: TokenizerModel,
}

fn train_stage(
    cfg: &ExperimentConfig,
    dir: &RunDir,
    docs: &[Document],
    stages: &mut Vec<String>,
) -> Result<Vec<TrainedEntry>> {
    let corpus_digest = id_set_digest(docs.iter().map(|d| &d.id));
    let texts: Vec<&str> = docs.iter().map(|d| d.text.as_str()).collect();
    let profiles: BTreeSet<ProfileName> = cfg.tokenizers.iter().map(|t| t.profile).collect();
    let counts: BTreeMap<ProfileName, WordCounts> = profiles
        .into_iter()
        .map(|p| {
            let tc = cfg.train_config(
                cfg.tokenizers
                    .iter()
                    .find(|t| t.profile == p)
                    .expect("profile in grid"),
            );
            (p, WordCounts::from_texts(&texts, &tc.profile))
        })
        .collect();

    let results: Vec<Result<(TrainedEntry, TrainReport, f64)>> = cfg
        .tokenizers
        .par_iter()
        .map(|t| {
            let started = Instant::now();
            let trained = train_from_word_counts(&counts[&t.profile], &cfg.train_config(t))?;
            let name = t.display_name();
            log::info!("trained {name}: {} tokens", trained.model.vocab_size());
            Ok((
                TrainedEntry {
                    name,
                    model: trained.model,
                },
                trained.report,
                started.elapsed().as_secs_f64(),
            ))
        })
        .collect();

    let mut models = Vec::new();
    for (r, t) in results.into_iter().zip(&cfg.tokenizers) {
        let (entry, report, seconds) = r?;
        let mut outputs = BTreeMap::new();
        dir.write(
            &format!("train/{}.json", entry.name),
            entry.model.to_json().as_bytes(),
            &mut outputs,
        )?;
        let m = json!({
            "stage": "train",
            "config_digest": dir.digest,
            "version": VERSION,
            "tokenizer": entry.name,
            "train_config": cfg.train_config(t),
            "corpus_digest": corpus_digest,
            "outputs": outputs,
            "report": report,
            "wall_clock_seconds": seconds,
        });
        let rel = format!("train/{}.manifest.json", entry.name);
        util::write_atomic(&dir.root.join(&rel), &pretty(&m)?)?;
        stages.push(rel);
        models.push(entry);
    }
    Ok(models)
}

/// Per-(tokenizer, language) metric values handed to the analysis stage.
struct Metrics {
    fertility: MetricTable,
    parity: MetricTable,
}

#[derive(Serialize)]
struct CostRow {
    tokenizer: String,
    vocab_size: usize,
    fertility: f64,
    flops_per_token: f64,
    flops_per_word: f64,
    gflops_per_word: f64,
}

struct Evaluated {
    overall: FertilityResult,
    by_language: Vec<FertilityResult>,
    parity: Vec<ParityResult>,
    cost: CostRow,
}

fn evaluate(
    loaded: &LoadedConfig,
    dir: &RunDir,
    models: &[TrainedEntry],
    holdout: &[Document],
    reports: &mut BTreeMap<String, String>,
) -> Result<Metrics> {
    let cfg = &loaded.config;
    let pc = ParallelCorpus::read_tsv(&loaded.resolve(&cfg.evaluation.parallel))?;
    let pivot = cfg.evaluation.pivot.as_str();
    if !pc.languages().iter().any(|l| l == pivot) {
        return Err(Error::MissingLanguage(pivot.to_owned()));
    }
    let texts: Vec<&str> = holdout.iter().map(|d| d.text.as_str()).collect();
    let mut by_lang: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for d in holdout {
        by_lang
            .entry(d.language.as_str())
            .or_default()
            .push(&d.text);
    }

    let evaluated: Vec<Evaluated> = models
        .par_iter()
        .map(|e| -> Result<Evaluated> {
            let overall = fertility(&e.model, &texts, &e.name, "holdout")?;
            let by_language = by_lang
                .iter()
                .map(|(lang, t)| fertility(&e.model, t, &e.name, lang))
                .collect::<Result<Vec<_>>>()?;
            let parity = pc
                .languages()
                .iter()
                .map(|l| parity(&e.model, &pc, l, pivot, &e.name))
                .collect::<Result<Vec<_>>>()?;
            let c = cost_per_word(
                &cfg.cost_params(e.model.vocab_size() as u64),
                overall.fertility,
            )?;
            let cost = CostRow {
                tokenizer: e.name.clone(),
                vocab_size: e.model.vocab_size(),
                fertility: overall.fertility,
                flops_per_token: c.flops_per_token,
                flops_per_word: c.flops_per_word,
                gflops_per_word: gflops(c.flops_per_word),
            };
            Ok(Evaluated {
                overall,
                by_language,
                parity,
                cost,
            })
        })
        .collect::<Result<_>>()?;

    let d = &dir.digest;
    let fert: Vec<&FertilityResult> = evaluated.iter().map(|e| &e.overall).collect();
    dir.write("reports/fertility.jsonl", &jsonl_report(d, &fert)?, reports)?;
    dir.write(
        "reports/fertility.tsv",
        &fertility_tsv(&fert).to_bytes(d),
        reports,
    )?;
    let fert_lang: Vec<&FertilityResult> = evaluated.iter().flat_map(|e| &e.by_language).collect();
    dir.write(
        "reports/fertility_by_language.jsonl",
        &jsonl_report(d, &fert_lang)?,
        reports,
    )?;
    dir.write(
        "reports/fertility_by_language.tsv",
        &fertility_tsv(&fert_lang).to_bytes(d),
        reports,
    )?;

    let par: Vec<&ParityResult> = evaluated.iter().flat_map(|e| &e.parity).collect();
    dir.write("reports/parity.jsonl", &jsonl_report(d, &par)?, reports)?;
    let mut t = Tsv::new(&[
        "tokenizer",
        "language",
        "pivot",
        "tokens",
        "pivot_tokens",
        "premium",
    ]);
    for p in &par {
        t.row(vec![
            p.tokenizer.clone(),
            p.lang_a.clone(),
            p.lang_b.clone(),
            p.tokens_a.to_string(),
            p.tokens_b.to_string(),
            p.premium.to_string(),
        ]);
    }
    dir.write("reports/parity.tsv", &t.to_bytes(d), reports)?;

    let costs: Vec<&CostRow> = evaluated.iter().map(|e| &e.cost).collect();
    dir.write("reports/cost.jsonl", &jsonl_report(d, &costs)?, reports)?;
    let mut t = Tsv::new(&[
        "tokenizer",
        "vocab_size",
        "fertility",
        "flops_per_token",
        "flops_per_word",
        "gflops_per_word",
    ]);
    for c in &costs {
        t.row(vec![
            c.tokenizer.clone(),
            c.vocab_size.to_string(),
            c.fertility.to_string(),
            c.flops_per_token.to_string(),
            c.flops_per_word.to_string(),
            c.gflops_per_word.to_string(),
        ]);
    }
    dir.write("reports/cost.tsv", &t.to_bytes(d), reports)?;

    let names: Vec<&str> = models.iter().map(|m| m.name.as_str()).collect();
    let mut header = vec!["tokenizer"];
    header.extend(&names);
    let mut t = Tsv::new(&header);
    for a in models {
        let mut row = vec![a.name.clone()];
        row.extend(
            models
                .iter()
                .map(|b| format!("{:.6}", vocab_overlap(&a.model, &b.model))),
        );
        t.row(row);
    }
    dir.write("reports/overlap.tsv", &t.to_bytes(d), reports)?;

    let mut metrics = Metrics {
        fertility: MetricTable {
            name: "fertility".into(),
            values: BTreeMap::new(),
        },
        parity: MetricTable {
            name: "parity".into(),
            values: BTreeMap::new(),
        },
    };
    for f in &fert_lang {
        metrics
            .fertility
            .values
            .insert((f.tokenizer.clone(), f.corpus.clone()), f.fertility);
    }
    for p in &par {
        metrics
            .parity
            .values
            .insert((p.tokenizer.clone(), p.lang_a.clone()), p.premium);
    }
    Ok(metrics)
}

fn fertility_tsv(rows: &[&FertilityResult]) -> Tsv {
    let mut t = Tsv::new(&["tokenizer", "corpus", "tokens", "words", "fertility"]);
    for f in rows {
        t.row(vec![
            f.tokenizer.clone(),
            f.corpus.clone(),
            f.tokens.to_string(),
            f.words.to_string(),
            f.fertility.to_string(),
        ]);
    }
    t
}

fn analyze(
    scores: &Path,
    dir: &RunDir,
    metrics: &Metrics,
    reports: &mut BTreeMap<String, String>,
) -> Result<()> {
    let table = ScoreTable::read_tsv(scores)?;
    let d = &dir.digest;
    let mut t = Tsv::new(&["model", "weighted_average"]);
    for m in table.models() {
        t.row(vec![m.to_owned(), weighted_average(&table, m)?.to_string()]);
    }
    dir.write("reports/average_accuracy.tsv", &t.to_bytes(d), reports)?;
    let tables = [metrics.fertility.clone(), metrics.parity.clone()];
    for method in Method::ALL {
        let h = heatmap(&tables, &table, method);
        let body = format!("# config_digest={d}\n{}", h.to_tsv());
        dir.write(
            &format!("reports/correlation_{}.tsv", method.as_str()),
            body.as_bytes(),
            reports,
        )?;
    }
    Ok(())
}

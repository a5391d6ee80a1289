use std::collections::BTreeMap;
use std::fmt;
use std::io::{BufWriter, Write};
use std::path::{Component, Path, PathBuf};

use serde_json::json;

use toklab_core::analysis::{heatmap, weighted_average, MetricTable, ScoreTable, ValueTable};
use toklab_core::corpus::{self, Document};
use toklab_core::cost::{cost_per_word, CostParams};
use toklab_core::metrics::{fertility, parity, ParallelCorpus};
use toklab_core::pipeline::{self, jsonl_report, LoadedConfig, Tsv};
use toklab_core::preprocess::{self, DedupParams, FilterPolicy};
use toklab_core::tok::{vocab_overlap, Profile, TokenizerModel};
use toklab_core::train::{train, TrainConfig};
use toklab_core::{synth, util, Error};

use crate::{Cli, Command, EXIT_DATA, EXIT_INTERNAL, EXIT_USAGE};

#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Core(Error),
}

impl Failure {
    pub fn exit_code(&self) -> u8 {
        match self {
            Failure::Usage(_) => EXIT_USAGE,
            Failure::Core(e) if e.is_data_error() => EXIT_DATA,
            Failure::Core(_) => EXIT_INTERNAL,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Usage(m) => f.write_str(m),
            Failure::Core(e) => {
                let mut msg = e.to_string();
                let mut src = std::error::Error::source(e);
                while let Some(s) = src {
                    let part = s.to_string();
                    if !msg.contains(&part) {
                        msg = format!("{msg}: {part}");
                    }
                    src = s.source();
                }
                f.write_str(&msg)
            }
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Core(Error::Io(e))
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure::Core(Error::Json(e))
    }
}

type Outcome<T = ()> = Result<T, Failure>;

/// Resolves a command output under the run root. Outputs may not escape the
/// root or overwrite an input.
fn output_path(root: &Path, rel: &Path, inputs: &[&Path]) -> Outcome<PathBuf> {
    if rel.is_absolute()
        || rel
            .components()
            .any(|c| !matches!(c, Component::Normal(_) | Component::CurDir))
    {
        return Err(Failure::Usage(format!(
            "output {} must be a relative path inside the run root",
            rel.display()
        )));
    }
    let full = root.join(rel);
    if let Ok(target) = full.canonicalize() {
        for i in inputs {
            if i.canonicalize().is_ok_and(|c| c == target) {
                return Err(Failure::Usage(format!(
                    "output {} would overwrite an input",
                    full.display()
                )));
            }
        }
    }
    Ok(full)
}

/// Digest of the parameters and input contents behind a report.
fn invocation_digest(
    command: &str,
    params: serde_json::Value,
    inputs: &[&Path],
) -> Outcome<String> {
    let mut digests = BTreeMap::new();
    for (i, p) in inputs.iter().enumerate() {
        digests.insert(i, util::file_digest(p)?);
    }
    let all = json!({ "command": command, "params": params, "inputs": digests });
    Ok(util::sha256_hex(&serde_json::to_vec(&all)?))
}

fn emit(root: &Path, out: Option<&Path>, inputs: &[&Path], bytes: &[u8]) -> Outcome {
    match out {
        Some(rel) => {
            let path = output_path(root, rel, inputs)?;
            util::write_atomic(&path, bytes)?;
        }
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(bytes)?;
            stdout.flush()?;
        }
    }
    Ok(())
}

/// Documents from a stage file (`.jsonl`) or one per non-empty line of text.
fn read_texts(path: &Path) -> Outcome<Vec<String>> {
    if path.extension().is_some_and(|e| e == "jsonl") {
        return Ok(corpus::read_documents(path)?
            .into_iter()
            .map(|d| d.text)
            .collect());
    }
    let text = std::fs::read_to_string(path).map_err(|source| Error::Read {
        path: path.to_owned(),
        source,
    })?;
    Ok(text
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(str::to_owned)
        .collect())
}

fn model_name(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

pub fn dispatch(cli: &Cli) -> Outcome {
    let root = cli.run_root.as_path();
    match &cli.command {
        Command::Ingest(a) => {
            let out = output_path(root, &a.out, &[&a.input])?;
            let mut reader = corpus::ingest(&a.input, &a.source, &a.language)?;
            let docs: Vec<Document> = reader.by_ref().collect();
            if let Some(source) = reader.take_error() {
                return Err(Error::Read {
                    path: a.input.clone(),
                    source,
                }
                .into());
            }
            corpus::write_documents(&out, &docs)?;
            let digest = invocation_digest(
                "ingest",
                json!({ "source": a.source, "language": a.language }),
                &[&a.input],
            )?;
            emit(root, None, &[], &jsonl_report(&digest, &[reader.stats()])?)
        }
        Command::Preprocess(a) => {
            let out = output_path(root, &a.out, &[&a.input])?;
            let mut policy = FilterPolicy::default();
            if !a.drop_warnings.is_empty() {
                policy.drop_warnings = a.drop_warnings.iter().copied().collect();
            }
            policy.harmful_threshold = a.harmful_threshold;
            policy.drop_missing_harmful = a.drop_missing_harmful;
            let params = DedupParams {
                seed: a.dedup_seed,
                jaccard_confirm: a.jaccard,
                ..DedupParams::default()
            };
            params.validate()?;
            let docs = corpus::read_documents(&a.input)?;
            let (kept, tally) = preprocess::filter(docs, &policy);
            let (deduped, report) = preprocess::dedup(kept, &params)?;
            let shuffled = preprocess::shuffle(deduped, a.shuffle_seed);
            let digest = invocation_digest(
                "preprocess",
                json!({ "filter": policy, "dedup": params, "shuffle_seed": a.shuffle_seed }),
                &[&a.input],
            )?;
            corpus::write_documents(&out, &shuffled)?;
            if let Some(rel) = &a.clusters {
                emit(
                    root,
                    Some(rel),
                    &[&a.input],
                    &jsonl_report(&digest, &report.clusters)?,
                )?;
            }
            let summary = json!({
                "kept": shuffled.len(),
                "filter": tally,
                "candidate_pairs": report.candidate_pairs,
                "confirmed_pairs": report.confirmed_pairs,
                "removed_docs": report.removed_docs,
            });
            emit(root, None, &[], &jsonl_report(&digest, &[summary])?)
        }
        Command::Train(a) => {
            let out = output_path(root, &a.out, &[&a.input])?;
            let mut cfg = TrainConfig::new(a.algorithm, Profile::for_name(a.profile), a.vocab_size);
            cfg.character_coverage = a.character_coverage;
            cfg.workers = a.threads;
            let texts = read_texts(&a.input)?;
            let started = std::time::Instant::now();
            let trained = train(&texts, &cfg)?;
            let seconds = started.elapsed().as_secs_f64();
            let digest = invocation_digest("train", serde_json::to_value(&cfg)?, &[&a.input])?;
            let model_json = trained.model.to_json();
            util::write_atomic(&out, model_json.as_bytes())?;
            let manifest = json!({
                "config_digest": digest,
                "version": pipeline::VERSION,
                "train_config": cfg,
                "input_sha256": util::file_digest(&a.input)?,
                "model_sha256": util::sha256_hex(model_json.as_bytes()),
                "report": trained.report,
                "wall_clock_seconds": seconds,
            });
            let mut bytes = serde_json::to_vec_pretty(&manifest)?;
            bytes.push(b'\n');
            util::write_atomic(&out.with_extension("manifest.json"), &bytes)?;
            emit(root, None, &[], &jsonl_report(&digest, &[&trained.report])?)
        }
        Command::Encode(a) => {
            let model = TokenizerModel::load(&a.model)?;
            let text = std::fs::read_to_string(&a.input).map_err(|source| Error::Read {
                path: a.input.clone(),
                source,
            })?;
            let mut w = BufWriter::new(std::io::stdout().lock());
            for line in text.lines() {
                let ids: Vec<String> = model.encode(line).iter().map(u32::to_string).collect();
                writeln!(w, "{}", ids.join(" "))?;
            }
            w.flush()?;
            Ok(())
        }
        Command::Fertility(a) => {
            let model = TokenizerModel::load(&a.model)?;
            let texts = read_texts(&a.input)?;
            let r = fertility(&model, &texts, &model_name(&a.model), &model_name(&a.input))?;
            let digest = invocation_digest("fertility", json!({}), &[&a.model, &a.input])?;
            emit(
                root,
                a.out.as_deref(),
                &[&a.model, &a.input],
                &jsonl_report(&digest, &[r])?,
            )
        }
        Command::Parity(a) => {
            let model = TokenizerModel::load(&a.model)?;
            let pc = ParallelCorpus::read_tsv(&a.parallel)?;
            let r = parity(&model, &pc, &a.lang, &a.pivot, &model_name(&a.model))?;
            let digest = invocation_digest(
                "parity",
                json!({ "lang": a.lang, "pivot": a.pivot }),
                &[&a.model, &a.parallel],
            )?;
            emit(
                root,
                a.out.as_deref(),
                &[&a.model, &a.parallel],
                &jsonl_report(&digest, &[r])?,
            )
        }
        Command::Overlap(a) => {
            let models = a
                .models
                .iter()
                .map(|p| TokenizerModel::load(p))
                .collect::<Result<Vec<_>, _>>()?;
            let names: Vec<String> = a.models.iter().map(|p| model_name(p)).collect();
            let mut header = vec!["tokenizer"];
            header.extend(names.iter().map(String::as_str));
            let mut t = Tsv::new(&header);
            for (i, m) in models.iter().enumerate() {
                let mut row = vec![names[i].clone()];
                row.extend(models.iter().map(|o| format!("{:.6}", vocab_overlap(m, o))));
                t.row(row);
            }
            let inputs: Vec<&Path> = a.models.iter().map(PathBuf::as_path).collect();
            let digest = invocation_digest("overlap", json!({}), &inputs)?;
            emit(root, a.out.as_deref(), &inputs, &t.to_bytes(&digest))
        }
        Command::Cost(a) => {
            let p = CostParams {
                batch: a.batch,
                seq_len: a.seq_len,
                layers: a.layers,
                hidden: a.hidden,
                vocab: a.vocab,
            };
            let r = cost_per_word(&p, a.fertility)?;
            let digest = invocation_digest(
                "cost",
                json!({ "params": p, "fertility": a.fertility }),
                &[],
            )?;
            emit(root, a.out.as_deref(), &[], &jsonl_report(&digest, &[r])?)
        }
        Command::Analyze(a) => analyze(root, a),
        Command::Run(a) => {
            let loaded = LoadedConfig::load(&a.config)?;
            let outcome = pipeline::run(&loaded, root)?;
            let summary = json!({
                "run_dir": outcome.run_dir,
                "config_digest": outcome.config_digest,
                "reports": outcome.reports,
            });
            println!("{}", serde_json::to_string_pretty(&summary)?);
            Ok(())
        }
        Command::Synth(a) => {
            let dir = output_path(root, &a.out, &[])?;
            let ds = synth::write_dataset(&dir, a.bytes_per_language, a.parallel_rows, a.seed)?;
            for (lang, path) in &ds.sources {
                println!("{lang}\t{}", path.display());
            }
            println!("parallel\t{}", ds.parallel.display());
            Ok(())
        }
    }
}

fn read_metric_tables(path: &Path) -> Outcome<Vec<MetricTable>> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Read {
        path: path.to_owned(),
        source,
    })?;
    let mut tables: BTreeMap<String, MetricTable> = BTreeMap::new();
    let mut lines = text
        .lines()
        .filter(|l| !l.trim().is_empty() && !l.starts_with('#'));
    lines.next();
    for line in lines {
        let f: Vec<&str> = line.split('\t').map(str::trim).collect();
        let [metric, model, language, value] = f[..] else {
            return Err(Error::InvalidInput(format!("metric row {line:?} needs 4 columns")).into());
        };
        let value: f64 = value
            .parse()
            .ok()
            .filter(|v: &f64| v.is_finite())
            .ok_or_else(|| Error::InvalidInput(format!("bad metric value {value:?}")))?;
        tables
            .entry(metric.to_owned())
            .or_insert_with(|| MetricTable {
                name: metric.to_owned(),
                values: BTreeMap::new(),
            })
            .values
            .insert((model.to_owned(), language.to_owned()), value);
    }
    Ok(tables.into_values().collect())
}

fn analyze(root: &Path, a: &crate::AnalyzeArgs) -> Outcome {
    let mut inputs: Vec<&Path> = Vec::new();
    inputs.extend(a.scores.as_deref());
    inputs.extend(a.metrics.as_deref());
    inputs.extend(a.ratio.as_deref());
    let digest = invocation_digest(
        "analyze",
        json!({ "method": a.method.as_str(), "column": a.column }),
        &inputs,
    )?;
    let mut sections = Vec::new();
    if let Some(path) = &a.scores {
        let table = ScoreTable::read_tsv(path)?;
        let mut t = String::from("model\tweighted_average\n");
        for m in table.models() {
            t.push_str(&format!("{m}\t{}\n", weighted_average(&table, m)?));
        }
        sections.push(t);
        if let Some(mpath) = &a.metrics {
            let metrics = read_metric_tables(mpath)?;
            sections.push(heatmap(&metrics, &table, a.method).to_tsv());
        }
    }
    if let (Some(path), Some(column)) = (&a.ratio, &a.column) {
        let r = ValueTable::read_tsv(path)?.max_ratio(column)?;
        sections.push(format!(
            "column\tmax_row\tmax_value\tmin_row\tmin_value\tratio\n{}\t{}\t{}\t{}\t{}\t{}\n",
            r.column, r.max_row, r.max_value, r.min_row, r.min_value, r.ratio
        ));
    }
    let body = format!("# config_digest={digest}\n{}", sections.join("\n"));
    emit(root, a.out.as_deref(), &inputs, body.as_bytes())
}

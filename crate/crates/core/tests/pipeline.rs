use std::path::Path;

use toklab_core::pipeline::{self, LoadedConfig};
use toklab_core::synth;

fn config(extra: &str) -> String {
    format!(
        r#"
name = "grid"

[[source]]
name = "web_en"
language = "en"
path = "data/web_en.jsonl"
share = 0.5

[[source]]
name = "web_de"
language = "de"
path = "data/web_de.jsonl"
share = 0.5

[mixture]
total_words = 60000

[dedup]
seed = 1

[shuffle]
seed = 2

[holdout]
documents = 40
seed = 3

[[tokenizer]]
algorithm = "bpe"
profile = "sp"
vocab_size = 700

[[tokenizer]]
algorithm = "bpe"
profile = "hf"
vocab_size = 700

[[tokenizer]]
algorithm = "unigram"
profile = "sp"
vocab_size = 700

[[tokenizer]]
algorithm = "unigram"
profile = "hf"
vocab_size = 700

[evaluation]
parallel = "data/parallel.tsv"
pivot = "en"
{extra}
"#
    )
}

fn setup(dir: &Path, extra: &str) -> LoadedConfig {
    synth::write_dataset(&dir.join("data"), 250_000, 50, 5).unwrap();
    let path = dir.join("exp.toml");
    std::fs::write(&path, config(extra)).unwrap();
    LoadedConfig::load(&path).unwrap()
}

#[test]
fn grid_runs_are_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let loaded = setup(tmp.path(), "");
    let a = pipeline::run(&loaded, &tmp.path().join("a")).unwrap();
    let b = pipeline::run(&loaded, &tmp.path().join("b")).unwrap();
    assert_eq!(a.config_digest, b.config_digest);
    assert_eq!(a.reports, b.reports);

    let fertility = std::fs::read_to_string(a.run_dir.join("reports/fertility.jsonl")).unwrap();
    assert_eq!(fertility.lines().count(), 4);
    for line in fertility.lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        assert_eq!(v["config_digest"], a.config_digest.as_str());
        assert!(v["fertility"].as_f64().unwrap() >= 1.0);
    }
    let tsv = std::fs::read_to_string(a.run_dir.join("reports/cost.tsv")).unwrap();
    assert_eq!(
        tsv.lines().next().unwrap(),
        format!("# config_digest={}", a.config_digest)
    );

    for name in ["BPE-SP-700", "BPE-HF-700", "UNI-SP-700", "UNI-HF-700"] {
        let model = a.run_dir.join(format!("train/{name}.json"));
        assert!(model.exists(), "{name}");
        let x = std::fs::read(&model).unwrap();
        let y = std::fs::read(b.run_dir.join(format!("train/{name}.json"))).unwrap();
        assert_eq!(x, y, "{name}");
    }

    let split: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(a.run_dir.join("split/manifest.json")).unwrap(),
    )
    .unwrap();
    assert!(split.is_object());
}

#[test]
fn scores_enable_the_analysis_reports() {
    let tmp = tempfile::tempdir().unwrap();
    let scores = "model\ttask\tlanguage\taccuracy\n\
        BPE-SP-700\tqa\ten\t0.6\nBPE-SP-700\tqa\tde\t0.5\n\
        BPE-HF-700\tqa\ten\t0.7\nBPE-HF-700\tqa\tde\t0.4\n\
        UNI-SP-700\tqa\ten\t0.65\nUNI-SP-700\tqa\tde\t0.55\n\
        UNI-HF-700\tqa\ten\t0.5\nUNI-HF-700\tqa\tde\t0.45\n";
    std::fs::create_dir_all(tmp.path().join("data")).unwrap();
    std::fs::write(tmp.path().join("data/scores.tsv"), scores).unwrap();
    let loaded = setup(tmp.path(), "scores = \"data/scores.tsv\"\n");
    let out = pipeline::run(&loaded, &tmp.path().join("runs")).unwrap();
    let avg = std::fs::read_to_string(out.run_dir.join("reports/average_accuracy.tsv")).unwrap();
    assert!(avg.contains("BPE-SP-700\t0.55"), "{avg}");
    for m in ["pearson", "spearman", "kendall"] {
        assert!(out
            .reports
            .contains_key(&format!("reports/correlation_{m}.tsv")));
    }
}

#[test]
fn missing_inputs_fail_before_any_work() {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("exp.toml");
    std::fs::write(&path, config("")).unwrap();
    let loaded = LoadedConfig::load(&path).unwrap();
    let err = pipeline::run(&loaded, &tmp.path().join("runs")).unwrap_err();
    assert!(
        err.to_string().contains("web_en") || err.to_string().contains("data"),
        "{err}"
    );
    assert!(!tmp.path().join("runs/grid/train").exists());
}

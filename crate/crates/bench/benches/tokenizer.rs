use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};

use toklab_bench::{documents, model};
use toklab_core::tok::{Algorithm, Profile};
use toklab_core::train::{train_from_word_counts, TrainConfig, WordCounts};

fn encode(c: &mut Criterion) {
    let train_docs = documents(1, 1_000_000);
    let text = documents(2, 200_000).join("\n");
    let mut g = c.benchmark_group("encode");
    g.throughput(Throughput::Bytes(text.len() as u64));
    for (alg, profile) in [
        (Algorithm::Bpe, Profile::sentencepiece()),
        (Algorithm::Bpe, Profile::huggingface()),
        (Algorithm::Unigram, Profile::sentencepiece()),
    ] {
        let m = model(&train_docs, alg, profile.clone(), 4000);
        g.bench_function(BenchmarkId::new(alg.to_string(), profile.name), |b| {
            b.iter(|| m.encode(&text))
        });
    }
    g.finish();
}

fn training(c: &mut Criterion) {
    let docs = documents(3, 500_000);
    let profile = Profile::sentencepiece();
    let counts = WordCounts::from_texts(&docs, &profile);
    let mut g = c.benchmark_group("train");
    g.sample_size(10);
    g.bench_function("word_counts", |b| {
        b.iter(|| WordCounts::from_texts(&docs, &profile))
    });
    for alg in [Algorithm::Bpe, Algorithm::Unigram] {
        let cfg = TrainConfig::new(alg, profile.clone(), 2000);
        g.bench_function(BenchmarkId::new(alg.to_string(), 2000), |b| {
            b.iter(|| train_from_word_counts(&counts, &cfg).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, encode, training);
criterion_main!(benches);

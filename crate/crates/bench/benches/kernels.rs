use std::hint::black_box;

use babelkit_core::dedup::{lsh_pairs, shingle_hashes, MinHasher};
use babelkit_core::filter::filter_documents;
use babelkit_core::mixture::water_fill;
use babelkit_core::model::{make_toy_checkpoint, random_prompts, Model};
use babelkit_core::{apply_extension, plan_extension, Document, FilterRules, MinHashParams, ModelConfig};
use criterion::{criterion_group, criterion_main, BatchSize, Criterion};

fn text(seed: u64, words: usize) -> String {
    let mut x = seed.wrapping_mul(0x9e37_79b9_7f4a_7c15) | 1;
    (0..words)
        .map(|_| {
            x ^= x << 13;
            x ^= x >> 7;
            x ^= x << 17;
            format!("t{:x}", x % 4096)
        })
        .collect::<Vec<_>>()
        .join(" ")
}

fn config(layers: usize) -> ModelConfig {
    ModelConfig {
        num_layers: layers,
        hidden_size: 64,
        num_attention_heads: 4,
        num_kv_heads: 2,
        intermediate_size: 128,
        vocab_size: 256,
        rms_norm_eps: 1e-6,
        rope_theta: 10000.0,
    }
}

fn minhash(c: &mut Criterion) {
    let params = MinHashParams::default();
    let hasher = MinHasher::new(params.num_perm, params.seed);
    let shingles = shingle_hashes(&text(1, 500), params.shingle_k);
    c.bench_function("minhash/signature_500_words", |b| b.iter(|| hasher.signature(black_box(&shingles))));

    let signatures: Vec<Vec<u64>> = (0..2000)
        .map(|i| hasher.signature(&shingle_hashes(&text(i % 1500, 80), params.shingle_k)).unwrap())
        .collect();
    c.bench_function("lsh/2000_signatures", |b| b.iter(|| lsh_pairs(black_box(&signatures), &params).unwrap()));
}

fn model(c: &mut Criterion) {
    let ckpt = make_toy_checkpoint(&config(8), 0).unwrap();
    let model = Model::new(&ckpt).unwrap();
    let prompt = random_prompts(256, 1, 32, 0).unwrap().remove(0);
    c.bench_function("forward/8x64_32_tokens", |b| b.iter(|| model.forward(black_box(&prompt)).unwrap()));

    let plan = plan_extension(&ckpt.config, 2).unwrap();
    c.bench_function("surgery/extend_8_by_2", |b| b.iter(|| apply_extension(black_box(&ckpt), &plan).unwrap()));
}

fn mixture(c: &mut Criterion) {
    let avail: Vec<u64> = (0..25u64).map(|i| 1_000 * (i * i + 1)).collect();
    c.bench_function("water_fill/25_languages", |b| b.iter(|| water_fill(black_box(&avail), 150_000)));
}

fn filter(c: &mut Criterion) {
    let docs: Vec<Document> = (0..1000)
        .map(|i| Document::new(format!("d{i}"), "en", text(i, 10 + (i as usize % 40))))
        .collect();
    let rules = FilterRules::default();
    c.bench_function("filter/1000_docs", |b| {
        b.iter_batched(|| docs.clone(), |d| filter_documents(d, &rules).unwrap(), BatchSize::SmallInput)
    });
}

criterion_group!(benches, minhash, model, mixture, filter);
criterion_main!(benches);

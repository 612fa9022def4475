//! Data-parallel paths against a single worker.
//!
//! Each group runs the same work inside a one-thread pool and inside the
//! default pool. Build with `--no-default-features` to time the sequential
//! fallback itself.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use revgen::corpus::{ingest, FieldMapping};
use revgen::encoding::{build_vocab, default_tokenizer, EncoderConfig, IdTables, Level};
use revgen::genmodels::{Architecture, Generator, ModelSpec};
use revgen::par;
use revgen::recsys::{DeepConn, DeepConnConfig};
use revgen::training::{evaluate_loss, examples, Example};

fn toy(level: Level) -> (Generator<f32>, Vec<Example>, revgen::encoding::Vocabulary) {
    let data = include_str!("../data/toy_reviews.jsonl");
    let recs = ingest(data.as_bytes(), &FieldMapping::default(), default_tokenizer()).unwrap().records;
    let tables = IdTables::from_records(&recs);
    let texts: Vec<&str> = recs.iter().map(|r| r.text.as_str()).collect();
    let enc = EncoderConfig { min_word_count: 1, attr_embedding_dim: 16, word_embedding_dim: 32, ..Default::default() };
    let vocab = build_vocab(&texts, level, &enc).unwrap();
    let ex = examples(&recs, &vocab, &tables).unwrap();
    let spec = ModelSpec::new(Architecture::Attention, level, true, &enc, vocab.len(), tables.users.len(), tables.items.len())
        .with_hidden_dim(64);
    (Generator::new(spec, 1).unwrap(), ex, vocab)
}

const WORKERS: [(usize, &str); 2] = [(1, "one-worker"), (0, "all-workers")];

fn loss(c: &mut Criterion) {
    let (g, ex, _) = toy(Level::Char);
    let mut group = c.benchmark_group("evaluate_loss");
    group.sample_size(10);
    for (w, name) in WORKERS {
        group.bench_function(BenchmarkId::new(name, ex.len()), |b| {
            b.iter(|| par::with_workers(w, || evaluate_loss(&g, &ex, 5).unwrap()))
        });
    }
    group.finish();
}

fn decode(c: &mut Criterion) {
    let (g, ex, vocab) = toy(Level::Word);
    let bundles: Vec<_> = ex.iter().map(|e| e.bundle).collect();
    let mut group = c.benchmark_group("greedy_decode_all");
    group.sample_size(10);
    for (w, name) in WORKERS {
        group.bench_function(BenchmarkId::new(name, bundles.len()), |b| {
            b.iter(|| par::with_workers(w, || g.greedy_decode_all(&bundles, 20, 5, |t| vocab.decode(t)).unwrap()))
        });
    }
    group.finish();
}

fn rating(c: &mut Criterion) {
    let cfg = DeepConnConfig { document_length: 120, embedding_dim: 32, filter_count: 32, batch_size: 16, ..Default::default() };
    let mut m = DeepConn::<f32>::new(cfg, 500).unwrap();
    m.mark_trained();
    let docs: Vec<Vec<usize>> = (0..128).map(|i| (0..120).map(|j| (i * 7 + j * 13) % 500).collect()).collect();
    let mut group = c.benchmark_group("rating_predict");
    group.sample_size(10);
    for (w, name) in WORKERS {
        group.bench_function(BenchmarkId::new(name, docs.len()), |b| {
            b.iter(|| par::with_workers(w, || m.predict(&docs, &docs).unwrap()))
        });
    }
    group.finish();
}

criterion_group!(benches, loss, decode, rating);
criterion_main!(benches);

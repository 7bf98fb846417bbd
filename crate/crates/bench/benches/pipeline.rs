use std::hint::black_box;
use std::time::Duration;

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use prodclass::corpus::ingest;
use prodclass::embeddings::VectorizerParams;
use prodclass::features::{build_vocabulary, tfidf_vectorize};
use prodclass::synth::{generate_corpus, CorpusSpec};
use prodclass::{ClassifierSpec, TokenizedDoc, TokenizerConfig, TrainingSet, VectorizationKind, Vectorizer};

fn corpus(size: usize) -> Vec<TokenizedDoc> {
    let records = generate_corpus(&CorpusSpec { size, ..CorpusSpec::default() }).unwrap();
    ingest(&records, &TokenizerConfig::default()).unwrap().docs
}

fn training_set(docs: &[TokenizedDoc], kind: VectorizationKind) -> (Vectorizer, TrainingSet) {
    let v = Vectorizer::fit(kind, &VectorizerParams::default(), docs).unwrap();
    let n_classes = docs.iter().map(|d| d.label).max().unwrap() + 1;
    let ts = TrainingSet::new(
        v.transform_all(docs).unwrap(),
        docs.iter().map(|d| d.label).collect(),
        n_classes,
    )
    .unwrap();
    (v, ts)
}

fn features(c: &mut Criterion) {
    let docs = corpus(2500);
    c.bench_function("vocabulary/2500 docs", |b| b.iter(|| build_vocabulary(black_box(&docs), 5000, 2).unwrap()));
    let vocab = build_vocabulary(&docs, 5000, 2).unwrap();
    c.bench_function("tfidf/2500 docs", |b| {
        b.iter(|| docs.iter().map(|d| tfidf_vectorize(d, &vocab).nnz()).sum::<usize>())
    });
}

fn classifiers(c: &mut Criterion) {
    let docs = corpus(1000);
    let (_, ts) = training_set(&docs, VectorizationKind::TfIdf);
    let mut group = c.benchmark_group("train/tfidf 1000 docs");
    group.sample_size(10).measurement_time(Duration::from_secs(10));
    for name in ["naive-bayes", "logreg", "tree", "svm"] {
        let spec = ClassifierSpec::default_for(name).unwrap();
        group.bench_function(name, |b| b.iter(|| spec.train(black_box(&ts)).unwrap()));
    }
    group.finish();

    let knn = ClassifierSpec::default_for("knn").unwrap().train(&ts).unwrap();
    c.bench_function("predict/knn 1000 queries", |b| {
        b.iter_batched(|| ts.features().to_vec(), |xs| knn.predict_all(&xs).unwrap(), BatchSize::LargeInput)
    });
}

criterion_group!(benches, features, classifiers);
criterion_main!(benches);

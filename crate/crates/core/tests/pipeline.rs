use std::collections::HashSet;

use prodclass::archive::ModelArchive;
use prodclass::corpus::{self, ingest};
use prodclass::pipeline::{run_cv, run_train, PipelineConfig};
use prodclass::synth::{generate_corpus, to_csv, CorpusSpec};
use prodclass::{ClassifierSpec, RawRecord, TokenizerConfig, VectorizationKind};

/// Corpus where every record carries a unique marker token `idN`.
fn marked_corpus(dir: &std::path::Path) -> (std::path::PathBuf, Vec<RawRecord>) {
    let mut records = generate_corpus(&CorpusSpec { classes: 4, size: 160, seed: 9, ..Default::default() }).unwrap();
    for (i, r) in records.iter_mut().enumerate() {
        r.text = format!("{} id{i}", r.text);
    }
    let path = dir.join("marked.csv");
    std::fs::write(&path, to_csv(&records).unwrap()).unwrap();
    (path, records)
}

fn config(data: &std::path::Path, out: &std::path::Path, kind: VectorizationKind, algo: &str) -> PipelineConfig {
    let mut c = PipelineConfig::default();
    c.dataset.path = data.to_path_buf();
    c.output_dir = out.to_path_buf();
    c.vectorizer.kind = kind;
    c.vectorizer.params.embedding.epochs = 2;
    c.classifier = ClassifierSpec::default_for(algo).unwrap();
    c
}

#[test]
fn fitted_artifacts_never_see_test_records() {
    let dir = tempfile::tempdir().unwrap();
    let (data, records) = marked_corpus(dir.path());
    let ing = ingest(&records, &TokenizerConfig::default()).unwrap();
    for kind in [VectorizationKind::Count, VectorizationKind::W2vSkipGramAvg] {
        let c = config(&data, &dir.path().join(kind.name()), kind, "naive-bayes");
        let c = if kind.is_sparse() { c } else { PipelineConfig { classifier: ClassifierSpec::default_for("knn").unwrap(), ..c } };
        let out = run_train(&c).unwrap();
        let labels: Vec<usize> = ing.docs.iter().map(|d| d.label).collect();
        let parts = corpus::split(&labels, c.split.test_fraction, c.seed, c.split.stratified).unwrap();
        let known: HashSet<String> = match out.archive.vectorizer.table() {
            Some(t) => t.words().iter().cloned().collect(),
            None => out.archive.vectorizer.artifacts.vocabulary.as_ref().unwrap().terms().iter().cloned().collect(),
        };
        for &i in &parts.test {
            assert!(!known.contains(&format!("id{i}")), "{}: test record {i} leaked", kind.name());
        }
        assert!(parts.train.iter().all(|&i| known.contains(&format!("id{i}"))));
    }
}

#[test]
fn archives_round_trip_losslessly() {
    let dir = tempfile::tempdir().unwrap();
    let (data, records) = marked_corpus(dir.path());
    let docs = ingest(&records, &TokenizerConfig::default()).unwrap().docs;
    for algo in ClassifierSpec::ALGORITHMS {
        let kind = if algo == "naive-bayes" { VectorizationKind::TfIdf } else { VectorizationKind::FastTextSkipGram };
        let c = config(&data, &dir.path().join(algo), kind, algo);
        let out = run_train(&c).unwrap();
        let loaded = ModelArchive::load(&out.archive_path).unwrap();
        assert_eq!(loaded.model, out.archive.model, "{algo}");
        assert_eq!(loaded.vectorizer, out.archive.vectorizer, "{algo}");
        assert_eq!(loaded.config, c);
        let xs = out.archive.vectorizer.transform_all(&docs).unwrap();
        assert_eq!(loaded.model.predict_all(&xs).unwrap(), out.archive.model.predict_all(&xs).unwrap());
    }
}

#[test]
fn corrupted_archives_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let (data, _) = marked_corpus(dir.path());
    let out = run_train(&config(&data, dir.path(), VectorizationKind::Count, "logreg")).unwrap();
    let bytes = std::fs::read(&out.archive_path).unwrap();
    assert!(ModelArchive::from_bytes(&bytes[..bytes.len() / 2]).is_err());
    let mut wrong_version = bytes.clone();
    wrong_version[8] = 9;
    assert!(ModelArchive::from_bytes(&wrong_version).is_err());
}

#[test]
fn cv_is_reproducible_per_seed() {
    let dir = tempfile::tempdir().unwrap();
    let (data, _) = marked_corpus(dir.path());
    let mut c = config(&data, dir.path(), VectorizationKind::TfIdf, "naive-bayes");
    c.cv.k = 5;
    let a = run_cv(&c).unwrap();
    let b = run_cv(&c).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.folds.len(), 5);
}

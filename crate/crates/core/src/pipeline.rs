//! Config-driven runs: train/evaluate, cross-validate, grid search, predict.
//!
//! Every run validates its whole configuration before touching data, wraps
//! failures with the stage they came from, and writes each output file
//! atomically. A failed run removes the files it already wrote.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::archive::{write_atomic, ModelArchive};
use crate::classifiers::ClassifierSpec;
use crate::corpus::{self, CsvSchema, Ingested, TokenizedDoc, TokenizerConfig};
use crate::embeddings::{VectorizationKind, VectorizerParams};
use crate::error::{Error, Result};
use crate::evaluation::EvalReport;
use crate::tuning::{self, CvResult, Execution, GridResult, ParamGrid, RunSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetConfig {
    pub path: PathBuf,
    pub text_column: String,
    pub label_column: String,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        let schema = CsvSchema::default();
        DatasetConfig {
            path: PathBuf::new(),
            text_column: schema.text_column,
            label_column: schema.label_column,
        }
    }
}

impl DatasetConfig {
    pub fn schema(&self) -> CsvSchema {
        CsvSchema {
            text_column: self.text_column.clone(),
            label_column: self.label_column.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VectorizerSection {
    pub kind: VectorizationKind,
    #[serde(flatten)]
    pub params: VectorizerParams,
}

impl Default for VectorizerSection {
    fn default() -> Self {
        VectorizerSection {
            kind: VectorizationKind::TfIdf,
            params: VectorizerParams::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitConfig {
    pub test_fraction: f64,
    pub stratified: bool,
}

impl Default for SplitConfig {
    fn default() -> Self {
        SplitConfig {
            test_fraction: 0.2,
            stratified: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CvConfig {
    pub k: usize,
    pub stratified: bool,
}

impl Default for CvConfig {
    fn default() -> Self {
        CvConfig {
            k: 10,
            stratified: true,
        }
    }
}

/// Full run configuration, read from TOML.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: u64,
    /// Worker threads for folds, grid points, trees and SVM machines.
    pub threads: usize,
    pub output_dir: PathBuf,
    pub dataset: DatasetConfig,
    pub tokenizer: TokenizerConfig,
    pub vectorizer: VectorizerSection,
    pub classifier: ClassifierSpec,
    pub split: SplitConfig,
    pub cv: CvConfig,
    /// Hyperparameter grid; `grid` runs fall back to the algorithm's
    /// default grid when absent.
    pub grid: Option<ParamGrid>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            seed: 1,
            threads: 1,
            output_dir: PathBuf::from("output"),
            dataset: DatasetConfig::default(),
            tokenizer: TokenizerConfig::default(),
            vectorizer: VectorizerSection::default(),
            classifier: ClassifierSpec::default_for("logreg").expect("known algorithm"),
            split: SplitConfig::default(),
            cv: CvConfig::default(),
            grid: None,
        }
    }
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::config("config", e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::config("config", e.to_string()))
    }

    pub fn run_spec(&self) -> RunSpec {
        RunSpec::new(
            self.vectorizer.kind,
            self.vectorizer.params.clone(),
            self.classifier.clone(),
            self.seed,
        )
    }

    /// The grid a `grid` run explores.
    pub fn effective_grid(&self) -> Result<ParamGrid> {
        match &self.grid {
            Some(g) => Ok(g.clone()),
            None => ParamGrid::default_for(self.classifier.algorithm()).ok_or_else(|| {
                Error::config(
                    "grid",
                    format!("no grid given and `{}` has no default grid", self.classifier.algorithm()),
                )
            }),
        }
    }

    /// Checks everything that can be checked without reading data.
    pub fn validate(&self) -> Result<()> {
        if self.threads == 0 {
            return Err(Error::config("threads", "must be at least 1"));
        }
        if self.dataset.text_column.is_empty() || self.dataset.label_column.is_empty() {
            return Err(Error::config("dataset", "column names must not be empty"));
        }
        if self.dataset.text_column == self.dataset.label_column {
            return Err(Error::config("dataset", "text and label columns must differ"));
        }
        if !(self.split.test_fraction > 0.0 && self.split.test_fraction < 1.0) {
            return Err(Error::config("split.test_fraction", "must lie in (0, 1)"));
        }
        if self.cv.k < 2 {
            return Err(Error::config("cv.k", "must be at least 2"));
        }
        self.run_spec().validate()?;
        if let Some(g) = &self.grid {
            g.specs(&self.classifier)?;
        }
        Ok(())
    }

    fn require_dataset(&self) -> Result<()> {
        if self.dataset.path.as_os_str().is_empty() {
            return Err(Error::config("dataset.path", "required"));
        }
        Ok(())
    }

    fn execution(&self) -> Execution {
        if self.threads > 1 {
            Execution::Parallel
        } else {
            Execution::Sequential
        }
    }

    fn pool(&self) -> Result<rayon::ThreadPool> {
        rayon::ThreadPoolBuilder::new()
            .num_threads(self.threads)
            .build()
            .map_err(|e| Error::config("threads", e.to_string()))
    }
}

/// Tracks files written by a run so a failure can remove them.
struct Outputs {
    written: Vec<PathBuf>,
}

impl Outputs {
    fn new(dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        Ok(Outputs { written: Vec::new() })
    }

    fn write(&mut self, path: PathBuf, bytes: &[u8]) -> Result<()> {
        write_atomic(&path, bytes)?;
        self.written.push(path);
        Ok(())
    }

    fn rollback(self) {
        for p in self.written {
            let _ = std::fs::remove_file(p);
        }
    }
}

fn with_outputs<T>(dir: &Path, f: impl FnOnce(&mut Outputs) -> Result<T>) -> Result<T> {
    let mut out = Outputs::new(dir).map_err(|e| e.in_stage("write"))?;
    match f(&mut out) {
        Ok(v) => Ok(v),
        Err(e) => {
            out.rollback();
            Err(e.in_stage("write"))
        }
    }
}

fn ingest(config: &PipelineConfig) -> Result<Ingested> {
    config.require_dataset()?;
    let (records, _) = corpus::load_csv(&config.dataset.path, &config.dataset.schema())?;
    let ing = corpus::ingest(&records, &config.tokenizer)?;
    if ing.docs.len() < ing.labels.len() {
        return Err(Error::Data(format!(
            "{} usable records cannot cover {} classes",
            ing.docs.len(),
            ing.labels.len()
        )));
    }
    Ok(ing)
}

fn log_line(command: &str, config: &PipelineConfig, started: Instant, extra: serde_json::Value) -> String {
    let mut record = json!({
        "event": "run",
        "command": command,
        "seed": config.seed,
        "threads": config.threads,
        "wall_seconds": started.elapsed().as_secs_f64(),
    });
    if let (Some(r), serde_json::Value::Object(e)) = (record.as_object_mut(), extra) {
        r.extend(e);
    }
    record.to_string()
}

fn pick(docs: &[TokenizedDoc], idx: &[usize]) -> Vec<TokenizedDoc> {
    idx.iter().map(|&i| docs[i].clone()).collect()
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub archive: ModelArchive,
    pub report: EvalReport,
    pub archive_path: PathBuf,
    pub report_path: PathBuf,
}

/// Ingest, split, fit on the training part, evaluate on the test part, and
/// write `model.pcm`, `report.txt`, `report.json` and `train.log.jsonl`.
pub fn run_train(config: &PipelineConfig) -> Result<TrainOutcome> {
    config.validate().map_err(|e| e.in_stage("config"))?;
    let started = Instant::now();
    let ing = ingest(config).map_err(|e| e.in_stage("ingest"))?;
    let labels: Vec<usize> = ing.docs.iter().map(|d| d.label).collect();
    let parts = corpus::split(&labels, config.split.test_fraction, config.seed, config.split.stratified)
        .map_err(|e| e.in_stage("split"))?;
    let (train, test) = (pick(&ing.docs, &parts.train), pick(&ing.docs, &parts.test));
    let spec = config.run_spec();
    let n_classes = ing.labels.len();
    let (fit, report) = config
        .pool()?
        .install(|| tuning::fit_and_evaluate(&spec, &train, &test, n_classes))
        .map_err(|e| e.in_stage("fit"))?;
    let mut model = fit.model;
    model.diagnostics.warnings.sort();
    let archive = ModelArchive::new(ing.labels.clone(), fit.vectorizer, model, config.clone());
    let dir = &config.output_dir;
    let archive_path = dir.join("model.pcm");
    let report_path = dir.join("report.txt");
    with_outputs(dir, |out| {
        out.write(archive_path.clone(), &archive.to_bytes()?)?;
        let header = format!("{}\ntrain {} / test {} records\n\n", spec.label(), train.len(), test.len());
        out.write(report_path.clone(), (header + &report.render(ing.labels.labels())).as_bytes())?;
        let json = serde_json::to_vec_pretty(&json!({
            "run": spec,
            "labels": ing.labels.labels(),
            "rejected": ing.rejected,
            "warnings": archive.model.diagnostics.warnings,
            "report": report,
        }))
        .map_err(|e| Error::Data(e.to_string()))?;
        out.write(dir.join("report.json"), &json)?;
        let log = log_line("train", config, started, json!({ "accuracy": report.accuracy }));
        out.write(dir.join("train.log.jsonl"), format!("{log}\n").as_bytes())
    })?;
    Ok(TrainOutcome {
        archive,
        report,
        archive_path,
        report_path,
    })
}

/// k-fold cross-validation over the whole dataset; writes `cv.json` and
/// `cv.log.jsonl` (one record per fold plus a run record).
pub fn run_cv(config: &PipelineConfig) -> Result<CvResult> {
    config.validate().map_err(|e| e.in_stage("config"))?;
    let started = Instant::now();
    let ing = ingest(config).map_err(|e| e.in_stage("ingest"))?;
    let labels: Vec<usize> = ing.docs.iter().map(|d| d.label).collect();
    let plan = corpus::make_folds(&labels, config.cv.k, config.seed, config.cv.stratified)
        .map_err(|e| e.in_stage("folds"))?;
    let spec = config.run_spec();
    let cv = config
        .pool()?
        .install(|| tuning::cross_validate(&spec, &ing.docs, ing.labels.len(), &plan, config.execution()))
        .map_err(|e| e.in_stage("cv"))?;
    let dir = &config.output_dir;
    with_outputs(dir, |out| {
        let body = serde_json::to_vec_pretty(&json!({ "run": spec, "labels": ing.labels.labels(), "cv": cv }))
            .map_err(|e| Error::Data(e.to_string()))?;
        out.write(dir.join("cv.json"), &body)?;
        let mut log = String::new();
        for r in tuning::fold_records(&cv, None, &[]) {
            log += &serde_json::to_string(&r).map_err(|e| Error::Data(e.to_string()))?;
            log.push('\n');
        }
        log += &log_line("cv", config, started, json!({ "mean_accuracy": cv.accuracy.mean }));
        log.push('\n');
        out.write(dir.join("cv.log.jsonl"), log.as_bytes())
    })?;
    Ok(cv)
}

/// Grid search by cross-validation; writes `grid.json` and `grid.log.jsonl`.
pub fn run_grid(config: &PipelineConfig) -> Result<GridResult> {
    config.validate().map_err(|e| e.in_stage("config"))?;
    let grid = config.effective_grid().map_err(|e| e.in_stage("config"))?;
    grid.specs(&config.classifier).map_err(|e| e.in_stage("config"))?;
    let started = Instant::now();
    let ing = ingest(config).map_err(|e| e.in_stage("ingest"))?;
    let labels: Vec<usize> = ing.docs.iter().map(|d| d.label).collect();
    let plan = corpus::make_folds(&labels, config.cv.k, config.seed, config.cv.stratified)
        .map_err(|e| e.in_stage("folds"))?;
    let spec = config.run_spec();
    let result = config
        .pool()?
        .install(|| {
            tuning::grid_search(&spec, &grid, &ing.docs, ing.labels.len(), &plan, config.execution())
        })
        .map_err(|e| e.in_stage("grid"))?;
    let dir = &config.output_dir;
    with_outputs(dir, |out| {
        let body = serde_json::to_vec_pretty(&json!({
            "labels": ing.labels.labels(),
            "best": result.best,
            "best_params": result.best().params,
            "points": result.points,
        }))
        .map_err(|e| Error::Data(e.to_string()))?;
        out.write(dir.join("grid.json"), &body)?;
        let mut log = String::new();
        for (i, p) in result.points.iter().enumerate() {
            for r in tuning::fold_records(&p.cv, Some(i), &p.params) {
                log += &serde_json::to_string(&r).map_err(|e| Error::Data(e.to_string()))?;
                log.push('\n');
            }
        }
        log += &log_line("grid", config, started, json!({ "best": result.best }));
        log.push('\n');
        out.write(dir.join("grid.log.jsonl"), log.as_bytes())
    })?;
    Ok(result)
}

/// Labels every row of `input` (read with the archive's text column) and
/// writes `text,predicted` rows in input order. Returns the row count.
pub fn run_predict(archive_path: &Path, input: &Path, output: &Path) -> Result<usize> {
    let archive = ModelArchive::load(archive_path).map_err(|e| e.in_stage("load"))?;
    let column = &archive.config.dataset.text_column;
    let texts = read_texts(input, column).map_err(|e| e.in_stage("read"))?;
    let mut predicted = Vec::with_capacity(texts.len());
    for text in &texts {
        let doc = TokenizedDoc {
            tokens: corpus::tokenize(text, &archive.config.tokenizer),
            label: 0,
        };
        let x = archive.vectorizer.transform(&doc).map_err(|e| e.in_stage("predict"))?;
        let y = archive.model.predict(&x).map_err(|e| e.in_stage("predict"))?;
        predicted.push(archive.labels.label(y).expect("model classes match labels").to_string());
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| Error::Data(e.to_string());
    w.write_record([column.as_str(), "predicted"]).map_err(csv_err)?;
    for (t, p) in texts.iter().zip(&predicted) {
        w.write_record([t, p]).map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Data(e.to_string()))?;
    write_atomic(output, &bytes).map_err(|e| e.in_stage("write"))?;
    Ok(texts.len())
}

fn read_texts(path: &Path, column: &str) -> Result<Vec<String>> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.iter().all(|b| b.is_ascii_whitespace()) {
        return Ok(Vec::new());
    }
    let mut reader = csv::ReaderBuilder::new().flexible(false).from_reader(bytes.as_slice());
    let headers = reader
        .headers()
        .map_err(|e| Error::Csv {
            path: path.into(),
            line: 1,
            message: e.to_string(),
        })?
        .clone();
    let idx = headers
        .iter()
        .position(|h| h.trim_start_matches('\u{feff}') == column)
        .ok_or_else(|| Error::MissingColumn {
            path: path.into(),
            column: column.into(),
        })?;
    let mut texts = Vec::new();
    for row in reader.records() {
        let row = row.map_err(|e| Error::Csv {
            path: path.into(),
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        texts.push(row.get(idx).unwrap_or("").to_string());
    }
    Ok(texts)
}

/// Human-readable summary of an archive's metadata.
pub fn inspect(archive_path: &Path) -> Result<String> {
    let a = ModelArchive::load(archive_path)?;
    let dim = a.vectorizer.dim()?;
    let summary = json!({
        "format_version": a.format_version,
        "classes": a.labels.labels(),
        "vectorization": a.vectorizer.kind,
        "feature_dim": dim,
        "classifier": a.model.spec,
        "warnings": a.model.diagnostics.warnings,
        "seed": a.config.seed,
    });
    serde_json::to_string_pretty(&summary).map_err(|e| Error::Data(e.to_string()))
}

//! Record loading, tokenization, word n-grams, and deterministic
//! train/test splits and fold plans.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use unicode_normalization::char::is_combining_mark;
use unicode_normalization::UnicodeNormalization;

use crate::error::{Error, Result};

/// Joins the words of a multi-word term. `tokenize` never emits it because
/// it is not alphanumeric.
pub const NGRAM_SEPARATOR: char = '\u{1F}';

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawRecord {
    pub text: String,
    pub label: String,
}

/// One tokenized product name with its class index.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenizedDoc {
    pub tokens: Vec<String>,
    pub label: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TokenizerConfig {
    /// Strip combining marks after canonical decomposition ("ș" -> "s").
    pub fold_diacritics: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CsvSchema {
    pub text_column: String,
    pub label_column: String,
}

impl Default for CsvSchema {
    fn default() -> Self {
        CsvSchema {
            text_column: "name".into(),
            label_column: "category".into(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct LoadDiagnostics {
    /// 1-based file line numbers of rows skipped for an empty text or label.
    pub skipped_lines: Vec<u64>,
}

impl LoadDiagnostics {
    pub fn skipped(&self) -> usize {
        self.skipped_lines.len()
    }
}

/// Reads labeled records from a headered, comma-separated UTF-8 file.
pub fn load_csv(path: &Path, schema: &CsvSchema) -> Result<(Vec<RawRecord>, LoadDiagnostics)> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(file, path, schema)
}

/// Same as [`load_csv`] over any reader; `origin` only names the source in errors.
pub fn read_csv<R: std::io::Read>(
    reader: R,
    origin: &Path,
    schema: &CsvSchema,
) -> Result<(Vec<RawRecord>, LoadDiagnostics)> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers = rdr.headers().map_err(|e| csv_error(origin, &e))?.clone();
    let column = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::MissingColumn {
                path: origin.to_path_buf(),
                column: name.to_string(),
            })
    };
    let text_col = column(&schema.text_column)?;
    let label_col = column(&schema.label_column)?;

    let mut records = Vec::new();
    let mut diag = LoadDiagnostics::default();
    for row in rdr.records() {
        let row = row.map_err(|e| csv_error(origin, &e))?;
        let line = row.position().map_or(0, |p| p.line());
        let text = row.get(text_col).unwrap_or("").trim();
        let label = row.get(label_col).unwrap_or("").trim();
        if text.is_empty() || label.is_empty() {
            diag.skipped_lines.push(line);
            continue;
        }
        records.push(RawRecord {
            text: text.to_string(),
            label: label.to_string(),
        });
    }
    Ok((records, diag))
}

fn csv_error(origin: &Path, e: &csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line());
    let message = match e.kind() {
        csv::ErrorKind::UnequalLengths {
            expected_len, len, ..
        } => format!("expected {expected_len} fields, found {len} (check quoting)"),
        _ => e.to_string(),
    };
    Error::Csv {
        path: origin.to_path_buf(),
        line,
        message,
    }
}

/// Lowercases and splits on every non-alphanumeric character. Digits stay
/// inside their token ("500g").
pub fn tokenize(text: &str, config: &TokenizerConfig) -> Vec<String> {
    let lowered = text.to_lowercase();
    let normalized: String = if config.fold_diacritics {
        lowered.nfd().filter(|c| !is_combining_mark(*c)).nfc().collect()
    } else {
        lowered
    };
    normalized
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_string)
        .collect()
}

/// All contiguous n-grams for n = 1..=max_n, grouped by n, left to right.
pub fn word_ngrams<S: AsRef<str>>(tokens: &[S], max_n: usize) -> Vec<String> {
    let max_n = max_n.max(1);
    let mut out = Vec::new();
    for n in 1..=max_n.min(tokens.len()) {
        for window in tokens.windows(n) {
            let mut term = String::from(window[0].as_ref());
            for w in &window[1..] {
                term.push(NGRAM_SEPARATOR);
                term.push_str(w.as_ref());
            }
            out.push(term);
        }
    }
    out
}

/// Renders a term with `_` in place of the internal separator.
pub fn display_term(term: &str) -> String {
    term.replace(NGRAM_SEPARATOR, "_")
}

/// Bijection between label strings and contiguous class indices, ordered by
/// label string.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelDictionary {
    labels: Vec<String>,
}

impl LabelDictionary {
    pub fn from_labels<'a>(labels: impl IntoIterator<Item = &'a str>) -> Result<Self> {
        let set: BTreeSet<&str> = labels.into_iter().collect();
        if set.len() < 2 {
            return Err(Error::Data(format!(
                "need at least 2 distinct labels, found {}",
                set.len()
            )));
        }
        Ok(LabelDictionary {
            labels: set.into_iter().map(str::to_string).collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.binary_search_by(|l| l.as_str().cmp(label)).ok()
    }

    pub fn label(&self, index: usize) -> Option<&str> {
        self.labels.get(index).map(String::as_str)
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }
}

/// A record whose text produced no tokens.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RejectedRecord {
    pub position: usize,
    pub text: String,
}

#[derive(Debug, Clone)]
pub struct Ingested {
    pub docs: Vec<TokenizedDoc>,
    pub labels: LabelDictionary,
    pub rejected: Vec<RejectedRecord>,
}

/// Tokenizes records and maps labels to class indices. Records with no
/// tokens are reported in `rejected` and left out of `docs`.
pub fn ingest(records: &[RawRecord], config: &TokenizerConfig) -> Result<Ingested> {
    let labels = LabelDictionary::from_labels(records.iter().map(|r| r.label.as_str()))?;
    let mut docs = Vec::with_capacity(records.len());
    let mut rejected = Vec::new();
    for (position, r) in records.iter().enumerate() {
        let tokens = tokenize(&r.text, config);
        if tokens.is_empty() {
            rejected.push(RejectedRecord {
                position,
                text: r.text.clone(),
            });
            continue;
        }
        let label = labels.index_of(&r.label).expect("label from same records");
        docs.push(TokenizedDoc { tokens, label });
    }
    Ok(Ingested {
        docs,
        labels,
        rejected,
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

fn class_groups(labels: &[usize]) -> BTreeMap<usize, Vec<usize>> {
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, &l) in labels.iter().enumerate() {
        groups.entry(l).or_default().push(i);
    }
    groups
}

/// Partitions record positions into train and test sets. With
/// `stratified`, each class contributes `round(n_c * test_fraction)` test
/// records.
pub fn split(labels: &[usize], test_fraction: f64, seed: u64, stratified: bool) -> Result<Split> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::config(
            "split.test_fraction",
            format!("must lie in (0, 1), got {test_fraction}"),
        ));
    }
    if labels.len() < 2 {
        return Err(Error::Data("need at least 2 records to split".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut test = Vec::new();
    if stratified {
        let groups = class_groups(labels);
        let small: Vec<String> = groups
            .iter()
            .filter(|(_, members)| members.len() < 2)
            .map(|(c, _)| c.to_string())
            .collect();
        if !small.is_empty() {
            return Err(Error::Data(format!(
                "stratified split needs at least 2 records per class; too few in class(es) {}",
                small.join(", ")
            )));
        }
        for (_, mut members) in groups {
            members.shuffle(&mut rng);
            let n_test = (members.len() as f64 * test_fraction).round() as usize;
            test.extend_from_slice(&members[..n_test.min(members.len() - 1)]);
        }
    } else {
        let mut all: Vec<usize> = (0..labels.len()).collect();
        all.shuffle(&mut rng);
        let n_test = ((labels.len() as f64 * test_fraction).round() as usize)
            .clamp(1, labels.len() - 1);
        test.extend_from_slice(&all[..n_test]);
    }
    test.sort_unstable();
    let mut is_test = vec![false; labels.len()];
    for &i in &test {
        is_test[i] = true;
    }
    let train = (0..labels.len()).filter(|&i| !is_test[i]).collect();
    Ok(Split { train, test })
}

/// Assignment of records to k cross-validation folds.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub k: usize,
    pub assignment: Vec<usize>,
    pub seed: u64,
}

impl FoldPlan {
    pub fn len(&self) -> usize {
        self.assignment.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignment.is_empty()
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &f in &self.assignment {
            sizes[f] += 1;
        }
        sizes
    }

    /// `(train, held_out)` record positions for fold `fold`.
    pub fn partition(&self, fold: usize) -> (Vec<usize>, Vec<usize>) {
        let (held, train): (Vec<usize>, Vec<usize>) =
            (0..self.assignment.len()).partition(|&i| self.assignment[i] == fold);
        (train, held)
    }
}

/// Deals shuffled records round-robin into `k` folds. Stratified plans
/// shuffle within each class and deal the classes one after another, so both
/// fold sizes and per-class fold counts differ by at most one.
pub fn make_folds(labels: &[usize], k: usize, seed: u64, stratified: bool) -> Result<FoldPlan> {
    if k < 2 {
        return Err(Error::config("cv.k", format!("must be at least 2, got {k}")));
    }
    if k > labels.len() {
        return Err(Error::Data(format!(
            "cannot make {k} folds from {} records",
            labels.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let order: Vec<usize> = if stratified {
        let mut order = Vec::with_capacity(labels.len());
        for (_, mut members) in class_groups(labels) {
            members.shuffle(&mut rng);
            order.extend(members);
        }
        order
    } else {
        let mut all: Vec<usize> = (0..labels.len()).collect();
        all.shuffle(&mut rng);
        all
    };
    let mut assignment = vec![0; labels.len()];
    for (pos, &i) in order.iter().enumerate() {
        assignment[i] = pos % k;
    }
    Ok(FoldPlan {
        k,
        assignment,
        seed,
    })
}

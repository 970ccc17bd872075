//! Per-domain labeled datasets: loading, synthesis, normalization, splits.
//!
//! Every sample lives in a shared feature space of dimension `d`; labels are
//! binary (`-1`/`+1`). The target domain's training split is always treated
//! as unlabeled — labels found in an input file are dropped on load — while
//! its test split keeps labels for evaluation only.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::Path as FsPath;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Reserved domain id that marks the target domain in data files.
pub const TARGET_DOMAIN_ID: &str = "target";

/// Binary class label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "i64", into = "i64")]
pub enum Label {
    Neg,
    Pos,
}

impl Label {
    pub fn as_f64(self) -> f64 {
        match self {
            Label::Neg => -1.0,
            Label::Pos => 1.0,
        }
    }

    pub fn as_i64(self) -> i64 {
        match self {
            Label::Neg => -1,
            Label::Pos => 1,
        }
    }

    /// Sign of a decision score. An exact zero maps to `Pos`.
    pub fn from_score(score: f64) -> Label {
        if score < 0.0 {
            Label::Neg
        } else {
            Label::Pos
        }
    }

    pub fn flipped(self) -> Label {
        match self {
            Label::Neg => Label::Pos,
            Label::Pos => Label::Neg,
        }
    }
}

impl TryFrom<i64> for Label {
    type Error = String;

    fn try_from(value: i64) -> std::result::Result<Self, String> {
        match value {
            -1 => Ok(Label::Neg),
            1 => Ok(Label::Pos),
            other => Err(format!("label {other} is not -1 or 1")),
        }
    }
}

impl From<Label> for i64 {
    fn from(label: Label) -> i64 {
        label.as_i64()
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_i64())
    }
}

/// One observation: a feature vector plus an optional binary label.
///
/// Labels are optional only to represent the unsupervised target training
/// split; source samples and evaluation samples always carry one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub features: Vec<f64>,
    pub label: Option<Label>,
}

impl Sample {
    pub fn labeled(features: Vec<f64>, label: Label) -> Sample {
        Sample {
            features,
            label: Some(label),
        }
    }

    pub fn unlabeled(features: Vec<f64>) -> Sample {
        Sample {
            features,
            label: None,
        }
    }

    pub fn norm(&self) -> f64 {
        self.features.iter().map(|x| x * x).sum::<f64>().sqrt()
    }
}

/// A single domain's samples, split into train and test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub domain_id: String,
    pub train: Vec<Sample>,
    pub test: Vec<Sample>,
}

impl Dataset {
    /// Validates that the train split is non-empty and that every sample in
    /// both splits shares one feature dimension.
    pub fn new(domain_id: impl Into<String>, train: Vec<Sample>, test: Vec<Sample>) -> Result<Dataset> {
        let domain_id = domain_id.into();
        if train.is_empty() {
            return Err(Error::InvalidArgument(format!(
                "domain {domain_id:?} has an empty training split"
            )));
        }
        let dim = train[0].features.len();
        for sample in train.iter().chain(test.iter()) {
            if sample.features.len() != dim {
                return Err(Error::DimensionMismatch {
                    domain: domain_id,
                    expected: dim,
                    found: sample.features.len(),
                });
            }
        }
        Ok(Dataset {
            domain_id,
            train,
            test,
        })
    }

    /// Number of training samples (`n_t`).
    pub fn n(&self) -> usize {
        self.train.len()
    }

    /// Feature dimension shared by every sample.
    pub fn dim(&self) -> usize {
        self.train[0].features.len()
    }
}

/// `K` labeled source domains plus one target whose training labels are
/// withheld. Target test labels are retained for evaluation only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainCollection {
    pub sources: Vec<Dataset>,
    pub target: Dataset,
}

impl DomainCollection {
    /// Validates id uniqueness and a shared feature dimension, and strips
    /// any labels present on the target's training split.
    pub fn new(sources: Vec<Dataset>, mut target: Dataset) -> Result<DomainCollection> {
        if sources.is_empty() {
            return Err(Error::InvalidArgument(
                "a collection needs at least one source domain".into(),
            ));
        }
        let mut seen = std::collections::BTreeSet::new();
        for ds in sources.iter().chain(std::iter::once(&target)) {
            if !seen.insert(ds.domain_id.clone()) {
                return Err(Error::InvalidArgument(format!(
                    "duplicate domain id {:?}",
                    ds.domain_id
                )));
            }
        }
        let dim = sources[0].dim();
        for ds in sources.iter().chain(std::iter::once(&target)) {
            if ds.dim() != dim {
                return Err(Error::DimensionMismatch {
                    domain: ds.domain_id.clone(),
                    expected: dim,
                    found: ds.dim(),
                });
            }
        }
        for sample in &mut target.train {
            sample.label = None;
        }
        Ok(DomainCollection { sources, target })
    }

    pub fn dim(&self) -> usize {
        self.sources[0].dim()
    }

    /// Number of source domains `K`.
    pub fn k(&self) -> usize {
        self.sources.len()
    }

    pub fn source(&self, id: &str) -> Option<&Dataset> {
        self.sources.iter().find(|d| d.domain_id == id)
    }

    /// Training-set sizes per domain, target included.
    pub fn sizes(&self) -> BTreeMap<String, u64> {
        self.sources
            .iter()
            .chain(std::iter::once(&self.target))
            .map(|d| (d.domain_id.clone(), d.n() as u64))
            .collect()
    }
}

/// On-disk formats for domain collections.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Jsonl,
}

impl FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "csv" => Ok(Format::Csv),
            "jsonl" => Ok(Format::Jsonl),
            other => Err(format!("unknown format {other:?} (expected csv or jsonl)")),
        }
    }
}

impl fmt::Display for Format {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Format::Csv => write!(f, "csv"),
            Format::Jsonl => write!(f, "jsonl"),
        }
    }
}

#[derive(Debug, Deserialize, Serialize)]
struct JsonlRow {
    domain: String,
    split: String,
    label: Option<i64>,
    features: Vec<f64>,
}

struct ParsedRow {
    line: usize,
    domain: String,
    is_train: bool,
    label: Option<Label>,
    features: Vec<f64>,
}

/// Loads a domain collection from a CSV or JSONL file.
///
/// The domain whose id equals [`TARGET_DOMAIN_ID`] becomes the target; all
/// other domains become sources in order of first appearance. Labels on
/// target training rows are dropped; every other row must carry one.
pub fn load_collection(path: impl AsRef<FsPath>, format: Format) -> Result<DomainCollection> {
    let path = path.as_ref();
    let contents = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let rows = match format {
        Format::Csv => parse_csv(&contents)?,
        Format::Jsonl => parse_jsonl(&contents)?,
    };
    assemble(rows)
}

fn parse_label_field(raw: &str, line: usize) -> Result<Option<Label>> {
    let raw = raw.trim();
    if raw.is_empty() {
        return Ok(None);
    }
    let value: i64 = raw.parse().map_err(|_| Error::InvalidLabel {
        line,
        value: raw.to_string(),
    })?;
    Label::try_from(value)
        .map(Some)
        .map_err(|_| Error::InvalidLabel {
            line,
            value: raw.to_string(),
        })
}

fn parse_split_field(raw: &str, line: usize) -> Result<bool> {
    match raw.trim() {
        "train" => Ok(true),
        "test" => Ok(false),
        other => Err(Error::MalformedRow {
            line,
            message: format!("split {other:?} is not train or test"),
        }),
    }
}

fn parse_csv(contents: &str) -> Result<Vec<ParsedRow>> {
    let mut lines = contents.lines().enumerate();
    let (_, header) = lines.next().ok_or(Error::MalformedRow {
        line: 1,
        message: "empty file".into(),
    })?;
    let header_fields: Vec<&str> = header.split(',').collect();
    if header_fields.len() < 4
        || header_fields[0] != "domain"
        || header_fields[1] != "split"
        || header_fields[2] != "label"
    {
        return Err(Error::MalformedRow {
            line: 1,
            message: format!("header must start with domain,split,label,f0,... got {header:?}"),
        });
    }
    let dim = header_fields.len() - 3;
    for (i, field) in header_fields[3..].iter().enumerate() {
        if *field != format!("f{i}") {
            return Err(Error::MalformedRow {
                line: 1,
                message: format!("feature column {} should be named f{i}", field),
            });
        }
    }

    let mut rows = Vec::new();
    for (idx, raw) in lines {
        let line = idx + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = raw.split(',').collect();
        if fields.len() < 3 {
            return Err(Error::MalformedRow {
                line,
                message: format!("expected at least 3 fields, got {}", fields.len()),
            });
        }
        let domain = fields[0].trim().to_string();
        if domain.is_empty() {
            return Err(Error::MalformedRow {
                line,
                message: "empty domain id".into(),
            });
        }
        let is_train = parse_split_field(fields[1], line)?;
        let label = parse_label_field(fields[2], line)?;
        let found = fields.len() - 3;
        if found != dim {
            return Err(Error::DimensionMismatch {
                domain,
                expected: dim,
                found,
            });
        }
        let mut features = Vec::with_capacity(dim);
        for field in &fields[3..] {
            let value: f64 = field.trim().parse().map_err(|_| Error::MalformedRow {
                line,
                message: format!("feature {field:?} is not a number"),
            })?;
            features.push(value);
        }
        rows.push(ParsedRow {
            line,
            domain,
            is_train,
            label,
            features,
        });
    }
    Ok(rows)
}

fn parse_jsonl(contents: &str) -> Result<Vec<ParsedRow>> {
    let mut rows = Vec::new();
    for (idx, raw) in contents.lines().enumerate() {
        let line = idx + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let row: JsonlRow = serde_json::from_str(raw).map_err(|err| Error::MalformedRow {
            line,
            message: err.to_string(),
        })?;
        let label = match row.label {
            None => None,
            Some(value) => Some(Label::try_from(value).map_err(|_| Error::InvalidLabel {
                line,
                value: value.to_string(),
            })?),
        };
        let is_train = parse_split_field(&row.split, line)?;
        rows.push(ParsedRow {
            line,
            domain: row.domain,
            is_train,
            label,
            features: row.features,
        });
    }
    Ok(rows)
}

fn assemble(rows: Vec<ParsedRow>) -> Result<DomainCollection> {
    if rows.is_empty() {
        return Err(Error::InvalidArgument("no data rows in file".into()));
    }
    let dim = rows[0].features.len();
    // Preserve first-appearance order of domains.
    let mut order: Vec<String> = Vec::new();
    let mut buckets: BTreeMap<String, (Vec<Sample>, Vec<Sample>)> = BTreeMap::new();
    for row in rows {
        if row.features.len() != dim {
            return Err(Error::DimensionMismatch {
                domain: row.domain,
                expected: dim,
                found: row.features.len(),
            });
        }
        let target_train = row.domain == TARGET_DOMAIN_ID && row.is_train;
        if row.label.is_none() && !target_train {
            return Err(Error::MalformedRow {
                line: row.line,
                message: "label may be empty only on target train rows".into(),
            });
        }
        if !buckets.contains_key(&row.domain) {
            order.push(row.domain.clone());
        }
        let bucket = buckets.entry(row.domain).or_default();
        let sample = Sample {
            features: row.features,
            label: row.label,
        };
        if row.is_train {
            bucket.0.push(sample);
        } else {
            bucket.1.push(sample);
        }
    }

    let mut sources = Vec::new();
    let mut target = None;
    for id in order {
        let (train, test) = buckets.remove(&id).expect("bucket for seen id");
        let ds = Dataset::new(id.clone(), train, test)?;
        if id == TARGET_DOMAIN_ID {
            target = Some(ds);
        } else {
            sources.push(ds);
        }
    }
    let target = target.ok_or_else(|| {
        Error::InvalidArgument(format!(
            "no domain named {TARGET_DOMAIN_ID:?} found; the target domain must use that id"
        ))
    })?;
    DomainCollection::new(sources, target)
}

/// Serializes a collection to the same formats accepted by
/// [`load_collection`]; loading the result reproduces the collection
/// field-for-field.
pub fn save_collection(
    collection: &DomainCollection,
    path: impl AsRef<FsPath>,
    format: Format,
) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::new();
    match format {
        Format::Csv => {
            out.push_str("domain,split,label");
            for i in 0..collection.dim() {
                out.push_str(&format!(",f{i}"));
            }
            out.push('\n');
            for ds in collection
                .sources
                .iter()
                .chain(std::iter::once(&collection.target))
            {
                for (split, samples) in [("train", &ds.train), ("test", &ds.test)] {
                    for sample in samples {
                        let label = sample.label.map(|l| l.to_string()).unwrap_or_default();
                        out.push_str(&format!("{},{},{}", ds.domain_id, split, label));
                        for x in &sample.features {
                            out.push_str(&format!(",{x}"));
                        }
                        out.push('\n');
                    }
                }
            }
        }
        Format::Jsonl => {
            for ds in collection
                .sources
                .iter()
                .chain(std::iter::once(&collection.target))
            {
                for (split, samples) in [("train", &ds.train), ("test", &ds.test)] {
                    for sample in samples {
                        let row = JsonlRow {
                            domain: ds.domain_id.clone(),
                            split: split.to_string(),
                            label: sample.label.map(Label::as_i64),
                            features: sample.features.clone(),
                        };
                        out.push_str(&serde_json::to_string(&row)?);
                        out.push('\n');
                    }
                }
            }
        }
    }
    fs::write(path, out).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Rescales every feature vector by `1 / max(1, global max L2 norm)`.
///
/// One divisor is shared by all domains and splits so that inter-point
/// geometry is preserved up to a single scale factor. A collection whose
/// norms are already within the unit ball passes through unchanged.
pub fn normalize_to_unit_ball(collection: &DomainCollection) -> DomainCollection {
    let max_norm = collection
        .sources
        .iter()
        .chain(std::iter::once(&collection.target))
        .flat_map(|d| d.train.iter().chain(d.test.iter()))
        .map(Sample::norm)
        .fold(0.0_f64, f64::max);
    let divisor = max_norm.max(1.0);
    if divisor <= 1.0 {
        return collection.clone();
    }
    let scale = |ds: &Dataset| Dataset {
        domain_id: ds.domain_id.clone(),
        train: scale_samples(&ds.train, divisor),
        test: scale_samples(&ds.test, divisor),
    };
    DomainCollection {
        sources: collection.sources.iter().map(scale).collect(),
        target: scale(&collection.target),
    }
}

fn scale_samples(samples: &[Sample], divisor: f64) -> Vec<Sample> {
    samples
        .iter()
        .map(|s| Sample {
            features: s.features.iter().map(|x| x / divisor).collect(),
            label: s.label,
        })
        .collect()
}

/// Lower-triangular Cholesky factor; fails on asymmetric or non-positive-
/// definite input.
fn cholesky(cov: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let d = cov.len();
    for row in cov {
        if row.len() != d {
            return Err(Error::NotPositiveDefinite);
        }
    }
    for i in 0..d {
        for j in 0..i {
            if (cov[i][j] - cov[j][i]).abs() > 1e-12 * cov[i][i].abs().max(1.0) {
                return Err(Error::NotPositiveDefinite);
            }
        }
    }
    let mut l = vec![vec![0.0; d]; d];
    for i in 0..d {
        for j in 0..=i {
            let mut sum = cov[i][j];
            for k in 0..j {
                sum -= l[i][k] * l[j][k];
            }
            if i == j {
                if sum <= 0.0 {
                    return Err(Error::NotPositiveDefinite);
                }
                l[i][j] = sum.sqrt();
            } else {
                l[i][j] = sum / l[j][j];
            }
        }
    }
    Ok(l)
}

/// Draws a two-class Gaussian dataset: the positive class from
/// `N(mean + class_offset, covariance)` and the negative class from
/// `N(mean - class_offset, covariance)`. All samples land in the training
/// split (use [`split`] to carve out a test set). Bit-reproducible for a
/// fixed seed.
pub fn make_gaussian_domain(
    domain_id: &str,
    mean: &[f64],
    covariance: &[Vec<f64>],
    n_pos: usize,
    n_neg: usize,
    class_offset: &[f64],
    seed: u64,
) -> Result<Dataset> {
    let d = mean.len();
    if class_offset.len() != d || covariance.len() != d {
        return Err(Error::InvalidArgument(
            "mean, class_offset, and covariance must share one dimension".into(),
        ));
    }
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::InvalidArgument(
            "each class needs at least one sample".into(),
        ));
    }
    let factor = cholesky(covariance)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = |center: &[f64], label: Label, count: usize, out: &mut Vec<Sample>| {
        for _ in 0..count {
            let z: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut rng)).collect();
            let features = (0..d)
                .map(|i| {
                    let noise: f64 = factor[i][..=i]
                        .iter()
                        .zip(&z[..=i])
                        .map(|(a, b)| a * b)
                        .sum();
                    center[i] + noise
                })
                .collect();
            out.push(Sample::labeled(features, label));
        }
    };
    let pos_center: Vec<f64> = mean.iter().zip(class_offset).map(|(m, o)| m + o).collect();
    let neg_center: Vec<f64> = mean.iter().zip(class_offset).map(|(m, o)| m - o).collect();
    let mut train = Vec::with_capacity(n_pos + n_neg);
    draw(&pos_center, Label::Pos, n_pos, &mut train);
    draw(&neg_center, Label::Neg, n_neg, &mut train);
    Dataset::new(domain_id, train, Vec::new())
}

/// Deterministically re-splits all of a dataset's samples into train/test.
///
/// The test side gets `floor(test_fraction * n)` samples, clamped so each
/// side keeps at least one.
pub fn split(dataset: &Dataset, test_fraction: f64, seed: u64) -> Result<Dataset> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "test fraction must lie strictly inside (0, 1), got {test_fraction}"
        )));
    }
    let mut pool: Vec<Sample> = dataset
        .train
        .iter()
        .chain(dataset.test.iter())
        .cloned()
        .collect();
    let n = pool.len();
    if n < 2 {
        return Err(Error::InvalidArgument(
            "splitting needs at least 2 samples".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut indices: Vec<usize> = (0..n).collect();
    indices.shuffle(&mut rng);
    let n_test = ((test_fraction * n as f64).floor() as usize).clamp(1, n - 1);
    let n_train = n - n_test;

    let mut train = Vec::with_capacity(n_train);
    let mut test = Vec::with_capacity(n_test);
    for (rank, &idx) in indices.iter().enumerate() {
        let sample = std::mem::replace(&mut pool[idx], Sample::unlabeled(Vec::new()));
        if rank < n_train {
            train.push(sample);
        } else {
            test.push(sample);
        }
    }
    Dataset::new(dataset.domain_id.clone(), train, test)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn sample(features: &[f64], label: i64) -> Sample {
        Sample::labeled(features.to_vec(), Label::try_from(label).unwrap())
    }

    fn toy_csv() -> String {
        let mut s = String::from("domain,split,label,f0,f1\n");
        for (dom, rows) in [
            ("s1", [(0.1, 0.2), (0.3, 0.4), (0.5, 0.6)]),
            ("s2", [(1.0, 1.1), (1.2, 1.3), (1.4, 1.5)]),
        ] {
            for (i, (a, b)) in rows.iter().enumerate() {
                let label = if i % 2 == 0 { 1 } else { -1 };
                s.push_str(&format!("{dom},train,{label},{a},{b}\n"));
            }
        }
        s.push_str("target,train,,0.0,0.0\n");
        s.push_str("target,train,1,0.1,0.1\n");
        s.push_str("target,test,-1,0.2,0.2\n");
        s
    }

    #[test]
    fn load_counts_domains_and_sizes() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("toy.csv");
        std::fs::write(&path, toy_csv()).unwrap();
        let collection = load_collection(&path, Format::Csv).unwrap();
        assert_eq!(collection.k(), 2);
        assert_eq!(collection.sources[0].n(), 3);
        assert_eq!(collection.sources[1].n(), 3);
        assert_eq!(collection.target.n(), 2);
        assert_eq!(collection.target.test.len(), 1);
    }

    #[test]
    fn load_strips_target_train_labels_only() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("toy.csv");
        std::fs::write(&path, toy_csv()).unwrap();
        let collection = load_collection(&path, Format::Csv).unwrap();
        assert!(collection.target.train.iter().all(|s| s.label.is_none()));
        assert_eq!(collection.target.test[0].label, Some(Label::Neg));
    }

    #[test]
    fn load_rejects_wrong_dimension_row() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        let mut contents = toy_csv();
        contents.push_str("s1,train,1,0.1,0.2,0.3\n");
        std::fs::write(&path, contents).unwrap();
        let err = load_collection(&path, Format::Csv).unwrap_err();
        match err {
            Error::DimensionMismatch {
                domain,
                expected,
                found,
            } => {
                assert_eq!(domain, "s1");
                assert_eq!(expected, 2);
                assert_eq!(found, 3);
            }
            other => panic!("expected dimension mismatch, got {other}"),
        }
    }

    #[test]
    fn load_rejects_bad_label() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        let mut contents = toy_csv();
        contents.push_str("s1,train,3,0.1,0.2\n");
        std::fs::write(&path, contents).unwrap();
        let err = load_collection(&path, Format::Csv).unwrap_err();
        assert!(matches!(err, Error::InvalidLabel { .. }), "got {err}");
    }

    #[test]
    fn load_rejects_unlabeled_source_row_with_line_number() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        // line 2 is the first data row
        let contents = "domain,split,label,f0,f1\ns1,train,,0.1,0.2\ntarget,train,,0,0\ntarget,test,1,0,0\n";
        std::fs::write(&path, contents).unwrap();
        let err = load_collection(&path, Format::Csv).unwrap_err();
        match err {
            Error::MalformedRow { line, .. } => assert_eq!(line, 2),
            other => panic!("expected malformed row, got {other}"),
        }
    }

    #[test]
    fn missing_file_error_names_path() {
        let err = load_collection("/no/such/file.csv", Format::Csv).unwrap_err();
        assert!(err.to_string().contains("/no/such/file.csv"));
    }

    #[test]
    fn csv_round_trip_is_identical() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("toy.csv");
        std::fs::write(&path, toy_csv()).unwrap();
        let collection = load_collection(&path, Format::Csv).unwrap();
        for format in [Format::Csv, Format::Jsonl] {
            let out = dir.path().join(format!("echo.{format}"));
            save_collection(&collection, &out, format).unwrap();
            let reloaded = load_collection(&out, format).unwrap();
            assert_eq!(collection, reloaded);
        }
    }

    #[test]
    fn normalize_scales_by_global_max_norm() {
        let s1 = Dataset::new("s1", vec![sample(&[3.0, 4.0], 1)], vec![]).unwrap();
        let target = Dataset::new("target", vec![sample(&[0.0, 1.0], 1)], vec![]).unwrap();
        let collection = DomainCollection::new(vec![s1], target).unwrap();
        let normalized = normalize_to_unit_ball(&collection);
        assert_eq!(normalized.sources[0].train[0].features, vec![0.6, 0.8]);
        assert_eq!(normalized.target.train[0].features, vec![0.0, 0.2]);
    }

    #[test]
    fn normalize_is_identity_inside_ball() {
        let s1 = Dataset::new("s1", vec![sample(&[0.3, 0.4], 1)], vec![]).unwrap();
        let target = Dataset::new("target", vec![sample(&[0.0, 0.0], 1)], vec![]).unwrap();
        let collection = DomainCollection::new(vec![s1], target).unwrap();
        let normalized = normalize_to_unit_ball(&collection);
        assert_eq!(collection, normalized);
    }

    #[test]
    fn normalize_handles_all_zero_features() {
        let s1 = Dataset::new("s1", vec![sample(&[0.0, 0.0], 1)], vec![]).unwrap();
        let target = Dataset::new("target", vec![sample(&[0.0, 0.0], -1)], vec![]).unwrap();
        let collection = DomainCollection::new(vec![s1], target).unwrap();
        let normalized = normalize_to_unit_ball(&collection);
        assert_eq!(collection, normalized);
    }

    #[test]
    fn normalize_is_idempotent() {
        let s1 = Dataset::new(
            "s1",
            vec![sample(&[5.0, -2.0], 1), sample(&[-7.0, 1.0], -1)],
            vec![],
        )
        .unwrap();
        let target = Dataset::new("target", vec![sample(&[2.0, 2.0], 1)], vec![]).unwrap();
        let collection = DomainCollection::new(vec![s1], target).unwrap();
        let once = normalize_to_unit_ball(&collection);
        let twice = normalize_to_unit_ball(&once);
        assert_eq!(once, twice);
        let max_norm = once
            .sources
            .iter()
            .chain(std::iter::once(&once.target))
            .flat_map(|d| d.train.iter())
            .map(Sample::norm)
            .fold(0.0_f64, f64::max);
        assert!(max_norm <= 1.0 + 1e-12);
    }

    #[test]
    fn gaussian_domain_is_bit_reproducible() {
        let cov = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        let a = make_gaussian_domain("g", &[0.0, 0.0], &cov, 50, 50, &[2.0, 0.0], 9).unwrap();
        let b = make_gaussian_domain("g", &[0.0, 0.0], &cov, 50, 50, &[2.0, 0.0], 9).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.n(), 100);
        let pos = a.train.iter().filter(|s| s.label == Some(Label::Pos)).count();
        assert_eq!(pos, 50);
    }

    #[test]
    fn gaussian_class_means_match_offset() {
        let cov = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        let n = 2000;
        let ds = make_gaussian_domain("g", &[0.0, 0.0], &cov, n, n, &[2.0, 0.0], 4).unwrap();
        let mean_of = |label: Label| -> Vec<f64> {
            let picked: Vec<&Sample> = ds.train.iter().filter(|s| s.label == Some(label)).collect();
            (0..2)
                .map(|i| picked.iter().map(|s| s.features[i]).sum::<f64>() / picked.len() as f64)
                .collect()
        };
        let diff: Vec<f64> = mean_of(Label::Pos)
            .iter()
            .zip(mean_of(Label::Neg))
            .map(|(p, q)| p - q)
            .collect();
        // standard error of a mean difference with unit variance
        let se = (2.0 / n as f64).sqrt();
        assert_abs_diff_eq!(diff[0], 4.0, epsilon = 3.0 * se);
        assert_abs_diff_eq!(diff[1], 0.0, epsilon = 3.0 * se);
    }

    #[test]
    fn gaussian_rejects_non_spd_covariance() {
        let cov = vec![vec![1.0, 2.0], vec![2.0, 1.0]]; // eigenvalues 3, -1
        let err = make_gaussian_domain("g", &[0.0, 0.0], &cov, 5, 5, &[1.0, 0.0], 1).unwrap_err();
        assert!(matches!(err, Error::NotPositiveDefinite));
    }

    #[test]
    fn split_carves_floor_fraction() {
        let train = (0..10).map(|i| sample(&[i as f64], 1)).collect();
        let ds = Dataset::new("d", train, vec![]).unwrap();
        let split_ds = split(&ds, 0.2, 3).unwrap();
        assert_eq!(split_ds.train.len(), 8);
        assert_eq!(split_ds.test.len(), 2);
        // disjoint union equals input
        let mut all: Vec<f64> = split_ds
            .train
            .iter()
            .chain(split_ds.test.iter())
            .map(|s| s.features[0])
            .collect();
        all.sort_by(f64::total_cmp);
        assert_eq!(all, (0..10).map(|i| i as f64).collect::<Vec<_>>());
    }

    #[test]
    fn split_is_deterministic() {
        let train = (0..10).map(|i| sample(&[i as f64], 1)).collect();
        let ds = Dataset::new("d", train, vec![]).unwrap();
        assert_eq!(split(&ds, 0.3, 7).unwrap(), split(&ds, 0.3, 7).unwrap());
    }

    #[test]
    fn split_keeps_one_sample_per_side() {
        let ds = Dataset::new("d", vec![sample(&[0.0], 1), sample(&[1.0], -1)], vec![]).unwrap();
        let split_ds = split(&ds, 0.999, 1).unwrap();
        assert_eq!(split_ds.train.len(), 1);
        assert_eq!(split_ds.test.len(), 1);
    }

    #[test]
    fn split_rejects_out_of_range_fraction() {
        let ds = Dataset::new("d", vec![sample(&[0.0], 1), sample(&[1.0], -1)], vec![]).unwrap();
        assert!(split(&ds, 0.0, 1).is_err());
        assert!(split(&ds, 1.0, 1).is_err());
    }
}

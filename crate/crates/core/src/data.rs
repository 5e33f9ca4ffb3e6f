//! Data sources: seeded synthetic streams and CSV ingestion.
//!
//! The synthetic generator draws the ground-truth parameter once per spec
//! (integer coordinates, uniform on ⟦−10, 10⟧ — a deliberately
//! ill-conditioned range) and then streams samples with iid `U[0,1]^d`
//! features and Bernoulli labels from the logistic model. Streams are
//! iterator-valued and never materialized.
//!
//! CSV ingestion handles binary relabeling (a designated positive class
//! against everything else), one-hot expansion of categorical columns and
//! train-fitted min-max standardization.

use std::collections::HashSet;
use std::path::Path;

use nalgebra::DVector;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{sigmoid, Sample};
use crate::seed::{sub_rng, Purpose, SeedRng};

/// Recipe for a synthetic experiment: dimension plus the two seeds that
/// pin the parameter draw and the data streams.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub dim: usize,
    pub theta_seed: u64,
    pub stream_seed: u64,
}

impl SyntheticSpec {
    pub fn new(dim: usize, theta_seed: u64, stream_seed: u64) -> Self {
        assert!(dim >= 1, "dimension must be at least 1");
        Self {
            dim,
            theta_seed,
            stream_seed,
        }
    }
}

/// Draw the ground-truth parameter: `dim` independent integer coordinates,
/// uniform on {−10, …, 10}. Deterministic per `theta_seed`.
pub fn gen_theta(spec: &SyntheticSpec) -> DVector<f64> {
    let mut rng = sub_rng(spec.theta_seed, Purpose::Theta, 0);
    DVector::from_fn(spec.dim, |_, _| rng.random_range(-10i32..=10) as f64)
}

/// Streaming sample source for the logistic model at `theta`.
///
/// Per sample the generator draws the `d` feature coordinates first and the
/// label uniform last, so the draw order (and therefore every byte of the
/// stream) is pinned by the seed alone.
pub struct SampleStream {
    theta: DVector<f64>,
    rng: SeedRng,
    remaining: u64,
}

impl SampleStream {
    pub fn new(theta: DVector<f64>, rng: SeedRng, n: u64) -> Self {
        Self {
            theta,
            rng,
            remaining: n,
        }
    }
}

impl Iterator for SampleStream {
    type Item = Sample;

    fn next(&mut self) -> Option<Sample> {
        if self.remaining == 0 {
            return None;
        }
        self.remaining -= 1;
        let phi = DVector::from_fn(self.theta.len(), |_, _| self.rng.random::<f64>());
        let p = sigmoid(self.theta.dot(&phi));
        let y = self.rng.random::<f64>() < p;
        Some(Sample::new(phi, y).expect("generated features are finite"))
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let n = self.remaining as usize;
        (n, Some(n))
    }
}

/// Stream `n` samples for replication 0.
pub fn gen_stream(spec: &SyntheticSpec, n: u64) -> SampleStream {
    gen_stream_replication(spec, n, 0)
}

/// Stream `n` samples for a given replication index; replications are
/// mutually independent and individually reproducible.
pub fn gen_stream_replication(spec: &SyntheticSpec, n: u64, replication: u64) -> SampleStream {
    let theta = gen_theta(spec);
    let rng = sub_rng(spec.stream_seed, Purpose::Stream, replication);
    SampleStream::new(theta, rng, n)
}

/// Which side of a split a dataset came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SplitTag {
    Full,
    Train,
    Test,
}

/// Per-feature `(min, max)` fitted on training data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scaling {
    pub per_feature: Vec<(f64, f64)>,
}

/// Vocabulary of a one-hot-expanded categorical column, in first-seen order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ColumnVocab {
    pub column: String,
    pub categories: Vec<String>,
}

/// An in-memory dataset with its provenance.
#[derive(Clone, Debug)]
pub struct Dataset {
    pub samples: Vec<Sample>,
    pub feature_names: Vec<String>,
    pub vocabs: Vec<ColumnVocab>,
    pub split_tag: SplitTag,
    /// Present once a standardizer has been applied.
    pub scaling: Option<Scaling>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.samples.first().map_or(0, Sample::dim)
    }
}

/// How to interpret a CSV file.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CsvSpec {
    pub label_column: String,
    /// The class mapped to label 1; every other value maps to 0.
    pub positive_label: String,
    pub categorical_columns: Vec<String>,
    pub delimiter: u8,
}

impl CsvSpec {
    pub fn new(label_column: &str, positive_label: &str) -> Self {
        Self {
            label_column: label_column.to_string(),
            positive_label: positive_label.to_string(),
            categorical_columns: Vec::new(),
            delimiter: b',',
        }
    }

    pub fn with_categorical(mut self, columns: &[&str]) -> Self {
        self.categorical_columns = columns.iter().map(|s| s.to_string()).collect();
        self
    }
}

/// Load a header-first CSV into a [`Dataset`].
///
/// Two streaming passes: the first collects categorical vocabularies (in
/// first-seen order), the second builds rows. Row order is preserved.
pub fn load_csv(path: &Path, spec: &CsvSpec) -> Result<Dataset> {
    let headers = read_headers(path, spec)?;
    let label_idx = headers
        .iter()
        .position(|h| h == &spec.label_column)
        .ok_or_else(|| Error::MissingColumn {
            name: spec.label_column.clone(),
        })?;
    for cat in &spec.categorical_columns {
        if !headers.iter().any(|h| h == cat) {
            return Err(Error::MissingColumn { name: cat.clone() });
        }
    }
    let is_categorical: Vec<bool> = headers
        .iter()
        .map(|h| spec.categorical_columns.iter().any(|c| c == h))
        .collect();

    // Pass 1: vocabularies.
    let mut vocabs: Vec<Option<(Vec<String>, HashSet<String>)>> = headers
        .iter()
        .enumerate()
        .map(|(i, _)| is_categorical[i].then(|| (Vec::new(), HashSet::new())))
        .collect();
    let mut row_count = 0usize;
    {
        let mut reader = open_reader(path, spec)?;
        for record in reader.records() {
            let record = record?;
            row_count += 1;
            for (i, cell) in record.iter().enumerate() {
                if let Some((order, seen)) = vocabs.get_mut(i).and_then(Option::as_mut) {
                    if i != label_idx && seen.insert(cell.to_string()) {
                        order.push(cell.to_string());
                    }
                }
            }
        }
    }
    if row_count == 0 {
        return Err(Error::Empty { what: "csv file" });
    }

    // Expanded feature layout, original column order preserved.
    let mut feature_names = Vec::new();
    let mut column_offsets = vec![0usize; headers.len()];
    let mut width = 0usize;
    for (i, name) in headers.iter().enumerate() {
        if i == label_idx {
            continue;
        }
        column_offsets[i] = width;
        match &vocabs[i] {
            Some((order, _)) => {
                for cat in order {
                    feature_names.push(format!("{name}={cat}"));
                }
                width += order.len();
            }
            None => {
                feature_names.push(name.clone());
                width += 1;
            }
        }
    }

    // Pass 2: rows.
    let mut samples = Vec::with_capacity(row_count);
    let mut reader = open_reader(path, spec)?;
    for (row, record) in reader.records().enumerate() {
        let record = record?;
        let mut phi = DVector::zeros(width);
        let mut y = false;
        for (i, cell) in record.iter().enumerate() {
            if i == label_idx {
                y = cell == spec.positive_label;
            } else if let Some((order, _)) = &vocabs[i] {
                let slot = order.iter().position(|c| c == cell).ok_or_else(|| {
                    Error::CsvCell {
                        row: row + 1,
                        column: headers[i].clone(),
                        message: format!("unknown category {cell:?}"),
                    }
                })?;
                phi[column_offsets[i] + slot] = 1.0;
            } else {
                let value: f64 = cell.trim().parse().map_err(|e| Error::CsvCell {
                    row: row + 1,
                    column: headers[i].clone(),
                    message: format!("{e}"),
                })?;
                phi[column_offsets[i]] = value;
            }
        }
        samples.push(Sample::new(phi, y).map_err(|_| Error::CsvCell {
            row: row + 1,
            column: "<features>".into(),
            message: "non-finite value".into(),
        })?);
    }

    let vocabs = headers
        .iter()
        .zip(&vocabs)
        .filter_map(|(name, v)| {
            v.as_ref().map(|(order, _)| ColumnVocab {
                column: name.clone(),
                categories: order.clone(),
            })
        })
        .collect();

    Ok(Dataset {
        samples,
        feature_names,
        vocabs,
        split_tag: SplitTag::Full,
        scaling: None,
    })
}

fn read_headers(path: &Path, spec: &CsvSpec) -> Result<Vec<String>> {
    let mut reader = open_reader(path, spec)?;
    let headers = reader.headers()?;
    if headers.is_empty() {
        return Err(Error::Empty { what: "csv header" });
    }
    Ok(headers.iter().map(str::to_string).collect())
}

fn open_reader(path: &Path, spec: &CsvSpec) -> Result<csv::Reader<std::fs::File>> {
    Ok(csv::ReaderBuilder::new()
        .has_headers(true)
        .delimiter(spec.delimiter)
        .trim(csv::Trim::All)
        .from_path(path)?)
}

/// Fit per-feature min/max on a training set.
pub fn fit_standardizer(train: &Dataset) -> Result<Scaling> {
    if train.is_empty() {
        return Err(Error::Empty { what: "training set" });
    }
    let d = train.dim();
    let mut per_feature = vec![(f64::INFINITY, f64::NEG_INFINITY); d];
    for sample in &train.samples {
        for (j, &x) in sample.phi().iter().enumerate() {
            let (min, max) = &mut per_feature[j];
            *min = min.min(x);
            *max = max.max(x);
        }
    }
    Ok(Scaling { per_feature })
}

/// Apply a fitted scaling: `x ↦ (x − min)/(max − min)` per feature.
/// Constant training features map to 0; out-of-range values (possible on
/// test data) are deliberately not clipped.
pub fn apply_standardizer(scaling: &Scaling, ds: &Dataset) -> Result<Dataset> {
    if ds.dim() != scaling.per_feature.len() {
        return Err(Error::DimensionMismatch {
            expected: scaling.per_feature.len(),
            got: ds.dim(),
        });
    }
    let samples = ds
        .samples
        .iter()
        .map(|s| {
            let phi = DVector::from_fn(s.dim(), |j, _| {
                let (min, max) = scaling.per_feature[j];
                let range = max - min;
                if range == 0.0 {
                    0.0
                } else {
                    (s.phi()[j] - min) / range
                }
            });
            Sample::new(phi, s.y()).expect("affine map of finite values is finite")
        })
        .collect();
    Ok(Dataset {
        samples,
        feature_names: ds.feature_names.clone(),
        vocabs: ds.vocabs.clone(),
        split_tag: ds.split_tag,
        scaling: Some(scaling.clone()),
    })
}

/// Seeded uniform shuffle followed by a prefix split. The train side gets
/// `⌈fraction · n⌉` rows, the test side the remainder.
pub fn split(ds: &Dataset, train_fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    if !(0.0 < train_fraction && train_fraction < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "train fraction must lie in (0, 1), got {train_fraction}"
        )));
    }
    let n = ds.len();
    if n < 2 {
        return Err(Error::Empty { what: "dataset to split (need at least 2 rows)" });
    }
    let mut indices: Vec<usize> = (0..n).collect();
    let mut rng = sub_rng(seed, Purpose::Shuffle, 0);
    indices.shuffle(&mut rng);
    let n_train = (train_fraction * n as f64).ceil() as usize;
    let n_train = n_train.clamp(1, n - 1);
    let pick = |idx: &[usize], tag: SplitTag| Dataset {
        samples: idx.iter().map(|&i| ds.samples[i].clone()).collect(),
        feature_names: ds.feature_names.clone(),
        vocabs: ds.vocabs.clone(),
        split_tag: tag,
        scaling: ds.scaling.clone(),
    };
    Ok((
        pick(&indices[..n_train], SplitTag::Train),
        pick(&indices[n_train..], SplitTag::Test),
    ))
}

/// Reorder a dataset's rows with a seeded shuffle; used to resample the
/// training-stream order across replications on real data.
pub fn shuffled_order(n: usize, seed: u64, replication: u64) -> Vec<usize> {
    let mut indices: Vec<usize> = (0..n).collect();
    let mut rng = sub_rng(seed, Purpose::Shuffle, replication);
    indices.shuffle(&mut rng);
    indices
}

/// Optional validation that every feature vector satisfies the norm bound
/// `‖φ‖ ≤ d_phi`. Off by default everywhere; turn it on when a bounded
/// feature law is part of the data contract.
pub fn validate_norm_bound(samples: &[Sample], d_phi: f64) -> Result<()> {
    for (i, s) in samples.iter().enumerate() {
        let norm = s.phi().norm();
        if norm > d_phi {
            return Err(Error::InvalidConfig(format!(
                "sample {i} violates the feature norm bound: {norm} > {d_phi}"
            )));
        }
    }
    Ok(())
}

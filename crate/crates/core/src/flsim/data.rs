//! Labeled-corpus loading and client sharding.
//!
//! The on-disk corpus format is a plain CSV with a one-line header
//! manifest: feature columns first, an integer `label` column last
//! (see `data/README.md`). Shards are materialized datasets so client
//! gradient computations need no shared indices.

use std::path::Path;

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::FlError;

// ---------------------------------------------------------------------------
// Dataset

/// A labeled feature matrix: one row per sample.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    /// Feature matrix, `n × d` (dimensionless after scaling).
    pub features: Array2<f64>,
    /// Integer class labels in `0..num_classes`, length `n`.
    pub labels: Vec<usize>,
    /// Number of classes (`max label + 1` when loaded from disk).
    pub num_classes: usize,
}

impl Dataset {
    /// Number of samples.
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    /// True when the dataset holds no samples.
    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Feature dimension `d`.
    pub fn feature_dim(&self) -> usize {
        self.features.ncols()
    }

    /// Divides every feature by `scale` (e.g. 16 for 4-bit pixel
    /// intensities), mapping raw inputs into O(1) range.
    pub fn scale_features(&mut self, scale: f64) {
        self.features.mapv_inplace(|v| v / scale);
    }

    /// Materializes the sub-dataset holding `indices`, in order.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        let mut features = Array2::zeros((indices.len(), self.feature_dim()));
        let mut labels = Vec::with_capacity(indices.len());
        for (row, &i) in indices.iter().enumerate() {
            features.row_mut(row).assign(&self.features.row(i));
            labels.push(self.labels[i]);
        }
        Dataset { features, labels, num_classes: self.num_classes }
    }

    /// Per-class sample counts, length `num_classes`.
    pub fn label_histogram(&self) -> Vec<usize> {
        let mut counts = vec![0usize; self.num_classes];
        for &label in &self.labels {
            counts[label] += 1;
        }
        counts
    }
}

// ---------------------------------------------------------------------------
// Loading

/// Loads a corpus from the documented CSV format: a header row naming
/// the feature columns and ending in `label`, then one sample per line
/// with numeric features and an integer class label.
pub fn load_csv(path: &Path) -> Result<Dataset, FlError> {
    let text = std::fs::read_to_string(path)?;
    parse_csv(&text)
}

/// Parses CSV text in the corpus format. Split from [`load_csv`] so the
/// format can be tested without touching the filesystem.
pub fn parse_csv(text: &str) -> Result<Dataset, FlError> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| FlError::Parse("empty corpus: missing header row".into()))?;
    let columns: Vec<&str> = header.split(',').collect();
    if columns.len() < 2 {
        return Err(FlError::Parse(
            "header must name at least one feature column and `label`".into(),
        ));
    }
    if *columns.last().unwrap() != "label" {
        return Err(FlError::Parse(format!(
            "last header column must be `label`, found `{}`",
            columns.last().unwrap()
        )));
    }
    let dim = columns.len() - 1;

    let mut rows: Vec<f64> = Vec::new();
    let mut labels: Vec<usize> = Vec::new();
    for (lineno, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != dim + 1 {
            return Err(FlError::Parse(format!(
                "line {}: expected {} fields, found {}",
                lineno + 1,
                dim + 1,
                fields.len()
            )));
        }
        for field in &fields[..dim] {
            let value: f64 = field.trim().parse().map_err(|_| {
                FlError::Parse(format!("line {}: bad feature `{field}`", lineno + 1))
            })?;
            if !value.is_finite() {
                return Err(FlError::Parse(format!(
                    "line {}: non-finite feature `{field}`",
                    lineno + 1
                )));
            }
            rows.push(value);
        }
        let label: usize = fields[dim].trim().parse().map_err(|_| {
            FlError::Parse(format!("line {}: bad label `{}`", lineno + 1, fields[dim]))
        })?;
        labels.push(label);
    }
    if labels.is_empty() {
        return Err(FlError::Parse("corpus has a header but no samples".into()));
    }

    let num_classes = labels.iter().max().unwrap() + 1;
    let features = Array2::from_shape_vec((labels.len(), dim), rows)
        .expect("row-major reshape matches counted fields");
    Ok(Dataset { features, labels, num_classes })
}

// ---------------------------------------------------------------------------
// Splitting and sharding

/// Splits into `(train, test)` by a global shuffle; `test_fraction` of
/// the samples (rounded, at least one of each side) go to the test set.
pub fn train_test_split(
    data: &Dataset,
    test_fraction: f64,
    rng: &mut ChaCha8Rng,
) -> Result<(Dataset, Dataset), FlError> {
    let n = data.len();
    let n_test = ((n as f64) * test_fraction).round() as usize;
    if n_test == 0 || n_test >= n {
        return Err(FlError::TooSmall(format!(
            "cannot take a {test_fraction} test fraction of {n} samples"
        )));
    }
    let mut indices: Vec<usize> = (0..n).collect();
    indices.shuffle(rng);
    let train = data.subset(&indices[n_test..]);
    let test = data.subset(&indices[..n_test]);
    Ok((train, test))
}

/// How samples are distributed over clients.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PartitionMode {
    /// Global shuffle, equal-size splits.
    Iid,
    /// Label-sorted shards: each client sees only its assigned classes.
    NonIid,
}

/// Splits `data` into `clients` equal-size shards.
///
/// IID mode shuffles globally and cuts equal splits (the remainder is
/// dropped). Non-IID mode groups samples by label, assigns each client
/// `classes_per_client` labels round-robin through the class list (so
/// every label is covered at least once), deals each shared label's
/// samples round-robin among its owners, and finally truncates all
/// shards to the common minimum size `D`.
pub fn partition(
    data: &Dataset,
    clients: usize,
    mode: PartitionMode,
    classes_per_client: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<Dataset>, FlError> {
    if clients == 0 {
        return Err(FlError::Config("client count must be at least 1".into()));
    }
    match mode {
        PartitionMode::Iid => {
            let shard = data.len() / clients;
            if shard == 0 {
                return Err(FlError::TooSmall(format!(
                    "{} samples cannot fill {} shards",
                    data.len(),
                    clients
                )));
            }
            let mut indices: Vec<usize> = (0..data.len()).collect();
            indices.shuffle(rng);
            Ok((0..clients)
                .map(|k| data.subset(&indices[k * shard..(k + 1) * shard]))
                .collect())
        }
        PartitionMode::NonIid => {
            partition_by_label(data, clients, classes_per_client, rng)
        }
    }
}

/// Non-IID sharding: label-grouped samples dealt to label-set owners.
fn partition_by_label(
    data: &Dataset,
    clients: usize,
    classes_per_client: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<Dataset>, FlError> {
    let c = data.num_classes;
    if classes_per_client == 0 || classes_per_client > c {
        return Err(FlError::Config(format!(
            "classes_per_client {classes_per_client} outside 1..={c}"
        )));
    }
    if clients * classes_per_client < c {
        return Err(FlError::TooSmall(format!(
            "{clients} clients x {classes_per_client} classes cannot cover {c} labels"
        )));
    }

    // Group sample indices by label (the "sort by label" step: groups
    // are the contiguous runs of the label-sorted order).
    let mut by_label: Vec<Vec<usize>> = vec![Vec::new(); c];
    for (i, &label) in data.labels.iter().enumerate() {
        by_label[label].push(i);
    }
    if let Some(empty) = by_label.iter().position(Vec::is_empty) {
        return Err(FlError::TooSmall(format!("class {empty} has no samples")));
    }

    // Client k owns labels {(offset + k·cpc + j) mod C}: consecutive
    // slots cycle the class list, so clients·cpc ≥ C covers every label.
    let offset = rng.random_range(0..c);
    let mut owners: Vec<Vec<usize>> = vec![Vec::new(); c];
    for k in 0..clients {
        for j in 0..classes_per_client {
            let label = (offset + k * classes_per_client + j) % c;
            owners[label].push(k);
        }
    }

    // Deal each label's samples round-robin among its owners, keeping
    // each client's samples grouped per owned label.
    let mut piles: Vec<Vec<Vec<usize>>> =
        vec![vec![Vec::new(); classes_per_client]; clients];
    for (label, indices) in by_label.iter().enumerate() {
        for (i, &sample) in indices.iter().enumerate() {
            let k = owners[label][i % owners[label].len()];
            let slot = piles[k]
                .iter()
                .position(|pile| {
                    pile.first().is_none_or(|&s| data.labels[s] == label)
                })
                .expect("a client owns at most classes_per_client labels");
            piles[k][slot].push(sample);
        }
    }

    // Interleave each client's labels so the equal-size truncation below
    // trims tails instead of erasing whole label groups.
    let mut shards: Vec<Vec<usize>> = Vec::with_capacity(clients);
    for client_piles in &piles {
        let longest = client_piles.iter().map(Vec::len).max().unwrap();
        let mut merged = Vec::new();
        for i in 0..longest {
            for pile in client_piles {
                if let Some(&sample) = pile.get(i) {
                    merged.push(sample);
                }
            }
        }
        shards.push(merged);
    }

    // Equal shard sizes by truncation: |D_k| = D for all k.
    let d = shards.iter().map(Vec::len).min().unwrap();
    if d == 0 {
        return Err(FlError::TooSmall(
            "a client received no samples before truncation".into(),
        ));
    }
    Ok(shards.iter().map(|s| data.subset(&s[..d])).collect())
}

// ---------------------------------------------------------------------------

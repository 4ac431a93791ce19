//! Tabular ingestion, preprocessing, splitting, pollution and synthetic data.
//!
//! The flow for a user-supplied file is [`load_csv`] → [`split_labels`] →
//! [`preprocess`]; the synthetic generators return a [`Dataset`] that is
//! already scaled to `[0, 1]` and only needs [`Dataset::split`].

mod preprocess;
mod source;
mod split;
mod synth;

use std::path::Path;

use serde::{Deserialize, Serialize};

pub use preprocess::{apply_meta, preprocess, ColumnMeta};
pub use source::{load_csv, load_csv_unlabelled, RawColumn, RawDataset, Schema};
pub use split::{split_labels, PollutionSpec, Split, SplitMode, TEST_FRACTION, VAL_FRACTION};
pub use synth::{synth_dataset, SynthKind, BLOB_CENTERS};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

pub const NORMAL: u8 = 0;
pub const ANOMALOUS: u8 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub name: String,
    /// All features in `[0, 1]`.
    pub features: Matrix,
    /// True labels (0 normal, 1 anomalous). Pollution never rewrites these.
    pub labels: Vec<u8>,
    pub split: Option<Split>,
    pub meta: Vec<ColumnMeta>,
}

/// Preprocessing metadata as stored next to a dataset cache or checkpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetMeta {
    pub name: String,
    pub columns: Vec<ColumnMeta>,
}

impl DatasetMeta {
    pub fn write(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_string_pretty(self).expect("metadata serialises");
        std::fs::write(path, json).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Data(format!("{}: {e}", path.display())))
    }
}

/// Sizes of the desk-scale synthetic task: 2000 normal training samples and
/// a test split of 200 normal and 200 anomalous samples. A further
/// [`DESK_SPARE_ANOMALIES`] anomalies are generated and held out so the
/// training split can be polluted.
pub const DESK_TRAIN_NORMAL: usize = 2000;
pub const DESK_TEST_NORMAL: usize = 200;
pub const DESK_TEST_ANOMALIES: usize = 200;
pub const DESK_SPARE_ANOMALIES: usize = 40;
/// Seed of the fixed desk-scale data set; training seeds vary independently.
pub const DESK_DATA_SEED: u64 = 7;

/// The desk-scale task for `kind`, already split.
pub fn desk_task(kind: SynthKind) -> Result<Dataset> {
    synth_dataset(
        kind,
        DESK_TRAIN_NORMAL + DESK_TEST_NORMAL,
        DESK_TEST_ANOMALIES + DESK_SPARE_ANOMALIES,
        DESK_DATA_SEED,
    )?
    .split_counts(
        DESK_TRAIN_NORMAL,
        DESK_TEST_NORMAL,
        DESK_TEST_ANOMALIES,
        DESK_DATA_SEED,
    )
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn input_dim(&self) -> usize {
        self.features.cols()
    }

    /// Default 76/4/20 split (see [`split_labels`]).
    pub fn split(mut self, seed: u64, mode: SplitMode) -> Result<Self> {
        self.split = Some(split_labels(&self.labels, seed, mode)?);
        Ok(self)
    }

    /// Explicit split: `train_normal` normals for training, a test split with
    /// `test_normal` normals and `test_anom` anomalies, no validation split.
    /// Remaining anomalies are kept aside for pollution.
    pub fn split_counts(
        mut self,
        train_normal: usize,
        test_normal: usize,
        test_anom: usize,
        seed: u64,
    ) -> Result<Self> {
        self.split = Some(split::split_counts(
            &self.labels,
            train_normal,
            test_normal,
            test_anom,
            seed,
        )?);
        Ok(self)
    }

    pub fn splits(&self) -> Result<&Split> {
        self.split
            .as_ref()
            .ok_or_else(|| Error::Data(format!("data set `{}` has not been split", self.name)))
    }

    pub fn train_features(&self) -> Result<Matrix> {
        Ok(self.features.select_rows(&self.splits()?.train))
    }

    pub fn val_features(&self) -> Result<Matrix> {
        Ok(self.features.select_rows(&self.splits()?.val))
    }

    pub fn test_features(&self) -> Result<Matrix> {
        Ok(self.features.select_rows(&self.splits()?.test))
    }

    pub fn test_labels(&self) -> Result<Vec<u8>> {
        Ok(self.splits()?.test.iter().map(|&i| self.labels[i]).collect())
    }

    /// Fraction of training rows whose true label is anomalous.
    pub fn train_contamination(&self) -> Result<f64> {
        let train = &self.splits()?.train;
        if train.is_empty() {
            return Ok(0.0);
        }
        let bad = train.iter().filter(|&&i| self.labels[i] == ANOMALOUS).count();
        Ok(bad as f64 / train.len() as f64)
    }

    /// Replaces `⌈fraction · |train|⌉` training rows with held-back
    /// anomalies. True labels are untouched, so the contamination can be
    /// audited afterwards.
    pub fn pollute(mut self, spec: &PollutionSpec) -> Result<Self> {
        let split = self
            .split
            .take()
            .ok_or_else(|| Error::Data("pollution requires a split data set".into()))?;
        self.split = Some(split::pollute(split, spec)?);
        Ok(self)
    }

    /// Writes features, labels and split membership as CSV, and the column
    /// metadata as JSON.
    pub fn write_cache(&self, csv_path: &Path, meta_path: &Path) -> Result<()> {
        let mut membership = vec![""; self.len()];
        if let Some(s) = &self.split {
            for (name, idx) in [("train", &s.train), ("val", &s.val), ("test", &s.test)] {
                for &i in idx {
                    membership[i] = name;
                }
            }
        }
        let mut w = csv::Writer::from_path(csv_path).map_err(|e| csv_err(csv_path, e))?;
        let mut header: Vec<String> = (0..self.input_dim()).map(|j| format!("f{j}")).collect();
        header.push("label".into());
        header.push("split".into());
        w.write_record(&header).map_err(|e| csv_err(csv_path, e))?;
        for (i, row) in self.features.iter_rows().enumerate() {
            let mut rec: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            rec.push(self.labels[i].to_string());
            rec.push(membership[i].to_string());
            w.write_record(&rec).map_err(|e| csv_err(csv_path, e))?;
        }
        w.flush().map_err(|e| Error::io(csv_path, e))?;
        self.dataset_meta().write(meta_path)
    }

    pub fn dataset_meta(&self) -> DatasetMeta {
        DatasetMeta {
            name: self.name.clone(),
            columns: self.meta.clone(),
        }
    }
}

pub(crate) fn csv_err(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Data(format!("{}: {other:?}", path.display())),
    }
}

use serde::{Deserialize, Serialize};

use super::{Dataset, RawColumn, RawDataset, Split};
use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Scaling metadata, fitted on the training split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ColumnMeta {
    Numeric { name: String, min: f64, max: f64 },
    /// Constant on the training split; encoded as 0 everywhere.
    Constant { name: String, value: f64 },
    Categorical { name: String, values: Vec<String> },
}

impl ColumnMeta {
    pub fn name(&self) -> &str {
        match self {
            ColumnMeta::Numeric { name, .. }
            | ColumnMeta::Constant { name, .. }
            | ColumnMeta::Categorical { name, .. } => name,
        }
    }

    pub fn width(&self) -> usize {
        match self {
            ColumnMeta::Categorical { values, .. } => values.len(),
            _ => 1,
        }
    }
}

/// Min-max scales numeric columns to `[0, 1]` and one-hot encodes
/// categorical ones, with statistics from `split.train` only. Values outside
/// the training range are clipped; unseen categories encode as all zeros.
pub fn preprocess(raw: &RawDataset, split: &Split) -> Result<Dataset> {
    if split.train.is_empty() {
        return Err(Error::Data("cannot fit preprocessing on an empty training split".into()));
    }
    let meta: Vec<ColumnMeta> = raw.columns.iter().map(|c| fit(c, &split.train)).collect();
    let features = apply_meta(raw, &meta)?;
    Ok(Dataset {
        name: raw.name.clone(),
        features,
        labels: raw.labels.clone(),
        split: Some(split.clone()),
        meta,
    })
}

/// Applies previously fitted metadata to a new table with the same columns,
/// e.g. when scoring fresh data with a trained model.
pub fn apply_meta(raw: &RawDataset, meta: &[ColumnMeta]) -> Result<Matrix> {
    if raw.columns.len() != meta.len() {
        return Err(Error::Data(format!(
            "expected {} feature columns, found {}",
            meta.len(),
            raw.columns.len()
        )));
    }
    let width: usize = meta.iter().map(ColumnMeta::width).sum();
    let mut features = Matrix::zeros(raw.len(), width);
    let mut offset = 0;
    for (col, m) in raw.columns.iter().zip(meta) {
        if col.name() != m.name() {
            return Err(Error::Data(format!(
                "column `{}` where `{}` was expected",
                col.name(),
                m.name()
            )));
        }
        match (col, m) {
            (RawColumn::Numeric { values, .. }, ColumnMeta::Numeric { min, max, .. }) => {
                for (r, v) in values.iter().enumerate() {
                    features.set(r, offset, ((v - min) / (max - min)).clamp(0.0, 1.0));
                }
            }
            (RawColumn::Numeric { .. }, ColumnMeta::Constant { .. }) => {}
            (RawColumn::Categorical { values, .. }, ColumnMeta::Categorical { values: cats, .. }) => {
                for (r, v) in values.iter().enumerate() {
                    if let Ok(k) = cats.binary_search(v) {
                        features.set(r, offset + k, 1.0);
                    }
                }
            }
            _ => {
                return Err(Error::Data(format!(
                    "column `{}` changed between numeric and categorical",
                    col.name()
                )))
            }
        }
        offset += m.width();
    }
    Ok(features)
}

fn fit(col: &RawColumn, train: &[usize]) -> ColumnMeta {
    match col {
        RawColumn::Numeric { name, values } => {
            let (min, max) = train.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &i| {
                (lo.min(values[i]), hi.max(values[i]))
            });
            if max > min {
                ColumnMeta::Numeric {
                    name: name.clone(),
                    min,
                    max,
                }
            } else {
                ColumnMeta::Constant {
                    name: name.clone(),
                    value: min,
                }
            }
        }
        RawColumn::Categorical { name, values } => {
            let mut cats: Vec<String> = train.iter().map(|&i| values[i].clone()).collect();
            cats.sort();
            cats.dedup();
            ColumnMeta::Categorical {
                name: name.clone(),
                values: cats,
            }
        }
    }
}

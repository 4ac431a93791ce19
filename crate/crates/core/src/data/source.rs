use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{csv_err, ANOMALOUS, NORMAL};
use crate::error::{Error, Result};

/// Column roles for a CSV file. Columns not listed as categorical or
/// ignored are numeric.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Schema {
    pub label_column: String,
    /// Label values that mark a row as normal; everything else is anomalous.
    pub normal_values: Vec<String>,
    #[serde(default)]
    pub categorical: Vec<String>,
    #[serde(default)]
    pub ignore: Vec<String>,
}

impl Schema {
    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text)
            .map_err(|e| Error::Data(format!("schema {}: {e}", path.display())))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum RawColumn {
    Numeric { name: String, values: Vec<f64> },
    Categorical { name: String, values: Vec<String> },
}

impl RawColumn {
    pub fn name(&self) -> &str {
        match self {
            RawColumn::Numeric { name, .. } | RawColumn::Categorical { name, .. } => name,
        }
    }
}

/// Parsed but unscaled table.
#[derive(Debug, Clone, PartialEq)]
pub struct RawDataset {
    pub name: String,
    pub columns: Vec<RawColumn>,
    pub labels: Vec<u8>,
    /// Rows dropped because a numeric cell did not parse.
    pub dropped_rows: usize,
}

impl RawDataset {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

pub fn load_csv(path: &Path, schema: &Schema) -> Result<RawDataset> {
    read_table(path, schema, true).map(|(raw, _)| raw)
}

/// Like [`load_csv`], but a file without the label column is accepted. The
/// flag says whether labels were present; without them every row is
/// labelled normal as a placeholder.
pub fn load_csv_unlabelled(path: &Path, schema: &Schema) -> Result<(RawDataset, bool)> {
    read_table(path, schema, false)
}

fn read_table(path: &Path, schema: &Schema, require_label: bool) -> Result<(RawDataset, bool)> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_err(path, e))?;
    let headers = reader.headers().map_err(|e| csv_err(path, e))?.clone();
    let label_idx = headers.iter().position(|h| h == schema.label_column);
    if label_idx.is_none() && require_label {
        return Err(Error::Data(format!(
            "{}: missing label column `{}`",
            path.display(),
            schema.label_column
        )));
    }
    for name in schema.categorical.iter().chain(&schema.ignore) {
        if !headers.iter().any(|h| h == name) {
            return Err(Error::Data(format!("{}: schema names unknown column `{name}`", path.display())));
        }
    }
    let categorical: HashSet<&str> = schema.categorical.iter().map(String::as_str).collect();
    let ignore: HashSet<&str> = schema.ignore.iter().map(String::as_str).collect();
    let normal: HashSet<&str> = schema.normal_values.iter().map(String::as_str).collect();

    // (csv index, is_categorical)
    let used: Vec<(usize, bool)> = headers
        .iter()
        .enumerate()
        .filter(|&(i, h)| Some(i) != label_idx && !ignore.contains(h))
        .map(|(i, h)| (i, categorical.contains(h)))
        .collect();
    let mut columns: Vec<RawColumn> = used
        .iter()
        .map(|&(i, cat)| {
            let name = headers[i].to_string();
            if cat {
                RawColumn::Categorical { name, values: Vec::new() }
            } else {
                RawColumn::Numeric { name, values: Vec::new() }
            }
        })
        .collect();

    let mut labels = Vec::new();
    let mut dropped = 0;
    let mut numeric_row = Vec::with_capacity(used.len());
    for record in reader.records() {
        let record = match record {
            Ok(r) => r,
            Err(_) => {
                dropped += 1;
                continue;
            }
        };
        numeric_row.clear();
        let mut ok = record.len() == headers.len();
        if ok {
            for &(i, cat) in &used {
                if !cat {
                    match record[i].parse::<f64>() {
                        Ok(v) if v.is_finite() => numeric_row.push(v),
                        _ => {
                            ok = false;
                            break;
                        }
                    }
                }
            }
        }
        if !ok {
            dropped += 1;
            continue;
        }
        let mut nums = numeric_row.iter();
        for (col, &(i, _)) in columns.iter_mut().zip(&used) {
            match col {
                RawColumn::Numeric { values, .. } => values.push(*nums.next().unwrap()),
                RawColumn::Categorical { values, .. } => values.push(record[i].to_string()),
            }
        }
        labels.push(match label_idx {
            Some(l) if !normal.contains(&record[l]) => ANOMALOUS,
            _ => NORMAL,
        });
    }
    if labels.is_empty() {
        return Err(Error::Data(format!("{}: no samples", path.display())));
    }
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "data".into());
    Ok((
        RawDataset {
            name,
            columns,
            labels,
            dropped_rows: dropped,
        },
        label_idx.is_some(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write(text: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::Builder::new().suffix(".csv").tempfile().unwrap();
        f.write_all(text.as_bytes()).unwrap();
        f
    }

    fn kdd_schema() -> Schema {
        Schema {
            label_column: "class".into(),
            normal_values: vec!["normal".into()],
            categorical: vec!["proto".into()],
            ignore: vec![],
        }
    }

    #[test]
    fn labels_from_normal_values() {
        let f = write("dur,proto,class\n1,tcp,normal\n2,udp,neptune\n3,tcp,normal\nx,tcp,smurf\n");
        let raw = load_csv(f.path(), &kdd_schema()).unwrap();
        assert_eq!(raw.labels, vec![0, 1, 0]);
        assert_eq!(raw.dropped_rows, 1);
        assert_eq!(raw.columns.len(), 2);
        assert!(matches!(&raw.columns[1], RawColumn::Categorical { values, .. } if values[1] == "udp"));
    }

    #[test]
    fn label_column_optional_for_scoring() {
        let f = write("dur,proto\n1,tcp\n2,udp\n");
        let (raw, labelled) = load_csv_unlabelled(f.path(), &kdd_schema()).unwrap();
        assert!(!labelled);
        assert_eq!(raw.len(), 2);
        assert!(load_csv(f.path(), &kdd_schema()).is_err());
        let f = write("dur,proto,class\n1,tcp,smurf\n");
        let (raw, labelled) = load_csv_unlabelled(f.path(), &kdd_schema()).unwrap();
        assert!(labelled);
        assert_eq!(raw.labels, vec![1]);
    }

    #[test]
    fn covtype_classes() {
        let schema = Schema {
            label_column: "Cover_Type".into(),
            normal_values: vec!["1".into(), "2".into(), "3".into()],
            categorical: vec![],
            ignore: vec![],
        };
        let mut text = String::from("elev,Cover_Type\n");
        for c in 1..=7 {
            text.push_str(&format!("{},{c}\n", 100 * c));
        }
        let raw = load_csv(write(&text).path(), &schema).unwrap();
        assert_eq!(raw.labels, vec![0, 0, 0, 1, 1, 1, 1]);
    }

    #[test]
    fn errors() {
        let empty = write("dur,proto,class\n");
        assert!(load_csv(empty.path(), &kdd_schema()).unwrap_err().to_string().contains("no samples"));
        let nolabel = write("dur,proto\n1,tcp\n");
        assert!(load_csv(nolabel.path(), &kdd_schema())
            .unwrap_err()
            .to_string()
            .contains("missing label column"));
    }

    #[test]
    fn schema_rejects_unknown_keys() {
        let bad = r#"{"label_column":"c","normal_values":["a"],"extra":1}"#;
        assert!(serde_json::from_str::<Schema>(bad).is_err());
    }
}

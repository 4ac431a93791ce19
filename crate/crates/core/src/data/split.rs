use serde::{Deserialize, Serialize};

use super::{ANOMALOUS, NORMAL};
use crate::error::{Error, Result};
use crate::rng::SeededRng;

pub const TEST_FRACTION: f64 = 0.20;
/// Fraction of the whole data set carved out of the training share.
pub const VAL_FRACTION: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SplitMode {
    /// Known anomalies are removed from train and validation.
    Clean,
    /// Train and validation keep whatever labels they draw.
    Keep,
}

/// Row indices per split. Disjoint; together with `held_out` they cover the
/// data set.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
    /// Anomalies outside the test split that were kept out of training.
    pub held_out: Vec<usize>,
    /// Anomalies injected into `train` by pollution.
    pub polluted: Vec<usize>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PollutionSpec {
    pub fraction: f64,
    pub seed: u64,
}

impl Default for PollutionSpec {
    fn default() -> Self {
        Self {
            fraction: 0.01,
            seed: 0,
        }
    }
}

fn class_indices(labels: &[u8]) -> (Vec<usize>, Vec<usize>) {
    let mut normal = Vec::new();
    let mut anom = Vec::new();
    for (i, &l) in labels.iter().enumerate() {
        if l == NORMAL {
            normal.push(i);
        } else {
            anom.push(i);
        }
    }
    (normal, anom)
}

fn test_warnings(labels: &[u8], test: &[usize]) -> Vec<String> {
    let anom = test.iter().filter(|&&i| labels[i] == ANOMALOUS).count();
    let normal = test.len() - anom;
    let mut out = Vec::new();
    for (count, what) in [(normal, "normal"), (anom, "anomalous")] {
        if count < 10 {
            out.push(format!("test split has only {count} {what} samples"));
        }
    }
    out
}

/// Stratified split: 20% test (class proportions preserved), then 5% of the
/// whole data set as validation drawn from the remaining 80%, the rest for
/// training. In clean mode anomalies outside the test split go to
/// `held_out`.
pub fn split_labels(labels: &[u8], seed: u64, mode: SplitMode) -> Result<Split> {
    let n = labels.len();
    if n == 0 {
        return Err(Error::Data("no samples to split".into()));
    }
    let mut rng = SeededRng::new(seed);
    let (mut normal, mut anom) = class_indices(labels);
    rng.shuffle(&mut normal);
    rng.shuffle(&mut anom);

    let n_test = (TEST_FRACTION * n as f64).round() as usize;
    let anom_test = ((TEST_FRACTION * anom.len() as f64).round() as usize).min(n_test);
    let normal_test = (n_test - anom_test).min(normal.len());

    let mut test: Vec<usize> = normal[..normal_test].to_vec();
    test.extend_from_slice(&anom[..anom_test]);
    test.sort_unstable();

    let mut rest: Vec<usize> = normal[normal_test..].to_vec();
    rest.extend_from_slice(&anom[anom_test..]);
    rng.shuffle(&mut rest);
    let n_val = ((VAL_FRACTION * n as f64).round() as usize).min(rest.len());
    let mut val = rest[..n_val].to_vec();
    let mut train = rest[n_val..].to_vec();

    let mut held_out = Vec::new();
    if mode == SplitMode::Clean {
        for part in [&mut train, &mut val] {
            held_out.extend(part.iter().copied().filter(|&i| labels[i] == ANOMALOUS));
            part.retain(|&i| labels[i] == NORMAL);
        }
    }
    train.sort_unstable();
    val.sort_unstable();
    held_out.sort_unstable();
    let warnings = test_warnings(labels, &test);
    Ok(Split {
        train,
        val,
        test,
        held_out,
        polluted: Vec::new(),
        warnings,
    })
}

pub(super) fn split_counts(
    labels: &[u8],
    train_normal: usize,
    test_normal: usize,
    test_anom: usize,
    seed: u64,
) -> Result<Split> {
    let (mut normal, mut anom) = class_indices(labels);
    if normal.len() < train_normal + test_normal || anom.len() < test_anom {
        return Err(Error::Data(format!(
            "need {} normal and {test_anom} anomalous samples, have {} and {}",
            train_normal + test_normal,
            normal.len(),
            anom.len()
        )));
    }
    let mut rng = SeededRng::new(seed);
    rng.shuffle(&mut normal);
    rng.shuffle(&mut anom);
    let mut test: Vec<usize> = normal[..test_normal].to_vec();
    test.extend_from_slice(&anom[..test_anom]);
    test.sort_unstable();
    let mut train = normal[test_normal..test_normal + train_normal].to_vec();
    train.sort_unstable();
    let mut held_out = anom[test_anom..].to_vec();
    held_out.sort_unstable();
    let warnings = test_warnings(labels, &test);
    Ok(Split {
        train,
        val: Vec::new(),
        test,
        held_out,
        polluted: Vec::new(),
        warnings,
    })
}

pub(super) fn pollute(mut split: Split, spec: &PollutionSpec) -> Result<Split> {
    if !(0.0..0.5).contains(&spec.fraction) {
        return Err(Error::Config(format!(
            "pollution fraction {} not in [0, 0.5)",
            spec.fraction
        )));
    }
    let k = (spec.fraction * split.train.len() as f64).ceil() as usize;
    if k == 0 {
        return Ok(split);
    }
    if split.held_out.len() < k {
        return Err(Error::Data(format!(
            "pollution needs {k} anomalies outside the test split but only {} are available (short by {})",
            split.held_out.len(),
            k - split.held_out.len()
        )));
    }
    let mut rng = SeededRng::new(spec.seed);
    let mut pool = split.held_out.clone();
    rng.shuffle(&mut pool);
    let injected: Vec<usize> = pool[..k].to_vec();

    let mut train = split.train.clone();
    rng.shuffle(&mut train);
    let mut kept = train[k..].to_vec();
    kept.extend_from_slice(&injected);
    kept.sort_unstable();

    split.held_out.retain(|i| !injected.contains(i));
    split.train = kept;
    split.polluted.extend_from_slice(&injected);
    split.polluted.sort_unstable();
    Ok(split)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    fn labels(normal: usize, anom: usize) -> Vec<u8> {
        let mut l = vec![NORMAL; normal];
        l.extend(vec![ANOMALOUS; anom]);
        l
    }

    #[test]
    fn proportions_and_disjointness() {
        let l = labels(900, 100);
        let s = split_labels(&l, 1, SplitMode::Keep).unwrap();
        assert_eq!(s.test.len(), 200);
        assert_eq!(s.test.iter().filter(|&&i| l[i] == ANOMALOUS).count(), 20);
        assert_eq!(s.val.len(), 50);
        assert_eq!(s.train.len(), 750);
        let all: HashSet<usize> = s.train.iter().chain(&s.val).chain(&s.test).copied().collect();
        assert_eq!(all.len(), 1000);
    }

    #[test]
    fn clean_mode_has_no_train_anomalies() {
        let l = labels(900, 100);
        let s = split_labels(&l, 2, SplitMode::Clean).unwrap();
        assert!(s.train.iter().chain(&s.val).all(|&i| l[i] == NORMAL));
        assert_eq!(s.held_out.len(), 80);
        let covered = s.train.len() + s.val.len() + s.test.len() + s.held_out.len();
        assert_eq!(covered, 1000);
    }

    #[test]
    fn same_seed_same_split() {
        let l = labels(300, 40);
        assert_eq!(
            split_labels(&l, 5, SplitMode::Clean).unwrap(),
            split_labels(&l, 5, SplitMode::Clean).unwrap()
        );
        assert_ne!(
            split_labels(&l, 5, SplitMode::Clean).unwrap().test,
            split_labels(&l, 6, SplitMode::Clean).unwrap().test
        );
    }

    #[test]
    fn small_test_class_warns() {
        let s = split_labels(&labels(100, 10), 0, SplitMode::Clean).unwrap();
        assert!(s.warnings.iter().any(|w| w.contains("anomalous")));
    }

    #[test]
    fn pollution_counts() {
        let l = labels(1000, 60);
        let s = split_counts(&l, 800, 100, 40, 0).unwrap();
        assert_eq!(s.held_out.len(), 20);
        let p = pollute(s.clone(), &PollutionSpec { fraction: 0.01, seed: 3 }).unwrap();
        assert_eq!(p.train.len(), 800);
        assert_eq!(p.polluted.len(), 8);
        assert_eq!(p.train.iter().filter(|&&i| l[i] == ANOMALOUS).count(), 8);
        assert!(p.polluted.iter().all(|i| !p.test.contains(i)));
        assert_eq!(p.test, s.test);

        let same = pollute(s.clone(), &PollutionSpec { fraction: 0.0, seed: 3 }).unwrap();
        assert_eq!(same, s);

        let err = pollute(s, &PollutionSpec { fraction: 0.1, seed: 3 }).unwrap_err();
        assert!(err.to_string().contains("short by 60"), "{err}");
    }
}

//! ROC-AUC and the experiment runner.

use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, ANOMALOUS, NORMAL};
use crate::detector::score;
use crate::error::{Error, Result};
use crate::trainer::{fit, TrainConfig, Variant};

/// Area under the ROC curve, i.e. `P(score_anom > score_norm) + ½ P(tie)`,
/// via average ranks in `O(n log n)`.
pub fn roc_auc(scores: &[f64], labels: &[u8]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::shape("roc_auc", scores.len(), labels.len()));
    }
    if let Some(bad) = labels.iter().find(|&&l| l != NORMAL && l != ANOMALOUS) {
        return Err(Error::Data(format!("label {bad} is not 0 or 1")));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::NonFinite("anomaly score".into()));
    }
    let n_pos = labels.iter().filter(|&&l| l == ANOMALOUS).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::Data(
            "AUC is undefined unless both classes are present".into(),
        ));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));

    // sum of (1-based, tie-averaged) ranks of the anomalies
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            j += 1;
        }
        let avg_rank = (i + 1 + j) as f64 / 2.0;
        let pos_in_group = order[i..j].iter().filter(|&&k| labels[k] == ANOMALOUS).count();
        rank_sum += avg_rank * pos_in_group as f64;
        i = j;
    }
    let u = rank_sum - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Ok(u / (n_pos as f64 * n_neg as f64))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub experiment_id: String,
    pub run: usize,
    pub mode: Variant,
    pub dataset: String,
    pub pollution: f64,
    pub seed: u64,
    pub auc: f64,
    pub runtime_s: f64,
    pub config_hash: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub reports: Vec<EvalReport>,
    pub mean: f64,
    /// Sample standard deviation (0 for a single run).
    pub std: f64,
}

impl ExperimentSummary {
    pub fn from_reports(reports: Vec<EvalReport>) -> Self {
        let aucs: Vec<f64> = reports.iter().map(|r| r.auc).collect();
        let (mean, std) = mean_std(&aucs);
        Self { reports, mean, std }
    }
}

pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Scores the test split of a split data set.
pub fn evaluate(model: &crate::model::Da3dModel, dataset: &Dataset) -> Result<f64> {
    let x = dataset.test_features()?;
    let scores = score(model, &x)?;
    roc_auc(&scores, &dataset.test_labels()?)
}

/// Trains and evaluates `n_runs` independent models with seeds
/// `cfg.seed, cfg.seed + 1, ..`. Runs execute in parallel; reports come back
/// in run order.
pub fn run_experiment(
    dataset: &Dataset,
    cfg: &TrainConfig,
    mode: Variant,
    n_runs: usize,
) -> Result<ExperimentSummary> {
    if n_runs == 0 {
        return Err(Error::Config("n_runs must be at least 1".into()));
    }
    cfg.validate()?;
    let split = dataset.splits()?;
    let train = dataset.train_features()?;
    let val = (!split.val.is_empty()).then(|| dataset.val_features()).transpose()?;
    let pollution = if split.train.is_empty() {
        0.0
    } else {
        split.polluted.len() as f64 / split.train.len() as f64
    };
    let experiment_id = format!("{}-{}-{}", dataset.name, mode.name(), &cfg.hash()[..12]);

    let results: Vec<Result<EvalReport>> = (0..n_runs)
        .into_par_iter()
        .map(|run| {
            let run_cfg = TrainConfig {
                seed: cfg.seed.wrapping_add(run as u64),
                ..cfg.clone()
            };
            let start = Instant::now();
            let (model, _) = fit(&train, val.as_ref(), &run_cfg, mode, &mut |_, _| {})?;
            let auc = evaluate(&model, dataset)?;
            Ok(EvalReport {
                experiment_id: experiment_id.clone(),
                run,
                mode,
                dataset: dataset.name.clone(),
                pollution,
                seed: run_cfg.seed,
                auc,
                runtime_s: start.elapsed().as_secs_f64(),
                config_hash: cfg.hash(),
            })
        })
        .collect();
    let reports = results
        .into_iter()
        .enumerate()
        .map(|(run, r)| {
            r.map_err(|e| Error::Run {
                run,
                source: Box::new(e),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ExperimentSummary::from_reports(reports))
}

pub const REPORT_HEADER: &str = "run,seed,mode,dataset,pollution,auc,runtime_s";

/// CSV with one row per run plus a `summary` row whose `auc` is the mean
/// AUC and `runtime_s` the total runtime; the standard deviation is carried
/// in the run cell as `summary(std=..)`.
pub fn report_csv(reports: &[EvalReport]) -> Result<String> {
    if reports.is_empty() {
        return Err(Error::Data("no reports to write".into()));
    }
    let mut out = String::from(REPORT_HEADER);
    out.push('\n');
    for r in reports {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.run, r.seed, r.mode, r.dataset, r.pollution, r.auc, r.runtime_s
        ));
    }
    let summary = ExperimentSummary::from_reports(reports.to_vec());
    let first = &reports[0];
    let total: f64 = reports.iter().map(|r| r.runtime_s).sum();
    out.push_str(&format!(
        "summary(std={}),,{},{},{},{},{}\n",
        summary.std, first.mode, first.dataset, first.pollution, summary.mean, total
    ));
    Ok(out)
}

/// Writes `path` as CSV and a JSON mirror next to it (`.json` extension).
pub fn write_report(reports: &[EvalReport], path: &Path) -> Result<()> {
    let csv = report_csv(reports)?;
    std::fs::write(path, csv).map_err(|e| Error::io(path, e))?;
    let json_path = path.with_extension("json");
    let summary = ExperimentSummary::from_reports(reports.to_vec());
    let json = serde_json::to_string_pretty(&summary).expect("reports serialise");
    std::fs::write(&json_path, json).map_err(|e| Error::io(&json_path, e))
}

pub fn read_report_json(path: &Path) -> Result<ExperimentSummary> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Data(format!("{}: {e}", path.display())))
}

/// Per-run rows of a report CSV. Fields absent from the CSV
/// (`experiment_id`, `config_hash`) come back empty.
pub fn read_report_csv(path: &Path) -> Result<Vec<EvalReport>> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| crate::data::csv_err(path, e))?;
    let mut out = Vec::new();
    let bad = |what: &str| Error::Data(format!("{}: bad {what}", path.display()));
    for rec in rdr.records() {
        let rec = rec.map_err(|e| crate::data::csv_err(path, e))?;
        if rec[0].starts_with("summary") {
            continue;
        }
        out.push(EvalReport {
            experiment_id: String::new(),
            run: rec[0].parse().map_err(|_| bad("run"))?,
            seed: rec[1].parse().map_err(|_| bad("seed"))?,
            mode: rec[2].parse()?,
            dataset: rec[3].to_string(),
            pollution: rec[4].parse().map_err(|_| bad("pollution"))?,
            auc: rec[5].parse().map_err(|_| bad("auc"))?,
            runtime_s: rec[6].parse().map_err(|_| bad("runtime_s"))?,
            config_hash: String::new(),
        });
    }
    Ok(out)
}

//! Anomaly detector: alarm network over the decoder's hidden activations.
//!
//! `score(x) = alarm(hidden(decode(encode(x))))`, with `1` meaning highly
//! anomalous. Only the alarm is trained here; the autoencoder stays frozen.

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::model::Da3dModel;
use crate::nn::{softplus, Mode};
use crate::rng::SeededRng;

/// Mean of the input-space trivial-anomaly prior.
pub const TRIVIAL_MEAN: f64 = 0.5;
/// Standard deviation of the input-space trivial-anomaly prior.
pub const TRIVIAL_STD: f64 = 1.0;

/// Third training stream: generated anomalies, either as codes (fed
/// straight to the decoder) or as input-space samples (fed through the
/// encoder first).
#[derive(Debug, Clone, PartialEq)]
pub enum AnomalyStream {
    Codes(Matrix),
    Inputs(Matrix),
}

/// Batches for one detector update. Normal samples are labelled 0, the
/// other streams 1.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingTriple {
    pub normal: Matrix,
    pub trivial: Matrix,
    /// `None` during the warm-up, when no generator exists yet.
    pub generated: Option<AnomalyStream>,
}

/// Decoder hidden activations for input-space samples.
pub fn activations(model: &Da3dModel, batch: &Matrix) -> Result<Matrix> {
    let codes = model.aae.encode(batch)?;
    code_activations(model, &codes)
}

/// Decoder hidden activations for code-space samples.
pub fn code_activations(model: &Da3dModel, codes: &Matrix) -> Result<Matrix> {
    model.aae.decode(codes)?.hidden_activations()
}

/// Anomaly scores in `[0, 1]` for input-space samples.
pub fn score(model: &Da3dModel, batch: &Matrix) -> Result<Vec<f64>> {
    let codes = model.aae.encode(batch)?;
    score_code(model, &codes)
}

/// Anomaly scores for code-space samples, bypassing the encoder.
pub fn score_code(model: &Da3dModel, codes: &Matrix) -> Result<Vec<f64>> {
    let acts = code_activations(model, codes)?;
    Ok(model.alarm.infer(&acts)?.into_data())
}

/// Binary cross-entropy of probabilities against a fixed target, averaged
/// over the batch. Terms with a zero coefficient are skipped, so a perfect
/// prediction costs exactly 0.
pub fn binary_cross_entropy(p: &[f64], target: f64) -> f64 {
    if p.is_empty() {
        return 0.0;
    }
    let total: f64 = p
        .iter()
        .map(|&p| {
            let mut l = 0.0;
            if target > 0.0 {
                l -= target * p.ln();
            }
            if target < 1.0 {
                l -= (1.0 - target) * (1.0 - p).ln();
            }
            l
        })
        .sum();
    total / p.len() as f64
}

/// One alarm update. Each present stream contributes its mean BCE with
/// equal weight; the returned loss is the average over streams.
pub fn detector_step(
    model: &mut Da3dModel,
    triple: &TrainingTriple,
    lr: f64,
    rng: &mut SeededRng,
) -> Result<f64> {
    let mut streams: Vec<(Matrix, f64)> = vec![
        (activations(model, &triple.normal)?, 0.0),
        (activations(model, &triple.trivial)?, 1.0),
    ];
    match &triple.generated {
        Some(AnomalyStream::Codes(c)) => streams.push((code_activations(model, c)?, 1.0)),
        Some(AnomalyStream::Inputs(x)) => streams.push((activations(model, x)?, 1.0)),
        None => {}
    }
    if let Some((m, _)) = streams.iter().find(|(m, _)| m.rows() == 0) {
        return Err(Error::Data(format!(
            "empty detector stream ({} columns)",
            m.cols()
        )));
    }

    let parts: Vec<&Matrix> = streams.iter().map(|(m, _)| m).collect();
    let stacked = Matrix::vcat(&parts)?;
    let trace = model.alarm.forward(&stacked, Mode::Train, rng)?;
    let logits = &trace.layers.last().expect("alarm has layers").pre;
    let probs = trace.output();

    let n_streams = streams.len() as f64;
    let mut logit_grad = Vec::with_capacity(stacked.rows());
    let mut loss = 0.0;
    let mut offset = 0;
    for (m, target) in &streams {
        let w = 1.0 / (m.rows() as f64 * n_streams);
        for r in offset..offset + m.rows() {
            let z = logits.get(r, 0);
            // BCE written in logit space: y=1 -> softplus(-z), y=0 -> softplus(z)
            loss += w * if *target > 0.5 { softplus(-z) } else { softplus(z) };
            logit_grad.push(w * (probs.get(r, 0) - target));
        }
        offset += m.rows();
    }
    if !loss.is_finite() {
        return Err(Error::NonFinite("detector loss".into()));
    }
    let grad = Matrix::from_raw(stacked.rows(), 1, logit_grad);
    let back = model.alarm.backward_logits(&trace, &grad)?;
    model.alarm.adam_step(&back.grads, lr)?;
    Ok(loss)
}

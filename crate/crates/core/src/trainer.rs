//! Two-phase training schedule.
//!
//! Pretraining fits the autoencoder (reconstruction, code discriminator,
//! encoder-vs-discriminator) and warms up the alarm on normal data and
//! trivial anomalies. The main phase freezes the autoencoder and, per batch,
//! runs `critic_steps_per_batch` critic updates, one generator update and one
//! detector update.

use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::aae::AaeStepConfig;
use crate::detector::{detector_step, AnomalyStream, TrainingTriple};
use crate::error::{Error, Result};
use crate::generator::{
    critic_step, generate_codes, generator_step, simple_generate, trivial_anomalies,
    AdversarialConfig, SIMPLE_POOL_SIZE,
};
use crate::matrix::Matrix;
use crate::model::{Da3dModel, Preset};
use crate::nn::Mode;
use crate::rng::SeededRng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub seed: u64,
    pub batch_size: usize,
    pub epochs_main: usize,
    pub epochs_pretrain: usize,
    pub lr: f64,
    pub clip: f64,
    pub critic_steps_per_batch: usize,
    pub preset: Preset,
    pub critic_prior_std: f64,
    pub dropout: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            seed: 42,
            batch_size: 256,
            epochs_main: 500,
            epochs_pretrain: 50,
            lr: 1e-4,
            clip: 0.01,
            critic_steps_per_batch: 5,
            preset: Preset::Desk,
            critic_prior_std: std::f64::consts::SQRT_2,
            dropout: 0.1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if self.batch_size == 0 {
            return fail("batch_size must be at least 1".into());
        }
        if self.critic_steps_per_batch == 0 {
            return fail("critic_steps_per_batch must be at least 1".into());
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return fail(format!("lr must be positive, got {}", self.lr));
        }
        if !(self.clip > 0.0 && self.clip.is_finite()) {
            return fail(format!("clip must be positive, got {}", self.clip));
        }
        if !(self.critic_prior_std > 0.0 && self.critic_prior_std.is_finite()) {
            return fail(format!("critic_prior_std must be positive, got {}", self.critic_prior_std));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return fail(format!("dropout must be in [0, 1), got {}", self.dropout));
        }
        Ok(())
    }

    /// Parses a JSON config; every field is required and unknown keys are
    /// rejected.
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: TrainConfig =
            serde_json::from_str(text).map_err(|e| Error::Config(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            e => e,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serialises")
    }

    /// SHA-256 of the canonical JSON form, hex encoded.
    pub fn hash(&self) -> String {
        use sha2::{Digest, Sha256};
        let digest = Sha256::digest(serde_json::to_vec(self).expect("config serialises"));
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    fn aae_step(&self) -> AaeStepConfig {
        AaeStepConfig {
            lr: self.lr,
            clip: self.clip,
        }
    }

    fn adversarial(&self) -> AdversarialConfig {
        AdversarialConfig {
            lr: self.lr,
            clip: self.clip,
            critic_prior_std: self.critic_prior_std,
        }
    }
}

/// Which anomalies the detector sees in the main phase.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// Generated anomalies from the double-adversarial generator.
    Da3d,
    /// Normal data and trivial anomalies only.
    TrivialOnly,
    /// A fixed pool of decoded `N(0, std²)` codes.
    SimpleGen,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::Da3d, Variant::TrivialOnly, Variant::SimpleGen];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Da3d => "da3d",
            Variant::TrivialOnly => "trivial_only",
            Variant::SimpleGen => "simple_gen",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown mode `{s}` (da3d, trivial_only, simple_gen)")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Pretrain,
    Main,
}

/// Emitted after every update so callers can inspect the model in-loop.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrainEvent {
    PretrainStep { epoch: usize, batch: usize },
    CriticUpdate { epoch: usize, batch: usize },
    GeneratorUpdate { epoch: usize, batch: usize },
    DetectorUpdate { epoch: usize, batch: usize },
    EpochEnd { phase: Phase, epoch: usize },
}

/// Mean losses of one epoch. Losses that do not apply to the phase or
/// variant are `None`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub phase: Phase,
    pub epoch: usize,
    pub recon: Option<f64>,
    pub disc: Option<f64>,
    pub enc_adv: Option<f64>,
    pub critic: Option<f64>,
    pub gen: Option<f64>,
    pub detector: Option<f64>,
    pub val_mse: Option<f64>,
    pub critic_updates: usize,
    pub generator_updates: usize,
    pub detector_updates: usize,
    pub wall_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    pub seed: u64,
    pub records: Vec<EpochRecord>,
}

impl TrainLog {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            records: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn extend(&mut self, other: TrainLog) {
        self.records.extend(other.records);
    }

    pub fn to_csv(&self) -> String {
        let opt = |v: Option<f64>| v.map(|v| v.to_string()).unwrap_or_default();
        let mut out = String::from(
            "phase,epoch,recon,disc,enc_adv,critic,gen,detector,val_mse,critic_updates,generator_updates,detector_updates,wall_s\n",
        );
        for r in &self.records {
            let phase = match r.phase {
                Phase::Pretrain => "pretrain",
                Phase::Main => "main",
            };
            out.push_str(&format!(
                "{phase},{},{},{},{},{},{},{},{},{},{},{},{:.6}\n",
                r.epoch,
                opt(r.recon),
                opt(r.disc),
                opt(r.enc_adv),
                opt(r.critic),
                opt(r.gen),
                opt(r.detector),
                opt(r.val_mse),
                r.critic_updates,
                r.generator_updates,
                r.detector_updates,
                r.wall_s
            ));
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }
}

#[derive(Default)]
struct Mean {
    sum: f64,
    n: usize,
}

impl Mean {
    fn add(&mut self, v: f64) {
        self.sum += v;
        self.n += 1;
    }

    fn get(&self) -> Option<f64> {
        (self.n > 0).then(|| self.sum / self.n as f64)
    }
}

fn at(epoch: usize, batch: usize) -> impl FnOnce(Error) -> Error {
    move |e| match e {
        Error::NonFinite(m) => Error::NonFinite(format!("{m} (epoch {epoch}, batch {batch})")),
        e => e,
    }
}

fn batches(n: usize, batch_size: usize, rng: &mut SeededRng) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..n).collect();
    rng.shuffle(&mut order);
    order.chunks(batch_size).map(<[usize]>::to_vec).collect()
}

fn check_data(model: &Da3dModel, train: &Matrix) -> Result<()> {
    if train.rows() == 0 {
        return Err(Error::Data("empty training set".into()));
    }
    if train.cols() != model.input_dim() {
        return Err(Error::shape("training data", model.input_dim(), train.cols()));
    }
    Ok(())
}

pub fn pretrain(model: &mut Da3dModel, train: &Matrix, cfg: &TrainConfig, rng: &mut SeededRng) -> Result<TrainLog> {
    pretrain_with(model, train, None, cfg, rng, &mut |_, _| {})
}

/// [`pretrain`] with optional validation monitoring and an event callback.
pub fn pretrain_with(
    model: &mut Da3dModel,
    train: &Matrix,
    val: Option<&Matrix>,
    cfg: &TrainConfig,
    rng: &mut SeededRng,
    observer: &mut dyn FnMut(TrainEvent, &Da3dModel),
) -> Result<TrainLog> {
    cfg.validate()?;
    let mut log = TrainLog::new(cfg.seed);
    if cfg.epochs_pretrain == 0 {
        return Ok(log);
    }
    check_data(model, train)?;
    let width = model.input_dim();
    for epoch in 0..cfg.epochs_pretrain {
        let start = Instant::now();
        let (mut recon, mut disc, mut adv, mut det) = <(Mean, Mean, Mean, Mean)>::default();
        let mut det_updates = 0;
        for (b, idx) in batches(train.rows(), cfg.batch_size, rng).iter().enumerate() {
            let x = train.select_rows(idx);
            let l = model.aae.pretrain_step(&x, cfg.aae_step(), rng).map_err(at(epoch, b))?;
            recon.add(l.recon);
            disc.add(l.disc);
            adv.add(l.enc_adv);
            observer(TrainEvent::PretrainStep { epoch, batch: b }, model);

            let triple = TrainingTriple {
                trivial: trivial_anomalies(x.rows(), width, rng),
                normal: x,
                generated: None,
            };
            det.add(detector_step(model, &triple, cfg.lr, rng).map_err(at(epoch, b))?);
            det_updates += 1;
            observer(TrainEvent::DetectorUpdate { epoch, batch: b }, model);
        }
        log.records.push(EpochRecord {
            phase: Phase::Pretrain,
            epoch,
            recon: recon.get(),
            disc: disc.get(),
            enc_adv: adv.get(),
            critic: None,
            gen: None,
            detector: det.get(),
            val_mse: val.map(|v| model.aae.reconstruction_mse(v)).transpose()?,
            critic_updates: 0,
            generator_updates: 0,
            detector_updates: det_updates,
            wall_s: start.elapsed().as_secs_f64(),
        });
        observer(TrainEvent::EpochEnd { phase: Phase::Pretrain, epoch }, model);
    }
    model.status.pretrained = true;
    Ok(log)
}

/// Main phase with generated anomalies.
pub fn train(model: &mut Da3dModel, train: &Matrix, cfg: &TrainConfig, rng: &mut SeededRng) -> Result<TrainLog> {
    train_with(model, train, None, cfg, Variant::Da3d, rng, &mut |_, _| {})
}

/// Main phase for any [`Variant`], with optional validation monitoring and an
/// event callback. The autoencoder is never updated here.
pub fn train_with(
    model: &mut Da3dModel,
    train: &Matrix,
    val: Option<&Matrix>,
    cfg: &TrainConfig,
    variant: Variant,
    rng: &mut SeededRng,
    observer: &mut dyn FnMut(TrainEvent, &Da3dModel),
) -> Result<TrainLog> {
    cfg.validate()?;
    let mut log = TrainLog::new(cfg.seed);
    if cfg.epochs_main == 0 {
        return Ok(log);
    }
    check_data(model, train)?;
    let width = model.input_dim();
    let adv = cfg.adversarial();
    let pool = match variant {
        Variant::SimpleGen => Some(simple_generate(&model.aae, SIMPLE_POOL_SIZE, cfg.critic_prior_std, rng)?),
        _ => None,
    };

    for epoch in 0..cfg.epochs_main {
        let start = Instant::now();
        let (mut critic, mut gen, mut det) = <(Mean, Mean, Mean)>::default();
        let (mut n_critic, mut n_gen, mut n_det) = (0, 0, 0);
        for (b, idx) in batches(train.rows(), cfg.batch_size, rng).iter().enumerate() {
            let x = train.select_rows(idx);
            let n = x.rows();
            let generated = match variant {
                Variant::Da3d => {
                    for _ in 0..cfg.critic_steps_per_batch {
                        critic.add(critic_step(model, &x, adv, rng).map_err(at(epoch, b))?);
                        n_critic += 1;
                        observer(TrainEvent::CriticUpdate { epoch, batch: b }, model);
                    }
                    gen.add(generator_step(model, n, adv, rng).map_err(at(epoch, b))?);
                    n_gen += 1;
                    observer(TrainEvent::GeneratorUpdate { epoch, batch: b }, model);
                    Some(AnomalyStream::Codes(generate_codes(&model.generator, n, Mode::Train, rng)?))
                }
                Variant::TrivialOnly => None,
                Variant::SimpleGen => {
                    let pool = pool.as_ref().expect("pool exists for simple_gen");
                    let pick: Vec<usize> = (0..n).map(|_| rng.below(pool.rows())).collect();
                    Some(AnomalyStream::Inputs(pool.select_rows(&pick)))
                }
            };
            let triple = TrainingTriple {
                trivial: trivial_anomalies(n, width, rng),
                normal: x,
                generated,
            };
            det.add(detector_step(model, &triple, cfg.lr, rng).map_err(at(epoch, b))?);
            n_det += 1;
            observer(TrainEvent::DetectorUpdate { epoch, batch: b }, model);
        }
        log.records.push(EpochRecord {
            phase: Phase::Main,
            epoch,
            recon: None,
            disc: None,
            enc_adv: None,
            critic: critic.get(),
            gen: gen.get(),
            detector: det.get(),
            val_mse: val.map(|v| model.aae.reconstruction_mse(v)).transpose()?,
            critic_updates: n_critic,
            generator_updates: n_gen,
            detector_updates: n_det,
            wall_s: start.elapsed().as_secs_f64(),
        });
        observer(TrainEvent::EpochEnd { phase: Phase::Main, epoch }, model);
    }
    if variant == Variant::Da3d {
        model.status.generator_trained = true;
    }
    Ok(log)
}

/// Builds a model from `cfg.preset`, then pretrains and trains it. The model
/// and every stochastic step draw from one generator seeded with `cfg.seed`.
pub fn fit(
    train: &Matrix,
    val: Option<&Matrix>,
    cfg: &TrainConfig,
    variant: Variant,
    observer: &mut dyn FnMut(TrainEvent, &Da3dModel),
) -> Result<(Da3dModel, TrainLog)> {
    cfg.validate()?;
    let mut rng = SeededRng::new(cfg.seed);
    let mut model = Da3dModel::from_preset(cfg.preset, train.cols(), cfg.dropout, &mut rng)?;
    let mut log = pretrain_with(&mut model, train, val, cfg, &mut rng, observer)?;
    log.extend(train_with(&mut model, train, val, cfg, variant, &mut rng, observer)?);
    Ok((model, log))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_cfg() -> TrainConfig {
        TrainConfig {
            batch_size: 32,
            epochs_main: 2,
            epochs_pretrain: 2,
            lr: 1e-3,
            ..TrainConfig::default()
        }
    }

    fn data(seed: u64) -> Matrix {
        let mut rng = SeededRng::new(seed);
        Matrix::gaussian(100, 2, 0.5, 0.1, &mut rng)
    }

    #[test]
    fn defaults() {
        let c = TrainConfig::default();
        assert_eq!((c.epochs_main, c.epochs_pretrain, c.batch_size), (500, 50, 256));
        assert_eq!((c.lr, c.clip, c.dropout), (1e-4, 0.01, 0.1));
        assert_eq!(c.critic_steps_per_batch, 5);
        assert!((c.critic_prior_std - 2f64.sqrt()).abs() < 1e-15);
        c.validate().unwrap();
    }

    #[test]
    fn config_json_is_strict() {
        let c = TrainConfig::default();
        assert_eq!(TrainConfig::from_json(&c.to_json()).unwrap(), c);
        let mut v: serde_json::Value = serde_json::from_str(&c.to_json()).unwrap();
        v["extra"] = 1.into();
        assert!(TrainConfig::from_json(&v.to_string()).is_err());
        let mut v: serde_json::Value = serde_json::from_str(&c.to_json()).unwrap();
        v.as_object_mut().unwrap().remove("lr");
        assert!(TrainConfig::from_json(&v.to_string()).is_err());
        let bad = TrainConfig { lr: 0.0, ..c.clone() };
        assert!(TrainConfig::from_json(&bad.to_json()).is_err());
        let bad = TrainConfig { batch_size: 0, ..c };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn zero_pretrain_epochs_is_a_no_op() {
        let mut rng = SeededRng::new(0);
        let mut m = Da3dModel::from_preset(Preset::Desk, 2, 0.1, &mut rng).unwrap();
        let before = m.clone();
        let cfg = TrainConfig { epochs_pretrain: 0, ..tiny_cfg() };
        let log = pretrain(&mut m, &data(1), &cfg, &mut rng).unwrap();
        assert!(log.is_empty());
        assert_eq!(m, before);
    }

    #[test]
    fn empty_training_set_rejected() {
        let mut rng = SeededRng::new(0);
        let mut m = Da3dModel::from_preset(Preset::Desk, 2, 0.1, &mut rng).unwrap();
        let err = pretrain(&mut m, &Matrix::zeros(0, 2), &tiny_cfg(), &mut rng).unwrap_err();
        assert!(matches!(err, Error::Data(_)));
    }

    #[test]
    fn log_lengths_and_schedule_counts() {
        let x = data(2);
        let cfg = tiny_cfg();
        let mut counts = [0usize; 3];
        let (model, log) = fit(&x, None, &cfg, Variant::Da3d, &mut |ev, _| match ev {
            TrainEvent::CriticUpdate { .. } => counts[0] += 1,
            TrainEvent::GeneratorUpdate { .. } => counts[1] += 1,
            TrainEvent::DetectorUpdate { .. } => counts[2] += 1,
            _ => {}
        })
        .unwrap();
        // 100 rows at batch 32 -> 4 batches, the last one partial
        let batches = 4;
        assert_eq!(log.records.iter().filter(|r| r.phase == Phase::Main).count(), cfg.epochs_main);
        assert_eq!(counts[0], cfg.epochs_main * batches * cfg.critic_steps_per_batch);
        assert_eq!(counts[1], cfg.epochs_main * batches);
        assert_eq!(counts[2], (cfg.epochs_main + cfg.epochs_pretrain) * batches);
        for r in log.records.iter().filter(|r| r.phase == Phase::Main) {
            assert_eq!(r.critic_updates, batches * 5);
            assert_eq!(r.generator_updates, batches);
            assert_eq!(r.detector_updates, batches);
        }
        assert!(model.status.pretrained && model.status.generator_trained);
        assert_eq!(log.to_csv().lines().count(), 1 + cfg.epochs_main + cfg.epochs_pretrain);
    }

    #[test]
    fn main_phase_keeps_autoencoder_frozen() {
        let x = data(3);
        let cfg = tiny_cfg();
        let mut rng = SeededRng::new(cfg.seed);
        let mut m = Da3dModel::from_preset(cfg.preset, 2, cfg.dropout, &mut rng).unwrap();
        pretrain(&mut m, &x, &cfg, &mut rng).unwrap();
        let frozen = m.aae.frozen_hash();
        let disc = m.aae.code_disc.param_hash();
        for variant in Variant::ALL {
            let mut mm = m.clone();
            let mut r = rng.clone();
            train_with(&mut mm, &x, None, &cfg, variant, &mut r, &mut |_, model| {
                assert_eq!(model.aae.frozen_hash(), frozen);
            })
            .unwrap();
            assert_eq!(mm.aae.code_disc.param_hash(), disc);
        }
    }

    #[test]
    fn training_is_deterministic() {
        let x = data(4);
        let cfg = tiny_cfg();
        let (a, la) = fit(&x, None, &cfg, Variant::Da3d, &mut |_, _| {}).unwrap();
        let (b, lb) = fit(&x, None, &cfg, Variant::Da3d, &mut |_, _| {}).unwrap();
        assert_eq!(a, b);
        let strip = |l: &TrainLog| {
            l.records
                .iter()
                .map(|r| EpochRecord { wall_s: 0.0, ..r.clone() })
                .collect::<Vec<_>>()
        };
        assert_eq!(strip(&la), strip(&lb));
    }

    #[test]
    fn variant_names() {
        for v in Variant::ALL {
            assert_eq!(v.name().parse::<Variant>().unwrap(), v);
        }
        assert!("x".parse::<Variant>().is_err());
    }
}

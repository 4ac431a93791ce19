//! Adversarial autoencoder with a Wasserstein code discriminator.
//!
//! The encoder maps inputs to a code, the decoder maps codes back to the
//! `[0, 1]` input range through a sigmoid output. During pretraining the
//! code discriminator separates encoded samples from `N(0, I)` draws and the
//! encoder learns to fool it, which pulls the codes of normal data toward a
//! unit Gaussian.

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::model::scalar_critic;
use crate::nn::{Activation, AdamState, ForwardTrace, Mlp, Mode};
use crate::rng::SeededRng;

#[derive(Debug, Clone, PartialEq)]
pub struct AaeModel {
    pub encoder: Mlp,
    pub decoder: Mlp,
    pub code_disc: Mlp,
    /// Optimizer state for the encoder's adversarial objective, kept apart
    /// from the reconstruction optimizer so the two gradient scales do not
    /// share second-moment estimates.
    enc_adv_opt: AdamState,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PretrainLosses {
    pub recon: f64,
    pub disc: f64,
    pub enc_adv: f64,
}

/// Step sizes for one pretraining step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AaeStepConfig {
    pub lr: f64,
    pub clip: f64,
}

impl AaeModel {
    /// `encoder_dims = [input, hidden.., code]`; the decoder mirrors it.
    pub fn new(
        encoder_dims: &[usize],
        disc_hidden: &[usize],
        dropout: f64,
        rng: &mut SeededRng,
    ) -> Result<Self> {
        if encoder_dims.len() < 3 {
            return Err(Error::Config(
                "the autoencoder needs at least one hidden layer".into(),
            ));
        }
        let encoder = Mlp::new(encoder_dims, Activation::Selu, Activation::Linear, dropout, rng)?;
        let decoder_dims: Vec<usize> = encoder_dims.iter().rev().copied().collect();
        let decoder = Mlp::new(&decoder_dims, Activation::Selu, Activation::Sigmoid, dropout, rng)?;
        let code_disc = scalar_critic(*encoder_dims.last().unwrap(), disc_hidden, dropout, rng)?;
        Self::from_parts(encoder, decoder, code_disc)
    }

    /// Rejects decoders that are not the mirror image of the encoder.
    pub fn from_parts(encoder: Mlp, decoder: Mlp, code_disc: Mlp) -> Result<Self> {
        let mut mirrored = encoder.dims();
        mirrored.reverse();
        if decoder.dims() != mirrored {
            return Err(Error::shape(
                "decoder dims (must mirror the encoder)",
                format!("{mirrored:?}"),
                format!("{:?}", decoder.dims()),
            ));
        }
        if decoder.layers().len() < 2 {
            return Err(Error::Config("the decoder needs at least one hidden layer".into()));
        }
        if code_disc.input_dim() != encoder.output_dim() || code_disc.output_dim() != 1 {
            return Err(Error::shape(
                "code discriminator",
                format!("{} -> 1", encoder.output_dim()),
                format!("{} -> {}", code_disc.input_dim(), code_disc.output_dim()),
            ));
        }
        Ok(Self {
            enc_adv_opt: AdamState::for_mlp(&encoder),
            encoder,
            decoder,
            code_disc,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.encoder.input_dim()
    }

    pub fn code_dim(&self) -> usize {
        self.encoder.output_dim()
    }

    /// Width of the decoder's concatenated hidden activations.
    pub fn activation_width(&self) -> usize {
        self.decoder.hidden_width()
    }

    pub fn encode(&self, batch: &Matrix) -> Result<Matrix> {
        self.encoder.infer(batch)
    }

    /// Inference-mode decoder trace; the alarm reads its hidden activations.
    pub fn decode(&self, code: &Matrix) -> Result<ForwardTrace> {
        if code.cols() != self.code_dim() {
            return Err(Error::shape("decoder input", self.code_dim(), code.cols()));
        }
        self.decoder.trace(code)
    }

    pub fn reconstruct(&self, batch: &Matrix) -> Result<Matrix> {
        self.decoder.infer(&self.encode(batch)?)
    }

    /// Mean squared reconstruction error in inference mode.
    pub fn reconstruction_mse(&self, batch: &Matrix) -> Result<f64> {
        let out = self.reconstruct(batch)?;
        Ok(mse(&out, batch))
    }

    /// SHA-256 over encoder then decoder parameters.
    pub fn frozen_hash(&self) -> [u8; 32] {
        use sha2::{Digest, Sha256};
        let mut h = Sha256::new();
        h.update(self.encoder.param_hash());
        h.update(self.decoder.param_hash());
        h.finalize().into()
    }

    /// Reconstruction, discriminator and adversarial sub-updates, in that order.
    pub fn pretrain_step(
        &mut self,
        normal: &Matrix,
        cfg: AaeStepConfig,
        rng: &mut SeededRng,
    ) -> Result<PretrainLosses> {
        if normal.cols() != self.input_dim() {
            return Err(Error::shape("pretraining batch", self.input_dim(), normal.cols()));
        }
        let n = normal.rows();
        if n == 0 {
            return Err(Error::Data("empty pretraining batch".into()));
        }

        // 1. reconstruction
        let enc = self.encoder.forward(normal, Mode::Train, rng)?;
        let dec = self.decoder.forward(enc.output(), Mode::Train, rng)?;
        let recon = mse(dec.output(), normal);
        check_finite(recon, "reconstruction loss")?;
        let scale = 2.0 / (n * normal.cols()) as f64;
        let mut grad = dec.output().clone();
        for (g, x) in grad.data_mut().iter_mut().zip(normal.data()) {
            *g = (*g - x) * scale;
        }
        let dec_back = self.decoder.backward(&dec, &grad)?;
        let enc_back = self.encoder.backward(&enc, &dec_back.input_grad)?;
        self.decoder.adam_step(&dec_back.grads, cfg.lr)?;
        self.encoder.adam_step(&enc_back.grads, cfg.lr)?;

        // 2. code discriminator: E[D(enc(x))] - E[D(n)], n ~ N(0, I)
        let codes = self.encoder.infer(normal)?;
        let prior = Matrix::gaussian(n, self.code_dim(), 0.0, 1.0, rng);
        let both = Matrix::vcat(&[&codes, &prior])?;
        let tr = self.code_disc.forward(&both, Mode::Train, rng)?;
        let out = tr.output().data();
        let disc = out[..n].iter().sum::<f64>() / n as f64 - out[n..].iter().sum::<f64>() / n as f64;
        check_finite(disc, "code discriminator loss")?;
        let g: Vec<f64> = (0..2 * n)
            .map(|i| if i < n { 1.0 / n as f64 } else { -1.0 / n as f64 })
            .collect();
        let back = self.code_disc.backward(&tr, &Matrix::from_raw(2 * n, 1, g))?;
        self.code_disc.adam_step(&back.grads, cfg.lr)?;
        self.code_disc.clip_weights(cfg.clip);

        // 3. encoder fools the discriminator: minimise -E[D(enc(x))]
        let enc = self.encoder.forward(normal, Mode::Train, rng)?;
        let dtr = self.code_disc.trace(enc.output())?;
        let enc_adv = -dtr.output().mean();
        check_finite(enc_adv, "encoder adversarial loss")?;
        let code_grad = self
            .code_disc
            .input_gradient(&dtr, &Matrix::filled(n, 1, -1.0 / n as f64))?;
        let eback = self.encoder.backward(&enc, &code_grad)?;
        self.encoder
            .adam_step_with(&mut self.enc_adv_opt, &eback.grads, cfg.lr)?;

        Ok(PretrainLosses {
            recon,
            disc,
            enc_adv,
        })
    }
}

pub(crate) fn mse(a: &Matrix, b: &Matrix) -> f64 {
    let n = a.data().len().max(1) as f64;
    a.data()
        .iter()
        .zip(b.data())
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        / n
}

pub(crate) fn check_finite(v: f64, what: &str) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::NonFinite(what.to_string()))
    }
}

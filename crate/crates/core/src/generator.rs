//! Double-adversarial anomaly generator.
//!
//! The generator maps `N(0, I)` noise to codes; the frozen decoder turns
//! codes into input-space anomalies. The critic is trained to score normal
//! codes and generated codes low and a widened Gaussian high, so that the
//! generator, which maximises the critic while minimising the alarm score,
//! explores regions near but not on the normal codes.

use crate::aae::{check_finite, AaeModel};
use crate::detector::{TRIVIAL_MEAN, TRIVIAL_STD};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::model::Da3dModel;
use crate::nn::{Mlp, Mode};
use crate::rng::SeededRng;

/// Number of simple anomalies used by the ablation arm.
pub const SIMPLE_POOL_SIZE: usize = 500;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdversarialConfig {
    pub lr: f64,
    pub clip: f64,
    /// Per-dimension std of the critic's reference Gaussian.
    pub critic_prior_std: f64,
}

/// `n` codes from the generator; `mode` selects dropout.
pub fn generate_codes(gen: &Mlp, n: usize, mode: Mode, rng: &mut SeededRng) -> Result<Matrix> {
    if n == 0 {
        return Err(Error::Config("cannot generate zero samples".into()));
    }
    let noise = Matrix::gaussian(n, gen.input_dim(), 0.0, 1.0, rng);
    Ok(gen.forward(&noise, mode, rng)?.into_output())
}

/// Input-space anomalies `decode(generate_codes(n))`, inference mode.
pub fn generate_anomalies(model: &Da3dModel, n: usize, rng: &mut SeededRng) -> Result<Matrix> {
    let codes = generate_codes(&model.generator, n, Mode::Infer, rng)?;
    Ok(model.aae.decode(&codes)?.into_output())
}

/// Decoded `N(0, std² I)` codes.
pub fn simple_generate(aae: &AaeModel, n: usize, std: f64, rng: &mut SeededRng) -> Result<Matrix> {
    let codes = Matrix::gaussian(n, aae.code_dim(), 0.0, std, rng);
    Ok(aae.decode(&codes)?.into_output())
}

/// Input-space Gaussian noise `N(0.5, 1)`, not clipped.
pub fn trivial_anomalies(n: usize, input_dim: usize, rng: &mut SeededRng) -> Matrix {
    Matrix::gaussian(n, input_dim, TRIVIAL_MEAN, TRIVIAL_STD, rng)
}

/// Critic loss `E[C(enc(x))] + E[C(gen)] - 2 E[C(prior)]` for given code batches.
pub fn critic_loss(critic: &Mlp, normal_codes: &Matrix, gen_codes: &Matrix, prior: &Matrix) -> Result<f64> {
    Ok(critic.infer(normal_codes)?.mean() + critic.infer(gen_codes)?.mean()
        - 2.0 * critic.infer(prior)?.mean())
}

/// One critic update followed by weight clipping. Returns the loss before
/// the update.
pub fn critic_step(
    model: &mut Da3dModel,
    normal: &Matrix,
    cfg: AdversarialConfig,
    rng: &mut SeededRng,
) -> Result<f64> {
    let n = normal.rows();
    if n == 0 {
        return Err(Error::Data("empty critic batch".into()));
    }
    let real = model.aae.encode(normal)?;
    let fake = generate_codes(&model.generator, n, Mode::Train, rng)?;
    let prior = Matrix::gaussian(n, model.code_dim(), 0.0, cfg.critic_prior_std, rng);
    let stacked = Matrix::vcat(&[&real, &fake, &prior])?;

    let trace = model.critic.forward(&stacked, Mode::Train, rng)?;
    let out = trace.output().data();
    let mean = |s: &[f64]| s.iter().sum::<f64>() / s.len() as f64;
    let loss = mean(&out[..n]) + mean(&out[n..2 * n]) - 2.0 * mean(&out[2 * n..]);
    check_finite(loss, "critic loss")?;

    let w = 1.0 / n as f64;
    let grad: Vec<f64> = (0..3 * n)
        .map(|i| if i < 2 * n { w } else { -2.0 * w })
        .collect();
    let back = model
        .critic
        .backward(&trace, &Matrix::from_raw(3 * n, 1, grad))?;
    model.critic.adam_step(&back.grads, cfg.lr)?;
    model.critic.clip_weights(cfg.clip);
    Ok(loss)
}

/// One generator update against the current alarm and critic:
/// minimise `E[alarm(hidden(decode(h)))] - E[critic(h)]` with `h = gen(n)`.
/// Gradients flow through the frozen decoder; only the generator changes.
pub fn generator_step(
    model: &mut Da3dModel,
    batch: usize,
    cfg: AdversarialConfig,
    rng: &mut SeededRng,
) -> Result<f64> {
    let (loss, grads) = generator_gradients(model, batch, 1.0, 1.0, rng)?;
    model.generator.adam_step(&grads, cfg.lr)?;
    Ok(loss)
}

/// Loss and generator gradients with separate weights on the alarm and
/// critic terms.
pub(crate) fn generator_gradients(
    model: &Da3dModel,
    batch: usize,
    alarm_weight: f64,
    critic_weight: f64,
    rng: &mut SeededRng,
) -> Result<(f64, crate::nn::Gradients)> {
    if batch == 0 {
        return Err(Error::Config("generator batch must be non-empty".into()));
    }
    let noise = Matrix::gaussian(batch, model.generator.input_dim(), 0.0, 1.0, rng);
    let gen_trace = model.generator.forward(&noise, Mode::Train, rng)?;
    let codes = gen_trace.output();
    let w = 1.0 / batch as f64;

    let dec_trace = model.aae.decode(codes)?;
    let acts = dec_trace.hidden_activations()?;
    let alarm_trace = model.alarm.trace(&acts)?;
    let critic_trace = model.critic.trace(codes)?;
    let loss = alarm_weight * alarm_trace.output().mean() - critic_weight * critic_trace.output().mean();
    check_finite(loss, "generator loss")?;

    let acts_grad = model
        .alarm
        .input_gradient(&alarm_trace, &Matrix::filled(batch, 1, alarm_weight * w))?;
    let mut code_grad = model
        .aae
        .decoder
        .input_gradient_hidden(&dec_trace, None, &acts_grad)?;
    let critic_grad = model
        .critic
        .input_gradient(&critic_trace, &Matrix::filled(batch, 1, -critic_weight * w))?;
    code_grad.add_assign(&critic_grad);
    let back = model.generator.backward(&gen_trace, &code_grad)?;
    Ok((loss, back.grads))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detector::score_code;
    use crate::model::{Architecture, Preset};

    fn model(seed: u64) -> Da3dModel {
        let mut rng = SeededRng::new(seed);
        Da3dModel::new(&Architecture::from_preset(Preset::Desk, 2), 0.1, &mut rng).unwrap()
    }

    const CFG: AdversarialConfig = AdversarialConfig {
        lr: 1e-3,
        clip: 0.01,
        critic_prior_std: std::f64::consts::SQRT_2,
    };

    #[test]
    fn generate_codes_shape_and_rejects_zero() {
        let m = model(0);
        let mut rng = SeededRng::new(1);
        assert_eq!(generate_codes(&m.generator, 7, Mode::Infer, &mut rng).unwrap().shape(), (7, 2));
        assert!(generate_codes(&m.generator, 0, Mode::Infer, &mut rng).is_err());
    }

    #[test]
    fn generated_anomalies_are_in_unit_box() {
        let m = model(2);
        let mut rng = SeededRng::new(3);
        let x = generate_anomalies(&m, 100, &mut rng).unwrap();
        assert_eq!(x.shape(), (100, 2));
        assert!(x.data().iter().all(|&v| v > 0.0 && v < 1.0));
        let s = simple_generate(&m.aae, SIMPLE_POOL_SIZE, CFG.critic_prior_std, &mut rng).unwrap();
        assert_eq!(s.shape(), (500, 2));
    }

    #[test]
    fn trivial_anomaly_moments_and_determinism() {
        let mut rng = SeededRng::new(4);
        let t = trivial_anomalies(100_000, 1, &mut rng);
        assert!((t.mean() - 0.5).abs() < 0.02);
        assert!((t.column_stds()[0] - 1.0).abs() < 0.02);
        assert!(t.data().iter().any(|&v| !(0.0..=1.0).contains(&v)));
        let a = trivial_anomalies(10, 3, &mut SeededRng::new(9));
        let b = trivial_anomalies(10, 3, &mut SeededRng::new(9));
        assert_eq!(a, b);
    }

    #[test]
    fn constant_critic_has_zero_loss() {
        let mut m = model(5);
        m.critic.zero_params();
        m.critic.layers_mut().last_mut().unwrap().bias[0] = 0.7;
        let mut rng = SeededRng::new(6);
        let x = Matrix::gaussian(10, 2, 0.5, 0.1, &mut rng);
        // a constant critic: c + c - 2c
        let before_update = {
            let real = m.aae.encode(&x).unwrap();
            let fake = generate_codes(&m.generator, 10, Mode::Infer, &mut rng).unwrap();
            let prior = Matrix::gaussian(10, 2, 0.0, 1.4, &mut rng);
            critic_loss(&m.critic, &real, &fake, &prior).unwrap()
        };
        assert!(before_update.abs() < 1e-15);

        m.critic.zero_params();
        let loss = critic_step(&mut m, &x, CFG, &mut rng).unwrap();
        assert_eq!(loss, 0.0);
    }

    #[test]
    fn critic_step_clips_and_isolates() {
        let mut m = model(7);
        let before = m.clone();
        let mut rng = SeededRng::new(8);
        for _ in 0..20 {
            let x = Matrix::gaussian(16, 2, 0.5, 0.1, &mut rng);
            critic_step(&mut m, &x, CFG, &mut rng).unwrap();
            assert!(m.critic.max_abs_param() <= 0.01);
        }
        assert_eq!(m.aae, before.aae);
        assert_eq!(m.alarm, before.alarm);
        assert_eq!(m.generator, before.generator);
    }

    #[test]
    fn critic_loss_uses_means() {
        let m = model(9);
        let mut rng = SeededRng::new(10);
        let a = Matrix::gaussian(50, 2, 0.0, 1.0, &mut rng);
        let b = Matrix::gaussian(50, 2, 1.0, 1.0, &mut rng);
        let c = Matrix::gaussian(50, 2, 0.0, 1.4, &mut rng);
        let single = critic_loss(&m.critic, &a, &b, &c).unwrap();
        let dbl = |x: &Matrix| Matrix::vcat(&[x, x]).unwrap();
        let doubled = critic_loss(&m.critic, &dbl(&a), &dbl(&b), &dbl(&c)).unwrap();
        assert!((single - doubled).abs() < 1e-15);
    }

    #[test]
    fn generator_step_touches_only_the_generator() {
        let mut m = model(11);
        let before = m.clone();
        let mut rng = SeededRng::new(12);
        generator_step(&mut m, 32, CFG, &mut rng).unwrap();
        assert_eq!(m.aae, before.aae);
        assert_eq!(m.alarm.param_hash(), before.alarm.param_hash());
        assert_eq!(m.critic.param_hash(), before.critic.param_hash());
        assert_ne!(m.generator.param_hash(), before.generator.param_hash());
    }

    #[test]
    fn generator_lowers_alarm_when_critic_is_zero() {
        let mut m = model(13);
        m.critic.zero_params();
        m.generator.set_dropout(0.0);
        let mut rng = SeededRng::new(14);
        let probe = Matrix::gaussian(512, 2, 0.0, 1.0, &mut rng);
        let mean_score = |m: &Da3dModel| {
            let codes = m.generator.infer(&probe).unwrap();
            let s = score_code(m, &codes).unwrap();
            s.iter().sum::<f64>() / s.len() as f64
        };
        let start = mean_score(&m);
        for _ in 0..200 {
            generator_step(&mut m, 64, CFG, &mut rng).unwrap();
        }
        let end = mean_score(&m);
        assert!(end < start, "{end} !< {start}");
    }

    #[test]
    fn generator_climbs_critic_when_alarm_is_flat() {
        let mut m = model(15);
        // an alarm that outputs exactly 0.5 everywhere
        m.alarm.zero_params();
        m.generator.set_dropout(0.0);
        let mut rng = SeededRng::new(16);
        let probe = Matrix::gaussian(512, 2, 0.0, 1.0, &mut rng);
        let critic_mean = |m: &Da3dModel| {
            let codes = m.generator.infer(&probe).unwrap();
            m.critic.infer(&codes).unwrap().mean()
        };
        let start = critic_mean(&m);
        for _ in 0..200 {
            generator_step(&mut m, 64, CFG, &mut rng).unwrap();
        }
        let end = critic_mean(&m);
        assert!(end > start, "{end} !> {start}");
    }
}

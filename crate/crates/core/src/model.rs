//! Architecture presets and the composite model.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::aae::AaeModel;
use crate::error::{Error, Result};
use crate::nn::{Activation, Mlp};
use crate::rng::SeededRng;

/// Hidden dims shared by the code discriminator and the critic.
pub const DISCRIMINATOR_DIMS: [usize; 5] = [50, 40, 30, 20, 10];
pub const ALARM_DIMS: [usize; 4] = [100, 50, 25, 10];
pub const ALARM_DIMS_WIDE: [usize; 4] = [1000, 500, 200, 75];
/// Inputs at least this wide get [`ALARM_DIMS_WIDE`].
pub const WIDE_INPUT_THRESHOLD: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    CovType,
    CreditCard,
    Doh,
    Kdd,
    Url,
    /// Small networks for the bundled synthetic data sets.
    Desk,
}

impl Preset {
    pub const ALL: [Preset; 6] = [
        Preset::CovType,
        Preset::CreditCard,
        Preset::Doh,
        Preset::Kdd,
        Preset::Url,
        Preset::Desk,
    ];

    /// AAE layer list `[nominal input, hidden.., code]`.
    pub fn aae_dims(self) -> &'static [usize] {
        match self {
            Preset::CovType => &[90, 75, 60, 45, 25, 15],
            Preset::CreditCard | Preset::Doh => &[50, 40, 30, 20, 10, 5],
            Preset::Kdd => &[150, 100, 70, 40, 25, 10],
            Preset::Url => &[100, 80, 60, 40, 20, 10],
            Preset::Desk => &[2, 32, 16, 8, 2],
        }
    }

    pub fn generator_dims(self) -> &'static [usize] {
        match self {
            Preset::CovType => &[30, 25, 20],
            Preset::CreditCard | Preset::Doh => &[20, 15, 10],
            Preset::Kdd | Preset::Url => &[25, 20, 15],
            Preset::Desk => &[16, 16],
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Preset::CovType => "covtype",
            Preset::CreditCard => "creditcard",
            Preset::Doh => "doh",
            Preset::Kdd => "kdd",
            Preset::Url => "url",
            Preset::Desk => "desk",
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Preset::ALL
            .into_iter()
            .find(|p| p.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown architecture preset `{s}`")))
    }
}

/// Concrete layer widths for one input width.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Architecture {
    pub input_dim: usize,
    /// Encoder hidden widths, input side first.
    pub encoder_hidden: Vec<usize>,
    pub code_dim: usize,
    pub generator_hidden: Vec<usize>,
    pub alarm_hidden: Vec<usize>,
    pub discriminator_hidden: Vec<usize>,
}

impl Architecture {
    /// The first entry of a preset's AAE list is the nominal input width; it
    /// is replaced by the actual `input_dim`.
    pub fn from_preset(preset: Preset, input_dim: usize) -> Self {
        let aae = preset.aae_dims();
        let alarm = if input_dim >= WIDE_INPUT_THRESHOLD {
            ALARM_DIMS_WIDE
        } else {
            ALARM_DIMS
        };
        Self {
            input_dim,
            encoder_hidden: aae[1..aae.len() - 1].to_vec(),
            code_dim: aae[aae.len() - 1],
            generator_hidden: preset.generator_dims().to_vec(),
            alarm_hidden: alarm.to_vec(),
            discriminator_hidden: DISCRIMINATOR_DIMS.to_vec(),
        }
    }

    pub fn encoder_dims(&self) -> Vec<usize> {
        let mut d = vec![self.input_dim];
        d.extend_from_slice(&self.encoder_hidden);
        d.push(self.code_dim);
        d
    }

    pub fn decoder_dims(&self) -> Vec<usize> {
        let mut d = self.encoder_dims();
        d.reverse();
        d
    }

    /// Width of the concatenated decoder hidden activations.
    pub fn activation_width(&self) -> usize {
        self.encoder_hidden.iter().sum()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ModelStatus {
    pub pretrained: bool,
    pub generator_trained: bool,
}

/// Encoder, decoder, code discriminator, alarm, generator and critic.
#[derive(Debug, Clone, PartialEq)]
pub struct Da3dModel {
    pub aae: AaeModel,
    pub alarm: Mlp,
    pub generator: Mlp,
    pub critic: Mlp,
    pub status: ModelStatus,
}

impl Da3dModel {
    pub fn new(arch: &Architecture, dropout: f64, rng: &mut SeededRng) -> Result<Self> {
        let aae = AaeModel::new(
            &arch.encoder_dims(),
            &arch.discriminator_hidden,
            dropout,
            rng,
        )?;
        let mut alarm_dims = vec![aae.activation_width()];
        alarm_dims.extend_from_slice(&arch.alarm_hidden);
        alarm_dims.push(1);
        let alarm = Mlp::new(&alarm_dims, Activation::Selu, Activation::Sigmoid, dropout, rng)?;

        let mut gen_dims = vec![arch.code_dim];
        gen_dims.extend_from_slice(&arch.generator_hidden);
        gen_dims.push(arch.code_dim);
        let generator = Mlp::new(&gen_dims, Activation::Selu, Activation::Linear, dropout, rng)?;

        let critic = scalar_critic(arch.code_dim, &arch.discriminator_hidden, dropout, rng)?;
        Ok(Self {
            aae,
            alarm,
            generator,
            critic,
            status: ModelStatus::default(),
        })
    }

    pub fn from_preset(
        preset: Preset,
        input_dim: usize,
        dropout: f64,
        rng: &mut SeededRng,
    ) -> Result<Self> {
        Self::new(&Architecture::from_preset(preset, input_dim), dropout, rng)
    }

    /// Reassembles a model from its networks, checking that they fit together.
    pub fn from_parts(
        aae: AaeModel,
        alarm: Mlp,
        generator: Mlp,
        critic: Mlp,
        status: ModelStatus,
    ) -> Result<Self> {
        let code = aae.code_dim();
        if alarm.input_dim() != aae.activation_width() || alarm.output_dim() != 1 {
            return Err(Error::shape(
                "alarm network",
                format!("{} -> 1", aae.activation_width()),
                format!("{} -> {}", alarm.input_dim(), alarm.output_dim()),
            ));
        }
        if generator.input_dim() != code || generator.output_dim() != code {
            return Err(Error::shape(
                "generator network",
                format!("{code} -> {code}"),
                format!("{} -> {}", generator.input_dim(), generator.output_dim()),
            ));
        }
        if critic.input_dim() != code || critic.output_dim() != 1 {
            return Err(Error::shape(
                "critic network",
                format!("{code} -> 1"),
                format!("{} -> {}", critic.input_dim(), critic.output_dim()),
            ));
        }
        Ok(Self {
            aae,
            alarm,
            generator,
            critic,
            status,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.aae.input_dim()
    }

    pub fn code_dim(&self) -> usize {
        self.aae.code_dim()
    }

    /// Networks in checkpoint order, with their persisted names.
    pub fn networks(&self) -> [(&'static str, &Mlp); 6] {
        [
            ("encoder", &self.aae.encoder),
            ("decoder", &self.aae.decoder),
            ("code_disc", &self.aae.code_disc),
            ("alarm", &self.alarm),
            ("generator", &self.generator),
            ("critic", &self.critic),
        ]
    }
}

/// `code -> hidden.. -> 1` with a linear output.
pub(crate) fn scalar_critic(
    code_dim: usize,
    hidden: &[usize],
    dropout: f64,
    rng: &mut SeededRng,
) -> Result<Mlp> {
    let mut dims = vec![code_dim];
    dims.extend_from_slice(hidden);
    dims.push(1);
    Mlp::new(&dims, Activation::Selu, Activation::Linear, dropout, rng)
}

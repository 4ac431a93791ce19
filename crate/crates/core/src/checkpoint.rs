//! Binary checkpoint format.
//!
//! All integers and floats are little-endian:
//!
//! ```text
//! "DA3D"  u16 version  u8 flags  u32 network count
//! per network: u32 name length, name (UTF-8), u32 layer count
//! per layer:   u32 in, u32 out, u8 activation tag, f64 dropout,
//!              in*out f64 weights (row-major), out f64 biases
//! ```
//!
//! Flag bit 0 marks a pretrained autoencoder, bit 1 a trained generator.
//! Optimizer state is not stored.

use std::path::Path;

use crate::aae::AaeModel;
use crate::error::{CheckpointError, Error, Result};
use crate::matrix::Matrix;
use crate::model::{Da3dModel, ModelStatus};
use crate::nn::{Activation, Layer, Mlp};

pub const MAGIC: &[u8; 4] = b"DA3D";
pub const VERSION: u16 = 1;

const FLAG_PRETRAINED: u8 = 1;
const FLAG_GENERATOR: u8 = 2;
const NETWORKS: [&str; 6] = ["encoder", "decoder", "code_disc", "alarm", "generator", "critic"];

pub fn to_bytes(model: &Da3dModel) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    let mut flags = 0u8;
    if model.status.pretrained {
        flags |= FLAG_PRETRAINED;
    }
    if model.status.generator_trained {
        flags |= FLAG_GENERATOR;
    }
    out.push(flags);
    let nets = model.networks();
    out.extend_from_slice(&(nets.len() as u32).to_le_bytes());
    for (name, mlp) in nets {
        out.extend_from_slice(&(name.len() as u32).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.extend_from_slice(&(mlp.layers().len() as u32).to_le_bytes());
        for layer in mlp.layers() {
            out.extend_from_slice(&(layer.in_dim() as u32).to_le_bytes());
            out.extend_from_slice(&(layer.out_dim() as u32).to_le_bytes());
            out.push(layer.activation.tag());
            out.extend_from_slice(&layer.dropout.to_le_bytes());
            for w in layer.weights.data() {
                out.extend_from_slice(&w.to_le_bytes());
            }
            for b in &layer.bias {
                out.extend_from_slice(&b.to_le_bytes());
            }
        }
    }
    out
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &'static str) -> Result<&'a [u8], CheckpointError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len());
        match end {
            Some(end) => {
                let s = &self.buf[self.pos..end];
                self.pos = end;
                Ok(s)
            }
            None => Err(CheckpointError::Truncated(what)),
        }
    }

    fn u8(&mut self, what: &'static str) -> Result<u8, CheckpointError> {
        Ok(self.take(1, what)?[0])
    }

    fn u16(&mut self, what: &'static str) -> Result<u16, CheckpointError> {
        Ok(u16::from_le_bytes(self.take(2, what)?.try_into().unwrap()))
    }

    fn u32(&mut self, what: &'static str) -> Result<usize, CheckpointError> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()) as usize)
    }

    fn f64s(&mut self, n: usize, what: &'static str) -> Result<Vec<f64>, CheckpointError> {
        let bytes = n
            .checked_mul(8)
            .ok_or(CheckpointError::Truncated(what))?;
        Ok(self
            .take(bytes, what)?
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }
}

fn read_mlp(r: &mut Reader<'_>) -> Result<Mlp> {
    let n_layers = r.u32("layer count")?;
    let mut layers = Vec::with_capacity(n_layers.min(64));
    for _ in 0..n_layers {
        let in_dim = r.u32("layer shape")?;
        let out_dim = r.u32("layer shape")?;
        let tag = r.u8("activation tag")?;
        let activation = Activation::from_tag(tag)
            .ok_or_else(|| CheckpointError::Malformed(format!("unknown activation tag {tag}")))?;
        let dropout = f64::from_le_bytes(r.take(8, "dropout rate")?.try_into().unwrap());
        let weights = r.f64s(
            in_dim
                .checked_mul(out_dim)
                .ok_or_else(|| CheckpointError::Malformed("layer too large".into()))?,
            "weights",
        )?;
        let bias = r.f64s(out_dim, "biases")?;
        let weights = Matrix::from_vec(in_dim, out_dim, weights)
            .map_err(|e| CheckpointError::Malformed(e.to_string()))?;
        layers.push(Layer {
            weights,
            bias,
            activation,
            dropout,
        });
    }
    Mlp::from_layers(layers).map_err(|e| CheckpointError::Malformed(e.to_string()).into())
}

pub fn from_bytes(bytes: &[u8]) -> Result<Da3dModel> {
    let mut r = Reader { buf: bytes, pos: 0 };
    if bytes.len() < MAGIC.len() || &bytes[..4] != MAGIC {
        return Err(CheckpointError::BadMagic.into());
    }
    r.pos = 4;
    let version = r.u16("version")?;
    if version != VERSION {
        return Err(CheckpointError::Version {
            found: version,
            expected: VERSION,
        }
        .into());
    }
    let flags = r.u8("flags")?;
    let count = r.u32("network count")?;
    if count != NETWORKS.len() {
        return Err(CheckpointError::Malformed(format!(
            "expected {} networks, found {count}",
            NETWORKS.len()
        ))
        .into());
    }
    let mut nets = Vec::with_capacity(NETWORKS.len());
    for expected in NETWORKS {
        let len = r.u32("network name")?;
        let name = r.take(len, "network name")?;
        if name != expected.as_bytes() {
            return Err(CheckpointError::Malformed(format!(
                "expected network {expected:?}, found {:?}",
                String::from_utf8_lossy(name)
            ))
            .into());
        }
        nets.push(read_mlp(&mut r)?);
    }
    if r.pos != bytes.len() {
        return Err(CheckpointError::Malformed(format!(
            "{} trailing bytes",
            bytes.len() - r.pos
        ))
        .into());
    }
    let mut it = nets.into_iter();
    let mut next = || it.next().unwrap();
    let (encoder, decoder, code_disc) = (next(), next(), next());
    let (alarm, generator, critic) = (next(), next(), next());
    let aae = AaeModel::from_parts(encoder, decoder, code_disc).map_err(malformed)?;
    let status = ModelStatus {
        pretrained: flags & FLAG_PRETRAINED != 0,
        generator_trained: flags & FLAG_GENERATOR != 0,
    };
    Da3dModel::from_parts(aae, alarm, generator, critic, status).map_err(malformed)
}

fn malformed(e: Error) -> Error {
    CheckpointError::Malformed(e.to_string()).into()
}

pub fn save_checkpoint(model: &Da3dModel, path: &Path) -> Result<()> {
    std::fs::write(path, to_bytes(model)).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<Da3dModel> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    from_bytes(&bytes)
}

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{ColumnMeta, Dataset, ANOMALOUS, NORMAL};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::rng::SeededRng;

/// Cluster means of the `blobs*` data sets (first two features).
pub const BLOB_CENTERS: [[f64; 2]; 3] = [[0.3, 0.3], [0.7, 0.35], [0.5, 0.7]];
const BLOB_STD: f64 = 0.05;
/// Anomalies never fall this close to a cluster mean.
const BLOB_CORE: f64 = 0.15;
const RING_INNER: f64 = 0.25;
const RING_OUTER: f64 = 0.35;
const NOISE_DIMS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SynthKind {
    /// Three Gaussian clusters in `[0.2, 0.8]²`; uniform anomalies away from
    /// the cluster cores.
    Blobs2d,
    /// Normals on an annulus; anomalies at the centre and in the corners.
    Ring2d,
    /// `Blobs2d` plus eight noise features shared by both classes.
    Blobs10d,
}

impl SynthKind {
    pub fn name(self) -> &'static str {
        match self {
            SynthKind::Blobs2d => "blobs2d",
            SynthKind::Ring2d => "ring2d",
            SynthKind::Blobs10d => "blobs10d",
        }
    }

    pub fn input_dim(self) -> usize {
        match self {
            SynthKind::Blobs10d => 2 + NOISE_DIMS,
            _ => 2,
        }
    }
}

impl fmt::Display for SynthKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SynthKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "blobs2d" => Ok(SynthKind::Blobs2d),
            "ring2d" => Ok(SynthKind::Ring2d),
            "blobs10d" => Ok(SynthKind::Blobs10d),
            other => Err(Error::Data(format!("unknown synthetic data set `{other}`"))),
        }
    }
}

/// Normals first, then anomalies. Features are already in `[0, 1]`; the
/// result has no split yet.
pub fn synth_dataset(kind: SynthKind, n_normal: usize, n_anom: usize, seed: u64) -> Result<Dataset> {
    if n_normal == 0 || n_anom == 0 {
        return Err(Error::Data("synthetic data needs at least one sample per class".into()));
    }
    let mut rng = SeededRng::new(seed);
    let dim = kind.input_dim();
    let mut data = Vec::with_capacity((n_normal + n_anom) * dim);
    let mut push = |rng: &mut SeededRng, xy: [f64; 2]| {
        data.extend_from_slice(&xy);
        for _ in 2..dim {
            data.push((0.5 + 0.1 * rng.normal()).clamp(0.0, 1.0));
        }
    };
    for i in 0..n_normal {
        let xy = match kind {
            SynthKind::Blobs2d | SynthKind::Blobs10d => blob_normal(&mut rng, i),
            SynthKind::Ring2d => ring_normal(&mut rng),
        };
        push(&mut rng, xy);
    }
    for i in 0..n_anom {
        let xy = match kind {
            SynthKind::Blobs2d | SynthKind::Blobs10d => blob_anomaly(&mut rng),
            SynthKind::Ring2d => ring_anomaly(&mut rng, i),
        };
        push(&mut rng, xy);
    }
    let mut labels = vec![NORMAL; n_normal];
    labels.extend(std::iter::repeat_n(ANOMALOUS, n_anom));
    let meta = (0..dim)
        .map(|j| ColumnMeta::Numeric {
            name: format!("x{j}"),
            min: 0.0,
            max: 1.0,
        })
        .collect();
    Ok(Dataset {
        name: kind.name().to_string(),
        features: Matrix::from_vec(n_normal + n_anom, dim, data)?,
        labels,
        split: None,
        meta,
    })
}

fn blob_normal(rng: &mut SeededRng, i: usize) -> [f64; 2] {
    let c = BLOB_CENTERS[i % BLOB_CENTERS.len()];
    loop {
        let p = [c[0] + BLOB_STD * rng.normal(), c[1] + BLOB_STD * rng.normal()];
        if p.iter().all(|v| (0.2..=0.8).contains(v)) {
            return p;
        }
    }
}

fn blob_anomaly(rng: &mut SeededRng) -> [f64; 2] {
    loop {
        let p = [rng.uniform(), rng.uniform()];
        if BLOB_CENTERS.iter().all(|c| dist(&p, c) > BLOB_CORE) {
            return p;
        }
    }
}

fn ring_normal(rng: &mut SeededRng) -> [f64; 2] {
    let r = RING_INNER + (RING_OUTER - RING_INNER) * rng.uniform();
    let t = 2.0 * std::f64::consts::PI * rng.uniform();
    [0.5 + r * t.cos(), 0.5 + r * t.sin()]
}

fn ring_anomaly(rng: &mut SeededRng, i: usize) -> [f64; 2] {
    if i.is_multiple_of(2) {
        let r = 0.12 * rng.uniform().sqrt();
        let t = 2.0 * std::f64::consts::PI * rng.uniform();
        [0.5 + r * t.cos(), 0.5 + r * t.sin()]
    } else {
        let corner = rng.below(4);
        let (x, y) = (0.15 * rng.uniform(), 0.15 * rng.uniform());
        match corner {
            0 => [x, y],
            1 => [1.0 - x, y],
            2 => [x, 1.0 - y],
            _ => [1.0 - x, 1.0 - y],
        }
    }
}

fn dist(a: &[f64; 2], b: &[f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn label_counts_and_range() {
        for kind in [SynthKind::Blobs2d, SynthKind::Ring2d, SynthKind::Blobs10d] {
            let d = synth_dataset(kind, 300, 40, 1).unwrap();
            assert_eq!(d.labels.iter().filter(|&&l| l == 0).count(), 300);
            assert_eq!(d.labels.iter().filter(|&&l| l == 1).count(), 40);
            assert_eq!(d.input_dim(), kind.input_dim());
            assert!(d.features.data().iter().all(|v| (0.0..=1.0).contains(v)));
        }
    }

    #[test]
    fn deterministic() {
        let a = synth_dataset(SynthKind::Ring2d, 50, 10, 3).unwrap();
        let b = synth_dataset(SynthKind::Ring2d, 50, 10, 3).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_empty_class() {
        assert!(synth_dataset(SynthKind::Blobs2d, 0, 10, 0).is_err());
    }

    #[test]
    fn names_parse() {
        for kind in [SynthKind::Blobs2d, SynthKind::Ring2d, SynthKind::Blobs10d] {
            assert_eq!(kind.name().parse::<SynthKind>().unwrap(), kind);
        }
    }

    #[test]
    fn blobs_are_learnable_by_distance_to_centres() {
        let d = synth_dataset(SynthKind::Blobs2d, 600, 200, 5).unwrap();
        let scores: Vec<f64> = (0..d.len())
            .map(|i| {
                let r = d.features.row(i);
                BLOB_CENTERS
                    .iter()
                    .map(|c| ((r[0] - c[0]).powi(2) + (r[1] - c[1]).powi(2)).sqrt())
                    .fold(f64::INFINITY, f64::min)
            })
            .collect();
        let auc = crate::eval::roc_auc(&scores, &d.labels).unwrap();
        assert!(auc >= 0.95, "{auc}");
    }
}

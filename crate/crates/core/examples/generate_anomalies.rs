//! Train, then decode generated codes into input space and see where they
//! land relative to the normal clusters.

use da3d::data::{desk_task, SynthKind, BLOB_CENTERS};
use da3d::detector::score;
use da3d::generator::generate_anomalies;
use da3d::trainer::{fit, TrainConfig, Variant};
use da3d::SeededRng;

fn nearest_centre(p: &[f64]) -> f64 {
    BLOB_CENTERS
        .iter()
        .map(|c| ((p[0] - c[0]).powi(2) + (p[1] - c[1]).powi(2)).sqrt())
        .fold(f64::INFINITY, f64::min)
}

fn main() -> da3d::Result<()> {
    let ds = desk_task(SynthKind::Blobs2d)?;
    let train = ds.train_features()?;
    let cfg = TrainConfig {
        batch_size: 128,
        epochs_pretrain: 20,
        epochs_main: 100,
        ..TrainConfig::default()
    };
    let (model, _) = fit(&train, None, &cfg, Variant::Da3d, &mut |_, _| {})?;

    let mut rng = SeededRng::new(1);
    let fake = generate_anomalies(&model, 200, &mut rng)?;
    let mean_dist = |m: &da3d::Matrix| (0..m.rows()).map(|i| nearest_centre(m.row(i))).sum::<f64>() / m.rows() as f64;
    println!("mean distance to nearest cluster centre");
    println!("  normal    {:.3}", mean_dist(&train));
    println!("  generated {:.3}", mean_dist(&fake));

    let s = score(&model, &fake)?;
    println!("mean score of decoded generated points {:.3}", s.iter().sum::<f64>() / s.len() as f64);
    for i in 0..5 {
        println!("  ({:.3}, {:.3})", fake.row(i)[0], fake.row(i)[1]);
    }
    Ok(())
}

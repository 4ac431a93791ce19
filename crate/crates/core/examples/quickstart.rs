//! Train the full detector on the bundled blobs task and report test AUC.
//!
//! cargo run --release --example quickstart [seed]

use da3d::data::{desk_task, SynthKind};
use da3d::eval::evaluate;
use da3d::trainer::{fit, TrainConfig, Variant};

fn main() -> da3d::Result<()> {
    let seed = std::env::args().nth(1).map_or(42, |s| s.parse().expect("seed is an integer"));
    let ds = desk_task(SynthKind::Blobs2d)?;
    let train = ds.train_features()?;
    let cfg = TrainConfig {
        seed,
        batch_size: 128,
        epochs_pretrain: 20,
        epochs_main: 100,
        ..TrainConfig::default()
    };

    let (model, log) = fit(&train, None, &cfg, Variant::Da3d, &mut |_, _| {})?;
    let last = log.records.last().expect("at least one epoch");
    println!(
        "{} epochs, final critic loss {:.4}, detector loss {:.4}",
        log.len(),
        last.critic.unwrap_or(f64::NAN),
        last.detector.unwrap_or(f64::NAN)
    );
    println!("test AUC {:.4}", evaluate(&model, &ds)?);
    Ok(())
}

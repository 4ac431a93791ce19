//! Train on clean data and on data with 1% hidden anomalies.
//!
//! cargo run --release --example pollution [fraction] [runs]

use da3d::data::{desk_task, PollutionSpec, SynthKind};
use da3d::eval::run_experiment;
use da3d::trainer::{TrainConfig, Variant};

fn main() -> da3d::Result<()> {
    let mut args = std::env::args().skip(1);
    let fraction = args.next().map_or(0.01, |s| s.parse().expect("fraction is a number"));
    let runs = args.next().map_or(3, |s| s.parse().expect("runs is an integer"));
    let cfg = TrainConfig {
        batch_size: 128,
        epochs_pretrain: 20,
        epochs_main: 100,
        ..TrainConfig::default()
    };
    let clean = desk_task(SynthKind::Blobs2d)?;
    let polluted = desk_task(SynthKind::Blobs2d)?.pollute(&PollutionSpec { fraction, seed: 0 })?;
    println!("training contamination {:.2}%", 100.0 * polluted.train_contamination()?);

    let a = run_experiment(&clean, &cfg, Variant::Da3d, runs)?;
    let b = run_experiment(&polluted, &cfg, Variant::Da3d, runs)?;
    println!("clean    {:.4} ± {:.4}", a.mean, a.std);
    println!("polluted {:.4} ± {:.4}", b.mean, b.std);
    Ok(())
}

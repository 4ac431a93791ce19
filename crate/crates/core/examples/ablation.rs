//! Compare the three anomaly sources on the blobs task.
//!
//! cargo run --release --example ablation [runs]

use da3d::data::{desk_task, SynthKind};
use da3d::eval::run_experiment;
use da3d::trainer::{TrainConfig, Variant};

fn main() -> da3d::Result<()> {
    let runs = std::env::args().nth(1).map_or(3, |s| s.parse().expect("runs is an integer"));
    let ds = desk_task(SynthKind::Blobs2d)?;
    let cfg = TrainConfig {
        batch_size: 128,
        epochs_pretrain: 20,
        epochs_main: 100,
        ..TrainConfig::default()
    };
    for variant in Variant::ALL {
        let summary = run_experiment(&ds, &cfg, variant, runs)?;
        let aucs: Vec<String> = summary.reports.iter().map(|r| format!("{:.3}", r.auc)).collect();
        println!(
            "{:<13} mean {:.4} ± {:.4}  [{}]",
            variant.name(),
            summary.mean,
            summary.std,
            aucs.join(" ")
        );
    }
    Ok(())
}

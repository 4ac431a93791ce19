//! Watch training through the event callback: critic clipping, the frozen
//! autoencoder and per-epoch losses.

use da3d::data::{desk_task, SynthKind};
use da3d::trainer::{fit, Phase, TrainConfig, TrainEvent, Variant};

fn main() -> da3d::Result<()> {
    let ds = desk_task(SynthKind::Blobs2d)?;
    let train = ds.train_features()?;
    let cfg = TrainConfig {
        batch_size: 128,
        epochs_pretrain: 10,
        epochs_main: 20,
        ..TrainConfig::default()
    };

    let mut max_critic: f64 = 0.0;
    let mut frozen = None;
    let mut aae_changed = false;
    let (_, log) = fit(&train, None, &cfg, Variant::Da3d, &mut |ev, m| match ev {
        TrainEvent::CriticUpdate { .. } => {
            max_critic = max_critic.max(m.critic.max_abs_param());
            let h = m.aae.frozen_hash();
            aae_changed |= *frozen.get_or_insert(h) != h;
        }
        TrainEvent::EpochEnd { phase: Phase::Main, epoch } if epoch % 5 == 4 => {
            println!("main epoch {epoch}: max |critic param| so far {max_critic:.4}");
        }
        _ => {}
    })?;

    println!("autoencoder changed during main phase: {aae_changed}");
    for r in log.records.iter().filter(|r| r.epoch % 5 == 4) {
        println!(
            "{:<8} {:>3}  recon {:>8}  critic {:>8}  gen {:>8}  detector {:>8}",
            format!("{:?}", r.phase),
            r.epoch,
            fmt(r.recon),
            fmt(r.critic),
            fmt(r.gen),
            fmt(r.detector)
        );
    }
    Ok(())
}

fn fmt(v: Option<f64>) -> String {
    v.map_or("-".into(), |v| format!("{v:.4}"))
}

//! Save a trained model, load it back and check the scores agree.

use da3d::checkpoint::{load_checkpoint, save_checkpoint};
use da3d::data::{desk_task, SynthKind};
use da3d::detector::score;
use da3d::trainer::{fit, TrainConfig, Variant};

fn main() -> da3d::Result<()> {
    let ds = desk_task(SynthKind::Ring2d)?;
    let train = ds.train_features()?;
    let cfg = TrainConfig {
        batch_size: 128,
        epochs_pretrain: 5,
        epochs_main: 10,
        ..TrainConfig::default()
    };
    let (model, _) = fit(&train, None, &cfg, Variant::Da3d, &mut |_, _| {})?;

    let dir = std::env::temp_dir().join("da3d-checkpoint-example");
    std::fs::create_dir_all(&dir).expect("temp dir is writable");
    let path = dir.join("ring.ckpt");
    save_checkpoint(&model, &path)?;
    let back = load_checkpoint(&path)?;

    let test = ds.test_features()?;
    let same = score(&model, &test)? == score(&back, &test)?;
    println!("wrote {} ({} bytes)", path.display(), std::fs::metadata(&path).map_or(0, |m| m.len()));
    println!("status {:?}, scores identical: {same}", back.status);
    Ok(())
}

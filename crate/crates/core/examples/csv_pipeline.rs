//! Load a CSV with a categorical column through a schema, preprocess with
//! training-split statistics only, train and evaluate.

use std::fmt::Write as _;

use da3d::data::{load_csv, preprocess, split_labels, Schema, SplitMode};
use da3d::eval::evaluate;
use da3d::trainer::{fit, TrainConfig, Variant};
use da3d::SeededRng;

/// Toy traffic log: normal rows cluster by protocol, attacks do not.
fn write_csv(path: &std::path::Path) {
    let mut rng = SeededRng::new(3);
    let mut text = String::from("id,bytes,duration,proto,verdict\n");
    for i in 0..3000 {
        let attack = i % 20 == 0;
        let proto = ["tcp", "udp", "icmp"][rng.below(3)];
        let (bytes, duration) = if attack {
            (rng.uniform() * 5000.0, rng.uniform() * 60.0)
        } else {
            let base = match proto {
                "tcp" => 1500.0,
                "udp" => 500.0,
                _ => 100.0,
            };
            (base + 50.0 * rng.normal(), 2.0 + 0.5 * rng.normal())
        };
        let verdict = if attack { "attack" } else { "ok" };
        writeln!(text, "{i},{bytes:.1},{duration:.3},{proto},{verdict}").unwrap();
    }
    std::fs::write(path, text).expect("temp dir is writable");
}

fn main() -> da3d::Result<()> {
    let path = std::env::temp_dir().join("da3d-traffic.csv");
    write_csv(&path);
    let schema = Schema {
        label_column: "verdict".into(),
        normal_values: vec!["ok".into()],
        categorical: vec!["proto".into()],
        ignore: vec!["id".into()],
    };

    let raw = load_csv(&path, &schema)?;
    let split = split_labels(&raw.labels, 42, SplitMode::Clean)?;
    let ds = preprocess(&raw, &split)?;
    let columns: Vec<&str> = ds.meta.iter().map(|c| c.name()).collect();
    println!("{} rows, columns {columns:?} encode to {} features", raw.len(), ds.input_dim());

    let cfg = TrainConfig {
        batch_size: 128,
        epochs_pretrain: 20,
        epochs_main: 40,
        ..TrainConfig::default()
    };
    let train = ds.train_features()?;
    let val = ds.val_features()?;
    let (model, log) = fit(&train, Some(&val), &cfg, Variant::Da3d, &mut |_, _| {})?;
    let val_mse = log.records.last().and_then(|r| r.val_mse).unwrap_or(f64::NAN);
    println!("validation reconstruction mse {val_mse:.5}");
    println!("test AUC {:.4}", evaluate(&model, &ds)?);
    Ok(())
}

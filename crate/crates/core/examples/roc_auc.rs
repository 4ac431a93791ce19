//! Rank-based ROC-AUC, including tied scores.

use da3d::eval::roc_auc;

fn main() -> da3d::Result<()> {
    let labels = [1, 0, 1, 0, 0, 1];
    let scores = [0.9, 0.4, 0.4, 0.1, 0.7, 0.8];
    // 9 anomaly/normal pairs: 7 won, one tie (0.4 vs 0.4) counts half
    println!("AUC {:.4}", roc_auc(&scores, &labels)?);

    let constant = [0.5; 6];
    println!("constant scores give {:.1}", roc_auc(&constant, &labels)?);
    Ok(())
}

//! The full fact-prediction protocol for every model on one dataset.
//!
//! Per repeat: draw a stratified 60/40 test set (ten items per relation),
//! mask its positives out of training, fit, tune one global threshold on a
//! validation sample, and score the held-out test set. Reports mean ± std
//! AUC and micro-F1 over the repeats.
//!
//! Usage: cargo run --release --example fact_prediction_eval [-- <dataset_dir> [repeats]]

use ketra::eval::{mean_std, run_protocol};
use ketra::graph::{load_dataset_dir, LiteralPolicy};
use ketra::models::{Hyperparams, ModelKind};
use ketra::similarity::Encoding;
use ketra::solver::FitConfig;

fn main() -> ketra::Result<()> {
    let dir = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "datasets/umls".into());
    let repeats: usize = std::env::args()
        .nth(2)
        .and_then(|v| v.parse().ok())
        .unwrap_or(5);
    let (kg, _) = load_dataset_dir(std::path::Path::new(&dir), LiteralPolicy::Keep)?;
    let cfg = FitConfig {
        max_iter: 60,
        ..FitConfig::default()
    };

    println!("{:<20} {:>16} {:>16}", "model", "AUC", "micro-F1");
    for kind in ModelKind::ALL {
        let h = Hyperparams {
            lambda_a: 0.1,
            lambda_r: 0.1,
            rho: 1.0,
            ..Hyperparams::default()
        };
        let reports = run_protocol(&kg, kind, Encoding::Transitivity, &h, &cfg, 10, repeats, 1)?;
        let auc = mean_std(&reports.iter().map(|r| r.auc).collect::<Vec<_>>());
        let micro = mean_std(&reports.iter().map(|r| r.f1_micro).collect::<Vec<_>>());
        println!(
            "{:<20} {:>7.4} ± {:.4} {:>7.4} ± {:.4}",
            kind.name(),
            auc.mean,
            auc.std,
            micro.mean,
            micro.std
        );
    }
    Ok(())
}

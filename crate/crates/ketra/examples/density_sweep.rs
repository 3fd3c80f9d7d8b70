//! How model quality responds to graph density.
//!
//! Subsampling the subjects while keeping the candidate object set constant
//! thins the graph; each fraction gets a fresh train/eval run per model.
//!
//! Usage: cargo run --release --example density_sweep [-- <dataset_dir>]

use ketra::eval::density_sweep;
use ketra::graph::{load_dataset_dir, LiteralPolicy};
use ketra::models::{Hyperparams, ModelKind};
use ketra::similarity::Encoding;
use ketra::solver::FitConfig;

fn main() -> ketra::Result<()> {
    let dir = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "datasets/kinship".into());
    let (kg, _) = load_dataset_dir(std::path::Path::new(&dir), LiteralPolicy::Keep)?;

    let kinds = [
        ModelKind::Rescal,
        ModelKind::QuadReg,
        ModelKind::QuadConstraint,
        ModelKind::LinearConstraint,
    ];
    let hs: Vec<Hyperparams> = kinds.iter().map(|_| Hyperparams::default()).collect();
    let cfg = FitConfig {
        max_iter: 60,
        ..FitConfig::default()
    };
    let fractions = [0.25, 0.5, 0.75, 1.0];
    let rows = density_sweep(
        &kg,
        &fractions,
        &kinds,
        Encoding::Transitivity,
        &hs,
        &cfg,
        10,
        1,
    )?;

    print!("{:>9}", "fraction");
    for k in kinds {
        print!("{:>19}", k.name());
    }
    println!();
    for row in rows {
        print!("{:>9.2}", row.fraction);
        for auc in row.auc {
            print!("{auc:>19.4}");
        }
        println!();
    }
    Ok(())
}

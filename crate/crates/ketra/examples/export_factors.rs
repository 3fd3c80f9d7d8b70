//! Train one model, export its factor matrices, read them back, and score a
//! few triples — the round trip behind `ketra train` / `ketra evaluate`.
//!
//! Usage: cargo run --release --example export_factors [-- <dataset_dir> <out_dir>]

use ketra::graph::{build_tensor, load_dataset_dir, LiteralPolicy};
use ketra::models::{
    merge_entity_factors, read_factor_csvs, write_factor_csvs, Hyperparams, ModelKind,
};
use ketra::similarity::{compute_similarity, Encoding};
use ketra::solver::{fit, FitConfig};

fn main() -> ketra::Result<()> {
    let dir = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "datasets/kinship".into());
    let out = std::env::args()
        .nth(2)
        .unwrap_or_else(|| "factors-out".into());
    let (kg, _) = load_dataset_dir(std::path::Path::new(&dir), LiteralPolicy::Keep)?;
    let x = build_tensor(&kg)?;
    let c = compute_similarity(&x, Encoding::Transitivity)?;
    let h = Hyperparams {
        rho: 1.0,
        ..Hyperparams::default()
    };
    let cfg = FitConfig {
        max_iter: 30,
        ..FitConfig::default()
    };
    let (factors, trace) = fit(ModelKind::LinearReg, &x, Some(&c), &h, &cfg)?;
    println!(
        "fit finished after {} sweeps ({})",
        trace.records.len(),
        trace.termination
    );

    let out = std::path::PathBuf::from(out);
    write_factor_csvs(&out, &factors)?;
    let restored = read_factor_csvs(&out)?;
    assert_eq!(factors, restored);
    println!("factor CSVs round-trip exactly under {}", out.display());

    // the split entity factors can be merged onto the quadratic form
    let merged = merge_entity_factors(&restored)?;
    for &(s, r, o) in kg.triples().iter().take(3) {
        println!(
            "score({}, {}, {}) = {:+.4} (merged {:+.4})",
            kg.entities.label(s),
            kg.relations.label(r),
            kg.entities.label(o),
            restored.score(s as usize, r as usize, o as usize)?,
            merged.score(s as usize, r as usize, o as usize)?,
        );
    }
    Ok(())
}

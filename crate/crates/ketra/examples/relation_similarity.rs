//! Compute the relation-similarity matrix of a dataset under every encoding
//! and report the most similar relation pairs; optionally export one
//! encoding as labeled CSV.
//!
//! Usage: cargo run --example relation_similarity [-- <dataset_dir> [out.csv]]

use ketra::graph::{build_tensor, load_dataset_dir, LiteralPolicy};
use ketra::similarity::{compute_similarity, Encoding};

fn main() -> ketra::Result<()> {
    let dir = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "datasets/umls".into());
    let out = std::env::args().nth(2);
    let (kg, _) = load_dataset_dir(std::path::Path::new(&dir), LiteralPolicy::Keep)?;
    let x = build_tensor(&kg)?;

    for encoding in Encoding::ALL {
        let sim = compute_similarity(&x, encoding)?;
        let n = sim.n_relations();
        let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
        let mut sum = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    pairs.push((sim.get(i, j), i, j));
                    sum += sim.get(i, j);
                }
            }
        }
        pairs.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
        println!(
            "{:<22} mean off-diagonal {:.3}",
            encoding.name(),
            sum / (n * n - n) as f64
        );
        for &(v, i, j) in pairs.iter().take(3) {
            println!(
                "    {:.3}  {} ~ {}",
                v,
                kg.relations.label(i as u32),
                kg.relations.label(j as u32)
            );
        }
    }

    if let Some(path) = out {
        let sim = compute_similarity(&x, Encoding::Transitivity)?;
        sim.write_csv(std::path::Path::new(&path), &kg.relations)?;
        println!("wrote transitivity matrix to {path}");
    }
    Ok(())
}

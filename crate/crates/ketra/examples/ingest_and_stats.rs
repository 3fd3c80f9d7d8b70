//! Ingest a dataset directory and print its shape statistics.
//!
//! Usage: cargo run --example ingest_and_stats [-- <dataset_dir>]

use ketra::graph::{build_tensor, load_dataset_dir, stats, LiteralPolicy};

fn main() -> ketra::Result<()> {
    let dir = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "datasets/kinship".into());
    let (kg, report) = load_dataset_dir(std::path::Path::new(&dir), LiteralPolicy::Keep)?;
    print!("{}", report.render());
    let st = stats(&build_tensor(&kg)?);
    println!("avg degree:        {:.2}", st.avg_degree);
    println!("graph density:     {:.5}", st.graph_density);
    Ok(())
}

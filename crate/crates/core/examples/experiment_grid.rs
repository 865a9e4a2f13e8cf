//! Run a TOML experiment config and print its summary.
//!
//! `cargo run --example experiment_grid -- [config.toml]`

use std::path::PathBuf;

use onenet::experiment::{run_grid, ExperimentConfig, Summary};

fn main() -> onenet::Result<()> {
    let path = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| {
        PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("examples/configs/switch.toml")
    });
    let cfg = ExperimentConfig::load(&path)?;
    let out_dir = std::env::temp_dir().join("onenet-grid");
    let out = run_grid(&cfg, &out_dir)?;
    let summary: Summary = serde_json::from_str(&std::fs::read_to_string(&out.summary).unwrap()).unwrap();
    for row in &summary.rows {
        println!(
            "{:<12} H={:<3} seeds={:?}  mse {:.4} ± {:.4}",
            row.combiner.name(),
            row.horizon,
            row.seeds,
            row.cumulative_mse.mean,
            row.cumulative_mse.std
        );
    }
    println!("{} reports in {}", out.reports.len(), out_dir.display());
    Ok(())
}

//! Every combiner on the same experts and stream, via a config-driven grid.

use std::path::Path;

use onenet::ensemble::CombinerKind;
use onenet::experiment::{compare, run_grid, CellReport, ExperimentConfig, Metric};

fn main() -> onenet::Result<()> {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("examples/configs/piecewise_ar.toml");
    let mut cfg = ExperimentConfig::load(&path)?;
    cfg.seeds = vec![0];
    cfg.grid.combiners = CombinerKind::ALL.to_vec();
    let out_dir = std::env::temp_dir().join("onenet-baselines");
    let out = run_grid(&cfg, &out_dir)?;
    let reports = out
        .reports
        .iter()
        .map(|p| CellReport::load(p).map(|r| (r.run.combiner.clone(), r)))
        .collect::<onenet::Result<Vec<_>>>()?;
    println!("{}", compare(&reports, &Metric::ALL)?);
    println!("reports in {}", out_dir.display());
    Ok(())
}

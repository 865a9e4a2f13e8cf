//! Stream a CSV file through OneNet and write weight and cumulative-MSE
//! plot data.
//!
//! `cargo run --example csv_stream -- [path.csv]`

use std::path::PathBuf;

use onenet::data::{load_csv, BadRowPolicy, LoadOptions};
use onenet::ensemble::{CombinerKind, CombinerSpec};
use onenet::experiment::{emit_plotdata, PlotKind};
use onenet::forecasters::{Dims, Forecaster, ForecasterKind, ForecasterSpec};
use onenet::numerics::component_rng;
use onenet::stream::{pretrain, run_online, split_and_normalize, StreamConfig};

fn main() -> onenet::Result<()> {
    let path = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| {
        PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/etth2_small.csv")
    });
    let ds = load_csv(&path, &LoadOptions { bad_rows: BadRowPolicy::Skip, columns: None })?;
    println!("{}: {} variables x {} steps ({} rows skipped)", path.display(), ds.n_vars(), ds.len(), ds.rejected_rows);
    let cfg = StreamConfig { lookback: 24, horizon: 1, ..StreamConfig::default() };
    let split = split_and_normalize(&ds.values, &cfg)?;
    for w in &split.warnings {
        println!("warning: {w}");
    }
    let dims = Dims::new(ds.n_vars(), cfg.lookback, cfg.horizon)?;
    let mut experts = [ForecasterKind::CrossTimeMlp, ForecasterKind::CrossVariableConv]
        .iter()
        .enumerate()
        .map(|(i, &k)| Forecaster::new(ForecasterSpec::new(k), dims, &mut component_rng(0, i as u64)))
        .collect::<onenet::Result<Vec<_>>>()?;
    pretrain(&mut experts, &split.warmup)?;
    let mut c = CombinerSpec::new(CombinerKind::OnenetOcp).build(dims, 2, &mut component_rng(0, 9))?;
    let r = run_online(&mut experts, c.as_mut(), &split.online, &cfg)?;
    println!("cumulative MSE {:.4}, MAE {:.4} over {} rounds", r.cumulative_mse, r.cumulative_mae, r.rounds);
    for (j, name) in ds.variable_names.iter().enumerate() {
        let w0 = r.weight_trajectory.iter().map(|w| w[j * 2]).sum::<f64>() / r.rounds as f64;
        println!("  {name:>5}: average cross-time weight {w0:.3}");
    }
    let out = std::env::temp_dir().join("onenet-csv");
    emit_plotdata(&r, PlotKind::Weights, &out.join("weights.csv"))?;
    emit_plotdata(&r, PlotKind::CumMse, &out.join("cum_mse.csv"))?;
    println!("plot data in {}", out.display());
    Ok(())
}

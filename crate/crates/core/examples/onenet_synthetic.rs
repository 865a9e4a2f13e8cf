//! OneNet over a cross-time and a cross-variable expert on a drifting
//! piecewise-AR stream, against each expert alone.

use onenet::data::{ArRegime, Scenario, SynthSpec};
use onenet::ensemble::{CombinerKind, CombinerSpec};
use onenet::forecasters::{Dims, Forecaster, ForecasterKind, ForecasterSpec};
use onenet::numerics::{component_rng, OptimConfig};
use onenet::stream::{pretrain, run_online, split_and_normalize, StreamConfig};

fn main() -> onenet::Result<()> {
    for seed in 0..3 {
        let spec = SynthSpec {
            scenario: Scenario::PiecewiseAr,
            t_total: 3000,
            n_vars: 4,
            boundaries: vec![1200, 1800, 2400],
            noise_sigma: 0.3,
            seed,
            ar_regimes: vec![
                ArRegime { coefficients: vec![0.9], coupling: 0.0 },
                ArRegime { coefficients: vec![0.0], coupling: 0.95 },
            ],
            ..SynthSpec::default()
        };
        let cfg = StreamConfig { lookback: 16, horizon: 4, seed, ..StreamConfig::default() };
        let split = split_and_normalize(&spec.generate()?.values, &cfg)?;
        let dims = Dims::new(4, 16, 4)?;
        let mut experts = [ForecasterKind::CrossTimeMlp, ForecasterKind::CrossVariableConv]
            .iter()
            .enumerate()
            .map(|(i, &k)| {
                let s = ForecasterSpec { optim: OptimConfig::adamw(3e-3), ..ForecasterSpec::new(k) };
                Forecaster::new(s, dims, &mut component_rng(seed, 100 + i as u64))
            })
            .collect::<onenet::Result<Vec<_>>>()?;
        pretrain(&mut experts, &split.warmup)?;
        let mut c = CombinerSpec::new(CombinerKind::OnenetOcp).build(dims, 2, &mut component_rng(seed, 1))?;
        let r = run_online(&mut experts, c.as_mut(), &split.online, &cfg)?;
        let w = r.mean_weights(0);
        println!(
            "seed {seed}: onenet {:.4}  cross-time {:.4}  cross-variable {:.4}  average cross-time weight {:.3}",
            r.cumulative_mse,
            r.expert_cumulative_mse[0],
            r.expert_cumulative_mse[1],
            w.iter().sum::<f64>() / w.len() as f64
        );
    }
    Ok(())
}

//! Immediate against delayed feedback, where truth arrives one horizon late
//! and models update once per horizon.

use onenet::data::{Scenario, SynthSpec};
use onenet::ensemble::{CombinerKind, CombinerSpec};
use onenet::forecasters::{Dims, Forecaster, ForecasterKind, ForecasterSpec};
use onenet::numerics::component_rng;
use onenet::stream::{pretrain, run_online, run_online_delayed, split_and_normalize, StreamConfig};

fn main() -> onenet::Result<()> {
    let data = SynthSpec {
        scenario: Scenario::PiecewiseAr,
        t_total: 2000,
        n_vars: 3,
        boundaries: vec![800, 1400],
        ..SynthSpec::default()
    }
    .generate()?;
    println!("   H   immediate   delayed   updates");
    for h in [1, 4, 12, 24] {
        let cfg = StreamConfig { lookback: 24, horizon: h, ..StreamConfig::default() };
        let split = split_and_normalize(&data.values, &cfg)?;
        let dims = Dims::new(3, 24, h)?;
        let mut out = Vec::new();
        for delayed in [false, true] {
            let mut experts = [ForecasterKind::CrossTimeMlp, ForecasterKind::CrossVariableConv]
                .iter()
                .enumerate()
                .map(|(i, &k)| Forecaster::new(ForecasterSpec::new(k), dims, &mut component_rng(0, i as u64)))
                .collect::<onenet::Result<Vec<_>>>()?;
            pretrain(&mut experts, &split.warmup)?;
            let mut c = CombinerSpec::new(CombinerKind::OnenetOcp).build(dims, 2, &mut component_rng(0, 9))?;
            let r = if delayed {
                run_online_delayed(&mut experts, c.as_mut(), &split.online, &cfg)?
            } else {
                run_online(&mut experts, c.as_mut(), &split.online, &cfg)?
            };
            out.push((r.cumulative_mse, r.update_events));
        }
        println!("{h:>4}   {:>9.4}   {:>7.4}   {:>7}", out[0].0, out[1].0, out[1].1);
    }
    Ok(())
}

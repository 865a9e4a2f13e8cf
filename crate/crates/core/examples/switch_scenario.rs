//! Slow switch: EGD weight on the first expert when the better expert
//! changes halfway through a 100-round stream.

use onenet::data::gen_switch;
use onenet::ensemble::{CombinerKind, CombinerSpec};
use onenet::forecasters::{Dims, Forecaster, ForecasterSpec};
use onenet::numerics::seeded_rng;
use onenet::stream::{run_online, StreamConfig};

fn main() -> onenet::Result<()> {
    let sc = gen_switch(100, 50)?;
    let dims = Dims::new(1, 1, 1)?;
    let windows = sc.windows(1, 1);
    let cfg = StreamConfig { lookback: 1, horizon: 1, ..StreamConfig::default() };
    println!("round  eta=1    eta=0.1  onenet");
    let mut curves = Vec::new();
    for (kind, eta) in [(CombinerKind::Egd, 1.0), (CombinerKind::Egd, 0.1), (CombinerKind::OnenetOcp, 1e-2)] {
        let mut experts = vec![
            Forecaster::new(ForecasterSpec::constant(sc.pred_a), dims, &mut seeded_rng(0))?,
            Forecaster::new(ForecasterSpec::constant(sc.pred_b), dims, &mut seeded_rng(0))?,
        ];
        let mut spec = CombinerSpec { eta, ..CombinerSpec::new(kind) };
        spec.optim.learning_rate = 1e-2;
        let mut c = spec.build(dims, 2, &mut seeded_rng(1))?;
        let r = run_online(&mut experts, c.as_mut(), &windows, &cfg)?;
        curves.push(r.weight_trajectory.iter().map(|w| w[0]).collect::<Vec<_>>());
    }
    for t in [1, 10, 25, 50, 51, 60, 75, 90, 100] {
        println!("{t:>5}  {:.5}  {:.5}  {:.5}", curves[0][t - 1], curves[1][t - 1], curves[2][t - 1]);
    }
    Ok(())
}

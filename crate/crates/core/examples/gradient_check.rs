//! Finite-difference check of every forecaster kind's analytic gradient.

use onenet::forecasters::{Dims, Forecaster, ForecasterKind, ForecasterSpec};
use onenet::numerics::{finite_diff_check, seeded_rng, Matrix};

fn main() -> onenet::Result<()> {
    let dims = Dims::new(3, 8, 2)?;
    let mut rng = seeded_rng(0);
    let x = Matrix::uniform(3, 8, 1.0, &mut rng);
    let y = Matrix::uniform(3, 2, 1.0, &mut rng);
    for kind in [
        ForecasterKind::LinearAr,
        ForecasterKind::CrossTimeMlp,
        ForecasterKind::CrossTimeConv,
        ForecasterKind::CrossVariableConv,
        ForecasterKind::OnenetLite,
    ] {
        for norm in [false, true] {
            let spec = ForecasterSpec { instance_norm: norm, ..ForecasterSpec::new(kind) };
            let f = Forecaster::new(spec, dims, &mut rng)?;
            let (_, g) = f.loss_and_grad(&x, &y)?;
            let err = finite_diff_check(|p| f.loss_with(p, &x, &y), f.params(), &g, 1e-5)?;
            println!("{:<20} norm={norm:<5} params={:>5}  max rel err {err:.2e}", kind.name(), f.params().num_scalars());
        }
    }
    Ok(())
}

//! Interval regret over the second regime of the switch stream: periodic
//! re-initialization against plain EGD.

use onenet::data::gen_switch;
use onenet::ensemble::EnsembleState;
use onenet::numerics::Matrix;
use onenet::regret::{interval_regret, LossLedger};

fn main() -> onenet::Result<()> {
    let sc = gen_switch(100, 50)?;
    println!("   eta     K   regret[51,100]   egd regret[51,100]");
    for eta in [0.01, 0.1, 1.0] {
        for k in [5, 10, 25] {
            let (mut ks, mut eg) = (EnsembleState::uniform(1, 2, eta, 1e-6)?, EnsembleState::uniform(1, 2, eta, 1e-6)?);
            let (mut lk, mut le) = (LossLedger::new(), LossLedger::new());
            for t in 1..=100 {
                let l = sc.losses(t).to_vec();
                lk.record(ks.w.row(0).to_vec(), l.clone())?;
                le.record(eg.w.row(0).to_vec(), l.clone())?;
                let m = Matrix::new(1, 2, l)?;
                ks.kstep_update(&m, k)?;
                eg.egd_update(&m)?;
            }
            println!(
                "{eta:>6} {k:>5}   {:>14.3}   {:>18.3}",
                interval_regret(&lk, 51, 100)?,
                interval_regret(&le, 51, 100)?
            );
        }
    }
    Ok(())
}

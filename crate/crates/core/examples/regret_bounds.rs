//! External and internal regret of tuned EGD on random bounded losses,
//! against their theoretical bounds.

use rand::Rng;

use onenet::ensemble::EnsembleState;
use onenet::numerics::{seeded_rng, Matrix};
use onenet::regret::{external_bound, external_regret, internal_bound, internal_regret, tuned_eta, LossLedger};

fn main() -> onenet::Result<()> {
    println!("  d      T   ext regret  ext bound   int regret  int bound");
    for d in [2, 4, 8] {
        for t in [128, 1024, 4096] {
            let mut rng = seeded_rng((d * t) as u64);
            let mut st = EnsembleState::uniform(1, d, tuned_eta(t, d), 1e-6)?;
            let mut ledger = LossLedger::new();
            for _ in 0..t {
                let l: Vec<f64> = (0..d).map(|_| rng.random()).collect();
                ledger.record(st.w.row(0).to_vec(), l.clone())?;
                st.egd_update(&Matrix::new(1, d, l)?)?;
            }
            println!(
                "{d:>3} {t:>6}   {:>9.3}  {:>9.3}   {:>9.3}  {:>9.3}",
                external_regret(&ledger)?,
                external_bound(t, d)?,
                internal_regret(&ledger)?,
                internal_bound(t, d)?
            );
        }
    }
    Ok(())
}

//! Property tests over the combiners, regret analytics and generators.

use proptest::prelude::*;

use onenet::data::{gen_switch, Scenario, SynthSpec};
use onenet::ensemble::{normalize_rows, EnsembleState, SIMPLEX_TOL};
use onenet::forecasters::{Dims, Forecaster, ForecasterKind, ForecasterSpec};
use onenet::numerics::{optim_step, seeded_rng, Matrix, OptimConfig};
use onenet::regret::{internal_regret, internal_regret_matrix, interval_regret, LossLedger};

fn matrix(rows: usize, cols: usize, lo: f64, hi: f64) -> impl Strategy<Value = Matrix> {
    prop::collection::vec(lo..hi, rows * cols).prop_map(move |v| Matrix::new(rows, cols, v).unwrap())
}

fn simplex_rows(w: &Matrix) -> bool {
    (0..w.rows()).all(|j| {
        let r = w.row(j);
        r.iter().all(|v| *v >= 0.0) && (r.iter().sum::<f64>() - 1.0).abs() <= SIMPLEX_TOL
    })
}

fn ledger_strategy() -> impl Strategy<Value = LossLedger> {
    (2usize..5, 1usize..40).prop_flat_map(|(d, t)| {
        (
            prop::collection::vec(prop::collection::vec(0.0..1.0f64, d), t),
            prop::collection::vec(prop::collection::vec(0.01..1.0f64, d), t),
        )
            .prop_map(|(losses, raw)| {
                let weights = raw
                    .into_iter()
                    .map(|r| {
                        let s: f64 = r.iter().sum();
                        r.into_iter().map(|v| v / s).collect()
                    })
                    .collect();
                LossLedger::from_rounds(losses, weights).unwrap()
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn egd_and_combined_weights_stay_on_simplex(
        losses in prop::collection::vec(matrix(3, 4, 0.0, 50.0), 1..30),
        biases in prop::collection::vec(matrix(3, 4, -2.0, 2.0), 1..30),
        eta in 0.0..5.0f64,
    ) {
        let mut st = EnsembleState::uniform(3, 4, eta, 1e-6).unwrap();
        for (l, b) in losses.iter().zip(biases.iter().cycle()) {
            st.egd_update(l).unwrap();
            st.b = b.clone();
            st.normalize_combined();
            prop_assert!(simplex_rows(&st.w));
            prop_assert!(simplex_rows(&st.w_tilde));
        }
    }

    #[test]
    fn kstep_weights_stay_on_simplex(
        losses in prop::collection::vec(matrix(2, 3, 0.0, 10.0), 1..40),
        k in 1usize..8,
    ) {
        let mut st = EnsembleState::uniform(2, 3, 1.0, 1e-6).unwrap();
        for l in &losses {
            st.kstep_update(l, k).unwrap();
            prop_assert!(simplex_rows(&st.w));
        }
    }

    #[test]
    fn egd_preserves_loss_order(l in matrix(1, 4, 0.0, 1.0), w0 in matrix(1, 4, 0.05, 1.0), eta in 0.01..3.0f64) {
        let mut st = EnsembleState::uniform(1, 4, eta, 1e-6).unwrap();
        st.w = normalize_rows(w0);
        let before = st.w.clone();
        st.egd_update(&l).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                if l.get(0, i) < l.get(0, j) - 1e-9 {
                    let ri = st.w.get(0, i) / before.get(0, i);
                    let rj = st.w.get(0, j) / before.get(0, j);
                    prop_assert!(ri > rj, "ratio {ri} <= {rj}");
                }
            }
        }
    }

    #[test]
    fn egd_two_expert_crossover_at_ties(bits in prop::collection::vec(any::<bool>(), 1..60), eta in 0.01..2.0f64) {
        let mut st = EnsembleState::uniform(1, 2, eta, 1e-6).unwrap();
        let mut diff = 0i64;
        for b in bits {
            let l = if b { [1.0, 0.0] } else { [0.0, 1.0] };
            diff += if b { 1 } else { -1 };
            st.egd_update(&Matrix::new(1, 2, l.to_vec()).unwrap()).unwrap();
            let (w1, w2) = (st.w.get(0, 0), st.w.get(0, 1));
            if diff == 0 {
                prop_assert!((w1 - w2).abs() <= 1e-12, "tie but w = ({w1}, {w2})");
            } else {
                prop_assert_eq!(w1 < w2, diff > 0);
            }
        }
    }

    #[test]
    fn kstep_with_long_period_is_egd(losses in prop::collection::vec(matrix(2, 3, 0.0, 5.0), 1..25), eta in 0.0..2.0f64) {
        let mut a = EnsembleState::uniform(2, 3, eta, 1e-6).unwrap();
        let mut b = a.clone();
        for l in &losses {
            a.egd_update(l).unwrap();
            b.kstep_update(l, losses.len() + 1).unwrap();
            let bits = |m: &Matrix| m.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
            prop_assert_eq!(bits(&a.w), bits(&b.w));
        }
    }

    #[test]
    fn normalization_is_scale_invariant(v in matrix(3, 4, 1e-6, 10.0), c in 1e-3..1e3f64) {
        let a = normalize_rows(v.clone());
        let b = normalize_rows(v.scale(c));
        for (x, y) in a.data().iter().zip(b.data()) {
            prop_assert!((x - y).abs() <= 1e-12);
        }
    }

    #[test]
    fn internal_regret_is_nonnegative(ledger in ledger_strategy()) {
        prop_assert!(internal_regret(&ledger).unwrap() >= 0.0);
    }

    #[test]
    fn internal_regret_matrix_matches_brute_force(ledger in ledger_strategy()) {
        let r = internal_regret_matrix(&ledger).unwrap();
        let d = ledger.n_experts();
        for i in 0..d {
            for j in 0..d {
                let want: f64 = if i == j {
                    0.0
                } else {
                    ledger.losses().iter().zip(ledger.weights())
                        .map(|(l, w)| w[i] * (l[i] - l[j]))
                        .sum()
                };
                prop_assert!((r.get(i, j) - want).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn interval_regret_matches_brute_force(ledger in ledger_strategy(), a in 0usize..1000, b in 0usize..1000) {
        let t = ledger.len();
        let (l, r) = {
            let (x, y) = (a % t + 1, b % t + 1);
            (x.min(y), x.max(y))
        };
        let rows = (l - 1)..r;
        let mixed: f64 = ledger.combiner_losses()[rows.clone()].iter().sum();
        let d = ledger.n_experts();
        let best = (0..d)
            .map(|i| ledger.losses()[rows.clone()].iter().map(|x| x[i]).sum::<f64>())
            .fold(f64::INFINITY, f64::min);
        prop_assert!((interval_regret(&ledger, l, r).unwrap() - (mixed - best)).abs() <= 1e-12);
    }

    #[test]
    fn sgd_step_is_exact(p0 in prop::collection::vec(-5.0..5.0f64, 1..20), g0 in prop::collection::vec(-5.0..5.0f64, 20), lr in 0.0..1.0f64, wd in 0.0..0.5f64) {
        let n = p0.len();
        let mut params = onenet::numerics::ParamSet::new();
        params.push("p", Matrix::new(1, n, p0.clone()).unwrap());
        let mut grads = params.zeros_like();
        grads.get_mut(0).data_mut().copy_from_slice(&g0[..n]);
        let cfg = OptimConfig { weight_decay: wd, ..OptimConfig::sgd(lr) };
        optim_step(&mut params, &grads, &cfg).unwrap();
        for k in 0..n {
            let want = p0[k] - lr * (g0[k] + wd * p0[k]);
            prop_assert_eq!(params.get(0).data()[k].to_bits(), want.to_bits());
        }
    }

    #[test]
    fn switch_crossover_holds_for_any_eta(eta in 1e-3..5.0f64) {
        let sc = gen_switch(100, 50).unwrap();
        let mut st = EnsembleState::uniform(1, 2, eta, 1e-6).unwrap();
        for t in 1..=100 {
            prop_assert!(st.w.get(0, 0) >= 0.5 - 1e-12, "t={t}");
            st.egd_update(&Matrix::new(1, 2, sc.losses(t).to_vec()).unwrap()).unwrap();
        }
        prop_assert!((st.w.get(0, 0) - 0.5).abs() <= 1e-12);
    }

    #[test]
    fn generators_are_deterministic(seed in any::<u64>(), scenario in prop_oneof![Just(Scenario::PiecewiseAr), Just(Scenario::SineRegime)]) {
        let spec = SynthSpec { scenario, t_total: 120, n_vars: 3, boundaries: vec![60], seed, ..SynthSpec::default() };
        prop_assert_eq!(spec.generate().unwrap(), spec.generate().unwrap());
    }

    #[test]
    fn updates_keep_shape_and_finiteness(seed in 0u64..1000, kind_idx in 0usize..5) {
        let kinds = [
            ForecasterKind::LinearAr,
            ForecasterKind::CrossTimeMlp,
            ForecasterKind::CrossTimeConv,
            ForecasterKind::CrossVariableConv,
            ForecasterKind::OnenetLite,
        ];
        let mut rng = seeded_rng(seed);
        let dims = Dims::new(3, 8, 2).unwrap();
        let mut f = Forecaster::new(ForecasterSpec::new(kinds[kind_idx]), dims, &mut rng).unwrap();
        for _ in 0..5 {
            let x = Matrix::uniform(3, 8, 2.0, &mut rng);
            let y = Matrix::uniform(3, 2, 2.0, &mut rng);
            f.update(&x, &y).unwrap();
            let p = f.predict(&x).unwrap();
            prop_assert_eq!(p.shape(), (3, 2));
            prop_assert!(p.is_finite() && f.params().is_finite());
        }
    }
}

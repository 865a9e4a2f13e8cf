//! The online loop on the CSV fixture: metrics, determinism, look-ahead.

use std::path::PathBuf;

use onenet::data::{load_csv, LoadOptions};
use onenet::ensemble::{CombinerKind, CombinerSpec};
use onenet::forecasters::{Dims, Forecaster, ForecasterKind, ForecasterSpec, SeriesWindow};
use onenet::numerics::{component_rng, Matrix};
use onenet::stream::{pretrain, run_online, split_and_normalize, Rounds, RunReport, StreamConfig};

fn fixture() -> Matrix {
    let p = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/etth2_small.csv");
    load_csv(&p, &LoadOptions::default()).unwrap().values
}

fn cfg() -> StreamConfig {
    StreamConfig {
        lookback: 24,
        horizon: 4,
        record_forecasts: true,
        ..StreamConfig::default()
    }
}

fn experts(dims: Dims, seed: u64) -> Vec<Forecaster> {
    [ForecasterKind::CrossTimeMlp, ForecasterKind::CrossVariableConv]
        .iter()
        .enumerate()
        .map(|(i, &k)| Forecaster::new(ForecasterSpec::new(k), dims, &mut component_rng(seed, i as u64)).unwrap())
        .collect()
}

fn run_on<S: Rounds + ?Sized>(stream: &S, warm: Option<&S>, kind: CombinerKind, seed: u64) -> RunReport {
    let c = cfg();
    let m = stream.window(0).x.rows();
    let dims = Dims::new(m, c.lookback, c.horizon).unwrap();
    let mut ex = experts(dims, seed);
    if let Some(w) = warm {
        pretrain(&mut ex, w).unwrap();
    }
    let mut comb = CombinerSpec::new(kind).build(dims, 2, &mut component_rng(seed, 9)).unwrap();
    run_online(&mut ex, comb.as_mut(), stream, &c).unwrap()
}

#[test]
fn metrics_follow_their_definitions() {
    let split = split_and_normalize(&fixture(), &cfg()).unwrap();
    let r = run_on(&split.online, Some(&split.warmup), CombinerKind::OnenetOcp, 1);
    let f = r.forecasts.as_ref().unwrap();
    assert_eq!(f.len(), split.online.len());
    let (mut se, mut ae) = (0.0, 0.0);
    for (k, yhat) in f.iter().enumerate() {
        let y = split.online.window(k).y;
        let n = y.len() as f64;
        let mse: f64 = yhat.data().iter().zip(y.data()).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / n;
        let mae: f64 = yhat.data().iter().zip(y.data()).map(|(a, b)| (a - b).abs()).sum::<f64>() / n;
        assert!((r.mse_curve[k] - mse).abs() < 1e-12);
        se += mse;
        ae += mae;
    }
    assert!((r.cumulative_mse - se / f.len() as f64).abs() < 1e-12);
    assert!((r.cumulative_mae - ae / f.len() as f64).abs() < 1e-12);
}

#[test]
fn same_seed_same_report() {
    let split = split_and_normalize(&fixture(), &cfg()).unwrap();
    let a = run_on(&split.online, Some(&split.warmup), CombinerKind::OnenetOcp, 5);
    let b = run_on(&split.online, Some(&split.warmup), CombinerKind::OnenetOcp, 5);
    assert_eq!(a, b);
    let c = run_on(&split.online, Some(&split.warmup), CombinerKind::OnenetOcp, 6);
    assert_ne!(a.cumulative_mse, c.cumulative_mse);
}

#[test]
fn forecasts_never_see_the_current_target() {
    let split = split_and_normalize(&fixture(), &cfg()).unwrap();
    let clean: Vec<SeriesWindow> = (0..split.online.len()).map(|k| split.online.window(k)).collect();
    let base = run_on(&clean, None, CombinerKind::OnenetOcp, 2);
    let t = 40;
    let mut corrupt = clean.clone();
    corrupt[t].y = corrupt[t].y.map(|v| v * 100.0 + 7.0);
    let hit = run_on(&corrupt, None, CombinerKind::OnenetOcp, 2);
    let (fa, fb) = (base.forecasts.unwrap(), hit.forecasts.unwrap());
    assert_eq!(fa[..=t], fb[..=t]);
    assert_ne!(fa[t + 1], fb[t + 1]);
}

#[test]
fn weight_trajectories_are_simplex_valid() {
    let split = split_and_normalize(&fixture(), &cfg()).unwrap();
    for kind in [CombinerKind::Egd, CombinerKind::KstepEgd, CombinerKind::OnenetOcp, CombinerKind::RlW, CombinerKind::Gating] {
        let r = run_on(&split.online, Some(&split.warmup), kind, 3);
        assert!(r.weights_on_simplex);
        for row in &r.weight_trajectory {
            for j in 0..r.n_vars {
                let w = &row[j * 2..j * 2 + 2];
                assert!(w.iter().all(|v| *v >= 0.0));
                assert!((w[0] + w[1] - 1.0).abs() <= 1e-9, "{kind}");
            }
        }
        assert_eq!(r.per_variable_regret.len(), r.n_vars);
    }
}

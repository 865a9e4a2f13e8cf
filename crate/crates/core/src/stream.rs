//! The online protocol: warm-up statistics, then predict → reveal → update
//! one window at a time.

use serde::{Deserialize, Serialize};

use crate::ensemble::{expert_losses, Combiner};
use crate::error::{Error, Result};
use crate::forecasters::{Forecast, Forecaster, NormStats, SeriesWindow};
use crate::numerics::{mse_grad, Matrix};
use crate::regret::{LossLedger, RegretReport};

/// How experts are trained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExpertTraining {
    /// Each expert on its own loss.
    #[default]
    Decoupled,
    /// Each expert on the loss of the combined forecast. Diagnostic only.
    Coupled,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StreamConfig {
    pub lookback: usize,
    pub horizon: usize,
    pub warmup_ratio: f64,
    pub delayed_feedback: bool,
    pub seed: u64,
    /// One online pass over the warm-up windows before the online phase.
    pub warmup_pretrain: bool,
    pub expert_training: ExpertTraining,
    /// Added to the warm-up standard deviation.
    pub norm_eps: f64,
    /// Keep every emitted forecast in the report.
    pub record_forecasts: bool,
    /// Extra `[l, r]` intervals (1-based) for the regret report.
    pub intervals: Vec<(usize, usize)>,
}

impl Default for StreamConfig {
    fn default() -> Self {
        Self {
            lookback: 60,
            horizon: 1,
            warmup_ratio: 0.25,
            delayed_feedback: false,
            seed: 0,
            warmup_pretrain: true,
            expert_training: ExpertTraining::Decoupled,
            norm_eps: 1e-8,
            record_forecasts: false,
            intervals: Vec::new(),
        }
    }
}

impl StreamConfig {
    pub fn validate(&self) -> Result<()> {
        if self.lookback == 0 || self.horizon == 0 {
            return Err(Error::InvalidArgument("lookback and horizon must be >= 1".into()));
        }
        if !(self.warmup_ratio > 0.0 && self.warmup_ratio < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "warmup_ratio must lie in (0, 1), got {}",
                self.warmup_ratio
            )));
        }
        if !(self.norm_eps >= 0.0) {
            return Err(Error::InvalidArgument("norm_eps must be >= 0".into()));
        }
        Ok(())
    }
}

/// Anything that yields a fixed sequence of windows.
pub trait Rounds {
    fn len(&self) -> usize;
    fn window(&self, k: usize) -> SeriesWindow;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl Rounds for [SeriesWindow] {
    fn len(&self) -> usize {
        <[SeriesWindow]>::len(self)
    }

    fn window(&self, k: usize) -> SeriesWindow {
        self[k].clone()
    }
}

impl Rounds for Vec<SeriesWindow> {
    fn len(&self) -> usize {
        self.as_slice().len()
    }

    fn window(&self, k: usize) -> SeriesWindow {
        self[k].clone()
    }
}

/// Stride-1 windows over a (normalized) series.
#[derive(Debug, Clone)]
pub struct Windows {
    series: Matrix,
    start: usize,
    count: usize,
    lookback: usize,
    horizon: usize,
}

impl Windows {
    /// Windows whose look-back begins at `start, start+1, …`, as many as fit before `end`.
    pub fn new(series: Matrix, start: usize, end: usize, lookback: usize, horizon: usize) -> Self {
        let span = lookback + horizon;
        let count = if end >= start + span { end - start - span + 1 } else { 0 };
        Self {
            series,
            start,
            count,
            lookback,
            horizon,
        }
    }

    pub fn start(&self) -> usize {
        self.start
    }

    fn slice(&self, from: usize, len: usize) -> Matrix {
        let m = self.series.rows();
        let mut out = Matrix::zeros(m, len);
        for j in 0..m {
            out.row_mut(j).copy_from_slice(&self.series.row(j)[from..from + len]);
        }
        out
    }
}

impl Rounds for Windows {
    fn len(&self) -> usize {
        self.count
    }

    fn window(&self, k: usize) -> SeriesWindow {
        let s = self.start + k;
        SeriesWindow {
            x: self.slice(s, self.lookback),
            y: self.slice(s + self.lookback, self.horizon),
            t: k + 1,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Split {
    pub stats: NormStats,
    /// Windows fully inside the warm-up segment.
    pub warmup: Windows,
    pub online: Windows,
    pub warnings: Vec<String>,
}

/// Normalizes by warm-up statistics and cuts stride-1 windows.
///
/// The warm-up segment is the first `⌊T·warmup_ratio⌋` columns; the first
/// online look-back starts right after it.
pub fn split_and_normalize(raw: &Matrix, cfg: &StreamConfig) -> Result<Split> {
    cfg.validate()?;
    let (m, t) = raw.shape();
    let span = cfg.lookback + cfg.horizon;
    if t <= span {
        return Err(Error::InvalidArgument(format!(
            "series of length {t} is too short for L + H = {span}"
        )));
    }
    let split = (t as f64 * cfg.warmup_ratio).floor() as usize;
    if split < 2 {
        return Err(Error::InvalidArgument(format!(
            "warm-up segment of {split} step(s) is too short to estimate statistics"
        )));
    }
    if t < split + span {
        return Err(Error::InvalidArgument(format!(
            "no online window fits: T={t}, split={split}, L+H={span}"
        )));
    }
    let mut warm = Matrix::zeros(m, split);
    for j in 0..m {
        warm.row_mut(j).copy_from_slice(&raw.row(j)[..split]);
    }
    let mut stats = NormStats::from_rows(&warm, cfg.norm_eps);
    let mut warnings = Vec::new();
    for j in 0..m {
        if stats.sigma[j] == 0.0 {
            stats.sigma[j] = 1.0;
            warnings.push(format!("variable {j}: zero warm-up deviation, scale set to 1"));
        }
    }
    let normalized = stats.normalize(raw);
    Ok(Split {
        warmup: Windows::new(normalized.clone(), 0, split, cfg.lookback, cfg.horizon),
        online: Windows::new(normalized, split, t, cfg.lookback, cfg.horizon),
        stats,
        warnings,
    })
}

/// Running error sums and per-round logs.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricsAccumulator {
    pub rounds: usize,
    pub sum_mse: f64,
    pub sum_mae: f64,
    pub mse_curve: Vec<f64>,
    pub mae_curve: Vec<f64>,
    /// Sum over rounds of each expert's own MSE.
    pub expert_sum_mse: Vec<f64>,
}

impl MetricsAccumulator {
    pub fn new(n_experts: usize) -> Self {
        Self {
            expert_sum_mse: vec![0.0; n_experts],
            ..Default::default()
        }
    }

    pub fn update(&mut self, yhat: &Matrix, y: &Matrix, expert_mse: &[f64]) -> Result<(f64, f64)> {
        let n = y.len() as f64;
        yhat.require_shape(y.rows(), y.cols(), "metrics")?;
        let (mut se, mut ae) = (0.0, 0.0);
        for (a, b) in yhat.data().iter().zip(y.data()) {
            se += (a - b) * (a - b);
            ae += (a - b).abs();
        }
        let (mse, mae) = (se / n, ae / n);
        if !mse.is_finite() {
            return Err(Error::NonFinite {
                context: "metrics",
                detail: "combined forecast error".into(),
            });
        }
        self.rounds += 1;
        self.sum_mse += mse;
        self.sum_mae += mae;
        self.mse_curve.push(mse);
        self.mae_curve.push(mae);
        for (acc, e) in self.expert_sum_mse.iter_mut().zip(expert_mse) {
            *acc += e;
        }
        Ok((mse, mae))
    }

    pub fn cumulative_mse(&self) -> f64 {
        self.sum_mse / self.rounds.max(1) as f64
    }

    pub fn cumulative_mae(&self) -> f64 {
        self.sum_mae / self.rounds.max(1) as f64
    }

    /// Running mean of the per-round MSE.
    pub fn cumulative_mse_curve(&self) -> Vec<f64> {
        running_mean(&self.mse_curve)
    }
}

pub fn running_mean(v: &[f64]) -> Vec<f64> {
    let mut s = 0.0;
    v.iter()
        .enumerate()
        .map(|(i, x)| {
            s += x;
            s / (i + 1) as f64
        })
        .collect()
}

/// Result of one online run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub combiner: String,
    pub experts: Vec<String>,
    pub n_vars: usize,
    pub horizon: usize,
    pub rounds: usize,
    pub update_events: usize,
    pub cumulative_mse: f64,
    pub cumulative_mae: f64,
    /// Each expert's own cumulative MSE.
    pub expert_cumulative_mse: Vec<f64>,
    pub mse_curve: Vec<f64>,
    pub mae_curve: Vec<f64>,
    /// Whether every logged weight row lies on the simplex.
    pub weights_on_simplex: bool,
    /// Per round, the `M×d` weights used, row-major.
    pub weight_trajectory: Vec<Vec<f64>>,
    /// Variable-averaged losses and weights; absent for off-simplex combiners.
    pub ledger: Option<LossLedger>,
    pub regret: Option<RegretReport>,
    /// One report per variable, same conditions as `regret`.
    pub per_variable_regret: Vec<RegretReport>,
    pub forecasts: Option<Vec<Matrix>>,
    pub warnings: Vec<String>,
}

impl RunReport {
    /// Variable-averaged weight of expert `i` per round.
    pub fn mean_weights(&self, i: usize) -> Vec<f64> {
        let (m, d) = (self.n_vars, self.experts.len());
        self.weight_trajectory
            .iter()
            .map(|w| (0..m).map(|j| w[j * d + i]).sum::<f64>() / m as f64)
            .collect()
    }
}

/// Pretrains experts with one pass of their own online rule.
pub fn pretrain<S: Rounds + ?Sized>(experts: &mut [Forecaster], windows: &S) -> Result<()> {
    for k in 0..windows.len() {
        let w = windows.window(k);
        for e in experts.iter_mut() {
            e.update(&w.x, &w.y).map_err(|e| e.at_round(0))?;
        }
    }
    Ok(())
}

/// Online loop with immediate feedback.
pub fn run_online<S: Rounds + ?Sized>(
    experts: &mut [Forecaster],
    combiner: &mut dyn Combiner,
    stream: &S,
    cfg: &StreamConfig,
) -> Result<RunReport> {
    run(experts, combiner, stream, cfg, false)
}

/// Online loop where truth arrives `H` rounds late: forecasts every round,
/// updates every `H` rounds from the newest fully revealed window.
pub fn run_online_delayed<S: Rounds + ?Sized>(
    experts: &mut [Forecaster],
    combiner: &mut dyn Combiner,
    stream: &S,
    cfg: &StreamConfig,
) -> Result<RunReport> {
    run(experts, combiner, stream, cfg, true)
}

fn predict_all(experts: &[Forecaster], x: &Matrix) -> Result<Vec<Forecast>> {
    experts.iter().map(|e| e.predict(x)).collect()
}

fn train_experts(
    experts: &mut [Forecaster],
    mode: ExpertTraining,
    weights: &Matrix,
    preds: &[Forecast],
    w: &SeriesWindow,
) -> Result<()> {
    match mode {
        ExpertTraining::Decoupled => {
            for e in experts.iter_mut() {
                e.update(&w.x, &w.y)?;
            }
        }
        ExpertTraining::Coupled => {
            let combined = crate::ensemble::combine_with(weights, preds)?;
            let dy = mse_grad(&combined, &w.y)?;
            for (i, e) in experts.iter_mut().enumerate() {
                let mut di = dy.clone();
                for j in 0..di.rows() {
                    let wji = weights.get(j, i);
                    for v in di.row_mut(j) {
                        *v *= wji;
                    }
                }
                let g = e.backward(&w.x, &di)?;
                e.apply_gradient(&g)?;
            }
        }
    }
    Ok(())
}

fn ledger_row(w: &Matrix, losses: &Matrix) -> (Vec<f64>, Vec<f64>) {
    let (m, d) = w.shape();
    let mean = |a: &Matrix, i: usize| (0..m).map(|j| a.get(j, i)).sum::<f64>() / m as f64;
    ((0..d).map(|i| mean(w, i)).collect(), (0..d).map(|i| mean(losses, i)).collect())
}

fn run<S: Rounds + ?Sized>(
    experts: &mut [Forecaster],
    combiner: &mut dyn Combiner,
    stream: &S,
    cfg: &StreamConfig,
    delayed: bool,
) -> Result<RunReport> {
    cfg.validate()?;
    if experts.is_empty() {
        return Err(Error::InvalidArgument("at least one expert is required".into()));
    }
    let n = stream.len();
    if n == 0 {
        return Err(Error::InvalidArgument("stream has no online rounds".into()));
    }
    let d = experts.len();
    let first = stream.window(0);
    let (m, h) = first.y.shape();
    let lag = if delayed { cfg.horizon } else { 1 };

    let mut metrics = MetricsAccumulator::new(d);
    let mut trajectory = Vec::with_capacity(n);
    let mut on_simplex = true;
    let mut ledger = LossLedger::new();
    let mut var_ledgers: Vec<LossLedger> = (0..m).map(|_| LossLedger::new()).collect();
    let mut forecasts = cfg.record_forecasts.then(Vec::new);
    let mut update_events = 0;

    for k in 0..n {
        let round = k + 1;
        let win = if k == 0 { first.clone() } else { stream.window(k) };
        let preds = predict_all(experts, &win.x).map_err(|e| e.at_round(round))?;
        let used = combiner.forecast(&win.x, &preds).map_err(|e| e.at_round(round))?;
        if let Some(f) = forecasts.as_mut() {
            f.push(used.forecast.yhat.clone());
        }

        let losses = expert_losses(&preds, &win.y).map_err(|e| e.at_round(round))?;
        let expert_mse: Vec<f64> = (0..d)
            .map(|i| (0..m).map(|j| losses.get(j, i)).sum::<f64>() / m as f64)
            .collect();
        metrics
            .update(&used.forecast, &win.y, &expert_mse)
            .map_err(|e| e.at_round(round))?;
        trajectory.push(used.weights.data().to_vec());
        if on_simplex && used.on_simplex {
            let (wbar, lbar) = ledger_row(&used.weights, &losses);
            ledger.record(wbar, lbar).map_err(|e| e.at_round(round))?;
            for (j, vl) in var_ledgers.iter_mut().enumerate() {
                vl.record(used.weights.row(j).to_vec(), losses.row(j).to_vec())
                    .map_err(|e| e.at_round(round))?;
            }
        } else {
            on_simplex = false;
        }

        if round % lag == 0 {
            update_events += 1;
            if lag == 1 {
                train_experts(experts, cfg.expert_training, &used.weights, &preds, &win)
                    .map_err(|e| e.at_round(round))?;
                combiner
                    .observe(&win.x, &preds, &win.y)
                    .map_err(|e| e.at_round(round))?;
            } else {
                let old = stream.window(k + 1 - lag);
                let op = predict_all(experts, &old.x).map_err(|e| e.at_round(round))?;
                let ow = combiner.forecast(&old.x, &op).map_err(|e| e.at_round(round))?;
                train_experts(experts, cfg.expert_training, &ow.weights, &op, &old)
                    .map_err(|e| e.at_round(round))?;
                combiner.observe(&old.x, &op, &old.y).map_err(|e| e.at_round(round))?;
            }
        }
    }

    let mut intervals = vec![(1, n)];
    if n >= 2 {
        intervals.push((1, n / 2));
        intervals.push((n / 2 + 1, n));
    }
    intervals.extend(cfg.intervals.iter().copied().filter(|&(l, r)| l >= 1 && l <= r && r <= n));
    let (ledger, regret, per_variable_regret) = if on_simplex {
        let rep = RegretReport::from_ledger(&ledger, &intervals)?;
        let pv = var_ledgers
            .iter()
            .map(|l| RegretReport::from_ledger(l, &intervals))
            .collect::<Result<_>>()?;
        (Some(ledger), Some(rep), pv)
    } else {
        (None, None, Vec::new())
    };

    Ok(RunReport {
        combiner: combiner.name().to_string(),
        experts: experts.iter().map(|e| e.kind().name().to_string()).collect(),
        n_vars: m,
        horizon: h,
        rounds: n,
        update_events,
        cumulative_mse: metrics.cumulative_mse(),
        cumulative_mae: metrics.cumulative_mae(),
        expert_cumulative_mse: metrics.expert_sum_mse.iter().map(|s| s / n as f64).collect(),
        mse_curve: metrics.mse_curve,
        mae_curve: metrics.mae_curve,
        weights_on_simplex: on_simplex,
        weight_trajectory: trajectory,
        ledger,
        regret,
        per_variable_regret,
        forecasts,
        warnings: Vec::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::{CombinerKind, CombinerSpec, Fixed};
    use crate::forecasters::{Dims, ForecasterKind, ForecasterSpec};
    use crate::numerics::{seeded_rng, OptimConfig};
    use approx::assert_abs_diff_eq;
    use rand_distr::{Distribution, Normal};

    fn cfg(l: usize, h: usize) -> StreamConfig {
        StreamConfig {
            lookback: l,
            horizon: h,
            warmup_pretrain: false,
            ..Default::default()
        }
    }

    fn series(m: usize, t: usize, seed: u64) -> Matrix {
        let mut rng = seeded_rng(seed);
        let mut x = Matrix::zeros(m, t);
        for j in 0..m {
            let mut v = 0.0;
            for i in 0..t {
                v = 0.8 * v + rng.random_range(-1.0..1.0);
                x.set(j, i, v + j as f64);
            }
        }
        x
    }

    use rand::Rng;

    #[test]
    fn constant_series_normalizes_to_zero_with_warning() {
        let raw = Matrix::filled(2, 100, 3.5);
        let s = split_and_normalize(&raw, &cfg(10, 1)).unwrap();
        assert_eq!(s.stats.sigma, vec![1.0, 1.0]);
        assert_eq!(s.warnings.len(), 2);
        let w = s.online.window(0);
        assert!(w.x.data().iter().chain(w.y.data()).all(|v| *v == 0.0));
    }

    #[test]
    fn warmup_statistics_of_standard_noise() {
        let mut rng = seeded_rng(4);
        let normal = Normal::new(0.0, 1.0).unwrap();
        let t = 8000;
        let raw = Matrix::new(1, t, (0..t).map(|_| normal.sample(&mut rng)).collect()).unwrap();
        let s = split_and_normalize(&raw, &cfg(60, 1)).unwrap();
        let n = (t / 4) as f64;
        assert!(s.stats.mu[0].abs() < 3.0 / n.sqrt());
        assert!((s.stats.sigma[0] - 1.0).abs() < 3.0 / n.sqrt());
    }

    #[test]
    fn window_index_arithmetic() {
        let raw = Matrix::new(1, 100, (0..100).map(f64::from).collect()).unwrap();
        let s = split_and_normalize(&raw, &cfg(60, 1)).unwrap();
        // split = 25, count = 100 − 25 − 60 − 1 + 1
        assert_eq!(s.online.len(), 15);
        assert_eq!(s.online.start(), 25);
        let back = s.stats.denormalize(&s.online.window(0).x);
        assert_abs_diff_eq!(back.get(0, 0), 25.0, epsilon = 1e-9);
        let last = s.online.window(14);
        assert_abs_diff_eq!(s.stats.denormalize(&last.y).get(0, 0), 99.0, epsilon = 1e-9);
        assert!(split_and_normalize(&raw, &cfg(80, 1)).is_err());
    }

    fn build(kind: ForecasterKind, dims: Dims, seed: u64) -> Forecaster {
        let mut spec = ForecasterSpec::new(kind);
        spec.d_model = 8;
        spec.optim = OptimConfig::adamw(1e-3);
        Forecaster::new(spec, dims, &mut seeded_rng(seed)).unwrap()
    }

    #[test]
    fn single_expert_average_equals_standalone() {
        let raw = series(2, 300, 1);
        let c = cfg(16, 2);
        let s = split_and_normalize(&raw, &c).unwrap();
        let dims = Dims::new(2, 16, 2).unwrap();
        let mut experts = vec![build(ForecasterKind::CrossTimeMlp, dims, 3)];
        let mut comb = CombinerSpec::new(CombinerKind::Average).build(dims, 1, &mut seeded_rng(0)).unwrap();
        let rep = run_online(&mut experts, comb.as_mut(), &s.online, &c).unwrap();

        let mut solo = build(ForecasterKind::CrossTimeMlp, dims, 3);
        let mut sum = 0.0;
        for k in 0..s.online.len() {
            let w = s.online.window(k);
            sum += solo.loss(&w.x, &w.y).unwrap();
            solo.update(&w.x, &w.y).unwrap();
        }
        assert_abs_diff_eq!(rep.cumulative_mse, sum / s.online.len() as f64, epsilon = 1e-12);
        assert_eq!(rep.expert_cumulative_mse[0], rep.cumulative_mse);
    }

    #[test]
    fn identical_experts_keep_uniform_weights() {
        let raw = series(3, 260, 2);
        let c = cfg(12, 1);
        let s = split_and_normalize(&raw, &c).unwrap();
        let dims = Dims::new(3, 12, 1).unwrap();
        let mut experts = vec![
            build(ForecasterKind::LinearAr, dims, 9),
            build(ForecasterKind::LinearAr, dims, 9),
        ];
        let mut comb = CombinerSpec::new(CombinerKind::OnenetOcp).build(dims, 2, &mut seeded_rng(1)).unwrap();
        let rep = run_online(&mut experts, comb.as_mut(), &s.online, &c).unwrap();
        for w in &rep.weight_trajectory {
            assert!(w.iter().all(|v| *v == 0.5), "{w:?}");
        }
    }

    #[test]
    fn pinned_weights_still_train_the_second_expert() {
        let raw = series(2, 200, 3);
        let c = cfg(8, 2);
        let s = split_and_normalize(&raw, &c).unwrap();
        let dims = Dims::new(2, 8, 2).unwrap();
        let mut experts = vec![
            build(ForecasterKind::CrossTimeMlp, dims, 1),
            build(ForecasterKind::CrossVariableConv, dims, 2),
        ];
        let before = experts[1].params().flatten();
        let mut pin = Fixed {
            weights: Matrix::from_rows(&[[1.0, 0.0], [1.0, 0.0]]).unwrap(),
        };
        run_online(&mut experts, &mut pin, &s.online, &c).unwrap();
        assert_ne!(experts[1].params().flatten(), before);
    }

    #[test]
    fn future_targets_do_not_leak_into_forecasts() {
        let raw = series(2, 200, 5);
        let mut c = cfg(8, 1);
        c.record_forecasts = true;
        let s = split_and_normalize(&raw, &c).unwrap();
        let wins: Vec<SeriesWindow> = (0..s.online.len()).map(|k| s.online.window(k)).collect();
        let t = 20;
        let mut corrupted = wins.clone();
        corrupted[t].y = corrupted[t].y.map(|v| v * 100.0 + 7.0);
        let dims = Dims::new(2, 8, 1).unwrap();
        let run_on = |w: &Vec<SeriesWindow>| {
            let mut ex = vec![build(ForecasterKind::LinearAr, dims, 1), build(ForecasterKind::CrossTimeMlp, dims, 2)];
            let mut comb = CombinerSpec::new(CombinerKind::OnenetOcp).build(dims, 2, &mut seeded_rng(0)).unwrap();
            run_online(&mut ex, comb.as_mut(), w, &c).unwrap()
        };
        let a = run_on(&wins).forecasts.unwrap();
        let b = run_on(&corrupted).forecasts.unwrap();
        assert_eq!(a[..=t], b[..=t]);
        assert_ne!(a[t + 1], b[t + 1]);
    }

    #[test]
    fn delayed_with_unit_horizon_is_identical() {
        let raw = series(2, 200, 6);
        let c = cfg(8, 1);
        let s = split_and_normalize(&raw, &c).unwrap();
        let dims = Dims::new(2, 8, 1).unwrap();
        let go = |delayed: bool| {
            let mut ex = vec![build(ForecasterKind::LinearAr, dims, 1), build(ForecasterKind::CrossTimeConv, dims, 2)];
            let mut comb = CombinerSpec::new(CombinerKind::OnenetOcp).build(dims, 2, &mut seeded_rng(0)).unwrap();
            if delayed {
                run_online_delayed(&mut ex, comb.as_mut(), &s.online, &c).unwrap()
            } else {
                run_online(&mut ex, comb.as_mut(), &s.online, &c).unwrap()
            }
        };
        assert_eq!(go(true), go(false));
    }

    #[test]
    fn delayed_update_count() {
        let raw = series(1, 400, 7);
        let c = StreamConfig {
            warmup_ratio: 0.1,
            ..cfg(8, 24)
        };
        let s = split_and_normalize(&raw, &c).unwrap();
        let wins: Vec<SeriesWindow> = (0..240).map(|k| s.online.window(k)).collect();
        let dims = Dims::new(1, 8, 24).unwrap();
        let mut ex = vec![build(ForecasterKind::LinearAr, dims, 1), build(ForecasterKind::LinearAr, dims, 2)];
        let mut comb = CombinerSpec::new(CombinerKind::Egd).build(dims, 2, &mut seeded_rng(0)).unwrap();
        let rep = run_online_delayed(&mut ex, comb.as_mut(), &wins, &c).unwrap();
        assert_eq!((rep.rounds, rep.update_events), (240, 10));
    }

    #[test]
    fn lr_combiner_reports_no_ledger() {
        let raw = series(2, 150, 8);
        let c = cfg(8, 1);
        let s = split_and_normalize(&raw, &c).unwrap();
        let dims = Dims::new(2, 8, 1).unwrap();
        let mut ex = vec![build(ForecasterKind::LinearAr, dims, 1), build(ForecasterKind::CrossTimeMlp, dims, 2)];
        let mut comb = CombinerSpec::new(CombinerKind::Lr).build(dims, 2, &mut seeded_rng(0)).unwrap();
        let rep = run_online(&mut ex, comb.as_mut(), &s.online, &c).unwrap();
        assert!(!rep.weights_on_simplex);
        assert!(rep.regret.is_none() && rep.ledger.is_none());
    }
}

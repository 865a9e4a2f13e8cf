//! Long-term multiplicative weights plus a learned short-term bias.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{clamped, combine_with, expert_losses, normalize_rows, EnsembleState, LossScaler};
use crate::error::{Error, Result};
use crate::forecasters::layers::{tanh, tanh_backward, Dense};
use crate::forecasters::Forecast;
use crate::numerics::{mse, mse_grad, optim_step, Matrix, OptimConfig, ParamSet};

/// How the gradient passes through `max(w + b, clamp_eps)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ClampGradient {
    /// Identity: clamped entries still receive gradient.
    #[default]
    StraightThrough,
    /// True derivative: zero for clamped entries.
    Exact,
}

/// Two-layer tanh MLP `R^{H·(d+1)} → R^d`, shared across variables.
#[derive(Debug, Clone)]
pub struct BiasNet {
    params: ParamSet,
    hidden: Dense,
    out: Dense,
    optim: OptimConfig,
    horizon: usize,
    n_experts: usize,
    clamp_gradient: ClampGradient,
}

struct BiasTrace {
    u: Matrix,
    a: Matrix,
    b: Matrix,
}

impl BiasNet {
    /// The output layer starts at zero, so the initial bias is zero.
    pub fn new<R: Rng + ?Sized>(
        horizon: usize,
        n_experts: usize,
        hidden: usize,
        optim: OptimConfig,
        rng: &mut R,
    ) -> Result<Self> {
        if horizon == 0 || n_experts == 0 || hidden == 0 {
            return Err(Error::InvalidArgument(format!(
                "bias net needs positive sizes (H={horizon}, d={n_experts}, hidden={hidden})"
            )));
        }
        optim.validate()?;
        let mut params = ParamSet::new();
        let input = horizon * (n_experts + 1);
        let h = Dense::register(&mut params, "bias.hidden", input, hidden, rng);
        let out = Dense::register(&mut params, "bias.out", hidden, n_experts, rng);
        params.get_mut(out.weight_slot()).data_mut().fill(0.0);
        params.get_mut(out.bias_slot()).data_mut().fill(0.0);
        Ok(Self {
            params,
            hidden: h,
            out,
            optim,
            horizon,
            n_experts,
            clamp_gradient: ClampGradient::default(),
        })
    }

    pub fn with_clamp_gradient(mut self, mode: ClampGradient) -> Self {
        self.clamp_gradient = mode;
        self
    }

    pub fn params(&self) -> &ParamSet {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamSet {
        &mut self.params
    }

    pub fn input_len(&self) -> usize {
        self.horizon * (self.n_experts + 1)
    }

    /// Row `j` is `[w[j,0]·p₀[j,·], …, w[j,d−1]·p_{d−1}[j,·], y[j,·]]`.
    pub fn input(&self, w: &Matrix, preds: &[Forecast], y: &Matrix) -> Result<Matrix> {
        let (m, h) = (w.rows(), self.horizon);
        if preds.len() != self.n_experts || w.cols() != self.n_experts {
            return Err(Error::shape(
                "bias net input",
                format!("{} experts", self.n_experts),
                format!("{} forecasts, {} weight columns", preds.len(), w.cols()),
            ));
        }
        y.require_shape(m, h, "bias net target")?;
        let mut u = Matrix::zeros(m, self.input_len());
        for (i, p) in preds.iter().enumerate() {
            p.require_shape(m, h, "bias net forecast")?;
            for j in 0..m {
                let wji = w.get(j, i);
                for (dst, v) in u.row_mut(j)[i * h..(i + 1) * h].iter_mut().zip(p.row(j)) {
                    *dst = wji * v;
                }
            }
        }
        let off = self.n_experts * h;
        for j in 0..m {
            u.row_mut(j)[off..off + h].copy_from_slice(y.row(j));
        }
        Ok(u)
    }

    fn forward(&self, p: &ParamSet, u: Matrix) -> BiasTrace {
        let a = tanh(self.hidden.forward(p, &u));
        let b = self.out.forward(p, &a);
        BiasTrace { u, a, b }
    }

    /// Bias `b: M×d` for the current long-term weights.
    pub fn bias_forward(&self, state: &EnsembleState, preds: &[Forecast], y: &Matrix) -> Result<Matrix> {
        let u = self.input(&state.w, preds, y)?;
        Ok(self.forward(&self.params, u).b)
    }

    /// Combination loss `mse(Σ w̃ᵢ pᵢ, y)` with `w̃` built from `params`.
    pub fn loss_with(
        &self,
        params: &ParamSet,
        state: &EnsembleState,
        preds: &[Forecast],
        y: &Matrix,
    ) -> Result<f64> {
        let u = self.input(&state.w, preds, y)?;
        let b = self.forward(params, u).b;
        let wt = normalize_rows(clamped(&state.w, &b, state.clamp_eps));
        mse(&combine_with(&wt, preds)?.yhat, y)
    }

    /// Loss, parameter gradient and the bias produced by the current parameters.
    pub fn loss_and_grad(
        &self,
        state: &EnsembleState,
        preds: &[Forecast],
        y: &Matrix,
    ) -> Result<(f64, ParamSet, Matrix)> {
        let u = self.input(&state.w, preds, y)?;
        let tr = self.forward(&self.params, u);
        let raw = clamped(&state.w, &tr.b, state.clamp_eps);
        let wt = normalize_rows(raw.clone());
        let yhat = combine_with(&wt, preds)?;
        let loss = mse(&yhat, y)?;
        let dy = mse_grad(&yhat, y)?;

        let (m, d) = raw.shape();
        let mut db = Matrix::zeros(m, d);
        for j in 0..m {
            // g_i = ∂L/∂w̃_i
            let g: Vec<f64> = preds
                .iter()
                .map(|p| p.row(j).iter().zip(dy.row(j)).map(|(a, b)| a * b).sum())
                .collect();
            let s: f64 = raw.row(j).iter().sum();
            let wrow = wt.row(j);
            for k in 0..d {
                let mut acc = 0.0;
                for i in 0..d {
                    acc += wrow[i] * (g[k] - g[i]);
                }
                let pass = match self.clamp_gradient {
                    ClampGradient::StraightThrough => 1.0,
                    ClampGradient::Exact => {
                        if state.w.get(j, k) + tr.b.get(j, k) > state.clamp_eps {
                            1.0
                        } else {
                            0.0
                        }
                    }
                };
                db.set(j, k, pass * acc / s);
            }
        }

        let mut grads = self.params.zeros_like();
        let da = self
            .out
            .backward(&self.params, &tr.a, &db, &mut grads, true)
            .expect("input gradient requested");
        let dz = tanh_backward(&tr.a, &da);
        self.hidden.backward(&self.params, &tr.u, &dz, &mut grads, false);
        Ok((loss, grads, tr.b))
    }

    /// One optimizer step on the combination loss; returns the pre-step loss.
    pub fn train_bias(&mut self, state: &EnsembleState, preds: &[Forecast], y: &Matrix) -> Result<f64> {
        Ok(self.train_step(state, preds, y)?.0)
    }

    fn train_step(
        &mut self,
        state: &EnsembleState,
        preds: &[Forecast],
        y: &Matrix,
    ) -> Result<(f64, Matrix)> {
        let (loss, grads, b) = self.loss_and_grad(state, preds, y)?;
        if let Some(name) = grads.first_non_finite() {
            return Err(Error::NonFinite {
                context: "bias net gradient",
                detail: name.to_string(),
            });
        }
        optim_step(&mut self.params, &grads, &self.optim)?;
        Ok((loss, b))
    }
}

/// Stateful combiner: multiplicative weights, loss scaling and a bias net.
#[derive(Debug, Clone)]
pub struct OcpBlock {
    state: EnsembleState,
    net: BiasNet,
    scaler: LossScaler,
    learn_long_term: bool,
}

impl OcpBlock {
    /// With `learn_long_term = false` the long-term weights stay uniform and
    /// only the bias is learned.
    pub fn new(state: EnsembleState, net: BiasNet, scaler: LossScaler, learn_long_term: bool) -> Self {
        Self {
            state,
            net,
            scaler,
            learn_long_term,
        }
    }

    pub fn state(&self) -> &EnsembleState {
        &self.state
    }

    pub fn state_mut(&mut self) -> &mut EnsembleState {
        &mut self.state
    }

    pub fn net(&self) -> &BiasNet {
        &self.net
    }

    /// Forecast with the stored `w̃`, built from the previous round's `(w, b)`.
    pub fn forecast(&self, preds: &[Forecast]) -> Result<Forecast> {
        self.state.combine(preds)
    }

    /// Updates `w`, computes and stores `b`, trains the net once and refreshes
    /// `w̃`. Returns the bias net's pre-step loss.
    pub fn observe(&mut self, preds: &[Forecast], y: &Matrix) -> Result<f64> {
        if self.learn_long_term {
            let losses = expert_losses(preds, y)?;
            let scaled = self.scaler.scale(&losses);
            self.state.egd_update(&scaled)?;
        } else {
            self.state.t += 1;
        }
        let (loss, b) = self.net.train_step(&self.state, preds, y)?;
        self.state.b = b;
        self.state.normalize_combined();
        Ok(loss)
    }

    /// Emits the forecast for this round, then learns from `y`.
    pub fn step(&mut self, preds: &[Forecast], y: &Matrix) -> Result<Forecast> {
        let used = self.forecast(preds)?;
        self.observe(preds, y)?;
        Ok(used)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::LossScaling;
    use crate::numerics::{finite_diff_check, seeded_rng};

    fn random_instance(seed: u64, m: usize, d: usize, h: usize) -> (BiasNet, EnsembleState, Vec<Forecast>, Matrix) {
        let mut rng = seeded_rng(seed);
        let mut net = BiasNet::new(h, d, 8, OptimConfig::adamw(1e-3), &mut rng)
            .unwrap()
            .with_clamp_gradient(ClampGradient::Exact);
        // non-zero output layer so the bias is informative
        let out_w = net.out.weight_slot();
        let bound = 0.3;
        *net.params_mut().get_mut(out_w) = Matrix::uniform(8, d, bound, &mut rng);
        let mut state = EnsembleState::uniform(m, d, 0.1, 1e-6).unwrap();
        state.w = normalize_rows(Matrix::uniform(m, d, 1.0, &mut rng).map(|v| v.abs() + 0.5));
        let preds = (0..d)
            .map(|_| Forecast::new(Matrix::uniform(m, h, 1.0, &mut rng)))
            .collect();
        let y = Matrix::uniform(m, h, 1.0, &mut rng);
        (net, state, preds, y)
    }

    #[test]
    fn zero_output_layer_gives_zero_bias() {
        let mut rng = seeded_rng(0);
        let net = BiasNet::new(3, 2, 32, OptimConfig::default(), &mut rng).unwrap();
        let state = EnsembleState::uniform(4, 2, 0.01, 1e-6).unwrap();
        let preds = vec![
            Forecast::new(Matrix::uniform(4, 3, 1.0, &mut rng)),
            Forecast::new(Matrix::uniform(4, 3, 1.0, &mut rng)),
        ];
        let y = Matrix::uniform(4, 3, 1.0, &mut rng);
        let b = net.bias_forward(&state, &preds, &y).unwrap();
        assert!(b.data().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn permuting_variables_permutes_bias_rows() {
        let (net, state, preds, y) = random_instance(1, 3, 2, 2);
        let b = net.bias_forward(&state, &preds, &y).unwrap();
        let perm = [2, 0, 1];
        let mut ps = state.clone();
        ps.w = state.w.permute_rows(&perm).unwrap();
        let pp: Vec<Forecast> = preds
            .iter()
            .map(|p| Forecast::new(p.permute_rows(&perm).unwrap()))
            .collect();
        let bp = net.bias_forward(&ps, &pp, &y.permute_rows(&perm).unwrap()).unwrap();
        assert_eq!(bp, b.permute_rows(&perm).unwrap());
    }

    #[test]
    fn gradient_matches_finite_differences() {
        for seed in 0..5 {
            let (net, state, preds, y) = random_instance(seed, 2, 2, 3);
            let (_, g, b) = net.loss_and_grad(&state, &preds, &y).unwrap();
            // stay away from the clamp kink
            assert!(state.w.add(&b).unwrap().data().iter().all(|v| *v > 1e-3));
            let err = finite_diff_check(
                |p| net.loss_with(p, &state, &preds, &y),
                net.params(),
                &g,
                1e-6,
            )
            .unwrap();
            assert!(err < 1e-4, "seed {seed}: {err}");
        }
    }

    #[test]
    fn zero_learning_rate_freezes_params() {
        let (mut net, state, preds, y) = random_instance(3, 2, 2, 3);
        net.optim = OptimConfig::sgd(0.0);
        let before = net.params().clone();
        net.train_bias(&state, &preds, &y).unwrap();
        assert_eq!(net.params().flatten(), before.flatten());
    }

    #[test]
    fn first_round_forecast_is_the_average() {
        let mut rng = seeded_rng(5);
        let state = EnsembleState::uniform(2, 2, 0.01, 1e-6).unwrap();
        let net = BiasNet::new(2, 2, 8, OptimConfig::default(), &mut rng).unwrap();
        let mut block = OcpBlock::new(state, net, LossScaler::new(LossScaling::RunningMax, 2), true);
        let p = Forecast::new(Matrix::uniform(2, 2, 1.0, &mut rng));
        let q = Forecast::new(Matrix::uniform(2, 2, 1.0, &mut rng));
        let y = Matrix::zeros(2, 2);
        let used = block.step(&[p.clone(), q.clone()], &y).unwrap();
        let avg = p.add(&q).unwrap().scale(0.5);
        for (a, b) in used.data().iter().zip(avg.data()) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn persistent_loss_gap_raises_the_better_weight() {
        let mut rng = seeded_rng(6);
        let state = EnsembleState::uniform(1, 2, 0.01, 1e-6).unwrap();
        let net = BiasNet::new(1, 2, 32, OptimConfig::default(), &mut rng).unwrap();
        let mut block = OcpBlock::new(state, net, LossScaler::new(LossScaling::RunningMax, 1), true);
        let preds = [
            Forecast::new(Matrix::zeros(1, 1)),
            Forecast::new(Matrix::filled(1, 1, 1.0)),
        ];
        let y = Matrix::zeros(1, 1);
        let mut prev = block.state().w.get(0, 0);
        for _ in 0..50 {
            block.step(&preds, &y).unwrap();
            let w = block.state().w.get(0, 0);
            assert!(w > prev);
            prev = w;
        }
    }

    #[test]
    fn state_stays_on_simplex_over_random_rounds() {
        let mut rng = seeded_rng(7);
        let state = EnsembleState::uniform(3, 3, 0.5, 1e-6).unwrap();
        let net = BiasNet::new(2, 3, 16, OptimConfig::adamw(1e-2), &mut rng).unwrap();
        let mut block = OcpBlock::new(state, net, LossScaler::new(LossScaling::RunningMax, 3), true);
        for _ in 0..1000 {
            let preds: Vec<Forecast> = (0..3)
                .map(|_| Forecast::new(Matrix::uniform(3, 2, 3.0, &mut rng)))
                .collect();
            let y = Matrix::uniform(3, 2, 3.0, &mut rng);
            block.step(&preds, &y).unwrap();
            block.state().check_simplex().unwrap();
        }
    }

    #[test]
    fn uniform_long_term_weights_when_frozen() {
        let mut rng = seeded_rng(8);
        let state = EnsembleState::uniform(1, 2, 0.5, 1e-6).unwrap();
        let net = BiasNet::new(1, 2, 4, OptimConfig::default(), &mut rng).unwrap();
        let mut block = OcpBlock::new(state, net, LossScaler::new(LossScaling::RunningMax, 1), false);
        let preds = [Forecast::new(Matrix::zeros(1, 1)), Forecast::new(Matrix::filled(1, 1, 1.0))];
        for _ in 0..10 {
            block.step(&preds, &Matrix::zeros(1, 1)).unwrap();
        }
        assert_eq!(block.state().w.data(), &[0.5, 0.5]);
        assert!(block.state().w_tilde.get(0, 0) > 0.5);
    }
}

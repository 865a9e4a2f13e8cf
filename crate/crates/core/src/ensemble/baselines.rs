//! Reference combiners.

use rand::Rng;

use super::{combine_with, expert_losses, EnsembleState, LossScaler};
use crate::error::{Error, Result};
use crate::forecasters::layers::Dense;
use crate::forecasters::Forecast;
use crate::numerics::{mse, mse_grad, optim_step, solve_linear, Matrix, OptimConfig, ParamSet};

/// Equal weights, no state.
#[derive(Debug, Clone)]
pub struct Average {
    n_vars: usize,
    n_experts: usize,
}

impl Average {
    pub fn new(n_vars: usize, n_experts: usize) -> Self {
        Self { n_vars, n_experts }
    }

    pub fn weights(&self) -> Matrix {
        Matrix::filled(self.n_vars, self.n_experts, 1.0 / self.n_experts as f64)
    }
}

/// Plain multiplicative weights over scaled per-variable losses.
#[derive(Debug, Clone)]
pub struct Egd {
    pub state: EnsembleState,
    pub scaler: LossScaler,
}

impl Egd {
    pub fn new(state: EnsembleState, scaler: LossScaler) -> Self {
        Self { state, scaler }
    }

    pub fn observe(&mut self, preds: &[Forecast], y: &Matrix) -> Result<()> {
        let l = self.scaler.scale(&expert_losses(preds, y)?);
        self.state.egd_update(&l)?;
        self.state.w_tilde = self.state.w.clone();
        Ok(())
    }
}

/// Multiplicative weights restarted from uniform every `k` updates.
#[derive(Debug, Clone)]
pub struct KStepEgd {
    pub state: EnsembleState,
    pub scaler: LossScaler,
    pub k: usize,
}

impl KStepEgd {
    pub fn new(state: EnsembleState, scaler: LossScaler, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidArgument("K must be >= 1".into()));
        }
        Ok(Self { state, scaler, k })
    }

    pub fn observe(&mut self, preds: &[Forecast], y: &Matrix) -> Result<()> {
        let l = self.scaler.scale(&expert_losses(preds, y)?);
        self.state.kstep_update(&l, self.k)?;
        self.state.w_tilde = self.state.w.clone();
        Ok(())
    }
}

/// `w = softmax(u·W + c)` per variable, trained on the combination MSE.
#[derive(Debug, Clone)]
pub(crate) struct SoftmaxGate {
    params: ParamSet,
    lin: Dense,
    optim: OptimConfig,
}

impl SoftmaxGate {
    /// Zero-initialized, so the first weights are uniform.
    pub(crate) fn new<R: Rng + ?Sized>(input: usize, n_experts: usize, optim: OptimConfig, rng: &mut R) -> Result<Self> {
        optim.validate()?;
        let mut params = ParamSet::new();
        let lin = Dense::register(&mut params, "gate", input, n_experts, rng);
        params.map_inplace(|_| 0.0);
        Ok(Self { params, lin, optim })
    }

    pub(crate) fn params(&self) -> &ParamSet {
        &self.params
    }

    pub(crate) fn params_mut(&mut self) -> &mut ParamSet {
        &mut self.params
    }

    pub(crate) fn weights_with(&self, p: &ParamSet, u: &Matrix) -> Matrix {
        let mut h = self.lin.forward(p, u);
        for j in 0..h.rows() {
            let row = h.row_mut(j);
            let mx = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let mut s = 0.0;
            for v in row.iter_mut() {
                *v = (*v - mx).exp();
                s += *v;
            }
            for v in row.iter_mut() {
                *v /= s;
            }
        }
        h
    }

    pub(crate) fn loss_with(&self, p: &ParamSet, u: &Matrix, preds: &[Forecast], y: &Matrix) -> Result<f64> {
        mse(&combine_with(&self.weights_with(p, u), preds)?.yhat, y)
    }

    pub(crate) fn loss_and_grad(&self, u: &Matrix, preds: &[Forecast], y: &Matrix) -> Result<(f64, ParamSet)> {
        let w = self.weights_with(&self.params, u);
        let yhat = combine_with(&w, preds)?;
        let loss = mse(&yhat, y)?;
        let dy = mse_grad(&yhat, y)?;
        let (m, d) = w.shape();
        let mut dh = Matrix::zeros(m, d);
        for j in 0..m {
            let g: Vec<f64> = preds
                .iter()
                .map(|p| p.row(j).iter().zip(dy.row(j)).map(|(a, b)| a * b).sum())
                .collect();
            let wr = w.row(j);
            for k in 0..d {
                let acc: f64 = (0..d).map(|i| wr[i] * (g[k] - g[i])).sum();
                dh.set(j, k, wr[k] * acc);
            }
        }
        let mut grads = self.params.zeros_like();
        self.lin.backward(&self.params, u, &dh, &mut grads, false);
        Ok((loss, grads))
    }

    pub(crate) fn train(&mut self, u: &Matrix, preds: &[Forecast], y: &Matrix) -> Result<f64> {
        let (loss, grads) = self.loss_and_grad(u, preds, y)?;
        if let Some(name) = grads.first_non_finite() {
            return Err(Error::NonFinite {
                context: "gate gradient",
                detail: name.to_string(),
            });
        }
        optim_step(&mut self.params, &grads, &self.optim)?;
        Ok(loss)
    }
}

/// Gate over the concatenated expert forecasts of each variable.
#[derive(Debug, Clone)]
pub struct Gating {
    pub(crate) gate: SoftmaxGate,
}

impl Gating {
    pub fn new<R: Rng + ?Sized>(horizon: usize, n_experts: usize, optim: OptimConfig, rng: &mut R) -> Result<Self> {
        Ok(Self {
            gate: SoftmaxGate::new(horizon * n_experts, n_experts, optim, rng)?,
        })
    }

    /// Row `j` is `[p₀[j,·], …, p_{d−1}[j,·]]`.
    pub fn input(preds: &[Forecast]) -> Matrix {
        let (m, h) = preds[0].shape();
        let mut u = Matrix::zeros(m, h * preds.len());
        for (i, p) in preds.iter().enumerate() {
            for j in 0..m {
                u.row_mut(j)[i * h..(i + 1) * h].copy_from_slice(p.row(j));
            }
        }
        u
    }

    pub fn weights(&self, preds: &[Forecast]) -> Matrix {
        self.gate.weights_with(self.gate.params(), &Self::input(preds))
    }

    pub fn params(&self) -> &ParamSet {
        self.gate.params()
    }

    pub fn params_mut(&mut self) -> &mut ParamSet {
        self.gate.params_mut()
    }

    pub fn loss_with(&self, p: &ParamSet, preds: &[Forecast], y: &Matrix) -> Result<f64> {
        self.gate.loss_with(p, &Self::input(preds), preds, y)
    }

    pub fn loss_and_grad(&self, preds: &[Forecast], y: &Matrix) -> Result<(f64, ParamSet)> {
        self.gate.loss_and_grad(&Self::input(preds), preds, y)
    }

    pub fn observe(&mut self, preds: &[Forecast], y: &Matrix) -> Result<f64> {
        self.gate.train(&Self::input(preds), preds, y)
    }
}

/// Gate over the look-back window of each variable.
#[derive(Debug, Clone)]
pub struct Moe {
    pub(crate) gate: SoftmaxGate,
}

impl Moe {
    pub fn new<R: Rng + ?Sized>(lookback: usize, n_experts: usize, optim: OptimConfig, rng: &mut R) -> Result<Self> {
        Ok(Self {
            gate: SoftmaxGate::new(lookback, n_experts, optim, rng)?,
        })
    }

    pub fn weights(&self, x: &Matrix) -> Matrix {
        self.gate.weights_with(self.gate.params(), x)
    }

    pub fn params(&self) -> &ParamSet {
        self.gate.params()
    }

    pub fn params_mut(&mut self) -> &mut ParamSet {
        self.gate.params_mut()
    }

    pub fn loss_with(&self, p: &ParamSet, x: &Matrix, preds: &[Forecast], y: &Matrix) -> Result<f64> {
        self.gate.loss_with(p, x, preds, y)
    }

    pub fn loss_and_grad(&self, x: &Matrix, preds: &[Forecast], y: &Matrix) -> Result<(f64, ParamSet)> {
        self.gate.loss_and_grad(x, preds, y)
    }

    pub fn observe(&mut self, x: &Matrix, preds: &[Forecast], y: &Matrix) -> Result<f64> {
        self.gate.train(x, preds, y)
    }
}

/// Ridge solve `(XᵀX + λI)⁻¹ Xᵀy`, `X` the `(M·H)×d` stack of expert forecasts.
pub fn fit_lr_weights(preds: &[Forecast], y: &Matrix, ridge_lambda: f64) -> Result<Vec<f64>> {
    if !(ridge_lambda >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "ridge_lambda must be >= 0, got {ridge_lambda}"
        )));
    }
    let d = preds.len();
    let (m, h) = y.shape();
    for p in preds {
        p.require_shape(m, h, "lr forecast")?;
    }
    let mut xtx = Matrix::zeros(d, d);
    let mut xty = vec![0.0; d];
    for i in 0..d {
        let pi = preds[i].data();
        xty[i] = pi.iter().zip(y.data()).map(|(a, b)| a * b).sum();
        for k in i..d {
            let v: f64 = pi.iter().zip(preds[k].data()).map(|(a, b)| a * b).sum();
            xtx.set(i, k, v);
            xtx.set(k, i, v);
        }
        xtx.set(i, i, xtx.get(i, i) + ridge_lambda);
    }
    solve_linear(&xtx, &xty)
}

/// Weights fitted on the previous round and applied to the current one.
#[derive(Debug, Clone)]
pub struct LinearRegression {
    n_vars: usize,
    n_experts: usize,
    pub ridge_lambda: f64,
    coef: Option<Vec<f64>>,
}

impl LinearRegression {
    pub fn new(n_vars: usize, n_experts: usize, ridge_lambda: f64) -> Result<Self> {
        if !(ridge_lambda >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "ridge_lambda must be >= 0, got {ridge_lambda}"
            )));
        }
        Ok(Self {
            n_vars,
            n_experts,
            ridge_lambda,
            coef: None,
        })
    }

    /// Uniform before the first fit.
    pub fn weights(&self) -> Matrix {
        match &self.coef {
            Some(c) => Matrix::from_rows(&vec![c.clone(); self.n_vars]).expect("rectangular"),
            None => Matrix::filled(self.n_vars, self.n_experts, 1.0 / self.n_experts as f64),
        }
    }

    pub fn coef(&self) -> Option<&[f64]> {
        self.coef.as_deref()
    }

    pub fn observe(&mut self, preds: &[Forecast], y: &Matrix) -> Result<()> {
        self.coef = Some(fit_lr_weights(preds, y, self.ridge_lambda)?);
        Ok(())
    }
}

/// Fixed weights; never learns.
#[derive(Debug, Clone)]
pub struct Fixed {
    pub weights: Matrix,
}

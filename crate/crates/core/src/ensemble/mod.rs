//! Combination policies for a pool of `d ≥ 2` experts.
//!
//! Weights are kept per variable: every matrix in this module is `M×d`, one
//! simplex row per variable. [`EnsembleState`] holds the long-term
//! multiplicative weights `w`, the short-term bias `b` and the combined
//! weights `w̃` actually used for forecasting.

mod baselines;
mod combiner;
mod ocp;

pub use baselines::{fit_lr_weights, Average, Egd, Fixed, Gating, KStepEgd, LinearRegression, Moe};
pub use combiner::{Combined, Combiner, CombinerKind, CombinerSpec, OcpCombiner};
pub use ocp::{BiasNet, ClampGradient, OcpBlock};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forecasters::Forecast;
use crate::numerics::Matrix;

/// Tolerance used by [`check_simplex`].
pub const SIMPLEX_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleState {
    pub w: Matrix,
    pub b: Matrix,
    pub w_tilde: Matrix,
    pub eta: f64,
    pub clamp_eps: f64,
    /// Number of weight updates applied so far.
    pub t: u64,
}

impl EnsembleState {
    /// Uniform weights, zero bias.
    pub fn uniform(n_vars: usize, n_experts: usize, eta: f64, clamp_eps: f64) -> Result<Self> {
        if n_vars == 0 || n_experts == 0 {
            return Err(Error::InvalidArgument(
                "ensemble needs at least one variable and one expert".into(),
            ));
        }
        if !(eta >= 0.0 && eta.is_finite()) {
            return Err(Error::InvalidArgument(format!("eta must be >= 0, got {eta}")));
        }
        if !(clamp_eps > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "clamp_eps must be positive, got {clamp_eps}"
            )));
        }
        let w = Matrix::filled(n_vars, n_experts, 1.0 / n_experts as f64);
        Ok(Self {
            b: Matrix::zeros(n_vars, n_experts),
            w_tilde: w.clone(),
            w,
            eta,
            clamp_eps,
            t: 0,
        })
    }

    pub fn n_vars(&self) -> usize {
        self.w.rows()
    }

    pub fn n_experts(&self) -> usize {
        self.w.cols()
    }

    /// Combines with the current `w̃`.
    pub fn combine(&self, preds: &[Forecast]) -> Result<Forecast> {
        combine_with(&self.w_tilde, preds)
    }

    /// One multiplicative step `w ← w·exp(−η ℓ) / Z` per variable.
    pub fn egd_update(&mut self, losses: &Matrix) -> Result<()> {
        losses.require_shape(self.n_vars(), self.n_experts(), "egd_update losses")?;
        if let Some(bad) = losses.data().iter().find(|v| !(**v >= 0.0) || !v.is_finite()) {
            return Err(Error::NonFinite {
                context: "egd_update",
                detail: format!("losses must be finite and >= 0, got {bad}"),
            });
        }
        let eta = self.eta;
        for j in 0..self.n_vars() {
            let l = losses.row(j);
            // A common shift cancels in the normalizer and keeps Z away from underflow.
            let l_min = l.iter().copied().fold(f64::INFINITY, f64::min);
            let row = self.w.row_mut(j);
            for (wi, li) in row.iter_mut().zip(l) {
                *wi *= (-eta * (li - l_min)).exp();
            }
            let z: f64 = row.iter().sum();
            if !(z > 0.0) || !z.is_finite() {
                return Err(Error::NonFinite {
                    context: "egd_update",
                    detail: format!("normalizer {z} for variable {j}"),
                });
            }
            for wi in row.iter_mut() {
                *wi /= z;
            }
        }
        self.t += 1;
        Ok(())
    }

    /// [`egd_update`](Self::egd_update), then a reset to uniform once the
    /// update counter reaches a multiple of `k`.
    pub fn kstep_update(&mut self, losses: &Matrix, k: usize) -> Result<()> {
        if k == 0 {
            return Err(Error::InvalidArgument("K must be >= 1".into()));
        }
        self.egd_update(losses)?;
        if self.t.is_multiple_of(k as u64) {
            let u = 1.0 / self.n_experts() as f64;
            self.w.data_mut().fill(u);
        }
        Ok(())
    }

    /// `w̃ = max(w + b, clamp_eps) / Σ max(w + b, clamp_eps)` per variable.
    pub fn normalize_combined(&mut self) {
        self.w_tilde = normalized(&self.w, &self.b, self.clamp_eps);
    }

    pub fn check_simplex(&self) -> Result<()> {
        check_simplex(&self.w, "w")?;
        check_simplex(&self.w_tilde, "w_tilde")
    }
}

pub(crate) fn clamped(w: &Matrix, b: &Matrix, clamp_eps: f64) -> Matrix {
    w.zip_map(b, |w, b| (w + b).max(clamp_eps))
        .expect("w and b share a shape")
}

pub(crate) fn normalized(w: &Matrix, b: &Matrix, clamp_eps: f64) -> Matrix {
    normalize_rows(clamped(w, b, clamp_eps))
}

/// Divides every row by its sum.
pub fn normalize_rows(mut raw: Matrix) -> Matrix {
    for j in 0..raw.rows() {
        let row = raw.row_mut(j);
        let s: f64 = row.iter().sum();
        for v in row.iter_mut() {
            *v /= s;
        }
    }
    raw
}

/// `yhat[j,·] = Σᵢ weights[j,i] · preds[i][j,·]`.
pub fn combine_with(weights: &Matrix, preds: &[Forecast]) -> Result<Forecast> {
    let (m, d) = weights.shape();
    if preds.len() != d {
        return Err(Error::shape(
            "combine",
            format!("{d} expert forecasts"),
            format!("{}", preds.len()),
        ));
    }
    let h = preds[0].cols();
    for p in preds {
        p.require_shape(m, h, "combine forecast")?;
    }
    let mut out = Matrix::zeros(m, h);
    for (i, p) in preds.iter().enumerate() {
        for j in 0..m {
            let wji = weights.get(j, i);
            for (o, v) in out.row_mut(j).iter_mut().zip(p.row(j)) {
                *o += wji * v;
            }
        }
    }
    Ok(Forecast::new(out))
}

/// Per-variable, per-expert MSE: entry `(j, i)` is the mean over the horizon
/// of `(preds[i][j,·] − y[j,·])²`.
pub fn expert_losses(preds: &[Forecast], y: &Matrix) -> Result<Matrix> {
    let (m, h) = y.shape();
    let mut out = Matrix::zeros(m, preds.len());
    for (i, p) in preds.iter().enumerate() {
        p.require_shape(m, h, "expert losses")?;
        for j in 0..m {
            let s: f64 = p
                .row(j)
                .iter()
                .zip(y.row(j))
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            out.set(j, i, s / h as f64);
        }
    }
    Ok(out)
}

/// Every row nonnegative and summing to one within [`SIMPLEX_TOL`].
pub fn check_simplex(w: &Matrix, what: &str) -> Result<()> {
    for j in 0..w.rows() {
        let row = w.row(j);
        let s: f64 = row.iter().sum();
        if row.iter().any(|v| !(*v >= 0.0)) || (s - 1.0).abs() > SIMPLEX_TOL {
            return Err(Error::InvalidArgument(format!(
                "{what} row {j} is off the simplex: {row:?}"
            )));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LossScaling {
    /// Divide by the running per-variable maximum (floored).
    #[default]
    RunningMax,
    None,
}

/// Rescales losses so that every entry fed to the multiplicative update lies in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossScaler {
    mode: LossScaling,
    floor: f64,
    running_max: Vec<f64>,
}

impl LossScaler {
    pub const FLOOR: f64 = 1e-8;

    pub fn new(mode: LossScaling, n_vars: usize) -> Self {
        Self {
            mode,
            floor: Self::FLOOR,
            running_max: vec![Self::FLOOR; n_vars],
        }
    }

    pub fn running_max(&self) -> &[f64] {
        &self.running_max
    }

    pub fn scale(&mut self, losses: &Matrix) -> Matrix {
        match self.mode {
            LossScaling::None => losses.clone(),
            LossScaling::RunningMax => {
                let mut out = losses.clone();
                for j in 0..out.rows() {
                    let row = out.row_mut(j);
                    let row_max = row.iter().copied().fold(self.floor, f64::max);
                    let m = self.running_max[j].max(row_max);
                    self.running_max[j] = m;
                    for v in row.iter_mut() {
                        *v /= m;
                    }
                }
                out
            }
        }
    }
}

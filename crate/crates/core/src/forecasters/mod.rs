//! Online-trainable forecasters.
//!
//! Every forecaster maps a look-back window `x: M×L` to a forecast `M×H` and
//! is trained one window at a time on its own MSE loss. Cross-time kinds share
//! all parameters across variables, so they are exactly equivariant to a
//! reordering of the variables; the cross-variable kind mixes channels and
//! is not.

pub(crate) mod layers;

use std::fmt;
use std::ops::Deref;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{mse, mse_grad, optim_step, Matrix, OptimConfig, ParamSet};
use layers::{ConvEncoder, Dense, MlpEncoder};

/// One online round: look-back `x` (M×L), target `y` (M×H), round index `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesWindow {
    pub x: Matrix,
    pub y: Matrix,
    pub t: usize,
}

/// A forecast matrix (M×H).
#[derive(Debug, Clone, PartialEq)]
pub struct Forecast {
    pub yhat: Matrix,
}

impl Forecast {
    pub fn new(yhat: Matrix) -> Self {
        Self { yhat }
    }
}

impl Deref for Forecast {
    type Target = Matrix;

    fn deref(&self) -> &Matrix {
        &self.yhat
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dims {
    pub n_vars: usize,
    pub lookback: usize,
    pub horizon: usize,
}

impl Dims {
    pub fn new(n_vars: usize, lookback: usize, horizon: usize) -> Result<Self> {
        if n_vars == 0 || lookback == 0 || horizon == 0 {
            return Err(Error::InvalidArgument(format!(
                "dimensions must be positive (M={n_vars}, L={lookback}, H={horizon})"
            )));
        }
        Ok(Self {
            n_vars,
            lookback,
            horizon,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ForecasterKind {
    LinearAr,
    CrossTimeMlp,
    CrossTimeConv,
    CrossVariableConv,
    OnenetLite,
    /// Emits `value` everywhere; has no parameters. Used for scripted scenarios.
    Constant,
}

impl ForecasterKind {
    pub fn is_variable_independent(self) -> bool {
        !matches!(self, ForecasterKind::CrossVariableConv)
    }

    pub fn name(self) -> &'static str {
        match self {
            ForecasterKind::LinearAr => "linear-ar",
            ForecasterKind::CrossTimeMlp => "cross-time-mlp",
            ForecasterKind::CrossTimeConv => "cross-time-conv",
            ForecasterKind::CrossVariableConv => "cross-variable-conv",
            ForecasterKind::OnenetLite => "onenet-lite",
            ForecasterKind::Constant => "constant",
        }
    }
}

impl fmt::Display for ForecasterKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForecasterSpec {
    pub kind: ForecasterKind,
    /// Hidden width `d_m`.
    pub d_model: usize,
    pub n_layers: usize,
    /// Temporal kernel size for the convolutional kinds.
    pub kernel_size: usize,
    pub instance_norm: bool,
    pub norm_eps: f64,
    /// Output of the `constant` kind.
    pub value: f64,
    pub optim: OptimConfig,
}

impl Default for ForecasterSpec {
    fn default() -> Self {
        Self {
            kind: ForecasterKind::CrossTimeMlp,
            d_model: 16,
            n_layers: 2,
            kernel_size: 3,
            instance_norm: false,
            norm_eps: 1e-5,
            value: 0.0,
            optim: OptimConfig::default(),
        }
    }
}

impl ForecasterSpec {
    pub fn new(kind: ForecasterKind) -> Self {
        Self {
            kind,
            ..Self::default()
        }
    }

    pub fn constant(value: f64) -> Self {
        Self {
            kind: ForecasterKind::Constant,
            value,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.d_model == 0 || self.n_layers == 0 || self.kernel_size == 0 {
            return Err(Error::InvalidArgument(format!(
                "{}: d_model, n_layers and kernel_size must be >= 1",
                self.kind
            )));
        }
        if !(self.norm_eps > 0.0) {
            return Err(Error::InvalidArgument("norm_eps must be positive".into()));
        }
        self.optim.validate()
    }
}

/// Per-variable location and scale of a window (or of a warm-up segment).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub mu: Vec<f64>,
    pub sigma: Vec<f64>,
    pub eps: f64,
}

impl NormStats {
    /// Mean and population standard deviation of each row, two-pass.
    pub fn from_rows(x: &Matrix, eps: f64) -> Self {
        let n = x.cols() as f64;
        let mut mu = Vec::with_capacity(x.rows());
        let mut sigma = Vec::with_capacity(x.rows());
        for r in 0..x.rows() {
            let row = x.row(r);
            let m = row.iter().sum::<f64>() / n;
            let var = row.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n;
            mu.push(m);
            sigma.push(var.sqrt());
        }
        Self { mu, sigma, eps }
    }

    #[inline]
    pub fn scale(&self, j: usize) -> f64 {
        self.sigma[j] + self.eps
    }

    /// `(x − μ) / (σ + eps)` per row.
    pub fn normalize(&self, x: &Matrix) -> Matrix {
        let mut out = x.clone();
        for j in 0..out.rows() {
            let (m, s) = (self.mu[j], self.scale(j));
            for v in out.row_mut(j) {
                *v = (*v - m) / s;
            }
        }
        out
    }

    /// Inverse of [`normalize`](Self::normalize).
    pub fn denormalize(&self, x: &Matrix) -> Matrix {
        let mut out = x.clone();
        for j in 0..out.rows() {
            let (m, s) = (self.mu[j], self.scale(j));
            for v in out.row_mut(j) {
                *v = *v * s + m;
            }
        }
        out
    }
}

#[derive(Debug, Clone)]
enum Network {
    LinearAr {
        head: Dense,
    },
    CrossTimeMlp {
        encoder: MlpEncoder,
        head: Dense,
    },
    CrossTimeConv {
        encoder: ConvEncoder,
        head: Dense,
    },
    CrossVariableConv {
        encoder: ConvEncoder,
        head: Dense,
    },
    OnenetLite {
        mlp: MlpEncoder,
        conv: ConvEncoder,
        head: Dense,
    },
    Constant(f64),
}

/// An online forecaster: a network, its parameters and its optimizer settings.
#[derive(Debug, Clone)]
pub struct Forecaster {
    spec: ForecasterSpec,
    dims: Dims,
    net: Network,
    params: ParamSet,
}

impl Forecaster {
    pub fn new<R: Rng + ?Sized>(spec: ForecasterSpec, dims: Dims, rng: &mut R) -> Result<Self> {
        spec.validate()?;
        let Dims {
            n_vars: m,
            lookback: l,
            horizon: h,
        } = dims;
        let dm = spec.d_model;
        let mut params = ParamSet::new();
        let p = &mut params;
        let net = match spec.kind {
            ForecasterKind::LinearAr => Network::LinearAr {
                head: Dense::register(p, "head", l, h, rng),
            },
            ForecasterKind::CrossTimeMlp => Network::CrossTimeMlp {
                encoder: MlpEncoder::register(p, "encoder", l, dm, spec.n_layers, rng),
                head: Dense::register(p, "head", dm, h, rng),
            },
            ForecasterKind::CrossTimeConv => Network::CrossTimeConv {
                encoder: ConvEncoder::register(
                    p,
                    "encoder",
                    1,
                    dm,
                    spec.n_layers,
                    spec.kernel_size,
                    rng,
                ),
                head: Dense::register(p, "head", dm, h, rng),
            },
            ForecasterKind::CrossVariableConv => Network::CrossVariableConv {
                encoder: ConvEncoder::register(
                    p,
                    "encoder",
                    m,
                    dm,
                    spec.n_layers,
                    spec.kernel_size,
                    rng,
                ),
                head: Dense::register(p, "head", dm, m * h, rng),
            },
            ForecasterKind::OnenetLite => Network::OnenetLite {
                mlp: MlpEncoder::register(p, "mlp", l, dm, spec.n_layers, rng),
                conv: ConvEncoder::register(
                    p,
                    "conv",
                    1,
                    dm,
                    spec.n_layers,
                    spec.kernel_size,
                    rng,
                ),
                head: Dense::register(p, "head", 2 * dm, h, rng),
            },
            ForecasterKind::Constant => Network::Constant(spec.value),
        };
        Ok(Self {
            spec,
            dims,
            net,
            params,
        })
    }

    /// Toggles per-window instance normalization around the network.
    pub fn instance_norm_wrap(mut self, enabled: bool) -> Self {
        self.spec.instance_norm = enabled;
        self
    }

    pub fn spec(&self) -> &ForecasterSpec {
        &self.spec
    }

    pub fn kind(&self) -> ForecasterKind {
        self.spec.kind
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn params(&self) -> &ParamSet {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamSet {
        &mut self.params
    }

    /// Size of the output projection's weight matrix.
    pub fn head_weight_len(&self) -> usize {
        match &self.net {
            Network::LinearAr { head }
            | Network::CrossTimeMlp { head, .. }
            | Network::CrossTimeConv { head, .. }
            | Network::CrossVariableConv { head, .. }
            | Network::OnenetLite { head, .. } => self.params.get(head.weight_slot()).len(),
            Network::Constant(_) => 0,
        }
    }

    /// Size of the output projection's bias.
    pub fn head_bias_len(&self) -> usize {
        match &self.net {
            Network::LinearAr { head }
            | Network::CrossTimeMlp { head, .. }
            | Network::CrossTimeConv { head, .. }
            | Network::CrossVariableConv { head, .. }
            | Network::OnenetLite { head, .. } => self.params.get(head.bias_slot()).len(),
            Network::Constant(_) => 0,
        }
    }

    pub fn predict(&self, x: &Matrix) -> Result<Forecast> {
        self.predict_with(&self.params, x)
    }

    /// Forecast under an alternative parameter set with this model's layout.
    pub fn predict_with(&self, params: &ParamSet, x: &Matrix) -> Result<Forecast> {
        self.check_input(x)?;
        let yhat = match self.norm_stats(x) {
            Some(stats) => {
                let raw = self.forward(params, &stats.normalize(x)).0;
                stats.denormalize(&raw)
            }
            None => self.forward(params, x).0,
        };
        Ok(Forecast::new(yhat))
    }

    pub fn loss(&self, x: &Matrix, y: &Matrix) -> Result<f64> {
        self.loss_with(&self.params, x, y)
    }

    pub fn loss_with(&self, params: &ParamSet, x: &Matrix, y: &Matrix) -> Result<f64> {
        let f = self.predict_with(params, x)?;
        mse(&f.yhat, y)
    }

    /// MSE at the current parameters and its gradient.
    pub fn loss_and_grad(&self, x: &Matrix, y: &Matrix) -> Result<(f64, ParamSet)> {
        self.check_input(x)?;
        y.require_shape(self.dims.n_vars, self.dims.horizon, "forecaster target")?;
        let stats = self.norm_stats(x);
        let input = match &stats {
            Some(s) => s.normalize(x),
            None => x.clone(),
        };
        let (raw, trace) = self.forward(&self.params, &input);
        let yhat = match &stats {
            Some(s) => s.denormalize(&raw),
            None => raw,
        };
        let loss = mse(&yhat, y)?;
        let d_yhat = mse_grad(&yhat, y)?;
        let grads = self.backward_traced(&input, &trace, self.through_norm(stats.as_ref(), d_yhat));
        Ok((loss, grads))
    }

    /// Parameter gradient for an arbitrary upstream `dL/dŷ`.
    pub fn backward(&self, x: &Matrix, d_yhat: &Matrix) -> Result<ParamSet> {
        self.check_input(x)?;
        d_yhat.require_shape(self.dims.n_vars, self.dims.horizon, "forecaster upstream grad")?;
        let stats = self.norm_stats(x);
        let input = match &stats {
            Some(s) => s.normalize(x),
            None => x.clone(),
        };
        let (_, trace) = self.forward(&self.params, &input);
        Ok(self.backward_traced(&input, &trace, self.through_norm(stats.as_ref(), d_yhat.clone())))
    }

    pub fn apply_gradient(&mut self, grads: &ParamSet) -> Result<()> {
        if let Some(slot) = grads.first_non_finite() {
            return Err(Error::NonFinite {
                context: "forecaster update",
                detail: format!("{} gradient slot {slot} is not finite", self.spec.kind),
            });
        }
        if self.params.is_empty() {
            return Ok(());
        }
        optim_step(&mut self.params, grads, &self.spec.optim)
    }

    /// One optimizer step on this model's own loss; returns the pre-step loss.
    pub fn update(&mut self, x: &Matrix, y: &Matrix) -> Result<f64> {
        let (loss, grads) = self.loss_and_grad(x, y)?;
        self.apply_gradient(&grads)?;
        Ok(loss)
    }

    fn check_input(&self, x: &Matrix) -> Result<()> {
        x.require_shape(self.dims.n_vars, self.dims.lookback, "forecaster input")
    }

    fn norm_stats(&self, x: &Matrix) -> Option<NormStats> {
        self.spec
            .instance_norm
            .then(|| NormStats::from_rows(x, self.spec.norm_eps))
    }

    fn through_norm(&self, stats: Option<&NormStats>, mut d_yhat: Matrix) -> Matrix {
        if let Some(s) = stats {
            for j in 0..d_yhat.rows() {
                let k = s.scale(j);
                for v in d_yhat.row_mut(j) {
                    *v *= k;
                }
            }
        }
        d_yhat
    }

    fn forward(&self, p: &ParamSet, x: &Matrix) -> (Matrix, Trace) {
        let Dims {
            n_vars: m,
            lookback: l,
            horizon: h,
        } = self.dims;
        match &self.net {
            Network::LinearAr { head } => (head.forward(p, x), Trace::None),
            Network::CrossTimeMlp { encoder, head } => {
                let t = encoder.forward(p, x);
                (head.forward(p, t.output()), Trace::Mlp(t))
            }
            Network::CrossTimeConv { encoder, head } => {
                let seqs = Matrix::new(m * l, 1, x.data().to_vec()).expect("shape checked");
                let t = encoder.forward(p, &seqs, l);
                let z = t.last_steps();
                let y = head.forward(p, &z);
                (y, Trace::Conv(t, z))
            }
            Network::CrossVariableConv { encoder, head } => {
                let t = encoder.forward(p, &x.transpose(), l);
                let z = t.last_steps();
                let flat = head.forward(p, &z);
                let y = Matrix::new(m, h, flat.into_data()).expect("head width M·H");
                (y, Trace::Conv(t, z))
            }
            Network::OnenetLite { mlp, conv, head } => {
                let tm = mlp.forward(p, x);
                let seqs = Matrix::new(m * l, 1, x.data().to_vec()).expect("shape checked");
                let tc = conv.forward(p, &seqs, l);
                let zc = tc.last_steps();
                let zm = tm.output();
                let dm = zm.cols();
                let mut z = Matrix::zeros(m, 2 * dm);
                for j in 0..m {
                    z.row_mut(j)[..dm].copy_from_slice(zm.row(j));
                    z.row_mut(j)[dm..].copy_from_slice(zc.row(j));
                }
                let y = head.forward(p, &z);
                (y, Trace::Concat(tm, tc, z))
            }
            Network::Constant(v) => (Matrix::filled(m, h, *v), Trace::None),
        }
    }

    fn backward_traced(&self, x: &Matrix, trace: &Trace, d_out: Matrix) -> ParamSet {
        let p = &self.params;
        let mut g = p.zeros_like();
        match (&self.net, trace) {
            (Network::LinearAr { head }, _) => {
                head.backward(p, x, &d_out, &mut g, false);
            }
            (Network::CrossTimeMlp { encoder, head }, Trace::Mlp(t)) => {
                let dz = head
                    .backward(p, t.output(), &d_out, &mut g, true)
                    .expect("input grad requested");
                encoder.backward(p, x, t, dz, &mut g);
            }
            (Network::CrossTimeConv { encoder, head }, Trace::Conv(t, z)) => {
                let dz = head
                    .backward(p, z, &d_out, &mut g, true)
                    .expect("input grad requested");
                encoder.backward_last(p, t, &dz, &mut g);
            }
            (Network::CrossVariableConv { encoder, head }, Trace::Conv(t, z)) => {
                let flat = Matrix::new(1, d_out.len(), d_out.data().to_vec()).expect("flat");
                let dz = head
                    .backward(p, z, &flat, &mut g, true)
                    .expect("input grad requested");
                encoder.backward_last(p, t, &dz, &mut g);
            }
            (Network::OnenetLite { mlp, conv, head }, Trace::Concat(tm, tc, z)) => {
                let dz = head
                    .backward(p, z, &d_out, &mut g, true)
                    .expect("input grad requested");
                let dm = z.cols() / 2;
                let m = z.rows();
                let mut dzm = Matrix::zeros(m, dm);
                let mut dzc = Matrix::zeros(m, dm);
                for j in 0..m {
                    dzm.row_mut(j).copy_from_slice(&dz.row(j)[..dm]);
                    dzc.row_mut(j).copy_from_slice(&dz.row(j)[dm..]);
                }
                mlp.backward(p, x, tm, dzm, &mut g);
                conv.backward_last(p, tc, &dzc, &mut g);
            }
            (Network::Constant(_), _) => {}
            _ => unreachable!("trace does not match network"),
        }
        g
    }
}

enum Trace {
    None,
    Mlp(layers::MlpTrace),
    Conv(layers::ConvTrace, Matrix),
    Concat(layers::MlpTrace, layers::ConvTrace, Matrix),
}

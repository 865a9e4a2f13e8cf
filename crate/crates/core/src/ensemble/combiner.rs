//! The [`Combiner`] interface used by the online loop, and its configuration.

use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::baselines::{Average, Egd, Fixed, Gating, KStepEgd, LinearRegression, Moe};
use super::ocp::{BiasNet, ClampGradient, OcpBlock};
use super::{combine_with, EnsembleState, LossScaler, LossScaling};
use crate::error::{Error, Result};
use crate::forecasters::{Dims, Forecast};
use crate::numerics::{Matrix, OptimConfig};

/// A forecast and the per-variable weights that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct Combined {
    pub forecast: Forecast,
    /// `M×d`.
    pub weights: Matrix,
    /// Whether `weights` is guaranteed to lie on the simplex.
    pub on_simplex: bool,
}

pub trait Combiner: fmt::Debug + Send {
    fn name(&self) -> &'static str;

    /// Forecast for this round from state learned on earlier rounds only.
    fn forecast(&self, x: &Matrix, preds: &[Forecast]) -> Result<Combined>;

    /// Learn from the revealed target.
    fn observe(&mut self, x: &Matrix, preds: &[Forecast], y: &Matrix) -> Result<()>;
}

fn simplex(weights: Matrix, preds: &[Forecast]) -> Result<Combined> {
    Ok(Combined {
        forecast: combine_with(&weights, preds)?,
        weights,
        on_simplex: true,
    })
}

impl Combiner for Average {
    fn name(&self) -> &'static str {
        "average"
    }

    fn forecast(&self, _x: &Matrix, preds: &[Forecast]) -> Result<Combined> {
        simplex(self.weights(), preds)
    }

    fn observe(&mut self, _x: &Matrix, _preds: &[Forecast], _y: &Matrix) -> Result<()> {
        Ok(())
    }
}

impl Combiner for Fixed {
    fn name(&self) -> &'static str {
        "fixed"
    }

    fn forecast(&self, _x: &Matrix, preds: &[Forecast]) -> Result<Combined> {
        simplex(self.weights.clone(), preds)
    }

    fn observe(&mut self, _x: &Matrix, _preds: &[Forecast], _y: &Matrix) -> Result<()> {
        Ok(())
    }
}

impl Combiner for Egd {
    fn name(&self) -> &'static str {
        "egd"
    }

    fn forecast(&self, _x: &Matrix, preds: &[Forecast]) -> Result<Combined> {
        simplex(self.state.w.clone(), preds)
    }

    fn observe(&mut self, _x: &Matrix, preds: &[Forecast], y: &Matrix) -> Result<()> {
        Egd::observe(self, preds, y)
    }
}

impl Combiner for KStepEgd {
    fn name(&self) -> &'static str {
        "kstep-egd"
    }

    fn forecast(&self, _x: &Matrix, preds: &[Forecast]) -> Result<Combined> {
        simplex(self.state.w.clone(), preds)
    }

    fn observe(&mut self, _x: &Matrix, preds: &[Forecast], y: &Matrix) -> Result<()> {
        KStepEgd::observe(self, preds, y)
    }
}

impl Combiner for Gating {
    fn name(&self) -> &'static str {
        "gating"
    }

    fn forecast(&self, _x: &Matrix, preds: &[Forecast]) -> Result<Combined> {
        simplex(self.weights(preds), preds)
    }

    fn observe(&mut self, _x: &Matrix, preds: &[Forecast], y: &Matrix) -> Result<()> {
        Gating::observe(self, preds, y).map(drop)
    }
}

impl Combiner for Moe {
    fn name(&self) -> &'static str {
        "moe"
    }

    fn forecast(&self, x: &Matrix, preds: &[Forecast]) -> Result<Combined> {
        simplex(self.weights(x), preds)
    }

    fn observe(&mut self, x: &Matrix, preds: &[Forecast], y: &Matrix) -> Result<()> {
        Moe::observe(self, x, preds, y).map(drop)
    }
}

impl Combiner for LinearRegression {
    fn name(&self) -> &'static str {
        "lr"
    }

    fn forecast(&self, _x: &Matrix, preds: &[Forecast]) -> Result<Combined> {
        let weights = self.weights();
        Ok(Combined {
            forecast: combine_with(&weights, preds)?,
            weights,
            on_simplex: false,
        })
    }

    fn observe(&mut self, _x: &Matrix, preds: &[Forecast], y: &Matrix) -> Result<()> {
        LinearRegression::observe(self, preds, y)
    }
}

/// Wraps an [`OcpBlock`] under a display name.
#[derive(Debug, Clone)]
pub struct OcpCombiner {
    pub block: OcpBlock,
    name: &'static str,
}

impl Combiner for OcpCombiner {
    fn name(&self) -> &'static str {
        self.name
    }

    fn forecast(&self, _x: &Matrix, preds: &[Forecast]) -> Result<Combined> {
        simplex(self.block.state().w_tilde.clone(), preds)
    }

    fn observe(&mut self, _x: &Matrix, preds: &[Forecast], y: &Matrix) -> Result<()> {
        self.block.observe(preds, y).map(drop)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CombinerKind {
    Average,
    Gating,
    Moe,
    Lr,
    Egd,
    RlW,
    KstepEgd,
    OnenetOcp,
}

impl CombinerKind {
    pub const ALL: [CombinerKind; 8] = [
        CombinerKind::Average,
        CombinerKind::Gating,
        CombinerKind::Moe,
        CombinerKind::Lr,
        CombinerKind::Egd,
        CombinerKind::RlW,
        CombinerKind::KstepEgd,
        CombinerKind::OnenetOcp,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CombinerKind::Average => "average",
            CombinerKind::Gating => "gating",
            CombinerKind::Moe => "moe",
            CombinerKind::Lr => "lr",
            CombinerKind::Egd => "egd",
            CombinerKind::RlW => "rl-w",
            CombinerKind::KstepEgd => "kstep-egd",
            CombinerKind::OnenetOcp => "onenet-ocp",
        }
    }
}

impl fmt::Display for CombinerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CombinerSpec {
    pub kind: CombinerKind,
    /// Multiplicative step size.
    pub eta: f64,
    /// Re-initialization period for `kstep-egd`.
    #[serde(alias = "K")]
    pub k: usize,
    pub ridge_lambda: f64,
    pub clamp_eps: f64,
    /// Hidden width of the bias net.
    pub hidden: usize,
    /// Optimizer of the bias net and of the softmax gates.
    pub optim: OptimConfig,
    pub loss_scaling: LossScaling,
    pub clamp_gradient: ClampGradient,
}

impl Default for CombinerSpec {
    fn default() -> Self {
        Self {
            kind: CombinerKind::OnenetOcp,
            eta: 1e-2,
            k: 10,
            ridge_lambda: 1e-6,
            clamp_eps: 1e-6,
            hidden: 32,
            optim: OptimConfig::adamw(1e-3),
            loss_scaling: LossScaling::RunningMax,
            clamp_gradient: ClampGradient::StraightThrough,
        }
    }
}

impl CombinerSpec {
    pub fn new(kind: CombinerKind) -> Self {
        Self {
            kind,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str, v: String| Err(Error::InvalidArgument(format!("{}: {what} {v}", self.kind)));
        if !(self.eta >= 0.0 && self.eta.is_finite()) {
            return bad("eta must be >= 0, got", self.eta.to_string());
        }
        if self.k == 0 {
            return bad("k must be >= 1, got", "0".into());
        }
        if !(self.ridge_lambda >= 0.0) {
            return bad("ridge_lambda must be >= 0, got", self.ridge_lambda.to_string());
        }
        if !(self.clamp_eps > 0.0) {
            return bad("clamp_eps must be positive, got", self.clamp_eps.to_string());
        }
        if self.hidden == 0 {
            return bad("hidden must be >= 1, got", "0".into());
        }
        self.optim.validate()
    }

    pub fn build<R: Rng + ?Sized>(&self, dims: Dims, n_experts: usize, rng: &mut R) -> Result<Box<dyn Combiner>> {
        self.validate()?;
        if n_experts == 0 {
            return Err(Error::InvalidArgument("at least one expert is required".into()));
        }
        let m = dims.n_vars;
        let state = |eta| EnsembleState::uniform(m, n_experts, eta, self.clamp_eps);
        let scaler = || LossScaler::new(self.loss_scaling, m);
        let ocp = |learn: bool, eta: f64, name, rng: &mut R| -> Result<Box<dyn Combiner>> {
            let net = BiasNet::new(dims.horizon, n_experts, self.hidden, self.optim, rng)?
                .with_clamp_gradient(self.clamp_gradient);
            Ok(Box::new(OcpCombiner {
                block: OcpBlock::new(state(eta)?, net, scaler(), learn),
                name,
            }))
        };
        Ok(match self.kind {
            CombinerKind::Average => Box::new(Average::new(m, n_experts)),
            CombinerKind::Gating => Box::new(Gating::new(dims.horizon, n_experts, self.optim, rng)?),
            CombinerKind::Moe => Box::new(Moe::new(dims.lookback, n_experts, self.optim, rng)?),
            CombinerKind::Lr => Box::new(LinearRegression::new(m, n_experts, self.ridge_lambda)?),
            CombinerKind::Egd => Box::new(Egd::new(state(self.eta)?, scaler())),
            CombinerKind::KstepEgd => Box::new(KStepEgd::new(state(self.eta)?, scaler(), self.k)?),
            CombinerKind::RlW => ocp(false, 0.0, "rl-w", rng)?,
            CombinerKind::OnenetOcp => ocp(true, self.eta, "onenet-ocp", rng)?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::seeded_rng;

    #[test]
    fn every_kind_builds_and_starts_uniform() {
        let dims = Dims::new(2, 4, 3).unwrap();
        let mut rng = seeded_rng(0);
        let x = Matrix::uniform(2, 4, 1.0, &mut rng);
        let preds: Vec<Forecast> = (0..3).map(|_| Forecast::new(Matrix::uniform(2, 3, 1.0, &mut rng))).collect();
        for kind in CombinerKind::ALL {
            let c = CombinerSpec::new(kind).build(dims, 3, &mut rng).unwrap();
            assert_eq!(c.name(), kind.name());
            let out = c.forecast(&x, &preds).unwrap();
            assert!(out.weights.data().iter().all(|v| (v - 1.0 / 3.0).abs() < 1e-12), "{kind}");
        }
    }

    #[test]
    fn spec_parses_from_toml_with_defaults() {
        let s: CombinerSpec = toml::from_str("kind = \"kstep-egd\"\nK = 5\neta = 1.0").unwrap();
        assert_eq!(s.kind, CombinerKind::KstepEgd);
        assert_eq!(s.k, 5);
        assert_eq!(s.clamp_eps, 1e-6);
        assert!(toml::from_str::<CombinerSpec>("kind = \"egd\"\nbogus = 1").is_err());
    }

    #[test]
    fn invalid_fields_are_rejected() {
        let mut s = CombinerSpec::new(CombinerKind::Egd);
        s.clamp_eps = 0.0;
        assert!(s.validate().is_err());
        let mut s = CombinerSpec::new(CombinerKind::KstepEgd);
        s.k = 0;
        assert!(s.validate().is_err());
    }
}

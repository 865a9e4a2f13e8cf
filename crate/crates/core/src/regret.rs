//! Regret accounting over a ledger of per-round expert losses and weights.
//!
//! Rounds are 1-based in every public signature, so `interval_regret(l, r)`
//! covers rounds `l..=r`.

use serde::{Deserialize, Serialize};

use crate::ensemble::SIMPLEX_TOL;
use crate::error::{Error, Result};
use crate::numerics::Matrix;

/// Per-round scalar losses `ℓ_{t,i}` and the weights `w_t` that were used.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LossLedger {
    losses: Vec<Vec<f64>>,
    weights: Vec<Vec<f64>>,
}

impl LossLedger {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds and validates a ledger in one go.
    pub fn from_rounds(losses: Vec<Vec<f64>>, weights: Vec<Vec<f64>>) -> Result<Self> {
        if losses.len() != weights.len() {
            return Err(Error::shape(
                "loss ledger",
                format!("{} weight rows", losses.len()),
                format!("{}", weights.len()),
            ));
        }
        let mut out = Self::new();
        for (l, w) in losses.into_iter().zip(weights) {
            out.record(w, l)?;
        }
        Ok(out)
    }

    /// Appends one round.
    pub fn record(&mut self, weights: Vec<f64>, losses: Vec<f64>) -> Result<()> {
        if weights.len() != losses.len() || weights.is_empty() {
            return Err(Error::shape(
                "loss ledger round",
                format!("{} weights", losses.len()),
                format!("{}", weights.len()),
            ));
        }
        if let Some(d) = self.losses.first().map(Vec::len) {
            if d != losses.len() {
                return Err(Error::shape("loss ledger round", format!("{d} experts"), format!("{}", losses.len())));
            }
        }
        if losses.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "round {}: losses must be finite and >= 0: {losses:?}",
                self.len() + 1
            )));
        }
        let s: f64 = weights.iter().sum();
        if weights.iter().any(|v| !(*v >= 0.0)) || (s - 1.0).abs() > SIMPLEX_TOL {
            return Err(Error::InvalidArgument(format!(
                "round {}: weights off the simplex: {weights:?}",
                self.len() + 1
            )));
        }
        self.losses.push(losses);
        self.weights.push(weights);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.losses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.losses.is_empty()
    }

    pub fn n_experts(&self) -> usize {
        self.losses.first().map_or(0, Vec::len)
    }

    pub fn losses(&self) -> &[Vec<f64>] {
        &self.losses
    }

    pub fn weights(&self) -> &[Vec<f64>] {
        &self.weights
    }

    /// `⟨w_t, ℓ_t⟩` per round.
    pub fn combiner_losses(&self) -> Vec<f64> {
        self.losses
            .iter()
            .zip(&self.weights)
            .map(|(l, w)| l.iter().zip(w).map(|(a, b)| a * b).sum())
            .collect()
    }

    fn require_rounds(&self) -> Result<()> {
        if self.is_empty() {
            Err(Error::EmptyLedger)
        } else {
            Ok(())
        }
    }
}

fn window_regret(ledger: &LossLedger, lo: usize, hi: usize) -> f64 {
    let d = ledger.n_experts();
    let mut mixed = 0.0;
    let mut cum = vec![0.0; d];
    for t in lo..hi {
        let (l, w) = (&ledger.losses[t], &ledger.weights[t]);
        for i in 0..d {
            mixed += w[i] * l[i];
            cum[i] += l[i];
        }
    }
    mixed - cum.into_iter().fold(f64::INFINITY, f64::min)
}

/// `Σ_t ⟨w_t, ℓ_t⟩ − min_i Σ_t ℓ_{t,i}`.
pub fn external_regret(ledger: &LossLedger) -> Result<f64> {
    ledger.require_rounds()?;
    Ok(window_regret(ledger, 0, ledger.len()))
}

/// External regret after each prefix of rounds.
pub fn external_regret_curve(ledger: &LossLedger) -> Result<Vec<f64>> {
    ledger.require_rounds()?;
    let d = ledger.n_experts();
    let mut mixed = 0.0;
    let mut cum = vec![0.0; d];
    Ok((0..ledger.len())
        .map(|t| {
            let (l, w) = (&ledger.losses[t], &ledger.weights[t]);
            for i in 0..d {
                mixed += w[i] * l[i];
                cum[i] += l[i];
            }
            mixed - cum.iter().copied().fold(f64::INFINITY, f64::min)
        })
        .collect())
}

/// `√(2 T ln d)`; requires `T > 2 ln d`.
pub fn external_bound(t: usize, d: usize) -> Result<f64> {
    if d == 0 {
        return Err(Error::InvalidArgument("external bound needs d >= 1".into()));
    }
    let ln_d = (d as f64).ln();
    if !(t as f64 > 2.0 * ln_d) {
        return Err(Error::InvalidArgument(format!(
            "external bound needs T > 2 ln d (T={t}, d={d})"
        )));
    }
    Ok((2.0 * t as f64 * ln_d).sqrt())
}

/// The step size `√(2 ln d / T)` that attains [`external_bound`].
pub fn tuned_eta(t: usize, d: usize) -> f64 {
    (2.0 * (d as f64).ln() / t as f64).sqrt()
}

/// Entry `(i, j)`: `Σ_t w_{t,i}(ℓ_{t,i} − ℓ_{t,j})`, the gain from moving all
/// weight on `i` to `j`. The diagonal is zero.
pub fn internal_regret_matrix(ledger: &LossLedger) -> Result<Matrix> {
    ledger.require_rounds()?;
    let d = ledger.n_experts();
    if d < 2 {
        return Err(Error::InvalidArgument("internal regret needs d >= 2".into()));
    }
    let mut r = Matrix::zeros(d, d);
    for (l, w) in ledger.losses.iter().zip(&ledger.weights) {
        for i in 0..d {
            for j in 0..d {
                if i != j {
                    let v = r.get(i, j) + w[i] * (l[i] - l[j]);
                    r.set(i, j, v);
                }
            }
        }
    }
    Ok(r)
}

/// `max_{i,j} Σ_t w_{t,i}(ℓ_{t,i} − ℓ_{t,j})`.
///
/// The maximum ranges over all ordered pairs, the zero diagonal included, so
/// the value is never negative.
pub fn internal_regret(ledger: &LossLedger) -> Result<f64> {
    let r = internal_regret_matrix(ledger)?;
    Ok(r.data().iter().copied().fold(0.0, f64::max))
}

/// Internal regret after each prefix of rounds.
pub fn internal_regret_curve(ledger: &LossLedger) -> Result<Vec<f64>> {
    ledger.require_rounds()?;
    let d = ledger.n_experts();
    if d < 2 {
        return Err(Error::InvalidArgument("internal regret needs d >= 2".into()));
    }
    let mut r = vec![0.0; d * d];
    Ok((0..ledger.len())
        .map(|t| {
            let (l, w) = (&ledger.losses[t], &ledger.weights[t]);
            let mut best = 0.0f64;
            for i in 0..d {
                for j in 0..d {
                    if i != j {
                        r[i * d + j] += w[i] * (l[i] - l[j]);
                        best = best.max(r[i * d + j]);
                    }
                }
            }
            best
        })
        .collect())
}

/// `2√(T ln(d(d−1)))`.
pub fn internal_bound(t: usize, d: usize) -> Result<f64> {
    if d < 2 {
        return Err(Error::InvalidArgument("internal bound needs d >= 2".into()));
    }
    let df = d as f64;
    Ok(2.0 * (t as f64 * (df * (df - 1.0)).ln()).sqrt())
}

/// External regret restricted to rounds `l..=r` (1-based).
pub fn interval_regret(ledger: &LossLedger, l: usize, r: usize) -> Result<f64> {
    ledger.require_rounds()?;
    if l < 1 || l > r || r > ledger.len() {
        return Err(Error::InvalidArgument(format!(
            "interval [{l}, {r}] outside rounds [1, {}]",
            ledger.len()
        )));
    }
    Ok(window_regret(ledger, l - 1, r))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntervalRegret {
    pub l: usize,
    pub r: usize,
    pub regret: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegretReport {
    pub rounds: usize,
    pub n_experts: usize,
    pub external_regret: f64,
    /// Absent when `T ≤ 2 ln d`.
    pub external_bound: Option<f64>,
    /// Absent when `d < 2`.
    pub internal_regret: Option<f64>,
    pub internal_bound: Option<f64>,
    pub per_interval: Vec<IntervalRegret>,
}

impl RegretReport {
    pub fn from_ledger(ledger: &LossLedger, intervals: &[(usize, usize)]) -> Result<Self> {
        let t = ledger.len();
        let d = ledger.n_experts();
        let per_interval = intervals
            .iter()
            .map(|&(l, r)| {
                Ok(IntervalRegret {
                    l,
                    r,
                    regret: interval_regret(ledger, l, r)?,
                })
            })
            .collect::<Result<_>>()?;
        Ok(Self {
            rounds: t,
            n_experts: d,
            external_regret: external_regret(ledger)?,
            external_bound: external_bound(t, d).ok(),
            internal_regret: (d >= 2).then(|| internal_regret(ledger)).transpose()?,
            internal_bound: internal_bound(t, d).ok(),
            per_interval,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn constant(t: usize, w: &[f64], l: &[f64]) -> LossLedger {
        LossLedger::from_rounds(vec![l.to_vec(); t], vec![w.to_vec(); t]).unwrap()
    }

    #[test]
    fn single_expert_has_no_external_regret() {
        assert_eq!(external_regret(&constant(5, &[1.0], &[0.3])).unwrap(), 0.0);
    }

    #[test]
    fn weight_on_best_expert_has_no_external_regret() {
        assert_eq!(external_regret(&constant(7, &[1.0, 0.0], &[0.1, 0.9])).unwrap(), 0.0);
    }

    #[test]
    fn uniform_over_zero_and_one_losses() {
        assert_abs_diff_eq!(external_regret(&constant(10, &[0.5, 0.5], &[0.0, 1.0])).unwrap(), 5.0);
    }

    #[test]
    fn empty_ledger_is_an_error() {
        assert!(matches!(external_regret(&LossLedger::new()), Err(Error::EmptyLedger)));
        assert!(matches!(internal_regret(&LossLedger::new()), Err(Error::EmptyLedger)));
    }

    #[test]
    fn external_bound_values() {
        assert_eq!(external_bound(10, 1).unwrap(), 0.0);
        assert_abs_diff_eq!(external_bound(1000, 4).unwrap(), 52.655, epsilon = 1e-3);
        let t = (2.0 * 2f64.ln() * 1e4) as usize;
        assert_abs_diff_eq!(external_bound(t, 2).unwrap(), (2.0 * t as f64 * 2f64.ln()).sqrt());
        assert!(external_bound(1, 2).is_err());
    }

    #[test]
    fn internal_regret_cases() {
        assert_eq!(internal_regret(&constant(4, &[0.3, 0.7], &[0.5, 0.5])).unwrap(), 0.0);
        assert_abs_diff_eq!(internal_regret(&constant(10, &[1.0, 0.0], &[1.0, 0.0])).unwrap(), 10.0);
        assert!(internal_regret(&constant(3, &[1.0], &[1.0])).is_err());
    }

    #[test]
    fn internal_bound_values() {
        assert_abs_diff_eq!(internal_bound(100, 2).unwrap(), 16.651, epsilon = 1e-3);
        assert_eq!(internal_bound(0, 3).unwrap(), 0.0);
        assert!(internal_bound(10, 1).is_err());
    }

    #[test]
    fn interval_bounds_are_checked() {
        let g = constant(5, &[0.5, 0.5], &[0.0, 1.0]);
        assert!(interval_regret(&g, 0, 2).is_err());
        assert!(interval_regret(&g, 3, 2).is_err());
        assert!(interval_regret(&g, 1, 6).is_err());
        assert_eq!(interval_regret(&g, 1, 5).unwrap(), external_regret(&g).unwrap());
    }

    #[test]
    fn interval_on_best_expert_is_zero() {
        let g = LossLedger::from_rounds(vec![vec![0.2, 0.9], vec![0.8, 0.1]], vec![vec![0.5, 0.5], vec![0.0, 1.0]])
            .unwrap();
        assert_eq!(interval_regret(&g, 2, 2).unwrap(), 0.0);
    }

    #[test]
    fn ledger_rejects_bad_rounds() {
        let mut g = LossLedger::new();
        assert!(g.record(vec![0.6, 0.6], vec![0.0, 0.0]).is_err());
        assert!(g.record(vec![0.5, 0.5], vec![-1.0, 0.0]).is_err());
        assert!(g.record(vec![0.5, 0.5], vec![0.0]).is_err());
        g.record(vec![0.5, 0.5], vec![0.0, 1.0]).unwrap();
        assert!(g.record(vec![1.0], vec![0.0]).is_err());
    }

    #[test]
    fn curves_end_at_final_values() {
        let g = LossLedger::from_rounds(
            vec![vec![0.2, 0.9, 0.4], vec![0.8, 0.1, 0.3], vec![0.5, 0.5, 0.0]],
            vec![vec![0.2, 0.3, 0.5], vec![0.6, 0.2, 0.2], vec![1.0 / 3.0; 3]],
        )
        .unwrap();
        assert_eq!(*external_regret_curve(&g).unwrap().last().unwrap(), external_regret(&g).unwrap());
        assert_eq!(*internal_regret_curve(&g).unwrap().last().unwrap(), internal_regret(&g).unwrap());
        let rep = RegretReport::from_ledger(&g, &[(1, 2)]).unwrap();
        assert_eq!(rep.external_bound, external_bound(3, 3).ok());
        assert_eq!(rep.per_interval[0].regret, interval_regret(&g, 1, 2).unwrap());
    }
}

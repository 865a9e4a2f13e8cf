//! Datasets: ETT-style CSV files and seeded synthetic drift streams.

use std::path::Path;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forecasters::SeriesWindow;
use crate::numerics::{component_rng, Matrix};

/// A multivariate series, one row per variable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub name: String,
    /// `M×T_total`.
    pub values: Matrix,
    pub variable_names: Vec<String>,
    pub timestamps: Option<Vec<String>>,
    /// Rows dropped by [`BadRowPolicy::Skip`].
    pub rejected_rows: usize,
}

impl Dataset {
    pub fn n_vars(&self) -> usize {
        self.values.rows()
    }

    pub fn len(&self) -> usize {
        self.values.cols()
    }

    pub fn is_empty(&self) -> bool {
        self.values.cols() == 0
    }

    /// Writes the dataset in the layout read by [`load_csv`].
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let io = |e: csv::Error| Error::Io {
            path: path.to_path_buf(),
            source: e.into(),
        };
        let mut w = csv::Writer::from_path(path).map_err(io)?;
        let mut header = vec!["date".to_string()];
        header.extend(self.variable_names.iter().cloned());
        w.write_record(&header).map_err(io)?;
        for t in 0..self.len() {
            let stamp = match &self.timestamps {
                Some(ts) => ts[t].clone(),
                None => t.to_string(),
            };
            let mut rec = vec![stamp];
            rec.extend((0..self.n_vars()).map(|j| format!("{:?}", self.values.get(j, t))));
            w.write_record(&rec).map_err(io)?;
        }
        w.flush().map_err(|e| Error::Io {
            path: path.to_path_buf(),
            source: e,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BadRowPolicy {
    /// Fail on the first unparseable row.
    #[default]
    Error,
    /// Drop unparseable rows and count them.
    Skip,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LoadOptions {
    pub bad_rows: BadRowPolicy,
    /// Keep only these columns, in this order.
    pub columns: Option<Vec<String>>,
}

/// Reads a CSV whose first column is a timestamp and whose remaining columns are numeric.
pub fn load_csv(path: &Path, opts: &LoadOptions) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_path(path)
        .map_err(|e| Error::Io {
            path: path.to_path_buf(),
            source: e.into(),
        })?;
    let malformed = |reason: String| Error::MalformedHeader {
        path: path.to_path_buf(),
        reason,
    };
    let header = rdr.headers().map_err(|e| malformed(e.to_string()))?.clone();
    if header.len() < 2 {
        return Err(malformed(format!(
            "need a timestamp column and at least one variable, found {} column(s)",
            header.len()
        )));
    }
    let names: Vec<String> = header.iter().skip(1).map(|s| s.trim().to_string()).collect();
    if let Some(empty) = names.iter().position(String::is_empty) {
        return Err(malformed(format!("column {} has an empty name", empty + 2)));
    }
    let selected: Vec<usize> = match &opts.columns {
        None => (0..names.len()).collect(),
        Some(cols) => cols
            .iter()
            .map(|c| {
                names
                    .iter()
                    .position(|n| n == c)
                    .ok_or_else(|| malformed(format!("no column named {c:?}")))
            })
            .collect::<Result<_>>()?,
    };

    let mut stamps = Vec::new();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut rejected = 0usize;
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::BadRow {
            path: path.to_path_buf(),
            line: e.position().map_or(0, |p| p.line()),
            reason: e.to_string(),
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        let parsed = parse_row(path, line, &rec, &names, &selected);
        match (parsed, opts.bad_rows) {
            (Ok(vals), _) => {
                stamps.push(rec[0].to_string());
                rows.push(vals);
            }
            (Err(_), BadRowPolicy::Skip) => rejected += 1,
            (Err(e), BadRowPolicy::Error) => return Err(e),
        }
    }
    if rows.is_empty() {
        return Err(Error::BadRow {
            path: path.to_path_buf(),
            line: 1,
            reason: format!("no data rows ({rejected} rejected)"),
        });
    }
    let m = selected.len();
    let t = rows.len();
    let mut values = Matrix::zeros(m, t);
    for (ti, row) in rows.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            values.set(j, ti, *v);
        }
    }
    Ok(Dataset {
        name: path
            .file_stem()
            .map_or_else(|| "dataset".into(), |s| s.to_string_lossy().into_owned()),
        values,
        variable_names: selected.iter().map(|&i| names[i].clone()).collect(),
        timestamps: Some(stamps),
        rejected_rows: rejected,
    })
}

fn parse_row(
    path: &Path,
    line: u64,
    rec: &csv::StringRecord,
    names: &[String],
    selected: &[usize],
) -> Result<Vec<f64>> {
    if rec.len() != names.len() + 1 {
        return Err(Error::BadRow {
            path: path.to_path_buf(),
            line,
            reason: format!("expected {} fields, found {}", names.len() + 1, rec.len()),
        });
    }
    selected
        .iter()
        .map(|&i| {
            let cell = rec[i + 1].trim();
            match cell.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                _ => Err(Error::BadCell {
                    path: path.to_path_buf(),
                    line,
                    column: i + 2,
                    name: names[i].clone(),
                    value: cell.to_string(),
                }),
            }
        })
        .collect()
}

/// Two constant experts and a target that flips from 0 to 1 after `boundary`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SwitchScenario {
    pub rounds: usize,
    pub boundary: usize,
    /// Constant output of expert A.
    pub pred_a: f64,
    /// Constant output of expert B.
    pub pred_b: f64,
    /// `y_t` for `t = 1..=rounds`.
    pub target: Vec<f64>,
}

pub fn gen_switch(rounds: usize, boundary: usize) -> Result<SwitchScenario> {
    if !(0 < boundary && boundary < rounds) {
        return Err(Error::InvalidArgument(format!(
            "switch boundary must lie in (0, {rounds}), got {boundary}"
        )));
    }
    Ok(SwitchScenario {
        rounds,
        boundary,
        pred_a: 0.0,
        pred_b: 1.0,
        target: (1..=rounds).map(|t| if t <= boundary { 0.0 } else { 1.0 }).collect(),
    })
}

impl SwitchScenario {
    /// Squared losses `(ℓ_A, ℓ_B)` at round `t` (1-based).
    pub fn losses(&self, t: usize) -> [f64; 2] {
        let y = self.target[t - 1];
        [(self.pred_a - y).powi(2), (self.pred_b - y).powi(2)]
    }

    /// One window per round; the look-back is all zeros and `y` is the
    /// target repeated over the horizon.
    pub fn windows(&self, lookback: usize, horizon: usize) -> Vec<SeriesWindow> {
        self.target
            .iter()
            .enumerate()
            .map(|(t, &y)| SeriesWindow {
                x: Matrix::zeros(1, lookback),
                y: Matrix::filled(1, horizon, y),
                t: t + 1,
            })
            .collect()
    }

    pub fn dataset(&self) -> Dataset {
        Dataset {
            name: "switch".into(),
            values: Matrix::new(1, self.rounds, self.target.clone()).expect("length matches"),
            variable_names: vec!["y".into()],
            timestamps: None,
            rejected_rows: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    #[default]
    SwitchExperts,
    PiecewiseAr,
    SineRegime,
}

/// One AR regime: own-lag coefficients shared by every variable plus a
/// coupling to the previous value of the next variable (cyclically).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArRegime {
    pub coefficients: Vec<f64>,
    #[serde(default)]
    pub coupling: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SineParams {
    pub frequency: f64,
    #[serde(default)]
    pub phase: f64,
    #[serde(default = "one")]
    pub amplitude: f64,
    /// Extra phase per variable index.
    #[serde(default)]
    pub phase_step: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSpec {
    pub scenario: Scenario,
    pub t_total: usize,
    pub n_vars: usize,
    /// Regime `r` covers `b_{r−1} < t ≤ b_r`; regimes repeat cyclically.
    pub boundaries: Vec<usize>,
    pub noise_sigma: f64,
    pub seed: u64,
    pub ar_regimes: Vec<ArRegime>,
    pub sine_regimes: Vec<SineParams>,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            scenario: Scenario::SwitchExperts,
            t_total: 100,
            n_vars: 1,
            boundaries: vec![50],
            noise_sigma: 0.1,
            seed: 0,
            ar_regimes: vec![
                ArRegime {
                    coefficients: vec![0.9],
                    coupling: 0.0,
                },
                ArRegime {
                    coefficients: vec![0.0],
                    coupling: 0.95,
                },
            ],
            sine_regimes: vec![
                SineParams {
                    frequency: 1.0 / 24.0,
                    phase: 0.0,
                    amplitude: 1.0,
                    phase_step: 0.5,
                },
                SineParams {
                    frequency: 1.0 / 12.0,
                    phase: 1.0,
                    amplitude: 1.0,
                    phase_step: 0.5,
                },
            ],
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if self.t_total == 0 || self.n_vars == 0 {
            return Err(Error::InvalidArgument("t_total and n_vars must be >= 1".into()));
        }
        let mut prev = 0;
        for &b in &self.boundaries {
            if b <= prev || b > self.t_total {
                return Err(Error::InvalidArgument(format!(
                    "boundaries must be strictly increasing within [1, {}]: {:?}",
                    self.t_total, self.boundaries
                )));
            }
            prev = b;
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(Error::InvalidArgument("noise_sigma must be >= 0".into()));
        }
        Ok(())
    }

    /// Regime index of round `t` (1-based) before cycling.
    pub fn regime_of(&self, t: usize) -> usize {
        self.boundaries.iter().take_while(|&&b| t > b).count()
    }

    pub fn generate(&self) -> Result<Dataset> {
        match self.scenario {
            Scenario::SwitchExperts => {
                let b = self.boundaries.first().copied().unwrap_or(self.t_total / 2);
                Ok(gen_switch(self.t_total, b)?.dataset())
            }
            Scenario::PiecewiseAr => gen_piecewise_ar(self),
            Scenario::SineRegime => gen_sine_regime(self),
        }
    }
}

/// Companion matrix of `x_t = Σ_k a_k x_{t−k} + c·P x_{t−1}`, `P` the cyclic shift.
fn companion(regime: &ArRegime, m: usize) -> DMatrix<f64> {
    let p = regime.coefficients.len().max(1);
    let n = m * p;
    let mut a = DMatrix::zeros(n, n);
    for (k, &ak) in regime.coefficients.iter().enumerate() {
        for j in 0..m {
            a[(j, k * m + j)] += ak;
        }
    }
    if m > 1 {
        for j in 0..m {
            a[(j, (j + 1) % m)] += regime.coupling;
        }
    } else {
        a[(0, 0)] += regime.coupling;
    }
    for r in m..n {
        a[(r, r - m)] = 1.0;
    }
    a
}

/// Largest eigenvalue modulus of the regime's companion matrix.
pub fn spectral_radius(regime: &ArRegime, n_vars: usize) -> f64 {
    let a = companion(regime, n_vars);
    match a.clone().try_schur(1e-13, 10_000) {
        Some(s) => s.complex_eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max),
        // Schur iteration can stall on scaled permutations; fall back to ‖A^k‖^{1/k}.
        None => gelfand_radius(a),
    }
}

fn gelfand_radius(a: DMatrix<f64>) -> f64 {
    let mut p = a;
    let mut log_scale = 0.0;
    let mut k = 1.0;
    for _ in 0..24 {
        p = &p * &p;
        k *= 2.0;
        let n = p.norm();
        if n == 0.0 {
            return 0.0;
        }
        p /= n;
        log_scale = 2.0 * log_scale + n.ln();
    }
    (log_scale / k).exp()
}

const BURN_IN: usize = 200;

/// Vector AR series switching coefficient sets at the regime boundaries.
pub fn gen_piecewise_ar(spec: &SynthSpec) -> Result<Dataset> {
    spec.validate()?;
    if spec.ar_regimes.is_empty() {
        return Err(Error::InvalidArgument("piecewise-ar needs at least one regime".into()));
    }
    let m = spec.n_vars;
    for (r, reg) in spec.ar_regimes.iter().enumerate() {
        if reg.coefficients.is_empty() {
            return Err(Error::InvalidArgument(format!("AR regime {r} has no coefficients")));
        }
        let rho = spectral_radius(reg, m);
        if !(rho < 1.0 - 1e-9) {
            return Err(Error::InvalidArgument(format!(
                "AR regime {r} is not stable: spectral radius {rho:.6} >= 1"
            )));
        }
    }
    let p = spec.ar_regimes.iter().map(|r| r.coefficients.len()).max().unwrap_or(1);
    let mut rng = component_rng(spec.seed, 0xA5);
    let noise = Normal::new(0.0, 1.0).expect("unit normal");
    let total = BURN_IN + spec.t_total;
    let mut hist: Vec<Vec<f64>> = vec![vec![0.0; m]; p];
    let mut values = Matrix::zeros(m, spec.t_total);
    for step in 0..total {
        let t = step.saturating_sub(BURN_IN) + 1;
        let reg = &spec.ar_regimes[spec.regime_of(t) % spec.ar_regimes.len()];
        let prev = &hist[hist.len() - 1];
        let mut x = vec![0.0; m];
        for (j, xj) in x.iter_mut().enumerate() {
            let mut v = 0.0;
            for (k, ak) in reg.coefficients.iter().enumerate() {
                v += ak * hist[hist.len() - 1 - k][j];
            }
            v += reg.coupling * prev[(j + 1) % m];
            v += spec.noise_sigma * noise.sample(&mut rng);
            *xj = v;
        }
        if step >= BURN_IN {
            for (j, v) in x.iter().enumerate() {
                values.set(j, t - 1, *v);
            }
        }
        hist.remove(0);
        hist.push(x);
    }
    Ok(Dataset {
        name: "piecewise-ar".into(),
        values,
        variable_names: (0..m).map(|j| format!("x{j}")).collect(),
        timestamps: None,
        rejected_rows: 0,
    })
}

/// `A sin(2π f t + φ + j·φ_step)` per variable, switching parameters at the boundaries.
pub fn gen_sine_regime(spec: &SynthSpec) -> Result<Dataset> {
    spec.validate()?;
    if spec.sine_regimes.is_empty() {
        return Err(Error::InvalidArgument("sine-regime needs at least one regime".into()));
    }
    let mut rng = component_rng(spec.seed, 0x51);
    let noise = Normal::new(0.0, 1.0).expect("unit normal");
    let m = spec.n_vars;
    let mut values = Matrix::zeros(m, spec.t_total);
    for t in 1..=spec.t_total {
        let s = &spec.sine_regimes[spec.regime_of(t) % spec.sine_regimes.len()];
        for j in 0..m {
            let arg = 2.0 * std::f64::consts::PI * s.frequency * t as f64 + s.phase + j as f64 * s.phase_step;
            let mut v = s.amplitude * arg.sin();
            if spec.noise_sigma > 0.0 {
                v += spec.noise_sigma * noise.sample(&mut rng);
            }
            values.set(j, t - 1, v);
        }
    }
    Ok(Dataset {
        name: "sine-regime".into(),
        values,
        variable_names: (0..m).map(|j| format!("s{j}")).collect(),
        timestamps: None,
        rejected_rows: 0,
    })
}

/// Uniform noise helper for fuzzing streams.
pub fn gen_uniform_noise<R: Rng + ?Sized>(n_vars: usize, len: usize, rng: &mut R) -> Dataset {
    Dataset {
        name: "noise".into(),
        values: Matrix::uniform(n_vars, len, 1.0, rng),
        variable_names: (0..n_vars).map(|j| format!("u{j}")).collect(),
        timestamps: None,
        rejected_rows: 0,
    }
}

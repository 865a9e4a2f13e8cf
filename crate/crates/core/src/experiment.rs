//! Experiment plumbing: TOML configs, grids over seeds and horizons, JSON
//! run reports, long-format plot data and side-by-side comparisons.
//!
//! A config names a dataset (CSV file or synthetic generator), the stream
//! settings, a list of experts and a combiner. [`run_grid`] expands the
//! `seeds × horizons × combiners` grid, runs every cell in parallel with its
//! own seeded state, and writes one [`CellReport`] per cell plus a
//! [`Summary`].

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{gen_switch, load_csv, LoadOptions, Scenario, SynthSpec};
use crate::ensemble::{CombinerKind, CombinerSpec};
use crate::error::{Error, Result};
use crate::forecasters::{Dims, Forecaster, ForecasterSpec};
use crate::numerics::{component_rng, Matrix};
use crate::regret::{external_regret_curve, internal_regret_curve};
use crate::stream::{pretrain, run_online, run_online_delayed, split_and_normalize, RunReport, StreamConfig};

/// Where the series comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "kebab-case")]
pub enum DatasetSource {
    Csv(CsvSource),
    Synth(SynthSpec),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CsvSource {
    pub path: PathBuf,
    #[serde(default)]
    pub options: LoadOptions,
}

/// Optional grid axes. Empty lists fall back to the base config.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSpec {
    pub horizons: Vec<usize>,
    pub combiners: Vec<CombinerKind>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dataset: DatasetSource,
    #[serde(default)]
    pub stream: StreamConfig,
    pub forecasters: Vec<ForecasterSpec>,
    #[serde(default)]
    pub combiner: CombinerSpec,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub grid: GridSpec,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
}

fn default_seeds() -> Vec<u64> {
    vec![0]
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

impl ExperimentConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads and validates a config file. Relative CSV paths resolve against
    /// the config's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut cfg = Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            e => e,
        })?;
        if let DatasetSource::Csv(c) = &mut cfg.dataset {
            if c.path.is_relative() {
                if let Some(dir) = path.parent() {
                    c.path = dir.join(&c.path);
                }
            }
        }
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Checks everything that can be checked without touching data.
    /// Failures are reported as [`Error::Config`].
    pub fn validate(&self) -> Result<()> {
        let cfg = |e: Error| match e {
            Error::Config(m) => Error::Config(m),
            e => Error::Config(e.to_string()),
        };
        if self.forecasters.is_empty() {
            return Err(Error::Config("at least one forecaster is required".into()));
        }
        if self.seeds.is_empty() {
            return Err(Error::Config("at least one seed is required".into()));
        }
        self.stream.validate().map_err(cfg)?;
        self.combiner.validate().map_err(cfg)?;
        for f in &self.forecasters {
            f.validate().map_err(cfg)?;
        }
        if self.grid.horizons.contains(&0) {
            return Err(Error::Config("grid horizons must be >= 1".into()));
        }
        if let DatasetSource::Synth(s) = &self.dataset {
            s.validate().map_err(cfg)?;
        }
        Ok(())
    }

    /// Every grid cell in a fixed order: combiner, horizon, seed.
    pub fn cells(&self) -> Vec<Cell> {
        let horizons = if self.grid.horizons.is_empty() {
            vec![self.stream.horizon]
        } else {
            self.grid.horizons.clone()
        };
        let combiners = if self.grid.combiners.is_empty() {
            vec![self.combiner.kind]
        } else {
            self.grid.combiners.clone()
        };
        let mut out = Vec::new();
        for &combiner in &combiners {
            for &horizon in &horizons {
                for &seed in &self.seeds {
                    out.push(Cell { seed, horizon, combiner });
                }
            }
        }
        out
    }
}

/// One point of the experiment grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cell {
    pub seed: u64,
    pub horizon: usize,
    pub combiner: CombinerKind,
}

impl Cell {
    pub fn file_name(&self) -> String {
        format!("report_{}_h{}_s{}.json", self.combiner.name(), self.horizon, self.seed)
    }
}

/// Report file for one grid cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellReport {
    pub config: ExperimentConfig,
    pub cell: Cell,
    pub seed: u64,
    pub wall_time_secs: f64,
    pub run: RunReport,
}

impl CellReport {
    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Report(e.to_string()))
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Report(e.to_string()))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_file(path, &self.to_json()?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text).map_err(|e| Error::Report(format!("{}: {e}", path.display())))
    }
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|source| Error::Io {
            path: dir.to_path_buf(),
            source,
        })?;
    }
    std::fs::write(path, contents).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Loaded data, ready to be windowed per horizon.
#[derive(Debug, Clone)]
pub enum Prepared {
    Series { values: Matrix, warnings: Vec<String> },
    /// Constant-expert switch stream: windows are used as-is, unnormalized.
    Switch { rounds: usize, boundary: usize },
}

pub fn prepare(cfg: &ExperimentConfig) -> Result<Prepared> {
    match &cfg.dataset {
        DatasetSource::Csv(c) => {
            let ds = load_csv(&c.path, &c.options)?;
            let mut warnings = Vec::new();
            if ds.rejected_rows > 0 {
                warnings.push(format!("{} malformed rows skipped", ds.rejected_rows));
            }
            Ok(Prepared::Series { values: ds.values, warnings })
        }
        DatasetSource::Synth(s) if s.scenario == Scenario::SwitchExperts => {
            let boundary = s.boundaries.first().copied().unwrap_or(s.t_total / 2);
            gen_switch(s.t_total, boundary)?;
            Ok(Prepared::Switch { rounds: s.t_total, boundary })
        }
        DatasetSource::Synth(s) => Ok(Prepared::Series {
            values: s.generate()?.values,
            warnings: Vec::new(),
        }),
    }
}

/// Runs one cell. Expert `i` is seeded from `(seed, 100 + i)`, the combiner
/// from `(seed, 1)`.
pub fn run_cell(cfg: &ExperimentConfig, data: &Prepared, cell: Cell) -> Result<CellReport> {
    let start = Instant::now();
    let mut stream_cfg = cfg.stream.clone();
    stream_cfg.horizon = cell.horizon;
    stream_cfg.seed = cell.seed;
    let mut combiner_spec = cfg.combiner.clone();
    combiner_spec.kind = cell.combiner;

    let build = |m: usize| -> Result<(Dims, Vec<Forecaster>)> {
        let dims = Dims::new(m, stream_cfg.lookback, stream_cfg.horizon)?;
        let experts = cfg
            .forecasters
            .iter()
            .enumerate()
            .map(|(i, f)| Forecaster::new(f.clone(), dims, &mut component_rng(cell.seed, 100 + i as u64)))
            .collect::<Result<Vec<_>>>()?;
        Ok((dims, experts))
    };
    let run = |experts: &mut [Forecaster], dims: Dims, windows: &dyn RoundsDyn| -> Result<RunReport> {
        let mut combiner = combiner_spec.build(dims, experts.len(), &mut component_rng(cell.seed, 1))?;
        windows.run(experts, combiner.as_mut(), &stream_cfg)
    };

    let report = match data {
        Prepared::Switch { rounds, boundary } => {
            let sc = gen_switch(*rounds, *boundary)?;
            let windows = sc.windows(stream_cfg.lookback, stream_cfg.horizon);
            let (dims, mut experts) = build(1)?;
            run(&mut experts, dims, &windows)?
        }
        Prepared::Series { values, warnings } => {
            let split = split_and_normalize(values, &stream_cfg)?;
            let (dims, mut experts) = build(values.rows())?;
            if stream_cfg.warmup_pretrain {
                pretrain(&mut experts, &split.warmup)?;
            }
            let mut rep = run(&mut experts, dims, &split.online)?;
            rep.warnings.extend(warnings.iter().cloned());
            rep.warnings.extend(split.warnings.iter().cloned());
            rep
        }
    };
    Ok(CellReport {
        config: cfg.clone(),
        cell,
        seed: cell.seed,
        wall_time_secs: start.elapsed().as_secs_f64(),
        run: report,
    })
}

/// Object-safe bridge over the two window containers.
trait RoundsDyn {
    fn run(
        &self,
        experts: &mut [Forecaster],
        combiner: &mut dyn crate::ensemble::Combiner,
        cfg: &StreamConfig,
    ) -> Result<RunReport>;
}

impl<S: crate::stream::Rounds> RoundsDyn for S {
    fn run(
        &self,
        experts: &mut [Forecaster],
        combiner: &mut dyn crate::ensemble::Combiner,
        cfg: &StreamConfig,
    ) -> Result<RunReport> {
        if cfg.delayed_feedback {
            run_online_delayed(experts, combiner, self, cfg)
        } else {
            run_online(experts, combiner, self, cfg)
        }
    }
}

/// Files written by [`run_grid`].
#[derive(Debug, Clone)]
pub struct GridOutput {
    pub reports: Vec<PathBuf>,
    pub summary: PathBuf,
}

/// Runs every cell (in parallel) and writes the reports and `summary.json`
/// into `out_dir`.
pub fn run_grid(cfg: &ExperimentConfig, out_dir: &Path) -> Result<GridOutput> {
    let data = prepare(cfg)?;
    let reports = cfg
        .cells()
        .into_par_iter()
        .map(|cell| run_cell(cfg, &data, cell))
        .collect::<Result<Vec<_>>>()?;
    let mut paths = Vec::with_capacity(reports.len());
    for r in &reports {
        let p = out_dir.join(r.cell.file_name());
        r.save(&p)?;
        paths.push(p);
    }
    let summary = Summary::from_reports(&reports);
    let summary_path = out_dir.join("summary.json");
    write_file(
        &summary_path,
        &serde_json::to_string_pretty(&summary).map_err(|e| Error::Report(e.to_string()))?,
    )?;
    Ok(GridOutput {
        reports: paths,
        summary: summary_path,
    })
}

/// Mean and sample standard deviation over seeds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

impl MeanStd {
    /// `std` uses the `n − 1` denominator and is 0 for a single value.
    pub fn of(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let std = if values.len() > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        Self { mean, std }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub combiner: CombinerKind,
    pub horizon: usize,
    pub seeds: Vec<u64>,
    pub cumulative_mse: MeanStd,
    pub cumulative_mae: MeanStd,
    pub internal_regret: Option<MeanStd>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub rows: Vec<SummaryRow>,
}

impl Summary {
    /// Groups reports by `(combiner, horizon)` in first-seen order.
    pub fn from_reports(reports: &[CellReport]) -> Self {
        let mut groups: Vec<((CombinerKind, usize), Vec<&CellReport>)> = Vec::new();
        for r in reports {
            let key = (r.cell.combiner, r.cell.horizon);
            match groups.iter_mut().find(|(k, _)| *k == key) {
                Some((_, g)) => g.push(r),
                None => groups.push((key, vec![r])),
            }
        }
        let rows = groups
            .into_iter()
            .map(|((combiner, horizon), g)| {
                let col = |f: &dyn Fn(&CellReport) -> f64| MeanStd::of(&g.iter().map(|r| f(r)).collect::<Vec<_>>());
                let ireg: Option<Vec<f64>> = g
                    .iter()
                    .map(|r| r.run.regret.as_ref().and_then(|x| x.internal_regret))
                    .collect();
                SummaryRow {
                    combiner,
                    horizon,
                    seeds: g.iter().map(|r| r.seed).collect(),
                    cumulative_mse: col(&|r| r.run.cumulative_mse),
                    cumulative_mae: col(&|r| r.run.cumulative_mae),
                    internal_regret: ireg.map(|v| MeanStd::of(&v)),
                }
            })
            .collect();
        Self { rows }
    }
}

/// Plot-data series families.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlotKind {
    Weights,
    CumMse,
    Regret,
}

impl PlotKind {
    pub const NAMES: [&'static str; 3] = ["weights", "cum-mse", "regret"];
}

impl std::str::FromStr for PlotKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "weights" => Ok(Self::Weights),
            "cum-mse" => Ok(Self::CumMse),
            "regret" => Ok(Self::Regret),
            _ => Err(Error::InvalidArgument(format!(
                "unknown plot kind {s:?}; expected one of: {}",
                Self::NAMES.join(", ")
            ))),
        }
    }
}

/// One long-format plot row; `round` is 1-based.
#[derive(Debug, Clone, PartialEq)]
pub struct PlotRow {
    pub round: usize,
    pub series: String,
    pub value: f64,
}

/// Builds long-format rows for one report.
///
/// - `weights`: series `var{j}.{i}.{expert}`, the used weight of expert `i` on variable `j`
/// - `cum-mse`: series `combined`, the running mean of the per-round MSE
/// - `regret`: series `external` and `internal` from the variable-averaged ledger
pub fn plotdata(report: &RunReport, kind: PlotKind) -> Result<Vec<PlotRow>> {
    let mut rows = Vec::new();
    match kind {
        PlotKind::Weights => {
            let d = report.experts.len();
            for (t, w) in report.weight_trajectory.iter().enumerate() {
                for j in 0..report.n_vars {
                    for (i, name) in report.experts.iter().enumerate() {
                        rows.push(PlotRow {
                            round: t + 1,
                            series: format!("var{j}.{i}.{name}"),
                            value: w[j * d + i],
                        });
                    }
                }
            }
        }
        PlotKind::CumMse => {
            for (t, v) in crate::stream::running_mean(&report.mse_curve).into_iter().enumerate() {
                rows.push(PlotRow {
                    round: t + 1,
                    series: "combined".into(),
                    value: v,
                });
            }
        }
        PlotKind::Regret => {
            let ledger = report.ledger.as_ref().ok_or_else(|| {
                Error::Report(format!(
                    "combiner {} has off-simplex weights; no regret ledger",
                    report.combiner
                ))
            })?;
            let ext = external_regret_curve(ledger)?;
            let int = if ledger.n_experts() >= 2 {
                internal_regret_curve(ledger)?
            } else {
                Vec::new()
            };
            for (t, v) in ext.into_iter().enumerate() {
                rows.push(PlotRow {
                    round: t + 1,
                    series: "external".into(),
                    value: v,
                });
            }
            for (t, v) in int.into_iter().enumerate() {
                rows.push(PlotRow {
                    round: t + 1,
                    series: "internal".into(),
                    value: v,
                });
            }
        }
    }
    Ok(rows)
}

/// Renders rows as CSV with header `round,series,value`.
pub fn plot_csv(rows: &[PlotRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let err = |e: csv::Error| Error::Report(e.to_string());
    w.write_record(["round", "series", "value"]).map_err(err)?;
    for r in rows {
        w.write_record([r.round.to_string(), r.series.clone(), format!("{:?}", r.value)])
            .map_err(err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Report(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Report(e.to_string()))
}

/// Writes plot data for `report` to `path`.
pub fn emit_plotdata(report: &RunReport, kind: PlotKind, path: &Path) -> Result<()> {
    write_file(path, &plot_csv(&plotdata(report, kind)?)?)
}

/// Comparable scalar metrics.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    CumulativeMse,
    CumulativeMae,
    ExternalRegret,
    InternalRegret,
}

impl Metric {
    pub const ALL: [Metric; 4] = [
        Metric::CumulativeMse,
        Metric::CumulativeMae,
        Metric::ExternalRegret,
        Metric::InternalRegret,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Metric::CumulativeMse => "mse",
            Metric::CumulativeMae => "mae",
            Metric::ExternalRegret => "external-regret",
            Metric::InternalRegret => "internal-regret",
        }
    }

    pub fn of(self, r: &RunReport) -> Option<f64> {
        match self {
            Metric::CumulativeMse => Some(r.cumulative_mse),
            Metric::CumulativeMae => Some(r.cumulative_mae),
            Metric::ExternalRegret => r.regret.as_ref().map(|x| x.external_regret),
            Metric::InternalRegret => r.regret.as_ref().and_then(|x| x.internal_regret),
        }
    }
}

impl std::str::FromStr for Metric {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Self::ALL.into_iter().find(|m| m.name() == s).ok_or_else(|| {
            let names: Vec<_> = Self::ALL.iter().map(|m| m.name()).collect();
            Error::InvalidArgument(format!("unknown metric {s:?}; valid metrics: {}", names.join(", ")))
        })
    }
}

/// Marker attached to a table cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mark {
    None,
    /// Unique minimum of its column.
    Best,
    /// Shares the column minimum with another row.
    Tie,
}

/// Rows are reports, columns are metrics; lower is better in every column.
#[derive(Debug, Clone, PartialEq)]
pub struct CompareTable {
    pub metrics: Vec<Metric>,
    pub labels: Vec<String>,
    pub values: Vec<Vec<Option<f64>>>,
    pub marks: Vec<Vec<Mark>>,
}

/// Tolerance under which two metric values count as a tie.
pub const TIE_TOL: f64 = 1e-12;

/// Builds a comparison. Requires ≥ 2 reports over the same dataset and
/// stream settings (seed and horizon aside, which must also agree).
pub fn compare(reports: &[(String, CellReport)], metrics: &[Metric]) -> Result<CompareTable> {
    if reports.len() < 2 {
        return Err(Error::InvalidArgument("compare needs at least two reports".into()));
    }
    if metrics.is_empty() {
        return Err(Error::InvalidArgument("no metrics selected".into()));
    }
    let key = |r: &CellReport| {
        let mut s = r.config.stream.clone();
        s.seed = 0;
        s.horizon = r.cell.horizon;
        (r.config.dataset.clone(), s, r.run.rounds, r.run.n_vars)
    };
    let base = key(&reports[0].1);
    for (label, r) in &reports[1..] {
        if key(r) != base {
            return Err(Error::InvalidArgument(format!(
                "{label}: dataset or stream settings differ from {}",
                reports[0].0
            )));
        }
    }
    let values: Vec<Vec<Option<f64>>> = reports
        .iter()
        .map(|(_, r)| metrics.iter().map(|m| m.of(&r.run)).collect())
        .collect();
    let mut marks = vec![vec![Mark::None; metrics.len()]; reports.len()];
    for c in 0..metrics.len() {
        let best = values.iter().filter_map(|row| row[c]).fold(f64::INFINITY, f64::min);
        let winners: Vec<usize> = (0..values.len())
            .filter(|&r| values[r][c].is_some_and(|v| (v - best).abs() <= TIE_TOL))
            .collect();
        let mark = if winners.len() > 1 { Mark::Tie } else { Mark::Best };
        for r in winners {
            marks[r][c] = mark;
        }
    }
    Ok(CompareTable {
        metrics: metrics.to_vec(),
        labels: reports.iter().map(|(l, _)| l.clone()).collect(),
        values,
        marks,
    })
}

impl fmt::Display for CompareTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let cell = |v: Option<f64>, m: Mark| {
            let s = v.map_or("n/a".to_string(), |v| format!("{v:.6}"));
            match m {
                Mark::None => format!("{s}  "),
                Mark::Best => format!("{s} *"),
                Mark::Tie => format!("{s} ="),
            }
        };
        let mut grid: Vec<Vec<String>> = vec![std::iter::once("report".to_string())
            .chain(self.metrics.iter().map(|m| m.name().to_string()))
            .collect()];
        for (r, label) in self.labels.iter().enumerate() {
            grid.push(
                std::iter::once(label.clone())
                    .chain((0..self.metrics.len()).map(|c| cell(self.values[r][c], self.marks[r][c])))
                    .collect(),
            );
        }
        let widths: Vec<usize> = (0..grid[0].len())
            .map(|c| grid.iter().map(|row| row[c].chars().count()).max().unwrap_or(0))
            .collect();
        for row in &grid {
            let line: Vec<String> = row
                .iter()
                .enumerate()
                .map(|(c, s)| if c == 0 { format!("{s:<w$}", w = widths[c]) } else { format!("{s:>w$}", w = widths[c]) })
                .collect();
            writeln!(f, "{}", line.join("  ").trim_end())?;
        }
        write!(f, "* best, = tied best")
    }
}

/// Counts of grid cells by combiner, for progress messages.
pub fn cell_counts(cells: &[Cell]) -> BTreeMap<&'static str, usize> {
    let mut m = BTreeMap::new();
    for c in cells {
        *m.entry(c.combiner.name()).or_insert(0) += 1;
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;

    const SWITCH: &str = r#"
seeds = [0, 1]
output_dir = "out"

[dataset]
source = "synth"
scenario = "switch-experts"
t_total = 100
boundaries = [50]

[stream]
lookback = 1
horizon = 1

[[forecasters]]
kind = "constant"
value = 0.0

[[forecasters]]
kind = "constant"
value = 1.0

[combiner]
kind = "egd"
eta = 1.0
"#;

    #[test]
    fn config_parses_and_round_trips() {
        let cfg = ExperimentConfig::from_toml_str(SWITCH).unwrap();
        assert_eq!(cfg.seeds, vec![0, 1]);
        assert_eq!(cfg.combiner.eta, 1.0);
        assert_eq!(cfg.forecasters.len(), 2);
        let again = ExperimentConfig::from_toml_str(&cfg.to_toml_string().unwrap()).unwrap();
        assert_eq!(again, cfg);
    }

    #[test]
    fn config_rejects_unknown_keys_and_empty_lists() {
        let bad = SWITCH.replace("eta = 1.0", "eta = 1.0\netta = 2.0");
        assert!(matches!(ExperimentConfig::from_toml_str(&bad), Err(Error::Config(_))));
        let none = SWITCH.replace("seeds = [0, 1]", "seeds = []");
        assert!(matches!(ExperimentConfig::from_toml_str(&none), Err(Error::Config(_))));
        let bad_eta = SWITCH.replace("eta = 1.0", "eta = -1.0");
        assert!(matches!(ExperimentConfig::from_toml_str(&bad_eta), Err(Error::Config(_))));
    }

    #[test]
    fn switch_cell_rises_early() {
        let cfg = ExperimentConfig::from_toml_str(SWITCH).unwrap();
        let data = prepare(&cfg).unwrap();
        let r = run_cell(&cfg, &data, cfg.cells()[0]).unwrap();
        assert_eq!(r.run.rounds, 100);
        assert!(r.run.weight_trajectory[10][0] > 0.99);
    }

    #[test]
    fn grid_cells_cover_axes() {
        let mut cfg = ExperimentConfig::from_toml_str(SWITCH).unwrap();
        cfg.grid.horizons = vec![1, 2];
        cfg.grid.combiners = vec![CombinerKind::Egd, CombinerKind::Average];
        let cells = cfg.cells();
        assert_eq!(cells.len(), 8);
        assert_eq!(cell_counts(&cells)["egd"], 4);
    }

    #[test]
    fn mean_std_sample() {
        let s = MeanStd::of(&[1.0, 2.0, 3.0]);
        assert_eq!(s.mean, 2.0);
        assert!((s.std - 1.0).abs() < 1e-15);
        assert_eq!(MeanStd::of(&[4.0]).std, 0.0);
    }

    #[test]
    fn unknown_names_list_choices() {
        let e = "cum_mse".parse::<PlotKind>().unwrap_err().to_string();
        assert!(e.contains("cum-mse"));
        let e = "mse2".parse::<Metric>().unwrap_err().to_string();
        assert!(e.contains("mae") && e.contains("internal-regret"));
    }
}

//! Command-line runner: `run`, `plotdata`, `compare`, `synth`.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use onenet::data::{Scenario, SynthSpec};
use onenet::experiment::{compare, emit_plotdata, plot_csv, plotdata, run_grid, CellReport, ExperimentConfig, Metric, PlotKind};
use onenet::Error;

#[derive(Parser)]
#[command(name = "onenet", version, about = "Drift-adaptive online combination of forecasters")]
struct Cli {
    /// Replaces the config's seed list with this single seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory (`run`) or output file (`plotdata`, `compare`, `synth`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Suppress progress messages.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every grid cell of a config and write reports plus summary.json.
    Run {
        #[arg(long)]
        config: PathBuf,
    },
    /// Write long-format plot data (`round,series,value`) from a report.
    Plotdata {
        #[arg(long)]
        report: PathBuf,
        /// One of: weights, cum-mse, regret.
        #[arg(long)]
        kind: String,
    },
    /// Print a table comparing two or more reports.
    Compare {
        #[arg(required = true, num_args = 2..)]
        reports: Vec<PathBuf>,
        /// Metric to show; repeat for several. Defaults to all.
        #[arg(long)]
        metric: Vec<String>,
    },
    /// Write a synthetic dataset to CSV.
    Synth {
        /// TOML file holding a synthetic spec; flags below override it.
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long)]
        scenario: Option<String>,
        #[arg(long)]
        t_total: Option<usize>,
        #[arg(long)]
        n_vars: Option<usize>,
        #[arg(long, value_delimiter = ',')]
        boundaries: Option<Vec<usize>>,
        #[arg(long)]
        noise_sigma: Option<f64>,
    },
}

/// A failure with its exit code: 2 for configuration, 1 for runtime.
struct Failure(u8, String);

fn config_err(e: impl std::fmt::Display) -> Failure {
    Failure(2, e.to_string())
}

fn runtime_err(e: Error) -> Failure {
    Failure(1, e.to_string())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure(code, msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(code)
        }
    }
}

fn write_or_print(out: Option<&PathBuf>, text: &str) -> Result<(), Failure> {
    match out {
        Some(p) => std::fs::write(p, text).map_err(|e| Failure(1, format!("{}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn dispatch(cli: Cli) -> Result<(), Failure> {
    let say = |msg: String| {
        if !cli.quiet {
            eprintln!("{msg}");
        }
    };
    match &cli.command {
        Command::Run { config } => {
            let mut cfg = ExperimentConfig::load(config).map_err(config_err)?;
            if let Some(s) = cli.seed {
                cfg.seeds = vec![s];
            }
            let out_dir = cli.out.clone().unwrap_or_else(|| cfg.output_dir.clone());
            say(format!("running {} cells", cfg.cells().len()));
            let out = run_grid(&cfg, &out_dir).map_err(runtime_err)?;
            for p in &out.reports {
                say(format!("wrote {}", p.display()));
            }
            say(format!("wrote {}", out.summary.display()));
        }
        Command::Plotdata { report, kind } => {
            let kind: PlotKind = kind.parse().map_err(config_err)?;
            let rep = CellReport::load(report).map_err(runtime_err)?;
            match &cli.out {
                Some(p) => {
                    emit_plotdata(&rep.run, kind, p).map_err(runtime_err)?;
                    say(format!("wrote {}", p.display()));
                }
                None => {
                    let rows = plotdata(&rep.run, kind).map_err(runtime_err)?;
                    write_or_print(None, &plot_csv(&rows).map_err(runtime_err)?)?;
                }
            }
        }
        Command::Compare { reports, metric } => {
            let metrics: Vec<Metric> = if metric.is_empty() {
                Metric::ALL.to_vec()
            } else {
                metric.iter().map(|m| m.parse()).collect::<Result<_, _>>().map_err(config_err)?
            };
            let loaded = reports
                .iter()
                .map(|p| {
                    let label = p.file_stem().map_or_else(|| p.display().to_string(), |s| s.to_string_lossy().into_owned());
                    CellReport::load(p).map(|r| (label, r))
                })
                .collect::<Result<Vec<_>, _>>()
                .map_err(runtime_err)?;
            let table = compare(&loaded, &metrics).map_err(runtime_err)?;
            write_or_print(cli.out.as_ref(), &format!("{table}\n"))?;
        }
        Command::Synth {
            spec,
            scenario,
            t_total,
            n_vars,
            boundaries,
            noise_sigma,
        } => {
            let mut s: SynthSpec = match spec {
                Some(p) => {
                    let text = std::fs::read_to_string(p).map_err(|e| Failure(2, format!("{}: {e}", p.display())))?;
                    toml::from_str(&text).map_err(config_err)?
                }
                None => SynthSpec::default(),
            };
            if let Some(sc) = scenario {
                s.scenario = serde_json::from_value::<Scenario>(serde_json::Value::String(sc.clone()))
                    .map_err(|_| Failure(2, format!("unknown scenario {sc:?}; expected switch-experts, piecewise-ar or sine-regime")))?;
            }
            if let Some(t) = t_total {
                s.t_total = *t;
            }
            if let Some(m) = n_vars {
                s.n_vars = *m;
            }
            if let Some(b) = boundaries {
                s.boundaries = b.clone();
            }
            if let Some(n) = noise_sigma {
                s.noise_sigma = *n;
            }
            if let Some(seed) = cli.seed {
                s.seed = seed;
            }
            s.validate().map_err(config_err)?;
            let ds = s.generate().map_err(runtime_err)?;
            let path = cli.out.clone().unwrap_or_else(|| PathBuf::from("synth.csv"));
            ds.write_csv(&path).map_err(runtime_err)?;
            say(format!("wrote {} ({} variables x {} steps)", path.display(), ds.n_vars(), ds.len()));
        }
    }
    Ok(())
}

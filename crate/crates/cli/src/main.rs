use std::collections::BTreeSet;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use fblrelay_core::experiments::{
    check_not_pinned, parse_range, run_figure, run_sweep, AnalyticPath, Figure, Output, Overrides, Resolved,
    SummaryItem, SweepRow, SweepSpec, SweepVariable, CSV_HEADER,
};
use fblrelay_core::latency::{optimize_blocklength, optimize_relays, Objective};
use fblrelay_core::{Error, Integrand};

/// Monte Carlo validation runs on the default configuration
/// (2x2 antennas, K=3, beta=128, T=1024).
const MC_VALIDATE_TRIALS: u64 = 1_000_000;
const MC_VALIDATE_SNR: &str = "0:20:1";
/// Analytic BLER below which Monte Carlo coverage is not scored.
const MC_SCORE_FLOOR: f64 = 1e-4;

#[derive(Parser)]
#[command(name = "fblrelay", version, about = "BLER, latency and throughput of multihop MIMO relaying with short packets")]
struct Cli {
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sweep one parameter and tabulate the requested outputs.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Swept parameter: snr_db, beta, K or alpha.
        #[arg(long, default_value = "snr_db")]
        vary: String,
        /// Grid for a non-SNR variable, as start:stop:step.
        #[arg(long)]
        grid: Option<String>,
        /// Comma-separated subset of analytic,asymptotic,monte_carlo,latency,throughput.
        #[arg(long, default_value = "analytic,asymptotic,latency,throughput")]
        outputs: String,
        #[arg(long, value_enum, default_value_t = AnalyticArg::ClosedForm)]
        analytic: AnalyticArg,
    },
    /// Reproduce a figure preset (fig2, fig3, fig5, fig6, fig7, fig8).
    Figure {
        name: String,
        /// Add Monte Carlo estimates to the BLER presets.
        #[arg(long)]
        mc: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Exhaustive blocklength search.
    OptimizeBeta {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "100:1000:10")]
        grid: String,
        #[arg(long, value_enum, default_value_t = ObjectiveArg::MinLatency)]
        objective: ObjectiveArg,
    },
    /// Exhaustive relay-count search.
    OptimizeRelays {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "0:9:1")]
        grid: String,
        #[arg(long, value_enum, default_value_t = ObjectiveArg::MinLatency)]
        objective: ObjectiveArg,
    },
    /// Compare Monte Carlo estimates with the exact-Q analytic BLER.
    McValidate {
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum AnalyticArg {
    ClosedForm,
    Psi,
    ExactQ,
}

#[derive(Clone, Copy, ValueEnum)]
enum ObjectiveArg {
    MinLatency,
    MaxThroughput,
}

#[derive(Clone, Copy, Default, ValueEnum)]
enum Format {
    #[default]
    Csv,
    Jsonl,
}

/// Parameter flags. They override values read from `--config`.
#[derive(Args, Default)]
struct Common {
    #[arg(long)]
    config: Option<PathBuf>,
    /// tas-mrc, tas-sc or both.
    #[arg(long)]
    scheme: Option<String>,
    /// Average SNR in dB, or start:stop:step when sweeping SNR.
    #[arg(long = "snr-db", allow_hyphen_values = true)]
    snr_db: Option<String>,
    #[arg(long)]
    k: Option<String>,
    #[arg(long)]
    nt: Option<String>,
    #[arg(long)]
    nr: Option<String>,
    #[arg(long)]
    beta: Option<String>,
    #[arg(long = "info-bits")]
    info_bits: Option<String>,
    #[arg(long)]
    eta: Option<String>,
    #[arg(long)]
    alpha: Option<String>,
    #[arg(long = "max-retx")]
    max_retx: Option<String>,
    #[arg(long = "feedback-cu")]
    feedback_cu: Option<String>,
    #[arg(long)]
    trials: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    /// semi or bernoulli.
    #[arg(long)]
    estimator: Option<String>,
    #[arg(long = "chunk-size")]
    chunk_size: Option<String>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    #[arg(long)]
    output: Option<PathBuf>,
}

impl Common {
    /// Flag overrides; the SNR flag is skipped when it carries a sweep range.
    fn overrides(&self, snr_is_grid: bool) -> Result<Overrides> {
        let mut o = Overrides::default();
        let pairs = [
            ("scheme", &self.scheme),
            ("relays", &self.k),
            ("tx_antennas", &self.nt),
            ("rx_antennas", &self.nr),
            ("blocklength", &self.beta),
            ("info_bits", &self.info_bits),
            ("pathloss_exponent", &self.eta),
            ("decode_delay_factor", &self.alpha),
            ("max_retx", &self.max_retx),
            ("feedback_delay", &self.feedback_cu),
            ("trials", &self.trials),
            ("seed", &self.seed),
            ("estimator", &self.estimator),
            ("chunk_size", &self.chunk_size),
        ];
        for (key, value) in pairs {
            if let Some(v) = value {
                o.set(key, v.as_str())?;
            }
        }
        if !snr_is_grid {
            if let Some(v) = &self.snr_db {
                o.set("avg_snr_db", v.as_str())?;
            }
        }
        Ok(o)
    }

    fn file_overrides(&self) -> Result<Overrides> {
        match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| Error::Domain {
                        field: "config",
                        reason: format!("cannot read {}: {e}", path.display()),
                    })?;
                Ok(Overrides::parse(&text)?)
            }
            None => Ok(Overrides::default()),
        }
    }

    /// File values, then flags, on top of `base`. Returns the merged
    /// overrides too, for pinning checks.
    fn resolve(&self, base: &Resolved, snr_is_grid: bool) -> Result<(Resolved, Overrides)> {
        let merged = self.file_overrides()?.merged_with(&self.overrides(snr_is_grid)?);
        let resolved = merged.resolve(base)?;
        Ok((resolved, merged))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(e) if e.is_numeric() => 3,
        _ => 2,
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("cannot configure the thread pool")?;
    }
    match cli.command {
        Command::Sweep {
            common,
            vary,
            grid,
            outputs,
            analytic,
        } => {
            let variable: SweepVariable = vary.parse()?;
            let snr_is_grid = variable == SweepVariable::SnrDb;
            let (resolved, merged) = common.resolve(&Resolved::default(), snr_is_grid)?;
            check_not_pinned(variable, &merged)?;
            let grid_text = if snr_is_grid {
                if grid.is_some() {
                    return Err(Error::Domain {
                        field: "grid",
                        reason: "use --snr-db for the SNR grid".into(),
                    }
                    .into());
                }
                common.snr_db.clone().unwrap_or_else(|| "-10:30:1".to_string())
            } else {
                grid.ok_or(Error::Domain {
                    field: "grid",
                    reason: format!("--grid is required when sweeping {vary}"),
                })?
            };
            let outputs = outputs
                .split(',')
                .filter(|s| !s.trim().is_empty())
                .map(str::parse)
                .collect::<std::result::Result<BTreeSet<Output>, _>>()?;
            let mut spec = SweepSpec::new(variable, parse_range(&grid_text)?, &resolved, outputs);
            spec.analytic_path = match analytic {
                AnalyticArg::ClosedForm => AnalyticPath::ClosedForm,
                AnalyticArg::Psi => AnalyticPath::Quadrature(Integrand::Psi),
                AnalyticArg::ExactQ => AnalyticPath::Quadrature(Integrand::ExactQ),
            };
            let rows = run_sweep(&spec)?;
            emit(&common, &rows, &[])
        }
        Command::Figure { name, mc, common } => {
            let figure: Figure = name.parse()?;
            let mc_cfg = if mc {
                let (resolved, _) = common.resolve(&Resolved::default(), false)?;
                Some(resolved.mc)
            } else {
                None
            };
            let out = run_figure(figure, mc_cfg)?;
            emit(&common, &out.rows, &out.summary)
        }
        Command::OptimizeBeta {
            common,
            grid,
            objective,
        } => optimize(common, SweepVariable::Blocklength, &grid, objective),
        Command::OptimizeRelays {
            common,
            grid,
            objective,
        } => optimize(common, SweepVariable::Relays, &grid, objective),
        Command::McValidate { common } => {
            let mut base = Resolved::default();
            base.mc.trials = MC_VALIDATE_TRIALS;
            base.schemes = fblrelay_core::Scheme::ALL.to_vec();
            let (resolved, _) = common.resolve(&base, true)?;
            let grid = common.snr_db.clone().unwrap_or_else(|| MC_VALIDATE_SNR.to_string());
            let mut spec = SweepSpec::new(
                SweepVariable::SnrDb,
                parse_range(&grid)?,
                &resolved,
                [Output::Analytic, Output::MonteCarlo].into_iter().collect(),
            );
            spec.analytic_path = AnalyticPath::Quadrature(Integrand::ExactQ);
            let rows = run_sweep(&spec)?;
            let scored: Vec<&SweepRow> = rows
                .iter()
                .filter(|r| r.bler_analytic.is_some_and(|v| v >= MC_SCORE_FLOOR))
                .collect();
            let hits = scored.iter().filter(|r| r.flags.iter().any(|f| f == "mc-ci-hit")).count();
            let summary = vec![
                item("scored_points", scored.len()),
                item("ci_hits", hits),
                item(
                    "coverage",
                    if scored.is_empty() {
                        "n/a".to_string()
                    } else {
                        format!("{:.4}", hits as f64 / scored.len() as f64)
                    },
                ),
            ];
            emit(&common, &rows, &summary)
        }
    }
}

fn item(key: &str, value: impl ToString) -> SummaryItem {
    SummaryItem {
        key: key.to_string(),
        value: value.to_string(),
    }
}

fn optimize(common: Common, variable: SweepVariable, grid: &str, objective: ObjectiveArg) -> Result<ExitCode> {
    let (resolved, merged) = common.resolve(&Resolved::default(), false)?;
    check_not_pinned(variable, &merged)?;
    let values = parse_range(grid)?;
    let spec = SweepSpec::new(
        variable,
        values.clone(),
        &resolved,
        [Output::Analytic, Output::Latency, Output::Throughput].into_iter().collect(),
    );
    spec.validate()?;
    let points: Vec<u32> = values.iter().map(|v| *v as u32).collect();
    let objective = match objective {
        ObjectiveArg::MinLatency => Objective::MinLatency,
        ObjectiveArg::MaxThroughput => Objective::MaxThroughput,
    };
    let mut summary = Vec::new();
    for &scheme in &resolved.schemes {
        let template = fblrelay_core::SystemConfig { scheme, ..resolved.system };
        let best = match variable {
            SweepVariable::Blocklength => optimize_blocklength(&template, &resolved.retx, &points, objective)?,
            _ => optimize_relays(&template, &resolved.retx, &points, objective)?,
        };
        let name = if variable == SweepVariable::Blocklength { "beta" } else { "K" };
        summary.push(item(&format!("{scheme} best_{name}"), best.best));
        summary.push(item(&format!("{scheme} latency_cu"), format!("{:.4}", best.report.latency_cu)));
        summary.push(item(&format!("{scheme} latency_ms"), format!("{:.4}", best.report.latency_ms)));
        summary.push(item(&format!("{scheme} throughput_bpcu"), format!("{:.6}", best.report.throughput)));
    }
    let rows = run_sweep(&spec)?;
    emit(&common, &rows, &summary)
}

/// Writes the table to `--output` (or stdout) and the summary to stderr.
/// Exits with the numeric-error code if any row carries a numeric failure.
fn emit(common: &Common, rows: &[SweepRow], summary: &[SummaryItem]) -> Result<ExitCode> {
    let sink: Box<dyn Write> = match &common.output {
        Some(path) => Box::new(create(path)?),
        None => Box::new(io::stdout().lock()),
    };
    let mut sink = BufWriter::new(sink);
    match common.format {
        Format::Csv => {
            let mut w = csv::Writer::from_writer(&mut sink);
            w.write_record(CSV_HEADER)?;
            for row in rows {
                w.write_record(row.csv_record())?;
            }
            w.flush()?;
        }
        Format::Jsonl => {
            for row in rows {
                serde_json::to_writer(&mut sink, row)?;
                sink.write_all(b"\n")?;
            }
        }
    }
    sink.flush()?;
    for s in summary {
        eprintln!("# {} = {}", s.key, s.value);
    }
    let failed = rows.iter().filter(|r| r.has_numeric_error()).count();
    if failed > 0 {
        eprintln!("error: {failed} row(s) have numeric errors; see the flags column");
        return Ok(ExitCode::from(3));
    }
    Ok(ExitCode::SUCCESS)
}

fn create(path: &Path) -> Result<File> {
    File::create(path).map_err(|e| {
        Error::Domain {
            field: "output",
            reason: format!("cannot create {}: {e}", path.display()),
        }
        .into()
    })
}

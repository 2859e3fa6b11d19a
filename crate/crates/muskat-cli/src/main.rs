//! Command-line driver: configure and execute interface runs, recompute
//! diagnostics from snapshots, run the conformal probe, and sweep scenario
//! parameters.
//!
//! Exit codes: 0 on success, 2 when a run terminates singularly
//! (blow-up / singular kernel / clearance), 3 on configuration errors.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use muskat::diagnostics::DiagRecord;
use muskat::error::Error;
use muskat::io::{RunConfig, Snapshot};
use muskat::runner::{self, SweepParam, TerminationReason};
use muskat::scenarios::Scenario;

#[derive(Parser)]
#[command(name = "muskat", about = "Spectral contour dynamics for a porous-media interface")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct ConfigArgs {
    /// JSON run configuration; flags and MUSKAT_* variables override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Scenario spec: flat | graph[:a1=x | :a=x,modes=m] | neck[:d=x,l=x]
    #[arg(long)]
    scenario: Option<String>,
    /// Grid size (even, >= 16).
    #[arg(long)]
    n: Option<usize>,
    /// Explicit time step (omit for the stability rule).
    #[arg(long, allow_negative_numbers = true)]
    dt: Option<f64>,
    /// Final time.
    #[arg(long)]
    t_end: Option<f64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Enable the automatic image-frame probe.
    #[arg(long)]
    probe: bool,
    /// Branch-cut angle for the frame map.
    #[arg(long, allow_negative_numbers = true)]
    branch_angle: Option<f64>,
    /// Seed for randomized graph phases.
    #[arg(long)]
    seed: Option<u64>,
}

impl ConfigArgs {
    fn resolve(&self) -> Result<RunConfig, Error> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        cfg.apply_env_overrides()?;
        if let Some(seed) = self.seed {
            cfg.seed = Some(seed);
        }
        if let Some(spec) = &self.scenario {
            cfg.scenario = Scenario::parse_spec(spec, cfg.seed)?;
        }
        if let Some(n) = self.n {
            cfg.n_points = n;
        }
        if let Some(dt) = self.dt {
            cfg.evolution.dt = Some(dt);
        }
        if let Some(t_end) = self.t_end {
            cfg.evolution.t_end = t_end;
        }
        if let Some(out) = &self.out {
            cfg.out_dir = out.clone();
        }
        if self.probe {
            cfg.probe.enabled = true;
        }
        if let Some(b) = self.branch_angle {
            cfg.probe.branch_angle = Some(b);
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Evolve a scenario and write diagnostics, snapshots and state.
    Run(ConfigArgs),
    /// Recompute the diagnostics row for a stored snapshot.
    Diagnose {
        #[arg(long)]
        snapshot: PathBuf,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Transform a snapshot into the image frame and report/evolve there.
    /// The image-frame step size comes from --dt (default 1e-3).
    Probe {
        #[arg(long)]
        snapshot: PathBuf,
        /// Image-frame steps to take (0 = report only).
        #[arg(long, default_value_t = 0)]
        steps: usize,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Evaluate a scenario family and emit a summary table.
    Sweep {
        /// Which parameter to vary.
        #[arg(long, value_parser = parse_sweep_param)]
        param: SweepParam,
        /// Comma-separated parameter values.
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        values: Vec<f64>,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
}

fn parse_sweep_param(s: &str) -> Result<SweepParam, String> {
    match s {
        "neck-d" | "d" => Ok(SweepParam::NeckD),
        "neck-l" | "l" => Ok(SweepParam::NeckL),
        "graph-a1" | "a1" => Ok(SweepParam::GraphA1),
        other => Err(format!("unknown sweep parameter {other:?} (try d, l, a1)")),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Config(_) | Error::Scenario(_) | Error::Snapshot(_) | Error::Json(_) => {
                    ExitCode::from(3)
                }
                _ => ExitCode::from(2),
            }
        }
    }
}

fn dispatch(cli: Cli) -> Result<ExitCode, Error> {
    match cli.command {
        Command::Run(args) => {
            let cfg = args.resolve()?;
            let out_dir = cfg.out_dir.clone();
            let outcome = runner::run(&cfg, &out_dir)?;
            println!(
                "run: {} after {} steps at t = {:.6} ({} records){}",
                match outcome.termination.reason {
                    TerminationReason::Completed => "completed",
                    TerminationReason::BlowUp => "blow-up",
                    TerminationReason::SingularKernel => "singular-kernel",
                    TerminationReason::Clearance => "clearance",
                },
                outcome.termination.steps,
                outcome.termination.t,
                outcome.records,
                if outcome.probe_emitted { ", image-frame probe emitted" } else { "" },
            );
            if let Some(detail) = &outcome.termination.detail {
                println!("detail: {detail}");
            }
            Ok(if outcome.termination.reason == TerminationReason::Completed {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(2)
            })
        }
        Command::Diagnose { snapshot, cfg } => {
            let cfg = cfg.resolve()?;
            let snap = Snapshot::load(&snapshot)?;
            let rec =
                runner::diagnose_snapshot(&snap, &cfg.fluid, &cfg.evolution, &cfg.diagnostics)?;
            println!("{}", DiagRecord::CSV_HEADER);
            println!("{}", rec.csv_row());
            Ok(ExitCode::SUCCESS)
        }
        Command::Probe { snapshot, steps, cfg } => {
            let cfg = cfg.resolve()?;
            let snap = Snapshot::load(&snapshot)?;
            let out_dir = cfg.out_dir.clone();
            let dt = cfg.evolution.dt.unwrap_or(1e-3);
            let report = runner::probe_run(
                &snap,
                cfg.branch_angle(),
                &cfg.fluid,
                &cfg.evolution,
                &cfg.diagnostics,
                steps,
                dt,
                &out_dir,
            )?;
            println!("{}", serde_json::to_string_pretty(&report)?);
            Ok(ExitCode::SUCCESS)
        }
        Command::Sweep { param, values, cfg } => {
            let cfg = cfg.resolve()?;
            if values.is_empty() {
                return Err(Error::Config("sweep needs at least one value".into()));
            }
            let rows = runner::sweep(&cfg, param, &values)?;
            std::fs::create_dir_all(&cfg.out_dir)?;
            let path = cfg.out_dir.join("summary.csv");
            runner::write_sweep_csv(&rows, &path)?;
            println!("{}", muskat::runner::SweepRow::CSV_HEADER);
            for r in &rows {
                println!("{}", r.csv_row());
            }
            println!("summary written to {}", path.display());
            Ok(ExitCode::SUCCESS)
        }
    }
}

//! `demix`: run single simulation points or Eb/N0 × B sweeps and write CSV.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use coded_demixing::harness::{grid, run_sweep_with, SweepRow, CSV_HEADER};
use coded_demixing::{harness, Error, Preset, SystemConfig};

#[derive(Parser, Debug)]
#[command(name = "demix", version, about = "Coded demixing simulator for unsourced random access")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate one configuration point.
    Run(Options),
    /// Simulate a grid of Eb/N0 values and bin counts.
    Sweep(Options),
}

#[derive(Args, Debug)]
struct Options {
    /// Flat `key = value` configuration file applied on top of the preset.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Base parameter set.
    #[arg(long, default_value = "desk", value_parser = ["desk", "paper"])]
    preset: String,
    /// Eb/N0 values in dB (comma separated).
    #[arg(long, value_delimiter = ',')]
    ebn0: Vec<f64>,
    /// Bin counts (comma separated powers of two).
    #[arg(long, value_delimiter = ',')]
    bins: Vec<usize>,
    /// `run`: use exact occupancies. `sweep`: add a genie-aided row next to
    /// every estimated-occupancy row.
    #[arg(long)]
    genie: bool,
    /// Suppress channel noise.
    #[arg(long)]
    noiseless: bool,
    #[arg(long)]
    trials: Option<usize>,
    /// Base seed; trial i uses seed + i.
    #[arg(long)]
    seed: Option<u64>,
    /// CSV destination (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write 0 in the `seconds` column so reruns produce identical files.
    #[arg(long)]
    no_timing: bool,
}

enum Failure {
    Config(String),
    Runtime(String),
}

impl Options {
    fn base_config(&self) -> Result<SystemConfig, Failure> {
        let preset: Preset = self.preset.parse().map_err(|e: Error| Failure::Config(e.to_string()))?;
        let mut cfg = match &self.config {
            Some(path) => SystemConfig::load(path, preset).map_err(|e| Failure::Config(e.to_string()))?,
            None => SystemConfig::preset(preset),
        };
        if self.noiseless {
            cfg.noiseless = true;
        }
        if let Some(t) = self.trials {
            cfg.trials = t;
        }
        if let Some(s) = self.seed {
            cfg.base_seed = s;
        }
        Ok(cfg)
    }

    fn writer(&self) -> Result<Box<dyn Write>, Failure> {
        Ok(match &self.out {
            Some(path) => Box::new(BufWriter::new(
                File::create(path).map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))?,
            )),
            None => Box::new(io::stdout().lock()),
        })
    }
}

fn log_point(row: &SweepRow) {
    eprintln!(
        "ebn0={} dB B={} genie={} trials={} pupe={:.4} (se {:.4}) |K̂-K|={:.3} delta={:.4e} rho={:.4e} {:.1}s",
        row.ebn0_db,
        row.bins,
        row.genie,
        row.trials,
        row.mean_pupe,
        row.stderr_pupe,
        row.mean_khat_abs_err,
        row.delta,
        row.rho,
        row.seconds
    );
}

fn run(opts: &Options) -> Result<(), Failure> {
    let mut cfg = opts.base_config()?;
    if opts.ebn0.len() > 1 || opts.bins.len() > 1 {
        return Err(Failure::Config("`run` takes a single --ebn0 and --bins; use `sweep` for lists".into()));
    }
    if let Some(&e) = opts.ebn0.first() {
        cfg.ebn0_db = e;
    }
    if let Some(&b) = opts.bins.first() {
        cfg.bins = b;
    }
    if opts.genie {
        cfg.genie_occupancy = true;
    }
    cfg.validate().map_err(|e| Failure::Config(e.to_string()))?;
    let row = harness::run_point(&cfg).map_err(|e| Failure::Runtime(e.to_string()))?;
    log_point(&row);
    let mut out = opts.writer()?;
    harness::write_csv(&mut out, &[row], !opts.no_timing).map_err(|e| Failure::Runtime(e.to_string()))
}

fn sweep(opts: &Options) -> Result<(), Failure> {
    let base = opts.base_config()?;
    let ebn0 = if opts.ebn0.is_empty() { vec![base.ebn0_db] } else { opts.ebn0.clone() };
    let bins = if opts.bins.is_empty() { vec![base.bins] } else { opts.bins.clone() };
    let genie: Vec<bool> = if opts.genie { vec![false, true] } else { vec![base.genie_occupancy] };
    let points = grid(&ebn0, &bins, &genie);
    for p in &points {
        p.apply(&base).validate().map_err(|e| Failure::Config(e.to_string()))?;
    }

    let mut out = opts.writer()?;
    writeln!(out, "{CSV_HEADER}").map_err(|e| Failure::Runtime(e.to_string()))?;
    let timing = !opts.no_timing;
    let outcomes = run_sweep_with(&base, &points, |row| {
        log_point(row);
        writeln!(out, "{}", row.to_csv_line(timing))?;
        out.flush()?;
        Ok(())
    })
    .map_err(|e| Failure::Config(e.to_string()))?;

    let failures: Vec<String> = outcomes
        .into_iter()
        .filter_map(|o| o.err())
        .map(|(p, e)| format!("ebn0={} B={} genie={}: {e}", p.ebn0_db, p.bins, p.genie))
        .collect();
    if failures.is_empty() {
        Ok(())
    } else {
        Err(Failure::Runtime(failures.join("\n")))
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match &cli.command {
        Command::Run(opts) => run(opts),
        Command::Sweep(opts) => sweep(opts),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("configuration error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("runtime failure: {msg}");
            ExitCode::from(2)
        }
    }
}

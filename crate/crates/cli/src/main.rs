use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::Parser;
use pgasmd::bench::{self, SweepSpec};
use pgasmd::report;
use pgasmd::{AccessMode, Distribution, Execution, LjParams, SimConfig, Strategy};

/// Linked-cell Lennard-Jones MD over an instrumented shared address space.
///
/// Without --sweep or --oracle, performs a single run and writes the
/// per-step observables to --out (stdout if absent).
#[derive(Debug, Parser)]
#[command(name = "pgasmd", version)]
struct Cli {
    /// Cells along x.
    #[arg(long, default_value_t = 4)]
    nx: usize,
    /// Cells along y.
    #[arg(long, default_value_t = 4)]
    ny: usize,
    /// Cells along z.
    #[arg(long, default_value_t = 4)]
    nz: usize,
    /// Number density in reduced units.
    #[arg(long, default_value_t = 0.5)]
    density: f64,
    /// Interaction cut-off; also the cell edge.
    #[arg(long, default_value_t = 3.0)]
    cutoff: f64,
    #[arg(long, default_value_t = 0.001)]
    dt: f64,
    #[arg(long, default_value_t = 10)]
    steps: usize,
    #[arg(long, default_value_t = 1)]
    ranks: usize,
    /// lpm, lpc or lpc+.
    #[arg(long, default_value = "lpc+", value_parser = parse::<Strategy>)]
    strategy: Strategy,
    /// blocked or roundrobin.
    #[arg(long = "dist", default_value = "blocked", value_parser = parse::<Distribution>)]
    distribution: Distribution,
    /// local or shared-only.
    #[arg(long, default_value = "local", value_parser = parse::<AccessMode>)]
    access: AccessMode,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Shift the potential to zero at the cut-off.
    #[arg(long)]
    shift_potential: bool,
    /// Record observables every N steps (the last step is always recorded).
    #[arg(long, default_value_t = 1)]
    stride: usize,
    /// Observables CSV, or the summary CSV with --sweep.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Counters JSON of a single run.
    #[arg(long)]
    counters: Option<PathBuf>,
    /// Final frame as XYZ.
    #[arg(long)]
    xyz: Option<PathBuf>,
    /// Sweep specification (TOML).
    #[arg(long, conflicts_with = "oracle")]
    sweep: Option<PathBuf>,
    /// Compare every strategy with the all-pairs reference after --steps.
    #[arg(long)]
    oracle: bool,
    /// Run ranks on threads or interleaved on one thread.
    #[arg(long, default_value = "threaded", value_parser = ["threaded", "sequential"])]
    exec: String,
}

fn parse<T: std::str::FromStr<Err = pgasmd::Error>>(s: &str) -> Result<T, String> {
    s.parse().map_err(|e: pgasmd::Error| e.to_string())
}

type Failure = Box<dyn std::error::Error>;

impl Cli {
    fn config(&self) -> SimConfig {
        SimConfig {
            grid_dims: [self.nx, self.ny, self.nz],
            density: self.density,
            lj: LjParams {
                cutoff: self.cutoff,
                shift_potential: self.shift_potential,
                ..LjParams::default()
            },
            dt: self.dt,
            steps: self.steps,
            ranks: self.ranks,
            strategy: self.strategy,
            distribution: self.distribution,
            seed: self.seed,
            access_mode: self.access,
            observe_stride: self.stride,
        }
    }

    fn execution(&self) -> Execution {
        match self.exec.as_str() {
            "sequential" => Execution::Sequential,
            _ => Execution::Threaded,
        }
    }
}

fn create(path: &Path) -> Result<BufWriter<File>, Failure> {
    let file = File::create(path).map_err(|e| format!("cannot create {}: {e}", path.display()))?;
    Ok(BufWriter::new(file))
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>, Failure> {
    Ok(match path {
        Some(p) => Box::new(create(p)?),
        None => Box::new(io::stdout().lock()),
    })
}

fn single(cli: &Cli) -> Result<bool, Failure> {
    let config = cli.config();
    let start = Instant::now();
    let report = pgasmd::sim::run_with(&config, cli.execution())?;
    let wall = start.elapsed().as_secs_f64();

    report::write_observables(output(cli.out.as_deref())?, &report.observables)?;
    if let Some(path) = &cli.counters {
        let mut doc = serde_json::to_value(&report.counters)?;
        doc["force_phase"] = serde_json::to_value(&report.force_counters)?;
        let mut out = create(path)?;
        serde_json::to_writer_pretty(&mut out, &doc)?;
        writeln!(out)?;
    }
    if let Some(path) = &cli.xyz {
        let comment = format!(
            "pgasmd step {} L={:?}",
            config.steps,
            config.domain_lengths().to_array()
        );
        report::write_xyz(create(path)?, &report.final_state, &comment)?;
    }
    eprintln!(
        "{} molecules, {} steps, {} ranks, {}: wall time {wall:.3} s",
        report.molecules, config.steps, config.ranks, config.strategy
    );
    Ok(true)
}

fn sweep(cli: &Cli, path: &Path) -> Result<bool, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    let spec = SweepSpec::from_toml(&text)?;
    let rows = bench::run_sweep(&spec, &cli.config(), |row| {
        eprintln!(
            "{:>5} {:<10} {:<11} ranks {:>3}: {}",
            row.strategy.as_str(),
            row.distribution.as_str(),
            row.access_mode.as_str(),
            row.ranks,
            row.status
        );
    })?;
    bench::write_sweep(output(cli.out.as_deref())?, &rows)?;
    Ok(rows.iter().all(|r| r.is_ok()))
}

const ORACLE_FORCE_TOL: f64 = 1e-10;
const ORACLE_POTENTIAL_TOL: f64 = 1e-12;

fn oracle(cli: &Cli) -> Result<bool, Failure> {
    let report = bench::oracle_check(&cli.config())?;
    println!(
        "{} molecules at step {}, reference potential {:.12e}",
        report.molecules, report.step, report.reference_potential
    );
    println!(
        "{:<8} {:>14} {:>14} {:>12}",
        "strategy", "force dev", "potential dev", "net force"
    );
    for s in &report.strategies {
        println!(
            "{:<8} {:>14.3e} {:>14.3e} {:>12.3e}",
            s.strategy.as_str(),
            s.max_force_deviation,
            s.potential_deviation,
            s.net_force
        );
    }
    let ok = report.within(ORACLE_FORCE_TOL, ORACLE_POTENTIAL_TOL);
    println!("{}", if ok { "agreement" } else { "MISMATCH" });
    Ok(ok)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match (&cli.sweep, cli.oracle) {
        (Some(path), _) => sweep(&cli, path),
        (None, true) => oracle(&cli),
        (None, false) => single(&cli),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

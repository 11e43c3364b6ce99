//! Benchmark sweeps and the all-pairs verification check.

use std::io::Write;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{self, AccessMode, Distribution, SimConfig, Strategy};
use crate::oracle;
use crate::pgas::AccessCounters;
use crate::sim::{self, Execution};

/// Largest system the all-pairs check accepts by default.
pub const ORACLE_LIMIT: usize = 5000;

/// Axes of a sweep. In TOML:
///
/// ```toml
/// rank_counts = [1, 2, 4]
/// strategies = ["lpc", "lpc+"]
/// distributions = ["blocked"]
/// access_modes = ["local"]
/// repetitions = 5
/// ```
///
/// Only `rank_counts` is required; strategies default to all three, the
/// distribution to blocked and the access mode to local.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub rank_counts: Vec<usize>,
    #[serde(default = "all_strategies")]
    pub strategies: Vec<Strategy>,
    #[serde(default = "blocked_only")]
    pub distributions: Vec<Distribution>,
    #[serde(default = "local_only")]
    pub access_modes: Vec<AccessMode>,
    #[serde(default = "five")]
    pub repetitions: usize,
}

fn all_strategies() -> Vec<Strategy> {
    Strategy::ALL.to_vec()
}

fn blocked_only() -> Vec<Distribution> {
    vec![Distribution::Blocked]
}

fn local_only() -> Vec<AccessMode> {
    vec![AccessMode::LocalView]
}

fn five() -> usize {
    5
}

impl SweepSpec {
    pub fn from_toml(text: &str) -> Result<Self> {
        let spec: SweepSpec = toml::from_str(text).map_err(|e| Error::Config(format!("sweep spec: {e}")))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let empty = [
            ("rank_counts", self.rank_counts.is_empty()),
            ("strategies", self.strategies.is_empty()),
            ("distributions", self.distributions.is_empty()),
            ("access_modes", self.access_modes.is_empty()),
        ];
        if let Some((name, _)) = empty.iter().find(|(_, e)| *e) {
            return Err(Error::Config(format!("sweep spec: {name} must not be empty")));
        }
        if self.rank_counts.contains(&0) {
            return Err(Error::Config("sweep spec: rank counts must be positive".into()));
        }
        if self.repetitions == 0 {
            return Err(Error::Config("sweep spec: repetitions must be at least 1".into()));
        }
        Ok(())
    }

    /// Every configuration of the sweep, strategies outermost and rank
    /// counts innermost.
    pub fn configs(&self, base: &SimConfig) -> Vec<SimConfig> {
        let mut out = Vec::new();
        for &strategy in &self.strategies {
            for &distribution in &self.distributions {
                for &access_mode in &self.access_modes {
                    for &ranks in &self.rank_counts {
                        out.push(SimConfig {
                            strategy,
                            distribution,
                            access_mode,
                            ranks,
                            ..base.clone()
                        });
                    }
                }
            }
        }
        out
    }
}

/// One summary line of a sweep. Counter columns hold force-phase traffic
/// and are empty when the configuration failed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub strategy: Strategy,
    pub distribution: Distribution,
    pub access_mode: AccessMode,
    pub ranks: usize,
    pub mean_wall_s: Option<f64>,
    pub remote_element_reads: Option<u64>,
    pub remote_element_writes: Option<u64>,
    pub bulk_gets: Option<u64>,
    pub bulk_puts: Option<u64>,
    pub bulk_bytes: Option<u64>,
    pub lock_acquisitions: Option<u64>,
    pub std_wall_s: Option<f64>,
    /// `ok`, `failed: <reason>`, or `nondeterministic` when counters differed
    /// between repetitions.
    pub status: String,
}

impl SweepRow {
    fn new(config: &SimConfig, counters: Option<AccessCounters>, walls: &[f64], status: String) -> Self {
        let (mean, std) = mean_std(walls);
        Self {
            strategy: config.strategy,
            distribution: config.distribution,
            access_mode: config.access_mode,
            ranks: config.ranks,
            mean_wall_s: mean,
            remote_element_reads: counters.map(|c| c.remote_element_reads),
            remote_element_writes: counters.map(|c| c.remote_element_writes),
            bulk_gets: counters.map(|c| c.bulk_gets),
            bulk_puts: counters.map(|c| c.bulk_puts),
            bulk_bytes: counters.map(|c| c.bulk_bytes),
            lock_acquisitions: counters.map(|c| c.lock_acquisitions),
            std_wall_s: std,
            status,
        }
    }

    pub fn is_ok(&self) -> bool {
        self.status == "ok"
    }
}

/// Sample mean and standard deviation (n − 1 denominator).
fn mean_std(samples: &[f64]) -> (Option<f64>, Option<f64>) {
    if samples.is_empty() {
        return (None, None);
    }
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    if samples.len() == 1 {
        return (Some(mean), Some(0.0));
    }
    let var = samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (Some(mean), Some(var.sqrt()))
}

/// Runs one configuration `repetitions` times.
pub fn run_point(config: &SimConfig, repetitions: usize) -> SweepRow {
    let mut walls = Vec::with_capacity(repetitions);
    let mut first: Option<AccessCounters> = None;
    let mut status = "ok".to_string();
    for _ in 0..repetitions {
        let start = Instant::now();
        match sim::run(config) {
            Ok(report) => {
                walls.push(start.elapsed().as_secs_f64());
                let c = report.force_counters.totals;
                match first {
                    None => first = Some(c),
                    Some(f) if f != c => status = "nondeterministic".into(),
                    Some(_) => {}
                }
            }
            Err(e) => return SweepRow::new(config, None, &[], format!("failed: {e}")),
        }
    }
    SweepRow::new(config, first, &walls, status)
}

/// Runs every configuration of `spec` on top of `base`. A failing
/// configuration yields a failed row and the sweep goes on. `progress` sees
/// each row as soon as it is done.
pub fn run_sweep(spec: &SweepSpec, base: &SimConfig, mut progress: impl FnMut(&SweepRow)) -> Result<Vec<SweepRow>> {
    spec.validate()?;
    let mut rows = Vec::new();
    for config in spec.configs(base) {
        let row = run_point(&config, spec.repetitions);
        progress(&row);
        rows.push(row);
    }
    Ok(rows)
}

pub fn write_sweep<W: Write>(out: W, rows: &[SweepRow]) -> Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    for row in rows {
        writer.serialize(row)?;
    }
    writer.flush()?;
    Ok(())
}

/// Deviation of one strategy from the all-pairs reference.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StrategyDeviation {
    pub strategy: Strategy,
    /// See [`oracle::max_relative_deviation`].
    pub max_force_deviation: f64,
    pub potential_deviation: f64,
    /// Largest component of the summed force.
    pub net_force: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub molecules: usize,
    /// Step at which the comparison was made.
    pub step: usize,
    pub reference_potential: f64,
    pub strategies: Vec<StrategyDeviation>,
}

impl OracleReport {
    pub fn within(&self, force_tol: f64, potential_tol: f64) -> bool {
        self.strategies
            .iter()
            .all(|s| s.max_force_deviation < force_tol && s.potential_deviation < potential_tol)
    }
}

/// Runs `config` under every strategy and compares the final forces and
/// potential with a direct all-pairs evaluation of the final state.
/// With `steps = 0` that is the generated lattice.
pub fn oracle_check(config: &SimConfig) -> Result<OracleReport> {
    oracle_check_with_limit(config, ORACLE_LIMIT)
}

pub fn oracle_check_with_limit(config: &SimConfig, limit: usize) -> Result<OracleReport> {
    config.validate()?;
    let initial = model::generate(config)?;
    if initial.len() > limit {
        return Err(Error::OracleLimit {
            molecules: initial.len(),
            limit,
        });
    }
    let mut strategies = Vec::new();
    let mut reference_potential = 0.0;
    for strategy in Strategy::ALL {
        let run_config = SimConfig {
            strategy,
            ..config.clone()
        };
        let report = sim::run_phasespace(&run_config, &initial, Execution::Threaded)?;
        let reference = oracle::all_pairs(&report.final_state, &config.lj);
        let forces: Vec<_> = report.final_state.molecules.iter().map(|m| m.force).collect();
        let potential = report.observables.last().map_or(0.0, |o| o.potential);
        reference_potential = reference.potential;
        strategies.push(StrategyDeviation {
            strategy,
            max_force_deviation: oracle::max_relative_deviation(&forces, &reference.forces),
            potential_deviation: oracle::relative_difference(potential, reference.potential),
            net_force: report.final_state.net_force().max_abs(),
        });
    }
    Ok(OracleReport {
        molecules: initial.len(),
        step: config.steps,
        reference_potential,
        strategies,
    })
}

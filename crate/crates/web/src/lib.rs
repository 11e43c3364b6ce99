//! WebAssembly bindings for the demo page in `www/`.
//!
//! Everything runs on the page's thread: ranks are interleaved with the
//! sequential driver, which yields the same numbers as the threaded one.
//! The plain functions in [`demo`] hold the logic and are what the native
//! tests exercise; the `#[wasm_bindgen]` wrappers only convert errors.

use wasm_bindgen::prelude::*;

pub mod demo {
    use pgasmd::sim::{self, Execution};
    use pgasmd::{AccessCounters, AccessMode, CellGrid, Distribution, LjParams, SimConfig, StepObservables, Strategy};
    use serde::Serialize;

    /// Refuse runs that would freeze the tab.
    pub const MAX_MOLECULES: usize = 4000;
    pub const MAX_STEPS: usize = 2000;

    #[derive(Debug, Serialize)]
    pub struct DistributionMap {
        pub dims: [usize; 3],
        /// Owner of each cell, by cell id.
        pub owners: Vec<usize>,
        pub remote_pairs: usize,
        /// Remote pair count of the other policy, for comparison.
        pub other_remote_pairs: usize,
    }

    #[derive(Debug, Serialize)]
    pub struct StrategyTraffic {
        pub strategy: Strategy,
        pub counters: AccessCounters,
    }

    #[derive(Debug, Serialize)]
    pub struct TrafficReport {
        pub molecules: usize,
        pub strategies: Vec<StrategyTraffic>,
    }

    fn grid(dims: [usize; 3], ranks: usize, dist: &str) -> Result<CellGrid, String> {
        let dist: Distribution = dist.parse().map_err(|e: pgasmd::Error| e.to_string())?;
        CellGrid::new(dims, 3.0, dist, ranks).map_err(|e| e.to_string())
    }

    pub fn distribution_map(dims: [usize; 3], ranks: usize, dist: &str) -> Result<DistributionMap, String> {
        let g = grid(dims, ranks, dist)?;
        let other = match g.distribution() {
            Distribution::Blocked => Distribution::RoundRobin,
            Distribution::RoundRobin => Distribution::Blocked,
        };
        let other = CellGrid::new(dims, 3.0, other, ranks).map_err(|e| e.to_string())?;
        Ok(DistributionMap {
            dims,
            owners: (0..g.cell_count()).map(|id| g.owner_of_cell(id).unwrap_or(0)).collect(),
            remote_pairs: g.remote_pair_count(),
            other_remote_pairs: other.remote_pair_count(),
        })
    }

    fn config(dims: [usize; 3], density: f64, ranks: usize, dist: &str, seed: u64) -> Result<SimConfig, String> {
        let distribution = dist.parse().map_err(|e: pgasmd::Error| e.to_string())?;
        let config = SimConfig {
            grid_dims: dims,
            density,
            ranks,
            distribution,
            seed,
            lj: LjParams {
                shift_potential: true,
                ..LjParams::default()
            },
            ..SimConfig::default()
        };
        config.validate().map_err(|e| e.to_string())?;
        let n = pgasmd::model::lattice_side(density, config.domain_lengths().to_array().iter().product()).pow(3);
        if n > MAX_MOLECULES {
            return Err(format!(
                "{n} molecules is too many for the page (limit {MAX_MOLECULES})"
            ));
        }
        Ok(config)
    }

    /// Force-phase traffic of one sweep under each strategy.
    pub fn strategy_traffic(
        dims: [usize; 3],
        density: f64,
        ranks: usize,
        dist: &str,
        mode: &str,
        seed: u64,
    ) -> Result<TrafficReport, String> {
        let config = config(dims, density, ranks, dist, seed)?;
        let access_mode: AccessMode = mode.parse().map_err(|e: pgasmd::Error| e.to_string())?;
        let ps = pgasmd::model::generate(&config).map_err(|e| e.to_string())?;
        let mut strategies = Vec::new();
        for strategy in Strategy::ALL {
            let g = CellGrid::from_config(&config).map_err(|e| e.to_string())?;
            let sweep = sim::evaluate_forces(&ps, g, strategy, access_mode, &config.lj, Execution::Sequential)
                .map_err(|e| e.to_string())?;
            strategies.push(StrategyTraffic {
                strategy,
                counters: sweep.counters.totals,
            });
        }
        Ok(TrafficReport {
            molecules: ps.len(),
            strategies,
        })
    }

    /// Observables of a short run with the shifted potential.
    pub fn energy_trace(
        dims: [usize; 3],
        density: f64,
        ranks: usize,
        strategy: &str,
        dt: f64,
        steps: usize,
        seed: u64,
    ) -> Result<Vec<StepObservables>, String> {
        if steps > MAX_STEPS {
            return Err(format!("at most {MAX_STEPS} steps in the browser"));
        }
        let mut config = config(dims, density, ranks, "blocked", seed)?;
        config.strategy = strategy.parse().map_err(|e: pgasmd::Error| e.to_string())?;
        config.dt = dt;
        config.steps = steps;
        let report = sim::run_with(&config, Execution::Sequential).map_err(|e| e.to_string())?;
        Ok(report.observables)
    }
}

fn to_js<T: serde::Serialize>(value: Result<T, String>) -> Result<String, JsError> {
    let value = value.map_err(|e| JsError::new(&e))?;
    serde_json::to_string(&value).map_err(|e| JsError::new(&e.to_string()))
}

/// JSON `{dims, owners, remote_pairs, other_remote_pairs}`.
#[wasm_bindgen(js_name = distributionMap)]
pub fn distribution_map(nx: usize, ny: usize, nz: usize, ranks: usize, dist: &str) -> Result<String, JsError> {
    to_js(demo::distribution_map([nx, ny, nz], ranks, dist))
}

/// JSON `{molecules, strategies: [{strategy, counters}]}`.
#[wasm_bindgen(js_name = strategyTraffic)]
#[allow(clippy::too_many_arguments)]
pub fn strategy_traffic(
    nx: usize,
    ny: usize,
    nz: usize,
    density: f64,
    ranks: usize,
    dist: &str,
    mode: &str,
    seed: u64,
) -> Result<String, JsError> {
    to_js(demo::strategy_traffic([nx, ny, nz], density, ranks, dist, mode, seed))
}

/// JSON array of `{step, kinetic, potential, total, temperature}`.
#[wasm_bindgen(js_name = energyTrace)]
#[allow(clippy::too_many_arguments)]
pub fn energy_trace(
    nx: usize,
    ny: usize,
    nz: usize,
    density: f64,
    ranks: usize,
    strategy: &str,
    dt: f64,
    steps: usize,
    seed: u64,
) -> Result<String, JsError> {
    to_js(demo::energy_trace(
        [nx, ny, nz],
        density,
        ranks,
        strategy,
        dt,
        steps,
        seed,
    ))
}

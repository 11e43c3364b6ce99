//! The main loop: velocity Verlet over the shared space, one program per
//! rank, with a collective reduction closing every phase.
//!
//! The phase program is a flat list of [`Stage`]s. Two drivers execute it:
//! [`Execution::Threaded`] runs one thread per rank with real barriers and
//! cell-lock contention; [`Execution::Sequential`] runs the ranks one after
//! another on the calling thread (for targets without threads). Both reduce
//! partials in ascending rank order, so they produce identical bits.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::CellGrid;
use crate::integrator;
use crate::interaction::force_sweep;
use crate::model::{self, AccessMode, LjParams, PhaseSpace, SimConfig, Strategy};
use crate::pgas::{sum_in_rank_order, AccessCounters, CounterSnapshot, Phase, RankContext, SharedSpace};
use crate::vec3::Vec3;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepObservables {
    pub step: usize,
    pub kinetic: f64,
    pub potential: f64,
    pub total: f64,
    /// 2K / (3N) in reduced units.
    pub temperature: f64,
}

impl StepObservables {
    fn new(step: usize, kinetic: f64, potential: f64, molecules: usize) -> Self {
        let temperature = if molecules == 0 {
            0.0
        } else {
            2.0 * kinetic / (3.0 * molecules as f64)
        };
        Self {
            step,
            kinetic,
            potential,
            total: kinetic + potential,
            temperature,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Execution {
    /// One OS thread per rank.
    #[default]
    Threaded,
    /// All ranks interleaved phase by phase on the calling thread.
    Sequential,
}

#[derive(Clone, Debug)]
pub struct RunReport {
    pub observables: Vec<StepObservables>,
    /// Everything the ranks did, all phases.
    pub counters: CounterSnapshot,
    /// Traffic of the force sweeps alone.
    pub force_counters: CounterSnapshot,
    pub molecules: usize,
    pub final_state: PhaseSpace,
}

/// Result of a single force evaluation on a fixed configuration.
#[derive(Clone, Debug)]
pub struct SweepReport {
    /// Molecules sorted by id, with the computed forces.
    pub state: PhaseSpace,
    pub potential: f64,
    pub counters: CounterSnapshot,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Stage {
    /// Restore id order in every owned cell, then clear forces.
    ZeroForces,
    Force,
    Kick,
    Drift,
    MigrateDepart,
    MigrateArrive,
    Observe,
}

struct Params {
    strategy: Strategy,
    lj: LjParams,
    dt: f64,
}

/// Sets every owned force to exactly zero.
pub fn zero_forces(ctx: &mut RankContext, space: &SharedSpace) -> Result<()> {
    for &cell in space.owned_cells(ctx.rank) {
        let mut forces = space.exclusive_forces(ctx, cell)?;
        for slot in 0..forces.len() {
            forces.set_force(ctx, slot, Vec3::ZERO);
        }
    }
    Ok(())
}

fn kinetic_partial(ctx: &mut RankContext, space: &SharedSpace) -> Result<f64> {
    let mut kinetic = 0.0;
    for &cell in space.owned_cells(ctx.rank) {
        let view = space.view(ctx, cell)?;
        for slot in 0..view.len() {
            kinetic += 0.5 * view.velocity(ctx, slot).norm2();
        }
    }
    Ok(kinetic)
}

/// Runs one stage for one rank and returns its `[potential, kinetic]`
/// contribution.
fn run_stage(stage: Stage, ctx: &mut RankContext, space: &SharedSpace, p: &Params) -> Result<[f64; 2]> {
    let tag = match stage {
        Stage::Force => Phase::Force,
        Stage::MigrateDepart | Stage::MigrateArrive => Phase::Migrate,
        _ => Phase::Integrate,
    };
    space.enter_phase(ctx.rank, tag);
    let out = match stage {
        Stage::ZeroForces => integrator::settle(ctx, space)
            .and_then(|()| zero_forces(ctx, space))
            .map(|()| [0.0; 2]),
        Stage::Force => force_sweep(ctx, p.strategy, space, &p.lj).map(|u| [u, 0.0]),
        Stage::Kick => integrator::kick(ctx, space, 0.5 * p.dt).map(|()| [0.0; 2]),
        Stage::Drift => integrator::drift(ctx, space, p.dt).map(|()| [0.0; 2]),
        Stage::MigrateDepart => integrator::migrate_depart(ctx, space).map(|_| [0.0; 2]),
        Stage::MigrateArrive => integrator::migrate_arrive(ctx, space).map(|_| [0.0; 2]),
        Stage::Observe => kinetic_partial(ctx, space).map(|k| [0.0, k]),
    };
    space.leave_phase(ctx.rank);
    out
}

/// The full phase program, each stage tagged with its step.
fn program(steps: usize, stride: usize) -> Vec<(usize, Stage)> {
    use Stage::*;
    let mut stages = vec![(0, ZeroForces), (0, Force), (0, Observe)];
    for step in 1..=steps {
        stages.extend(
            [Kick, Drift, MigrateDepart, MigrateArrive, ZeroForces, Force, Kick]
                .into_iter()
                .map(|s| (step, s)),
        );
        if step % stride == 0 || step == steps {
            stages.push((step, Observe));
        }
    }
    stages
}

/// Turns the reduced stage results into observables.
struct Recorder {
    molecules: usize,
    potential: f64,
    observables: Vec<StepObservables>,
}

impl Recorder {
    fn record(&mut self, step: usize, stage: Stage, reduced: &[f64]) {
        match stage {
            Stage::Force => self.potential = reduced[0],
            Stage::Observe => {
                self.observables
                    .push(StepObservables::new(step, reduced[1], self.potential, self.molecules))
            }
            _ => {}
        }
    }
}

struct RankOutcome {
    ctx: RankContext,
    force: AccessCounters,
    result: Result<Option<Recorder>>,
}

fn step_error(step: usize, e: Error) -> Error {
    match e {
        Error::Aborted => Error::Aborted,
        e => Error::Step {
            step,
            source: Box::new(e),
        },
    }
}

/// One rank's side of the program under the threaded driver.
fn rank_program(rank: usize, space: &SharedSpace, stages: &[(usize, Stage)], p: &Params) -> RankOutcome {
    let mut ctx = RankContext::new(rank);
    let mut force = AccessCounters::default();
    let mut recorder = Recorder {
        molecules: space.molecule_count(),
        potential: 0.0,
        observables: Vec::new(),
    };
    for &(step, stage) in stages {
        let before = ctx.counters;
        let (values, failure) = match run_stage(stage, &mut ctx, space, p) {
            Ok(v) => (v, None),
            Err(e) => ([0.0; 2], Some(e)),
        };
        if stage == Stage::Force {
            force += ctx.counters - before;
        }
        let flag = if failure.is_some() { 1.0 } else { 0.0 };
        let reduced = space.all_reduce(rank, &[values[0], values[1], flag]);
        if reduced[2] > 0.0 {
            let e = failure.unwrap_or(Error::Aborted);
            return RankOutcome {
                ctx,
                force,
                result: Err(step_error(step, e)),
            };
        }
        if rank == 0 {
            recorder.record(step, stage, &reduced);
        }
    }
    RankOutcome {
        ctx,
        force,
        result: Ok((rank == 0).then_some(recorder)),
    }
}

fn drive_threaded(space: &SharedSpace, stages: &[(usize, Stage)], p: &Params) -> Result<(Recorder, Vec<RankOutcome>)> {
    let outcomes: Vec<RankOutcome> = std::thread::scope(|scope| {
        let handles: Vec<_> = (0..space.ranks())
            .map(|rank| scope.spawn(move || rank_program(rank, space, stages, p)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("rank thread panicked"))
            .collect()
    });
    let mut recorder = None;
    let mut aborted = false;
    let mut outcomes = outcomes;
    for outcome in &mut outcomes {
        match std::mem::replace(&mut outcome.result, Ok(None)) {
            Ok(Some(r)) => recorder = Some(r),
            Ok(None) => {}
            Err(Error::Aborted) => aborted = true,
            Err(e) => return Err(e),
        }
    }
    match recorder {
        Some(r) if !aborted => Ok((r, outcomes)),
        _ => Err(Error::Aborted),
    }
}

fn drive_sequential(
    space: &SharedSpace,
    stages: &[(usize, Stage)],
    p: &Params,
) -> Result<(Recorder, Vec<RankOutcome>)> {
    let ranks = space.ranks();
    let mut outcomes: Vec<RankOutcome> = (0..ranks)
        .map(|rank| RankOutcome {
            ctx: RankContext::new(rank),
            force: AccessCounters::default(),
            result: Ok(None),
        })
        .collect();
    let mut recorder = Recorder {
        molecules: space.molecule_count(),
        potential: 0.0,
        observables: Vec::new(),
    };
    let mut partials = vec![Vec::new(); ranks];
    for &(step, stage) in stages {
        for (outcome, slot) in outcomes.iter_mut().zip(partials.iter_mut()) {
            let before = outcome.ctx.counters;
            let values = run_stage(stage, &mut outcome.ctx, space, p).map_err(|e| step_error(step, e))?;
            if stage == Stage::Force {
                outcome.force += outcome.ctx.counters - before;
            }
            *slot = values.to_vec();
        }
        recorder.record(step, stage, &sum_in_rank_order(&partials));
    }
    Ok((recorder, outcomes))
}

fn drive(
    space: &SharedSpace,
    stages: &[(usize, Stage)],
    p: &Params,
    execution: Execution,
) -> Result<(Recorder, Vec<RankOutcome>)> {
    match execution {
        Execution::Threaded => drive_threaded(space, stages, p),
        Execution::Sequential => drive_sequential(space, stages, p),
    }
}

fn snapshots(outcomes: &[RankOutcome]) -> (CounterSnapshot, CounterSnapshot) {
    (
        CounterSnapshot::from_ranks(outcomes.iter().map(|o| o.ctx.counters)),
        CounterSnapshot::from_ranks(outcomes.iter().map(|o| o.force)),
    )
}

/// Generates the initial state from `config` and runs it on threads.
pub fn run(config: &SimConfig) -> Result<RunReport> {
    run_with(config, Execution::Threaded)
}

pub fn run_with(config: &SimConfig, execution: Execution) -> Result<RunReport> {
    config.validate()?;
    let phasespace = model::generate(config)?;
    run_phasespace(config, &phasespace, execution)
}

/// Runs `config` from a given initial state. The state's domain must match
/// the grid of `config`.
pub fn run_phasespace(config: &SimConfig, phasespace: &PhaseSpace, execution: Execution) -> Result<RunReport> {
    config.validate()?;
    let grid = CellGrid::from_config(config)?;
    let space = SharedSpace::from_phasespace(phasespace, grid, config.access_mode)?;
    let params = Params {
        strategy: config.strategy,
        lj: config.lj,
        dt: config.dt,
    };
    let stages = program(config.steps, config.observe_stride.max(1));
    let (recorder, outcomes) = drive(&space, &stages, &params, execution)?;
    let (counters, force_counters) = snapshots(&outcomes);
    Ok(RunReport {
        observables: recorder.observables,
        counters,
        force_counters,
        molecules: recorder.molecules,
        final_state: space.gather(),
    })
}

/// One force sweep of `phasespace` on `grid` by every rank. Counters cover
/// the sweep only.
pub fn evaluate_forces(
    phasespace: &PhaseSpace,
    grid: CellGrid,
    strategy: Strategy,
    access_mode: AccessMode,
    lj: &LjParams,
    execution: Execution,
) -> Result<SweepReport> {
    lj.validate()?;
    let space = SharedSpace::from_phasespace(phasespace, grid, access_mode)?;
    let params = Params {
        strategy,
        lj: *lj,
        dt: 0.0,
    };
    let stages = [(0, Stage::ZeroForces), (0, Stage::Force)];
    let (recorder, outcomes) = drive(&space, &stages, &params, execution)?;
    let (_, counters) = snapshots(&outcomes);
    Ok(SweepReport {
        state: space.gather(),
        potential: recorder.potential,
        counters,
    })
}

#[cfg(test)]
mod tests;

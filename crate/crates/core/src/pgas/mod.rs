//! Instrumented partitioned global address space.
//!
//! Cells live in per-rank partitions and are addressed globally by cell id.
//! A rank reaches cell data through one of three paths, each accounted in
//! the rank's [`AccessCounters`]:
//!
//! * a **local view** of a cell it owns (the local-pointer path),
//! * **element** accesses, which work for any cell and are classified local
//!   or remote by affinity (the pointer-to-shared path),
//! * **bulk** get/put of a whole cell's positions or forces.
//!
//! "Remote" means only that the accessing rank is not the owner; all ranks
//! share one address space.

mod counters;
mod fixed;

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicU8, Ordering};
use std::sync::Barrier;

use parking_lot::{Mutex, MutexGuard, RwLock, RwLockReadGuard, RwLockWriteGuard};

pub use counters::{AccessCounters, CounterSnapshot, RankCounters};
pub(crate) use fixed::FixedVec3;

use crate::error::{Error, Result};
use crate::grid::CellGrid;
use crate::model::{AccessMode, Molecule, PhaseSpace};
use crate::vec3::Vec3;

/// Nominal size of one position or force triple in bulk transfers.
pub const TRIPLE_BYTES: u64 = 24;
/// Nominal size of a migrating molecule record (id, position, velocity).
pub const MOLECULE_RECORD_BYTES: u64 = 8 + 2 * TRIPLE_BYTES;

/// State private to one rank: its id, its counters and its migration outbox.
#[derive(Debug, Default)]
pub struct RankContext {
    pub rank: usize,
    pub counters: AccessCounters,
    pub(crate) outbox: BTreeMap<(usize, usize), Vec<MoleculeRecord>>,
}

impl RankContext {
    pub fn new(rank: usize) -> Self {
        Self {
            rank,
            ..Default::default()
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) struct MoleculeRecord {
    pub id: u64,
    pub position: Vec3,
    pub velocity: Vec3,
}

/// Addressable scalar of a molecule.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Field {
    Position(usize),
    Velocity(usize),
    Force(usize),
}

impl Field {
    fn axis(self) -> usize {
        match self {
            Field::Position(a) | Field::Velocity(a) | Field::Force(a) => a,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AccessPath {
    LocalView,
    Shared,
}

/// Coarse program phase of each rank, used to catch position writes while
/// another rank is still computing forces.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u8)]
pub enum Phase {
    Idle = 0,
    Force = 1,
    Integrate = 2,
    Migrate = 3,
}

pub(crate) struct SharedCell {
    records: RwLock<Vec<MoleculeRecord>>,
    /// The cell lock; it guards the force field.
    forces: Mutex<Vec<FixedVec3>>,
}

struct ReduceState {
    slots: Vec<Vec<f64>>,
    result: Vec<f64>,
}

pub struct SharedSpace {
    grid: CellGrid,
    access_mode: AccessMode,
    partitions: Vec<Vec<SharedCell>>,
    owned: Vec<Vec<usize>>,
    barrier: Barrier,
    reduce: Mutex<ReduceState>,
    phases: Vec<AtomicU8>,
}

fn count(ctx: &mut RankContext, path: AccessPath, owner: usize, reads: u64, writes: u64) {
    let c = &mut ctx.counters;
    match path {
        AccessPath::LocalView => {
            c.local_element_reads += reads;
            c.local_element_writes += writes;
        }
        AccessPath::Shared => {
            c.shared_path_ops += reads + writes;
            if owner == ctx.rank {
                c.local_element_reads += reads;
                c.local_element_writes += writes;
            } else {
                c.remote_element_reads += reads;
                c.remote_element_writes += writes;
            }
        }
    }
}

fn check_axis(axis: usize) -> Result<()> {
    if axis >= 3 {
        return Err(Error::Addressing(format!("axis {axis} out of range")));
    }
    Ok(())
}

fn check_slot(cell: usize, slot: usize, len: usize) -> Result<()> {
    if slot >= len {
        return Err(Error::Addressing(format!(
            "slot {slot} out of range for cell {cell} holding {len} molecules"
        )));
    }
    Ok(())
}

impl SharedSpace {
    /// Places each cell in the partition of its owner.
    pub fn distribute(cells: Vec<Vec<Molecule>>, grid: CellGrid, access_mode: AccessMode) -> Result<Self> {
        if cells.len() != grid.cell_count() {
            return Err(Error::Config(format!(
                "{} cell lists for a grid of {} cells",
                cells.len(),
                grid.cell_count()
            )));
        }
        let ranks = grid.ranks();
        let owned: Vec<Vec<usize>> = (0..ranks).map(|r| grid.owned_cells(r)).collect();
        let mut slots: Vec<Option<Vec<Molecule>>> = cells.into_iter().map(Some).collect();
        let mut partitions = Vec::with_capacity(ranks);
        for ids in &owned {
            let mut partition = Vec::with_capacity(ids.len());
            for &id in ids {
                let molecules = slots[id].take().unwrap_or_default();
                if molecules.len() > grid.capacity() {
                    return Err(Error::Capacity {
                        cell: id,
                        capacity: grid.capacity(),
                    });
                }
                for m in &molecules {
                    if grid.cell_id_of_position(m.position)? != id {
                        return Err(Error::Containment {
                            position: m.position,
                            domain: grid.domain_lengths(),
                        });
                    }
                }
                partition.push(SharedCell {
                    forces: Mutex::new(molecules.iter().map(|m| FixedVec3::from_vec3(m.force)).collect()),
                    records: RwLock::new(
                        molecules
                            .iter()
                            .map(|m| MoleculeRecord {
                                id: m.id,
                                position: m.position,
                                velocity: m.velocity,
                            })
                            .collect(),
                    ),
                });
            }
            partitions.push(partition);
        }
        Ok(Self {
            access_mode,
            partitions,
            owned,
            barrier: Barrier::new(ranks),
            reduce: Mutex::new(ReduceState {
                slots: vec![Vec::new(); ranks],
                result: Vec::new(),
            }),
            phases: (0..ranks).map(|_| AtomicU8::new(Phase::Idle as u8)).collect(),
            grid,
        })
    }

    /// Bins `phasespace` into cells and distributes them.
    pub fn from_phasespace(phasespace: &PhaseSpace, grid: CellGrid, access_mode: AccessMode) -> Result<Self> {
        let cells = grid.assign_molecules_to_cells(phasespace)?;
        Self::distribute(cells, grid, access_mode)
    }

    pub fn grid(&self) -> &CellGrid {
        &self.grid
    }

    pub fn access_mode(&self) -> AccessMode {
        self.access_mode
    }

    pub fn ranks(&self) -> usize {
        self.grid.ranks()
    }

    /// Ascending ids of the cells in `rank`'s partition.
    pub fn owned_cells(&self, rank: usize) -> &[usize] {
        &self.owned[rank]
    }

    /// Owning rank of a cell. Pure query.
    pub fn affinity(&self, cell_id: usize) -> Result<usize> {
        self.grid.owner_of_cell(cell_id)
    }

    fn cell(&self, id: usize) -> Result<&SharedCell> {
        let owner = self.grid.owner_of_cell(id)?;
        Ok(&self.partitions[owner][self.grid.local_offset(id)])
    }

    /// Path a rank uses for a cell when it is free to choose.
    pub fn path_for(&self, rank: usize, cell_id: usize) -> AccessPath {
        if self.access_mode == AccessMode::LocalView && self.grid.owner(cell_id) == rank {
            AccessPath::LocalView
        } else {
            AccessPath::Shared
        }
    }

    fn check_local(&self, rank: usize, cell_id: usize) -> Result<usize> {
        let owner = self.affinity(cell_id)?;
        if self.access_mode == AccessMode::SharedOnly {
            return Err(Error::LocalViewDisabled { cell: cell_id });
        }
        if owner != rank {
            return Err(Error::Affinity {
                rank,
                cell: cell_id,
                owner,
            });
        }
        Ok(owner)
    }

    /// Direct read access to a cell the rank owns.
    pub fn local_view(&self, ctx: &RankContext, cell_id: usize) -> Result<CellRead<'_>> {
        let owner = self.check_local(ctx.rank, cell_id)?;
        Ok(CellRead {
            cell_id,
            owner,
            path: AccessPath::LocalView,
            records: self.cell(cell_id)?.records.read(),
        })
    }

    /// Element-wise read access to any cell.
    pub fn shared_view(&self, cell_id: usize) -> Result<CellRead<'_>> {
        Ok(CellRead {
            cell_id,
            owner: self.affinity(cell_id)?,
            path: AccessPath::Shared,
            records: self.cell(cell_id)?.records.read(),
        })
    }

    /// Local view when permitted, shared view otherwise.
    pub fn view(&self, ctx: &RankContext, cell_id: usize) -> Result<CellRead<'_>> {
        match self.path_for(ctx.rank, cell_id) {
            AccessPath::LocalView => self.local_view(ctx, cell_id),
            AccessPath::Shared => self.shared_view(cell_id),
        }
    }

    /// Write access to molecule records; position and velocity updates are
    /// only legal outside the force phase.
    pub fn view_mut(&self, ctx: &RankContext, cell_id: usize) -> Result<CellWrite<'_>> {
        self.check_no_force_phase()?;
        let path = self.path_for(ctx.rank, cell_id);
        Ok(CellWrite {
            cell_id,
            owner: self.affinity(cell_id)?,
            path,
            records: self.cell(cell_id)?.records.write(),
        })
    }

    /// Acquires the lock of one cell.
    pub fn lock_cell(&self, ctx: &mut RankContext, cell_id: usize) -> Result<CellLock<'_>> {
        let cell = self.cell(cell_id)?;
        let guard = cell.forces.lock();
        ctx.counters.lock_acquisitions += 1;
        Ok(CellLock {
            cell_id,
            owner: self.grid.owner(cell_id),
            path: self.path_for(ctx.rank, cell_id),
            forces: guard,
        })
    }

    /// Acquires two distinct cell locks in ascending id order and returns
    /// them as `(lock_a, lock_b)`.
    pub fn lock_pair(&self, ctx: &mut RankContext, a: usize, b: usize) -> Result<(CellLock<'_>, CellLock<'_>)> {
        if a == b {
            return Err(Error::Addressing(format!(
                "lock_pair needs two distinct cells, got {a} twice"
            )));
        }
        if a < b {
            let la = self.lock_cell(ctx, a)?;
            let lb = self.lock_cell(ctx, b)?;
            Ok((la, lb))
        } else {
            let lb = self.lock_cell(ctx, b)?;
            let la = self.lock_cell(ctx, a)?;
            Ok((la, lb))
        }
    }

    /// Force access in an owner-exclusive phase. Takes the lock without
    /// counting it and fails if someone else holds it.
    pub fn exclusive_forces(&self, ctx: &RankContext, cell_id: usize) -> Result<CellLock<'_>> {
        self.check_no_force_phase()?;
        let cell = self.cell(cell_id)?;
        let guard = cell
            .forces
            .try_lock()
            .ok_or_else(|| Error::Phase(format!("cell {cell_id} is locked during an owner-exclusive phase")))?;
        Ok(CellLock {
            cell_id,
            owner: self.grid.owner(cell_id),
            path: self.path_for(ctx.rank, cell_id),
            forces: guard,
        })
    }

    /// Shared-path read of one scalar. Force components are readable only
    /// while nobody holds the cell lock.
    pub fn element_get(&self, ctx: &mut RankContext, cell_id: usize, slot: usize, field: Field) -> Result<f64> {
        check_axis(field.axis())?;
        let owner = self.affinity(cell_id)?;
        let cell = self.cell(cell_id)?;
        let value = match field {
            Field::Position(a) | Field::Velocity(a) => {
                let records = cell.records.read();
                check_slot(cell_id, slot, records.len())?;
                let r = &records[slot];
                if matches!(field, Field::Position(_)) {
                    r.position[a]
                } else {
                    r.velocity[a]
                }
            }
            Field::Force(a) => {
                let forces = cell.forces.try_lock().ok_or(Error::LockRequired { cell: cell_id })?;
                check_slot(cell_id, slot, forces.len())?;
                forces[slot].component(a)
            }
        };
        count(ctx, AccessPath::Shared, owner, 1, 0);
        Ok(value)
    }

    /// Shared-path write of one position or velocity scalar. Force
    /// components must be written through a [`CellLock`].
    pub fn element_put(
        &self,
        ctx: &mut RankContext,
        cell_id: usize,
        slot: usize,
        field: Field,
        value: f64,
    ) -> Result<()> {
        check_axis(field.axis())?;
        let owner = self.affinity(cell_id)?;
        let cell = self.cell(cell_id)?;
        match field {
            Field::Position(a) => {
                self.check_no_force_phase()?;
                let mut records = cell.records.write();
                check_slot(cell_id, slot, records.len())?;
                set_axis(&mut records[slot].position, a, value);
            }
            Field::Velocity(a) => {
                let mut records = cell.records.write();
                check_slot(cell_id, slot, records.len())?;
                set_axis(&mut records[slot].velocity, a, value);
            }
            Field::Force(_) => return Err(Error::LockRequired { cell: cell_id }),
        }
        count(ctx, AccessPath::Shared, owner, 0, 1);
        Ok(())
    }

    /// Copies a cell's positions into a private buffer in one transfer.
    pub fn bulk_get(&self, ctx: &mut RankContext, cell_id: usize) -> Result<PrefetchBuffer> {
        let records = self.cell(cell_id)?.records.read();
        let positions: Vec<Vec3> = records.iter().map(|r| r.position).collect();
        ctx.counters.bulk_gets += 1;
        ctx.counters.bulk_bytes += TRIPLE_BYTES * positions.len() as u64;
        Ok(PrefetchBuffer {
            cell_id,
            forces: vec![Vec3::ZERO; positions.len()],
            positions,
        })
    }

    /// Adds the buffer's accumulated forces onto the locked cell in one
    /// transfer.
    pub fn bulk_put_forces(
        &self,
        ctx: &mut RankContext,
        lock: &mut CellLock<'_>,
        buffer: &PrefetchBuffer,
    ) -> Result<()> {
        if lock.cell_id != buffer.cell_id {
            return Err(Error::Addressing(format!(
                "buffer of cell {} put through the lock of cell {}",
                buffer.cell_id, lock.cell_id
            )));
        }
        if lock.forces.len() != buffer.forces.len() {
            return Err(Error::Staleness {
                cell: buffer.cell_id,
                buffered: buffer.forces.len(),
                current: lock.forces.len(),
            });
        }
        for (slot, f) in lock.forces.iter_mut().zip(&buffer.forces) {
            slot.add(*f);
        }
        ctx.counters.bulk_puts += 1;
        ctx.counters.bulk_bytes += TRIPLE_BYTES * buffer.forces.len() as u64;
        Ok(())
    }

    /// Blocks until every rank has arrived.
    pub fn barrier(&self) {
        self.barrier.wait();
    }

    /// Collective sum; every rank receives the same bits.
    pub fn all_reduce_sum(&self, rank: usize, partial: f64) -> f64 {
        self.all_reduce(rank, &[partial])[0]
    }

    /// Element-wise collective sum, gathered on rank 0 in ascending rank
    /// order and broadcast.
    pub fn all_reduce(&self, rank: usize, partials: &[f64]) -> Vec<f64> {
        self.reduce.lock().slots[rank] = partials.to_vec();
        self.barrier.wait();
        if rank == 0 {
            let mut state = self.reduce.lock();
            let total = sum_in_rank_order(&state.slots);
            state.result = total;
        }
        self.barrier.wait();
        self.reduce.lock().result.clone()
    }

    pub fn enter_phase(&self, rank: usize, phase: Phase) {
        self.phases[rank].store(phase as u8, Ordering::SeqCst);
    }

    pub fn leave_phase(&self, rank: usize) {
        self.phases[rank].store(Phase::Idle as u8, Ordering::SeqCst);
    }

    fn check_no_force_phase(&self) -> Result<()> {
        if let Some(rank) = self
            .phases
            .iter()
            .position(|p| p.load(Ordering::SeqCst) == Phase::Force as u8)
        {
            return Err(Error::Phase(format!(
                "molecule state touched while rank {rank} is in the force phase"
            )));
        }
        Ok(())
    }

    /// Appends a batch of migrating records to `cell_id` under its lock.
    /// A batch into a foreign cell is one bulk put of whole records.
    pub(crate) fn deposit(&self, ctx: &mut RankContext, cell_id: usize, batch: Vec<MoleculeRecord>) -> Result<()> {
        self.check_no_force_phase()?;
        let cell = self.cell(cell_id)?;
        let mut forces = cell.forces.lock();
        ctx.counters.lock_acquisitions += 1;
        let mut records = cell.records.write();
        if records.len() + batch.len() > self.grid.capacity() {
            return Err(Error::Capacity {
                cell: cell_id,
                capacity: self.grid.capacity(),
            });
        }
        let n = batch.len() as u64;
        let owner = self.grid.owner(cell_id);
        if owner == ctx.rank {
            count(ctx, self.path_for(ctx.rank, cell_id), owner, 0, 6 * n);
        } else {
            ctx.counters.bulk_puts += 1;
            ctx.counters.bulk_bytes += n * MOLECULE_RECORD_BYTES;
        }
        let len = forces.len() + batch.len();
        forces.resize(len, FixedVec3::ZERO);
        records.extend(batch);
        Ok(())
    }

    /// Restores ascending id order inside a cell, permuting forces along.
    /// Arrival order after migration depends on thread timing; sorting keeps
    /// every later sweep deterministic.
    pub(crate) fn settle_cell(&self, cell_id: usize) -> Result<()> {
        let cell = self.cell(cell_id)?;
        let mut records = cell.records.write();
        let mut forces = cell.forces.lock();
        if records.windows(2).all(|w| w[0].id < w[1].id) {
            return Ok(());
        }
        let mut order: Vec<usize> = (0..records.len()).collect();
        order.sort_by_key(|&i| records[i].id);
        *records = order.iter().map(|&i| records[i]).collect();
        *forces = order.iter().map(|&i| forces[i]).collect();
        Ok(())
    }

    pub fn molecule_count(&self) -> usize {
        self.partitions.iter().flatten().map(|c| c.records.read().len()).sum()
    }

    /// Molecule count of one cell (no accounting).
    pub fn cell_len(&self, cell_id: usize) -> Result<usize> {
        Ok(self.cell(cell_id)?.records.read().len())
    }

    /// Copies the whole system out, sorted by molecule id. Not a rank
    /// operation; call it only while no rank is running.
    pub fn gather(&self) -> PhaseSpace {
        let mut molecules = Vec::with_capacity(self.molecule_count());
        for cell in self.partitions.iter().flatten() {
            let records = cell.records.read();
            let forces = cell.forces.lock();
            molecules.extend(records.iter().zip(forces.iter()).map(|(r, f)| Molecule {
                id: r.id,
                position: r.position,
                velocity: r.velocity,
                force: f.to_vec3(),
            }));
        }
        molecules.sort_by_key(|m| m.id);
        PhaseSpace {
            molecules,
            domain_lengths: self.grid.domain_lengths(),
        }
    }
}

pub(crate) fn sum_in_rank_order(slots: &[Vec<f64>]) -> Vec<f64> {
    let width = slots.iter().map(Vec::len).max().unwrap_or(0);
    let mut total = vec![0.0; width];
    for slot in slots {
        for (t, v) in total.iter_mut().zip(slot) {
            *t += v;
        }
    }
    total
}

fn set_axis(v: &mut Vec3, axis: usize, value: f64) {
    match axis {
        0 => v.x = value,
        1 => v.y = value,
        _ => v.z = value,
    }
}

/// Read access to one cell's molecule records through a fixed path.
pub struct CellRead<'a> {
    cell_id: usize,
    owner: usize,
    path: AccessPath,
    records: RwLockReadGuard<'a, Vec<MoleculeRecord>>,
}

impl CellRead<'_> {
    pub fn cell_id(&self) -> usize {
        self.cell_id
    }

    pub fn path(&self) -> AccessPath {
        self.path
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn position(&self, ctx: &mut RankContext, slot: usize) -> Vec3 {
        count(ctx, self.path, self.owner, 3, 0);
        self.records[slot].position
    }

    pub fn velocity(&self, ctx: &mut RankContext, slot: usize) -> Vec3 {
        count(ctx, self.path, self.owner, 3, 0);
        self.records[slot].velocity
    }
}

/// Write access to one cell's molecule records.
pub struct CellWrite<'a> {
    cell_id: usize,
    owner: usize,
    path: AccessPath,
    records: RwLockWriteGuard<'a, Vec<MoleculeRecord>>,
}

impl CellWrite<'_> {
    pub fn cell_id(&self) -> usize {
        self.cell_id
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn molecule_id(&self, slot: usize) -> u64 {
        self.records[slot].id
    }

    pub fn position(&self, ctx: &mut RankContext, slot: usize) -> Vec3 {
        count(ctx, self.path, self.owner, 3, 0);
        self.records[slot].position
    }

    pub fn velocity(&self, ctx: &mut RankContext, slot: usize) -> Vec3 {
        count(ctx, self.path, self.owner, 3, 0);
        self.records[slot].velocity
    }

    pub fn set_position(&mut self, ctx: &mut RankContext, slot: usize, p: Vec3) {
        count(ctx, self.path, self.owner, 0, 3);
        self.records[slot].position = p;
    }

    pub fn set_velocity(&mut self, ctx: &mut RankContext, slot: usize, v: Vec3) {
        count(ctx, self.path, self.owner, 0, 3);
        self.records[slot].velocity = v;
    }

    pub(crate) fn records_mut(&mut self) -> &mut Vec<MoleculeRecord> {
        &mut self.records
    }
}

/// A held cell lock, granting access to the cell's force field.
pub struct CellLock<'a> {
    cell_id: usize,
    owner: usize,
    path: AccessPath,
    forces: MutexGuard<'a, Vec<FixedVec3>>,
}

impl CellLock<'_> {
    pub fn cell_id(&self) -> usize {
        self.cell_id
    }

    pub fn len(&self) -> usize {
        self.forces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.forces.is_empty()
    }

    pub fn force(&self, ctx: &mut RankContext, slot: usize) -> Vec3 {
        count(ctx, self.path, self.owner, 3, 0);
        self.forces[slot].to_vec3()
    }

    /// Read-modify-write of one molecule's force.
    pub fn add_force(&mut self, ctx: &mut RankContext, slot: usize, delta: Vec3) {
        count(ctx, self.path, self.owner, 3, 3);
        self.forces[slot].add(delta);
    }

    pub fn set_force(&mut self, ctx: &mut RankContext, slot: usize, f: Vec3) {
        count(ctx, self.path, self.owner, 0, 3);
        self.forces[slot] = FixedVec3::from_vec3(f);
    }

    pub fn element_get(&self, ctx: &mut RankContext, slot: usize, axis: usize) -> Result<f64> {
        check_axis(axis)?;
        check_slot(self.cell_id, slot, self.forces.len())?;
        count(ctx, self.path, self.owner, 1, 0);
        Ok(self.forces[slot].component(axis))
    }

    pub fn element_put(&mut self, ctx: &mut RankContext, slot: usize, axis: usize, value: f64) -> Result<()> {
        check_axis(axis)?;
        check_slot(self.cell_id, slot, self.forces.len())?;
        count(ctx, self.path, self.owner, 0, 1);
        self.forces[slot].set_component(axis, value);
        Ok(())
    }

    pub(crate) fn forces_mut(&mut self) -> &mut Vec<FixedVec3> {
        &mut self.forces
    }
}

/// Private copy of a remote cell's positions plus a zeroed force
/// accumulator of the same length.
#[derive(Clone, Debug, PartialEq)]
pub struct PrefetchBuffer {
    pub cell_id: usize,
    pub positions: Vec<Vec3>,
    pub forces: Vec<Vec3>,
}

impl PrefetchBuffer {
    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn is_zero(&self) -> bool {
        self.forces.iter().all(|f| *f == Vec3::ZERO)
    }
}

//! Velocity Verlet time integration and migration of molecules between
//! cells. Unit mass throughout.
//!
//! `kick` and `drift` are owner-exclusive: a rank only touches its own cells
//! and takes no counted locks. Migration is collective and runs in two halves
//! separated by a barrier: every rank first removes its departing molecules
//! into a private outbox, then deposits each (source, destination) batch
//! under the destination's lock.

use crate::error::{Error, Result};
use crate::pgas::{RankContext, SharedSpace};
use crate::vec3::Vec3;

/// `v += dt_half · f` for every owned molecule.
pub fn kick(ctx: &mut RankContext, space: &SharedSpace, dt_half: f64) -> Result<()> {
    for &cell in space.owned_cells(ctx.rank) {
        let mut records = space.view_mut(ctx, cell)?;
        let forces = space.exclusive_forces(ctx, cell)?;
        for slot in 0..records.len() {
            let v = records.velocity(ctx, slot) + forces.force(ctx, slot) * dt_half;
            records.set_velocity(ctx, slot, v);
        }
    }
    Ok(())
}

/// `p += dt · v` with periodic wrap for every owned molecule.
///
/// Fails before moving anything in a cell if some molecule of that cell
/// would travel a full cell edge or more along an axis.
pub fn drift(ctx: &mut RankContext, space: &SharedSpace, dt: f64) -> Result<()> {
    let edge = space.grid().cell_edge();
    let domain = space.grid().domain_lengths();
    for &cell in space.owned_cells(ctx.rank) {
        let mut records = space.view_mut(ctx, cell)?;
        for slot in 0..records.len() {
            let step = records.velocity(ctx, slot) * dt;
            let displacement = step.max_abs();
            if !displacement.is_finite() || displacement >= edge {
                return Err(Error::Stability {
                    molecule: records.molecule_id(slot),
                    displacement,
                    edge,
                });
            }
            let p = records.position(ctx, slot) + step;
            records.set_position(ctx, slot, wrap(p, domain));
        }
    }
    Ok(())
}

/// Maps `p` into `[0, L)` per axis.
pub fn wrap(p: Vec3, domain: Vec3) -> Vec3 {
    p.zip_map(domain, |x, l| {
        let w = x.rem_euclid(l);
        // a tiny negative x rounds up to exactly l
        if w >= l {
            0.0
        } else {
            w
        }
    })
}

/// First migration half: moves every owned molecule that left its cell into
/// the rank's outbox. Returns how many departed.
pub fn migrate_depart(ctx: &mut RankContext, space: &SharedSpace) -> Result<usize> {
    let grid = space.grid();
    let mut departed = 0;
    for &cell in space.owned_cells(ctx.rank) {
        let mut records = space.view_mut(ctx, cell)?;
        let mut forces = space.exclusive_forces(ctx, cell)?;
        let mut destinations = Vec::with_capacity(records.len());
        for slot in 0..records.len() {
            destinations.push(grid.cell_id_of_position(records.position(ctx, slot))?);
        }
        if destinations.iter().all(|&d| d == cell) {
            continue;
        }
        let records = records.records_mut();
        let forces = forces.forces_mut();
        let mut keep = 0;
        for (slot, &dst) in destinations.iter().enumerate() {
            if dst == cell {
                records.swap(keep, slot);
                forces.swap(keep, slot);
                keep += 1;
            } else {
                ctx.outbox.entry((cell, dst)).or_default().push(records[slot]);
                departed += 1;
            }
        }
        records.truncate(keep);
        forces.truncate(keep);
    }
    Ok(departed)
}

/// Second migration half: deposits every outbox batch into its destination
/// cell. Returns the number of batches.
pub fn migrate_arrive(ctx: &mut RankContext, space: &SharedSpace) -> Result<usize> {
    let outbox = std::mem::take(&mut ctx.outbox);
    let batches = outbox.len();
    for ((_, dst), batch) in outbox {
        space.deposit(ctx, dst, batch)?;
    }
    Ok(batches)
}

/// Puts every owned cell back into ascending molecule-id order.
pub fn settle(ctx: &RankContext, space: &SharedSpace) -> Result<()> {
    for &cell in space.owned_cells(ctx.rank) {
        space.settle_cell(cell)?;
    }
    Ok(())
}

/// All three migration stages for every rank, run one rank after another on
/// the calling thread. Returns the number of molecules moved.
pub fn migrate(space: &SharedSpace, ctxs: &mut [RankContext]) -> Result<usize> {
    let mut moved = 0;
    for ctx in ctxs.iter_mut() {
        moved += migrate_depart(ctx, space)?;
    }
    for ctx in ctxs.iter_mut() {
        migrate_arrive(ctx, space)?;
    }
    for ctx in ctxs.iter() {
        settle(ctx, space)?;
    }
    Ok(moved)
}

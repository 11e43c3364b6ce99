//! Lennard-Jones pair kernel and the three cell-pair strategies.
//!
//! All kernels are called by the rank that owns `cell_a`; `cell_b` is either
//! `cell_a` itself (intra-cell pairs) or one of its forward neighbors. Locks
//! are always taken in ascending cell-id order.

use crate::error::{Error, Result};
use crate::model::{LjParams, Strategy};
use crate::pgas::{CellRead, PrefetchBuffer, RankContext, SharedSpace};
use crate::vec3::Vec3;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PairResult {
    /// Force on the first molecule; the second receives the negation.
    pub force_on_a: Vec3,
    pub potential: f64,
}

impl PairResult {
    pub const NONE: PairResult = PairResult {
        force_on_a: Vec3::ZERO,
        potential: 0.0,
    };

    pub fn force_on_b(&self) -> Vec3 {
        -self.force_on_a
    }
}

/// Nearest periodic image of displacement `d`.
pub fn minimum_image(d: Vec3, domain: Vec3) -> Vec3 {
    d.zip_map(domain, |x, l| x - l * (x / l).round())
}

/// Unshifted 12-6 potential at distance `r`.
pub fn lj_potential(r: f64, params: &LjParams) -> f64 {
    let sr6 = (params.sigma / r).powi(6);
    4.0 * params.epsilon * (sr6 * sr6 - sr6)
}

/// Pair interaction for the displacement `r_vec` from molecule a to b.
pub fn lj_pair(r_vec: Vec3, params: &LjParams) -> Result<PairResult> {
    let r2 = r_vec.norm2();
    if r2 == 0.0 {
        return Err(Error::Singularity);
    }
    if r2 >= params.cutoff * params.cutoff {
        return Ok(PairResult::NONE);
    }
    let sr2 = params.sigma * params.sigma / r2;
    let sr6 = sr2 * sr2 * sr2;
    let sr12 = sr6 * sr6;
    let mut potential = 4.0 * params.epsilon * (sr12 - sr6);
    if params.shift_potential {
        potential -= lj_potential(params.cutoff, params);
    }
    let magnitude = 24.0 * params.epsilon * (2.0 * sr12 - sr6) / r2;
    Ok(PairResult {
        force_on_a: r_vec * -magnitude,
        potential,
    })
}

/// Source of molecule positions inside a kernel.
trait Positions {
    fn len(&self) -> usize;
    fn position(&self, ctx: &mut RankContext, slot: usize) -> Vec3;
}

impl Positions for CellRead<'_> {
    fn len(&self) -> usize {
        CellRead::len(self)
    }

    fn position(&self, ctx: &mut RankContext, slot: usize) -> Vec3 {
        CellRead::position(self, ctx, slot)
    }
}

/// Prefetched positions are private; reading them costs nothing.
impl Positions for [Vec3] {
    fn len(&self) -> usize {
        <[Vec3]>::len(self)
    }

    fn position(&self, _ctx: &mut RankContext, slot: usize) -> Vec3 {
        self[slot]
    }
}

struct Geometry {
    domain: Vec3,
    cutoff2: f64,
}

impl Geometry {
    fn new(space: &SharedSpace, params: &LjParams) -> Self {
        Self {
            domain: space.grid().domain_lengths(),
            cutoff2: params.cutoff * params.cutoff,
        }
    }
}

/// Calls `on_pair(ctx, i, j, d)` for every pair within the cut-off, `d`
/// being the minimum-image displacement from `a[i]` to `b[j]`. With `b =
/// None` the pairs `i < j` of `a` are scanned.
///
/// Positions are re-read in the inner loop, as a kernel dereferencing
/// shared data would.
fn scan_pairs<A, B>(
    ctx: &mut RankContext,
    geo: &Geometry,
    a: &A,
    b: Option<&B>,
    mut on_pair: impl FnMut(&mut RankContext, usize, usize, Vec3) -> Result<()>,
) -> Result<()>
where
    A: Positions + ?Sized,
    B: Positions + ?Sized,
{
    for i in 0..a.len() {
        let pi = a.position(ctx, i);
        let (start, end) = match b {
            Some(b) => (0, b.len()),
            None => (i + 1, a.len()),
        };
        for j in start..end {
            let pj = match b {
                Some(b) => b.position(ctx, j),
                None => a.position(ctx, j),
            };
            let d = minimum_image(pj - pi, geo.domain);
            if d.norm2() < geo.cutoff2 {
                on_pair(ctx, i, j, d)?;
            }
        }
    }
    Ok(())
}

fn check_owned(ctx: &RankContext, space: &SharedSpace, cell_a: usize) -> Result<()> {
    let owner = space.affinity(cell_a)?;
    if owner != ctx.rank {
        return Err(Error::Affinity {
            rank: ctx.rank,
            cell: cell_a,
            owner,
        });
    }
    Ok(())
}

/// Lock per molecule interaction: the written cells are locked and released
/// around every interacting pair.
pub fn cell_pair_lpm(
    ctx: &mut RankContext,
    space: &SharedSpace,
    params: &LjParams,
    cell_a: usize,
    cell_b: usize,
) -> Result<f64> {
    check_owned(ctx, space, cell_a)?;
    let geo = Geometry::new(space, params);
    let mut potential = 0.0;
    let ra = space.view(ctx, cell_a)?;
    if cell_a == cell_b {
        scan_pairs(ctx, &geo, &ra, None::<&CellRead>, |ctx, i, j, d| {
            let pr = lj_pair(d, params)?;
            let mut lock = space.lock_cell(ctx, cell_a)?;
            lock.add_force(ctx, i, pr.force_on_a);
            lock.add_force(ctx, j, pr.force_on_b());
            potential += pr.potential;
            Ok(())
        })?;
    } else {
        let rb = space.view(ctx, cell_b)?;
        scan_pairs(ctx, &geo, &ra, Some(&rb), |ctx, i, j, d| {
            let pr = lj_pair(d, params)?;
            let (mut la, mut lb) = space.lock_pair(ctx, cell_a, cell_b)?;
            la.add_force(ctx, i, pr.force_on_a);
            lb.add_force(ctx, j, pr.force_on_b());
            potential += pr.potential;
            Ok(())
        })?;
    }
    Ok(potential)
}

/// Lock per cell interaction: both cells stay locked while all their pairs
/// are computed.
pub fn cell_pair_lpc(
    ctx: &mut RankContext,
    space: &SharedSpace,
    params: &LjParams,
    cell_a: usize,
    cell_b: usize,
) -> Result<f64> {
    check_owned(ctx, space, cell_a)?;
    let geo = Geometry::new(space, params);
    let mut potential = 0.0;
    if cell_a == cell_b {
        let mut lock = space.lock_cell(ctx, cell_a)?;
        let ra = space.view(ctx, cell_a)?;
        scan_pairs(ctx, &geo, &ra, None::<&CellRead>, |ctx, i, j, d| {
            let pr = lj_pair(d, params)?;
            lock.add_force(ctx, i, pr.force_on_a);
            lock.add_force(ctx, j, pr.force_on_b());
            potential += pr.potential;
            Ok(())
        })?;
    } else {
        let (mut la, mut lb) = space.lock_pair(ctx, cell_a, cell_b)?;
        let ra = space.view(ctx, cell_a)?;
        let rb = space.view(ctx, cell_b)?;
        scan_pairs(ctx, &geo, &ra, Some(&rb), |ctx, i, j, d| {
            let pr = lj_pair(d, params)?;
            la.add_force(ctx, i, pr.force_on_a);
            lb.add_force(ctx, j, pr.force_on_b());
            potential += pr.potential;
            Ok(())
        })?;
    }
    Ok(potential)
}

/// Lock per cell with prefetch and copy-at-once. A remote `cell_b` is read
/// with one bulk get, its force contributions are accumulated privately and
/// merged back with one bulk put; a local `cell_b` takes the plain
/// lock-per-cell path.
pub fn cell_pair_lpc_plus(
    ctx: &mut RankContext,
    space: &SharedSpace,
    params: &LjParams,
    cell_a: usize,
    cell_b: usize,
) -> Result<f64> {
    check_owned(ctx, space, cell_a)?;
    if space.affinity(cell_b)? == ctx.rank {
        return cell_pair_lpc(ctx, space, params, cell_a, cell_b);
    }
    let geo = Geometry::new(space, params);
    let mut buffer: PrefetchBuffer = space.bulk_get(ctx, cell_b)?;
    let mut potential = 0.0;
    {
        let mut la = space.lock_cell(ctx, cell_a)?;
        let ra = space.view(ctx, cell_a)?;
        let remote_forces = &mut buffer.forces;
        scan_pairs(ctx, &geo, &ra, Some(buffer.positions.as_slice()), |ctx, i, j, d| {
            let pr = lj_pair(d, params)?;
            la.add_force(ctx, i, pr.force_on_a);
            remote_forces[j] += pr.force_on_b();
            potential += pr.potential;
            Ok(())
        })?;
    }
    // An all-zero buffer would merge as a no-op.
    if !buffer.is_zero() {
        let mut lb = space.lock_cell(ctx, cell_b)?;
        space.bulk_put_forces(ctx, &mut lb, &buffer)?;
    }
    Ok(potential)
}

pub fn cell_pair(
    strategy: Strategy,
    ctx: &mut RankContext,
    space: &SharedSpace,
    params: &LjParams,
    cell_a: usize,
    cell_b: usize,
) -> Result<f64> {
    match strategy {
        Strategy::Lpm => cell_pair_lpm(ctx, space, params, cell_a, cell_b),
        Strategy::Lpc => cell_pair_lpc(ctx, space, params, cell_a, cell_b),
        Strategy::LpcPlus => cell_pair_lpc_plus(ctx, space, params, cell_a, cell_b),
    }
}

/// One rank's share of the force computation: every owned cell with itself
/// and with its forward neighbors. Returns the potential of the pairs this
/// rank computed.
///
/// Forces must be zero on entry. The sweep is complete once every rank has
/// returned, so callers follow it with a barrier or a collective.
pub fn force_sweep(ctx: &mut RankContext, strategy: Strategy, space: &SharedSpace, params: &LjParams) -> Result<f64> {
    let mut potential = 0.0;
    for &a in space.owned_cells(ctx.rank) {
        potential += cell_pair(strategy, ctx, space, params, a, a)?;
        for &b in space.grid().forward_ids(a) {
            potential += cell_pair(strategy, ctx, space, params, a, b)?;
        }
    }
    Ok(potential)
}

#[cfg(test)]
mod tests;

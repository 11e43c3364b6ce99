//! Linked-cell decomposition: cell indexing, the forward half-stencil and the
//! cell-to-rank distribution policies.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Distribution, Molecule, PhaseSpace, SimConfig, MIN_LATTICE_SPACING};
use crate::vec3::Vec3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CellIndex {
    pub i: usize,
    pub j: usize,
    pub k: usize,
}

impl CellIndex {
    pub const fn new(i: usize, j: usize, k: usize) -> Self {
        Self { i, j, k }
    }

    fn as_array(self) -> [usize; 3] {
        [self.i, self.j, self.k]
    }
}

/// The 13 offsets of the 26-neighborhood that are lexicographically positive.
pub fn forward_offsets() -> impl Iterator<Item = [isize; 3]> {
    (-1..=1isize)
        .flat_map(|di| (-1..=1isize).flat_map(move |dj| (-1..=1isize).map(move |dk| [di, dj, dk])))
        .filter(|&o| o > [0, 0, 0])
}

#[derive(Clone, Debug)]
pub struct CellGrid {
    dims: [usize; 3],
    cell_edge: f64,
    distribution: Distribution,
    ranks: usize,
    capacity: usize,
    forward: Vec<Vec<usize>>,
    owners: Vec<usize>,
    offsets: Vec<usize>,
    owned: Vec<Vec<usize>>,
    process_grid: Option<[usize; 3]>,
}

impl CellGrid {
    pub fn new(dims: [usize; 3], cell_edge: f64, distribution: Distribution, ranks: usize) -> Result<Self> {
        if dims.contains(&0) {
            return Err(Error::Config(format!("grid dimensions must be positive, got {dims:?}")));
        }
        if !(cell_edge.is_finite() && cell_edge > 0.0) {
            return Err(Error::Config(format!("cell edge must be positive, got {cell_edge}")));
        }
        let count: usize = dims.iter().product();
        if ranks == 0 || ranks > count {
            return Err(Error::Config(format!("rank count {ranks} must be in 1..={count}")));
        }
        // Densest packing the generator admits, so a cell can hold any
        // configuration it produces.
        let max_density = MIN_LATTICE_SPACING.powi(-3);
        let capacity = ((max_density * cell_edge.powi(3)).ceil() as usize).max(8);
        let mut grid = Self {
            dims,
            cell_edge,
            distribution,
            ranks,
            capacity,
            forward: Vec::new(),
            owners: Vec::new(),
            offsets: Vec::new(),
            owned: Vec::new(),
            process_grid: None,
        };
        grid.forward = (0..count)
            .map(|id| {
                grid.forward_neighbors(grid.index_unchecked(id))
                    .into_iter()
                    .map(|n| grid.id_unchecked(n))
                    .collect()
            })
            .collect();
        let owners = match distribution {
            Distribution::RoundRobin => (0..count).map(|id| id % ranks).collect(),
            Distribution::Blocked => grid.blocked_owners(),
        };
        grid.set_owners(owners);
        Ok(grid)
    }

    pub fn from_config(config: &SimConfig) -> Result<Self> {
        config.validate()?;
        Self::new(config.grid_dims, config.cell_edge(), config.distribution, config.ranks)
    }

    pub fn with_capacity(mut self, capacity: usize) -> Self {
        self.capacity = capacity;
        self
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn cell_edge(&self) -> f64 {
        self.cell_edge
    }

    pub fn distribution(&self) -> Distribution {
        self.distribution
    }

    pub fn ranks(&self) -> usize {
        self.ranks
    }

    /// Maximum number of molecules one cell holds.
    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn cell_count(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn domain_lengths(&self) -> Vec3 {
        Vec3::new(
            self.dims[0] as f64 * self.cell_edge,
            self.dims[1] as f64 * self.cell_edge,
            self.dims[2] as f64 * self.cell_edge,
        )
    }

    /// Row-major id: `i·ny·nz + j·nz + k`.
    pub fn cell_id_of_index(&self, idx: CellIndex) -> Result<usize> {
        if idx.as_array().iter().zip(self.dims).any(|(&c, d)| c >= d) {
            return Err(Error::IndexOutOfBounds {
                index: idx,
                dims: self.dims,
            });
        }
        Ok(self.id_unchecked(idx))
    }

    pub fn index_of_cell_id(&self, id: usize) -> Result<CellIndex> {
        self.check_id(id)?;
        Ok(self.index_unchecked(id))
    }

    fn id_unchecked(&self, idx: CellIndex) -> usize {
        let [_, ny, nz] = self.dims;
        idx.i * ny * nz + idx.j * nz + idx.k
    }

    fn index_unchecked(&self, id: usize) -> CellIndex {
        let [_, ny, nz] = self.dims;
        CellIndex::new(id / (ny * nz), (id / nz) % ny, id % nz)
    }

    fn check_id(&self, id: usize) -> Result<()> {
        if id >= self.cell_count() {
            return Err(Error::CellIdOutOfRange {
                id,
                count: self.cell_count(),
            });
        }
        Ok(())
    }

    /// Process grid of the blocked policy, or `None` when the rank count
    /// has no factorization that fits the cell grid and contiguous id blocks
    /// are used instead.
    pub fn process_grid(&self) -> Option<[usize; 3]> {
        self.process_grid
    }

    pub fn owner_of_cell(&self, id: usize) -> Result<usize> {
        self.check_id(id)?;
        Ok(self.owner(id))
    }

    pub(crate) fn owner(&self, id: usize) -> usize {
        self.owners[id]
    }

    /// Position of cell `id` inside its owner's partition.
    pub(crate) fn local_offset(&self, id: usize) -> usize {
        self.offsets[id]
    }

    /// Ascending ids of the cells owned by `rank`.
    pub fn owned_cells(&self, rank: usize) -> Vec<usize> {
        self.owned[rank].clone()
    }

    fn set_owners(&mut self, owners: Vec<usize>) {
        let mut owned = vec![Vec::new(); self.ranks];
        let mut offsets = vec![0; owners.len()];
        for (id, &r) in owners.iter().enumerate() {
            offsets[id] = owned[r].len();
            owned[r].push(id);
        }
        self.owners = owners;
        self.offsets = offsets;
        self.owned = owned;
    }

    /// Blocked ownership: every rank gets one box of a `px × py × pz` process
    /// grid, with the factorization of the rank count that leaves the fewest
    /// forward pairs straddling two ranks. Without a fitting factorization,
    /// contiguous blocks of `ceil(cells / ranks)` ids.
    fn blocked_owners(&mut self) -> Vec<usize> {
        let [nx, ny, nz] = self.dims;
        let r = self.ranks;
        let mut best: Option<(usize, [usize; 3], Vec<usize>)> = None;
        for px in (1..=r.min(nx)).rev().filter(|p| r.is_multiple_of(*p)) {
            for py in (1..=(r / px).min(ny)).rev().filter(|p| (r / px).is_multiple_of(*p)) {
                let pz = r / px / py;
                if pz > nz {
                    continue;
                }
                let p = [px, py, pz];
                let owners = box_owners(self.dims, p);
                let remote = self.count_remote(&owners);
                if best.as_ref().is_none_or(|(b, _, _)| remote < *b) {
                    best = Some((remote, p, owners));
                }
            }
        }
        match best {
            Some((_, p, owners)) => {
                self.process_grid = Some(p);
                owners
            }
            None => {
                let block = self.cell_count().div_ceil(r);
                (0..self.cell_count()).map(|id| id / block).collect()
            }
        }
    }

    fn count_remote(&self, owners: &[usize]) -> usize {
        (0..self.cell_count())
            .map(|c| self.forward[c].iter().filter(|&&n| owners[n] != owners[c]).count())
            .sum()
    }

    /// Half stencil of `idx` with periodic wrap.
    ///
    /// With every dimension at least 3 this is the 13 lexicographically
    /// positive offsets. Smaller dimensions alias neighbors onto each other
    /// or onto the cell itself; there the distinct non-self neighbors with a
    /// larger id are returned, which still visits every unordered pair once.
    pub fn forward_neighbors(&self, idx: CellIndex) -> Vec<CellIndex> {
        let wrap = |c: usize, o: isize, n: usize| (c as isize + o).rem_euclid(n as isize) as usize;
        let shift = |o: [isize; 3]| {
            CellIndex::new(
                wrap(idx.i, o[0], self.dims[0]),
                wrap(idx.j, o[1], self.dims[1]),
                wrap(idx.k, o[2], self.dims[2]),
            )
        };
        if self.dims.iter().all(|&d| d >= 3) {
            return forward_offsets().map(shift).collect();
        }
        let own = self.id_unchecked(idx);
        let mut ids: Vec<usize> = forward_offsets()
            .flat_map(|o| [o, [-o[0], -o[1], -o[2]]])
            .map(|o| self.id_unchecked(shift(o)))
            .filter(|&n| n > own)
            .collect();
        ids.sort_unstable();
        ids.dedup();
        ids.into_iter().map(|id| self.index_unchecked(id)).collect()
    }

    /// Precomputed forward neighbor ids of cell `id`.
    pub fn forward_ids(&self, id: usize) -> &[usize] {
        &self.forward[id]
    }

    /// Cell containing `p`; a coordinate on an upper face belongs to the next
    /// cell.
    pub fn cell_of_position(&self, p: Vec3) -> Result<CellIndex> {
        let domain = self.domain_lengths();
        if !crate::model::contained(p, domain) {
            return Err(Error::Containment { position: p, domain });
        }
        let c = |a: usize| ((p[a] / self.cell_edge).floor() as usize).min(self.dims[a] - 1);
        Ok(CellIndex::new(c(0), c(1), c(2)))
    }

    pub fn cell_id_of_position(&self, p: Vec3) -> Result<usize> {
        Ok(self.id_unchecked(self.cell_of_position(p)?))
    }

    /// Bins every molecule into its cell, preserving input order within a
    /// cell.
    pub fn assign_molecules_to_cells(&self, phasespace: &PhaseSpace) -> Result<Vec<Vec<Molecule>>> {
        let mut cells = vec![Vec::new(); self.cell_count()];
        for m in &phasespace.molecules {
            cells[self.cell_id_of_position(m.position)?].push(*m);
        }
        Ok(cells)
    }

    /// Forward cell pairs whose two cells have different owners.
    pub fn remote_pair_count(&self) -> usize {
        self.count_remote(&self.owners)
    }
}

/// Row-major rank of the box containing each cell when dimension `d` is
/// split into `p[d]` near-equal contiguous ranges.
fn box_owners(dims: [usize; 3], p: [usize; 3]) -> Vec<usize> {
    let part = |c: usize, d: usize| c * p[d] / dims[d];
    let mut owners = Vec::with_capacity(dims.iter().product());
    for i in 0..dims[0] {
        for j in 0..dims[1] {
            for k in 0..dims[2] {
                owners.push((part(i, 0) * p[1] + part(j, 1)) * p[2] + part(k, 2));
            }
        }
    }
    owners
}

use thiserror::Error;

use crate::grid::CellIndex;
use crate::vec3::Vec3;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("molecule generation failed: {0}")]
    Generation(String),

    #[error("cell index {index:?} outside grid {dims:?}")]
    IndexOutOfBounds { index: CellIndex, dims: [usize; 3] },

    #[error("cell id {id} outside grid of {count} cells")]
    CellIdOutOfRange { id: usize, count: usize },

    #[error("position {position:?} outside periodic domain {domain:?}")]
    Containment { position: Vec3, domain: Vec3 },

    #[error("rank {rank} has no affinity to cell {cell} (owner {owner})")]
    Affinity { rank: usize, cell: usize, owner: usize },

    #[error("local views are disabled in shared-only access mode (cell {cell})")]
    LocalViewDisabled { cell: usize },

    #[error("addressing error: {0}")]
    Addressing(String),

    #[error("force field of cell {cell} requires holding the cell lock")]
    LockRequired { cell: usize },

    #[error("stale prefetch buffer for cell {cell}: buffer has {buffered} slots, cell holds {current}")]
    Staleness {
        cell: usize,
        buffered: usize,
        current: usize,
    },

    #[error("overlapping molecules (zero separation)")]
    Singularity,

    #[error("molecule {molecule} would move {displacement} in one step, cell edge is {edge}")]
    Stability {
        molecule: u64,
        displacement: f64,
        edge: f64,
    },

    #[error("cell {cell} is full (capacity {capacity})")]
    Capacity { cell: usize, capacity: usize },

    #[error("phase violation: {0}")]
    Phase(String),

    #[error("step {step}: {source}")]
    Step {
        step: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("aborted because another rank failed")]
    Aborted,

    #[error("{molecules} molecules exceed the all-pairs limit of {limit}; reduce density or grid size")]
    OracleLimit { molecules: usize, limit: usize },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

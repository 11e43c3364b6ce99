//! Linked-cell Lennard-Jones molecular dynamics on top of an explicit,
//! instrumented partitioned global address space.
//!
//! Ranks are threads inside one process. Every cell of the linked-cell grid
//! has affinity to exactly one rank, and every access a rank makes to cell
//! data goes through one of the accounted paths of [`pgas::SharedSpace`]:
//! a direct local view, element-wise shared access, or bulk get/put. The
//! counters those paths maintain are what the force strategies
//! ([`Strategy::Lpm`], [`Strategy::Lpc`], [`Strategy::LpcPlus`]) are compared
//! on.

pub mod bench;
mod error;
pub mod grid;
pub mod integrator;
pub mod interaction;
pub mod model;
pub mod oracle;
pub mod pgas;
pub mod report;
pub mod sim;
mod vec3;

pub use error::{Error, Result};
pub use grid::{CellGrid, CellIndex};
pub use model::{AccessMode, Distribution, LjParams, Molecule, PhaseSpace, SimConfig, Strategy};
pub use pgas::{AccessCounters, CounterSnapshot, RankContext, SharedSpace};
pub use sim::{Execution, RunReport, StepObservables, SweepReport};

pub use vec3::Vec3;

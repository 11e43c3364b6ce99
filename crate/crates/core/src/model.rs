//! Domain types, run configuration and phasespace generation.

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution as _, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vec3::Vec3;

/// Reduced temperature the velocities are drawn at.
pub const INITIAL_TEMPERATURE: f64 = 1.0;

/// Lattice spacings below this many sigma are rejected as unphysical overlap.
pub const MIN_LATTICE_SPACING: f64 = 0.5;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LjParams {
    pub sigma: f64,
    pub epsilon: f64,
    pub cutoff: f64,
    pub shift_potential: bool,
}

impl Default for LjParams {
    fn default() -> Self {
        Self {
            sigma: 1.0,
            epsilon: 1.0,
            cutoff: 3.0,
            shift_potential: false,
        }
    }
}

impl LjParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("sigma", self.sigma),
            ("epsilon", self.epsilon),
            ("cutoff", self.cutoff),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

/// Synchronization and communication strategy of the force phase.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Strategy {
    /// One lock round per interacting molecule pair.
    #[serde(rename = "lpm", alias = "LPM")]
    Lpm,
    /// One lock round per cell pair.
    #[serde(rename = "lpc", alias = "LPC")]
    Lpc,
    /// Lock per cell, with remote neighbor cells prefetched and their forces
    /// written back in one bulk transfer.
    #[serde(rename = "lpc+", alias = "LPC_PLUS")]
    LpcPlus,
}

impl Strategy {
    pub const ALL: [Strategy; 3] = [Strategy::Lpm, Strategy::Lpc, Strategy::LpcPlus];

    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::Lpm => "lpm",
            Strategy::Lpc => "lpc",
            Strategy::LpcPlus => "lpc+",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Distribution {
    /// Contiguous blocks of cell IDs per rank.
    #[serde(rename = "blocked", alias = "BLOCKED")]
    Blocked,
    /// Cell `id` lives on rank `id mod ranks`.
    #[serde(rename = "roundrobin", alias = "ROUND_ROBIN")]
    RoundRobin,
}

impl Distribution {
    pub const ALL: [Distribution; 2] = [Distribution::Blocked, Distribution::RoundRobin];

    pub fn as_str(self) -> &'static str {
        match self {
            Distribution::Blocked => "blocked",
            Distribution::RoundRobin => "roundrobin",
        }
    }
}

/// How a rank reaches cells it owns.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum AccessMode {
    /// Owned cells are accessed through a direct local view.
    #[serde(rename = "local", alias = "LOCAL_VIEW")]
    LocalView,
    /// Every access goes through the element-wise shared path, owned or not.
    #[serde(rename = "shared-only", alias = "SHARED_ONLY")]
    SharedOnly,
}

impl AccessMode {
    pub const ALL: [AccessMode; 2] = [AccessMode::LocalView, AccessMode::SharedOnly];

    pub fn as_str(self) -> &'static str {
        match self {
            AccessMode::LocalView => "local",
            AccessMode::SharedOnly => "shared-only",
        }
    }
}

macro_rules! str_enum {
    ($ty:ty, $what:literal, [$($name:literal => $variant:expr),+ $(,)?]) => {
        impl FromStr for $ty {
            type Err = Error;

            fn from_str(s: &str) -> Result<Self> {
                match s.to_ascii_lowercase().as_str() {
                    $($name => Ok($variant),)+
                    other => Err(Error::Config(format!(
                        concat!("unknown ", $what, " '{}' (expected one of: {})"),
                        other,
                        [$($name),+].join(", ")
                    ))),
                }
            }
        }

        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }
    };
}

str_enum!(Strategy, "strategy", ["lpm" => Strategy::Lpm, "lpc" => Strategy::Lpc, "lpc+" => Strategy::LpcPlus]);
str_enum!(Distribution, "distribution", ["blocked" => Distribution::Blocked, "roundrobin" => Distribution::RoundRobin]);
str_enum!(AccessMode, "access mode", ["local" => AccessMode::LocalView, "shared-only" => AccessMode::SharedOnly]);

/// All parameters of one run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub grid_dims: [usize; 3],
    pub density: f64,
    pub lj: LjParams,
    pub dt: f64,
    pub steps: usize,
    pub ranks: usize,
    pub strategy: Strategy,
    pub distribution: Distribution,
    pub seed: u64,
    pub access_mode: AccessMode,
    /// Observables are recorded every `observe_stride` steps.
    pub observe_stride: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            grid_dims: [4, 4, 4],
            density: 0.5,
            lj: LjParams::default(),
            dt: 0.001,
            steps: 10,
            ranks: 1,
            strategy: Strategy::LpcPlus,
            distribution: Distribution::Blocked,
            seed: 42,
            access_mode: AccessMode::LocalView,
            observe_stride: 1,
        }
    }
}

impl SimConfig {
    /// Cells are exactly one cut-off radius wide.
    pub fn cell_edge(&self) -> f64 {
        self.lj.cutoff
    }

    pub fn cell_count(&self) -> usize {
        self.grid_dims.iter().product()
    }

    pub fn domain_lengths(&self) -> Vec3 {
        let e = self.cell_edge();
        Vec3::new(
            self.grid_dims[0] as f64 * e,
            self.grid_dims[1] as f64 * e,
            self.grid_dims[2] as f64 * e,
        )
    }

    pub fn validate(&self) -> Result<()> {
        self.lj.validate()?;
        if self.grid_dims.contains(&0) {
            return Err(Error::Config(format!(
                "grid dimensions must be positive, got {:?}",
                self.grid_dims
            )));
        }
        if !(self.density.is_finite() && self.density > 0.0) {
            return Err(Error::Config(format!("density must be positive, got {}", self.density)));
        }
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::Config(format!("dt must be positive, got {}", self.dt)));
        }
        if self.ranks == 0 {
            return Err(Error::Config("at least one rank is required".into()));
        }
        if self.ranks > self.cell_count() {
            return Err(Error::Config(format!(
                "{} ranks exceed the {} cells of the grid",
                self.ranks,
                self.cell_count()
            )));
        }
        if self.observe_stride == 0 {
            return Err(Error::Config("observe stride must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Molecule {
    pub id: u64,
    pub position: Vec3,
    pub velocity: Vec3,
    pub force: Vec3,
}

impl Molecule {
    pub fn at_rest(id: u64, position: Vec3) -> Self {
        Self {
            id,
            position,
            velocity: Vec3::ZERO,
            force: Vec3::ZERO,
        }
    }
}

/// The complete molecule system.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseSpace {
    pub molecules: Vec<Molecule>,
    pub domain_lengths: Vec3,
}

impl PhaseSpace {
    /// Builds a phasespace from explicit molecules, checking containment and
    /// id uniqueness.
    pub fn from_molecules(domain_lengths: Vec3, molecules: Vec<Molecule>) -> Result<Self> {
        let mut ids: Vec<u64> = molecules.iter().map(|m| m.id).collect();
        ids.sort_unstable();
        if let Some(w) = ids.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::Generation(format!("duplicate molecule id {}", w[0])));
        }
        for m in &molecules {
            if !contained(m.position, domain_lengths) {
                return Err(Error::Containment {
                    position: m.position,
                    domain: domain_lengths,
                });
            }
        }
        Ok(Self {
            molecules,
            domain_lengths,
        })
    }

    pub fn len(&self) -> usize {
        self.molecules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.molecules.is_empty()
    }

    pub fn total_momentum(&self) -> Vec3 {
        self.molecules.iter().map(|m| m.velocity).sum()
    }

    pub fn net_force(&self) -> Vec3 {
        self.molecules.iter().map(|m| m.force).sum()
    }
}

pub(crate) fn contained(p: Vec3, domain: Vec3) -> bool {
    (0..3).all(|a| p[a] >= 0.0 && p[a] < domain[a])
}

/// Allocates an empty phasespace sized for `config`.
pub fn phasespace_init(config: &SimConfig) -> Result<PhaseSpace> {
    config.validate()?;
    let domain_lengths = config.domain_lengths();
    let side = lattice_side(config.density, volume(domain_lengths));
    Ok(PhaseSpace {
        molecules: Vec::with_capacity(side.pow(3)),
        domain_lengths,
    })
}

fn volume(d: Vec3) -> f64 {
    d.x * d.y * d.z
}

/// Largest `m` with `m³ ≤ round(density · volume)`.
pub fn lattice_side(density: f64, volume: f64) -> usize {
    let target = (density * volume).round();
    if target.is_nan() || target < 1.0 {
        return 0;
    }
    let mut m = target.cbrt().round() as usize;
    while m > 0 && (m.pow(3) as f64) > target {
        m -= 1;
    }
    while ((m + 1).pow(3) as f64) <= target {
        m += 1;
    }
    m
}

/// Fills `phasespace` with a simple cubic lattice at the configured density
/// and Maxwell-Boltzmann velocities with zero total momentum.
pub fn grid_generator(mut phasespace: PhaseSpace, config: &SimConfig) -> Result<PhaseSpace> {
    config.validate()?;
    if !phasespace.is_empty() {
        return Err(Error::Generation("phasespace already populated".into()));
    }
    let domain = phasespace.domain_lengths;
    let side = lattice_side(config.density, volume(domain));
    if side == 0 {
        return Ok(phasespace);
    }
    let spacing = domain.map(|l| l / side as f64);
    let min_spacing = spacing.x.min(spacing.y).min(spacing.z);
    if min_spacing < MIN_LATTICE_SPACING * config.lj.sigma {
        return Err(Error::Generation(format!(
            "lattice spacing {min_spacing} is below {MIN_LATTICE_SPACING} sigma"
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let scale = INITIAL_TEMPERATURE.sqrt();
    let mut sample = || -> f64 {
        let v: f64 = StandardNormal.sample(&mut rng);
        v * scale
    };

    let mut id = 0u64;
    for ix in 0..side {
        for iy in 0..side {
            for iz in 0..side {
                let position = Vec3::new(
                    (ix as f64 + 0.5) * spacing.x,
                    (iy as f64 + 0.5) * spacing.y,
                    (iz as f64 + 0.5) * spacing.z,
                );
                let velocity = Vec3::new(sample(), sample(), sample());
                phasespace.molecules.push(Molecule {
                    id,
                    position,
                    velocity,
                    force: Vec3::ZERO,
                });
                id += 1;
            }
        }
    }

    let n = phasespace.len() as f64;
    let drift = phasespace.total_momentum() * (1.0 / n);
    for m in &mut phasespace.molecules {
        m.velocity -= drift;
    }
    Ok(phasespace)
}

/// `Σ ½|v|²` with unit mass.
pub fn kinetic_energy(phasespace: &PhaseSpace) -> f64 {
    phasespace.molecules.iter().map(|m| 0.5 * m.velocity.norm2()).sum()
}

/// Convenience: `grid_generator(phasespace_init(config))`.
pub fn generate(config: &SimConfig) -> Result<PhaseSpace> {
    grid_generator(phasespace_init(config)?, config)
}

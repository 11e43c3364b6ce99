//! All-pairs reference evaluation.
//!
//! Deliberately shares nothing with the cell machinery: every pair of the
//! system is visited under the minimum-image convention.

use crate::model::{LjParams, PhaseSpace};
use crate::vec3::Vec3;

#[derive(Clone, Debug, PartialEq)]
pub struct DirectForces {
    /// Indexed like `PhaseSpace::molecules`.
    pub forces: Vec<Vec3>,
    pub potential: f64,
}

/// O(N²) forces and potential.
pub fn all_pairs(phasespace: &PhaseSpace, params: &LjParams) -> DirectForces {
    let n = phasespace.len();
    let l = phasespace.domain_lengths;
    let rc2 = params.cutoff * params.cutoff;
    let s2 = params.sigma * params.sigma;
    let eps = params.epsilon;
    let shift = if params.shift_potential {
        let s6 = (s2 / rc2).powi(3);
        4.0 * eps * (s6 * s6 - s6)
    } else {
        0.0
    };

    let mut forces = vec![Vec3::ZERO; n];
    let mut potential = 0.0;
    for i in 0..n {
        let pi = phasespace.molecules[i].position;
        for j in (i + 1)..n {
            let pj = phasespace.molecules[j].position;
            let mut d = [0.0; 3];
            for (a, slot) in d.iter_mut().enumerate() {
                let x = pi[a] - pj[a];
                let len = l[a];
                *slot = x - len * (x / len).round();
            }
            let r2 = d[0] * d[0] + d[1] * d[1] + d[2] * d[2];
            if r2 >= rc2 {
                continue;
            }
            let inv6 = (s2 / r2).powi(3);
            potential += 4.0 * eps * (inv6 * inv6 - inv6) - shift;
            // d points from j to i, so a positive coefficient pushes i away.
            let coef = 24.0 * eps * (2.0 * inv6 * inv6 - inv6) / r2;
            let f = Vec3::new(d[0] * coef, d[1] * coef, d[2] * coef);
            forces[i] += f;
            forces[j] -= f;
        }
    }
    DirectForces { forces, potential }
}

/// Smallest force scale a deviation is measured against, in units of ε/σ.
/// A perfect lattice has reference forces at rounding level; without the
/// floor its relative deviation would be noise divided by noise.
pub const FORCE_SCALE_FLOOR: f64 = 1.0;

/// Largest component deviation, relative to the largest reference
/// component (but at least [`FORCE_SCALE_FLOOR`]).
pub fn max_relative_deviation(actual: &[Vec3], reference: &[Vec3]) -> f64 {
    assert_eq!(actual.len(), reference.len());
    let scale = reference.iter().map(|f| f.max_abs()).fold(FORCE_SCALE_FLOOR, f64::max);
    let worst = actual
        .iter()
        .zip(reference)
        .map(|(a, r)| (*a - *r).max_abs())
        .fold(0.0, f64::max);
    worst / scale
}

/// `|a − b| / |b|`, or the absolute difference when `b` is zero.
pub fn relative_difference(a: f64, b: f64) -> f64 {
    if b == 0.0 {
        (a - b).abs()
    } else {
        ((a - b) / b).abs()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Molecule;

    #[test]
    fn two_molecules_at_the_minimum() {
        let r = 2f64.powf(1.0 / 6.0);
        let ps = PhaseSpace::from_molecules(
            Vec3::splat(9.0),
            vec![
                Molecule::at_rest(0, Vec3::new(1.0, 1.0, 1.0)),
                Molecule::at_rest(1, Vec3::new(1.0 + r, 1.0, 1.0)),
            ],
        )
        .unwrap();
        let out = all_pairs(&ps, &LjParams::default());
        assert!((out.potential + 1.0).abs() < 1e-14);
        assert!(out.forces[0].max_abs() < 1e-13);
    }

    #[test]
    fn pairs_across_the_boundary_use_the_nearest_image() {
        let ps = PhaseSpace::from_molecules(
            Vec3::splat(9.0),
            vec![
                Molecule::at_rest(0, Vec3::new(0.5, 1.0, 1.0)),
                Molecule::at_rest(1, Vec3::new(8.5, 1.0, 1.0)),
            ],
        )
        .unwrap();
        let out = all_pairs(&ps, &LjParams::default());
        // separation 1 through the boundary: u = 0, |F| = 24, pushing 0 up.
        assert!(out.potential.abs() < 1e-14);
        assert!((out.forces[0].x - 24.0).abs() < 1e-12);
        assert!((out.forces[1].x + 24.0).abs() < 1e-12);
    }

    #[test]
    fn deviation_metrics() {
        let r = [Vec3::new(2.0, 0.0, 0.0), Vec3::new(0.0, -4.0, 0.0)];
        let a = [Vec3::new(2.0, 0.0, 0.0), Vec3::new(0.0, -4.0, 0.4)];
        assert!((max_relative_deviation(&a, &r) - 0.1).abs() < 1e-15);
        let tiny = [Vec3::new(1e-15, 0.0, 0.0)];
        assert_eq!(max_relative_deviation(&[Vec3::ZERO], &tiny), 1e-15);
        assert_eq!(relative_difference(1.0, 0.0), 1.0);
        assert_eq!(relative_difference(3.0, 2.0), 0.5);
    }
}

use proptest::prelude::*;

use super::*;
use crate::grid::CellGrid;
use crate::model::{AccessMode, Distribution, Molecule, PhaseSpace, SimConfig, Strategy};
use crate::oracle;
use crate::pgas::AccessCounters;

fn lj() -> LjParams {
    LjParams::default()
}

#[test]
fn pair_at_the_minimum_has_no_force() {
    let r = 2f64.powf(1.0 / 6.0);
    let pr = lj_pair(Vec3::new(r, 0.0, 0.0), &lj()).unwrap();
    assert!(pr.force_on_a.max_abs() < 1e-12, "{:?}", pr.force_on_a);
    assert!((pr.potential + 1.0).abs() < 1e-14);
}

#[test]
fn pairs_at_or_beyond_the_cutoff_vanish() {
    for r in [3.0, 3.0 + 1e-12, 4.5] {
        let pr = lj_pair(Vec3::new(0.0, r, 0.0), &lj()).unwrap();
        assert_eq!(pr, PairResult::NONE);
    }
    let shifted = LjParams {
        shift_potential: true,
        ..lj()
    };
    assert_eq!(lj_pair(Vec3::new(0.0, 0.0, 3.0), &shifted).unwrap(), PairResult::NONE);
}

#[test]
fn pair_at_sigma_is_repulsive_with_magnitude_24() {
    let pr = lj_pair(Vec3::new(1.0, 0.0, 0.0), &lj()).unwrap();
    assert_eq!(pr.potential, 0.0);
    assert_eq!(pr.force_on_a, Vec3::new(-24.0, 0.0, 0.0));
    assert_eq!(pr.force_on_b(), Vec3::new(24.0, 0.0, 0.0));
    // -du/dr at r = 1 by central differences
    let h = 1e-6;
    let dudr = (lj_potential(1.0 + h, &lj()) - lj_potential(1.0 - h, &lj())) / (2.0 * h);
    assert!((-dudr - 24.0).abs() < 1e-6 * 24.0);
}

#[test]
fn zero_separation_is_an_error() {
    assert!(matches!(lj_pair(Vec3::ZERO, &lj()), Err(Error::Singularity)));
}

#[test]
fn shifted_potential_is_continuous_at_the_cutoff() {
    let p = LjParams {
        shift_potential: true,
        ..lj()
    };
    let just_inside = lj_pair(Vec3::new(3.0 - 1e-9, 0.0, 0.0), &p).unwrap();
    assert!(just_inside.potential.abs() < 1e-10);
    let unshifted = lj_pair(Vec3::new(1.5, 0.0, 0.0), &lj()).unwrap();
    let shifted = lj_pair(Vec3::new(1.5, 0.0, 0.0), &p).unwrap();
    assert!((unshifted.potential - shifted.potential - lj_potential(3.0, &lj())).abs() < 1e-15);
    assert_eq!(unshifted.force_on_a, shifted.force_on_a);
}

proptest! {
    #[test]
    fn force_is_the_gradient_of_the_potential(
        r in 0.85f64..2.95,
        theta in 0.0f64..std::f64::consts::PI,
        phi in 0.0f64..(2.0 * std::f64::consts::PI),
    ) {
        let dir = Vec3::new(theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos());
        let d = dir * r;
        let pr = lj_pair(d, &lj()).unwrap();
        let h = 1e-6;
        let u = |v: Vec3| lj_potential(v.norm(), &lj());
        let axes = [Vec3::new(h, 0.0, 0.0), Vec3::new(0.0, h, 0.0), Vec3::new(0.0, 0.0, h)];
        // Moving b by +h along an axis is moving a by -h: F_a = +du/d(r_vec).
        let grad = Vec3::new(
            (u(d + axes[0]) - u(d - axes[0])) / (2.0 * h),
            (u(d + axes[1]) - u(d - axes[1])) / (2.0 * h),
            (u(d + axes[2]) - u(d - axes[2])) / (2.0 * h),
        );
        let scale = pr.force_on_a.norm().max(1e-3);
        prop_assert!((grad - pr.force_on_a).max_abs() <= 1e-6 * scale, "{grad:?} vs {:?}", pr.force_on_a);
    }

    #[test]
    fn minimum_image_is_the_nearest_copy(x in -20.0f64..20.0, l in 3.0f64..15.0) {
        let d = minimum_image(Vec3::new(x, 0.0, 0.0), Vec3::splat(l)).x;
        prop_assert!(d.abs() <= 0.5 * l + 1e-12);
        let k = ((x - d) / l).round();
        prop_assert!((x - d - k * l).abs() < 1e-9);
    }
}

/// 4×4×4 grid, two ranks owning the i < 2 and i ≥ 2 halves.
fn two_rank_space(cells: &[(usize, Vec<Vec3>)], mode: AccessMode) -> SharedSpace {
    let grid = CellGrid::new([4, 4, 4], 3.0, Distribution::Blocked, 2).unwrap();
    let mut id = 0;
    let mut molecules = Vec::new();
    for (_, positions) in cells {
        for &p in positions {
            molecules.push(Molecule::at_rest(id, p));
            id += 1;
        }
    }
    let ps = PhaseSpace::from_molecules(grid.domain_lengths(), molecules).unwrap();
    let space = SharedSpace::from_phasespace(&ps, grid, mode).unwrap();
    for (cell, positions) in cells {
        assert_eq!(space.cell_len(*cell).unwrap(), positions.len());
    }
    space
}

const A: usize = 21; // (1,1,1), rank 0
const B: usize = 37; // (2,1,1), rank 1

/// Four molecules in A and five in B, all 20 cross pairs within the cut-off.
fn facing_cells() -> Vec<(usize, Vec<Vec3>)> {
    let a = (0..4)
        .map(|s| Vec3::new(5.2 + 0.2 * s as f64, 3.5 + 0.3 * s as f64, 4.0))
        .collect();
    let b = (0..5)
        .map(|s| Vec3::new(6.1 + 0.2 * s as f64, 3.6 + 0.25 * s as f64, 4.5))
        .collect();
    vec![(A, a), (B, b)]
}

#[test]
fn lpm_on_a_remote_pair() {
    let space = two_rank_space(&facing_cells(), AccessMode::LocalView);
    assert_eq!(space.affinity(B).unwrap(), 1);
    let mut ctx = RankContext::new(0);
    cell_pair_lpm(&mut ctx, &space, &lj(), A, B).unwrap();
    let c = ctx.counters;
    assert_eq!(c.lock_acquisitions, 40);
    assert_eq!(c.remote_element_writes, 60);
    // inner-loop position reads of B plus the read half of each force update
    assert_eq!(c.remote_element_reads, 3 * 20 + 60);
    assert_eq!(c.local_element_writes, 60);
    assert_eq!(c.bulk_transfers(), 0);
}

#[test]
fn lpm_intra_cell_locks_once_per_interacting_pair() {
    let n = 6;
    let positions: Vec<Vec3> = (0..n).map(|s| Vec3::new(3.2 + 0.4 * s as f64, 4.0, 4.0)).collect();
    let space = two_rank_space(&[(A, positions)], AccessMode::LocalView);
    let mut ctx = RankContext::new(0);
    cell_pair_lpm(&mut ctx, &space, &lj(), A, A).unwrap();
    // every candidate pair (n(n-1)/2 = 15) is within the cut-off
    assert_eq!(ctx.counters.lock_acquisitions, 15);
    assert_eq!(ctx.counters.remote_element_accesses(), 0);
    assert_eq!(ctx.counters.local_element_writes, 15 * 6);
}

#[test]
fn empty_neighbor_costs_no_locks_under_lpm() {
    let cells = vec![(A, facing_cells()[0].1.clone())];
    let space = two_rank_space(&cells, AccessMode::LocalView);
    let mut ctx = RankContext::new(0);
    assert_eq!(cell_pair_lpm(&mut ctx, &space, &lj(), A, B).unwrap(), 0.0);
    assert_eq!(ctx.counters.lock_acquisitions, 0);
}

#[test]
fn lpc_locks_per_cell_pair() {
    let space = two_rank_space(&facing_cells(), AccessMode::LocalView);
    let mut ctx = RankContext::new(0);
    cell_pair_lpc(&mut ctx, &space, &lj(), A, B).unwrap();
    assert_eq!(ctx.counters.lock_acquisitions, 2);
    assert_eq!(ctx.counters.remote_element_writes, 60);
    cell_pair_lpc(&mut ctx, &space, &lj(), A, A).unwrap();
    assert_eq!(ctx.counters.lock_acquisitions, 3);
    // an empty pair still takes both locks
    let mut ctx = RankContext::new(0);
    cell_pair_lpc(&mut ctx, &space, &lj(), 0, 16).unwrap();
    assert_eq!(ctx.counters.lock_acquisitions, 2);
}

#[test]
fn lpc_plus_prefetches_remote_cells() {
    let space = two_rank_space(&facing_cells(), AccessMode::LocalView);
    let mut ctx = RankContext::new(0);
    cell_pair_lpc_plus(&mut ctx, &space, &lj(), A, B).unwrap();
    let c = ctx.counters;
    assert_eq!(c.bulk_gets, 1);
    assert_eq!(c.bulk_puts, 1);
    assert_eq!(c.bulk_bytes, 2 * 5 * crate::pgas::TRIPLE_BYTES);
    assert_eq!(c.remote_element_reads, 0);
    assert_eq!(c.remote_element_writes, 0);
    assert_eq!(c.shared_path_ops, 0);
}

#[test]
fn lpc_plus_takes_the_lpc_path_for_local_pairs() {
    let space = two_rank_space(&facing_cells(), AccessMode::LocalView);
    let mut plus = RankContext::new(0);
    cell_pair_lpc_plus(&mut plus, &space, &lj(), A, 5).unwrap();
    let mut lpc = RankContext::new(0);
    cell_pair_lpc(&mut lpc, &space, &lj(), A, 5).unwrap();
    assert_eq!(plus.counters, lpc.counters);
    assert_eq!(plus.counters.bulk_transfers(), 0);
}

#[test]
fn lpc_plus_skips_the_put_without_interactions() {
    let far_b = vec![Vec3::new(8.9, 5.9, 5.9)];
    let near_a = vec![Vec3::new(3.1, 3.1, 3.1)];
    let space = two_rank_space(&[(A, near_a), (B, far_b)], AccessMode::LocalView);
    let mut ctx = RankContext::new(0);
    cell_pair_lpc_plus(&mut ctx, &space, &lj(), A, B).unwrap();
    assert_eq!(ctx.counters.bulk_gets, 1);
    assert_eq!(ctx.counters.bulk_puts, 0);
}

#[test]
fn kernels_require_ownership_of_the_first_cell() {
    let space = two_rank_space(&facing_cells(), AccessMode::LocalView);
    let mut ctx = RankContext::new(0);
    for s in Strategy::ALL {
        assert!(matches!(
            cell_pair(s, &mut ctx, &space, &lj(), B, B),
            Err(Error::Affinity { .. })
        ));
    }
}

#[test]
fn overlapping_molecules_surface_as_singularity() {
    let p = Vec3::new(4.0, 4.0, 4.0);
    let grid = CellGrid::new([4, 4, 4], 3.0, Distribution::Blocked, 1).unwrap();
    let mut cells = vec![Vec::new(); 64];
    cells[grid.cell_id_of_position(p).unwrap()] = vec![Molecule::at_rest(0, p), Molecule::at_rest(1, p)];
    let space = SharedSpace::distribute(cells, grid, AccessMode::LocalView).unwrap();
    let mut ctx = RankContext::new(0);
    assert!(matches!(
        force_sweep(&mut ctx, Strategy::Lpc, &space, &lj()),
        Err(Error::Singularity)
    ));
}

fn sweep_all_ranks(space: &SharedSpace, strategy: Strategy, params: &LjParams) -> (f64, Vec<AccessCounters>) {
    let mut potential = 0.0;
    let mut counters = Vec::new();
    for r in 0..space.ranks() {
        let mut ctx = RankContext::new(r);
        potential += force_sweep(&mut ctx, strategy, space, params).unwrap();
        counters.push(ctx.counters);
    }
    (potential, counters)
}

#[test]
fn strategies_agree_with_each_other_and_the_oracle() {
    let config = SimConfig {
        grid_dims: [4, 4, 5],
        density: 0.4,
        ..SimConfig::default()
    };
    let mut ps = crate::model::generate(&config).unwrap();
    // jitter off the lattice so the pair distances vary
    for (n, m) in ps.molecules.iter_mut().enumerate() {
        let t = n as f64;
        m.position += Vec3::new((t * 0.37).sin(), (t * 0.11).cos(), (t * 0.73).sin()) * 0.3;
        m.position = m.position.zip_map(ps.domain_lengths, |x, l| x.rem_euclid(l));
    }
    let reference = oracle::all_pairs(&ps, &config.lj);
    for ranks in [1, 3] {
        for dist in Distribution::ALL {
            for strategy in Strategy::ALL {
                let grid = CellGrid::new(config.grid_dims, 3.0, dist, ranks).unwrap();
                let space = SharedSpace::from_phasespace(&ps, grid, AccessMode::LocalView).unwrap();
                let (potential, _) = sweep_all_ranks(&space, strategy, &config.lj);
                let out = space.gather();
                let forces: Vec<Vec3> = out.molecules.iter().map(|m| m.force).collect();
                let dev = oracle::max_relative_deviation(&forces, &reference.forces);
                assert!(dev < 1e-10, "{strategy} {dist} {ranks}: {dev}");
                assert!(oracle::relative_difference(potential, reference.potential) < 1e-12);
                assert!(out.net_force().max_abs() < 1e-9);
            }
        }
    }
}

#[test]
fn lpc_lock_count_law() {
    let config = SimConfig {
        grid_dims: [3, 4, 3],
        density: 0.3,
        ..SimConfig::default()
    };
    let ps = crate::model::generate(&config).unwrap();
    for ranks in [1, 2, 5] {
        let grid = CellGrid::new(config.grid_dims, 3.0, Distribution::Blocked, ranks).unwrap();
        let cells = grid.cell_count() as u64;
        let space = SharedSpace::from_phasespace(&ps, grid, AccessMode::LocalView).unwrap();
        let (_, counters) = sweep_all_ranks(&space, Strategy::Lpc, &config.lj);
        let total: u64 = counters.iter().map(|c| c.lock_acquisitions).sum();
        assert_eq!(total, 2 * 13 * cells + cells);
    }
}

#[test]
fn shared_only_mode_routes_owned_cells_through_the_element_path() {
    let config = SimConfig {
        grid_dims: [3, 3, 3],
        density: 0.3,
        ..SimConfig::default()
    };
    let ps = crate::model::generate(&config).unwrap();
    let mut by_mode = Vec::new();
    for mode in AccessMode::ALL {
        let grid = CellGrid::new(config.grid_dims, 3.0, Distribution::Blocked, 1).unwrap();
        let space = SharedSpace::from_phasespace(&ps, grid, mode).unwrap();
        let (_, counters) = sweep_all_ranks(&space, Strategy::Lpc, &config.lj);
        by_mode.push(counters[0]);
    }
    let (local, shared) = (by_mode[0], by_mode[1]);
    assert_eq!(local.shared_path_ops, 0);
    assert_eq!(
        shared.shared_path_ops,
        shared.local_element_reads + shared.local_element_writes
    );
    assert_eq!(local.local_element_reads, shared.local_element_reads);
    assert_eq!(shared.remote_element_accesses(), 0);
}

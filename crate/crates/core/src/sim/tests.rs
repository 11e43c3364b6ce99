use super::*;
use crate::model::{Distribution, Molecule};
use crate::oracle;

fn small(ranks: usize, strategy: Strategy) -> SimConfig {
    SimConfig {
        grid_dims: [4, 4, 4],
        density: 0.5,
        steps: 3,
        ranks,
        strategy,
        ..SimConfig::default()
    }
}

#[test]
fn zero_steps_record_only_the_initial_state() {
    let config = SimConfig {
        steps: 0,
        ..small(2, Strategy::Lpc)
    };
    let report = run(&config).unwrap();
    assert_eq!(report.observables.len(), 1);
    let o = report.observables[0];
    assert_eq!(o.step, 0);
    let ps = model::generate(&config).unwrap();
    let k = model::kinetic_energy(&ps);
    assert!(oracle::relative_difference(o.kinetic, k) < 1e-12);
    let direct = oracle::all_pairs(&ps, &config.lj);
    assert!(oracle::relative_difference(o.potential, direct.potential) < 1e-12);
    assert_eq!(o.total, o.kinetic + o.potential);
    assert!(oracle::relative_difference(o.temperature, 2.0 * k / (3.0 * ps.len() as f64)) < 1e-12);
}

#[test]
fn one_record_per_step_plus_the_initial_one() {
    let report = run(&SimConfig {
        steps: 10,
        ..small(2, Strategy::LpcPlus)
    })
    .unwrap();
    let steps: Vec<usize> = report.observables.iter().map(|o| o.step).collect();
    assert_eq!(steps, (0..=10).collect::<Vec<_>>());
}

#[test]
fn stride_thins_the_record_but_keeps_the_last_step() {
    let config = SimConfig {
        steps: 7,
        observe_stride: 3,
        ..small(1, Strategy::Lpc)
    };
    let steps: Vec<usize> = run(&config).unwrap().observables.iter().map(|o| o.step).collect();
    assert_eq!(steps, vec![0, 3, 6, 7]);
}

#[test]
fn pair_at_the_minimum_stays_at_rest() {
    let r = 2f64.powf(1.0 / 6.0);
    let config = SimConfig {
        grid_dims: [3, 3, 3],
        steps: 100,
        ranks: 2,
        ..SimConfig::default()
    };
    let molecules = vec![
        Molecule::at_rest(0, Vec3::new(4.0, 4.5, 4.5)),
        Molecule::at_rest(1, Vec3::new(4.0 + r, 4.5, 4.5)),
    ];
    let ps = PhaseSpace::from_molecules(config.domain_lengths(), molecules).unwrap();
    let report = run_phasespace(&config, &ps, Execution::Threaded).unwrap();
    assert_eq!(report.observables.len(), 101);
    let e0 = report.observables[0].total;
    assert!((e0 + 1.0).abs() < 1e-14);
    for o in &report.observables {
        assert!((o.total - e0).abs() < 1e-14, "step {}: {}", o.step, o.total);
    }
    for (m, start) in report.final_state.molecules.iter().zip(&ps.molecules) {
        assert!(m.velocity.max_abs() < 1e-12);
        assert!((m.position - start.position).max_abs() < 1e-12);
    }
}

#[test]
fn potential_is_independent_of_rank_count_and_strategy() {
    let reference = run(&SimConfig {
        steps: 1,
        ..small(1, Strategy::Lpc)
    })
    .unwrap();
    let u = reference.observables[1].potential;
    for ranks in [1, 2, 4] {
        for strategy in Strategy::ALL {
            let report = run(&SimConfig {
                steps: 1,
                ..small(ranks, strategy)
            })
            .unwrap();
            let v = report.observables[1].potential;
            assert!(
                oracle::relative_difference(u, v) < 1e-12,
                "{ranks} {strategy}: {u} vs {v}"
            );
        }
    }
}

#[test]
fn threaded_and_sequential_drivers_agree_bitwise() {
    for strategy in Strategy::ALL {
        let config = SimConfig {
            distribution: Distribution::RoundRobin,
            ..small(3, strategy)
        };
        let a = run_with(&config, Execution::Threaded).unwrap();
        let b = run_with(&config, Execution::Sequential).unwrap();
        assert_eq!(a.observables, b.observables);
        assert_eq!(a.counters, b.counters);
        assert_eq!(a.force_counters, b.force_counters);
        assert_eq!(a.final_state, b.final_state);
    }
}

#[test]
fn repeated_runs_are_identical() {
    let config = small(4, Strategy::Lpm);
    let a = run(&config).unwrap();
    let b = run(&config).unwrap();
    assert_eq!(a.observables, b.observables);
    assert_eq!(a.counters, b.counters);
}

#[test]
fn molecules_are_conserved() {
    let report = run(&SimConfig {
        steps: 20,
        ..small(4, Strategy::LpcPlus)
    })
    .unwrap();
    let n = model::generate(&small(4, Strategy::LpcPlus)).unwrap().len();
    assert_eq!(report.final_state.len(), n);
    assert_eq!(report.molecules, n);
}

#[test]
fn stability_error_carries_the_step() {
    let config = SimConfig {
        dt: 0.5,
        steps: 50,
        ..small(2, Strategy::Lpc)
    };
    for execution in [Execution::Threaded, Execution::Sequential] {
        match run_with(&config, execution) {
            Err(Error::Step { step, source }) => {
                assert!(step >= 1);
                assert!(
                    matches!(*source, Error::Stability { .. } | Error::Singularity),
                    "{source}"
                );
            }
            other => panic!("expected a step error, got {other:?}"),
        }
    }
}

#[test]
fn force_counters_are_part_of_the_totals() {
    let report = run(&small(2, Strategy::Lpc)).unwrap();
    let (all, force) = (report.counters.totals, report.force_counters.totals);
    assert!(force.lock_acquisitions > 0);
    assert!(force.local_element_reads <= all.local_element_reads);
    assert!(force.remote_element_writes <= all.remote_element_writes);
}

#[test]
fn zero_forces_clears_owned_forces_only() {
    let config = small(2, Strategy::Lpc);
    let ps = model::generate(&config).unwrap();
    let grid = CellGrid::from_config(&config).unwrap();
    let space = SharedSpace::from_phasespace(&ps, grid, AccessMode::LocalView).unwrap();
    for r in 0..2 {
        force_sweep(&mut RankContext::new(r), Strategy::Lpc, &space, &config.lj).unwrap();
    }
    let swept = space.gather();
    zero_forces(&mut RankContext::new(0), &space).unwrap();
    let after = space.gather();
    for (a, s) in after.molecules.iter().zip(&swept.molecules) {
        let owner = space
            .affinity(space.grid().cell_id_of_position(a.position).unwrap())
            .unwrap();
        let expected = if owner == 0 { Vec3::ZERO } else { s.force };
        assert_eq!(a.force, expected);
        assert_eq!((a.position, a.velocity), (s.position, s.velocity));
    }
    zero_forces(&mut RankContext::new(0), &space).unwrap();
    assert_eq!(space.gather(), after);
}

#[test]
fn evaluate_forces_matches_the_oracle() {
    let config = small(1, Strategy::Lpc);
    let ps = model::generate(&config).unwrap();
    let direct = oracle::all_pairs(&ps, &config.lj);
    for execution in [Execution::Threaded, Execution::Sequential] {
        let grid = CellGrid::new(config.grid_dims, 3.0, Distribution::Blocked, 4).unwrap();
        let sweep = evaluate_forces(
            &ps,
            grid,
            Strategy::LpcPlus,
            AccessMode::LocalView,
            &config.lj,
            execution,
        )
        .unwrap();
        let forces: Vec<Vec3> = sweep.state.molecules.iter().map(|m| m.force).collect();
        assert!(oracle::max_relative_deviation(&forces, &direct.forces) < 1e-10);
        assert!(oracle::relative_difference(sweep.potential, direct.potential) < 1e-12);
        assert_eq!(sweep.counters.totals.remote_element_reads, 0);
    }
}

use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::beamform::{beamform_map, MapInfo};
use crate::geometry::{make_ring_array, make_scan_grid, Medium, Point3, ScanGrid, Source, SourceScene};
use crate::spectra::{build_steering_set, synthesize_csm, NoShear};

fn random_steering(rng: &mut ChaCha8Rng, m0: usize, n: usize) -> SteeringSet {
    let grid = ScanGrid::new(Point3::ORIGIN, Point3::X, Point3::Y, 1.0, n, 1).unwrap();
    let vectors: Vec<Vec<Complex64>> = (0..n)
        .map(|_| {
            (0..m0)
                .map(|_| Complex64::from_polar(rng.gen_range(0.5..1.5), rng.gen_range(-3.2..3.2)))
                .collect()
        })
        .collect();
    SteeringSet::from_vectors(grid, 1000.0, &vectors).unwrap()
}

/// `e_n^T G_{n'} conj(e_n) / m0^2` with `G_{n'} = g g^H`, `g = 1 / e_{n'}`,
/// evaluated with explicit matrix products.
fn double_sum_entry(steer: &SteeringSet, n: usize, np: usize) -> f64 {
    let e = steer.vector(n);
    let g: Vec<Complex64> = steer.vector(np).iter().map(|c| Complex64::new(1.0, 0.0) / c).collect();
    let m0 = e.len();
    let mut big_g = vec![Complex64::new(0.0, 0.0); m0 * m0];
    for i in 0..m0 {
        for j in 0..m0 {
            big_g[i * m0 + j] = g[i] * g[j].conj();
        }
    }
    let mut total = Complex64::new(0.0, 0.0);
    for i in 0..m0 {
        let mut v = Complex64::new(0.0, 0.0);
        for j in 0..m0 {
            v += big_g[i * m0 + j] * e[j].conj();
        }
        total += e[i] * v;
    }
    assert!(total.im.abs() < 1e-9 * total.re.abs().max(1.0));
    total.re / (m0 * m0) as f64
}

#[test]
fn diagonal_is_unity() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let steer = random_steering(&mut rng, 6, 9);
    let a = build_propagator(&steer, &PropagatorFlags::plain()).unwrap();
    for n in 0..9 {
        assert!((a.entry(n, n) - 1.0).abs() < 1e-12);
        for np in 0..9 {
            assert!(a.entry(n, np) >= 0.0);
        }
    }
}

#[test]
fn duplicate_steering_vectors_couple_fully() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let v: Vec<Complex64> = (0..4).map(|_| Complex64::from_polar(1.0, rng.gen_range(0.0..6.0))).collect();
    let grid = ScanGrid::new(Point3::ORIGIN, Point3::X, Point3::Y, 1.0, 2, 1).unwrap();
    let steer = SteeringSet::from_vectors(grid, 500.0, &[v.clone(), v]).unwrap();
    let a = build_propagator(&steer, &PropagatorFlags::plain()).unwrap();
    assert!((a.entry(0, 1) - 1.0).abs() < 1e-12);
    assert!((a.entry(1, 0) - 1.0).abs() < 1e-12);
}

#[test]
fn closed_form_matches_double_sum() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let steer = random_steering(&mut rng, 3, 4);
    let a = build_propagator(&steer, &PropagatorFlags::plain()).unwrap();
    for n in 0..4 {
        for np in 0..4 {
            let oracle = double_sum_entry(&steer, n, np);
            assert!((a.entry(n, np) - oracle).abs() <= 1e-12 * oracle.abs().max(1.0));
        }
    }
}

#[test]
fn zero_steering_component_is_rejected() {
    let grid = ScanGrid::new(Point3::ORIGIN, Point3::X, Point3::Y, 1.0, 1, 1).unwrap();
    let v = vec![Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)];
    let steer = SteeringSet::from_vectors(grid, 500.0, &[v]).unwrap();
    assert!(matches!(
        build_propagator(&steer, &PropagatorFlags::plain()),
        Err(DamasError::ZeroSteering { mic: 1, point: 0 })
    ));
}

#[test]
fn weighted_and_diagonal_removed_keep_unit_diagonal() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let steer = random_steering(&mut rng, 5, 6);
    let flags = PropagatorFlags {
        weights: Some(vec![0.0, 1.0, 2.0, 0.5, 1.0]),
        diagonal_removed: true,
    };
    let a = build_propagator(&steer, &flags).unwrap();
    for n in 0..6 {
        assert!((a.entry(n, n) - 1.0).abs() < 1e-12);
    }
}

struct Setup {
    grid: crate::geometry::ScanGrid,
    array: crate::geometry::MicArray,
    steer: SteeringSet,
}

fn small_setup(f: f64) -> Setup {
    let array = make_ring_array(&[6, 10], &[0.4, 1.0]).unwrap();
    let grid = make_scan_grid(Point3::new(0.1, -0.1, 2.0), 1.0, 1.0, 4).unwrap();
    let steer = build_steering_set(&grid, &array, f, &Medium::default(), &NoShear).unwrap();
    Setup { grid, array, steer }
}

fn spike_map(grid: &crate::geometry::ScanGrid, spikes: &[(usize, f64)]) -> SourceMap {
    let mut values = vec![0.0; grid.len()];
    for &(i, v) in spikes {
        values[i] = v;
    }
    SourceMap::new(*grid, values, MapKind::Damas, MapInfo { frequency: 1.0, ..MapInfo::default() }).unwrap()
}

#[test]
fn forward_map_basics() {
    let s = small_setup(900.0);
    let a = build_propagator(&s.steer, &PropagatorFlags::plain()).unwrap();
    let zero = forward_map(&a, &spike_map(&s.grid, &[])).unwrap();
    assert!(zero.values().iter().all(|v| *v == 0.0));
    let y = forward_map(&a, &spike_map(&s.grid, &[(7, 1.0)])).unwrap();
    for n in 0..s.grid.len() {
        assert_eq!(y.values()[n], a.entry(n, 7));
    }
    assert!((y.values()[7] - 1.0).abs() < 1e-12);
}

#[test]
fn forward_map_matches_beamforming_the_synthesized_scene() {
    let f = 900.0;
    let s = small_setup(f);
    let a = build_propagator(&s.steer, &PropagatorFlags::plain()).unwrap();
    let scene = SourceScene::new(vec![
        Source::new(s.grid.point(3), f, 1.5).unwrap(),
        Source::new(s.grid.point(18), f, 0.7).unwrap(),
    ]);
    let csm = synthesize_csm(&scene, &s.array, f, &Medium::default(), &NoShear).unwrap();
    let direct = beamform_map(&csm, &s.steer).unwrap();
    let via_a = forward_map(&a, &spike_map(&s.grid, &[(3, 2.25), (18, 0.49)])).unwrap();
    for (p, q) in direct.values().iter().zip(via_a.values()) {
        assert!((p - q).abs() <= 1e-10 * p.abs().max(1e-3), "{p} vs {q}");
    }
}

#[test]
fn identity_system_solves_in_one_iteration() {
    let grid = make_scan_grid(Point3::ORIGIN, 1.0, 1.0, 2).unwrap();
    let a = PropagatorMatrix::identity(grid.len());
    let y = spike_map(&grid, &[(0, 3.0), (4, 1.0), (8, 0.25)]);
    let config = SolverConfig {
        max_iterations: 1,
        ..SolverConfig::default()
    };
    let r = damas_solve(&a, &y, &config).unwrap();
    assert_eq!(r.map.values(), y.values());
    assert_eq!(r.iterations_run, 1);
}

#[test]
fn single_spike_is_recovered() {
    let s = small_setup(1500.0);
    let a = build_propagator(&s.steer, &PropagatorFlags::plain()).unwrap();
    let truth = spike_map(&s.grid, &[(12, 4.0)]);
    let y = forward_map(&a, &truth).unwrap();
    let r = damas_solve(&a, &y, &SolverConfig::iterations(1000)).unwrap();
    let err = r
        .map
        .values()
        .iter()
        .zip(truth.values())
        .fold(0.0_f64, |m, (p, q)| m.max((p - q).abs()));
    assert!(err <= 1e-6 * 4.0, "{err}");
}

#[test]
fn matrix_free_is_bitwise_identical() {
    let s = small_setup(1100.0);
    let flags = PropagatorFlags::plain();
    let a = build_propagator(&s.steer, &flags).unwrap();
    let y = forward_map(&a, &spike_map(&s.grid, &[(2, 1.0), (20, 0.3)])).unwrap();
    for init in [Init::Zero, Init::Beamform] {
        let config = SolverConfig {
            max_iterations: 37,
            init,
            record_history: true,
            ..SolverConfig::default()
        };
        let dense = damas_solve(&a, &y, &config).unwrap();
        let free = solve_matrix_free(&s.steer, &flags, &y, &config).unwrap();
        let bits = |r: &SolveResult| r.map.values().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&dense), bits(&free));
        assert_eq!(dense.history.len(), dense.iterations_run);
        assert_eq!(dense.iterations_run, free.iterations_run);
    }
    let zero = spike_map(&s.grid, &[]);
    let r = solve_matrix_free(&s.steer, &flags, &zero, &SolverConfig::iterations(3)).unwrap();
    assert!(r.map.values().iter().all(|v| *v == 0.0));
}

#[test]
fn checkpoints_match_independent_runs() {
    let s = small_setup(800.0);
    let a = build_propagator(&s.steer, &PropagatorFlags::plain()).unwrap();
    let y = forward_map(&a, &spike_map(&s.grid, &[(6, 1.0), (13, 2.0)])).unwrap();
    let snaps = damas_solve_checkpoints(&a, &y, &SolverConfig::default(), &[3, 10, 25]).unwrap();
    for snap in &snaps {
        let fresh = damas_solve(&a, &y, &SolverConfig::iterations(snap.iterations_run)).unwrap();
        assert_eq!(fresh.map.values(), snap.map.values());
    }
    assert_eq!(snaps[2].map.info().iterations, Some(25));
}

#[test]
fn solver_rejects_bad_inputs() {
    let grid = make_scan_grid(Point3::ORIGIN, 1.0, 1.0, 1).unwrap();
    let mut bad = PropagatorMatrix::identity(4).data().to_vec();
    bad[5] = 0.5;
    let bad = PropagatorMatrix::from_dense(4, bad).unwrap();
    let y = spike_map(&grid, &[(0, 1.0)]);
    assert!(matches!(
        damas_solve(&bad, &y, &SolverConfig::default()),
        Err(DamasError::Diagonal { index: 1, .. })
    ));
    let a = PropagatorMatrix::identity(4);
    assert_eq!(
        damas_solve(&a, &y, &SolverConfig::iterations(0)),
        Err(DamasError::MaxIterations)
    );
    let mut nan = y.clone();
    nan.values_mut()[2] = f64::NAN;
    assert!(matches!(
        damas_solve(&a, &nan, &SolverConfig::default()),
        Err(DamasError::NotFinite { .. })
    ));
    let mut blowup = PropagatorMatrix::identity(4).data().to_vec();
    blowup[1] = -1e300;
    let blowup = PropagatorMatrix::from_dense(4, blowup).unwrap();
    let y = spike_map(&grid, &[(0, 1e300), (1, 1e300)]);
    let config = SolverConfig {
        init: Init::Beamform,
        ..SolverConfig::default()
    };
    assert!(matches!(
        damas_solve(&blowup, &y, &config),
        Err(DamasError::NotFinite { iteration: 1, .. })
    ));
}

#[test]
fn tolerance_stops_early() {
    let s = small_setup(1500.0);
    let a = build_propagator(&s.steer, &PropagatorFlags::plain()).unwrap();
    let y = forward_map(&a, &spike_map(&s.grid, &[(12, 1.0)])).unwrap();
    let config = SolverConfig {
        max_iterations: 10_000,
        tolerance: 1e-6,
        ..SolverConfig::default()
    };
    let r = damas_solve(&a, &y, &config).unwrap();
    assert!(r.converged);
    assert!(r.iterations_run < 10_000);
}

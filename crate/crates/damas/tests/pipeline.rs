use std::path::{Path, PathBuf};

use damas::config::*;
use damas::formats::{read_csm_csv, read_map_csv, read_propagator};
use damas::pipeline::run;
use damas::report::{JobState, RunStatus};
use damas_core::prelude::*;
use proptest::prelude::*;

fn scene_config(dir: &Path) -> RunConfig {
    std::fs::write(dir.join("scene.txt"), "0.1 0 1.5 1000 1\n-0.1 0.05 1.5 2000 0.5\n").unwrap();
    RunConfig {
        input: InputSpec {
            scene: Some("scene.txt".into()),
            ..Default::default()
        },
        array: Some(ArraySpec {
            rings: Some(RingSpec {
                mics: vec![8, 8],
                radii: vec![0.25, 0.5],
            }),
            ..Default::default()
        }),
        grid: Some(GridSpec {
            center: [0.0, 0.0, 1.5],
            width: 0.6,
            height: 0.4,
            intervals: 12,
        }),
        processing: ProcessingSpec {
            frequencies: vec![1000.0, 2000.0],
            ..Default::default()
        },
        solver: SolverSpec {
            checkpoints: vec![10, 30],
            ..Default::default()
        },
        ..Default::default()
    }
}

fn read_status(dir: &Path) -> RunStatus {
    serde_json::from_str(&std::fs::read_to_string(dir.join("status.json")).unwrap()).unwrap()
}

#[test]
fn every_format_is_written_and_readable() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = scene_config(dir.path());
    cfg.processing.diagonal_removal = true;
    cfg.output.formats = vec![
        OutputFormat::Csv,
        OutputFormat::Png,
        OutputFormat::Json,
        OutputFormat::Csm,
        OutputFormat::Propagator,
        OutputFormat::History,
    ];
    let out = run(&cfg, dir.path()).unwrap();
    assert_eq!(out.exit_code, 0);
    assert!(out.status.all_ok());
    assert_eq!(read_status(&out.directory), out.status);

    let job = out.directory.join("1000hz");
    for f in [
        "beamform.csv",
        "beamform.png",
        "beamform_dr.csv",
        "beamform_dr.png",
        "damas_10.csv",
        "damas_30.png",
        "history.csv",
        "csm.csv",
        "propagator.bin",
    ] {
        assert!(job.join(f).is_file(), "{f} missing");
    }

    let maps = out.maps[0].as_ref().unwrap();
    let bf = read_map_csv(&job.join("beamform.csv")).unwrap();
    for (a, b) in bf.values().iter().zip(maps.beamform.values()) {
        assert!((a - b).abs() <= 1e-12 * b.abs().max(1e-30), "{a} vs {b}");
    }

    let csm = read_csm_csv(&job.join("csm.csv"), 1000.0).unwrap();
    assert_eq!(csm.dim(), 16);
    assert!(csm.is_hermitian(1e-12));

    let (rows, cols, a) = read_propagator(&job.join("propagator.bin")).unwrap();
    assert_eq!((rows, cols), (117, 117));
    for i in 0..rows {
        assert!((a[i * cols + i] - 1.0).abs() < 1e-9);
    }

    let history = std::fs::read_to_string(job.join("history.csv")).unwrap();
    assert_eq!(history.lines().count(), 31);
}

#[test]
fn pool_size_does_not_change_results() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = scene_config(dir.path());
    cfg.output.jobs = 1;
    cfg.output.directory = "one".into();
    let a = run(&cfg, dir.path()).unwrap();
    cfg.output.jobs = 4;
    cfg.output.directory = "four".into();
    let b = run(&cfg, dir.path()).unwrap();
    for (x, y) in a.maps.iter().zip(&b.maps) {
        let (x, y) = (x.as_ref().unwrap(), y.as_ref().unwrap());
        assert_eq!(x.beamform, y.beamform);
        assert_eq!(x.damas, y.damas);
    }
    for f in ["1000hz/damas_30.csv", "2000hz/beamform.png"] {
        assert_eq!(
            std::fs::read(a.directory.join(f)).unwrap(),
            std::fs::read(b.directory.join(f)).unwrap()
        );
    }
}

#[test]
fn matrix_free_matches_dense() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = scene_config(dir.path());
    let dense = run(&cfg, dir.path()).unwrap();
    cfg.solver.matrix_free = true;
    cfg.output.directory = "mf".into();
    let free = run(&cfg, dir.path()).unwrap();
    for (x, y) in dense.maps.iter().zip(&free.maps) {
        assert_eq!(x.as_ref().unwrap().damas, y.as_ref().unwrap().damas);
    }
}

#[test]
fn failed_band_leaves_other_bands_complete() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = scene_config(dir.path());
    std::fs::write(dir.path().join("scene.txt"), "0.1 0 1.5 800 1\n-0.1 0 1.5 1000 1\n").unwrap();
    cfg.processing.frequencies.clear();
    // 200 Hz bins: several low bands hold none
    cfg.processing.bands = Some([100.0, 1000.0]);
    cfg.processing.block_size = 256;
    cfg.synthesis.sample_rate = 51_200.0;
    cfg.synthesis.duration = 0.1;
    cfg.output.jobs = 3;
    let out = run(&cfg, dir.path()).unwrap();
    assert_eq!(out.exit_code, damas::error::EXIT_FAILURE);

    let status = read_status(&out.directory);
    let nominal: Vec<f64> = status.jobs.iter().map(|j| j.frequency_hz).collect();
    assert_eq!(
        nominal,
        [100.0, 125.0, 160.0, 200.0, 250.0, 315.0, 400.0, 500.0, 630.0, 800.0, 1000.0]
    );
    let bands = third_octave_bands(100.0, 1000.0);
    let empty: Vec<bool> = bands
        .iter()
        .map(|b| !(0..=128).any(|k| b.contains(k as f64 * 200.0)))
        .collect();
    assert_eq!(empty.iter().filter(|e| **e).count(), 6);
    for (job, &failed) in status.jobs.iter().zip(&empty) {
        assert_eq!(job.status == JobState::Failed, failed, "{job:?}");
        if failed {
            assert!(job.error.as_deref().unwrap().contains("no frequency bin"));
            assert!(job.outputs.is_empty());
        } else {
            assert!(!job.outputs.is_empty());
            for f in &job.outputs {
                assert!(out.directory.join(f).is_file(), "{f}");
            }
        }
    }
    // the 800 Hz tone dominates its own band
    let k = status.jobs.iter().position(|j| j.frequency_hz == 800.0).unwrap();
    let bf = &out.maps[k].as_ref().unwrap().beamform;
    let peak = bf.grid().point(bf.peak().0);
    assert!(peak.x > 0.0, "{peak:?}");
}

#[test]
fn timeseries_input_matches_scene_synthesis() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = scene_config(dir.path());
    let array = cfg.array(dir.path()).unwrap();
    let scene = damas::formats::read_scene(&dir.path().join("scene.txt")).unwrap();
    // 1000 Hz falls exactly on a bin at this rate and block size
    let ts = damas::timeseries::synthesize_timeseries(
        &scene,
        &array,
        &Medium::default(),
        &damas::timeseries::SynthesisConfig {
            sample_rate: 32_000.0,
            frames: 32_000,
            self_noise: 0.0,
            seed: 3,
        },
    )
    .unwrap();
    damas::formats::write_timeseries(&dir.path().join("rec.bin"), &ts).unwrap();
    cfg.input = InputSpec {
        timeseries: Some(PathBuf::from("rec.bin")),
        ..Default::default()
    };
    cfg.processing.frequencies = vec![1000.0];
    cfg.processing.block_size = 1024;
    cfg.solver.enabled = false;
    let out = run(&cfg, dir.path()).unwrap();
    let bf = &out.maps[0].as_ref().unwrap().beamform;

    let grid = cfg.grid().unwrap();
    let medium = Medium::default();
    let steer = build_steering_set(&grid, &array, 1000.0, &medium, &NoShear).unwrap();
    let csm = synthesize_csm(&scene, &array, 1000.0, &medium, &NoShear).unwrap();
    let expected = beamform_map(&csm, &steer).unwrap();
    assert_eq!(bf.peak().0, expected.peak().0);
    let err = (bf.peak().1 / expected.peak().1).log10().abs() * 10.0;
    assert!(err < 0.05, "{err} dB");
}

fn path_strategy() -> impl Strategy<Value = PathBuf> {
    "[a-z]{1,8}(/[a-z]{1,8})?\\.(txt|csv|bin)".prop_map(PathBuf::from)
}

fn finite() -> impl Strategy<Value = f64> {
    (-1e6..1e6f64).prop_filter("finite", |v| v.is_finite())
}

prop_compose! {
    fn run_config()(
        which in 0..3usize,
        name in prop::sample::select(damas_core::scenarios::SCENARIO_NAMES.to_vec()),
        path in path_strategy(),
        array in prop::option::of((0..3usize, path_strategy(), 0.01..5.0f64, prop::collection::vec(1..20usize, 1..4))),
        grid in prop::option::of((finite(), finite(), 0.1..100.0f64, 0.1..50.0f64, 0.0..50.0f64, 1..500usize)),
        freqs in prop::collection::vec(1.0..1e5f64, 0..4),
        bands in prop::option::of((10.0..1e4f64, 1.0..4.0f64)),
        flags in any::<(bool, bool, bool, bool)>(),
        block in 4..16u32,
        overlap in 0.0..0.99f64,
        synth in (1e3..1e5f64, 0.01..10.0f64, 0.0..1.0f64, any::<u64>()),
        checkpoints in prop::collection::btree_set(1..10_000usize, 1..5),
        tolerance in 0.0..1.0f64,
        floors in (1.0..80.0f64, 1.0..80.0f64, 1.0..80.0f64),
        formats in prop::collection::vec(prop::sample::select(vec![
            OutputFormat::Csv, OutputFormat::Png, OutputFormat::Json,
            OutputFormat::Csm, OutputFormat::Propagator, OutputFormat::History,
        ]), 0..6),
        jobs in 0..16usize,
        beamform_init in any::<bool>(),
    ) -> RunConfig {
        let input = match which {
            0 => InputSpec { scenario: Some(name.to_string()), ..Default::default() },
            1 => InputSpec { scene: Some(path.clone()), ..Default::default() },
            _ => InputSpec { timeseries: Some(path.clone()), ..Default::default() },
        };
        let array = array.map(|(k, p, r, mics)| match k {
            0 => ArraySpec { file: Some(p), ..Default::default() },
            1 => ArraySpec { radius: Some(r), ..Default::default() },
            _ => ArraySpec {
                rings: Some(RingSpec {
                    radii: (0..mics.len()).map(|i| r * (i + 1) as f64).collect(),
                    mics,
                }),
                ..Default::default()
            },
        });
        RunConfig {
            input,
            array,
            grid: grid.map(|(x, y, z, w, h, n)| GridSpec { center: [x, y, z], width: w, height: h, intervals: n }),
            medium: MediumSpec { sound_speed: 300.0 + overlap * 100.0, reference_pressure: 2e-5 },
            processing: ProcessingSpec {
                frequencies: freqs,
                bands: bands.map(|(lo, k)| [lo, lo * k]),
                weighting: flags.0,
                diagonal_removal: flags.1,
                block_size: 1 << block,
                overlap,
            },
            synthesis: SynthesisSpec { sample_rate: synth.0, duration: synth.1, self_noise: synth.2, seed: synth.3 },
            solver: SolverSpec {
                enabled: flags.2,
                checkpoints: checkpoints.into_iter().collect(),
                tolerance,
                init: if beamform_init { InitSpec::Beamform } else { InitSpec::Zero },
                matrix_free: flags.3,
            },
            output: OutputSpec {
                directory: path,
                beamform_floor_db: floors.0,
                damas_floor_db: floors.1,
                scenario_floor_db: floors.2,
                formats,
                jobs,
            },
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn config_round_trips_through_toml(cfg in run_config()) {
        let text = cfg.to_toml().unwrap();
        let back = RunConfig::parse(&text).unwrap();
        prop_assert_eq!(&back, &cfg, "{}", text);
        prop_assert_eq!(back.to_toml().unwrap(), text);
    }
}

//! Runs a validated configuration end to end.
//!
//! Independent frequencies or bands ("jobs") run on a thread pool of
//! `output.jobs` workers. Each job writes into its own subdirectory named
//! after its label (`1000hz`, `band_1250hz`):
//!
//! | file               | written when                                  |
//! |--------------------|-----------------------------------------------|
//! | `beamform.*`       | always                                        |
//! | `beamform_dr.*`    | `processing.diagonal_removal`                 |
//! | `damas_<k>.*`      | `solver.enabled`, one per checkpoint `k`      |
//! | `history.csv`      | format `history` and the solver ran           |
//! | `csm.csv`          | format `csm`                                  |
//! | `propagator.bin`   | format `propagator` and the dense solver ran  |
//!
//! `*` is `csv` and/or `png` per `output.formats`. A failing job does not
//! stop the others; `status.json` records what each job did.

use std::path::{Path, PathBuf};

use damas_core::prelude::*;
use damas_core::scenarios::{evaluate, run_scenario_with, Backend, MetricOutcome, Scenario, ScenarioRun};
use rayon::prelude::*;

use crate::config::{Input, OutputFormat, RunConfig};
use crate::error::{Error, Result, EXIT_FAILURE};
use crate::formats::{
    read_scene, read_timeseries, write_csm_csv, write_history_csv, write_map_csv, write_propagator,
    TimeSeries,
};
use crate::render::write_heatmap;
use crate::report::{metric_records, write_json, JobState, JobStatus, MetricRecord, RunStatus};
use crate::timeseries::{band_csms, bin_csms, synthesize_timeseries, SynthesisConfig, WelchConfig};

/// In-memory results of one job.
#[derive(Debug, Clone)]
pub struct JobMaps {
    pub beamform: SourceMap,
    pub beamform_dr: Option<SourceMap>,
    /// One per checkpoint; empty when the solver is disabled.
    pub damas: Vec<SolveResult>,
}

#[derive(Debug)]
pub struct RunOutput {
    pub directory: PathBuf,
    pub status: RunStatus,
    /// Aligned with `status.jobs`; `None` for failed jobs.
    pub maps: Vec<Option<JobMaps>>,
    /// Present for scenario input.
    pub scenario: Option<ScenarioReport>,
    /// Exit code of the most severe job failure, 0 if none failed.
    pub exit_code: i32,
}

#[derive(Debug)]
pub struct ScenarioReport {
    pub scenario: Scenario,
    pub run: ScenarioRun,
    pub outcomes: Vec<MetricOutcome>,
    pub records: Vec<MetricRecord>,
    pub outputs: Vec<String>,
}

impl ScenarioReport {
    pub fn all_pass(&self) -> bool {
        self.outcomes.iter().all(|o| o.pass)
    }
}

fn map_outputs(
    cfg: &RunConfig,
    dir: &Path,
    stem: &str,
    map: &SourceMap,
    floor_db: f64,
    overlay: &[Vec<Point3>],
    p_ref: f64,
    written: &mut Vec<String>,
) -> Result<()> {
    if cfg.output.wants(OutputFormat::Csv) {
        let name = format!("{stem}.csv");
        write_map_csv(&dir.join(&name), map, p_ref)?;
        written.push(name);
    }
    if cfg.output.wants(OutputFormat::Png) {
        let name = format!("{stem}.png");
        write_heatmap(&dir.join(&name), map, floor_db, overlay)?;
        written.push(name);
    }
    Ok(())
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// Runs a scenario and writes its maps (all at `output.scenario_floor_db`,
/// with the scenario overlay), the final solver history and `metrics.json`
/// into `dir`. `checkpoints` defaults to the scenario's own.
pub fn scenario_outputs(
    s: &Scenario,
    checkpoints: Option<&[usize]>,
    backend: Backend,
    cfg: &RunConfig,
    dir: &Path,
) -> Result<ScenarioReport> {
    create_dir(dir)?;
    let run = run_scenario_with(s, backend, checkpoints, true)?;
    let outcomes = evaluate(s, &run)?;
    let records = metric_records(s, &outcomes);
    let p_ref = s.medium.reference_pressure();
    let floor = cfg.output.scenario_floor_db;
    let mut outputs = Vec::new();
    map_outputs(cfg, dir, "beamform", &run.beamform, floor, &s.overlay, p_ref, &mut outputs)?;
    for (k, r) in run.requested.iter().zip(&run.checkpoints) {
        map_outputs(cfg, dir, &format!("damas_{k}"), &r.map, floor, &s.overlay, p_ref, &mut outputs)?;
    }
    if let Some(last) = run.checkpoints.last() {
        write_history_csv(&dir.join("history.csv"), &last.history, p_ref)?;
        outputs.push("history.csv".into());
    }
    write_json(&dir.join("metrics.json"), &records)?;
    outputs.push("metrics.json".into());
    Ok(ScenarioReport {
        scenario: s.clone(),
        run,
        outcomes,
        records,
        outputs,
    })
}

/// Where a job's CSM comes from.
enum Source<'a> {
    Csm(CrossSpectralMatrix),
    Bin(&'a TimeSeries, usize),
    Band(&'a TimeSeries, ThirdOctaveBand),
}

struct Job<'a> {
    label: String,
    frequency: f64,
    source: Source<'a>,
}

struct Context<'a> {
    cfg: &'a RunConfig,
    array: MicArray,
    grid: ScanGrid,
    medium: Medium,
    welch: WelchConfig,
    dir: &'a Path,
}

fn frequency_label(f: f64) -> String {
    format!("{f}hz")
}

fn job_csm(ctx: &Context, source: Source) -> Result<CrossSpectralMatrix> {
    match source {
        Source::Csm(c) => Ok(c),
        Source::Bin(ts, k) => Ok(bin_csms(ts, &ctx.welch, &[k])?.remove(0)),
        Source::Band(ts, band) => Ok(band_csms(ts, &ctx.welch, &[band])?.remove(0)),
    }
}

fn run_job(ctx: &Context, job: Job) -> (JobStatus, Option<JobMaps>, i32) {
    let label = job.label.clone();
    let frequency = job.frequency;
    let dir = ctx.dir.join(&label);
    let mut written = Vec::new();
    let result = process_job(ctx, job.source, &dir, &mut written);
    let outputs = written.into_iter().map(|w| format!("{label}/{w}")).collect();
    match result {
        Ok(maps) => (
            JobStatus {
                label,
                frequency_hz: frequency,
                status: JobState::Ok,
                error: None,
                outputs,
            },
            Some(maps),
            0,
        ),
        Err(e) => (
            JobStatus {
                label,
                frequency_hz: frequency,
                status: JobState::Failed,
                error: Some(e.to_string()),
                outputs,
            },
            None,
            e.exit_code(),
        ),
    }
}

fn process_job(ctx: &Context, source: Source, dir: &Path, written: &mut Vec<String>) -> Result<JobMaps> {
    let cfg = ctx.cfg;
    let p_ref = ctx.medium.reference_pressure();
    let mut csm = job_csm(ctx, source)?;
    if cfg.processing.weighting {
        csm = apply_weighting(&csm, ctx.array.weights())?;
    }
    create_dir(dir)?;
    if cfg.output.wants(OutputFormat::Csm) {
        write_csm_csv(&dir.join("csm.csv"), &csm)?;
        written.push("csm.csv".into());
    }
    let steer = build_steering_set(&ctx.grid, &ctx.array, csm.frequency(), &ctx.medium, &NoShear)?;
    let beamform = beamform_map(&csm, &steer)?;
    let bf_floor = cfg.output.beamform_floor_db;
    map_outputs(cfg, dir, "beamform", &beamform, bf_floor, &[], p_ref, written)?;

    let dr = if cfg.processing.diagonal_removal {
        let csm_dr = remove_diagonal(&csm)?;
        let map = beamform_map(&csm_dr, &steer)?;
        map_outputs(cfg, dir, "beamform_dr", &map, bf_floor, &[], p_ref, written)?;
        Some((csm_dr, map))
    } else {
        None
    };

    let mut damas = Vec::new();
    if cfg.solver.enabled {
        let (csm_s, y) = match &dr {
            Some((c, m)) => (c, m),
            None => (&csm, &beamform),
        };
        let flags = PropagatorFlags::from_csm(csm_s);
        let config = cfg.solver.solver_config();
        let checkpoints = &cfg.solver.checkpoints;
        damas = if cfg.solver.matrix_free {
            let a = MatrixFreePropagator::new(&steer, &flags)?;
            damas_solve_checkpoints(&a, y, &config, checkpoints)?
        } else {
            let a = build_propagator(&steer, &flags)?;
            if cfg.output.wants(OutputFormat::Propagator) {
                write_propagator(&dir.join("propagator.bin"), &a)?;
                written.push("propagator.bin".into());
            }
            damas_solve_checkpoints(&a, y, &config, checkpoints)?
        };
        for (k, r) in checkpoints.iter().zip(&damas) {
            let floor = cfg.output.damas_floor_db;
            map_outputs(cfg, dir, &format!("damas_{k}"), &r.map, floor, &[], p_ref, written)?;
        }
        if cfg.output.wants(OutputFormat::History) {
            if let Some(last) = damas.last() {
                write_history_csv(&dir.join("history.csv"), &last.history, p_ref)?;
                written.push("history.csv".into());
            }
        }
    }
    Ok(JobMaps {
        beamform,
        beamform_dr: dr.map(|(_, m)| m),
        damas,
    })
}

fn thread_pool(jobs: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::Other(e.to_string()))
}

/// Validates `cfg` (relative paths resolve against `base`) and runs it.
///
/// Returns `Err` only for failures that prevent any output, such as an
/// invalid configuration. Per-job failures are reported in the returned
/// status and exit code.
pub fn run(cfg: &RunConfig, base: &Path) -> Result<RunOutput> {
    let input = cfg.validate(base)?;
    let directory = base.join(&cfg.output.directory);
    create_dir(&directory)?;

    if let Input::Scenario(name) = &input {
        let s = damas_core::scenarios::by_name(name)
            .ok_or_else(|| Error::config("input.scenario", format!("unknown scenario {name:?}")))??;
        let backend = if cfg.solver.matrix_free {
            Backend::MatrixFree
        } else {
            Backend::Dense
        };
        let report = scenario_outputs(&s, None, backend, cfg, &directory)?;
        let status = RunStatus {
            jobs: vec![JobStatus {
                label: s.name.clone(),
                frequency_hz: s.frequency,
                status: JobState::Ok,
                error: None,
                outputs: report.outputs.clone(),
            }],
        };
        if cfg.output.wants(OutputFormat::Json) {
            write_json(&directory.join("status.json"), &status)?;
        }
        return Ok(RunOutput {
            directory,
            status,
            maps: vec![None],
            scenario: Some(report),
            exit_code: 0,
        });
    }

    let array = cfg.array(base)?;
    let medium = cfg.medium()?;
    let grid = cfg.grid()?;
    let welch = cfg.welch();
    let p = &cfg.processing;

    let recording = match &input {
        Input::TimeSeries(path) => Some(read_timeseries(path)?),
        Input::Scene(path) if p.bands.is_some() => {
            let scene = read_scene(path)?;
            let s = &cfg.synthesis;
            let synth = SynthesisConfig {
                sample_rate: s.sample_rate,
                frames: (s.sample_rate * s.duration).round() as usize,
                self_noise: s.self_noise,
                seed: s.seed,
            };
            Some(synthesize_timeseries(&scene, &array, &medium, &synth)?)
        }
        _ => None,
    };
    if let Some(ts) = &recording {
        if ts.n_channels() != array.len() {
            return Err(Error::config(
                "array",
                format!(
                    "{} microphones but the recording has {} channels",
                    array.len(),
                    ts.n_channels()
                ),
            ));
        }
    }

    let mut jobs = Vec::new();
    match (&input, &recording, p.bands) {
        (_, Some(ts), Some([lo, hi])) => {
            let bands = third_octave_bands(lo, hi);
            if bands.is_empty() {
                return Err(Error::config("processing.bands", "no third-octave band in range"));
            }
            for band in bands {
                jobs.push(Job {
                    label: format!("band_{}", frequency_label(band.nominal)),
                    frequency: band.nominal,
                    source: Source::Band(ts, band),
                });
            }
        }
        (_, Some(ts), None) => {
            for &f in &p.frequencies {
                if f > ts.sample_rate / 2.0 {
                    return Err(Error::config("processing.frequencies", format!("{f} Hz is above Nyquist")));
                }
                jobs.push(Job {
                    label: frequency_label(f),
                    frequency: f,
                    source: Source::Bin(ts, welch.nearest_bin(ts.sample_rate, f)),
                });
            }
        }
        (Input::Scene(path), None, _) => {
            let scene = read_scene(path)?;
            for &f in &p.frequencies {
                jobs.push(Job {
                    label: frequency_label(f),
                    frequency: f,
                    source: Source::Csm(synthesize_csm(&scene, &array, f, &medium, &NoShear)?),
                });
            }
        }
        _ => unreachable!("validated input without a CSM source"),
    }

    let ctx = Context {
        cfg,
        array,
        grid,
        medium,
        welch,
        dir: &directory,
    };
    let pool = thread_pool(cfg.output.jobs)?;
    let results: Vec<_> = pool.install(|| jobs.into_par_iter().map(|j| run_job(&ctx, j)).collect());

    let mut statuses = Vec::with_capacity(results.len());
    let mut maps = Vec::with_capacity(results.len());
    let mut exit_code = 0;
    for (status, m, code) in results {
        statuses.push(status);
        maps.push(m);
        if code != 0 && (exit_code == 0 || exit_code == EXIT_FAILURE) {
            exit_code = code;
        }
    }
    let status = RunStatus { jobs: statuses };
    if cfg.output.wants(OutputFormat::Json) {
        write_json(&directory.join("status.json"), &status)?;
    }
    Ok(RunOutput {
        directory,
        status,
        maps,
        scenario: None,
        exit_code,
    })
}

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use damas::config::{InputSpec, RunConfig};
use damas::error::{Error, Result};
use damas::formats::read_map_csv;
use damas::pipeline::{run, scenario_outputs, ScenarioReport};
use damas::render::write_heatmap;
use damas::report::JobState;
use damas_core::scenarios::{by_name, Backend, SCENARIO_NAMES};

/// Microphone-array beamforming and DAMAS deconvolution.
#[derive(Parser)]
#[command(name = "damas", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a TOML configuration, or a built-in scenario by name.
    Run {
        config: String,
    },
    /// Run a built-in scenario and score it.
    Scenario {
        name: String,
        /// Stop after this many DAMAS iterations; earlier checkpoints are kept.
        #[arg(long)]
        iters: Option<usize>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Recompute propagator entries on the fly instead of storing them.
        #[arg(long)]
        matrix_free: bool,
    },
    /// Render a map CSV as a heatmap PNG.
    Render {
        map: PathBuf,
        /// Display floor below the peak, dB.
        #[arg(long, default_value_t = 20.0)]
        floor: f64,
        /// Defaults to the map path with a `.png` extension.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn print_scenario(report: &ScenarioReport) {
    for o in &report.outcomes {
        let at = match o.expectation.checkpoint {
            Some(k) => format!("damas@{k}"),
            None => "beamform".into(),
        };
        println!(
            "{} {} {} = {:.4} (expected {} ± {}) {}",
            report.scenario.name,
            at,
            o.expectation.metric.name(),
            o.value,
            o.expectation.check.expected(),
            o.expectation.check.tolerance(),
            if o.pass { "PASS" } else { "FAIL" }
        );
    }
}

fn cmd_run(arg: &str) -> Result<i32> {
    let path = Path::new(arg);
    let (cfg, base) = if path.is_file() {
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        (RunConfig::load(path)?, base)
    } else if SCENARIO_NAMES.contains(&arg) {
        let cfg = RunConfig {
            input: InputSpec {
                scenario: Some(arg.to_string()),
                ..Default::default()
            },
            ..Default::default()
        };
        (cfg, PathBuf::new())
    } else {
        return Err(Error::config(
            "config",
            format!("{arg} is neither a file nor a scenario name"),
        ));
    };
    let out = run(&cfg, &base)?;
    if let Some(report) = &out.scenario {
        print_scenario(report);
    }
    for job in &out.status.jobs {
        match job.status {
            JobState::Ok => println!("{}: ok, {} files", job.label, job.outputs.len()),
            JobState::Failed => eprintln!(
                "{}: failed: {}",
                job.label,
                job.error.as_deref().unwrap_or("unknown error")
            ),
        }
    }
    println!("outputs in {}", out.directory.display());
    Ok(out.exit_code)
}

fn cmd_scenario(name: &str, iters: Option<usize>, out: &Path, matrix_free: bool) -> Result<i32> {
    let s = by_name(name).ok_or_else(|| {
        Error::config(
            "scenario",
            format!("unknown scenario {name:?}; expected one of {}", SCENARIO_NAMES.join(", ")),
        )
    })??;
    let checkpoints = match iters {
        Some(0) => return Err(Error::config("iters", "must be at least 1")),
        Some(k) => {
            let mut c: Vec<usize> = s.checkpoints.iter().copied().filter(|&c| c < k).collect();
            c.push(k);
            Some(c)
        }
        None => None,
    };
    let backend = if matrix_free {
        Backend::MatrixFree
    } else {
        Backend::Dense
    };
    let report = scenario_outputs(&s, checkpoints.as_deref(), backend, &RunConfig::default(), out)?;
    print_scenario(&report);
    println!("outputs in {}", out.display());
    Ok(0)
}

fn cmd_render(map: &Path, floor: f64, out: Option<PathBuf>) -> Result<i32> {
    let m = read_map_csv(map)?;
    let out = out.unwrap_or_else(|| map.with_extension("png"));
    let image = write_heatmap(&out, &m, floor, &[])?;
    if image.is_blank() {
        eprintln!("warning: no cell reaches the {floor} dB floor; the image is blank");
    }
    println!("wrote {}", out.display());
    Ok(0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { config } => cmd_run(&config),
        Command::Scenario {
            name,
            iters,
            out,
            matrix_free,
        } => cmd_scenario(&name, iters, &out, matrix_free),
        Command::Render { map, floor, out } => cmd_render(&map, floor, out),
    };
    match result {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

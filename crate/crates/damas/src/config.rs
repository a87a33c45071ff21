//! Run configuration, read from TOML.
//!
//! Defaults:
//!
//! | key                            | default                          |
//! |--------------------------------|----------------------------------|
//! | `array`                        | 41-mic multi-ring, radius 1 m    |
//! | `medium.sound_speed`           | 343 m/s                          |
//! | `medium.reference_pressure`    | 20 µPa                           |
//! | `processing.weighting`         | false                            |
//! | `processing.diagonal_removal`  | false                            |
//! | `processing.block_size`        | 4096                             |
//! | `processing.overlap`           | 0.5                              |
//! | `synthesis.sample_rate`        | 51200 Hz                         |
//! | `synthesis.duration`           | 1 s                              |
//! | `synthesis.self_noise`         | 0 Pa                             |
//! | `synthesis.seed`               | 0                                |
//! | `solver.enabled`               | true                             |
//! | `solver.checkpoints`           | `[100]`                          |
//! | `solver.tolerance`             | 0                                |
//! | `solver.init`                  | `"zero"`                         |
//! | `solver.matrix_free`           | false                            |
//! | `output.directory`             | `out`                            |
//! | `output.beamform_floor_db`     | 12                               |
//! | `output.damas_floor_db`        | 20                               |
//! | `output.scenario_floor_db`     | 40                               |
//! | `output.formats`               | `["csv", "png", "json"]`         |
//! | `output.jobs`                  | 0 (one per available core)       |
//!
//! Relative paths are resolved against the directory holding the config file.

use std::path::{Path, PathBuf};

use damas_core::damas::{Init, SolverConfig};
use damas_core::geometry::{default_array, make_ring_array, make_scan_grid, Medium, MicArray, Point3, ScanGrid};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::formats::read_array;
use crate::timeseries::WelchConfig;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub input: InputSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub array: Option<ArraySpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridSpec>,
    #[serde(default)]
    pub medium: MediumSpec,
    #[serde(default)]
    pub processing: ProcessingSpec,
    #[serde(default)]
    pub synthesis: SynthesisSpec,
    #[serde(default)]
    pub solver: SolverSpec,
    #[serde(default)]
    pub output: OutputSpec,
}

/// Exactly one field must be set.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenario: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scene: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timeseries: Option<PathBuf>,
}

/// Exactly one field must be set.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArraySpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub file: Option<PathBuf>,
    /// Outer radius of the default multi-ring layout, m.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rings: Option<RingSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RingSpec {
    pub mics: Vec<usize>,
    pub radii: Vec<f64>,
}

/// A grid parallel to the `z = 0` plane.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub center: [f64; 3],
    pub width: f64,
    pub height: f64,
    /// Intervals across the width; the spacing is `width / intervals`.
    pub intervals: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MediumSpec {
    pub sound_speed: f64,
    pub reference_pressure: f64,
}

impl Default for MediumSpec {
    fn default() -> Self {
        let m = Medium::default();
        Self {
            sound_speed: m.sound_speed(),
            reference_pressure: m.reference_pressure(),
        }
    }
}

/// Either `frequencies` (Hz) or `bands` (a `[low, high]` range of
/// third-octave centers) must be given.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProcessingSpec {
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub frequencies: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bands: Option<[f64; 2]>,
    /// Apply the array's microphone weights.
    pub weighting: bool,
    /// Also map with the CSM diagonal removed; DAMAS then uses that CSM.
    pub diagonal_removal: bool,
    pub block_size: usize,
    pub overlap: f64,
}

impl Default for ProcessingSpec {
    fn default() -> Self {
        let w = WelchConfig::default();
        Self {
            frequencies: Vec::new(),
            bands: None,
            weighting: false,
            diagonal_removal: false,
            block_size: w.block_size,
            overlap: w.overlap,
        }
    }
}

/// Recording synthesis for scene input in band mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthesisSpec {
    pub sample_rate: f64,
    /// Seconds.
    pub duration: f64,
    /// RMS of independent noise on every channel, Pa.
    pub self_noise: f64,
    pub seed: u64,
}

impl Default for SynthesisSpec {
    fn default() -> Self {
        Self {
            sample_rate: 51_200.0,
            duration: 1.0,
            self_noise: 0.0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitSpec {
    Zero,
    Beamform,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSpec {
    pub enabled: bool,
    pub checkpoints: Vec<usize>,
    pub tolerance: f64,
    pub init: InitSpec,
    pub matrix_free: bool,
}

impl Default for SolverSpec {
    fn default() -> Self {
        Self {
            enabled: true,
            checkpoints: vec![100],
            tolerance: 0.0,
            init: InitSpec::Zero,
            matrix_free: false,
        }
    }
}

impl SolverSpec {
    pub fn solver_config(&self) -> SolverConfig {
        SolverConfig {
            max_iterations: self.checkpoints.last().copied().unwrap_or(1),
            tolerance: self.tolerance,
            init: match self.init {
                InitSpec::Zero => Init::Zero,
                InitSpec::Beamform => Init::Beamform,
            },
            record_history: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    /// Map CSV files.
    Csv,
    /// Heatmap images.
    Png,
    /// `metrics.json` and `status.json`.
    Json,
    /// CSM CSV per frequency or band.
    Csm,
    /// Binary propagator dump per frequency or band.
    Propagator,
    /// Solver history CSV.
    History,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSpec {
    pub directory: PathBuf,
    pub beamform_floor_db: f64,
    pub damas_floor_db: f64,
    pub scenario_floor_db: f64,
    pub formats: Vec<OutputFormat>,
    /// Worker threads for independent frequencies or bands; 0 uses every core.
    pub jobs: usize,
}

impl Default for OutputSpec {
    fn default() -> Self {
        Self {
            directory: PathBuf::from("out"),
            beamform_floor_db: 12.0,
            damas_floor_db: 20.0,
            scenario_floor_db: 40.0,
            formats: vec![OutputFormat::Csv, OutputFormat::Png, OutputFormat::Json],
            jobs: 0,
        }
    }
}

impl OutputSpec {
    pub fn wants(&self, f: OutputFormat) -> bool {
        self.formats.contains(&f)
    }
}

/// What a validated config reads from.
#[derive(Debug, Clone, PartialEq)]
pub enum Input {
    Scenario(String),
    Scene(PathBuf),
    TimeSeries(PathBuf),
}

fn positive(field: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::config(field, format!("must be positive and finite, got {v}")))
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| {
            let message = e.message().to_string();
            let field = e
                .span()
                .and_then(|s| text.get(s))
                .map(|s| s.trim().to_string())
                .unwrap_or_else(|| "config".into());
            Error::config(field, message)
        })
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Other(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    /// Checks every field. `base` resolves relative input paths, which must
    /// exist.
    pub fn validate(&self, base: &Path) -> Result<Input> {
        let i = &self.input;
        let given = [i.scenario.is_some(), i.scene.is_some(), i.timeseries.is_some()];
        let input = match given.iter().filter(|b| **b).count() {
            1 => {
                if let Some(name) = &i.scenario {
                    if damas_core::scenarios::by_name(name).is_none() {
                        return Err(Error::config(
                            "input.scenario",
                            format!(
                                "unknown scenario {name:?}; expected one of {}",
                                damas_core::scenarios::SCENARIO_NAMES.join(", ")
                            ),
                        ));
                    }
                    Input::Scenario(name.clone())
                } else if let Some(p) = &i.scene {
                    Input::Scene(existing(base, p, "input.scene")?)
                } else {
                    Input::TimeSeries(existing(base, i.timeseries.as_ref().unwrap(), "input.timeseries")?)
                }
            }
            0 => return Err(Error::config("input", "one of scenario, scene or timeseries is required")),
            _ => return Err(Error::config("input", "give exactly one of scenario, scene or timeseries")),
        };

        positive("medium.sound_speed", self.medium.sound_speed)?;
        positive("medium.reference_pressure", self.medium.reference_pressure)?;
        let o = &self.output;
        positive("output.beamform_floor_db", o.beamform_floor_db)?;
        positive("output.damas_floor_db", o.damas_floor_db)?;
        positive("output.scenario_floor_db", o.scenario_floor_db)?;

        let s = &self.solver;
        if s.checkpoints.is_empty() || s.checkpoints[0] == 0 || s.checkpoints.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::config(
                "solver.checkpoints",
                "must be non-empty, positive and strictly increasing",
            ));
        }
        if !(s.tolerance >= 0.0 && s.tolerance.is_finite()) {
            return Err(Error::config("solver.tolerance", "must be finite and non-negative"));
        }

        if let Input::Scenario(_) = input {
            if self.array.is_some() {
                return Err(Error::config("array", "scenarios define their own array"));
            }
            if self.grid.is_some() {
                return Err(Error::config("grid", "scenarios define their own grid"));
            }
            let p = &self.processing;
            if !p.frequencies.is_empty() || p.bands.is_some() {
                return Err(Error::config("processing", "scenarios define their own frequency"));
            }
            return Ok(input);
        }

        let g = self
            .grid
            .as_ref()
            .ok_or_else(|| Error::config("grid", "required for scene and time-series input"))?;
        if g.intervals == 0 {
            return Err(Error::config("grid.intervals", "must be at least 1"));
        }
        positive("grid.width", g.width)?;
        if !(g.height >= 0.0) {
            return Err(Error::config("grid.height", "must be non-negative"));
        }
        if let Some(a) = &self.array {
            let set = [a.file.is_some(), a.radius.is_some(), a.rings.is_some()];
            if set.iter().filter(|b| **b).count() != 1 {
                return Err(Error::config("array", "give exactly one of file, radius or rings"));
            }
            if let Some(p) = &a.file {
                existing(base, p, "array.file")?;
            }
        }

        let p = &self.processing;
        match (p.frequencies.is_empty(), p.bands) {
            (false, None) => {
                for f in &p.frequencies {
                    positive("processing.frequencies", *f)?;
                }
            }
            (true, Some([lo, hi])) => {
                positive("processing.bands", lo)?;
                positive("processing.bands", hi)?;
                if lo > hi {
                    return Err(Error::config("processing.bands", "low edge exceeds high edge"));
                }
            }
            _ => {
                return Err(Error::config(
                    "processing",
                    "give exactly one of frequencies or bands",
                ))
            }
        }
        let needs_recording = matches!(input, Input::TimeSeries(_)) || p.bands.is_some();
        if needs_recording {
            self.welch().validate()?;
        }
        if matches!(input, Input::Scene(_)) && p.bands.is_some() {
            let y = &self.synthesis;
            positive("synthesis.sample_rate", y.sample_rate)?;
            positive("synthesis.duration", y.duration)?;
            if !(y.self_noise >= 0.0 && y.self_noise.is_finite()) {
                return Err(Error::config("synthesis.self_noise", "must be finite and non-negative"));
            }
            if (y.sample_rate * y.duration) < p.block_size as f64 {
                return Err(Error::config("synthesis.duration", "shorter than one block"));
            }
        }
        Ok(input)
    }

    pub fn welch(&self) -> WelchConfig {
        WelchConfig {
            block_size: self.processing.block_size,
            overlap: self.processing.overlap,
        }
    }

    pub fn medium(&self) -> Result<Medium> {
        Medium::new(self.medium.sound_speed, self.medium.reference_pressure)
            .map_err(|e| Error::config("medium", e.to_string()))
    }

    pub fn array(&self, base: &Path) -> Result<MicArray> {
        let Some(spec) = &self.array else {
            return default_array(1.0).map_err(|e| Error::config("array", e.to_string()));
        };
        if let Some(p) = &spec.file {
            return read_array(&base.join(p)).map_err(|e| Error::config("array.file", e.to_string()));
        }
        if let Some(r) = spec.radius {
            return default_array(r).map_err(|e| Error::config("array.radius", e.to_string()));
        }
        let rings = spec.rings.as_ref().ok_or_else(|| Error::config("array", "empty array spec"))?;
        make_ring_array(&rings.mics, &rings.radii).map_err(|e| Error::config("array.rings", e.to_string()))
    }

    pub fn grid(&self) -> Result<ScanGrid> {
        let g = self.grid.as_ref().ok_or_else(|| Error::config("grid", "missing"))?;
        let [x, y, z] = g.center;
        make_scan_grid(Point3::new(x, y, z), g.width, g.height, g.intervals)
            .map_err(|e| Error::config("grid", e.to_string()))
    }
}

fn existing(base: &Path, p: &Path, field: &str) -> Result<PathBuf> {
    let full = base.join(p);
    if full.is_file() {
        Ok(full)
    } else {
        Err(Error::config(field, format!("{} does not exist", full.display())))
    }
}

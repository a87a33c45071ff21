//! Reproducible simulation scenarios and the metrics they are scored by.
//!
//! Every scenario is a pure value: building it twice yields the same scene,
//! array, grid and expectations, and running it twice yields identical maps.

mod font;
pub mod metrics;

pub use font::{glyph, lit_cells, text_width, GLYPH_GAP, GLYPH_HEIGHT, GLYPH_WIDTH};

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_traits::Float;

use crate::beamform::{beamform_map, mainlobe_width, SourceMap};
use crate::damas::{
    build_propagator, damas_solve_checkpoints, Init, MatrixFreePropagator, PropagatorFlags,
    SolveResult, SolverConfig,
};
use crate::error::ScenarioError;
use crate::geometry::{
    default_array, make_scan_grid, nearest_grid_index, Medium, MicArray, Point3, ScanGrid, Source,
    SourceScene,
};
use crate::spectra::{build_steering_set, synthesize_csm, NoShear};

/// Names accepted by [`by_name`].
pub const SCENARIO_NAMES: [&str; 6] = [
    "turbine_point_source",
    "ucas_grid_083",
    "ucas_grid_167",
    "ucas_offgrid_083",
    "ucas_offgrid_167",
    "airfoil_trailing_edge",
];

/// Where an expected value comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Basis {
    /// A published figure, compared with a tolerance widened for the
    /// unknown array layout.
    Published,
    /// Follows from the construction of the problem.
    Derived,
    /// A loose bound standing in for a visual or qualitative statement.
    Qualitative,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Check {
    /// `|value - expected| <= tolerance`.
    Within { expected: f64, tolerance: f64 },
    /// `value <= bound`; `reference` is the published value of the error.
    ErrorBound { reference: f64, bound: f64 },
    /// `value >= threshold`.
    AtLeast(f64),
    /// `value <= threshold`.
    AtMost(f64),
    /// `value > threshold`.
    Above(f64),
}

impl Check {
    pub fn passes(&self, value: f64) -> bool {
        match *self {
            Check::Within {
                expected,
                tolerance,
            } => (value - expected).abs() <= tolerance,
            Check::ErrorBound { bound, .. } => value <= bound,
            Check::AtLeast(t) => value >= t,
            Check::AtMost(t) => value <= t,
            Check::Above(t) => value > t,
        }
    }

    pub fn expected(&self) -> f64 {
        match *self {
            Check::Within { expected, .. } => expected,
            Check::ErrorBound { reference, .. } => reference,
            Check::AtLeast(t) | Check::AtMost(t) | Check::Above(t) => t,
        }
    }

    pub fn tolerance(&self) -> f64 {
        match *self {
            Check::Within { tolerance, .. } => tolerance,
            Check::ErrorBound { bound, .. } => bound,
            _ => 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Metric {
    /// Level (dB) integrated over the disc of radius `B/2` around the peak,
    /// `B` being the beamform main-lobe width.
    MainlobeLevel,
    /// Grid points outside that disc within 40 dB of the peak.
    FalseSources,
    /// Fraction of the beamform map within 40 dB of its peak.
    BeamformCoverage,
    /// `|10 log10(sum X / scene power)|`, dB.
    TotalPowerError,
    /// Fraction of recovered power within one cell of a true source.
    Legibility,
    /// Strongest-to-weakest level spread (dB) over the source grid points.
    LineSpread,
    /// `LineSpread` at checkpoint `from` minus `LineSpread` here.
    SpreadDecrease { from: usize },
    /// 1 if the -3 dB main lobe covers every source grid point, else 0.
    LineInMainlobe,
}

impl Metric {
    pub fn name(&self) -> &'static str {
        match self {
            Metric::MainlobeLevel => "mainlobe_level_db",
            Metric::FalseSources => "false_sources_40db",
            Metric::BeamformCoverage => "coverage_40db",
            Metric::TotalPowerError => "total_power_error_db",
            Metric::Legibility => "legibility",
            Metric::LineSpread => "line_spread_db",
            Metric::SpreadDecrease { .. } => "line_spread_decrease_db",
            Metric::LineInMainlobe => "line_in_mainlobe",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Expectation {
    pub metric: Metric,
    /// DAMAS iteration count, or `None` for the beamform map.
    pub checkpoint: Option<usize>,
    pub check: Check,
    pub basis: Basis,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub scene: SourceScene,
    pub array: MicArray,
    pub grid: ScanGrid,
    pub medium: Medium,
    pub frequency: f64,
    /// Strictly increasing DAMAS iteration counts.
    pub checkpoints: Vec<usize>,
    pub init: Init,
    pub expectations: Vec<Expectation>,
    /// Polylines drawn over rendered maps.
    pub overlay: Vec<Vec<Point3>>,
}

impl Scenario {
    pub fn validate(&self) -> Result<(), ScenarioError> {
        if self.checkpoints.is_empty() || self.checkpoints.windows(2).any(|w| w[0] >= w[1]) {
            return Err(ScenarioError::Checkpoints);
        }
        if self.checkpoints[0] == 0 {
            return Err(ScenarioError::Checkpoints);
        }
        for s in self.scene.sources() {
            if !crate::spectra::same_frequency(s.frequency, self.frequency) {
                return Err(crate::error::SpectraError::FrequencyMismatch(
                    self.frequency,
                    s.frequency,
                )
                .into());
            }
        }
        Ok(())
    }

    /// Total scene power, Pa^2.
    pub fn setpoint(&self) -> f64 {
        self.scene.total_power()
    }

    /// Grid points nearest to each scene source, in scene order.
    pub fn source_cells(&self) -> Result<Vec<usize>, ScenarioError> {
        self.scene
            .sources()
            .iter()
            .map(|s| nearest_grid_index(&self.grid, s.position).map_err(ScenarioError::from))
            .collect()
    }
}

/// Builds a scenario from its name in [`SCENARIO_NAMES`].
pub fn by_name(name: &str) -> Option<Result<Scenario, ScenarioError>> {
    Some(match name {
        "turbine_point_source" => turbine_point_source(),
        "ucas_grid_083" => ucas_scenario(UCAS_COARSE_RATIO, true),
        "ucas_grid_167" => ucas_scenario(UCAS_FINE_RATIO, true),
        "ucas_offgrid_083" => ucas_scenario(UCAS_COARSE_RATIO, false),
        "ucas_offgrid_167" => ucas_scenario(UCAS_FINE_RATIO, false),
        "airfoil_trailing_edge" => airfoil_trailing_edge(),
        _ => return None,
    })
}

/// Rotor radius of the turbine scene, m.
pub const TURBINE_BLADE_LENGTH: f64 = 38.68;
pub const TURBINE_STANDOFF: f64 = 65.0;

/// A 2 Pa, 1 kHz point source 1 m from the rotor hub at 45 degrees, seen by
/// a 1 m radius array 65 m away on the rotor axis.
pub fn turbine_point_source() -> Result<Scenario, ScenarioError> {
    let frequency = 1000.0;
    let hub = Point3::new(0.0, 0.0, TURBINE_STANDOFF);
    let array = default_array(1.0)?;
    let angle = PI / 4.0;
    let position = hub + Point3::new(Float::cos(angle), Float::sin(angle), 0.0);
    // registered on the source so that it falls on a grid point
    let grid = make_scan_grid(position, 100.0, 100.0, 50)?;
    let scene = SourceScene::new(vec![Source::new(position, frequency, 2.0)?]);

    let overlay = [90.0_f64, 210.0, 330.0]
        .iter()
        .map(|deg| {
            let a = deg.to_radians();
            vec![
                hub,
                hub + Point3::new(Float::cos(a), Float::sin(a), 0.0) * TURBINE_BLADE_LENGTH,
            ]
        })
        .collect();

    let expectations = vec![
        Expectation {
            metric: Metric::MainlobeLevel,
            checkpoint: Some(100),
            check: Check::Within {
                expected: 100.13,
                tolerance: 0.5,
            },
            basis: Basis::Published,
        },
        Expectation {
            metric: Metric::MainlobeLevel,
            checkpoint: Some(5000),
            check: Check::Within {
                expected: 100.0,
                tolerance: 0.1,
            },
            basis: Basis::Published,
        },
        Expectation {
            metric: Metric::FalseSources,
            checkpoint: Some(5000),
            check: Check::AtMost(0.0),
            basis: Basis::Published,
        },
        Expectation {
            metric: Metric::BeamformCoverage,
            checkpoint: None,
            check: Check::Above(0.5),
            basis: Basis::Qualitative,
        },
    ];

    let s = Scenario {
        name: "turbine_point_source".into(),
        scene,
        array,
        grid,
        medium: Medium::default(),
        frequency,
        checkpoints: vec![100, 1000, 5000],
        init: Init::Zero,
        expectations,
        overlay,
    };
    s.validate()?;
    Ok(s)
}

/// Where rasterized sources sit relative to the grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Placement {
    OnGrid,
    /// Shifted by half a cell along both grid axes.
    OffGrid,
}

/// One monopole per lit font cell, centered on the grid. Font rows run
/// downward, grid rows upward.
pub fn rasterize_text(
    text: &str,
    grid: &ScanGrid,
    frequency: f64,
    cell_db: f64,
    p_ref: f64,
    placement: Placement,
) -> Result<SourceScene, ScenarioError> {
    if text.is_empty() {
        return Err(ScenarioError::EmptyText);
    }
    let cells = lit_cells(text).map_err(ScenarioError::UnknownGlyph)?;
    let width = text_width(text);
    let extra = match placement {
        Placement::OnGrid => 0,
        Placement::OffGrid => 1,
    };
    let (cols, rows) = (grid.n_cols(), grid.n_rows());
    if width + extra > cols || GLYPH_HEIGHT + extra > rows {
        return Err(ScenarioError::TextTooLarge {
            needed_cols: width + extra,
            needed_rows: GLYPH_HEIGHT + extra,
            cols,
            rows,
        });
    }
    let col0 = (cols - width - extra) / 2;
    let row0 = (rows - GLYPH_HEIGHT - extra) / 2;
    let shift = match placement {
        Placement::OnGrid => 0.0,
        Placement::OffGrid => 0.5,
    };
    let mut scene = SourceScene::empty();
    for (c, r) in cells {
        let col = (col0 + c) as f64 + shift;
        let row = (row0 + GLYPH_HEIGHT - 1 - r) as f64 + shift;
        scene.push(Source::from_level(
            grid.point_at(col, row),
            frequency,
            cell_db,
            p_ref,
        )?);
    }
    Ok(scene)
}

/// Measures the beamform main-lobe width of `array` for a source at `focus`
/// on a fine probe grid parallel to the array plane. The probe is enlarged
/// until the -3 dB region stays clear of its border.
pub fn measure_beamwidth(
    array: &MicArray,
    focus: Point3,
    frequency: f64,
    medium: &Medium,
) -> Result<f64, ScenarioError> {
    let distance = focus.distance(array.center());
    let mut extent = 3.0 * 1.22 * medium.wavelength(frequency) * distance / (2.0 * array.radius());
    let scene = SourceScene::new(vec![Source::new(focus, frequency, 1.0)?]);
    let csm = synthesize_csm(&scene, array, frequency, medium, &NoShear)?;
    loop {
        let grid = make_scan_grid(focus, extent, extent, PROBE_INTERVALS)?;
        let steer = build_steering_set(&grid, array, frequency, medium, &NoShear)?;
        let map = beamform_map(&csm, &steer)?;
        let region = crate::beamform::mainlobe_region(&map)?;
        let last = PROBE_INTERVALS;
        let touches = region.iter().any(|&i| {
            let (c, r) = grid.col_row(i);
            c == 0 || r == 0 || c == last || r == last
        });
        if !touches {
            return Ok(mainlobe_width(&map)?);
        }
        extent *= 2.0;
    }
}

const PROBE_INTERVALS: usize = 120;

pub const UCAS_COARSE_RATIO: f64 = 0.083;
pub const UCAS_FINE_RATIO: f64 = 0.167;
pub const UCAS_TEXT: &str = "UCAS";
pub const UCAS_CELL_DB: f64 = 100.0;
pub const UCAS_STANDOFF: f64 = 3.0;

/// Free dimensions of the UCAS scene.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UcasGeometry {
    pub array_radius: f64,
    /// Distance from the array center to the scan plane, m.
    pub standoff: f64,
    /// Empty grid cells around the text on every side; `None` uses
    /// `ceil(1 / ratio)`, about one beamwidth.
    pub margin: Option<usize>,
}

impl Default for UcasGeometry {
    fn default() -> Self {
        Self {
            array_radius: 1.0,
            standoff: UCAS_STANDOFF,
            margin: None,
        }
    }
}

/// The "UCAS" inscription at 100 dB per cell. The grid spacing is
/// `ratio` times the beamwidth measured on the array: 10 kHz for the
/// coarse ratio, 20 kHz for the fine one.
pub fn ucas_scenario(ratio: f64, on_grid: bool) -> Result<Scenario, ScenarioError> {
    ucas_with(ratio, on_grid, &UcasGeometry::default())
}

/// [`ucas_scenario`] with explicit geometry.
pub fn ucas_with(ratio: f64, on_grid: bool, geometry: &UcasGeometry) -> Result<Scenario, ScenarioError> {
    let frequency = if ratio == UCAS_COARSE_RATIO {
        10_000.0
    } else if ratio == UCAS_FINE_RATIO {
        20_000.0
    } else {
        return Err(ScenarioError::Ratio(ratio));
    };
    let medium = Medium::default();
    let array = default_array(geometry.array_radius)?;
    let focus = Point3::new(0.0, 0.0, geometry.standoff);
    let beamwidth = measure_beamwidth(&array, focus, frequency, &medium)?;
    let dx = ratio * beamwidth;

    let margin = geometry
        .margin
        .unwrap_or_else(|| Float::ceil(1.0 / ratio) as usize);
    let cols = text_width(UCAS_TEXT) + 1 + 2 * margin;
    let rows = GLYPH_HEIGHT + 1 + 2 * margin;
    let grid = make_scan_grid(
        focus,
        (cols - 1) as f64 * dx,
        (rows - 1) as f64 * dx,
        cols - 1,
    )?;
    let placement = if on_grid {
        Placement::OnGrid
    } else {
        Placement::OffGrid
    };
    let scene = rasterize_text(
        UCAS_TEXT,
        &grid,
        frequency,
        UCAS_CELL_DB,
        medium.reference_pressure(),
        placement,
    )?;

    let coarse = ratio == UCAS_COARSE_RATIO;
    let power_error = |checkpoint, reference| Expectation {
        metric: Metric::TotalPowerError,
        checkpoint: Some(checkpoint),
        check: Check::ErrorBound {
            reference,
            bound: 0.05,
        },
        basis: Basis::Published,
    };
    let mut expectations = match (on_grid, coarse) {
        (true, true) => vec![power_error(100, 0.0072)],
        (false, true) => vec![power_error(100, 0.01)],
        (false, false) => vec![power_error(100, 0.016), power_error(1000, 0.006)],
        (true, false) => Vec::new(),
    };
    let checkpoints = vec![100, 1000, 5000];
    expectations.push(Expectation {
        metric: Metric::Legibility,
        checkpoint: checkpoints.last().copied(),
        check: Check::AtLeast(0.9),
        basis: Basis::Qualitative,
    });

    let name = alloc::format!(
        "ucas_{}_{:03}",
        if on_grid { "grid" } else { "offgrid" },
        Float::round(ratio * 1000.0) as u32
    );
    let s = Scenario {
        name,
        scene,
        array,
        grid,
        medium,
        frequency,
        checkpoints,
        init: Init::Zero,
        expectations,
        overlay: Vec::new(),
    };
    s.validate()?;
    Ok(s)
}

pub const AIRFOIL_SOURCES: usize = 13;
pub const AIRFOIL_SPAN: f64 = 0.3;
pub const AIRFOIL_LEVEL_DB: f64 = 80.0;
/// Distance of the source line downstream of the trailing edge, m.
pub const AIRFOIL_WAKE_OFFSET: f64 = 0.05;

/// A uniform spanwise line of 2 kHz monopoles just downstream of an airfoil
/// trailing edge, 80 dB in total. The span runs along the grid's x axis and
/// the flow along its y axis.
pub fn airfoil_trailing_edge() -> Result<Scenario, ScenarioError> {
    airfoil_with(&AirfoilGeometry::default())
}

/// Free dimensions of the airfoil scene.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AirfoilGeometry {
    pub array_radius: f64,
    /// Distance from the array center to the scan plane, m.
    pub standoff: f64,
    /// Grid intervals along the span and along the flow.
    pub intervals: (usize, usize),
}

impl Default for AirfoilGeometry {
    fn default() -> Self {
        Self {
            array_radius: 0.4,
            standoff: 1.0,
            intervals: (40, 20),
        }
    }
}

/// [`airfoil_trailing_edge`] with explicit geometry.
pub fn airfoil_with(geometry: &AirfoilGeometry) -> Result<Scenario, ScenarioError> {
    let frequency = 2000.0;
    let medium = Medium::default();
    let array = default_array(geometry.array_radius)?;
    let dx = AIRFOIL_SPAN / (AIRFOIL_SOURCES - 1) as f64;
    let center = Point3::new(0.0, 0.0, geometry.standoff);
    let (along, across) = geometry.intervals;
    let grid = make_scan_grid(center, along as f64 * dx, across as f64 * dx, along)?;
    let per_source = AIRFOIL_LEVEL_DB - 10.0 * Float::log10(AIRFOIL_SOURCES as f64);
    let scene = SourceScene::new(
        (0..AIRFOIL_SOURCES)
            .map(|k| {
                let x = -AIRFOIL_SPAN / 2.0 + k as f64 * dx;
                Source::from_level(
                    center + Point3::new(x, 0.0, 0.0),
                    frequency,
                    per_source,
                    medium.reference_pressure(),
                )
            })
            .collect::<Result<Vec<_>, _>>()?,
    );

    let edge_y = -AIRFOIL_WAKE_OFFSET;
    let half = AIRFOIL_SPAN / 2.0;
    let chord = 0.15;
    let overlay = vec![vec![
        center + Point3::new(-half, edge_y, 0.0),
        center + Point3::new(half, edge_y, 0.0),
        center + Point3::new(half, edge_y - chord, 0.0),
        center + Point3::new(-half, edge_y - chord, 0.0),
        center + Point3::new(-half, edge_y, 0.0),
    ]];

    let expectations = vec![
        Expectation {
            metric: Metric::TotalPowerError,
            checkpoint: Some(1000),
            check: Check::ErrorBound {
                reference: 0.0082,
                bound: 0.05,
            },
            basis: Basis::Published,
        },
        Expectation {
            metric: Metric::SpreadDecrease { from: 1000 },
            checkpoint: Some(5000),
            check: Check::Above(0.0),
            basis: Basis::Qualitative,
        },
        Expectation {
            metric: Metric::LineInMainlobe,
            checkpoint: None,
            check: Check::AtLeast(1.0),
            basis: Basis::Qualitative,
        },
        Expectation {
            metric: Metric::LineInMainlobe,
            checkpoint: Some(100),
            check: Check::AtMost(0.0),
            basis: Basis::Qualitative,
        },
    ];

    let s = Scenario {
        name: "airfoil_trailing_edge".into(),
        scene,
        array,
        grid,
        medium,
        frequency,
        checkpoints: vec![100, 1000, 5000],
        init: Init::Zero,
        expectations,
        overlay,
    };
    s.validate()?;
    Ok(s)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Backend {
    #[default]
    Dense,
    MatrixFree,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioRun {
    pub beamform: SourceMap,
    /// Main-lobe width of the beamform map, m.
    pub beamwidth: f64,
    /// Requested iteration counts.
    pub requested: Vec<usize>,
    /// One result per requested count. A solve that reaches an exact fixed
    /// point stops early, so `iterations_run` may be lower than requested.
    pub checkpoints: Vec<SolveResult>,
}

impl ScenarioRun {
    /// The snapshot requested at `iterations`.
    pub fn at(&self, iterations: usize) -> Option<&SolveResult> {
        let k = self.requested.iter().position(|&r| r == iterations)?;
        self.checkpoints.get(k)
    }
}

/// Beamforms the scenario and runs one continuous DAMAS solve, snapshotting
/// at `checkpoints` (the scenario's own when `None`).
pub fn run_scenario(
    s: &Scenario,
    backend: Backend,
    checkpoints: Option<&[usize]>,
) -> Result<ScenarioRun, ScenarioError> {
    run_scenario_with(s, backend, checkpoints, false)
}

/// [`run_scenario`], optionally recording the per-iteration residual, which
/// costs one extra `A X` product per iteration.
pub fn run_scenario_with(
    s: &Scenario,
    backend: Backend,
    checkpoints: Option<&[usize]>,
    record_history: bool,
) -> Result<ScenarioRun, ScenarioError> {
    let checkpoints = checkpoints.unwrap_or(&s.checkpoints);
    if checkpoints.is_empty() || checkpoints.windows(2).any(|w| w[0] >= w[1]) {
        return Err(ScenarioError::Checkpoints);
    }
    let steer = build_steering_set(&s.grid, &s.array, s.frequency, &s.medium, &NoShear)?;
    let csm = synthesize_csm(&s.scene, &s.array, s.frequency, &s.medium, &NoShear)?;
    let beamform = beamform_map(&csm, &steer)?;
    let beamwidth = mainlobe_width(&beamform)?;
    let flags = PropagatorFlags::from_csm(&csm);
    let config = SolverConfig {
        init: s.init,
        record_history,
        ..SolverConfig::default()
    };
    let results = match backend {
        Backend::Dense => {
            let a = build_propagator(&steer, &flags)?;
            damas_solve_checkpoints(&a, &beamform, &config, checkpoints)?
        }
        Backend::MatrixFree => {
            let a = MatrixFreePropagator::new(&steer, &flags)?;
            damas_solve_checkpoints(&a, &beamform, &config, checkpoints)?
        }
    };
    Ok(ScenarioRun {
        beamform,
        beamwidth,
        requested: checkpoints.to_vec(),
        checkpoints: results,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricOutcome {
    pub expectation: Expectation,
    pub value: f64,
    pub pass: bool,
}

/// Scores every expectation whose map is present in `run`.
pub fn evaluate(s: &Scenario, run: &ScenarioRun) -> Result<Vec<MetricOutcome>, ScenarioError> {
    let cells = s.source_cells()?;
    let truth: Vec<Point3> = s.scene.sources().iter().map(|src| src.position).collect();
    let p_ref = s.medium.reference_pressure();
    let radius = run.beamwidth / 2.0;
    let mut out = Vec::new();
    for e in &s.expectations {
        let map = match e.checkpoint {
            None => &run.beamform,
            Some(k) => match run.at(k) {
                Some(r) => &r.map,
                None => continue,
            },
        };
        let value = match e.metric {
            Metric::MainlobeLevel => metrics::mainlobe_level(map, radius, p_ref),
            Metric::FalseSources => metrics::false_sources(map, radius, 40.0) as f64,
            Metric::BeamformCoverage => metrics::coverage(map, 40.0),
            Metric::TotalPowerError => metrics::total_power_error(map, s.setpoint()),
            Metric::Legibility => metrics::legibility(map, &truth),
            Metric::LineSpread => metrics::spread_db(map, &cells),
            Metric::SpreadDecrease { from } => match run.at(from) {
                Some(r) => metrics::spread_db(&r.map, &cells) - metrics::spread_db(map, &cells),
                None => continue,
            },
            Metric::LineInMainlobe => {
                if metrics::lobe_contains(map, &cells) {
                    1.0
                } else {
                    0.0
                }
            }
        };
        out.push(MetricOutcome {
            expectation: *e,
            value,
            pass: e.check.passes(value),
        });
    }
    Ok(out)
}

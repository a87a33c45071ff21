//! Microphone arrays, planar scan grids, the propagation medium and
//! synthetic source scenes.
//!
//! Grid indices are zero-based and row-major: index `row * n_cols + col`.
//! Index 0 is the first point visited by a forward DAMAS sweep.

use alloc::vec::Vec;
use core::f64::consts::PI;
use core::ops::{Add, Mul, Neg, Sub};

use num_traits::Float;

use crate::error::GeometryError;

/// A point or displacement in meters.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Point3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Point3 {
    pub const ORIGIN: Point3 = Point3::new(0.0, 0.0, 0.0);
    pub const X: Point3 = Point3::new(1.0, 0.0, 0.0);
    pub const Y: Point3 = Point3::new(0.0, 1.0, 0.0);
    pub const Z: Point3 = Point3::new(0.0, 0.0, 1.0);

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn dot(self, other: Point3) -> f64 {
        self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn cross(self, other: Point3) -> Point3 {
        Point3::new(
            self.y * other.z - self.z * other.y,
            self.z * other.x - self.x * other.z,
            self.x * other.y - self.y * other.x,
        )
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn distance(self, other: Point3) -> f64 {
        (self - other).norm()
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }
}

impl Add for Point3 {
    type Output = Point3;
    fn add(self, o: Point3) -> Point3 {
        Point3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl Sub for Point3 {
    type Output = Point3;
    fn sub(self, o: Point3) -> Point3 {
        Point3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Mul<f64> for Point3 {
    type Output = Point3;
    fn mul(self, s: f64) -> Point3 {
        Point3::new(self.x * s, self.y * s, self.z * s)
    }
}

impl Neg for Point3 {
    type Output = Point3;
    fn neg(self) -> Point3 {
        Point3::new(-self.x, -self.y, -self.z)
    }
}

/// Two microphones closer than this are considered coincident.
pub const COINCIDENCE_TOLERANCE: f64 = 1e-9;

/// Microphone positions, per-microphone weights and the reference center
/// from which `r_c` is measured.
#[derive(Debug, Clone, PartialEq)]
pub struct MicArray {
    positions: Vec<Point3>,
    weights: Vec<f64>,
    center: Point3,
}

impl MicArray {
    /// Builds an array with unit weights, centered on the centroid of the
    /// microphone positions.
    pub fn new(positions: Vec<Point3>) -> Result<Self, GeometryError> {
        let weights = alloc::vec![1.0; positions.len()];
        let center = centroid(&positions);
        Self::with_weights(positions, weights, center)
    }

    pub fn with_weights(
        positions: Vec<Point3>,
        weights: Vec<f64>,
        center: Point3,
    ) -> Result<Self, GeometryError> {
        if positions.len() < 2 {
            return Err(GeometryError::TooFewMicrophones(positions.len()));
        }
        if weights.len() != positions.len() {
            return Err(GeometryError::WeightCount {
                expected: positions.len(),
                got: weights.len(),
            });
        }
        if let Some(i) = positions.iter().position(|p| !p.is_finite()) {
            return Err(GeometryError::NonFinitePosition(i));
        }
        if !center.is_finite() {
            return Err(GeometryError::NonFiniteCenter);
        }
        for (i, a) in positions.iter().enumerate() {
            for (j, b) in positions.iter().enumerate().skip(i + 1) {
                if a.distance(*b) < COINCIDENCE_TOLERANCE {
                    return Err(GeometryError::CoincidentMicrophones(i, j));
                }
            }
        }
        if let Some(i) = weights.iter().position(|w| !(*w >= 0.0) || !w.is_finite()) {
            return Err(GeometryError::InvalidWeight(i));
        }
        if weights.iter().filter(|w| **w > 0.0).count() < 2 {
            return Err(GeometryError::TooFewActiveMicrophones);
        }
        Ok(Self {
            positions,
            weights,
            center,
        })
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn positions(&self) -> &[Point3] {
        &self.positions
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn center(&self) -> Point3 {
        self.center
    }

    /// True when every weight equals one.
    pub fn is_unweighted(&self) -> bool {
        self.weights.iter().all(|w| *w == 1.0)
    }

    /// Largest microphone distance from the array center.
    pub fn radius(&self) -> f64 {
        self.positions
            .iter()
            .map(|p| p.distance(self.center))
            .fold(0.0, f64::max)
    }

    /// Returns a copy with every position (and the center) multiplied by `s`.
    pub fn scaled(&self, s: f64) -> Result<Self, GeometryError> {
        Self::with_weights(
            self.positions.iter().map(|p| *p * s).collect(),
            self.weights.clone(),
            self.center * s,
        )
    }

    /// Returns a copy with every position (and the center) translated by `d`.
    pub fn translated(&self, d: Point3) -> Self {
        Self {
            positions: self.positions.iter().map(|p| *p + d).collect(),
            weights: self.weights.clone(),
            center: self.center + d,
        }
    }

    pub fn reweighted(&self, weights: Vec<f64>) -> Result<Self, GeometryError> {
        Self::with_weights(self.positions.clone(), weights, self.center)
    }
}

fn centroid(points: &[Point3]) -> Point3 {
    if points.is_empty() {
        return Point3::ORIGIN;
    }
    let sum = points.iter().fold(Point3::ORIGIN, |acc, p| acc + *p);
    sum * (1.0 / points.len() as f64)
}

/// Concentric rings in the `z = 0` plane centered on the origin. Ring `k`
/// holds `mics_per_ring[k]` microphones evenly spaced in angle, the first one
/// on the positive x axis.
pub fn make_ring_array(mics_per_ring: &[usize], radii: &[f64]) -> Result<MicArray, GeometryError> {
    if mics_per_ring.len() != radii.len() || radii.is_empty() {
        return Err(GeometryError::RingSpec);
    }
    if mics_per_ring.iter().any(|n| *n == 0) {
        return Err(GeometryError::EmptyRing);
    }
    if radii.iter().any(|r| !(*r > 0.0) || !r.is_finite()) || radii.windows(2).any(|w| w[1] <= w[0]) {
        return Err(GeometryError::RingRadii);
    }
    let mut positions = Vec::with_capacity(mics_per_ring.iter().sum());
    for (&count, &radius) in mics_per_ring.iter().zip(radii) {
        positions.extend(ring(count, radius));
    }
    MicArray::with_weights(
        positions.clone(),
        alloc::vec![1.0; positions.len()],
        Point3::ORIGIN,
    )
}

fn ring(count: usize, radius: f64) -> impl Iterator<Item = Point3> {
    (0..count).map(move |k| {
        let angle = 2.0 * PI * k as f64 / count as f64;
        Point3::new(radius * angle.cos(), radius * angle.sin(), 0.0)
    })
}

/// The default 41-microphone layout: one center microphone plus rings of
/// 8, 12 and 20 at 0.25, 0.55 and 1.0 times `radius`.
pub fn default_array(radius: f64) -> Result<MicArray, GeometryError> {
    if !(radius > 0.0) || !radius.is_finite() {
        return Err(GeometryError::RingRadii);
    }
    let rings = make_ring_array(&[8, 12, 20], &[0.25 * radius, 0.55 * radius, radius])?;
    let mut positions = Vec::with_capacity(rings.len() + 1);
    positions.push(Point3::ORIGIN);
    positions.extend_from_slice(rings.positions());
    MicArray::with_weights(
        positions.clone(),
        alloc::vec![1.0; positions.len()],
        Point3::ORIGIN,
    )
}

/// Planar rectangular grid of candidate source points.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanGrid {
    origin: Point3,
    u: Point3,
    v: Point3,
    spacing: f64,
    n_cols: usize,
    n_rows: usize,
}

impl ScanGrid {
    /// `origin` is the position of index 0; columns advance along `u`, rows
    /// along `v`.
    pub fn new(
        origin: Point3,
        u: Point3,
        v: Point3,
        spacing: f64,
        n_cols: usize,
        n_rows: usize,
    ) -> Result<Self, GeometryError> {
        if !(spacing > 0.0) || !spacing.is_finite() {
            return Err(GeometryError::GridSpacing);
        }
        if n_cols == 0 || n_rows == 0 {
            return Err(GeometryError::GridCounts);
        }
        if !origin.is_finite() {
            return Err(GeometryError::NonFiniteCenter);
        }
        let tol = 1e-12;
        if (u.norm() - 1.0).abs() > tol || (v.norm() - 1.0).abs() > tol || u.dot(v).abs() > tol {
            return Err(GeometryError::GridAxes);
        }
        Ok(Self {
            origin,
            u,
            v,
            spacing,
            n_cols,
            n_rows,
        })
    }

    pub fn len(&self) -> usize {
        self.n_cols * self.n_rows
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn origin(&self) -> Point3 {
        self.origin
    }

    pub fn axes(&self) -> (Point3, Point3) {
        (self.u, self.v)
    }

    pub fn normal(&self) -> Point3 {
        self.u.cross(self.v)
    }

    pub fn col_row(&self, index: usize) -> (usize, usize) {
        (index % self.n_cols, index / self.n_cols)
    }

    pub fn index_of(&self, col: usize, row: usize) -> usize {
        row * self.n_cols + col
    }

    /// In-plane coordinates (meters along `u`, `v`) of a grid index.
    pub fn plane_coords(&self, index: usize) -> (f64, f64) {
        let (col, row) = self.col_row(index);
        (col as f64 * self.spacing, row as f64 * self.spacing)
    }

    pub fn point(&self, index: usize) -> Point3 {
        let (s, t) = self.plane_coords(index);
        self.origin + self.u * s + self.v * t
    }

    pub fn points(&self) -> impl Iterator<Item = Point3> + '_ {
        (0..self.len()).map(move |i| self.point(i))
    }

    /// Position in the grid plane at fractional column/row coordinates.
    pub fn point_at(&self, col: f64, row: f64) -> Point3 {
        self.origin + self.u * (col * self.spacing) + self.v * (row * self.spacing)
    }

    /// Fractional column/row coordinates of `p` projected into the plane,
    /// plus its signed distance from the plane.
    pub fn locate(&self, p: Point3) -> (f64, f64, f64) {
        let d = p - self.origin;
        (
            d.dot(self.u) / self.spacing,
            d.dot(self.v) / self.spacing,
            d.dot(self.normal()),
        )
    }

    /// Geometric center of the grid.
    pub fn center(&self) -> Point3 {
        self.point_at(
            (self.n_cols - 1) as f64 / 2.0,
            (self.n_rows - 1) as f64 / 2.0,
        )
    }

    /// Indices of the 4-connected neighbors of `index`.
    pub fn neighbors4(&self, index: usize) -> impl Iterator<Item = usize> + '_ {
        let (col, row) = self.col_row(index);
        let candidates = [
            (col.wrapping_sub(1), row),
            (col + 1, row),
            (col, row.wrapping_sub(1)),
            (col, row + 1),
        ];
        candidates
            .into_iter()
            .filter(|(c, r)| *c < self.n_cols && *r < self.n_rows)
            .map(|(c, r)| self.index_of(c, r))
    }
}

/// A `width` x `height` grid in a plane parallel to `z = 0`, centered on
/// `center`, with `n_intervals` intervals across the width.
pub fn make_scan_grid(
    center: Point3,
    width: f64,
    height: f64,
    n_intervals: usize,
) -> Result<ScanGrid, GeometryError> {
    if !(width > 0.0) || !(height > 0.0) || !width.is_finite() || !height.is_finite() {
        return Err(GeometryError::GridDimensions);
    }
    if n_intervals == 0 {
        return Err(GeometryError::GridCounts);
    }
    let spacing = width / n_intervals as f64;
    let row_intervals = (height / spacing).round().max(1.0) as usize;
    let actual_height = row_intervals as f64 * spacing;
    let origin = center - Point3::X * (width / 2.0) - Point3::Y * (actual_height / 2.0);
    ScanGrid::new(
        origin,
        Point3::X,
        Point3::Y,
        spacing,
        n_intervals + 1,
        row_intervals + 1,
    )
}

/// Index of the grid point nearest to `point`. Ties go to the lower index.
/// Points more than one spacing outside the grid's bounding box, or more than
/// one spacing off its plane, are rejected.
pub fn nearest_grid_index(grid: &ScanGrid, point: Point3) -> Result<usize, GeometryError> {
    let (s, t, off) = grid.locate(point);
    let max_col = (grid.n_cols - 1) as f64;
    let max_row = (grid.n_rows - 1) as f64;
    let outside = !(s >= -1.0 && s <= max_col + 1.0 && t >= -1.0 && t <= max_row + 1.0)
        || !(off.abs() <= grid.spacing);
    if outside {
        return Err(GeometryError::OutsideGrid);
    }
    let col = round_half_down(s).clamp(0.0, max_col) as usize;
    let row = round_half_down(t).clamp(0.0, max_row) as usize;
    Ok(grid.index_of(col, row))
}

fn round_half_down(x: f64) -> f64 {
    (x - 0.5).ceil()
}

/// Speed of sound and SPL reference pressure.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Medium {
    sound_speed: f64,
    reference_pressure: f64,
}

impl Medium {
    pub fn new(sound_speed: f64, reference_pressure: f64) -> Result<Self, GeometryError> {
        if !(sound_speed > 0.0) || !sound_speed.is_finite() {
            return Err(GeometryError::Medium);
        }
        if !(reference_pressure > 0.0) || !reference_pressure.is_finite() {
            return Err(GeometryError::Medium);
        }
        Ok(Self {
            sound_speed,
            reference_pressure,
        })
    }

    pub fn sound_speed(&self) -> f64 {
        self.sound_speed
    }

    pub fn reference_pressure(&self) -> f64 {
        self.reference_pressure
    }

    pub fn wavelength(&self, frequency: f64) -> f64 {
        self.sound_speed / frequency
    }
}

impl Default for Medium {
    /// Air: 343 m/s, 20 µPa.
    fn default() -> Self {
        Self {
            sound_speed: 343.0,
            reference_pressure: 20e-6,
        }
    }
}

/// A monopole. `amplitude` is the RMS pressure (Pa) the source produces at
/// the array center, so its mean-square contribution there is
/// `amplitude^2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Source {
    pub position: Point3,
    pub frequency: f64,
    pub amplitude: f64,
}

impl Source {
    pub fn new(position: Point3, frequency: f64, amplitude: f64) -> Result<Self, GeometryError> {
        if !position.is_finite() {
            return Err(GeometryError::SourcePosition);
        }
        if !(frequency > 0.0) || !frequency.is_finite() {
            return Err(GeometryError::SourceFrequency);
        }
        if !(amplitude >= 0.0) || !amplitude.is_finite() {
            return Err(GeometryError::SourceAmplitude);
        }
        Ok(Self {
            position,
            frequency,
            amplitude,
        })
    }

    /// Source whose mean-square pressure at the array center is `level_db`
    /// re `p_ref`.
    pub fn from_level(
        position: Point3,
        frequency: f64,
        level_db: f64,
        p_ref: f64,
    ) -> Result<Self, GeometryError> {
        Self::new(position, frequency, p_ref * Float::powf(10.0, level_db / 20.0))
    }

    pub fn power(&self) -> f64 {
        self.amplitude * self.amplitude
    }
}

/// A set of mutually incoherent monopoles.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SourceScene {
    sources: Vec<Source>,
}

impl SourceScene {
    pub fn new(sources: Vec<Source>) -> Self {
        Self { sources }
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn push(&mut self, source: Source) {
        self.sources.push(source);
    }

    pub fn sources(&self) -> &[Source] {
        &self.sources
    }

    pub fn len(&self) -> usize {
        self.sources.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sources.is_empty()
    }

    /// Union of two scenes.
    pub fn merged(&self, other: &SourceScene) -> SourceScene {
        let mut sources = self.sources.clone();
        sources.extend_from_slice(&other.sources);
        SourceScene { sources }
    }

    /// Incoherent sum of the mean-square pressures of every source.
    pub fn total_power(&self) -> f64 {
        self.sources.iter().map(Source::power).sum()
    }
}

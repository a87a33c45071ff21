//! Steering vectors and cross-spectral matrices.
//!
//! Conventions used throughout the crate:
//!
//! * a steering component is `e[m] = (r_m / r_c) * exp(+j 2 pi f (r_m / c + dt_m))`
//!   where `r_m` is the microphone-to-point distance and `r_c` the
//!   array-center-to-point distance;
//! * a monopole of RMS amplitude `a` (referenced to the array center)
//!   produces `p[m] = a * (r_c / r_m) * exp(-j 2 pi f (r_m / c + dt_m))`, which
//!   is `a / e[m]` for a source sitting on the steered point;
//! * the cross-spectral matrix is `PP = P P^H`, i.e. `PP[i][j] = p_i conj(p_j)`.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;

use crate::error::SpectraError;
use crate::geometry::{MicArray, Medium, Point3, ScanGrid, SourceScene, COINCIDENCE_TOLERANCE};

/// Extra propagation delay (seconds) between a point and a microphone, e.g.
/// from refraction through a wind-tunnel shear layer.
pub trait DelayModel {
    fn delay(&self, mic: Point3, point: Point3) -> f64;
}

/// Free-field propagation: no extra delay.
#[derive(Debug, Clone, Copy, Default)]
pub struct NoShear;

impl DelayModel for NoShear {
    fn delay(&self, _mic: Point3, _point: Point3) -> f64 {
        0.0
    }
}

impl<F: Fn(Point3, Point3) -> f64> DelayModel for F {
    fn delay(&self, mic: Point3, point: Point3) -> f64 {
        self(mic, point)
    }
}

/// Relative tolerance used when matching a source frequency to an analysis
/// frequency.
pub const FREQUENCY_MATCH_TOLERANCE: f64 = 1e-9;

pub(crate) fn same_frequency(a: f64, b: f64) -> bool {
    (a - b).abs() <= FREQUENCY_MATCH_TOLERANCE * a.abs().max(b.abs())
}

fn check_frequency(f: f64) -> Result<(), SpectraError> {
    if f > 0.0 && f.is_finite() {
        Ok(())
    } else {
        Err(SpectraError::Frequency(f))
    }
}

/// Steering vectors for every grid point at one frequency.
#[derive(Debug, Clone, PartialEq)]
pub struct SteeringSet {
    grid: ScanGrid,
    frequency: f64,
    n_mics: usize,
    n_points: usize,
    // point-major: component (m, n) lives at n * n_mics + m
    components: Vec<Complex64>,
    mic_distances: Vec<f64>,
    center_distances: Vec<f64>,
}

impl SteeringSet {
    pub fn grid(&self) -> &ScanGrid {
        &self.grid
    }

    pub fn frequency(&self) -> f64 {
        self.frequency
    }

    pub fn n_mics(&self) -> usize {
        self.n_mics
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    /// Steering vector of grid point `n`.
    pub fn vector(&self, n: usize) -> &[Complex64] {
        &self.components[n * self.n_mics..(n + 1) * self.n_mics]
    }

    pub fn vector_mut(&mut self, n: usize) -> &mut [Complex64] {
        &mut self.components[n * self.n_mics..(n + 1) * self.n_mics]
    }

    /// Distances from grid point `n` to each microphone.
    pub fn mic_distances(&self, n: usize) -> &[f64] {
        &self.mic_distances[n * self.n_mics..(n + 1) * self.n_mics]
    }

    /// Distance from the array center to grid point `n`.
    pub fn center_distance(&self, n: usize) -> f64 {
        self.center_distances[n]
    }

    /// Builds a steering set from explicit vectors, one per grid point.
    /// Distances are derived from the component magnitudes with `r_c = 1`.
    pub fn from_vectors(
        grid: ScanGrid,
        frequency: f64,
        vectors: &[Vec<Complex64>],
    ) -> Result<Self, SpectraError> {
        check_frequency(frequency)?;
        if vectors.len() != grid.len() {
            return Err(SpectraError::Dimension(grid.len(), vectors.len()));
        }
        let n_mics = vectors.first().map_or(0, Vec::len);
        let mut components = Vec::with_capacity(n_mics * vectors.len());
        for v in vectors {
            if v.len() != n_mics {
                return Err(SpectraError::Dimension(n_mics, v.len()));
            }
            components.extend_from_slice(v);
        }
        let mic_distances = components.iter().map(|c| c.norm()).collect();
        Ok(Self {
            grid,
            frequency,
            n_mics,
            n_points: vectors.len(),
            components,
            mic_distances,
            center_distances: vec![1.0; vectors.len()],
        })
    }
}

/// Computes the steering vector of every grid point.
pub fn build_steering_set(
    grid: &ScanGrid,
    array: &MicArray,
    frequency: f64,
    medium: &Medium,
    delays: &dyn DelayModel,
) -> Result<SteeringSet, SpectraError> {
    check_frequency(frequency)?;
    let m0 = array.len();
    let n_points = grid.len();
    let omega = 2.0 * PI * frequency;
    let c = medium.sound_speed();
    let mut components = Vec::with_capacity(m0 * n_points);
    let mut mic_distances = Vec::with_capacity(m0 * n_points);
    let mut center_distances = Vec::with_capacity(n_points);
    for n in 0..n_points {
        let point = grid.point(n);
        let r_c = point.distance(array.center());
        if r_c < COINCIDENCE_TOLERANCE {
            return Err(SpectraError::GridOnCenter(n));
        }
        center_distances.push(r_c);
        for (m, &mic) in array.positions().iter().enumerate() {
            let r_m = point.distance(mic);
            if r_m < COINCIDENCE_TOLERANCE {
                return Err(SpectraError::GridOnMicrophone { point: n, mic: m });
            }
            let dt = delays.delay(mic, point);
            if !dt.is_finite() {
                return Err(SpectraError::NonFiniteDelay);
            }
            let phase = omega * (r_m / c + dt);
            components.push(Complex64::from_polar(r_m / r_c, phase));
            mic_distances.push(r_m);
        }
    }
    Ok(SteeringSet {
        grid: *grid,
        frequency,
        n_mics: m0,
        n_points,
        components,
        mic_distances,
        center_distances,
    })
}

/// Hermitian `m0 x m0` cross-spectral matrix at one frequency (or band).
#[derive(Debug, Clone, PartialEq)]
pub struct CrossSpectralMatrix {
    frequency: f64,
    n: usize,
    data: Vec<Complex64>,
    weights: Vec<f64>,
    weighted: bool,
    diagonal_removed: bool,
}

impl CrossSpectralMatrix {
    pub fn zeros(frequency: f64, n: usize) -> Self {
        Self {
            frequency,
            n,
            data: vec![Complex64::new(0.0, 0.0); n * n],
            weights: vec![1.0; n],
            weighted: false,
            diagonal_removed: false,
        }
    }

    /// Wraps row-major entries. The caller is responsible for Hermitian
    /// symmetry; see [`CrossSpectralMatrix::is_hermitian`].
    pub fn from_data(frequency: f64, n: usize, data: Vec<Complex64>) -> Result<Self, SpectraError> {
        if data.len() != n * n {
            return Err(SpectraError::Dimension(n * n, data.len()));
        }
        Ok(Self {
            frequency,
            n,
            data,
            weights: vec![1.0; n],
            weighted: false,
            diagonal_removed: false,
        })
    }

    pub fn frequency(&self) -> f64 {
        self.frequency
    }

    /// Number of microphones.
    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.data[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[Complex64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn is_weighted(&self) -> bool {
        self.weighted
    }

    pub fn is_diagonal_removed(&self) -> bool {
        self.diagonal_removed
    }

    /// Adds `scale * p p^H`.
    pub fn add_outer(&mut self, p: &[Complex64], scale: f64) {
        debug_assert_eq!(p.len(), self.n);
        for (i, &pi) in p.iter().enumerate() {
            let row = &mut self.data[i * self.n..(i + 1) * self.n];
            for (entry, &pj) in row.iter_mut().zip(p) {
                *entry += pi * pj.conj() * scale;
            }
        }
    }

    /// Entrywise sum; both operands must share dimension and processing state.
    pub fn accumulate(&mut self, other: &CrossSpectralMatrix) -> Result<(), SpectraError> {
        if other.n != self.n {
            return Err(SpectraError::Dimension(self.n, other.n));
        }
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += *b;
        }
        Ok(())
    }

    /// Incoherent sum of several CSMs, labeled with `frequency` (a band
    /// center, for example).
    pub fn sum<'a, I>(frequency: f64, n: usize, parts: I) -> Result<Self, SpectraError>
    where
        I: IntoIterator<Item = &'a CrossSpectralMatrix>,
    {
        let mut total = Self::zeros(frequency, n);
        for part in parts {
            total.accumulate(part)?;
        }
        Ok(total)
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        let mut out = self.clone();
        for v in &mut out.data {
            *v *= alpha;
        }
        out
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.n).map(|i| self.get(i, i)).sum()
    }

    /// Checks `PP[i][j] == conj(PP[j][i])` up to `tol` times the largest
    /// entry magnitude.
    pub fn is_hermitian(&self, tol: f64) -> bool {
        let scale = self.data.iter().map(|c| c.norm()).fold(0.0, f64::max);
        let bound = tol * scale.max(f64::MIN_POSITIVE);
        for i in 0..self.n {
            for j in i..self.n {
                if (self.get(i, j) - self.get(j, i).conj()).norm() > bound {
                    return false;
                }
            }
        }
        true
    }

    /// Beamforming denominator implied by the weights and the diagonal
    /// state: `(sum w)^2`, minus `sum w^2` once the diagonal is removed.
    /// With unit weights this is `m0^2` or `m0^2 - m0`.
    pub fn denominator(&self) -> f64 {
        weighted_denominator(&self.weights, self.diagonal_removed)
    }
}

pub(crate) fn weighted_denominator(weights: &[f64], diagonal_removed: bool) -> f64 {
    let sum: f64 = weights.iter().sum();
    let sum_sq: f64 = weights.iter().map(|w| w * w).sum();
    if diagonal_removed {
        sum * sum - sum_sq
    } else {
        sum * sum
    }
}

/// Cross-spectral matrix of an incoherent source scene at `frequency`.
/// Sources at other frequencies are ignored.
pub fn synthesize_csm(
    scene: &SourceScene,
    array: &MicArray,
    frequency: f64,
    medium: &Medium,
    delays: &dyn DelayModel,
) -> Result<CrossSpectralMatrix, SpectraError> {
    check_frequency(frequency)?;
    let m0 = array.len();
    let mut csm = CrossSpectralMatrix::zeros(frequency, m0);
    let mut pressure = vec![Complex64::new(0.0, 0.0); m0];
    for (s, source) in scene.sources().iter().enumerate() {
        if !same_frequency(source.frequency, frequency) {
            continue;
        }
        source_pressures(source.position, source.amplitude, array, frequency, medium, delays, &mut pressure)
            .map_err(|mic| match mic {
                Some(mic) => SpectraError::SourceOnMicrophone { source_index: s, mic },
                None => SpectraError::NonFiniteDelay,
            })?;
        csm.add_outer(&pressure, 1.0);
    }
    Ok(csm)
}

/// Complex pressure at every microphone from one monopole. On failure returns
/// the microphone the source coincides with, or `None` for a bad delay.
pub fn source_pressures(
    position: Point3,
    amplitude: f64,
    array: &MicArray,
    frequency: f64,
    medium: &Medium,
    delays: &dyn DelayModel,
    out: &mut [Complex64],
) -> Result<(), Option<usize>> {
    let omega = 2.0 * PI * frequency;
    let c = medium.sound_speed();
    let r_c = position.distance(array.center());
    for (m, (&mic, p)) in array.positions().iter().zip(out.iter_mut()).enumerate() {
        let r_m = position.distance(mic);
        if r_m < COINCIDENCE_TOLERANCE {
            return Err(Some(m));
        }
        let dt = delays.delay(mic, position);
        if !dt.is_finite() {
            return Err(None);
        }
        *p = Complex64::from_polar(amplitude * r_c / r_m, -omega * (r_m / c + dt));
    }
    Ok(())
}

/// `PP_new = W PP W^T` with `W = diag(weights)`. The weights are recorded so
/// that beamforming denominators account for them.
pub fn apply_weighting(
    csm: &CrossSpectralMatrix,
    weights: &[f64],
) -> Result<CrossSpectralMatrix, SpectraError> {
    if weights.len() != csm.n {
        return Err(SpectraError::WeightCount {
            expected: csm.n,
            got: weights.len(),
        });
    }
    if let Some(i) = weights.iter().position(|w| !(*w >= 0.0) || !w.is_finite()) {
        return Err(SpectraError::InvalidWeight(i));
    }
    let mut out = csm.clone();
    for i in 0..csm.n {
        for j in 0..csm.n {
            out.data[i * csm.n + j] *= weights[i] * weights[j];
        }
    }
    for (acc, w) in out.weights.iter_mut().zip(weights) {
        *acc *= w;
    }
    out.weighted = true;
    Ok(out)
}

/// Zeroes the diagonal (microphone auto-spectra).
pub fn remove_diagonal(csm: &CrossSpectralMatrix) -> Result<CrossSpectralMatrix, SpectraError> {
    if csm.diagonal_removed {
        return Err(SpectraError::DiagonalAlreadyRemoved);
    }
    let mut out = csm.clone();
    for i in 0..csm.n {
        out.data[i * csm.n + i] = Complex64::new(0.0, 0.0);
    }
    out.diagonal_removed = true;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{make_ring_array, make_scan_grid, Source};

    fn ring8() -> MicArray {
        make_ring_array(&[8], &[1.0]).unwrap()
    }

    #[test]
    fn on_axis_point_has_equal_components() {
        let array = ring8();
        let grid = ScanGrid::new(Point3::new(0.0, 0.0, 3.0), Point3::X, Point3::Y, 1.0, 1, 1).unwrap();
        let s = build_steering_set(&grid, &array, 1234.0, &Medium::default(), &NoShear).unwrap();
        let e = s.vector(0);
        for c in e {
            assert!((*c - e[0]).norm() < 1e-12);
        }
    }

    #[test]
    fn phase_matches_propagation_delay() {
        let array = MicArray::new(vec![Point3::ORIGIN, Point3::X]).unwrap();
        let grid = ScanGrid::new(Point3::new(0.0, 0.0, 65.0), Point3::X, Point3::Y, 1.0, 1, 1).unwrap();
        let medium = Medium::new(343.0, 20e-6).unwrap();
        let s = build_steering_set(&grid, &array, 1000.0, &medium, &NoShear).unwrap();
        let r = s.mic_distances(0)[0];
        assert_eq!(r, 65.0);
        let expected = (2.0 * PI * 1000.0 * r / 343.0).rem_euclid(2.0 * PI);
        let got = s.vector(0)[0].arg().rem_euclid(2.0 * PI);
        let diff = (got - expected).abs();
        assert!(diff < 1e-9 || (2.0 * PI - diff) < 1e-9, "{got} vs {expected}");
    }

    #[test]
    fn doubling_frequency_doubles_phase() {
        let array = ring8().translated(Point3::new(0.1, -0.2, 0.0));
        let grid = make_scan_grid(Point3::new(0.3, 0.2, 2.0), 1.0, 1.0, 3).unwrap();
        let m = Medium::default();
        let a = build_steering_set(&grid, &array, 700.0, &m, &NoShear).unwrap();
        let b = build_steering_set(&grid, &array, 1400.0, &m, &NoShear).unwrap();
        for n in 0..grid.len() {
            for (x, y) in a.vector(n).iter().zip(b.vector(n)) {
                assert!((x.norm() - y.norm()).abs() < 1e-15);
                let doubled = Complex64::from_polar(1.0, 2.0 * x.arg());
                let actual = Complex64::from_polar(1.0, y.arg());
                assert!((doubled - actual).norm() < 1e-9);
            }
        }
    }

    #[test]
    fn grid_on_microphone_is_rejected() {
        let array = ring8();
        let grid = ScanGrid::new(Point3::X, Point3::X, Point3::Y, 1.0, 1, 1).unwrap();
        let err = build_steering_set(&grid, &array, 1000.0, &Medium::default(), &NoShear);
        assert!(matches!(err, Err(SpectraError::GridOnMicrophone { point: 0, mic: 0 })));
    }

    #[test]
    fn empty_scene_gives_zero_matrix() {
        let csm = synthesize_csm(&SourceScene::empty(), &ring8(), 500.0, &Medium::default(), &NoShear).unwrap();
        assert!(csm.data().iter().all(|c| *c == Complex64::new(0.0, 0.0)));
    }

    #[test]
    fn single_source_trace_matches_direct_pressure_sum() {
        let array = make_ring_array(&[5, 7], &[0.4, 0.9]).unwrap();
        let pos = Point3::new(0.7, -0.3, 4.0);
        let amp = 1.7;
        let scene = SourceScene::new(vec![Source::new(pos, 900.0, amp).unwrap()]);
        let csm = synthesize_csm(&scene, &array, 900.0, &Medium::default(), &NoShear).unwrap();
        let r_c = pos.distance(array.center());
        let direct: f64 = array
            .positions()
            .iter()
            .map(|mic| {
                let p = amp * r_c / pos.distance(*mic);
                p * p
            })
            .sum();
        assert!((csm.trace().re - direct).abs() < 1e-12 * direct);
        assert!(csm.trace().im.abs() < 1e-12);
        // rank one: every 2x2 minor vanishes
        for i in 0..array.len() {
            for j in 0..array.len() {
                let minor = csm.get(i, i) * csm.get(j, j) - csm.get(i, j) * csm.get(j, i);
                assert!(minor.norm() < 1e-10 * direct * direct);
            }
        }
    }

    #[test]
    fn other_frequencies_are_ignored() {
        let s = Source::new(Point3::new(0.0, 0.0, 2.0), 1000.0, 1.0).unwrap();
        let scene = SourceScene::new(vec![s]);
        let csm = synthesize_csm(&scene, &ring8(), 1001.0, &Medium::default(), &NoShear).unwrap();
        assert_eq!(csm.trace().re, 0.0);
    }

    #[test]
    fn duplicated_source_doubles_csm() {
        let s = Source::new(Point3::new(0.2, 0.0, 2.0), 1000.0, 1.3).unwrap();
        let one = synthesize_csm(&SourceScene::new(vec![s]), &ring8(), 1000.0, &Medium::default(), &NoShear).unwrap();
        let two = synthesize_csm(&SourceScene::new(vec![s, s]), &ring8(), 1000.0, &Medium::default(), &NoShear).unwrap();
        for (a, b) in one.data().iter().zip(two.data()) {
            assert!((*a * 2.0 - *b).norm() <= 1e-15 * b.norm().max(1.0));
        }
    }

    #[test]
    fn source_on_microphone_is_rejected() {
        let s = Source::new(Point3::X, 1000.0, 1.0).unwrap();
        let r = synthesize_csm(&SourceScene::new(vec![s]), &ring8(), 1000.0, &Medium::default(), &NoShear);
        assert!(matches!(r, Err(SpectraError::SourceOnMicrophone { source_index: 0, mic: 0 })));
    }

    fn sample_csm() -> CrossSpectralMatrix {
        let scene = SourceScene::new(vec![
            Source::new(Point3::new(0.2, 0.1, 2.0), 800.0, 1.0).unwrap(),
            Source::new(Point3::new(-0.4, 0.3, 2.5), 800.0, 0.5).unwrap(),
        ]);
        synthesize_csm(&scene, &ring8(), 800.0, &Medium::default(), &NoShear).unwrap()
    }

    #[test]
    fn weighting_cases() {
        let csm = sample_csm();
        let same = apply_weighting(&csm, &[1.0; 8]).unwrap();
        assert_eq!(same.data(), csm.data());
        let mut w = [1.0; 8];
        w[3] = 0.0;
        let zeroed = apply_weighting(&csm, &w).unwrap();
        for k in 0..8 {
            assert_eq!(zeroed.get(3, k), Complex64::new(0.0, 0.0));
            assert_eq!(zeroed.get(k, 3), Complex64::new(0.0, 0.0));
        }
        let doubled = apply_weighting(&csm, &[2.0; 8]).unwrap();
        for (a, b) in csm.data().iter().zip(doubled.data()) {
            assert_eq!(*a * 4.0, *b);
        }
        assert_eq!(doubled.denominator(), 256.0);
        assert!(matches!(
            apply_weighting(&csm, &[-1.0; 8]),
            Err(SpectraError::InvalidWeight(0))
        ));
    }

    #[test]
    fn diagonal_removal_cases() {
        let mut diag = CrossSpectralMatrix::zeros(100.0, 3);
        for i in 0..3 {
            diag.data[i * 3 + i] = Complex64::new(2.5, 0.0);
        }
        let removed = remove_diagonal(&diag).unwrap();
        assert!(removed.data().iter().all(|c| *c == Complex64::new(0.0, 0.0)));

        let csm = sample_csm();
        let removed = remove_diagonal(&csm).unwrap();
        assert_eq!(removed.trace(), Complex64::new(0.0, 0.0));
        for i in 0..8 {
            for j in 0..8 {
                if i != j {
                    assert_eq!(removed.get(i, j), csm.get(i, j));
                }
            }
        }
        assert_eq!(removed.denominator(), 56.0);
        assert_eq!(remove_diagonal(&removed), Err(SpectraError::DiagonalAlreadyRemoved));
    }
}

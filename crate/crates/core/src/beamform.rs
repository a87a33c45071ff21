//! Conventional frequency-domain beamforming maps and level bookkeeping.

use alloc::collections::VecDeque;
use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;
use num_traits::Float;

use crate::error::BeamformError;
use crate::geometry::ScanGrid;
use crate::spectra::{same_frequency, CrossSpectralMatrix, SteeringSet};

/// Relative size of the imaginary residue tolerated in a beamform output.
pub const IMAGINARY_TOLERANCE: f64 = 1e-10;

/// Power ratio of the -3 dB contour.
pub fn minus_3db() -> f64 {
    Float::powf(10.0, -0.3)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MapKind {
    Beamform,
    Damas,
}

/// Processing metadata carried with a map.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MapInfo {
    /// Analysis frequency, or band center.
    pub frequency: f64,
    /// DAMAS iterations (forward + backward sweep pairs) behind the map.
    pub iterations: Option<usize>,
    pub weighted: bool,
    pub diagonal_removed: bool,
}

/// Mean-square pressure (Pa^2, referenced to the array center) at every grid
/// point.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceMap {
    grid: ScanGrid,
    values: Vec<f64>,
    kind: MapKind,
    info: MapInfo,
}

impl SourceMap {
    pub fn new(
        grid: ScanGrid,
        values: Vec<f64>,
        kind: MapKind,
        info: MapInfo,
    ) -> Result<Self, BeamformError> {
        if values.len() != grid.len() {
            return Err(BeamformError::Length {
                map: values.len(),
                grid: grid.len(),
            });
        }
        Ok(Self {
            grid,
            values,
            kind,
            info,
        })
    }

    pub fn zeros(grid: ScanGrid, kind: MapKind, info: MapInfo) -> Self {
        Self {
            grid,
            values: vec![0.0; grid.len()],
            kind,
            info,
        }
    }

    pub fn grid(&self) -> &ScanGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn kind(&self) -> MapKind {
        self.kind
    }

    pub fn info(&self) -> &MapInfo {
        &self.info
    }

    pub fn info_mut(&mut self) -> &mut MapInfo {
        &mut self.info
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Index and value of the largest entry (first one on ties).
    pub fn peak(&self) -> (usize, f64) {
        self.values
            .iter()
            .copied()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |best, (i, v)| if v > best.1 { (i, v) } else { best })
    }

    /// Sum of the positive entries.
    pub fn total_power(&self) -> f64 {
        self.values.iter().map(|v| v.max(0.0)).sum()
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= alpha);
        out
    }
}

/// `Y_n = e_n^T PP conj(e_n) / D` for every grid point, with `D` taken from
/// the CSM's weighting and diagonal state.
pub fn beamform_map(
    csm: &CrossSpectralMatrix,
    steer: &SteeringSet,
) -> Result<SourceMap, BeamformError> {
    if !same_frequency(csm.frequency(), steer.frequency()) {
        return Err(BeamformError::FrequencyMismatch {
            csm: csm.frequency(),
            steering: steer.frequency(),
        });
    }
    if csm.dim() != steer.n_mics() {
        return Err(BeamformError::Dimension {
            csm: csm.dim(),
            steering: steer.n_mics(),
        });
    }
    let denominator = csm.denominator();
    if !(denominator > 0.0) {
        return Err(BeamformError::ZeroDenominator);
    }
    let mut values = Vec::with_capacity(steer.n_points());
    for n in 0..steer.n_points() {
        let (y, scale) = quadratic_form(csm, steer.vector(n));
        if y.im.abs() > IMAGINARY_TOLERANCE * scale {
            return Err(BeamformError::NotReal(n));
        }
        values.push(y.re / denominator);
    }
    Ok(SourceMap {
        grid: *steer.grid(),
        values,
        kind: MapKind::Beamform,
        info: MapInfo {
            frequency: csm.frequency(),
            iterations: None,
            weighted: csm.is_weighted(),
            diagonal_removed: csm.is_diagonal_removed(),
        },
    })
}

/// `e^T PP conj(e)` together with the magnitude scale `sum |e_i| |PP_ij| |e_j|`.
fn quadratic_form(csm: &CrossSpectralMatrix, e: &[Complex64]) -> (Complex64, f64) {
    let mut total = Complex64::new(0.0, 0.0);
    let mut scale = 0.0;
    for (i, ei) in e.iter().enumerate() {
        let mut acc = Complex64::new(0.0, 0.0);
        let mut mag = 0.0;
        for (pij, ej) in csm.row(i).iter().zip(e) {
            acc += pij * ej.conj();
            mag += pij.norm() * ej.norm();
        }
        total += ei * acc;
        scale += ei.norm() * mag;
    }
    (total, scale)
}

/// `10 log10(X / p_ref^2)` per grid point; non-positive values map to
/// negative infinity.
pub fn to_spl(map: &SourceMap, p_ref: f64) -> Vec<f64> {
    map.values.iter().map(|&x| level_db(x, p_ref)).collect()
}

pub fn level_db(mean_square: f64, p_ref: f64) -> f64 {
    if mean_square > 0.0 {
        10.0 * Float::log10(mean_square / (p_ref * p_ref))
    } else {
        f64::NEG_INFINITY
    }
}

/// Level of the incoherent sum over `indices`; negative entries count as zero.
pub fn integrate_region(map: &SourceMap, indices: &[usize], p_ref: f64) -> Result<f64, BeamformError> {
    if indices.is_empty() {
        return Err(BeamformError::EmptyRegion);
    }
    let mut sum = 0.0;
    for &i in indices {
        let v = map
            .values
            .get(i)
            .ok_or(BeamformError::IndexOutOfRange { index: i, len: map.len() })?;
        sum += v.max(0.0);
    }
    Ok(level_db(sum, p_ref))
}

/// The 4-connected region around the global peak where the map stays within
/// 3 dB of the peak. Sorted by index.
pub fn mainlobe_region(map: &SourceMap) -> Result<Vec<usize>, BeamformError> {
    connected_region_above(map, minus_3db())
}

/// The 4-connected region around the global peak where `value >= ratio * peak`.
pub fn connected_region_above(map: &SourceMap, ratio: f64) -> Result<Vec<usize>, BeamformError> {
    let (peak_index, peak) = map.peak();
    let flat = map.values.iter().all(|v| *v == peak);
    if !(peak > 0.0) || flat {
        return Err(BeamformError::FlatMap);
    }
    let threshold = ratio * peak;
    let mut inside = vec![false; map.len()];
    let mut queue = VecDeque::new();
    inside[peak_index] = true;
    queue.push_back(peak_index);
    while let Some(i) = queue.pop_front() {
        for j in map.grid.neighbors4(i) {
            if !inside[j] && map.values[j] >= threshold {
                inside[j] = true;
                queue.push_back(j);
            }
        }
    }
    Ok(inside
        .iter()
        .enumerate()
        .filter_map(|(i, &b)| b.then_some(i))
        .collect())
}

/// Main-lobe width `B`: twice the largest distance from the peak to a point of
/// its -3 dB region. A lobe confined to the peak cell reports the grid
/// spacing.
pub fn mainlobe_width(map: &SourceMap) -> Result<f64, BeamformError> {
    let region = mainlobe_region(map)?;
    let (peak_index, _) = map.peak();
    let peak = map.grid.point(peak_index);
    let reach = region
        .iter()
        .map(|&i| map.grid.point(i).distance(peak))
        .fold(0.0, f64::max);
    if reach == 0.0 {
        Ok(map.grid.spacing())
    } else {
        Ok(2.0 * reach)
    }
}

//! Map metrics used to score scenario runs.

use alloc::vec::Vec;

use crate::beamform::{level_db, mainlobe_region, SourceMap};
use crate::geometry::Point3;

/// Peak-relative power ratio for a level `floor_db` below the peak.
pub fn ratio_below_peak(floor_db: f64) -> f64 {
    num_traits::Float::powf(10.0, -floor_db / 10.0)
}

/// Indices within `radius` meters of grid point `center`.
pub fn disc(map: &SourceMap, center: usize, radius: f64) -> Vec<usize> {
    let grid = map.grid();
    let c = grid.point(center);
    (0..grid.len())
        .filter(|&i| grid.point(i).distance(c) <= radius)
        .collect()
}

/// Level (dB re `p_ref`) integrated over the disc of `radius` around the
/// peak.
pub fn mainlobe_level(map: &SourceMap, radius: f64, p_ref: f64) -> f64 {
    let (peak, _) = map.peak();
    let sum: f64 = disc(map, peak, radius)
        .iter()
        .map(|&i| map.values()[i].max(0.0))
        .sum();
    level_db(sum, p_ref)
}

/// Number of grid points outside the disc of `radius` around the peak whose
/// value is within `floor_db` of the peak.
pub fn false_sources(map: &SourceMap, radius: f64, floor_db: f64) -> usize {
    let (peak_index, peak) = map.peak();
    if !(peak > 0.0) {
        return 0;
    }
    let threshold = peak * ratio_below_peak(floor_db);
    let grid = map.grid();
    let c = grid.point(peak_index);
    map.values()
        .iter()
        .enumerate()
        .filter(|(i, v)| **v >= threshold && grid.point(*i).distance(c) > radius)
        .count()
}

/// Fraction of grid points within `floor_db` of the peak.
pub fn coverage(map: &SourceMap, floor_db: f64) -> f64 {
    let (_, peak) = map.peak();
    if !(peak > 0.0) {
        return 0.0;
    }
    let threshold = peak * ratio_below_peak(floor_db);
    map.values().iter().filter(|v| **v >= threshold).count() as f64 / map.len() as f64
}

/// `|10 log10(sum X / setpoint)|` in dB.
pub fn total_power_error(map: &SourceMap, setpoint: f64) -> f64 {
    let total = map.total_power();
    if total > 0.0 && setpoint > 0.0 {
        (10.0 * num_traits::Float::log10(total / setpoint)).abs()
    } else {
        f64::INFINITY
    }
}

/// Fraction of the recovered power lying within one grid cell of a true
/// source: at most 1.5 cells away along each grid axis, so a source on a grid
/// point claims its 3x3 neighborhood and one between grid points the
/// surrounding 4x4 block.
pub fn legibility(map: &SourceMap, truth: &[Point3]) -> f64 {
    let grid = map.grid();
    let located: Vec<(f64, f64)> = truth
        .iter()
        .map(|p| {
            let (s, t, _) = grid.locate(*p);
            (s, t)
        })
        .collect();
    let total = map.total_power();
    if !(total > 0.0) {
        return 0.0;
    }
    let near: f64 = (0..grid.len())
        .filter(|&i| {
            let (col, row) = grid.col_row(i);
            let (c, r) = (col as f64, row as f64);
            located
                .iter()
                .any(|(s, t)| (c - s).abs() <= 1.5 + 1e-9 && (r - t).abs() <= 1.5 + 1e-9)
        })
        .map(|i| map.values()[i].max(0.0))
        .sum();
    near / total
}

/// Strongest-to-weakest spread (dB) over the given grid points; infinite if
/// any of them is zero.
pub fn spread_db(map: &SourceMap, indices: &[usize]) -> f64 {
    let values = indices.iter().map(|&i| map.values()[i].max(0.0));
    let (lo, hi) = values.fold((f64::INFINITY, 0.0_f64), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if lo > 0.0 {
        10.0 * num_traits::Float::log10(hi / lo)
    } else {
        f64::INFINITY
    }
}

/// Whether every index lies inside the map's -3 dB main lobe.
pub fn lobe_contains(map: &SourceMap, indices: &[usize]) -> bool {
    match mainlobe_region(map) {
        Ok(region) => indices.iter().all(|i| region.binary_search(i).is_ok()),
        Err(_) => false,
    }
}

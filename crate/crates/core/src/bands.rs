//! Base-10 third-octave bands.
//!
//! Exact centers are `1000 * 10^(k/10)` Hz; band edges sit a factor
//! `10^(1/20)` either side. Nominal (labelled) centers use the preferred
//! series 1, 1.25, 1.6, 2, 2.5, 3.15, 4, 5, 6.3, 8 per decade.

use alloc::vec::Vec;

use num_traits::Float;

const PREFERRED: [f64; 10] = [1.0, 1.25, 1.6, 2.0, 2.5, 3.15, 4.0, 5.0, 6.3, 8.0];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThirdOctaveBand {
    /// Band number relative to 1 kHz.
    pub index: i32,
    pub nominal: f64,
    pub exact: f64,
    pub lower: f64,
    pub upper: f64,
}

impl ThirdOctaveBand {
    pub fn new(index: i32) -> Self {
        let exact = 1000.0 * Float::powf(10.0, index as f64 / 10.0);
        let edge = Float::powf(10.0, 1.0 / 20.0);
        let decade = index.div_euclid(10);
        let step = index.rem_euclid(10) as usize;
        let nominal = PREFERRED[step] * Float::powi(10.0, decade + 3);
        Self {
            index,
            nominal,
            exact,
            lower: exact / edge,
            upper: exact * edge,
        }
    }

    /// Whether `f` falls in `[lower, upper)`.
    pub fn contains(&self, f: f64) -> bool {
        f >= self.lower && f < self.upper
    }
}

/// Every band whose nominal center lies in `[f_lo, f_hi]`.
pub fn third_octave_bands(f_lo: f64, f_hi: f64) -> Vec<ThirdOctaveBand> {
    if !(f_lo > 0.0) || !(f_hi >= f_lo) || !f_hi.is_finite() {
        return Vec::new();
    }
    let first = Float::floor(10.0 * Float::log10(f_lo / 1000.0)) as i32 - 1;
    let last = Float::ceil(10.0 * Float::log10(f_hi / 1000.0)) as i32 + 1;
    (first..=last)
        .map(ThirdOctaveBand::new)
        .filter(|b| b.nominal >= f_lo * (1.0 - 1e-9) && b.nominal <= f_hi * (1.0 + 1e-9))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn centers_800_to_2000() {
        let nominal: Vec<f64> = third_octave_bands(800.0, 2000.0).iter().map(|b| b.nominal).collect();
        assert_eq!(nominal, [800.0, 1000.0, 1250.0, 1600.0, 2000.0]);
    }

    #[test]
    fn nominal_is_close_to_exact() {
        for k in -20..14 {
            let b = ThirdOctaveBand::new(k);
            assert!((b.nominal / b.exact - 1.0).abs() < 0.02, "{k}: {b:?}");
            assert!((b.upper / b.lower - Float::powf(10.0, 0.1)).abs() < 1e-12);
        }
    }

    #[test]
    fn adjacent_bands_tile() {
        let a = ThirdOctaveBand::new(0);
        let b = ThirdOctaveBand::new(1);
        assert!((a.upper - b.lower).abs() < 1e-9);
        assert!(a.contains(1000.0) && !b.contains(1000.0));
    }
}

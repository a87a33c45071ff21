//! Cross-spectral matrices from multichannel recordings.
//!
//! Blocks of `N` samples are tapered with a periodic Hann window `w` and
//! transformed. Bin `k` of each block is scaled to an RMS phasor
//!
//! ```text
//! P_k = c_k X_k / sum(w),   c_k = sqrt(2) for 0 < k < N/2, else 1
//! ```
//!
//! so a channel carrying `sqrt(2) a cos(2 pi f t + phi)` with `f` on bin `k`
//! gives `|P_k|^2 = a^2`, and the bin CSM is the block average of `P P^H`.
//! A band CSM sums its bins and divides by the window's equivalent noise
//! bandwidth `N sum(w^2) / sum(w)^2` in bins, so a tone inside the band and
//! broadband noise are both reported as mean-square pressure.

use std::f64::consts::PI;

use damas_core::bands::ThirdOctaveBand;
use damas_core::geometry::{Medium, MicArray, SourceScene};
use damas_core::spectra::CrossSpectralMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::formats::TimeSeries;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WelchConfig {
    /// Samples per block; a power of two.
    pub block_size: usize,
    /// Fraction of a block shared with the next one, in `[0, 1)`.
    pub overlap: f64,
}

impl Default for WelchConfig {
    fn default() -> Self {
        Self {
            block_size: 4096,
            overlap: 0.5,
        }
    }
}

impl WelchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.block_size < 16 || !self.block_size.is_power_of_two() {
            return Err(Error::config(
                "processing.block_size",
                "must be a power of two of at least 16",
            ));
        }
        if !(0.0..1.0).contains(&self.overlap) {
            return Err(Error::config("processing.overlap", "must lie in [0, 1)"));
        }
        Ok(())
    }

    pub fn hop(&self) -> usize {
        let hop = (self.block_size as f64 * (1.0 - self.overlap)).round() as usize;
        hop.clamp(1, self.block_size)
    }

    pub fn window(&self) -> Vec<f64> {
        let n = self.block_size as f64;
        (0..self.block_size)
            .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / n).cos())
            .collect()
    }

    /// Equivalent noise bandwidth of the window, in bins.
    pub fn enbw_bins(&self) -> f64 {
        let w = self.window();
        let s1: f64 = w.iter().sum();
        let s2: f64 = w.iter().map(|v| v * v).sum();
        self.block_size as f64 * s2 / (s1 * s1)
    }

    pub fn bin_frequency(&self, sample_rate: f64, k: usize) -> f64 {
        k as f64 * sample_rate / self.block_size as f64
    }

    /// Bin nearest to `frequency`.
    pub fn nearest_bin(&self, sample_rate: f64, frequency: f64) -> usize {
        let k = (frequency * self.block_size as f64 / sample_rate).round() as usize;
        k.min(self.block_size / 2)
    }
}

/// Block-averaged CSMs of the requested bins, in request order. Each CSM is
/// labeled with its bin frequency.
pub fn bin_csms(ts: &TimeSeries, cfg: &WelchConfig, bins: &[usize]) -> Result<Vec<CrossSpectralMatrix>> {
    cfg.validate()?;
    let n = cfg.block_size;
    if ts.n_frames() < n {
        return Err(Error::Other(format!(
            "recording has {} frames, fewer than one block of {n}",
            ts.n_frames()
        )));
    }
    if let Some(&k) = bins.iter().find(|&&k| k > n / 2) {
        return Err(Error::Other(format!("bin {k} is above Nyquist")));
    }
    let window = cfg.window();
    let sum_w: f64 = window.iter().sum();
    let fft = FftPlanner::<f64>::new().plan_fft_forward(n);
    let m = ts.n_channels();
    let hop = cfg.hop();
    let blocks = (ts.n_frames() - n) / hop + 1;

    let mut out: Vec<CrossSpectralMatrix> = bins
        .iter()
        .map(|&k| CrossSpectralMatrix::zeros(cfg.bin_frequency(ts.sample_rate, k), m))
        .collect();
    let mut buffer = vec![Complex64::new(0.0, 0.0); n];
    let mut phasors = vec![vec![Complex64::new(0.0, 0.0); m]; bins.len()];
    for b in 0..blocks {
        let start = b * hop;
        for (c, channel) in ts.channels.iter().enumerate() {
            for (i, slot) in buffer.iter_mut().enumerate() {
                *slot = Complex64::new(channel[start + i] * window[i], 0.0);
            }
            fft.process(&mut buffer);
            for (j, &k) in bins.iter().enumerate() {
                let scale = if k == 0 || k == n / 2 { 1.0 } else { 2f64.sqrt() };
                phasors[j][c] = buffer[k] * (scale / sum_w);
            }
        }
        for (csm, p) in out.iter_mut().zip(&phasors) {
            csm.add_outer(p, 1.0 / blocks as f64);
        }
    }
    Ok(out)
}

/// Bins whose frequency lies in `[lower, upper)` of `band`.
pub fn band_bins(cfg: &WelchConfig, sample_rate: f64, band: &ThirdOctaveBand) -> Vec<usize> {
    (0..=cfg.block_size / 2)
        .filter(|&k| {
            let f = cfg.bin_frequency(sample_rate, k);
            f >= band.lower && f < band.upper
        })
        .collect()
}

/// One CSM per band, labeled with the band's exact center frequency, which
/// is also where it should be steered.
pub fn band_csms(
    ts: &TimeSeries,
    cfg: &WelchConfig,
    bands: &[ThirdOctaveBand],
) -> Result<Vec<CrossSpectralMatrix>> {
    let enbw = cfg.enbw_bins();
    let m = ts.n_channels();
    bands
        .iter()
        .map(|band| {
            let bins = band_bins(cfg, ts.sample_rate, band);
            if bins.is_empty() {
                return Err(Error::Other(format!(
                    "band {} Hz contains no frequency bin",
                    band.nominal
                )));
            }
            let per_bin = bin_csms(ts, cfg, &bins)?;
            let total = CrossSpectralMatrix::sum(band.exact, m, &per_bin)?;
            Ok(total.scaled(1.0 / enbw))
        })
        .collect()
}

/// Parameters for turning a scene into microphone recordings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthesisConfig {
    pub sample_rate: f64,
    pub frames: usize,
    /// RMS of independent white noise added to every channel, Pa.
    pub self_noise: f64,
    /// Seeds tone phases and self noise.
    pub seed: u64,
}

/// Each source becomes a tone `sqrt(2) a (r_c / r_m) cos(2 pi f (t - r_m / c) + phi)`
/// at microphone `m`, with a seeded random phase `phi` per source.
pub fn synthesize_timeseries(
    scene: &SourceScene,
    array: &MicArray,
    medium: &Medium,
    cfg: &SynthesisConfig,
) -> Result<TimeSeries> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let c = medium.sound_speed();
    let m = array.len();
    let mut channels = vec![vec![0.0; cfg.frames]; m];
    for src in scene.sources() {
        let phase: f64 = rng.gen_range(0.0..2.0 * PI);
        let rc = src.position.distance(array.center());
        let omega = 2.0 * PI * src.frequency;
        for (channel, mic) in channels.iter_mut().zip(array.positions()) {
            let r = src.position.distance(*mic);
            let amp = 2f64.sqrt() * src.amplitude * rc / r;
            let delay = r / c;
            for (i, s) in channel.iter_mut().enumerate() {
                let t = i as f64 / cfg.sample_rate;
                *s += amp * (omega * (t - delay) + phase).cos();
            }
        }
    }
    if cfg.self_noise > 0.0 {
        let sigma = cfg.self_noise;
        for channel in &mut channels {
            for s in channel.iter_mut() {
                *s += sigma * gaussian(&mut rng);
            }
        }
    }
    TimeSeries::new(cfg.sample_rate, channels)
}

/// Standard normal draw by the Box-Muller transform.
pub fn gaussian<R: Rng>(rng: &mut R) -> f64 {
    let u1: f64 = 1.0 - rng.gen::<f64>();
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (2.0 * PI * u2).cos()
}

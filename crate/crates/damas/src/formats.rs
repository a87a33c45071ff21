//! Plain-text and binary file formats.
//!
//! | file        | layout                                                        |
//! |-------------|---------------------------------------------------------------|
//! | array       | `x y z weight` per line, whitespace separated                 |
//! | scene       | `x y z frequency_hz amplitude_pa` per line                    |
//! | time series | binary: `DTS1`, u32 channels, f64 sample rate, f32 frames     |
//! | time series | CSV: `sample_rate_hz,channels` header row, one row per frame  |
//! | map         | CSV `col,row,x,y,value_Pa²,value_dB`                          |
//! | CSM         | CSV, one row per microphone, interleaved `re,im` columns      |
//! | propagator  | `DAMASA1\0`, u64 rows, u64 cols, f64 row-major                |
//! | history     | CSV `iteration,residual,total_power_dB`                       |
//!
//! Binary integers and floats are little-endian. In the text formats blank
//! lines and lines starting with `#` are ignored.

use std::fmt::Write as _;
use std::path::Path;

use damas_core::beamform::{level_db, MapInfo, MapKind, SourceMap};
use damas_core::damas::{HistoryEntry, Propagator, PropagatorMatrix};
use damas_core::geometry::{MicArray, Point3, ScanGrid, Source, SourceScene};
use damas_core::spectra::CrossSpectralMatrix;
use num_complex::Complex64;

use crate::atomic::write_atomic;
use crate::error::{Error, Result};

pub const MAP_HEADER: [&str; 6] = ["col", "row", "x", "y", "value_Pa²", "value_dB"];
pub const HISTORY_HEADER: [&str; 3] = ["iteration", "residual", "total_power_dB"];
pub const TIMESERIES_MAGIC: &[u8; 4] = b"DTS1";
pub const PROPAGATOR_MAGIC: &[u8; 8] = b"DAMASA1\0";

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| Error::io(path, e))
}

/// Numeric rows of a whitespace-separated table with their 1-based line
/// numbers.
fn numeric_rows(path: &Path, text: &str) -> Result<Vec<(usize, Vec<f64>)>> {
    let mut rows = Vec::new();
    for (k, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let values = line
            .split_whitespace()
            .map(|t| {
                t.parse::<f64>()
                    .map_err(|_| Error::format(path, k + 1, format!("not a number: {t:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push((k + 1, values));
    }
    Ok(rows)
}

pub fn parse_array(path: &Path, text: &str) -> Result<MicArray> {
    let mut positions = Vec::new();
    let mut weights = Vec::new();
    for (line, v) in numeric_rows(path, text)? {
        if v.len() != 4 {
            return Err(Error::format(path, line, "expected `x y z weight`"));
        }
        positions.push(Point3::new(v[0], v[1], v[2]));
        weights.push(v[3]);
    }
    MicArray::new(positions)
        .and_then(|a| a.reweighted(weights))
        .map_err(|e| Error::format(path, 0, e.to_string()))
}

pub fn read_array(path: &Path) -> Result<MicArray> {
    parse_array(path, &read_text(path)?)
}

pub fn format_array(array: &MicArray) -> String {
    let mut s = String::from("# x y z weight\n");
    for (p, w) in array.positions().iter().zip(array.weights()) {
        let _ = writeln!(s, "{} {} {} {}", p.x, p.y, p.z, w);
    }
    s
}

pub fn write_array(path: &Path, array: &MicArray) -> Result<()> {
    write_atomic(path, format_array(array).as_bytes())
}

pub fn parse_scene(path: &Path, text: &str) -> Result<SourceScene> {
    let mut scene = SourceScene::empty();
    for (line, v) in numeric_rows(path, text)? {
        if v.len() != 5 {
            return Err(Error::format(
                path,
                line,
                "expected `x y z frequency_hz amplitude_pa`",
            ));
        }
        let source = Source::new(Point3::new(v[0], v[1], v[2]), v[3], v[4])
            .map_err(|e| Error::format(path, line, e.to_string()))?;
        scene.push(source);
    }
    Ok(scene)
}

pub fn read_scene(path: &Path) -> Result<SourceScene> {
    parse_scene(path, &read_text(path)?)
}

pub fn format_scene(scene: &SourceScene) -> String {
    let mut s = String::from("# x y z frequency_hz amplitude_pa\n");
    for src in scene.sources() {
        let p = src.position;
        let _ = writeln!(s, "{} {} {} {} {}", p.x, p.y, p.z, src.frequency, src.amplitude);
    }
    s
}

/// Multichannel samples, one vector per microphone.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    pub sample_rate: f64,
    pub channels: Vec<Vec<f64>>,
}

impl TimeSeries {
    pub fn new(sample_rate: f64, channels: Vec<Vec<f64>>) -> Result<Self> {
        if !(sample_rate > 0.0) || !sample_rate.is_finite() {
            return Err(Error::Other(format!("sample rate {sample_rate} is not positive")));
        }
        let frames = channels.first().map_or(0, Vec::len);
        if channels.is_empty() || channels.iter().any(|c| c.len() != frames) {
            return Err(Error::Other("channels must be non-empty and equally long".into()));
        }
        Ok(Self {
            sample_rate,
            channels,
        })
    }

    pub fn n_channels(&self) -> usize {
        self.channels.len()
    }

    pub fn n_frames(&self) -> usize {
        self.channels[0].len()
    }
}

fn timeseries_is_csv(path: &Path) -> bool {
    path.extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("csv"))
}

/// Reads a CSV file when the extension is `.csv`, the binary layout
/// otherwise.
pub fn read_timeseries(path: &Path) -> Result<TimeSeries> {
    if timeseries_is_csv(path) {
        read_timeseries_csv(path)
    } else {
        decode_timeseries(path, &read_bytes(path)?)
    }
}

pub fn write_timeseries(path: &Path, ts: &TimeSeries) -> Result<()> {
    if timeseries_is_csv(path) {
        write_atomic(path, encode_timeseries_csv(ts).as_bytes())
    } else {
        write_atomic(path, &encode_timeseries(ts))
    }
}

pub fn encode_timeseries(ts: &TimeSeries) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + 4 * ts.n_channels() * ts.n_frames());
    out.extend_from_slice(TIMESERIES_MAGIC);
    out.extend_from_slice(&(ts.n_channels() as u32).to_le_bytes());
    out.extend_from_slice(&ts.sample_rate.to_le_bytes());
    for i in 0..ts.n_frames() {
        for c in &ts.channels {
            out.extend_from_slice(&(c[i] as f32).to_le_bytes());
        }
    }
    out
}

pub fn decode_timeseries(path: &Path, bytes: &[u8]) -> Result<TimeSeries> {
    if bytes.len() < 16 || &bytes[..4] != TIMESERIES_MAGIC {
        return Err(Error::format(path, 0, "missing DTS1 header"));
    }
    let channels = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let sample_rate = f64::from_le_bytes(bytes[8..16].try_into().unwrap());
    let body = &bytes[16..];
    if channels == 0 || body.len() % (4 * channels) != 0 {
        return Err(Error::format(path, 0, "sample data is not a whole number of frames"));
    }
    let frames = body.len() / (4 * channels);
    let mut data = vec![Vec::with_capacity(frames); channels];
    for (k, chunk) in body.chunks_exact(4).enumerate() {
        data[k % channels].push(f32::from_le_bytes(chunk.try_into().unwrap()) as f64);
    }
    TimeSeries::new(sample_rate, data).map_err(|e| Error::format(path, 0, e.to_string()))
}

pub fn encode_timeseries_csv(ts: &TimeSeries) -> String {
    let mut s = format!("sample_rate_hz,channels\n{},{}\n", ts.sample_rate, ts.n_channels());
    for i in 0..ts.n_frames() {
        let row: Vec<String> = ts.channels.iter().map(|c| c[i].to_string()).collect();
        s.push_str(&row.join(","));
        s.push('\n');
    }
    s
}

fn read_timeseries_csv(path: &Path) -> Result<TimeSeries> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .comment(Some(b'#'))
        .from_path(path)
        .map_err(|e| Error::format(path, 0, e.to_string()))?;
    let mut records = reader.records();
    let header = records
        .next()
        .ok_or_else(|| Error::format(path, 2, "missing sample rate and channel count"))?
        .map_err(|e| Error::format(path, 2, e.to_string()))?;
    let field = |i: usize| header.get(i).map(str::trim).unwrap_or("");
    let sample_rate: f64 = field(0)
        .parse()
        .map_err(|_| Error::format(path, 2, "bad sample rate"))?;
    let channels: usize = field(1)
        .parse()
        .map_err(|_| Error::format(path, 2, "bad channel count"))?;
    let mut data = vec![Vec::new(); channels];
    for (k, record) in records.enumerate() {
        let line = k + 3;
        let record = record.map_err(|e| Error::format(path, line, e.to_string()))?;
        if record.len() != channels {
            return Err(Error::format(path, line, format!("expected {channels} columns")));
        }
        for (c, v) in record.iter().enumerate() {
            let v: f64 = v
                .trim()
                .parse()
                .map_err(|_| Error::format(path, line, format!("not a number: {v:?}")))?;
            data[c].push(v);
        }
    }
    TimeSeries::new(sample_rate, data).map_err(|e| Error::format(path, 0, e.to_string()))
}

/// World x and y of each grid point are written; the z coordinate and the
/// plane orientation are not.
pub fn format_map_csv(map: &SourceMap, p_ref: f64) -> String {
    let grid = map.grid();
    let mut s = MAP_HEADER.join(",");
    s.push('\n');
    for (i, v) in map.values().iter().enumerate() {
        let (col, row) = grid.col_row(i);
        let p = grid.point(i);
        let _ = writeln!(s, "{col},{row},{},{},{v},{}", p.x, p.y, level_db(*v, p_ref));
    }
    s
}

pub fn write_map_csv(path: &Path, map: &SourceMap, p_ref: f64) -> Result<()> {
    write_atomic(path, format_map_csv(map, p_ref).as_bytes())
}

/// Reads a map written by [`write_map_csv`]. The grid is rebuilt in the
/// plane `z = 0` with axes along x and y.
pub fn read_map_csv(path: &Path) -> Result<SourceMap> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| Error::format(path, 0, e.to_string()))?;
    let header = reader
        .headers()
        .map_err(|e| Error::format(path, 1, e.to_string()))?
        .clone();
    if header.iter().collect::<Vec<_>>() != MAP_HEADER {
        return Err(Error::format(path, 1, format!("expected header {}", MAP_HEADER.join(","))));
    }
    let mut cells = Vec::new();
    for (k, record) in reader.records().enumerate() {
        let line = k + 2;
        let record = record.map_err(|e| Error::format(path, line, e.to_string()))?;
        let num = |i: usize| -> Result<f64> {
            record[i]
                .trim()
                .parse()
                .map_err(|_| Error::format(path, line, format!("not a number: {:?}", &record[i])))
        };
        cells.push((num(0)? as usize, num(1)? as usize, num(2)?, num(3)?, num(4)?));
    }
    if cells.is_empty() {
        return Err(Error::format(path, 2, "map has no cells"));
    }
    let n_cols = cells.iter().map(|c| c.0).max().unwrap() + 1;
    let n_rows = cells.iter().map(|c| c.1).max().unwrap() + 1;
    if cells.len() != n_cols * n_rows {
        return Err(Error::format(path, 0, "cells do not form a full grid"));
    }
    let mut values = vec![f64::NAN; n_cols * n_rows];
    let mut origin = None;
    let mut spacing = None;
    for &(col, row, x, y, v) in &cells {
        values[row * n_cols + col] = v;
        if col == 0 && row == 0 {
            origin = Some((x, y));
        }
        if spacing.is_none() && (col, row) == (1, 0) {
            spacing = Some(x);
        }
        if spacing.is_none() && (col, row) == (0, 1) && n_cols == 1 {
            spacing = Some(y);
        }
    }
    let (x0, y0) = origin.ok_or_else(|| Error::format(path, 0, "missing cell (0, 0)"))?;
    let dx = match spacing {
        Some(v) if n_cols > 1 => v - x0,
        Some(v) => v - y0,
        None => 1.0,
    };
    let grid = ScanGrid::new(
        Point3::new(x0, y0, 0.0),
        Point3::X,
        Point3::Y,
        dx,
        n_cols,
        n_rows,
    )
    .map_err(|e| Error::format(path, 0, e.to_string()))?;
    SourceMap::new(grid, values, MapKind::Beamform, MapInfo::default())
        .map_err(|e| Error::format(path, 0, e.to_string()))
}

pub fn format_csm_csv(csm: &CrossSpectralMatrix) -> String {
    let n = csm.dim();
    let header: Vec<String> = (0..n).flat_map(|j| [format!("re_{j}"), format!("im_{j}")]).collect();
    let mut s = header.join(",");
    s.push('\n');
    for i in 0..n {
        let row: Vec<String> = csm
            .row(i)
            .iter()
            .flat_map(|z| [z.re.to_string(), z.im.to_string()])
            .collect();
        s.push_str(&row.join(","));
        s.push('\n');
    }
    s
}

pub fn write_csm_csv(path: &Path, csm: &CrossSpectralMatrix) -> Result<()> {
    write_atomic(path, format_csm_csv(csm).as_bytes())
}

pub fn read_csm_csv(path: &Path, frequency: f64) -> Result<CrossSpectralMatrix> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| Error::format(path, 0, e.to_string()))?;
    let mut data = Vec::new();
    let mut n = 0;
    for (k, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::format(path, k + 2, e.to_string()))?;
        n = record.len() / 2;
        let values = record
            .iter()
            .map(|v| v.parse::<f64>().map_err(|_| Error::format(path, k + 2, "not a number")))
            .collect::<Result<Vec<_>>>()?;
        data.extend(values.chunks_exact(2).map(|c| Complex64::new(c[0], c[1])));
    }
    CrossSpectralMatrix::from_data(frequency, n, data).map_err(|e| Error::format(path, 0, e.to_string()))
}

pub fn encode_propagator(a: &PropagatorMatrix) -> Vec<u8> {
    let n = a.size();
    let mut out = Vec::with_capacity(24 + 8 * n * n);
    out.extend_from_slice(PROPAGATOR_MAGIC);
    out.extend_from_slice(&(n as u64).to_le_bytes());
    out.extend_from_slice(&(n as u64).to_le_bytes());
    for v in a.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn write_propagator(path: &Path, a: &PropagatorMatrix) -> Result<()> {
    write_atomic(path, &encode_propagator(a))
}

/// Rows, columns and row-major entries of a propagator dump.
pub fn decode_propagator(path: &Path, bytes: &[u8]) -> Result<(usize, usize, Vec<f64>)> {
    if bytes.len() < 24 || &bytes[..8] != PROPAGATOR_MAGIC {
        return Err(Error::format(path, 0, "missing propagator header"));
    }
    let rows = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
    let cols = u64::from_le_bytes(bytes[16..24].try_into().unwrap()) as usize;
    let body = &bytes[24..];
    if body.len() != 8 * rows * cols {
        return Err(Error::format(path, 0, "entry count does not match the header"));
    }
    let data = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok((rows, cols, data))
}

pub fn read_propagator(path: &Path) -> Result<(usize, usize, Vec<f64>)> {
    decode_propagator(path, &read_bytes(path)?)
}

pub fn format_history_csv(history: &[HistoryEntry], p_ref: f64) -> String {
    let mut s = HISTORY_HEADER.join(",");
    s.push('\n');
    for h in history {
        let _ = writeln!(
            s,
            "{},{},{}",
            h.iteration,
            h.residual,
            level_db(h.total_power, p_ref)
        );
    }
    s
}

pub fn write_history_csv(path: &Path, history: &[HistoryEntry], p_ref: f64) -> Result<()> {
    write_atomic(path, format_history_csv(history, p_ref).as_bytes())
}

//! Heatmap rendering of source maps to PNG.
//!
//! Cells are drawn as `scale x scale` pixel squares with grid row 0 at the
//! bottom. Levels are colored linearly over `[peak - floor, peak]` dB; cells
//! below the floor, and non-positive cells, are background.

use std::path::Path;

use damas_core::beamform::SourceMap;
use damas_core::geometry::Point3;

use crate::atomic::write_atomic;
use crate::error::{Error, Result};

pub const BACKGROUND: [u8; 3] = [255, 255, 255];
pub const OVERLAY: [u8; 3] = [0, 0, 0];

/// Color stops from the floor (first) to the peak (last).
const STOPS: [[u8; 3]; 5] = [
    [48, 18, 120],
    [31, 120, 200],
    [40, 190, 130],
    [240, 210, 40],
    [200, 30, 30],
];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Image {
    pub width: u32,
    pub height: u32,
    /// Row-major RGB, top row first.
    pub rgb: Vec<u8>,
    /// Cells at or above the floor.
    pub lit_cells: usize,
}

impl Image {
    pub fn pixel(&self, x: u32, y: u32) -> [u8; 3] {
        let i = 3 * (y as usize * self.width as usize + x as usize);
        [self.rgb[i], self.rgb[i + 1], self.rgb[i + 2]]
    }

    /// True when no cell reached the floor.
    pub fn is_blank(&self) -> bool {
        self.lit_cells == 0
    }
}

fn color(t: f64) -> [u8; 3] {
    let t = t.clamp(0.0, 1.0) * (STOPS.len() - 1) as f64;
    let k = (t.floor() as usize).min(STOPS.len() - 2);
    let f = t - k as f64;
    let mut out = [0u8; 3];
    for (c, o) in out.iter_mut().enumerate() {
        let a = STOPS[k][c] as f64;
        let b = STOPS[k + 1][c] as f64;
        *o = (a + f * (b - a)).round() as u8;
    }
    out
}

/// Pixel edge length that makes the longer map side about 600 pixels.
pub fn default_scale(map: &SourceMap) -> u32 {
    let side = map.grid().n_cols().max(map.grid().n_rows()) as u32;
    (600 / side.max(1)).clamp(1, 16)
}

pub fn render_heatmap(map: &SourceMap, floor_db: f64, overlay: &[Vec<Point3>], scale: u32) -> Result<Image> {
    if map.is_empty() {
        return Err(Error::Other("cannot render an empty map".into()));
    }
    if !(floor_db > 0.0) {
        return Err(Error::config("floor_db", "display floor must be positive"));
    }
    let scale = scale.max(1);
    let grid = map.grid();
    let (cols, rows) = (grid.n_cols() as u32, grid.n_rows() as u32);
    let (width, height) = (cols * scale, rows * scale);
    let mut rgb = vec![0u8; 3 * (width * height) as usize];
    for px in rgb.chunks_exact_mut(3) {
        px.copy_from_slice(&BACKGROUND);
    }

    let (_, peak) = map.peak();
    let mut lit_cells = 0;
    if peak > 0.0 && peak.is_finite() {
        let peak_db = 10.0 * peak.log10();
        for (i, &v) in map.values().iter().enumerate() {
            if !(v > 0.0) {
                continue;
            }
            let level = 10.0 * v.log10() - peak_db;
            if level < -floor_db {
                continue;
            }
            lit_cells += 1;
            let c = color(1.0 + level / floor_db);
            let (col, row) = grid.col_row(i);
            let y0 = (rows - 1 - row as u32) * scale;
            let x0 = col as u32 * scale;
            for y in y0..y0 + scale {
                for x in x0..x0 + scale {
                    let k = 3 * (y * width + x) as usize;
                    rgb[k..k + 3].copy_from_slice(&c);
                }
            }
        }
    }

    let mut image = Image {
        width,
        height,
        rgb,
        lit_cells,
    };
    let to_pixel = |p: Point3| -> (i64, i64) {
        let (s, t, _) = grid.locate(p);
        let x = ((s + 0.5) * scale as f64).floor() as i64;
        let y = ((rows as f64 - 0.5 - t) * scale as f64).floor() as i64;
        (x, y)
    };
    for line in overlay {
        for pair in line.windows(2) {
            draw_line(&mut image, to_pixel(pair[0]), to_pixel(pair[1]));
        }
    }
    Ok(image)
}

/// Bresenham segment, clipped to the image.
fn draw_line(image: &mut Image, (mut x0, mut y0): (i64, i64), (x1, y1): (i64, i64)) {
    let dx = (x1 - x0).abs();
    let dy = -(y1 - y0).abs();
    let sx = if x0 < x1 { 1 } else { -1 };
    let sy = if y0 < y1 { 1 } else { -1 };
    let mut err = dx + dy;
    loop {
        if x0 >= 0 && y0 >= 0 && (x0 as u32) < image.width && (y0 as u32) < image.height {
            let k = 3 * (y0 as usize * image.width as usize + x0 as usize);
            image.rgb[k..k + 3].copy_from_slice(&OVERLAY);
        }
        if x0 == x1 && y0 == y1 {
            break;
        }
        let e2 = 2 * err;
        if e2 >= dy {
            err += dy;
            x0 += sx;
        }
        if e2 <= dx {
            err += dx;
            y0 += sy;
        }
    }
}

pub fn encode_png(image: &Image) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    {
        let mut encoder = png::Encoder::new(&mut out, image.width, image.height);
        encoder.set_color(png::ColorType::Rgb);
        encoder.set_depth(png::BitDepth::Eight);
        let mut writer = encoder
            .write_header()
            .map_err(|e| Error::Other(e.to_string()))?;
        writer
            .write_image_data(&image.rgb)
            .map_err(|e| Error::Other(e.to_string()))?;
    }
    Ok(out)
}

/// Renders and writes a PNG; returns the image for inspection.
pub fn write_heatmap(
    path: &Path,
    map: &SourceMap,
    floor_db: f64,
    overlay: &[Vec<Point3>],
) -> Result<Image> {
    let image = render_heatmap(map, floor_db, overlay, default_scale(map))?;
    write_atomic(path, &encode_png(&image)?)?;
    Ok(image)
}

#[cfg(test)]
mod tests {
    use super::*;
    use damas_core::beamform::{MapInfo, MapKind};
    use damas_core::geometry::make_scan_grid;

    fn map(values: Vec<f64>) -> SourceMap {
        let grid = make_scan_grid(Point3::ORIGIN, 4.0, 2.0, 4).unwrap();
        SourceMap::new(grid, values, MapKind::Beamform, MapInfo::default()).unwrap()
    }

    fn lit_pixels(image: &Image) -> Vec<(u32, u32)> {
        let mut out = Vec::new();
        for y in 0..image.height {
            for x in 0..image.width {
                if image.pixel(x, y) != BACKGROUND {
                    out.push((x, y));
                }
            }
        }
        out
    }

    #[test]
    fn single_hot_cell_lights_one_cell() {
        let mut v = vec![0.0; 15];
        v[7] = 1.0;
        let image = render_heatmap(&map(v), 40.0, &[], 3).unwrap();
        assert_eq!((image.width, image.height), (15, 9));
        assert_eq!(image.lit_cells, 1);
        // cell (2, 1) sits in the middle pixel block
        let px = lit_pixels(&image);
        assert_eq!(px.len(), 9);
        assert!(px.iter().all(|(x, y)| (6..9).contains(x) && (3..6).contains(y)));
        assert_eq!(image.pixel(7, 4), STOPS[4]);
    }

    #[test]
    fn row_zero_is_at_the_bottom() {
        let mut v = vec![0.0; 15];
        v[0] = 1.0;
        let image = render_heatmap(&map(v), 10.0, &[], 1).unwrap();
        assert_eq!(lit_pixels(&image), vec![(0, 2)]);
    }

    #[test]
    fn lower_floor_lights_a_subset() {
        let v: Vec<f64> = (0..15).map(|i| 10f64.powf(-(i as f64) * 0.2)).collect();
        let narrow = lit_pixels(&render_heatmap(&map(v.clone()), 12.0, &[], 2).unwrap());
        let wide = lit_pixels(&render_heatmap(&map(v), 20.0, &[], 2).unwrap());
        assert!(narrow.len() < wide.len());
        assert!(narrow.iter().all(|p| wide.contains(p)));
    }

    #[test]
    fn flat_zero_map_is_blank() {
        let image = render_heatmap(&map(vec![0.0; 15]), 20.0, &[], 2).unwrap();
        assert!(image.is_blank());
        assert!(lit_pixels(&image).is_empty());
    }

    #[test]
    fn overlay_is_drawn() {
        let m = map(vec![0.0; 15]);
        let line = vec![m.grid().point(0), m.grid().point(4)];
        let image = render_heatmap(&m, 20.0, &[line], 2).unwrap();
        let px = lit_pixels(&image);
        assert!(px.len() >= 9);
        assert!(px.iter().all(|&(x, y)| image.pixel(x, y) == OVERLAY));
    }

    #[test]
    fn png_bytes_are_deterministic() {
        let v: Vec<f64> = (0..15).map(|i| (i as f64).sin().abs()).collect();
        let a = encode_png(&render_heatmap(&map(v.clone()), 20.0, &[], 4).unwrap()).unwrap();
        let b = encode_png(&render_heatmap(&map(v), 20.0, &[], 4).unwrap()).unwrap();
        assert_eq!(a, b);
        assert_eq!(&a[1..4], b"PNG");
    }
}

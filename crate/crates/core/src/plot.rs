//! Minimal PNG rendering for line charts and heatmaps. No text, no axes
//! labels; the CSV files carry the numbers.

use std::path::Path;

use image::{Rgb, RgbImage};

use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;

const MARGIN: u32 = 24;
const BACKGROUND: Rgb<u8> = Rgb([255, 255, 255]);
const FRAME: Rgb<u8> = Rgb([90, 90, 90]);
const GRID: Rgb<u8> = Rgb([225, 225, 225]);

pub const BLUE: [u8; 3] = [31, 119, 180];
pub const ORANGE: [u8; 3] = [255, 127, 14];
pub const GREEN: [u8; 3] = [44, 160, 44];

pub struct Series<'a> {
    pub y: &'a [f64],
    pub color: [u8; 3],
}

fn finite_range(values: impl Iterator<Item = f64>) -> Option<(f64, f64)> {
    let (lo, hi) = values
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if lo > hi {
        return None;
    }
    if hi - lo < 1e-300 {
        let pad = if lo == 0.0 { 1.0 } else { 0.05 * lo.abs() };
        return Some((lo - pad, hi + pad));
    }
    let pad = 0.05 * (hi - lo);
    Some((lo - pad, hi + pad))
}

fn frame(img: &mut RgbImage) {
    let (w, h) = img.dimensions();
    for i in 1..4 {
        let gx = MARGIN + (w - 2 * MARGIN) * i / 4;
        let gy = MARGIN + (h - 2 * MARGIN) * i / 4;
        for y in MARGIN..h - MARGIN {
            img.put_pixel(gx, y, GRID);
        }
        for x in MARGIN..w - MARGIN {
            img.put_pixel(x, gy, GRID);
        }
    }
    for x in MARGIN..=w - MARGIN {
        img.put_pixel(x, MARGIN, FRAME);
        img.put_pixel(x, h - MARGIN, FRAME);
    }
    for y in MARGIN..=h - MARGIN {
        img.put_pixel(MARGIN, y, FRAME);
        img.put_pixel(w - MARGIN, y, FRAME);
    }
}

fn draw_segment(img: &mut RgbImage, (x0, y0): (f64, f64), (x1, y1): (f64, f64), color: Rgb<u8>) {
    let steps = ((x1 - x0).abs().max((y1 - y0).abs()).ceil() as usize).max(1);
    let (w, h) = img.dimensions();
    for s in 0..=steps {
        let t = s as f64 / steps as f64;
        let x = (x0 + t * (x1 - x0)).round();
        let y = (y0 + t * (y1 - y0)).round();
        if x >= 0.0 && y >= 0.0 && (x as u32) < w && (y as u32) < h {
            img.put_pixel(x as u32, y as u32, color);
            if (y as u32) + 1 < h {
                img.put_pixel(x as u32, y as u32 + 1, color);
            }
        }
    }
}

/// Line chart of one or more series over a shared abscissa.
pub fn render_lines(x: &[f64], series: &[Series<'_>], width: u32, height: u32) -> Result<RgbImage> {
    if width <= 2 * MARGIN + 4 || height <= 2 * MARGIN + 4 {
        return Err(Error::InvalidParameter(format!("plot size {width}x{height} too small")));
    }
    if series.iter().any(|s| s.y.len() != x.len()) {
        return Err(Error::dims("render_lines", "series length differs from abscissa"));
    }
    let mut img = RgbImage::from_pixel(width, height, BACKGROUND);
    frame(&mut img);
    let (Some((x_lo, x_hi)), Some((y_lo, y_hi))) = (
        finite_range(x.iter().copied()),
        finite_range(series.iter().flat_map(|s| s.y.iter().copied())),
    ) else {
        return Ok(img);
    };
    let px = |v: f64| MARGIN as f64 + (v - x_lo) / (x_hi - x_lo) * (width - 2 * MARGIN) as f64;
    let py = |v: f64| (height - MARGIN) as f64 - (v - y_lo) / (y_hi - y_lo) * (height - 2 * MARGIN) as f64;
    for s in series {
        let color = Rgb(s.color);
        for i in 1..x.len() {
            let (a, b) = (s.y[i - 1], s.y[i]);
            if a.is_finite() && b.is_finite() {
                draw_segment(&mut img, (px(x[i - 1]), py(a)), (px(x[i]), py(b)), color);
            }
        }
    }
    Ok(img)
}

/// Piecewise-linear blue-green-yellow colour map on `[0, 1]`.
fn colormap(t: f64) -> Rgb<u8> {
    const STOPS: [[f64; 3]; 5] = [
        [68.0, 1.0, 84.0],
        [59.0, 82.0, 139.0],
        [33.0, 145.0, 140.0],
        [94.0, 201.0, 98.0],
        [253.0, 231.0, 37.0],
    ];
    let t = if t.is_finite() { t.clamp(0.0, 1.0) } else { 0.0 };
    let pos = t * (STOPS.len() - 1) as f64;
    let i = (pos.floor() as usize).min(STOPS.len() - 2);
    let f = pos - i as f64;
    let c = |k: usize| (STOPS[i][k] + f * (STOPS[i + 1][k] - STOPS[i][k])).round() as u8;
    Rgb([c(0), c(1), c(2)])
}

/// Heatmap of `values` (rows along the horizontal axis, columns along the
/// vertical axis, first column at the bottom).
pub fn render_heatmap(values: &DenseMatrix, width: u32, height: u32) -> Result<RgbImage> {
    if values.is_empty() {
        return Err(Error::InvalidParameter("empty heatmap".into()));
    }
    let (lo, hi) = values
        .iter()
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let (lo, hi) = if hi > lo { (lo, hi) } else { (lo.min(0.0), lo.max(0.0) + 1.0) };
    let mut img = RgbImage::from_pixel(width, height, BACKGROUND);
    let (nr, nc) = values.shape();
    let inner_w = width.saturating_sub(2 * MARGIN).max(1);
    let inner_h = height.saturating_sub(2 * MARGIN).max(1);
    for py in 0..inner_h {
        let c = ((inner_h - 1 - py) as usize * nc / inner_h as usize).min(nc - 1);
        for px in 0..inner_w {
            let r = (px as usize * nr / inner_w as usize).min(nr - 1);
            let t = (values[(r, c)] - lo) / (hi - lo);
            img.put_pixel(MARGIN + px, MARGIN + py, colormap(t));
        }
    }
    frame(&mut img);
    Ok(img)
}

pub fn save_png(img: &RgbImage, path: &Path) -> Result<()> {
    img.save(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    #[test]
    fn line_chart_draws_something() {
        let x: Vec<f64> = (0..50).map(|i| i as f64).collect();
        let y: Vec<f64> = x.iter().map(|v| v.sin()).collect();
        let img = render_lines(&x, &[Series { y: &y, color: BLUE }], 200, 120).unwrap();
        assert!(img.pixels().any(|p| *p == Rgb(BLUE)));
        assert!(render_lines(&x, &[Series { y: &y[..3], color: BLUE }], 200, 120).is_err());
    }

    #[test]
    fn constant_and_nan_series_do_not_panic() {
        let x = [0.0, 1.0, 2.0];
        let y = [1.0, f64::NAN, 1.0];
        render_lines(&x, &[Series { y: &y, color: GREEN }], 100, 80).unwrap();
    }

    #[test]
    fn heatmap_extremes() {
        let m = DMatrix::from_fn(4, 3, |i, j| (i + j) as f64);
        let img = render_heatmap(&m, 100, 80).unwrap();
        assert_eq!(*img.get_pixel(MARGIN + 1, 80 - MARGIN - 1), colormap(0.0));
        assert_eq!(*img.get_pixel(100 - MARGIN - 1, MARGIN + 1), colormap(1.0));
    }
}

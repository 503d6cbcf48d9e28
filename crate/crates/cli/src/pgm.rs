//! Binary PGM rendering of an indicator field: cells are drawn as their
//! hexagons on a fixed 256 x 256 grid over the bounding square of the disk,
//! linearly scaled so the maximal indicator maps to 255.

use std::path::Path;

use eit_core::error::Result;
use nalgebra::Point2;

pub const SIZE: usize = 256;

/// Rasterizes `(center, value)` cells of a flat-top hexagon tiling with the
/// given corner-to-corner diameter. Pure function of its arguments: the
/// same inputs yield identical bytes.
pub fn render(centers: &[Point2<f64>], values: &[f64], diam: f64) -> Vec<u8> {
    let radius = diam / 2.0;
    let max = values.iter().copied().fold(0.0_f64, f64::max);
    // Quantized hexagon-center lookup.
    let mut lut = std::collections::HashMap::new();
    for (c, &v) in centers.iter().zip(values) {
        lut.insert(quantize(c), v);
    }
    let mut bytes = Vec::with_capacity(SIZE * SIZE);
    for row in 0..SIZE {
        let y = 1.0 - 2.0 * (row as f64 + 0.5) / SIZE as f64;
        for col in 0..SIZE {
            let x = -1.0 + 2.0 * (col as f64 + 0.5) / SIZE as f64;
            let value = if x * x + y * y <= 1.0 && max > 0.0 {
                let hex = hex_center_of(Point2::new(x, y), radius);
                lut.get(&quantize(&hex)).copied().unwrap_or(0.0)
            } else {
                0.0
            };
            let level = if max > 0.0 { (value / max * 255.0).round() as i64 } else { 0 };
            bytes.push(level.clamp(0, 255) as u8);
        }
    }
    bytes
}

fn quantize(p: &Point2<f64>) -> (i64, i64) {
    ((p.x * 1e7).round() as i64, (p.y * 1e7).round() as i64)
}

/// Center of the flat-top tiling hexagon containing `p`.
fn hex_center_of(p: Point2<f64>, radius: f64) -> Point2<f64> {
    let qf = (2.0 / 3.0) * p.x / radius;
    let rf = (-p.x / 3.0 + 3.0_f64.sqrt() / 3.0 * p.y) / radius;
    let (q, r) = cube_round(qf, rf);
    Point2::new(
        radius * 1.5 * q as f64,
        radius * 3.0_f64.sqrt() * (r as f64 + q as f64 / 2.0),
    )
}

fn cube_round(qf: f64, rf: f64) -> (i64, i64) {
    let sf = -qf - rf;
    let mut q = qf.round();
    let mut r = rf.round();
    let s = sf.round();
    let dq = (q - qf).abs();
    let dr = (r - rf).abs();
    let ds = (s - sf).abs();
    if dq > dr && dq > ds {
        q = -r - s;
    } else if dr > ds {
        r = -q - s;
    }
    (q as i64, r as i64)
}

/// Writes the raster as a binary (P5) PGM file.
pub fn write_pgm(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut out = format!("P5\n{SIZE} {SIZE}\n255\n").into_bytes();
    out.extend_from_slice(bytes);
    std::fs::write(path, out)?;
    Ok(())
}

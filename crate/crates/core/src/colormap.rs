//! Fixed color maps for visual outputs.

use std::f64::consts::PI;

use crate::imgcore::{DisparityMap, RgbImage};
use crate::pattern::PhaseField;

/// Heat map stops, evenly spaced on [0, 1]. Values between stops are linearly
/// interpolated; invalid pixels are black.
pub const HEAT_LUT: [[u8; 3]; 7] = [
    [0, 0, 96],
    [0, 64, 255],
    [0, 200, 255],
    [64, 255, 96],
    [255, 230, 0],
    [255, 64, 0],
    [160, 0, 0],
];

pub fn heat(t: f64) -> [f64; 3] {
    let t = if t.is_nan() { 0.0 } else { t.clamp(0.0, 1.0) };
    let pos = t * (HEAT_LUT.len() - 1) as f64;
    let i = (pos.floor() as usize).min(HEAT_LUT.len() - 2);
    let f = pos - i as f64;
    let (a, b) = (HEAT_LUT[i], HEAT_LUT[i + 1]);
    std::array::from_fn(|c| (f64::from(a[c]) * (1.0 - f) + f64::from(b[c]) * f) / 255.0)
}

/// Maps `[0, max]` onto the heat table.
pub fn heatmap(map: &DisparityMap, max: f64) -> RgbImage {
    let (w, h) = map.dims();
    let scale = if max > 0.0 { 1.0 / max } else { 0.0 };
    RgbImage::from_fn(w, h, |x, y| {
        let v = map.get(x, y);
        if v.is_nan() {
            [0.0; 3]
        } else {
            heat(f64::from(v) * scale)
        }
    })
    .expect("dimensions come from an existing map")
}

/// Phase → hue, full saturation; `mask` false pixels are black.
pub fn phase_hue(phase: &PhaseField, valid: impl Fn(usize, usize) -> bool) -> RgbImage {
    let (w, h) = phase.dims();
    RgbImage::from_fn(w, h, |x, y| {
        if !valid(x, y) {
            return [0.0; 3];
        }
        let hue = (phase.get(x, y) + PI) / (2.0 * PI) * 6.0;
        let f = hue - hue.floor();
        match hue.floor() as i64 % 6 {
            0 => [1.0, f, 0.0],
            1 => [1.0 - f, 1.0, 0.0],
            2 => [0.0, 1.0, f],
            3 => [0.0, 1.0 - f, 1.0],
            4 => [f, 0.0, 1.0],
            _ => [1.0, 0.0, 1.0 - f],
        }
    })
    .expect("dimensions come from an existing field")
}

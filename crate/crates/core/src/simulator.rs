//! Rectified active-stereo renderer for layered planar scenes.
//!
//! Geometry: a left camera at the origin, a right camera `baseline` to its
//! right, and a projector `proj_baseline` along the same axis. With
//! `κ = proj_baseline / baseline`, a scene point seen at left pixel `(x, y)`
//! with disparity `d` appears at right pixel `(x − d, y)` and is lit by
//! projector column `x − κ·d` of row `y`.
//!
//! Radiance of a point with albedo `ρ_c` is `ρ_c · P_c(x − κd, y) + A_c`, where
//! `P` is the projected pattern sampled with linear interpolation along the
//! row. Projector columns outside the pattern are unlit. The capture then
//! passes through the crosstalk matrix, additive Gaussian noise, and optional
//! 8-bit quantization.
//!
//! Layers are listed front to back. A layer covers a left-image rectangle (or
//! the whole plane) and carries a planar disparity `d = d0 + dx·x + dy·y` in
//! left-image coordinates. Visibility in the right view is resolved per right
//! pixel in painter's order by inverting each layer's disparity map, so the
//! occlusion mask and ground truth are exact rather than estimated.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::imgcore::{DisparityMap, GrayImage, ImageError, RgbImage, ValidityMask};
use crate::rng::gaussian_at;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("pattern is {pattern_width}x{pattern_height}, need at least {need_width}x{need_height}")]
    PatternTooSmall {
        pattern_width: usize,
        pattern_height: usize,
        need_width: usize,
        need_height: usize,
    },
    #[error("disparity out of range: {0}")]
    DisparityRange(String),
    #[error("invalid rig: {0}")]
    Rig(String),
    #[error("invalid scene: {0}")]
    Scene(String),
    #[error("unknown preset scene {0:?} (expected one of flat, steps, ramp, boxes, lowalbedo)")]
    UnknownPreset(String),
    #[error(transparent)]
    Image(#[from] ImageError),
}

pub type Result<T> = std::result::Result<T, SimError>;

/// Rectified stereo rig with a co-axial projector.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RigSpec {
    /// Focal length in pixels.
    pub focal: f64,
    /// Camera baseline in millimeters.
    pub baseline: f64,
    /// Projector offset from the left camera in millimeters.
    pub proj_baseline: f64,
    pub width: usize,
    pub height: usize,
}

impl Default for RigSpec {
    fn default() -> Self {
        Self {
            focal: 1200.0,
            baseline: 165.0,
            proj_baseline: 82.5,
            width: 640,
            height: 480,
        }
    }
}

impl RigSpec {
    /// Projector shift per pixel of disparity.
    pub fn kappa(&self) -> f64 {
        self.proj_baseline / self.baseline
    }

    pub fn validate(&self) -> Result<()> {
        if !self.focal.is_finite() || self.focal <= 0.0 {
            return Err(SimError::Rig(format!("focal must be > 0, got {}", self.focal)));
        }
        if !self.baseline.is_finite() || self.baseline <= 0.0 {
            return Err(SimError::Rig(format!("baseline must be > 0, got {}", self.baseline)));
        }
        if !self.proj_baseline.is_finite() || self.proj_baseline < 0.0 {
            return Err(SimError::Rig(format!(
                "proj_baseline must be >= 0, got {}",
                self.proj_baseline
            )));
        }
        if self.width == 0 || self.height == 0 {
            return Err(SimError::Rig("empty image size".into()));
        }
        Ok(())
    }
}

/// Left-image region covered by a layer. Rectangles are half-open.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Region {
    Full,
    Rect { x0: f64, y0: f64, x1: f64, y1: f64 },
}

impl Region {
    #[inline]
    pub fn contains(&self, x: f64, y: f64) -> bool {
        match *self {
            Region::Full => true,
            Region::Rect { x0, y0, x1, y1 } => x >= x0 && x < x1 && y >= y0 && y < y1,
        }
    }
}

/// `d(x, y) = d0 + dx·x + dy·y` in pixels.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DisparityPlane {
    pub d0: f64,
    #[serde(default)]
    pub dx: f64,
    #[serde(default)]
    pub dy: f64,
}

impl DisparityPlane {
    pub fn constant(d: f64) -> Self {
        Self {
            d0: d,
            dx: 0.0,
            dy: 0.0,
        }
    }

    #[inline]
    pub fn at(&self, x: f64, y: f64) -> f64 {
        self.d0 + self.dx * x + self.dy * y
    }

    /// Left-image x of the point on this plane seen at right-image `x_r`.
    #[inline]
    pub fn left_x_from_right(&self, x_r: f64, y: f64) -> f64 {
        self.left_x_from_view(x_r, y, 1.0)
    }

    /// Left-image x of the point seen at coordinate `v` from a viewpoint at
    /// fraction `s` of the baseline, where `v = x − s·d(x, y)`.
    #[inline]
    pub fn left_x_from_view(&self, v: f64, y: f64, s: f64) -> f64 {
        (v + s * (self.d0 + self.dy * y)) / (1.0 - s * self.dx)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Layer {
    pub region: Region,
    pub disparity: DisparityPlane,
    /// Per-channel albedo `[r, g, b]`, each in `[0, 1.5]`.
    pub reflectance: [f64; 3],
}

pub const IDENTITY_CROSSTALK: [[f64; 3]; 3] = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];

fn identity_crosstalk() -> [[f64; 3]; 3] {
    IDENTITY_CROSSTALK
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneSpec {
    /// Front to back.
    pub layers: Vec<Layer>,
    #[serde(default)]
    pub ambient: [f64; 3],
    #[serde(default = "identity_crosstalk")]
    pub crosstalk: [[f64; 3]; 3],
    #[serde(default)]
    pub noise_sigma: f64,
    #[serde(default)]
    pub quantize8: bool,
    /// Keys the per-pixel noise.
    #[serde(default)]
    pub seed: u64,
}

impl SceneSpec {
    pub fn single_layer(layer: Layer) -> Self {
        Self {
            layers: vec![layer],
            ambient: [0.0; 3],
            crosstalk: IDENTITY_CROSSTALK,
            noise_sigma: 0.0,
            quantize8: false,
            seed: 0,
        }
    }

    /// Checks scene invariants and returns the largest disparity over the
    /// visible image domain.
    pub fn validate(&self, width: usize, height: usize) -> Result<f64> {
        if self.layers.is_empty() {
            return Err(SimError::Scene("scene has no layers".into()));
        }
        for row in &self.crosstalk {
            let sum: f64 = row.iter().sum();
            if row.iter().any(|v| *v < 0.0 || !v.is_finite()) || (sum - 1.0).abs() > 1e-9 {
                return Err(SimError::Scene(format!("crosstalk row {row:?} is not stochastic")));
            }
        }
        if self.noise_sigma.is_nan() || self.noise_sigma < 0.0 {
            return Err(SimError::Scene("noise_sigma must be >= 0".into()));
        }
        let (wf, hf) = ((width - 1) as f64, (height - 1) as f64);
        let mut d_max = 0.0f64;
        for (i, layer) in self.layers.iter().enumerate() {
            if layer.reflectance.iter().any(|r| !(0.0..=1.5).contains(r)) {
                return Err(SimError::Scene(format!(
                    "layer {i} reflectance {:?} outside [0, 1.5]",
                    layer.reflectance
                )));
            }
            let p = layer.disparity;
            if !p.dx.is_finite() || p.dx >= 1.0 || !p.d0.is_finite() || !p.dy.is_finite() {
                return Err(SimError::DisparityRange(format!(
                    "layer {i} plane {p:?} must have finite coefficients and dx < 1"
                )));
            }
            let (x0, y0, x1, y1) = match layer.region {
                Region::Full => (0.0, 0.0, wf, hf),
                Region::Rect { x0, y0, x1, y1 } => {
                    // Integer pixel centers inside the rectangle and the image.
                    let (lx, ly) = (x0.max(0.0).ceil(), y0.max(0.0).ceil());
                    let (hx, hy) = ((x1.ceil() - 1.0).min(wf), (y1.ceil() - 1.0).min(hf));
                    if lx > hx || ly > hy {
                        continue;
                    }
                    (lx, ly, hx, hy)
                }
            };
            for (x, y) in [(x0, y0), (x0, y1), (x1, y0), (x1, y1)] {
                let d = p.at(x, y);
                if d.is_nan() || d < 0.0 || d >= width as f64 {
                    return Err(SimError::DisparityRange(format!(
                        "layer {i} has disparity {d} at ({x}, {y}); need 0 <= d < {width}"
                    )));
                }
                d_max = d_max.max(d);
            }
        }
        Ok(d_max)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RenderOutput {
    pub left: RgbImage,
    pub right: RgbImage,
    /// Left-view disparity; NaN where no layer covers the pixel.
    pub gt_disparity: DisparityMap,
    /// True where the left pixel's scene point is also visible in the right view.
    pub occlusion: ValidityMask,
    /// Projector column lighting each left pixel (`x − κ·d`).
    pub proj_coord: GrayImage,
    /// True where the projector reaches the left pixel's scene point.
    pub lit: ValidityMask,
}

/// Linear interpolation along a pattern row; columns outside the pattern are dark.
#[inline]
fn sample_row(row: &[f64], x: f64) -> f64 {
    let x0 = x.floor();
    let t = x - x0;
    let i0 = x0 as i64;
    let at = |i: i64| -> f64 {
        if i < 0 || i >= row.len() as i64 {
            0.0
        } else {
            row[i as usize]
        }
    };
    if t == 0.0 {
        at(i0)
    } else {
        (1.0 - t) * at(i0) + t * at(i0 + 1)
    }
}

struct Renderer<'a> {
    scene: &'a SceneSpec,
    pattern: &'a RgbImage,
    kappa: f64,
    width: usize,
}

impl Renderer<'_> {
    fn front_layer_left(&self, x: f64, y: f64) -> Option<usize> {
        self.scene.layers.iter().position(|l| l.region.contains(x, y))
    }

    /// Front-most layer hit by the ray at coordinate `v` of a viewpoint at
    /// baseline fraction `s`, with its left-image x.
    fn front_layer_from(&self, v: f64, y: f64, s: f64) -> Option<(usize, f64)> {
        self.scene.layers.iter().enumerate().find_map(|(i, l)| {
            let xl = l.disparity.left_x_from_view(v, y, s);
            l.region.contains(xl, y).then_some((i, xl))
        })
    }

    fn front_layer_right(&self, x_r: f64, y: f64) -> Option<(usize, f64)> {
        self.front_layer_from(x_r, y, 1.0)
    }

    /// Whether the projector ray through this point reaches it first.
    fn is_lit(&self, layer: usize, x_left: f64, y: f64) -> bool {
        if self.kappa == 0.0 {
            return true;
        }
        let px = x_left - self.kappa * self.scene.layers[layer].disparity.at(x_left, y);
        matches!(self.front_layer_from(px, y, self.kappa), Some((hit, _)) if hit == layer)
    }

    /// Radiance before crosstalk, noise and quantization. Points in a
    /// projector shadow receive ambient light only.
    fn radiance(&self, layer: usize, x_left: f64, y: usize) -> [f64; 3] {
        let l = &self.scene.layers[layer];
        if !self.is_lit(layer, x_left, y as f64) {
            return self.scene.ambient;
        }
        let d = l.disparity.at(x_left, y as f64);
        let px = x_left - self.kappa * d;
        let mut out = [0.0; 3];
        for (c, plane) in [self.pattern.r(), self.pattern.g(), self.pattern.b()]
            .into_iter()
            .enumerate()
        {
            out[c] = l.reflectance[c] * sample_row(plane.row(y), px) + self.scene.ambient[c];
        }
        out
    }

    fn finish(&self, p: [f64; 3], view: u64, x: usize, y: usize) -> [f64; 3] {
        let m = &self.scene.crosstalk;
        let mut out = [0.0; 3];
        for c in 0..3 {
            out[c] = m[c][0] * p[0] + m[c][1] * p[1] + m[c][2] * p[2];
            if self.scene.noise_sigma > 0.0 {
                out[c] += self.scene.noise_sigma * gaussian_at(self.scene.seed, view, x as u64, y as u64, c as u64);
            }
            if self.scene.quantize8 {
                out[c] = f64::from(crate::imgcore::quantize_u8(out[c])) / 255.0;
            }
        }
        out
    }

    fn ambient_only(&self) -> [f64; 3] {
        self.scene.ambient
    }

    fn render_row(&self, y: usize) -> RowOut {
        let w = self.width;
        let yf = y as f64;
        let mut row = RowOut::with_width(w);
        for x in 0..w {
            let xf = x as f64;
            match self.front_layer_left(xf, yf) {
                Some(li) => {
                    let l = &self.scene.layers[li];
                    let d = l.disparity.at(xf, yf);
                    row.left.push(self.finish(self.radiance(li, xf, y), 0, x, y));
                    row.disp.push(d as f32);
                    row.proj.push(xf - self.kappa * d);
                    let xr = xf - d;
                    let visible = xr >= 0.0
                        && xr <= (w - 1) as f64
                        && matches!(self.front_layer_right(xr, yf), Some((hit, _)) if hit == li);
                    row.visible.push(visible);
                    row.lit.push(self.is_lit(li, xf, yf));
                }
                None => {
                    row.left.push(self.finish(self.ambient_only(), 0, x, y));
                    row.disp.push(f32::NAN);
                    row.proj.push(f64::NAN);
                    row.visible.push(false);
                    row.lit.push(false);
                }
            }
            let right = match self.front_layer_right(xf, yf) {
                Some((li, xl)) => self.radiance(li, xl, y),
                None => self.ambient_only(),
            };
            row.right.push(self.finish(right, 1, x, y));
        }
        row
    }
}

struct RowOut {
    left: Vec<[f64; 3]>,
    right: Vec<[f64; 3]>,
    disp: Vec<f32>,
    proj: Vec<f64>,
    visible: Vec<bool>,
    lit: Vec<bool>,
}

impl RowOut {
    fn with_width(w: usize) -> Self {
        Self {
            left: Vec::with_capacity(w),
            right: Vec::with_capacity(w),
            disp: Vec::with_capacity(w),
            proj: Vec::with_capacity(w),
            visible: Vec::with_capacity(w),
            lit: Vec::with_capacity(w),
        }
    }
}

fn planes_from_rows(rows: &[RowOut], w: usize, h: usize, pick: impl Fn(&RowOut) -> &[[f64; 3]]) -> Result<RgbImage> {
    Ok(RgbImage::from_fn(w, h, |x, y| pick(&rows[y])[x])?)
}

/// Renders a stereo pair of `scene` lit by `pattern`.
pub fn render(scene: &SceneSpec, rig: &RigSpec, pattern: &RgbImage) -> Result<RenderOutput> {
    rig.validate()?;
    let (w, h) = (rig.width, rig.height);
    let d_max = scene.validate(w, h)?;
    let kappa = rig.kappa();
    let need_width = (w as f64 + kappa * d_max).ceil() as usize;
    if pattern.width() < need_width || pattern.height() < h {
        return Err(SimError::PatternTooSmall {
            pattern_width: pattern.width(),
            pattern_height: pattern.height(),
            need_width,
            need_height: h,
        });
    }
    let renderer = Renderer {
        scene,
        pattern,
        kappa,
        width: w,
    };
    let rows: Vec<RowOut> = (0..h).into_par_iter().map(|y| renderer.render_row(y)).collect();
    let left = planes_from_rows(&rows, w, h, |r| &r.left)?;
    let right = planes_from_rows(&rows, w, h, |r| &r.right)?;
    let gt_disparity = DisparityMap::new(w, h, rows.iter().flat_map(|r| r.disp.iter().copied()).collect())?;
    let occlusion = ValidityMask::new(w, h, rows.iter().flat_map(|r| r.visible.iter().copied()).collect())?;
    let proj_coord = GrayImage::new(w, h, rows.iter().flat_map(|r| r.proj.iter().copied()).collect())?;
    let lit = ValidityMask::new(w, h, rows.iter().flat_map(|r| r.lit.iter().copied()).collect())?;
    Ok(RenderOutput {
        left,
        right,
        gt_disparity,
        occlusion,
        proj_coord,
        lit,
    })
}

/// Photometric perturbation applied to a capture after the fact.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerturbParams {
    #[serde(default = "unit_gains")]
    pub gains: [f64; 3],
    #[serde(default)]
    pub offsets: [f64; 3],
    #[serde(default = "identity_crosstalk")]
    pub crosstalk: [[f64; 3]; 3],
    #[serde(default)]
    pub noise_sigma: f64,
    #[serde(default)]
    pub seed: u64,
    /// Clamp and round to 8-bit levels after the transform.
    #[serde(default)]
    pub quantize8: bool,
}

fn unit_gains() -> [f64; 3] {
    [1.0; 3]
}

impl Default for PerturbParams {
    fn default() -> Self {
        Self {
            gains: unit_gains(),
            offsets: [0.0; 3],
            crosstalk: IDENTITY_CROSSTALK,
            noise_sigma: 0.0,
            seed: 0,
            quantize8: false,
        }
    }
}

/// Noise stream used by [`perturb`], distinct from the renderer's two views.
const PERTURB_STREAM: u64 = 0x7065_7274;

/// `I' = M·(g∘I + o) + N(0, σ)`, clamped only when quantizing.
pub fn perturb(img: &RgbImage, params: &PerturbParams) -> Result<RgbImage> {
    if params.gains.iter().any(|g| g.is_nan() || *g < 0.0) {
        return Err(SimError::Scene(format!("gains must be >= 0, got {:?}", params.gains)));
    }
    let m = &params.crosstalk;
    Ok(RgbImage::from_fn(img.width(), img.height(), |x, y| {
        let p = img.pixel(x, y);
        let t: [f64; 3] = std::array::from_fn(|c| params.gains[c] * p[c] + params.offsets[c]);
        std::array::from_fn(|c| {
            let mut v = m[c][0] * t[0] + m[c][1] * t[1] + m[c][2] * t[2];
            if params.noise_sigma > 0.0 {
                v += params.noise_sigma * gaussian_at(params.seed, PERTURB_STREAM, x as u64, y as u64, c as u64);
            }
            if params.quantize8 {
                v = f64::from(crate::imgcore::quantize_u8(v)) / 255.0;
            }
            v
        })
    })?)
}

pub const PRESET_NAMES: [&str; 5] = ["flat", "steps", "ramp", "boxes", "lowalbedo"];

/// Named scene for a 640×480 rig. See [`preset_scene_sized`].
pub fn preset_scene(name: &str) -> Result<SceneSpec> {
    preset_scene_sized(name, 640, 480)
}

/// Named scenes. Rectangles are laid out on a 640×480 canvas and scaled to
/// `width`×`height`; disparities are not scaled.
///
/// | name | layers (front to back) |
/// |------|------------------------|
/// | `flat` | full frame, d = 16, albedo 1 |
/// | `steps` | [240,400)×[180,300) d = 50; [120,520)×[90,390) d = 30; full frame d = 10 |
/// | `ramp` | full frame, d = 12 + 0.05x + 0.01y |
/// | `boxes` | [400,560)×[260,420) d = 45 + 0.02x; [60,250)×[60,220) d = 35; [300,470)×[80,200) d = 22 + 0.02y; full frame d = 8 + 0.01x, mixed colors |
/// | `lowalbedo` | [380,560)×[240,400) d = 55 albedo ≈ 0.1; [80,300)×[60,260) d = 40 albedo ≈ 1.2; [260,420)×[300,440) d = 28 albedo ≈ 0.3; full frame d = 12 albedo 0.1, ambient 0.03 |
pub fn preset_scene_sized(name: &str, width: usize, height: usize) -> Result<SceneSpec> {
    let sx = width as f64 / 640.0;
    let sy = height as f64 / 480.0;
    let rect = |x0: f64, y0: f64, x1: f64, y1: f64| Region::Rect {
        x0: x0 * sx,
        y0: y0 * sy,
        x1: x1 * sx,
        y1: y1 * sy,
    };
    let plane = |d0: f64, dx: f64, dy: f64| DisparityPlane {
        d0,
        dx: dx / sx,
        dy: dy / sy,
    };
    let layer = |region: Region, disparity: DisparityPlane, reflectance: [f64; 3]| Layer {
        region,
        disparity,
        reflectance,
    };
    let mut scene = SceneSpec::single_layer(layer(Region::Full, DisparityPlane::constant(16.0), [1.0; 3]));
    scene.layers = match name {
        "flat" => return Ok(scene),
        "steps" => vec![
            layer(
                rect(240.0, 180.0, 400.0, 300.0),
                DisparityPlane::constant(50.0),
                [0.9; 3],
            ),
            layer(
                rect(120.0, 90.0, 520.0, 390.0),
                DisparityPlane::constant(30.0),
                [0.8; 3],
            ),
            layer(Region::Full, DisparityPlane::constant(10.0), [0.85; 3]),
        ],
        "ramp" => vec![layer(Region::Full, plane(12.0, 0.05, 0.01), [0.9; 3])],
        "boxes" => vec![
            layer(
                rect(400.0, 260.0, 560.0, 420.0),
                plane(45.0, 0.02, 0.0),
                [0.9, 0.6, 0.4],
            ),
            layer(
                rect(60.0, 60.0, 250.0, 220.0),
                DisparityPlane::constant(35.0),
                [0.4, 0.8, 0.5],
            ),
            layer(rect(300.0, 80.0, 470.0, 200.0), plane(22.0, 0.0, 0.02), [0.7, 0.7, 0.9]),
            layer(Region::Full, plane(8.0, 0.01, 0.0), [0.8; 3]),
        ],
        "lowalbedo" => {
            scene.ambient = [0.03; 3];
            vec![
                layer(
                    rect(380.0, 240.0, 560.0, 400.0),
                    DisparityPlane::constant(55.0),
                    [0.12, 0.1, 0.1],
                ),
                layer(
                    rect(80.0, 60.0, 300.0, 260.0),
                    DisparityPlane::constant(40.0),
                    [1.2, 1.15, 1.1],
                ),
                layer(
                    rect(260.0, 300.0, 420.0, 440.0),
                    DisparityPlane::constant(28.0),
                    [0.3, 0.35, 0.25],
                ),
                layer(Region::Full, DisparityPlane::constant(12.0), [0.1; 3]),
            ]
        }
        other => return Err(SimError::UnknownPreset(other.to_string())),
    };
    Ok(scene)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pattern::{gen_speckle_pattern, PatternParams};

    fn small_rig(w: usize, h: usize, kappa: f64) -> RigSpec {
        RigSpec {
            width: w,
            height: h,
            proj_baseline: 165.0 * kappa,
            ..RigSpec::default()
        }
    }

    fn pattern() -> RgbImage {
        gen_speckle_pattern(&PatternParams::default()).unwrap()
    }

    #[test]
    fn flat_constant_shift() {
        let scene = preset_scene("flat").unwrap();
        let out = render(&scene, &small_rig(96, 24, 0.5), &pattern()).unwrap();
        for y in 0..24 {
            for x in 0..96 {
                assert_eq!(out.gt_disparity.get(x, y), 16.0);
                assert_eq!(out.occlusion.get(x, y), x >= 16, "x={x}");
                assert_eq!(out.proj_coord.get(x, y), x as f64 - 8.0);
            }
        }
    }

    #[test]
    fn zero_projector_baseline_uses_pixel_coords() {
        let pat = pattern();
        let scene = preset_scene("flat").unwrap();
        let out = render(&scene, &small_rig(64, 8, 0.0), &pat).unwrap();
        for y in 0..8 {
            for x in 0..64 {
                assert_eq!(out.proj_coord.get(x, y), x as f64);
                assert_eq!(out.left.pixel(x, y), pat.pixel(x, y));
            }
        }
    }

    #[test]
    fn foreground_occludes_band_left_of_its_edge() {
        // Scanline oracle: background point x is hidden iff x − 10 falls inside
        // the foreground's right-view span [x0 − 40, x1 − 40).
        let (x0, x1) = (100.0, 160.0);
        let mut scene = SceneSpec::single_layer(Layer {
            region: Region::Rect {
                x0,
                y0: 0.0,
                x1,
                y1: 4.0,
            },
            disparity: DisparityPlane::constant(40.0),
            reflectance: [1.0; 3],
        });
        scene.layers.push(Layer {
            region: Region::Full,
            disparity: DisparityPlane::constant(10.0),
            reflectance: [1.0; 3],
        });
        let out = render(&scene, &small_rig(240, 4, 0.5), &pattern()).unwrap();
        for x in 0..240usize {
            let xf = x as f64;
            let on_fg = xf >= x0 && xf < x1;
            let expected = if on_fg {
                xf - 40.0 >= 0.0
            } else {
                let xr = xf - 10.0;
                xr >= 0.0 && !(xr >= x0 - 40.0 && xr < x1 - 40.0)
            };
            assert_eq!(out.occlusion.get(x, 0), expected, "x={x}");
        }
        let hidden = (0..240).filter(|&x| x >= 10 && !out.occlusion.get(x, 0)).count();
        assert_eq!(hidden, 30);
        assert!((70..100).all(|x| !out.occlusion.get(x, 0)));
    }

    #[test]
    fn foreground_casts_projector_shadow() {
        // Background point x is lit by column x − 5; the foreground covers
        // columns [x0 − 20, x1 − 20), so [x0 − 15, x0) lies in shadow.
        let (x0, x1) = (100.0, 160.0);
        let mut scene = SceneSpec::single_layer(Layer {
            region: Region::Rect {
                x0,
                y0: 0.0,
                x1,
                y1: 4.0,
            },
            disparity: DisparityPlane::constant(40.0),
            reflectance: [1.0; 3],
        });
        scene.layers.push(Layer {
            region: Region::Full,
            disparity: DisparityPlane::constant(10.0),
            reflectance: [1.0; 3],
        });
        scene.ambient = [0.02; 3];
        let out = render(&scene, &small_rig(240, 4, 0.5), &pattern()).unwrap();
        for x in 0..240usize {
            let shadow = (85..100).contains(&x);
            assert_eq!(out.lit.get(x, 1), !shadow, "x={x}");
            if shadow {
                assert_eq!(out.left.pixel(x, 1), [0.02; 3]);
            }
        }
        // Right view: background at x_r is lit by x_r + 5, so [120, 135) right
        // of the foreground span [60, 120) is dark.
        for xr in 0..240usize {
            let dark = out.right.pixel(xr, 1) == [0.02; 3];
            assert_eq!(dark, (120..135).contains(&xr), "x_r={xr}");
        }
        let zero = render(&scene, &small_rig(240, 4, 0.0), &pattern()).unwrap();
        assert_eq!(zero.lit.count(), 240 * 4);
    }

    #[test]
    fn photometric_consistency_integer_disparity() {
        let scene = preset_scene_sized("steps", 320, 240).unwrap();
        let out = render(&scene, &small_rig(320, 240, 0.5), &pattern()).unwrap();
        let mut checked = 0;
        for y in 0..240 {
            for x in 0..320 {
                if !out.occlusion.get(x, y) {
                    continue;
                }
                let d = out.gt_disparity.get(x, y) as usize;
                let (l, r) = (out.left.pixel(x, y), out.right.pixel(x - d, y));
                for c in 0..3 {
                    assert!((l[c] - r[c]).abs() <= 1e-6);
                }
                checked += 1;
            }
        }
        assert!(checked > 60_000);
    }

    #[test]
    fn presets_within_range() {
        for name in PRESET_NAMES {
            let scene = preset_scene(name).unwrap();
            let d_max = scene.validate(640, 480).unwrap();
            assert!(d_max <= 64.0, "{name}: {d_max}");
        }
        assert!(matches!(preset_scene("nope"), Err(SimError::UnknownPreset(_))));
        assert_eq!(preset_scene("flat").unwrap().layers.len(), 1);
        let steps = preset_scene("steps").unwrap();
        let ds: Vec<f64> = steps.layers.iter().map(|l| l.disparity.d0).collect();
        assert_eq!(ds, vec![50.0, 30.0, 10.0]);
    }

    #[test]
    fn narrow_pattern_and_bad_disparity_rejected() {
        let scene = preset_scene("flat").unwrap();
        let narrow = RgbImage::from_fn(64, 8, |_, _| [0.5; 3]).unwrap();
        assert!(matches!(
            render(&scene, &small_rig(64, 8, 0.5), &narrow),
            Err(SimError::PatternTooSmall { .. })
        ));
        let bad = SceneSpec::single_layer(Layer {
            region: Region::Full,
            disparity: DisparityPlane::constant(80.0),
            reflectance: [1.0; 3],
        });
        assert!(matches!(
            render(&bad, &small_rig(64, 8, 0.5), &pattern()),
            Err(SimError::DisparityRange(_))
        ));
    }

    #[test]
    fn perturb_identity() {
        let img = pattern().crop(0, 0, 16, 4).unwrap();
        assert_eq!(perturb(&img, &PerturbParams::default()).unwrap(), img);
        let q = perturb(
            &img,
            &PerturbParams {
                gains: [3.0; 3],
                quantize8: true,
                ..Default::default()
            },
        )
        .unwrap();
        assert!(q.r().data().iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn deterministic_with_noise_regardless_of_threads() {
        let mut scene = preset_scene_sized("boxes", 160, 120).unwrap();
        scene.noise_sigma = 0.01;
        scene.seed = 9;
        let rig = small_rig(160, 120, 0.5);
        let pat = pattern();
        let a = render(&scene, &rig, &pat).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let b = pool.install(|| render(&scene, &rig, &pat).unwrap());
        assert_eq!(a.left, b.left);
        assert_eq!(a.right, b.right);
        assert_eq!(a.gt_disparity, b.gt_disparity);
    }
}

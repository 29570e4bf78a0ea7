//! Gray-code column patterns, stack decoding, and stereo ground truth from
//! decoded projector coordinates.
//!
//! Frame order in a [`GraycodeStack`]: for each bit from most to least
//! significant, the code frame followed by its inverse; then an all-white and
//! an all-black frame.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::imgcore::{ensure_same_dims, DisparityMap, GrayImage, ImageError, RgbImage, ValidityMask};
use crate::simulator::{render, RigSpec, SceneSpec, SimError};

/// Default `(white − black)` contrast below which a pixel is invalid.
pub const DEFAULT_CONTRAST_THRESHOLD: f64 = 0.05;

/// Largest right-view coordinate step accepted as a monotone bracket.
pub const MAX_BRACKET_STEP: f64 = 2.0;

#[derive(Debug, Error)]
pub enum GraycodeError {
    #[error("{n_bits} bits encode {} columns, projector needs {proj_width}", 1u64 << n_bits)]
    InsufficientBits { proj_width: usize, n_bits: u32 },
    #[error("stack has {found} frames, expected {expected}")]
    FrameCount { expected: usize, found: usize },
    #[error(transparent)]
    Image(#[from] ImageError),
    #[error(transparent)]
    Sim(#[from] SimError),
}

pub type Result<T> = std::result::Result<T, GraycodeError>;

#[inline]
pub fn gray_encode(v: u64) -> u64 {
    v ^ (v >> 1)
}

/// Inverse of [`gray_encode`] by prefix XOR.
#[inline]
pub fn gray_decode(mut g: u64) -> u64 {
    let mut shift = 1;
    while shift < 64 {
        g ^= g >> shift;
        shift <<= 1;
    }
    g
}

#[derive(Clone, Debug, PartialEq)]
pub struct GraycodeStack {
    n_bits: u32,
    frames: Vec<GrayImage>,
}

impl GraycodeStack {
    pub fn new(n_bits: u32, frames: Vec<GrayImage>) -> Result<Self> {
        let expected = 2 * n_bits as usize + 2;
        if frames.len() != expected {
            return Err(GraycodeError::FrameCount {
                expected,
                found: frames.len(),
            });
        }
        for f in &frames[1..] {
            ensure_same_dims(frames[0].dims(), f.dims())?;
        }
        Ok(Self { n_bits, frames })
    }

    pub fn n_bits(&self) -> u32 {
        self.n_bits
    }

    pub fn frames(&self) -> &[GrayImage] {
        &self.frames
    }

    pub fn dims(&self) -> (usize, usize) {
        self.frames[0].dims()
    }

    /// Code frame for the `i`-th most significant bit.
    pub fn code(&self, i: usize) -> &GrayImage {
        &self.frames[2 * i]
    }

    pub fn inverse(&self, i: usize) -> &GrayImage {
        &self.frames[2 * i + 1]
    }

    pub fn white(&self) -> &GrayImage {
        &self.frames[2 * self.n_bits as usize]
    }

    pub fn black(&self) -> &GrayImage {
        &self.frames[2 * self.n_bits as usize + 1]
    }
}

/// Smallest bit count covering `proj_width` columns.
pub fn bits_for_width(proj_width: usize) -> u32 {
    let mut n = 1;
    while (1usize << n) < proj_width {
        n += 1;
    }
    n
}

/// Column Gray-code frames; bit value 1 is a bright column.
pub fn gen_stack(proj_width: usize, proj_height: usize, n_bits: u32) -> Result<GraycodeStack> {
    if n_bits == 0 || n_bits >= 63 || (1u64 << n_bits) < proj_width as u64 {
        return Err(GraycodeError::InsufficientBits { proj_width, n_bits });
    }
    let codes: Vec<u64> = (0..proj_width as u64).map(gray_encode).collect();
    let mut frames = Vec::with_capacity(2 * n_bits as usize + 2);
    for i in 0..n_bits {
        let bit = n_bits - 1 - i;
        let on = |x: usize| (codes[x] >> bit) & 1 == 1;
        frames.push(GrayImage::from_fn(proj_width, proj_height, |x, _| {
            f64::from(on(x) as u8)
        })?);
        frames.push(GrayImage::from_fn(proj_width, proj_height, |x, _| {
            f64::from(!on(x) as u8)
        })?);
    }
    frames.push(GrayImage::filled(proj_width, proj_height, 1.0)?);
    frames.push(GrayImage::filled(proj_width, proj_height, 0.0)?);
    GraycodeStack::new(n_bits, frames)
}

/// Decoded projector column per camera pixel. Invalid pixels hold NaN.
#[derive(Clone, Debug, PartialEq)]
pub struct CoordMap {
    width: usize,
    height: usize,
    data: Vec<f64>,
    valid: ValidityMask,
}

impl CoordMap {
    /// Builds a map from raw coordinates; NaN entries are invalid.
    pub fn from_coords(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        let valid = ValidityMask::new(width, height, data.iter().map(|v| !v.is_nan()).collect())?;
        Ok(Self {
            width,
            height,
            data,
            valid,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn valid(&self) -> &ValidityMask {
        &self.valid
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    pub fn row(&self, y: usize) -> &[f64] {
        &self.data[y * self.width..(y + 1) * self.width]
    }

    pub fn to_f32(&self) -> Vec<f32> {
        self.data.iter().map(|&v| v as f32).collect()
    }
}

/// How the integer column staircase is refined to subpixel coordinates.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Subpixel {
    /// Integer columns only.
    None,
    /// Spread each run of equal columns along a row evenly over that
    /// column's footprint `[c − ½, c + ½)`.
    RunInterpolation,
    /// Locate the stripe boundary from the one bit-plane that is ambiguous
    /// at this pixel: with normalized difference `s = (code − inverse) /
    /// (white − black)`, the pixel sits `(1 − |s|)/2` columns from the decoded
    /// column toward the neighbor whose Gray code differs in that bit.
    #[default]
    EdgeIntensity,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecodeOptions {
    pub contrast_threshold: f64,
    pub subpixel: Subpixel,
}

impl Default for DecodeOptions {
    fn default() -> Self {
        Self {
            contrast_threshold: DEFAULT_CONTRAST_THRESHOLD,
            subpixel: Subpixel::default(),
        }
    }
}

/// Index, counted from the most significant frame, of the bit that differs
/// between the Gray codes of `a` and `a + 1`.
fn flip_frame(a: u64, n_bits: u32) -> Option<usize> {
    let diff = gray_encode(a) ^ gray_encode(a + 1);
    let bit = diff.trailing_zeros();
    (bit < n_bits).then(|| (n_bits - 1 - bit) as usize)
}

pub fn decode_stack(captured: &GraycodeStack, opts: &DecodeOptions) -> Result<CoordMap> {
    let (w, h) = captured.dims();
    let n = captured.n_bits as usize;
    let white = captured.white().data();
    let black = captured.black().data();
    let mut coords: Vec<f64> = (0..w * h)
        .into_par_iter()
        .map(|i| {
            let contrast = white[i] - black[i];
            if contrast.is_nan() || contrast < opts.contrast_threshold || contrast <= 0.0 {
                return f64::NAN;
            }
            let mut g = 0u64;
            let mut weakest = (f64::INFINITY, 0usize);
            for k in 0..n {
                let s = (captured.code(k).data()[i] - captured.inverse(k).data()[i]) / contrast;
                g = (g << 1) | u64::from(s > 0.0);
                if s.abs() < weakest.0 {
                    weakest = (s.abs(), k);
                }
            }
            let c = gray_decode(g);
            if opts.subpixel != Subpixel::EdgeIntensity {
                return c as f64;
            }
            let delta = ((1.0 - weakest.0) / 2.0).clamp(0.0, 0.5);
            if flip_frame(c, captured.n_bits) == Some(weakest.1) {
                c as f64 + delta
            } else if c > 0 && flip_frame(c - 1, captured.n_bits) == Some(weakest.1) {
                c as f64 - delta
            } else {
                c as f64
            }
        })
        .collect();
    if opts.subpixel == Subpixel::RunInterpolation {
        coords.par_chunks_mut(w).for_each(spread_runs);
    }
    CoordMap::from_coords(w, h, coords)
}

fn spread_runs(row: &mut [f64]) {
    let mut s = 0;
    while s < row.len() {
        let c = row[s];
        if c.is_nan() {
            s += 1;
            continue;
        }
        let mut e = s + 1;
        while e < row.len() && row[e] == c {
            e += 1;
        }
        let len = (e - s) as f64;
        for (k, v) in row[s..e].iter_mut().enumerate() {
            *v = c - 0.5 + (k as f64 + 0.5) / len;
        }
        s = e;
    }
}

/// Disparity from equal projector coordinates along each rectified row.
///
/// For a valid left pixel with coordinate `c`, every right-row bracket
/// `[x, x+1]` with `R[x] ≤ c < R[x+1]` and `R[x+1] − R[x] ≤ MAX_BRACKET_STEP`
/// yields a crossing at `x + (c − R[x]) / (R[x+1] − R[x])`. Exactly one
/// crossing gives `d = x_l − x_r`; none or several leave the pixel invalid.
pub fn gt_from_stereo(left: &CoordMap, right: &CoordMap) -> Result<DisparityMap> {
    if left.height != right.height {
        return Err(ImageError::DimensionMismatch {
            expected: left.dims(),
            found: right.dims(),
        }
        .into());
    }
    let (w, h) = left.dims();
    let rows: Vec<Vec<f32>> = (0..h)
        .into_par_iter()
        .map(|y| {
            let lrow = left.row(y);
            let rrow = right.row(y);
            let brackets: Vec<(usize, f64, f64)> = (0..rrow.len().saturating_sub(1))
                .filter_map(|x| {
                    let (a, b) = (rrow[x], rrow[x + 1]);
                    (b > a && b - a <= MAX_BRACKET_STEP).then_some((x, a, b))
                })
                .collect();
            lrow.iter()
                .enumerate()
                .map(|(xl, &c)| {
                    if c.is_nan() {
                        return f32::NAN;
                    }
                    let mut hit = None;
                    let mut count = 0;
                    for (i, &(x, a, b)) in brackets.iter().enumerate() {
                        let closes_run = c == b && brackets.get(i + 1).is_none_or(|n| n.0 != x + 1);
                        if (a <= c && c < b) || closes_run {
                            count += 1;
                            hit = Some(x as f64 + (c - a) / (b - a));
                        }
                    }
                    match (count, hit) {
                        (1, Some(xr)) if xl as f64 - xr >= 0.0 => (xl as f64 - xr) as f32,
                        _ => f32::NAN,
                    }
                })
                .collect()
        })
        .collect();
    Ok(DisparityMap::new(w, h, rows.concat())?)
}

/// Renders every frame of `stack` through the simulator, returning the left
/// and right captured stacks (channel means of the RGB captures). Frame `i`
/// uses noise seed `scene.seed + i`.
pub fn capture_stack(
    stack: &GraycodeStack,
    scene: &SceneSpec,
    rig: &RigSpec,
) -> Result<(GraycodeStack, GraycodeStack)> {
    let mut left = Vec::with_capacity(stack.frames.len());
    let mut right = Vec::with_capacity(stack.frames.len());
    for (i, frame) in stack.frames.iter().enumerate() {
        let mut s = scene.clone();
        s.seed = scene.seed.wrapping_add(i as u64);
        let out = render(&s, rig, &RgbImage::from_gray(frame))?;
        left.push(out.left.luminance());
        right.push(out.right.luminance());
    }
    Ok((
        GraycodeStack::new(stack.n_bits, left)?,
        GraycodeStack::new(stack.n_bits, right)?,
    ))
}

//! RGB phase-speckle projector pattern.
//!
//! Generation runs in four stages: a vertical fringe phase on a low-resolution
//! grid, one full-frame Fisher–Yates scramble of that grid, nearest-neighbor
//! block upsampling, and finally composition into three channels offset by
//! 2π/3:
//!
//! ```text
//! B = a + b·cos(φ − 2π/3)
//! G = a + b·cos(φ)
//! R = a + b·cos(φ + 2π/3)
//! ```
//!
//! Scrambling the phase field once and then composing is pixel-wise identical
//! to scrambling each of the three phase-shifted fringes with the same
//! permutation.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::imgcore::{ImageError, RgbImage};
use crate::rng::SplitMix64;

#[derive(Debug, Error)]
pub enum PatternError {
    #[error("fringe period {0} is below 3 pixels")]
    PeriodTooShort(f64),
    #[error("invalid pattern parameters: {0}")]
    Params(String),
    #[error("permutation covers {perm} elements but the field has {field}")]
    SizeMismatch { perm: usize, field: usize },
    #[error(transparent)]
    Image(#[from] ImageError),
}

pub type Result<T> = std::result::Result<T, PatternError>;

/// Wraps an angle into `(−π, π]`.
#[inline]
pub fn wrap_phase(v: f64) -> f64 {
    let r = (v + PI).rem_euclid(TAU) - PI;
    if r <= -PI {
        r + TAU
    } else {
        r
    }
}

/// Parameters of the projected speckle pattern.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PatternParams {
    /// Background intensity.
    pub a: f64,
    /// Fringe amplitude.
    pub b: f64,
    /// Fringe period in low-resolution pixels.
    pub period: f64,
    pub lo_width: usize,
    pub lo_height: usize,
    /// Block upsampling factor.
    pub upsample: usize,
    pub seed: u64,
}

impl Default for PatternParams {
    /// 320×180 grid upsampled ×4 to a 1280×720 projector frame.
    fn default() -> Self {
        Self {
            a: 0.5,
            b: 0.45,
            period: 8.0,
            lo_width: 320,
            lo_height: 180,
            upsample: 4,
            seed: 0,
        }
    }
}

impl PatternParams {
    pub fn validate(&self) -> Result<()> {
        check_amplitudes(self.a, self.b)?;
        if self.period.is_nan() || self.period < 3.0 {
            return Err(PatternError::PeriodTooShort(self.period));
        }
        if self.lo_width == 0 || self.lo_height == 0 {
            return Err(PatternError::Params("low-resolution grid is empty".into()));
        }
        if self.upsample == 0 {
            return Err(PatternError::Params("upsample factor must be >= 1".into()));
        }
        Ok(())
    }

    pub fn output_width(&self) -> usize {
        self.lo_width * self.upsample
    }

    pub fn output_height(&self) -> usize {
        self.lo_height * self.upsample
    }
}

fn check_amplitudes(a: f64, b: f64) -> Result<()> {
    // Small slack so that e.g. a=0.55, b=0.45 is accepted despite rounding.
    const EPS: f64 = 1e-12;
    if !(a.is_finite() && b.is_finite()) || b < 0.0 || a + b > 1.0 + EPS || a - b < -EPS {
        return Err(PatternError::Params(format!(
            "need b >= 0, a + b <= 1 and a - b >= 0 (a={a}, b={b})"
        )));
    }
    Ok(())
}

/// Per-pixel wrapped phase in radians, range `(−π, π]`.
#[derive(Clone, Debug, PartialEq)]
pub struct PhaseField {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl PhaseField {
    /// Builds a field, wrapping every sample into `(−π, π]`.
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> crate::imgcore::Result<Self> {
        let data: Vec<f64> = data.into_iter().map(wrap_phase).collect();
        if width == 0 || height == 0 || width * height != data.len() {
            return Err(ImageError::Geometry {
                width,
                height,
                len: data.len(),
            });
        }
        Ok(Self { width, height, data })
    }

    pub fn from_fn(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize) -> f64,
    ) -> crate::imgcore::Result<Self> {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self::new(width, height, data)
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    #[inline]
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn crop(&self, x0: usize, y0: usize, w: usize, h: usize) -> crate::imgcore::Result<Self> {
        if x0 + w > self.width || y0 + h > self.height {
            return Err(ImageError::DimensionMismatch {
                expected: (self.width, self.height),
                found: (x0 + w, y0 + h),
            });
        }
        Self::from_fn(w, h, |x, y| self.get(x0 + x, y0 + y))
    }
}

/// A bijection on `0..n`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Permutation {
    map: Vec<usize>,
}

impl Permutation {
    pub fn identity(n: usize) -> Self {
        Self { map: (0..n).collect() }
    }

    /// Accepts `map` only if it is a bijection on `0..map.len()`.
    pub fn from_map(map: Vec<usize>) -> Result<Self> {
        let mut seen = vec![false; map.len()];
        for &m in &map {
            if m >= map.len() || std::mem::replace(&mut seen[m], true) {
                return Err(PatternError::Params("map is not a bijection".into()));
            }
        }
        Ok(Self { map })
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn map(&self) -> &[usize] {
        &self.map
    }

    pub fn inverse(&self) -> Self {
        let mut inv = vec![0; self.map.len()];
        for (i, &m) in self.map.iter().enumerate() {
            inv[m] = i;
        }
        Self { map: inv }
    }
}

/// Vertical fringe `φ(x) = wrap(2πx/T)`, constant down each column.
pub fn gen_base_phase(lo_width: usize, lo_height: usize, period: f64) -> Result<PhaseField> {
    if period.is_nan() || period < 3.0 {
        return Err(PatternError::PeriodTooShort(period));
    }
    let row: Vec<f64> = (0..lo_width)
        .map(|x| wrap_phase(TAU * (x as f64).rem_euclid(period) / period))
        .collect();
    Ok(PhaseField::from_fn(lo_width, lo_height, |x, _| row[x])?)
}

/// Fisher–Yates shuffle of `0..n` driven by [`SplitMix64`] seeded with `seed`.
///
/// For `i` from `n−1` down to `1`, `j = rng.below(i + 1)` and entries `i`, `j`
/// are swapped. The result depends only on `(n, seed)`.
pub fn gen_permutation(n: usize, seed: u64) -> Permutation {
    let mut map: Vec<usize> = (0..n).collect();
    let mut rng = SplitMix64::new(seed);
    for i in (1..n).rev() {
        let j = rng.below(i as u64 + 1) as usize;
        map.swap(i, j);
    }
    Permutation { map }
}

/// `out[i] = in[perm[i]]` over the row-major flattening.
pub fn scramble(phase: &PhaseField, perm: &Permutation) -> Result<PhaseField> {
    if perm.len() != phase.len() {
        return Err(PatternError::SizeMismatch {
            perm: perm.len(),
            field: phase.len(),
        });
    }
    Ok(PhaseField {
        width: phase.width,
        height: phase.height,
        data: perm.map.iter().map(|&m| phase.data[m]).collect(),
    })
}

/// Nearest-neighbor block replication by an integer factor.
pub fn upsample_block(phase: &PhaseField, k: usize) -> Result<PhaseField> {
    if k == 0 {
        return Err(PatternError::Params("upsample factor must be >= 1".into()));
    }
    Ok(PhaseField::from_fn(phase.width * k, phase.height * k, |x, y| {
        phase.get(x / k, y / k)
    })?)
}

/// The three phase-shifted channel values `[R, G, B]` for one phase sample.
#[inline]
pub fn channel_values(phi: f64, a: f64, b: f64) -> [f64; 3] {
    const SHIFT: f64 = TAU / 3.0;
    [
        a + b * (phi + SHIFT).cos(),
        a + b * phi.cos(),
        a + b * (phi - SHIFT).cos(),
    ]
}

pub fn compose_rgb(phase: &PhaseField, a: f64, b: f64) -> Result<RgbImage> {
    check_amplitudes(a, b)?;
    Ok(RgbImage::from_fn(phase.width, phase.height, |x, y| {
        channel_values(phase.get(x, y), a, b)
    })?)
}

/// Base fringe → scramble → upsample → compose.
pub fn gen_speckle_pattern(params: &PatternParams) -> Result<RgbImage> {
    params.validate()?;
    let base = gen_base_phase(params.lo_width, params.lo_height, params.period)?;
    let perm = gen_permutation(base.len(), params.seed);
    let scrambled = scramble(&base, &perm)?;
    let up = upsample_block(&scrambled, params.upsample)?;
    compose_rgb(&up, params.a, params.b)
}

//! Phase pre-normalization: RGB capture → wrapped phase + modulation mask.
//!
//! Per pixel,
//!
//! ```text
//! num = 2G − R − B
//! den = R − B
//! phase = atan2(num, den)        ∈ (−π, π]
//! modulation = sqrt(num² + den²)
//! ```
//!
//! Any transform `I_c → α·I_c + β` applied equally to all three channels
//! scales `(num, den)` by `α` and leaves the phase unchanged.
//!
//! On an ideal capture of the composed pattern the decoded value is
//! `atan2(3b·cosφ, −√3·b·sinφ)`, an injective but non-uniform remapping of the
//! projected phase `φ`. Both views see the same remapping, so matching on the
//! decoded phase is unaffected.

use std::f64::consts::PI;

use rayon::prelude::*;
use thiserror::Error;

use crate::imgcore::{ensure_same_dims, GrayImage, ImageError, RgbImage, ValidityMask};
use crate::pattern::PhaseField;

/// Default modulation threshold on `[0, 1]` intensities.
pub const DEFAULT_MOD_THRESHOLD: f64 = 0.05;

#[derive(Debug, Error)]
pub enum PpnError {
    #[error("modulation threshold must be >= 0, got {0}")]
    Threshold(f64),
    #[error(transparent)]
    Image(#[from] ImageError),
}

pub type Result<T> = std::result::Result<T, PpnError>;

#[derive(Clone, Debug, PartialEq)]
pub struct PpnResult {
    pub phase: PhaseField,
    pub modulation: GrayImage,
    pub valid: ValidityMask,
}

impl PpnResult {
    pub fn dims(&self) -> (usize, usize) {
        self.phase.dims()
    }

    pub fn crop(&self, x0: usize, y0: usize, w: usize, h: usize) -> Result<Self> {
        Ok(Self {
            phase: self.phase.crop(x0, y0, w, h)?,
            modulation: self.modulation.crop(x0, y0, w, h)?,
            valid: self.valid.crop(x0, y0, w, h)?,
        })
    }
}

/// Decodes one pixel: `(phase, modulation)`. Degenerate pixels give phase 0.
#[inline]
pub fn decode_pixel(r: f64, g: f64, b: f64) -> (f64, f64) {
    let num = 2.0 * g - r - b;
    let den = r - b;
    let modulation = num.hypot(den);
    if modulation == 0.0 {
        return (0.0, 0.0);
    }
    let mut phase = num.atan2(den);
    if phase <= -PI {
        phase = PI;
    }
    (phase, modulation)
}

pub fn decode(img: &RgbImage, mod_threshold: f64) -> Result<PpnResult> {
    if mod_threshold.is_nan() || mod_threshold < 0.0 {
        return Err(PpnError::Threshold(mod_threshold));
    }
    let (w, h) = img.dims();
    let (r, g, b) = (img.r().data(), img.g().data(), img.b().data());
    let decoded: Vec<(f64, f64)> = (0..w * h)
        .into_par_iter()
        .map(|i| decode_pixel(r[i], g[i], b[i]))
        .collect();
    let phase = decoded.iter().map(|p| p.0).collect();
    let modulation: Vec<f64> = decoded.iter().map(|p| p.1).collect();
    let valid = modulation.iter().map(|&m| m > 0.0 && m > mod_threshold).collect();
    Ok(PpnResult {
        phase: PhaseField::new(w, h, phase)?,
        modulation: GrayImage::new(w, h, modulation)?,
        valid: ValidityMask::new(w, h, valid)?,
    })
}

/// Decodes both views independently.
pub fn decode_pair(left: &RgbImage, right: &RgbImage, mod_threshold: f64) -> Result<(PpnResult, PpnResult)> {
    ensure_same_dims(left.dims(), right.dims())?;
    Ok((decode(left, mod_threshold)?, decode(right, mod_threshold)?))
}

/// One of the six orderings of the color planes. The name lists which input
/// plane feeds the R, G and B slots of the decoder, e.g. `Brg` decodes with
/// `R ← B, G ← R, B ← G`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ChannelOrder {
    Rgb,
    Rbg,
    Grb,
    Gbr,
    Brg,
    Bgr,
}

impl ChannelOrder {
    pub const ALL: [ChannelOrder; 6] = [
        ChannelOrder::Rgb,
        ChannelOrder::Rbg,
        ChannelOrder::Grb,
        ChannelOrder::Gbr,
        ChannelOrder::Brg,
        ChannelOrder::Bgr,
    ];

    /// Source plane index (0=R, 1=G, 2=B) for each output slot.
    pub fn sources(self) -> [usize; 3] {
        match self {
            ChannelOrder::Rgb => [0, 1, 2],
            ChannelOrder::Rbg => [0, 2, 1],
            ChannelOrder::Grb => [1, 0, 2],
            ChannelOrder::Gbr => [1, 2, 0],
            ChannelOrder::Brg => [2, 0, 1],
            ChannelOrder::Bgr => [2, 1, 0],
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ChannelOrder::Rgb => "rgb",
            ChannelOrder::Rbg => "rbg",
            ChannelOrder::Grb => "grb",
            ChannelOrder::Gbr => "gbr",
            ChannelOrder::Brg => "brg",
            ChannelOrder::Bgr => "bgr",
        }
    }

    pub fn apply(self, img: &RgbImage) -> RgbImage {
        let s = self.sources();
        img.map_pixels(|p| [p[s[0]], p[s[1]], p[s[2]]])
    }
}

impl std::str::FromStr for ChannelOrder {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        ChannelOrder::ALL
            .into_iter()
            .find(|o| o.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown channel order {s:?}"))
    }
}

pub fn channel_permute_decode(img: &RgbImage, order: ChannelOrder, mod_threshold: f64) -> Result<PpnResult> {
    decode(&order.apply(img), mod_threshold)
}

//! RGB phase-speckle structured light: pattern generation, phase
//! pre-normalization, and a synthetic active-stereo pipeline (renderer,
//! Gray-code ground truth, block matcher, metrics, triangulation).
//!
//! All images are `f64` on `[0, 1]` unless noted; disparities are `f32`
//! with NaN marking invalid pixels.

pub mod cli;
pub mod colormap;
pub mod eval;
pub mod graycode;
pub mod imgcore;
pub mod matcher;
pub mod pattern;
pub mod ppn;
pub mod recon;
pub mod rng;
pub mod simulator;

pub use imgcore::{DisparityMap, GrayImage, RgbImage, ValidityMask};

use thiserror::Error;

/// Any error from the library, tagged with its originating module.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Image(#[from] imgcore::ImageError),
    #[error(transparent)]
    Pattern(#[from] pattern::PatternError),
    #[error(transparent)]
    Ppn(#[from] ppn::PpnError),
    #[error(transparent)]
    Sim(#[from] simulator::SimError),
    #[error(transparent)]
    Graycode(#[from] graycode::GraycodeError),
    #[error(transparent)]
    Match(#[from] matcher::MatchError),
    #[error(transparent)]
    Eval(#[from] eval::EvalError),
    #[error(transparent)]
    Recon(#[from] recon::ReconError),
}

impl Error {
    /// Stable `module.kind` code, e.g. `imgcore.io` or `eval.empty`.
    pub fn code(&self) -> &'static str {
        use imgcore::ImageError as I;
        match self {
            Error::Image(e) => match e {
                I::Io { .. } => "imgcore.io",
                I::PngDecode { .. } => "imgcore.png_decode",
                I::PngEncode { .. } => "imgcore.png_encode",
                I::Pfm { .. } => "imgcore.pfm",
                I::DimensionMismatch { .. } => "imgcore.dimension_mismatch",
                I::Geometry { .. } => "imgcore.geometry",
                I::BadDisparity { .. } => "imgcore.bad_disparity",
            },
            Error::Pattern(pattern::PatternError::Image(_)) => "pattern.image",
            Error::Pattern(_) => "pattern.params",
            Error::Ppn(ppn::PpnError::Threshold(_)) => "ppn.threshold",
            Error::Ppn(ppn::PpnError::Image(_)) => "ppn.image",
            Error::Sim(e) => match e {
                simulator::SimError::PatternTooSmall { .. } => "simulator.pattern_too_small",
                simulator::SimError::DisparityRange { .. } => "simulator.disparity_range",
                simulator::SimError::UnknownPreset(_) => "simulator.unknown_preset",
                simulator::SimError::Image(_) => "simulator.image",
                _ => "simulator.params",
            },
            Error::Graycode(e) => match e {
                graycode::GraycodeError::InsufficientBits { .. } => "graycode.insufficient_bits",
                graycode::GraycodeError::FrameCount { .. } => "graycode.frame_count",
                graycode::GraycodeError::Image(_) => "graycode.image",
                graycode::GraycodeError::Sim(_) => "graycode.simulator",
            },
            Error::Match(e) => match e {
                matcher::MatchError::Params(_) => "matcher.params",
                matcher::MatchError::ModeMismatch(..) => "matcher.mode_mismatch",
                matcher::MatchError::Image(_) => "matcher.image",
            },
            Error::Eval(e) => match e {
                eval::EvalError::Threshold(_) => "eval.threshold",
                eval::EvalError::Empty => "eval.empty",
                eval::EvalError::NoReports => "eval.no_reports",
                eval::EvalError::Csv(_) => "eval.csv",
                eval::EvalError::Image(_) => "eval.image",
            },
            Error::Recon(e) => match e {
                recon::ReconError::MinDisp(_) => "recon.min_disp",
                recon::ReconError::Rig => "recon.rig",
                recon::ReconError::TooFewPoints(_) => "recon.too_few_points",
                recon::ReconError::Image(_) => "recon.image",
            },
        }
    }
}

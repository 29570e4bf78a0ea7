//! Local SSD block matcher with winner-take-all, parabola refinement and a
//! left-right consistency check.
//!
//! The matcher runs on multi-plane float images: the three color planes in
//! RGB mode, or the `(cos φ, sin φ)` embedding of decoded phase in phase
//! mode. On the embedding, the per-pixel squared distance is `2 − 2cos Δφ`,
//! a circular distance with no seam at ±π.
//!
//! Window sums are evaluated directly (no running sums), so results do not
//! depend on where a row starts; cropping the inputs crops the output wherever
//! the window and search range fit.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::imgcore::{ensure_same_dims, DisparityMap, ImageError, RgbImage, ValidityMask};
use crate::ppn::PpnResult;

#[derive(Debug, Error)]
pub enum MatchError {
    #[error("invalid match parameters: {0}")]
    Params(String),
    #[error("images are in different modes ({0:?} vs {1:?})")]
    ModeMismatch(MatchMode, MatchMode),
    #[error(transparent)]
    Image(#[from] ImageError),
}

pub type Result<T> = std::result::Result<T, MatchError>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchMode {
    Rgb,
    Phase,
}

impl std::str::FromStr for MatchMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "rgb" => Ok(MatchMode::Rgb),
            "phase" | "ppn" => Ok(MatchMode::Phase),
            _ => Err(format!("unknown match mode {s:?}")),
        }
    }
}

impl std::fmt::Display for MatchMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            MatchMode::Rgb => "rgb",
            MatchMode::Phase => "phase",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MatchParams {
    pub d_min: usize,
    pub d_max: usize,
    /// Window radius; the window is `(2r+1)²`.
    pub window: usize,
    pub mode: MatchMode,
    /// Left-right tolerance in pixels; infinite disables the check. JSON
    /// accepts a number or `"inf"`.
    #[serde(with = "maybe_inf")]
    pub lr_threshold: f64,
    pub subpixel: bool,
}

impl Default for MatchParams {
    fn default() -> Self {
        Self {
            d_min: 0,
            d_max: 64,
            window: 5,
            mode: MatchMode::Phase,
            lr_threshold: 1.0,
            subpixel: true,
        }
    }
}

impl MatchParams {
    pub fn validate(&self, width: usize) -> Result<()> {
        if self.d_min >= self.d_max {
            return Err(MatchError::Params(format!(
                "d_min {} must be below d_max {}",
                self.d_min, self.d_max
            )));
        }
        if self.d_max >= width {
            return Err(MatchError::Params(format!(
                "d_max {} must be below the image width {width}",
                self.d_max
            )));
        }
        if !(1..=15).contains(&self.window) {
            return Err(MatchError::Params(format!(
                "window radius {} outside [1, 15]",
                self.window
            )));
        }
        if self.lr_threshold.is_nan() || self.lr_threshold < 0.0 {
            return Err(MatchError::Params("lr_threshold must be >= 0".into()));
        }
        Ok(())
    }
}

mod maybe_inf {
    use serde::{de, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if *v == f64::INFINITY {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(*v)
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Text(t) if matches!(t.as_str(), "inf" | "infinity") => Ok(f64::INFINITY),
            Repr::Text(t) => Err(de::Error::custom(format!("expected a number or \"inf\", got {t:?}"))),
        }
    }
}

/// Planar feature image fed to the matcher.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureImage {
    width: usize,
    height: usize,
    mode: MatchMode,
    planes: Vec<Vec<f64>>,
    /// Pixels that carry no signal; they never receive a disparity.
    valid: Option<ValidityMask>,
}

impl FeatureImage {
    pub fn from_rgb(img: &RgbImage) -> Self {
        Self {
            width: img.width(),
            height: img.height(),
            mode: MatchMode::Rgb,
            planes: vec![
                img.r().data().to_vec(),
                img.g().data().to_vec(),
                img.b().data().to_vec(),
            ],
            valid: None,
        }
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn mode(&self) -> MatchMode {
        self.mode
    }

    pub fn planes(&self) -> &[Vec<f64>] {
        &self.planes
    }

    pub fn valid(&self) -> Option<&ValidityMask> {
        self.valid.as_ref()
    }

    pub fn crop(&self, x0: usize, y0: usize, w: usize, h: usize) -> Result<Self> {
        if x0 + w > self.width || y0 + h > self.height {
            return Err(ImageError::DimensionMismatch {
                expected: self.dims(),
                found: (x0 + w, y0 + h),
            }
            .into());
        }
        let planes = self
            .planes
            .iter()
            .map(|p| {
                (0..h)
                    .flat_map(|y| {
                        p[(y0 + y) * self.width + x0..(y0 + y) * self.width + x0 + w]
                            .iter()
                            .copied()
                    })
                    .collect()
            })
            .collect();
        Ok(Self {
            width: w,
            height: h,
            mode: self.mode,
            planes,
            valid: self.valid.as_ref().map(|m| m.crop(x0, y0, w, h)).transpose()?,
        })
    }
}

/// `(cos φ, sin φ)` per pixel, `(0, 0)` where the decode is invalid.
pub fn embed_phase(p: &PpnResult) -> FeatureImage {
    let (w, h) = p.dims();
    let mut c = Vec::with_capacity(w * h);
    let mut s = Vec::with_capacity(w * h);
    for (&phi, &ok) in p.phase.data().iter().zip(p.valid.data()) {
        if ok {
            c.push(phi.cos());
            s.push(phi.sin());
        } else {
            c.push(0.0);
            s.push(0.0);
        }
    }
    FeatureImage {
        width: w,
        height: h,
        mode: MatchMode::Phase,
        planes: vec![c, s],
        valid: Some(p.valid.clone()),
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Reference {
    /// Left image is the reference, candidates at `x − d` in the right image.
    Left,
    /// Right image is the reference, candidates at `x + d` in the left image.
    Right,
}

fn check_pair(left: &FeatureImage, right: &FeatureImage, params: &MatchParams) -> Result<()> {
    if left.mode != right.mode {
        return Err(MatchError::ModeMismatch(left.mode, right.mode));
    }
    ensure_same_dims(left.dims(), right.dims())?;
    params.validate(left.width)
}

fn match_one_way(
    reference: &FeatureImage,
    target: &FeatureImage,
    params: &MatchParams,
    side: Reference,
) -> DisparityMap {
    let (w, h) = reference.dims();
    let r = params.window;
    let n_d = params.d_max - params.d_min + 1;
    let rows: Vec<Vec<f32>> = (0..h)
        .into_par_iter()
        .map(|y| {
            let mut out = vec![f32::NAN; w];
            if y < r || y + r >= h || w < 2 * r + 1 {
                return out;
            }
            // costs[k * w + x] for disparity d_min + k
            let mut costs = vec![f64::INFINITY; n_d * w];
            let mut col = vec![0.0f64; w];
            for k in 0..n_d {
                let d = params.d_min + k;
                // Columns of the reference whose candidate column exists.
                let (lo, hi) = match side {
                    Reference::Left => (d, w),
                    Reference::Right => (0, w.saturating_sub(d)),
                };
                if lo >= hi {
                    continue;
                }
                for x in lo..hi {
                    let xt = match side {
                        Reference::Left => x - d,
                        Reference::Right => x + d,
                    };
                    let mut acc = 0.0;
                    for yy in y - r..=y + r {
                        let row = yy * w;
                        for (pr, pt) in reference.planes.iter().zip(&target.planes) {
                            let diff = pr[row + x] - pt[row + xt];
                            acc += diff * diff;
                        }
                    }
                    col[x] = acc;
                }
                let row_costs = &mut costs[k * w..(k + 1) * w];
                for x in lo + r..hi.saturating_sub(r) {
                    row_costs[x] = col[x - r..=x + r].iter().sum();
                }
            }
            for x in r..w - r {
                if let Some(mask) = &reference.valid {
                    if !mask.get(x, y) {
                        continue;
                    }
                }
                let mut best = None::<(usize, f64)>;
                for k in 0..n_d {
                    let c = costs[k * w + x];
                    if c.is_finite() && best.is_none_or(|(_, bc)| c < bc) {
                        best = Some((k, c));
                    }
                }
                let Some((k, c0)) = best else { continue };
                let mut disp = (params.d_min + k) as f64;
                if params.subpixel && k > 0 && k + 1 < n_d {
                    let cm = costs[(k - 1) * w + x];
                    let cp = costs[(k + 1) * w + x];
                    let denom = cm - 2.0 * c0 + cp;
                    if cm.is_finite() && cp.is_finite() && denom > 0.0 {
                        disp += ((cm - cp) / (2.0 * denom)).clamp(-0.5, 0.5);
                    }
                }
                out[x] = disp.max(0.0) as f32;
            }
            out
        })
        .collect();
    DisparityMap::new(w, h, rows.concat()).expect("matcher emits non-negative disparities")
}

/// Left-view disparity by SSD + winner-take-all (+ parabola when enabled).
/// Pixels without a full window or any admissible candidate are NaN.
pub fn match_disparity(left: &FeatureImage, right: &FeatureImage, params: &MatchParams) -> Result<DisparityMap> {
    check_pair(left, right, params)?;
    Ok(match_one_way(left, right, params, Reference::Left))
}

/// Right-view disparity (candidates at `x + d` in the left image).
pub fn match_disparity_right(left: &FeatureImage, right: &FeatureImage, params: &MatchParams) -> Result<DisparityMap> {
    check_pair(left, right, params)?;
    Ok(match_one_way(right, left, params, Reference::Right))
}

/// Invalidates left pixels whose right-view counterpart disagrees by more
/// than `lr_threshold` or falls outside the image.
pub fn lr_check(d_left: &DisparityMap, d_right: &DisparityMap, lr_threshold: f64) -> Result<DisparityMap> {
    ensure_same_dims(d_left.dims(), d_right.dims())?;
    if lr_threshold == f64::INFINITY {
        return Ok(d_left.clone());
    }
    let (w, h) = d_left.dims();
    Ok(DisparityMap::from_fn(w, h, |x, y| {
        let d = d_left.get(x, y);
        if d.is_nan() {
            return d;
        }
        let xr = x as i64 - d.round() as i64;
        if xr < 0 || xr >= w as i64 {
            return f32::NAN;
        }
        let dr = d_right.get(xr as usize, y);
        if dr.is_nan() || (f64::from(d) - f64::from(dr)).abs() > lr_threshold {
            f32::NAN
        } else {
            d
        }
    })?)
}

/// Full matcher: left map, then the left-right check unless disabled.
pub fn match_stereo(left: &FeatureImage, right: &FeatureImage, params: &MatchParams) -> Result<DisparityMap> {
    let d_left = match_disparity(left, right, params)?;
    if params.lr_threshold == f64::INFINITY {
        return Ok(d_left);
    }
    let d_right = match_disparity_right(left, right, params)?;
    lr_check(&d_left, &d_right, params.lr_threshold)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pattern::{gen_speckle_pattern, PatternParams, PhaseField};
    use crate::ppn::decode;
    use std::f64::consts::PI;

    fn speckle(w: usize, h: usize) -> RgbImage {
        gen_speckle_pattern(&PatternParams::default())
            .unwrap()
            .crop(0, 0, w, h)
            .unwrap()
    }

    /// Right image such that right(x) = left(x + shift) for integer shifts.
    fn shifted_pair(w: usize, h: usize, shift: usize) -> (FeatureImage, FeatureImage) {
        let big = speckle(w + shift, h);
        let left = big.crop(0, 0, w, h).unwrap();
        let right = RgbImage::from_fn(w, h, |x, y| big.pixel(x + shift, y)).unwrap();
        // right(x) = big(x + shift) = left(x + shift) ⇒ left pixel x matches right x − shift.
        (FeatureImage::from_rgb(&left), FeatureImage::from_rgb(&right))
    }

    #[test]
    fn embed_examples() {
        let p = PpnResult {
            phase: PhaseField::new(3, 1, vec![0.0, PI, PI - 1e-6]).unwrap(),
            modulation: crate::imgcore::GrayImage::filled(3, 1, 1.0).unwrap(),
            valid: ValidityMask::new(3, 1, vec![true, true, false]).unwrap(),
        };
        let e = embed_phase(&p);
        assert_eq!((e.planes[0][0], e.planes[1][0]), (1.0, 0.0));
        assert!((e.planes[0][1] + 1.0).abs() < 1e-15 && e.planes[1][1].abs() < 1e-15);
        assert_eq!((e.planes[0][2], e.planes[1][2]), (0.0, 0.0));
    }

    #[test]
    fn identical_images_give_zero() {
        let img = FeatureImage::from_rgb(&speckle(96, 32));
        let params = MatchParams {
            d_max: 20,
            ..Default::default()
        };
        let d = match_disparity(&img, &img, &params).unwrap();
        for y in 5..27 {
            for x in 5..91 {
                assert_eq!(d.get(x, y), 0.0);
            }
        }
        assert!(d.get(2, 10).is_nan());
        assert!(d.get(10, 30).is_nan());
    }

    #[test]
    fn integer_shift_recovered_exactly() {
        let (l, r) = shifted_pair(160, 40, 12);
        let params = MatchParams {
            d_max: 64,
            subpixel: false,
            ..Default::default()
        };
        let d = match_disparity(&l, &r, &params).unwrap();
        let sub = match_disparity(
            &l,
            &r,
            &MatchParams {
                subpixel: true,
                ..params
            },
        )
        .unwrap();
        let mut n = 0;
        for y in 5..35 {
            for x in 12 + 5..155 {
                assert_eq!(d.get(x, y), 12.0, "({x},{y})");
                assert!((sub.get(x, y) - 12.0).abs() <= 0.5);
                n += 1;
            }
        }
        assert!(n > 4000);
    }

    #[test]
    fn phase_mode_integer_shift() {
        let big = speckle(200, 40);
        let left = big.crop(0, 0, 180, 40).unwrap();
        let right = RgbImage::from_fn(180, 40, |x, y| big.pixel(x + 7, y)).unwrap();
        let l = embed_phase(&decode(&left, 0.05).unwrap());
        let r = embed_phase(&decode(&right, 0.05).unwrap());
        let params = MatchParams {
            d_max: 30,
            subpixel: false,
            ..Default::default()
        };
        let d = match_stereo(&l, &r, &params).unwrap();
        for y in 5..35 {
            for x in 40..170 {
                assert_eq!(d.get(x, y), 7.0);
            }
        }
    }

    #[test]
    fn params_validation() {
        let img = FeatureImage::from_rgb(&speckle(32, 16));
        for p in [
            MatchParams {
                d_max: 32,
                ..Default::default()
            },
            MatchParams {
                d_min: 5,
                d_max: 5,
                ..Default::default()
            },
            MatchParams {
                d_max: 10,
                window: 0,
                ..Default::default()
            },
            MatchParams {
                d_max: 10,
                window: 16,
                ..Default::default()
            },
        ] {
            assert!(matches!(match_disparity(&img, &img, &p), Err(MatchError::Params(_))));
        }
    }

    #[test]
    fn params_json_round_trip() {
        let p = MatchParams {
            lr_threshold: f64::INFINITY,
            ..Default::default()
        };
        let text = serde_json::to_string(&p).unwrap();
        assert!(text.contains("\"lr_threshold\":\"inf\""));
        assert_eq!(serde_json::from_str::<MatchParams>(&text).unwrap(), p);
        let q: MatchParams = serde_json::from_str(
            r#"{"d_min":0,"d_max":32,"window":3,"mode":"rgb","lr_threshold":1.5,"subpixel":false}"#,
        )
        .unwrap();
        assert_eq!((q.lr_threshold, q.mode), (1.5, MatchMode::Rgb));
    }

    #[test]
    fn lr_check_cases() {
        let dl = DisparityMap::new(6, 1, vec![0.0, 1.0, 2.0, 2.0, 2.0, 5.0]).unwrap();
        let dr = DisparityMap::new(6, 1, vec![2.0, 2.0, 2.0, 2.0, 9.0, f32::NAN]).unwrap();
        assert_eq!(lr_check(&dl, &dr, f64::INFINITY).unwrap(), dl);
        let out = lr_check(&dl, &dr, 1.0).unwrap();
        // x=0 → xr=0 (2 vs 0 fails); x=1 → xr=0 (|1−2|=1 ok); x=2..4 → xr=0..2 ok; x=5 → xr=0 (|5−2| fails)
        let expect = [f32::NAN, 1.0, 2.0, 2.0, 2.0, f32::NAN];
        for (x, &b) in expect.iter().enumerate() {
            let a = out.get(x, 0);
            assert!(a == b || (a.is_nan() && b.is_nan()), "x={x}: {a}");
        }
    }
}

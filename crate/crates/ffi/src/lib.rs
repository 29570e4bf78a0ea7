//! C ABI over `phase_speckle`.
//!
//! Images, decode results and disparity maps are opaque handles created by
//! the library and released with the matching `ps_*_free`. Fallible calls
//! return a [`PsStatus`]; on failure [`ps_last_error_message`] describes the
//! error for the calling thread. Output handles are written only on success.
//!
//! Pixel buffers are row-major. RGB buffers are interleaved `R, G, B` doubles
//! on `[0, 1]`; disparity buffers are floats with NaN marking invalid pixels.
//! Every pointer argument must be valid for the documented length; `len`
//! arguments must equal the buffer size the call expects.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use phase_speckle::eval::{evaluate, EvalOptions};
use phase_speckle::imgcore::{read_pfm, read_png, write_pfm, write_png};
use phase_speckle::matcher::{embed_phase, match_stereo, FeatureImage, MatchMode, MatchParams};
use phase_speckle::pattern::{gen_speckle_pattern, PatternParams};
use phase_speckle::ppn::{decode, PpnResult, DEFAULT_MOD_THRESHOLD};
use phase_speckle::recon::depth;
use phase_speckle::simulator::{preset_scene_sized, render, RigSpec};
use phase_speckle::{DisparityMap, RgbImage};

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Image = 4,
    Pattern = 5,
    Ppn = 6,
    Simulator = 7,
    Matcher = 8,
    Eval = 9,
    Recon = 10,
    Panic = 11,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PsMatchMode {
    Rgb = 0,
    Phase = 1,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PsPatternParams {
    pub a: f64,
    pub b: f64,
    pub period: f64,
    pub lo_width: usize,
    pub lo_height: usize,
    pub upsample: usize,
    pub seed: u64,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PsMatchParams {
    pub d_min: usize,
    pub d_max: usize,
    /// Window radius; the window is `(2·window + 1)²`.
    pub window: usize,
    pub mode: PsMatchMode,
    /// Left-right tolerance in pixels; infinity disables the check.
    pub lr_threshold: f64,
    pub subpixel: bool,
    /// Modulation threshold of the phase decode (phase mode only).
    pub ppn_threshold: f64,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct PsEvalSummary {
    pub epe: f64,
    /// Fraction in `[0, 1]`.
    pub d1: f64,
    pub n_evaluated: u64,
    pub n_missing: u64,
}

pub struct PsRgbImage(RgbImage);

pub struct PsPpn(PpnResult);

pub struct PsDisparity(DisparityMap);

impl From<PsPatternParams> for PatternParams {
    fn from(p: PsPatternParams) -> Self {
        Self {
            a: p.a,
            b: p.b,
            period: p.period,
            lo_width: p.lo_width,
            lo_height: p.lo_height,
            upsample: p.upsample,
            seed: p.seed,
        }
    }
}

impl From<PatternParams> for PsPatternParams {
    fn from(p: PatternParams) -> Self {
        Self {
            a: p.a,
            b: p.b,
            period: p.period,
            lo_width: p.lo_width,
            lo_height: p.lo_height,
            upsample: p.upsample,
            seed: p.seed,
        }
    }
}

struct Failure(PsStatus, String);

fn lib_failure(e: impl Into<phase_speckle::Error>) -> Failure {
    let e = e.into();
    let code = e.code();
    let status = match code.split('.').next().unwrap_or("") {
        _ if code == "imgcore.io" => PsStatus::Io,
        "imgcore" => PsStatus::Image,
        "pattern" => PsStatus::Pattern,
        "ppn" => PsStatus::Ppn,
        "simulator" | "graycode" => PsStatus::Simulator,
        "matcher" => PsStatus::Matcher,
        "eval" => PsStatus::Eval,
        "recon" => PsStatus::Recon,
        _ => PsStatus::InvalidArgument,
    };
    Failure(status, format!("{code}: {e}"))
}

fn invalid(msg: impl Into<String>) -> Failure {
    Failure(PsStatus::InvalidArgument, msg.into())
}

type Res<T> = Result<T, Failure>;

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: Option<String>) {
    let c = msg.map(|m| CString::new(m.replace('\0', " ")).expect("NULs removed"));
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn guard(f: impl FnOnce() -> Res<()>) -> PsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_last_error(None);
            PsStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_last_error(Some(msg));
            status
        }
        Err(_) => {
            set_last_error(Some("internal panic".into()));
            PsStatus::Panic
        }
    }
}

fn null(what: &str) -> Failure {
    Failure(PsStatus::NullPointer, format!("{what} is null"))
}

unsafe fn get<'a, T>(p: *const T, what: &str) -> Res<&'a T> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn put<T>(out: *mut T, value: T, what: &str) -> Res<()> {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(value);
    Ok(())
}

unsafe fn put_handle<T>(out: *mut *mut T, value: T, what: &str) -> Res<()> {
    put(out, Box::into_raw(Box::new(value)), what)
}

unsafe fn input<'a, T>(p: *const T, len: usize, what: &str) -> Res<&'a [T]> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn output<'a, T>(p: *mut T, len: usize, expected: usize, what: &str) -> Res<&'a mut [T]> {
    if len != expected {
        return Err(invalid(format!("{what}: buffer holds {len} values, need {expected}")));
    }
    if expected == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts_mut(p, len))
}

unsafe fn c_str<'a>(p: *const c_char, what: &str) -> Res<&'a str> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| invalid(format!("{what} is not valid UTF-8")))
}

fn pixel_count(width: usize, height: usize) -> Res<usize> {
    width
        .checked_mul(height)
        .ok_or_else(|| invalid(format!("{width}x{height} overflows")))
}

/// Message for the last failed call on this thread, or null after a
/// successful call. Valid until the next `ps_*` call on the same thread.
#[no_mangle]
pub extern "C" fn ps_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(std::ptr::null(), |c| c.as_ptr()))
}

/// Library version, a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ps_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

#[no_mangle]
pub unsafe extern "C" fn ps_pattern_params_default(out: *mut PsPatternParams) -> PsStatus {
    guard(|| put(out, PatternParams::default().into(), "out"))
}

#[no_mangle]
pub unsafe extern "C" fn ps_pattern_generate(params: *const PsPatternParams, out: *mut *mut PsRgbImage) -> PsStatus {
    guard(|| {
        let params = get(params, "params")?;
        let img = gen_speckle_pattern(&(*params).into()).map_err(lib_failure)?;
        put_handle(out, PsRgbImage(img), "out")
    })
}

/// Image from `3·width·height` interleaved values.
#[no_mangle]
pub unsafe extern "C" fn ps_rgb_image_new(
    width: usize,
    height: usize,
    data: *const f64,
    out: *mut *mut PsRgbImage,
) -> PsStatus {
    guard(|| {
        let n = pixel_count(width, height)?;
        let data = input(data, n * 3, "data")?;
        let img = RgbImage::from_fn(width, height, |x, y| {
            let i = 3 * (y * width + x);
            [data[i], data[i + 1], data[i + 2]]
        })
        .map_err(lib_failure)?;
        put_handle(out, PsRgbImage(img), "out")
    })
}

#[no_mangle]
pub unsafe extern "C" fn ps_rgb_image_read_png(path: *const c_char, out: *mut *mut PsRgbImage) -> PsStatus {
    guard(|| {
        let img = read_png(c_str(path, "path")?).map_err(lib_failure)?;
        put_handle(out, PsRgbImage(img), "out")
    })
}

/// Writes an 8-bit RGB PNG.
#[no_mangle]
pub unsafe extern "C" fn ps_rgb_image_write_png(img: *const PsRgbImage, path: *const c_char) -> PsStatus {
    guard(|| write_png(&get(img, "img")?.0, c_str(path, "path")?).map_err(lib_failure))
}

/// Width in pixels; 0 for a null handle.
#[no_mangle]
pub unsafe extern "C" fn ps_rgb_image_width(img: *const PsRgbImage) -> usize {
    img.as_ref().map_or(0, |i| i.0.width())
}

/// Height in pixels; 0 for a null handle.
#[no_mangle]
pub unsafe extern "C" fn ps_rgb_image_height(img: *const PsRgbImage) -> usize {
    img.as_ref().map_or(0, |i| i.0.height())
}

/// Copies the pixels into `out` (`len` = 3·width·height, interleaved).
#[no_mangle]
pub unsafe extern "C" fn ps_rgb_image_copy(img: *const PsRgbImage, out: *mut f64, len: usize) -> PsStatus {
    guard(|| {
        let img = &get(img, "img")?.0;
        let (w, h) = img.dims();
        let out = output(out, len, 3 * w * h, "out")?;
        for y in 0..h {
            for x in 0..w {
                let i = 3 * (y * w + x);
                out[i..i + 3].copy_from_slice(&img.pixel(x, y));
            }
        }
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn ps_rgb_image_free(img: *mut PsRgbImage) {
    if !img.is_null() {
        drop(Box::from_raw(img));
    }
}

/// Decodes wrapped phase and modulation; pixels with modulation at or
/// below `mod_threshold` are marked invalid.
#[no_mangle]
pub unsafe extern "C" fn ps_ppn_decode(img: *const PsRgbImage, mod_threshold: f64, out: *mut *mut PsPpn) -> PsStatus {
    guard(|| {
        let r = decode(&get(img, "img")?.0, mod_threshold).map_err(lib_failure)?;
        put_handle(out, PsPpn(r), "out")
    })
}

#[no_mangle]
pub unsafe extern "C" fn ps_ppn_width(ppn: *const PsPpn) -> usize {
    ppn.as_ref().map_or(0, |p| p.0.dims().0)
}

#[no_mangle]
pub unsafe extern "C" fn ps_ppn_height(ppn: *const PsPpn) -> usize {
    ppn.as_ref().map_or(0, |p| p.0.dims().1)
}

/// Wrapped phase in `(−π, π]` for every pixel, valid or not.
#[no_mangle]
pub unsafe extern "C" fn ps_ppn_copy_phase(ppn: *const PsPpn, out: *mut f64, len: usize) -> PsStatus {
    guard(|| {
        let p = &get(ppn, "ppn")?.0;
        output(out, len, p.phase.len(), "out")?.copy_from_slice(p.phase.data());
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn ps_ppn_copy_modulation(ppn: *const PsPpn, out: *mut f64, len: usize) -> PsStatus {
    guard(|| {
        let p = &get(ppn, "ppn")?.0;
        output(out, len, p.modulation.data().len(), "out")?.copy_from_slice(p.modulation.data());
        Ok(())
    })
}

/// 1 for valid pixels, 0 otherwise.
#[no_mangle]
pub unsafe extern "C" fn ps_ppn_copy_valid(ppn: *const PsPpn, out: *mut u8, len: usize) -> PsStatus {
    guard(|| {
        let p = &get(ppn, "ppn")?.0;
        let out = output(out, len, p.valid.data().len(), "out")?;
        for (o, &v) in out.iter_mut().zip(p.valid.data()) {
            *o = u8::from(v);
        }
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn ps_ppn_free(ppn: *mut PsPpn) {
    if !ppn.is_null() {
        drop(Box::from_raw(ppn));
    }
}

/// Renders a named scene (`flat`, `steps`, `ramp`, `boxes`, `lowalbedo`)
/// at `width`×`height` with the default rig, lit by `pattern`. Any of the
/// three outputs may be null to skip it.
#[no_mangle]
pub unsafe extern "C" fn ps_render_preset(
    name: *const c_char,
    width: usize,
    height: usize,
    pattern: *const PsRgbImage,
    left: *mut *mut PsRgbImage,
    right: *mut *mut PsRgbImage,
    gt_disparity: *mut *mut PsDisparity,
) -> PsStatus {
    guard(|| {
        let scene = preset_scene_sized(c_str(name, "name")?, width, height).map_err(lib_failure)?;
        let rig = RigSpec {
            width,
            height,
            ..RigSpec::default()
        };
        let r = render(&scene, &rig, &get(pattern, "pattern")?.0).map_err(lib_failure)?;
        if !left.is_null() {
            put_handle(left, PsRgbImage(r.left), "left")?;
        }
        if !right.is_null() {
            put_handle(right, PsRgbImage(r.right), "right")?;
        }
        if !gt_disparity.is_null() {
            put_handle(gt_disparity, PsDisparity(r.gt_disparity), "gt_disparity")?;
        }
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn ps_match_params_default(out: *mut PsMatchParams) -> PsStatus {
    let d = MatchParams::default();
    guard(|| {
        put(
            out,
            PsMatchParams {
                d_min: d.d_min,
                d_max: d.d_max,
                window: d.window,
                mode: PsMatchMode::Phase,
                lr_threshold: d.lr_threshold,
                subpixel: d.subpixel,
                ppn_threshold: DEFAULT_MOD_THRESHOLD,
            },
            "out",
        )
    })
}

/// Left-view disparity of a rectified pair.
#[no_mangle]
pub unsafe extern "C" fn ps_match_stereo(
    left: *const PsRgbImage,
    right: *const PsRgbImage,
    params: *const PsMatchParams,
    out: *mut *mut PsDisparity,
) -> PsStatus {
    guard(|| {
        let p = *get(params, "params")?;
        let mode = match p.mode {
            PsMatchMode::Rgb => MatchMode::Rgb,
            PsMatchMode::Phase => MatchMode::Phase,
        };
        let features = |img: &RgbImage| -> Res<FeatureImage> {
            Ok(match mode {
                MatchMode::Rgb => FeatureImage::from_rgb(img),
                MatchMode::Phase => embed_phase(&decode(img, p.ppn_threshold).map_err(lib_failure)?),
            })
        };
        let l = features(&get(left, "left")?.0)?;
        let r = features(&get(right, "right")?.0)?;
        let params = MatchParams {
            d_min: p.d_min,
            d_max: p.d_max,
            window: p.window,
            mode,
            lr_threshold: p.lr_threshold,
            subpixel: p.subpixel,
        };
        let d = match_stereo(&l, &r, &params).map_err(lib_failure)?;
        put_handle(out, PsDisparity(d), "out")
    })
}

/// Map from `width·height` values; NaN marks invalid pixels.
#[no_mangle]
pub unsafe extern "C" fn ps_disparity_new(
    width: usize,
    height: usize,
    data: *const f32,
    out: *mut *mut PsDisparity,
) -> PsStatus {
    guard(|| {
        let n = pixel_count(width, height)?;
        let d = DisparityMap::new(width, height, input(data, n, "data")?.to_vec()).map_err(lib_failure)?;
        put_handle(out, PsDisparity(d), "out")
    })
}

#[no_mangle]
pub unsafe extern "C" fn ps_disparity_read_pfm(path: *const c_char, out: *mut *mut PsDisparity) -> PsStatus {
    guard(|| {
        let d = read_pfm(c_str(path, "path")?).map_err(lib_failure)?;
        put_handle(out, PsDisparity(d), "out")
    })
}

#[no_mangle]
pub unsafe extern "C" fn ps_disparity_write_pfm(map: *const PsDisparity, path: *const c_char) -> PsStatus {
    guard(|| write_pfm(&get(map, "map")?.0, c_str(path, "path")?).map_err(lib_failure))
}

#[no_mangle]
pub unsafe extern "C" fn ps_disparity_width(map: *const PsDisparity) -> usize {
    map.as_ref().map_or(0, |m| m.0.width())
}

#[no_mangle]
pub unsafe extern "C" fn ps_disparity_height(map: *const PsDisparity) -> usize {
    map.as_ref().map_or(0, |m| m.0.height())
}

#[no_mangle]
pub unsafe extern "C" fn ps_disparity_copy(map: *const PsDisparity, out: *mut f32, len: usize) -> PsStatus {
    guard(|| {
        let m = &get(map, "map")?.0;
        output(out, len, m.data().len(), "out")?.copy_from_slice(m.data());
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn ps_disparity_free(map: *mut PsDisparity) {
    if !map.is_null() {
        drop(Box::from_raw(map));
    }
}

/// EPE and D1 of `pred` against `gt` over pixels with a finite `gt`.
#[no_mangle]
pub unsafe extern "C" fn ps_evaluate(
    pred: *const PsDisparity,
    gt: *const PsDisparity,
    threshold: f64,
    penalize_missing: bool,
    out: *mut PsEvalSummary,
) -> PsStatus {
    guard(|| {
        let opts = EvalOptions {
            threshold,
            penalize_missing,
        };
        let s = evaluate(&get(pred, "pred")?.0, &get(gt, "gt")?.0, None, opts)
            .map_err(lib_failure)?
            .summary;
        put(
            out,
            PsEvalSummary {
                epe: s.epe,
                d1: s.d1,
                n_evaluated: s.n_evaluated as u64,
                n_missing: s.n_missing as u64,
            },
            "out",
        )
    })
}

/// `Z = focal·baseline / d`, in the unit of `baseline`.
#[no_mangle]
pub extern "C" fn ps_depth(focal: f64, baseline: f64, disparity: f64) -> f64 {
    depth(focal, baseline, disparity)
}

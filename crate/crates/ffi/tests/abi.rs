use std::ffi::{CStr, CString};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use phase_speckle_ffi::*;

fn last_error() -> String {
    let p = ps_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_str().unwrap().to_string()
}

fn pattern() -> *mut PsRgbImage {
    let mut params = unsafe { std::mem::zeroed() };
    let mut out = ptr::null_mut();
    unsafe {
        assert_eq!(ps_pattern_params_default(&mut params), PsStatus::Ok);
        assert_eq!(ps_pattern_generate(&params, &mut out), PsStatus::Ok);
    }
    out
}

#[test]
fn pattern_matches_library() {
    let img = pattern();
    unsafe {
        let (w, h) = (ps_rgb_image_width(img), ps_rgb_image_height(img));
        assert_eq!((w, h), (1280, 720));
        let mut buf = vec![0.0; 3 * w * h];
        assert_eq!(ps_rgb_image_copy(img, buf.as_mut_ptr(), buf.len()), PsStatus::Ok);
        let lib = phase_speckle::pattern::gen_speckle_pattern(&Default::default()).unwrap();
        assert_eq!(&buf[..3], &lib.pixel(0, 0));
        assert_eq!(&buf[3 * (w * 5 + 7)..3 * (w * 5 + 8)], &lib.pixel(7, 5));
        assert_eq!(ps_rgb_image_copy(img, buf.as_mut_ptr(), 3), PsStatus::InvalidArgument);
        assert!(last_error().contains("need"));
        ps_rgb_image_free(img);
    }
}

#[test]
fn errors_set_status_and_message() {
    unsafe {
        let mut out = ptr::null_mut();
        assert_eq!(ps_pattern_generate(ptr::null(), &mut out), PsStatus::NullPointer);
        assert!(out.is_null());
        assert!(last_error().contains("params"));

        let mut params = std::mem::zeroed();
        ps_pattern_params_default(&mut params);
        params.period = 2.0;
        assert_eq!(ps_pattern_generate(&params, &mut out), PsStatus::Pattern);
        assert!(last_error().starts_with("pattern."));

        let missing = CString::new("/nonexistent/x.png").unwrap();
        assert_eq!(ps_rgb_image_read_png(missing.as_ptr(), &mut out), PsStatus::Io);
        assert!(last_error().contains("/nonexistent/x.png"));

        assert_eq!(ps_pattern_params_default(&mut params), PsStatus::Ok);
        assert!(ps_last_error_message().is_null());
        assert_eq!(ps_rgb_image_width(ptr::null()), 0);
        ps_rgb_image_free(ptr::null_mut());
    }
}

#[test]
fn ppn_decode_matches_library() {
    let data = [0.05, 0.5, 0.05, 0.5, 0.5, 0.5];
    unsafe {
        let mut img = ptr::null_mut();
        assert_eq!(ps_rgb_image_new(2, 1, data.as_ptr(), &mut img), PsStatus::Ok);
        let mut ppn = ptr::null_mut();
        assert_eq!(ps_ppn_decode(img, 0.05, &mut ppn), PsStatus::Ok);
        assert_eq!((ps_ppn_width(ppn), ps_ppn_height(ppn)), (2, 1));
        let mut phase = [0.0; 2];
        let mut modulation = [0.0; 2];
        let mut valid = [9u8; 2];
        assert_eq!(ps_ppn_copy_phase(ppn, phase.as_mut_ptr(), 2), PsStatus::Ok);
        assert_eq!(ps_ppn_copy_modulation(ppn, modulation.as_mut_ptr(), 2), PsStatus::Ok);
        assert_eq!(ps_ppn_copy_valid(ppn, valid.as_mut_ptr(), 2), PsStatus::Ok);
        assert!((phase[0] - std::f64::consts::FRAC_PI_2).abs() < 1e-12);
        assert!((modulation[0] - 0.9).abs() < 1e-12);
        assert_eq!(valid, [1, 0]);
        assert_eq!(ps_ppn_decode(img, -1.0, &mut ppn), PsStatus::Ppn);
        ps_ppn_free(ppn);
        ps_rgb_image_free(img);
    }
}

#[test]
fn render_match_evaluate() {
    let pat = pattern();
    unsafe {
        let name = CString::new("steps").unwrap();
        let (mut left, mut right, mut gt) = (ptr::null_mut(), ptr::null_mut(), ptr::null_mut());
        assert_eq!(
            ps_render_preset(name.as_ptr(), 320, 240, pat, &mut left, &mut right, &mut gt),
            PsStatus::Ok
        );
        let mut params = std::mem::zeroed();
        ps_match_params_default(&mut params);
        let mut disp = ptr::null_mut();
        assert_eq!(ps_match_stereo(left, right, &params, &mut disp), PsStatus::Ok);
        assert_eq!((ps_disparity_width(disp), ps_disparity_height(disp)), (320, 240));
        let mut s = PsEvalSummary::default();
        assert_eq!(ps_evaluate(disp, gt, 3.0, false, &mut s), PsStatus::Ok);
        assert!(s.epe < 0.5 && s.n_evaluated > 0, "{s:?}");

        params.d_max = 400;
        let mut bad = ptr::null_mut();
        assert_eq!(ps_match_stereo(left, right, &params, &mut bad), PsStatus::Matcher);
        assert!(bad.is_null());

        let unknown = CString::new("moon").unwrap();
        assert_eq!(
            ps_render_preset(
                unknown.as_ptr(),
                320,
                240,
                pat,
                ptr::null_mut(),
                ptr::null_mut(),
                ptr::null_mut()
            ),
            PsStatus::Simulator
        );
        for p in [disp, gt] {
            ps_disparity_free(p);
        }
        ps_rgb_image_free(left);
        ps_rgb_image_free(right);
        ps_rgb_image_free(pat);
    }
}

#[test]
fn file_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let png = CString::new(dir.path().join("a.png").to_str().unwrap()).unwrap();
    let pfm = CString::new(dir.path().join("d.pfm").to_str().unwrap()).unwrap();
    unsafe {
        let data = [0.0, 1.0, 128.0 / 255.0];
        let mut img = ptr::null_mut();
        ps_rgb_image_new(1, 1, data.as_ptr(), &mut img);
        assert_eq!(ps_rgb_image_write_png(img, png.as_ptr()), PsStatus::Ok);
        let mut back = ptr::null_mut();
        assert_eq!(ps_rgb_image_read_png(png.as_ptr(), &mut back), PsStatus::Ok);
        let mut buf = [0.0; 3];
        ps_rgb_image_copy(back, buf.as_mut_ptr(), 3);
        assert_eq!(buf, data);

        let values = [1.5f32, f32::NAN, 0.0, 64.0];
        let mut map = ptr::null_mut();
        assert_eq!(ps_disparity_new(2, 2, values.as_ptr(), &mut map), PsStatus::Ok);
        assert_eq!(ps_disparity_write_pfm(map, pfm.as_ptr()), PsStatus::Ok);
        let mut read = ptr::null_mut();
        assert_eq!(ps_disparity_read_pfm(pfm.as_ptr(), &mut read), PsStatus::Ok);
        let mut out = [0.0f32; 4];
        ps_disparity_copy(read, out.as_mut_ptr(), 4);
        let bits = |v: &[f32]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&out), bits(&values));

        let negative = [-1.0f32];
        let mut m = ptr::null_mut();
        assert_eq!(ps_disparity_new(1, 1, negative.as_ptr(), &mut m), PsStatus::Image);
        for p in [map, read] {
            ps_disparity_free(p);
        }
        ps_rgb_image_free(img);
        ps_rgb_image_free(back);
    }
}

#[test]
fn version_and_depth() {
    let v = unsafe { CStr::from_ptr(ps_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
    assert_eq!(ps_depth(1200.0, 165.0, 100.0), 1980.0);
}

fn manifest_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
}

/// Directory holding the static library built alongside this test binary.
fn static_lib_dir() -> Option<PathBuf> {
    let exe = std::env::current_exe().ok()?;
    let deps = exe.parent()?;
    let found = [deps.parent()?, deps]
        .into_iter()
        .find(|d| d.join("libphase_speckle_ffi.a").is_file())
        .map(Path::to_path_buf);
    found
}

#[test]
fn header_declares_every_export() {
    let header = std::fs::read_to_string(manifest_dir().join("include/phase_speckle.h")).unwrap();
    let src = std::fs::read_to_string(manifest_dir().join("src/lib.rs")).unwrap();
    let exports: Vec<&str> = src
        .lines()
        .filter_map(|l| l.split("extern \"C\" fn ").nth(1))
        .map(|rest| rest.split('(').next().unwrap())
        .collect();
    assert!(exports.len() > 20);
    for name in exports {
        assert!(header.contains(&format!("{name}(")), "{name} missing from header");
    }
}

#[test]
fn c_program_links_and_runs() {
    let Some(lib_dir) = static_lib_dir() else {
        eprintln!("static library not found next to the test binary; skipping");
        return;
    };
    let dir = tempfile::tempdir().unwrap();
    let exe = dir.path().join("smoke");
    let status = Command::new("cc")
        .args(["-std=c11", "-Wall", "-Wextra", "-Werror", "-I"])
        .arg(manifest_dir().join("include"))
        .arg(manifest_dir().join("tests/c/smoke.c"))
        .arg(lib_dir.join("libphase_speckle_ffi.a"))
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .status();
    let Ok(status) = status else {
        eprintln!("no C compiler; skipping");
        return;
    };
    assert!(status.success(), "C compile failed");
    let out = Command::new(&exe).output().unwrap();
    assert!(
        out.status.success(),
        "{}{}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("version "));
}

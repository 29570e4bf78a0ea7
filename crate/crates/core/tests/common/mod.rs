#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};

use std::process::{Command, Output};

use phase_speckle::cli::Manifest;

/// Runs the built binary with captured output.
pub fn run_bin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_phase-speckle"))
        .args(args)
        .output()
        .unwrap()
}

pub fn run(args: &[&str]) -> i32 {
    run_bin(args).status.code().unwrap_or(-1)
}

pub fn run_ok(args: &[&str]) {
    let o = run_bin(args);
    assert!(
        o.status.success(),
        "phase-speckle {}: {}",
        args.join(" "),
        String::from_utf8_lossy(&o.stderr)
    );
}

pub fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

pub fn manifest(dir: &Path) -> Manifest {
    serde_json::from_str(&fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

pub fn report_epe(dir: &Path) -> f64 {
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.join("report.json")).unwrap()).unwrap();
    v["epe"].as_f64().unwrap()
}

/// Runs every command on a 320×240 `scene` under `root`; returns the
/// output directories, each holding a `manifest.json`.
pub fn full_pipeline(root: &Path, scene: &str) -> Vec<PathBuf> {
    let d = |name: &str| root.join(name);
    fs::create_dir_all(root).unwrap();
    let rig = d("rig.json");
    fs::write(&rig, r#"{"width": 320, "height": 240}"#).unwrap();
    let perturb = d("perturb.json");
    fs::write(&perturb, r#"{"gains": [1.3, 0.8, 1.0], "offsets": [0.1, 0.1, 0.1]}"#).unwrap();
    let ablate = d("ablate.json");
    fs::write(
        &ablate,
        format!(
            r#"{{"scene": "{scene}", "rig": {{"width": 320, "height": 240}},
                "match": {{"rgb": {{"mode": "rgb", "d_max": 48}}, "phase": {{"d_max": 48}}}}}}"#
        ),
    )
    .unwrap();

    run_ok(&["gen-pattern", "--out", s(&d("pattern"))]);
    let pattern = d("pattern/pattern.png");
    run_ok(&[
        "simulate",
        "--scene",
        scene,
        "--rig",
        s(&rig),
        "--pattern",
        s(&pattern),
        "--out",
        s(&d("sim")),
    ]);
    run_ok(&[
        "simulate",
        "--scene",
        scene,
        "--rig",
        s(&rig),
        "--perturb",
        s(&perturb),
        "--index",
        "1",
        "--out",
        s(&d("sim")),
    ]);
    let sim = d("sim/scene_0000");
    let (left, right) = (sim.join("left.png"), sim.join("right.png"));
    run_ok(&["ppn", "--left", s(&left), "--right", s(&right), "--out", s(&d("ppn"))]);
    for mode in ["phase", "rgb"] {
        let m = d(&format!("match_{mode}"));
        run_ok(&[
            "match",
            "--left",
            s(&left),
            "--right",
            s(&right),
            "--mode",
            mode,
            "--d-max",
            "48",
            "--out",
            s(&m),
        ]);
        run_ok(&[
            "evaluate",
            "--pred",
            s(&m.join("disparity.pfm")),
            "--gt",
            s(&sim.join("disp_gt.pfm")),
            "--mask",
            s(&sim.join("occlusion.png")),
            "--no-penalize-missing",
            "--label",
            mode,
            "--out",
            s(&d(&format!("eval_{mode}"))),
        ]);
    }
    run_ok(&[
        "match",
        "--left",
        s(&d("ppn/left_phase.pfm")),
        "--right",
        s(&d("ppn/right_phase.pfm")),
        "--mode",
        "phase",
        "--d-max",
        "48",
        "--out",
        s(&d("match_pfm")),
    ]);
    run_ok(&[
        "compare",
        s(&d("eval_phase/report.json")),
        s(&d("eval_rgb/report.json")),
        "--out",
        s(&d("compare")),
    ]);
    run_ok(&[
        "reconstruct",
        "--disparity",
        s(&d("match_phase/disparity.pfm")),
        "--color",
        s(&left),
        "--rig",
        s(&rig),
        "--out",
        s(&d("recon")),
    ]);
    run_ok(&[
        "graycode",
        "gen",
        "--width",
        "64",
        "--height",
        "8",
        "--out",
        s(&d("gc_gen")),
    ]);
    run_ok(&[
        "graycode",
        "capture",
        "--scene",
        scene,
        "--rig",
        s(&rig),
        "--width",
        "640",
        "--height",
        "360",
        "--out",
        s(&d("gc")),
    ]);
    for view in ["left", "right"] {
        run_ok(&[
            "graycode",
            "decode",
            "--frames",
            s(&d(&format!("gc/{view}"))),
            "--out",
            s(&d(&format!("gc_{view}"))),
        ]);
    }
    run_ok(&[
        "graycode",
        "gt",
        "--left",
        s(&d("gc_left/coords.pfm")),
        "--right",
        s(&d("gc_right/coords.pfm")),
        "--out",
        s(&d("gc_gt")),
    ]);
    run_ok(&["ablate", "--config", s(&ablate), "--out", s(&d("ablate"))]);

    [
        "pattern",
        "sim/scene_0000",
        "sim/scene_0001",
        "ppn",
        "match_phase",
        "match_rgb",
        "eval_phase",
        "eval_rgb",
        "match_pfm",
        "compare",
        "recon",
        "gc_gen",
        "gc",
        "gc_left",
        "gc_right",
        "gc_gt",
        "ablate",
    ]
    .iter()
    .map(|n| d(n))
    .collect()
}

/// Every file under `dir` except manifests, as relative path → bytes.
pub fn artifacts(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(p) = stack.pop() {
        for e in fs::read_dir(&p).unwrap() {
            let path = e.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else if path.file_name().unwrap() != "manifest.json" {
                out.push((path.strip_prefix(dir).unwrap().to_path_buf(), fs::read(&path).unwrap()));
            }
        }
    }
    out.sort();
    out
}

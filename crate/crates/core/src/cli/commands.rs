use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::ablate::run_ablation;
use super::config::{load_json, ExperimentConfig, SceneChoice};
use super::manifest::OutDir;
use super::{CliError, Command, CommonArgs, Result};
use crate::colormap::{heatmap, phase_hue};
use crate::eval::{compare_runs, evaluate, EvalOptions, EvalSummary, DEFAULT_D1_THRESHOLD};
use crate::graycode::{
    bits_for_width, capture_stack, decode_stack, gen_stack, gt_from_stereo, CoordMap, DecodeOptions, GraycodeStack,
    Subpixel, DEFAULT_CONTRAST_THRESHOLD,
};
use crate::imgcore::{
    read_mask_png, read_pfm, read_pfm_raw, read_png, write_mask_png, write_pfm, write_pfm_raw, write_png, DisparityMap,
    GrayImage, RgbImage, ValidityMask,
};
use crate::matcher::{embed_phase, match_stereo, FeatureImage, MatchMode, MatchParams};
use crate::pattern::{gen_speckle_pattern, PatternParams, PhaseField};
use crate::ppn::{decode, PpnResult, DEFAULT_MOD_THRESHOLD};
use crate::recon::{triangulate, DEFAULT_MIN_DISP};
use crate::simulator::{perturb, render, PerturbParams, RigSpec};

#[derive(Debug, Args)]
pub struct GenPatternArgs {
    /// PatternParams JSON.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub a: Option<f64>,
    #[arg(long)]
    pub b: Option<f64>,
    #[arg(long)]
    pub period: Option<f64>,
    #[arg(long)]
    pub lo_width: Option<usize>,
    #[arg(long)]
    pub lo_height: Option<usize>,
    #[arg(long)]
    pub upsample: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Preset name (flat, steps, ramp, boxes, lowalbedo) or scene JSON path.
    #[arg(long, default_value = "steps")]
    pub scene: String,
    /// RigSpec JSON.
    #[arg(long)]
    pub rig: Option<PathBuf>,
    /// Pattern PNG; generated from --pattern-config or defaults when absent.
    #[arg(long, conflicts_with = "pattern_config")]
    pub pattern: Option<PathBuf>,
    #[arg(long)]
    pub pattern_config: Option<PathBuf>,
    /// PerturbParams JSON applied to the right view.
    #[arg(long)]
    pub perturb: Option<PathBuf>,
    /// Writes into `<out>/scene_NNNN`.
    #[arg(long, default_value_t = 0)]
    pub index: usize,
}

#[derive(Debug, Args)]
pub struct PpnArgs {
    #[arg(long)]
    pub left: PathBuf,
    #[arg(long)]
    pub right: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_MOD_THRESHOLD)]
    pub threshold: f64,
}

#[derive(Debug, Args)]
pub struct MatchArgs {
    /// Left capture PNG, or phase PFM from `ppn`.
    #[arg(long)]
    pub left: PathBuf,
    #[arg(long)]
    pub right: PathBuf,
    /// MatchParams JSON.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub mode: Option<MatchMode>,
    #[arg(long)]
    pub d_min: Option<usize>,
    #[arg(long)]
    pub d_max: Option<usize>,
    #[arg(long)]
    pub window: Option<usize>,
    /// Pixels; `inf` disables the left-right check.
    #[arg(long)]
    pub lr_threshold: Option<f64>,
    #[arg(long)]
    pub subpixel: Option<bool>,
    /// Modulation threshold when decoding PNG inputs in phase mode.
    #[arg(long, default_value_t = DEFAULT_MOD_THRESHOLD)]
    pub ppn_threshold: f64,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub pred: PathBuf,
    #[arg(long)]
    pub gt: PathBuf,
    /// Mask PNG; white pixels are evaluated.
    #[arg(long)]
    pub mask: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_D1_THRESHOLD)]
    pub threshold: f64,
    /// Ignore GT pixels without a prediction instead of counting them in D1.
    #[arg(long)]
    pub no_penalize_missing: bool,
    #[arg(long)]
    pub label: Option<String>,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    /// report.json files from `evaluate`.
    #[arg(required = true)]
    pub reports: Vec<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReconstructArgs {
    #[arg(long)]
    pub disparity: PathBuf,
    #[arg(long)]
    pub color: PathBuf,
    #[arg(long)]
    pub rig: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_MIN_DISP)]
    pub min_disp: f64,
}

#[derive(Debug, Args)]
pub struct AblateArgs {
    /// ExperimentConfig JSON.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum GraycodeCommand {
    /// Write the projector frames.
    Gen(GraycodeGenArgs),
    /// Render the frames through the simulator for both views.
    Capture(GraycodeCaptureArgs),
    /// Decode a directory of captured frames into projector columns.
    Decode(GraycodeDecodeArgs),
    /// Disparity from left and right projector-column maps.
    Gt(GraycodeGtArgs),
}

#[derive(Debug, Args)]
pub struct GraycodeGenArgs {
    #[arg(long, default_value_t = 1280)]
    pub width: usize,
    #[arg(long, default_value_t = 720)]
    pub height: usize,
    /// Defaults to the fewest bits covering the width.
    #[arg(long)]
    pub bits: Option<u32>,
}

#[derive(Debug, Args)]
pub struct GraycodeCaptureArgs {
    #[arg(long, default_value = "steps")]
    pub scene: String,
    #[arg(long)]
    pub rig: Option<PathBuf>,
    #[arg(long, default_value_t = 1280)]
    pub width: usize,
    #[arg(long, default_value_t = 720)]
    pub height: usize,
    #[arg(long)]
    pub bits: Option<u32>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum SubpixelArg {
    None,
    Run,
    Edge,
}

impl From<SubpixelArg> for Subpixel {
    fn from(s: SubpixelArg) -> Self {
        match s {
            SubpixelArg::None => Subpixel::None,
            SubpixelArg::Run => Subpixel::RunInterpolation,
            SubpixelArg::Edge => Subpixel::EdgeIntensity,
        }
    }
}

#[derive(Debug, Args)]
pub struct GraycodeDecodeArgs {
    /// Directory of `frame_NNN.png` in stack order.
    #[arg(long)]
    pub frames: PathBuf,
    #[arg(long, default_value_t = DEFAULT_CONTRAST_THRESHOLD)]
    pub contrast_threshold: f64,
    #[arg(long, value_enum, default_value = "edge")]
    pub subpixel: SubpixelArg,
}

#[derive(Debug, Args)]
pub struct GraycodeGtArgs {
    /// Left projector-column PFM from `graycode decode`.
    #[arg(long)]
    pub left: PathBuf,
    #[arg(long)]
    pub right: PathBuf,
}

pub(crate) fn dispatch(common: &CommonArgs, command: &Command) -> Result<()> {
    let out = common.out.clone().unwrap_or_else(|| PathBuf::from("out"));
    match command {
        Command::GenPattern(a) => cmd_gen_pattern(a, &out, common.seed),
        Command::Simulate(a) => cmd_simulate(a, &out, common.seed),
        Command::Ppn(a) => cmd_ppn(a, &out, common.seed),
        Command::Graycode(GraycodeCommand::Gen(a)) => cmd_graycode_gen(a, &out, common.seed),
        Command::Graycode(GraycodeCommand::Capture(a)) => cmd_graycode_capture(a, &out, common.seed),
        Command::Graycode(GraycodeCommand::Decode(a)) => cmd_graycode_decode(a, &out, common.seed),
        Command::Graycode(GraycodeCommand::Gt(a)) => cmd_graycode_gt(a, &out, common.seed),
        Command::Match(a) => cmd_match(a, &out, common.seed),
        Command::Evaluate(a) => cmd_evaluate(a, &out, common.seed),
        Command::Compare(a) => cmd_compare(a, &out, common.seed),
        Command::Reconstruct(a) => cmd_reconstruct(a, &out, common.seed),
        Command::Ablate(a) => cmd_ablate(a, common),
    }
}

fn to_value<T: Serialize>(v: &T) -> serde_json::Value {
    serde_json::to_value(v).expect("parameter types serialize to JSON")
}

fn is_pfm(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("pfm"))
}

fn load_rig(path: Option<&PathBuf>, out: &mut OutDir) -> Result<RigSpec> {
    match path {
        Some(p) => {
            out.input(p)?;
            Ok(load_json(p)?)
        }
        None => Ok(RigSpec::default()),
    }
}

fn save_png(out: &mut OutDir, name: &str, img: &RgbImage) -> Result<()> {
    write_png(img, out.path(name)?)?;
    out.record(name)
}

fn save_mask(out: &mut OutDir, name: &str, mask: &ValidityMask) -> Result<()> {
    write_mask_png(mask, out.path(name)?)?;
    out.record(name)
}

fn save_disp(out: &mut OutDir, name: &str, map: &DisparityMap) -> Result<()> {
    write_pfm(map, out.path(name)?)?;
    out.record(name)
}

fn save_pfm_f64(out: &mut OutDir, name: &str, w: usize, h: usize, data: &[f64]) -> Result<()> {
    let v: Vec<f32> = data.iter().map(|&x| x as f32).collect();
    write_pfm_raw(out.path(name)?, w, h, &v)?;
    out.record(name)
}

fn cmd_gen_pattern(a: &GenPatternArgs, out_dir: &Path, seed: Option<u64>) -> Result<()> {
    let mut out = OutDir::create(out_dir)?;
    let mut params = match &a.config {
        Some(p) => {
            out.input(p)?;
            load_json::<PatternParams>(p)?
        }
        None => PatternParams::default(),
    };
    if let Some(v) = a.a {
        params.a = v;
    }
    if let Some(v) = a.b {
        params.b = v;
    }
    if let Some(v) = a.period {
        params.period = v;
    }
    if let Some(v) = a.lo_width {
        params.lo_width = v;
    }
    if let Some(v) = a.lo_height {
        params.lo_height = v;
    }
    if let Some(v) = a.upsample {
        params.upsample = v;
    }
    if let Some(s) = seed {
        params.seed = s;
    }
    let pattern = gen_speckle_pattern(&params)?;
    save_png(&mut out, "pattern.png", &pattern)?;
    out.write_json("pattern.json", &params)?;
    out.finish("gen-pattern", params.seed, to_value(&params))?;
    Ok(())
}

fn cmd_simulate(a: &SimulateArgs, out_dir: &Path, seed: Option<u64>) -> Result<()> {
    let mut out = OutDir::create(&out_dir.join(format!("scene_{:04}", a.index)))?;
    let rig = load_rig(a.rig.as_ref(), &mut out)?;
    let (mut scene, scene_file) = SceneChoice::Named(a.scene.clone()).resolve(rig.width, rig.height)?;
    if let Some(p) = &scene_file {
        out.input(p)?;
    }
    if let Some(s) = seed {
        scene.seed = s;
    }
    let (pattern, pattern_params) = match &a.pattern {
        Some(p) => {
            out.input(p)?;
            (read_png(p)?, None)
        }
        None => {
            let mut params = match &a.pattern_config {
                Some(p) => {
                    out.input(p)?;
                    load_json::<PatternParams>(p)?
                }
                None => PatternParams::default(),
            };
            if let Some(s) = seed {
                params.seed = s;
            }
            (gen_speckle_pattern(&params)?, Some(params))
        }
    };
    let perturbation = match &a.perturb {
        Some(p) => {
            out.input(p)?;
            let mut pp: PerturbParams = load_json(p)?;
            if let Some(s) = seed {
                pp.seed = s.wrapping_add(1);
            }
            Some(pp)
        }
        None => None,
    };
    let r = render(&scene, &rig, &pattern)?;
    let right = match &perturbation {
        Some(p) => perturb(&r.right, p)?,
        None => r.right.clone(),
    };
    save_png(&mut out, "left.png", &r.left)?;
    save_png(&mut out, "right.png", &right)?;
    save_disp(&mut out, "disp_gt.pfm", &r.gt_disparity)?;
    save_mask(&mut out, "occlusion.png", &r.occlusion)?;
    save_mask(&mut out, "lit.png", &r.lit)?;
    save_pfm_f64(&mut out, "proj_coord.pfm", rig.width, rig.height, r.proj_coord.data())?;
    out.write_json("scene.json", &scene)?;
    out.write_json("rig.json", &rig)?;
    let params = json!({
        "scene_arg": a.scene,
        "scene": scene,
        "rig": rig,
        "pattern": pattern_params,
        "perturb": perturbation,
        "kappa": rig.kappa(),
        "index": a.index,
    });
    out.finish("simulate", scene.seed, params)?;
    Ok(())
}

fn write_ppn(out: &mut OutDir, view: &str, p: &PpnResult) -> Result<()> {
    let (w, h) = p.dims();
    let phase: Vec<f64> = p
        .phase
        .data()
        .iter()
        .zip(p.valid.data())
        .map(|(&v, &ok)| if ok { v } else { f64::NAN })
        .collect();
    save_pfm_f64(out, &format!("{view}_phase.pfm"), w, h, &phase)?;
    save_pfm_f64(out, &format!("{view}_modulation.pfm"), w, h, p.modulation.data())?;
    save_mask(out, &format!("{view}_valid.png"), &p.valid)?;
    let vis = phase_hue(&p.phase, |x, y| p.valid.get(x, y));
    save_png(out, &format!("{view}_phase.png"), &vis)
}

fn cmd_ppn(a: &PpnArgs, out_dir: &Path, seed: Option<u64>) -> Result<()> {
    let mut out = OutDir::create(out_dir)?;
    let mut views = vec![("left", &a.left)];
    if let Some(r) = &a.right {
        views.push(("right", r));
    }
    let mut dims = None;
    for (view, path) in views {
        out.input(path)?;
        let img = read_png(path)?;
        if let Some(d) = dims {
            crate::imgcore::ensure_same_dims(d, img.dims())?;
        }
        dims = Some(img.dims());
        write_ppn(&mut out, view, &decode(&img, a.threshold)?)?;
    }
    out.finish("ppn", seed.unwrap_or(0), json!({ "threshold": a.threshold }))?;
    Ok(())
}

/// Phase PFM written by `ppn` (NaN = invalid) back into a decode result.
fn ppn_from_pfm(path: &Path) -> Result<PpnResult> {
    let (w, h, data) = read_pfm_raw(path)?;
    let valid: Vec<bool> = data.iter().map(|v| v.is_finite()).collect();
    let phase = data
        .iter()
        .map(|&v| if v.is_finite() { f64::from(v) } else { 0.0 })
        .collect();
    let modulation = valid.iter().map(|&ok| if ok { 1.0 } else { 0.0 }).collect();
    Ok(PpnResult {
        phase: PhaseField::new(w, h, phase)?,
        modulation: GrayImage::new(w, h, modulation)?,
        valid: ValidityMask::new(w, h, valid)?,
    })
}

fn load_features(path: &Path, mode: MatchMode, ppn_threshold: f64) -> Result<FeatureImage> {
    if is_pfm(path) {
        if mode != MatchMode::Phase {
            return Err(CliError::Usage(format!(
                "{}: phase PFM inputs need --mode phase",
                path.display()
            )));
        }
        return Ok(embed_phase(&ppn_from_pfm(path)?));
    }
    let img = read_png(path)?;
    Ok(match mode {
        MatchMode::Rgb => FeatureImage::from_rgb(&img),
        MatchMode::Phase => embed_phase(&decode(&img, ppn_threshold)?),
    })
}

fn cmd_match(a: &MatchArgs, out_dir: &Path, seed: Option<u64>) -> Result<()> {
    let mut out = OutDir::create(out_dir)?;
    let mut params = match &a.config {
        Some(p) => {
            out.input(p)?;
            load_json::<MatchParams>(p)?
        }
        None => MatchParams::default(),
    };
    if let Some(m) = a.mode {
        params.mode = m;
    }
    if let Some(v) = a.d_min {
        params.d_min = v;
    }
    if let Some(v) = a.d_max {
        params.d_max = v;
    }
    if let Some(v) = a.window {
        params.window = v;
    }
    if let Some(v) = a.lr_threshold {
        params.lr_threshold = v;
    }
    if let Some(v) = a.subpixel {
        params.subpixel = v;
    }
    out.input(&a.left)?;
    out.input(&a.right)?;
    let left = load_features(&a.left, params.mode, a.ppn_threshold)?;
    let right = load_features(&a.right, params.mode, a.ppn_threshold)?;
    let disp = match_stereo(&left, &right, &params)?;
    save_disp(&mut out, "disparity.pfm", &disp)?;
    save_png(&mut out, "disparity.png", &heatmap(&disp, params.d_max as f64))?;
    out.write_json("match.json", &params)?;
    let p = json!({ "match": params, "ppn_threshold": a.ppn_threshold });
    out.finish("match", seed.unwrap_or(0), p)?;
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabeledReport {
    pub label: String,
    #[serde(flatten)]
    pub summary: EvalSummary,
}

fn cmd_evaluate(a: &EvaluateArgs, out_dir: &Path, seed: Option<u64>) -> Result<()> {
    let mut out = OutDir::create(out_dir)?;
    out.input(&a.pred)?;
    out.input(&a.gt)?;
    let pred = read_pfm(&a.pred)?;
    let gt = read_pfm(&a.gt)?;
    let mask = match &a.mask {
        Some(p) => {
            out.input(p)?;
            Some(read_mask_png(p)?)
        }
        None => None,
    };
    let opts = EvalOptions {
        threshold: a.threshold,
        penalize_missing: !a.no_penalize_missing,
    };
    let report = evaluate(&pred, &gt, mask.as_ref(), opts)?;
    let label = a.label.clone().unwrap_or_else(|| {
        a.pred
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default()
    });
    let s = &report.summary;
    println!(
        "{label}: epe={:.6} d1={:.6} evaluated={} missing={}",
        s.epe, s.d1, s.n_evaluated, s.n_missing
    );
    out.write_json(
        "report.json",
        &LabeledReport {
            label,
            summary: report.summary.clone(),
        },
    )?;
    save_png(&mut out, "error.png", &heatmap(&report.error_map, a.threshold))?;
    out.finish("evaluate", seed.unwrap_or(0), to_value(&opts))?;
    Ok(())
}

fn cmd_compare(a: &CompareArgs, out_dir: &Path, seed: Option<u64>) -> Result<()> {
    let mut out = OutDir::create(out_dir)?;
    let mut rows = Vec::new();
    for p in &a.reports {
        out.input(p)?;
        let r: LabeledReport = load_json(p)?;
        rows.push((r.label, r.summary));
    }
    let table = compare_runs(&rows)?;
    let text = table.to_text();
    print!("{text}");
    out.write_text("comparison.csv", &table.to_csv()?)?;
    out.write_text("comparison.txt", &text)?;
    out.finish("compare", seed.unwrap_or(0), json!({ "reports": a.reports.len() }))?;
    Ok(())
}

fn cmd_reconstruct(a: &ReconstructArgs, out_dir: &Path, seed: Option<u64>) -> Result<()> {
    let mut out = OutDir::create(out_dir)?;
    let rig = load_rig(a.rig.as_ref(), &mut out)?;
    out.input(&a.disparity)?;
    out.input(&a.color)?;
    let disp = read_pfm(&a.disparity)?;
    let color = read_png(&a.color)?;
    let cloud = triangulate(&disp, &rig, &color, a.min_disp)?;
    cloud.write_ply(out.path("cloud.ply")?)?;
    out.record("cloud.ply")?;
    println!("{} points", cloud.points.len());
    let p = json!({ "rig": rig, "min_disp": a.min_disp, "points": cloud.points.len() });
    out.finish("reconstruct", seed.unwrap_or(0), p)?;
    Ok(())
}

fn frame_name(i: usize) -> String {
    format!("frame_{i:03}.png")
}

fn save_stack(out: &mut OutDir, dir: &str, stack: &GraycodeStack) -> Result<()> {
    for (i, f) in stack.frames().iter().enumerate() {
        let name = if dir.is_empty() {
            frame_name(i)
        } else {
            format!("{dir}/{}", frame_name(i))
        };
        save_png(out, &name, &RgbImage::from_gray(f))?;
    }
    Ok(())
}

fn cmd_graycode_gen(a: &GraycodeGenArgs, out_dir: &Path, seed: Option<u64>) -> Result<()> {
    let mut out = OutDir::create(out_dir)?;
    let bits = a.bits.unwrap_or_else(|| bits_for_width(a.width));
    let stack = gen_stack(a.width, a.height, bits)?;
    save_stack(&mut out, "", &stack)?;
    let p = json!({ "width": a.width, "height": a.height, "bits": bits });
    out.finish("graycode gen", seed.unwrap_or(0), p)?;
    Ok(())
}

fn cmd_graycode_capture(a: &GraycodeCaptureArgs, out_dir: &Path, seed: Option<u64>) -> Result<()> {
    let mut out = OutDir::create(out_dir)?;
    let rig = load_rig(a.rig.as_ref(), &mut out)?;
    let (mut scene, scene_file) = SceneChoice::Named(a.scene.clone()).resolve(rig.width, rig.height)?;
    if let Some(p) = &scene_file {
        out.input(p)?;
    }
    if let Some(s) = seed {
        scene.seed = s;
    }
    let bits = a.bits.unwrap_or_else(|| bits_for_width(a.width));
    let stack = gen_stack(a.width, a.height, bits)?;
    let (left, right) = capture_stack(&stack, &scene, &rig)?;
    save_stack(&mut out, "left", &left)?;
    save_stack(&mut out, "right", &right)?;
    let analytic = render(&scene, &rig, &RgbImage::from_gray(stack.white()))?;
    save_disp(&mut out, "disp_gt.pfm", &analytic.gt_disparity)?;
    save_mask(&mut out, "occlusion.png", &analytic.occlusion)?;
    let p = json!({ "scene": scene, "rig": rig, "width": a.width, "height": a.height, "bits": bits });
    out.finish("graycode capture", scene.seed, p)?;
    Ok(())
}

fn read_stack(dir: &Path) -> Result<(GraycodeStack, Vec<PathBuf>)> {
    let entries = fs::read_dir(dir).map_err(|source| CliError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let mut paths: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.starts_with("frame_") && n.ends_with(".png"))
        })
        .collect();
    paths.sort();
    if paths.len() < 4 || !paths.len().is_multiple_of(2) {
        return Err(CliError::Usage(format!(
            "{}: expected an even number (>= 4) of frame_NNN.png files, found {}",
            dir.display(),
            paths.len()
        )));
    }
    let frames = paths
        .iter()
        .map(|p| Ok(read_png(p)?.luminance()))
        .collect::<Result<Vec<_>>>()?;
    let bits = ((paths.len() - 2) / 2) as u32;
    Ok((GraycodeStack::new(bits, frames)?, paths))
}

fn cmd_graycode_decode(a: &GraycodeDecodeArgs, out_dir: &Path, seed: Option<u64>) -> Result<()> {
    let mut out = OutDir::create(out_dir)?;
    let (stack, paths) = read_stack(&a.frames)?;
    for p in &paths {
        out.input(p)?;
    }
    let opts = DecodeOptions {
        contrast_threshold: a.contrast_threshold,
        subpixel: a.subpixel.into(),
    };
    let coords = decode_stack(&stack, &opts)?;
    let (w, h) = coords.dims();
    write_pfm_raw(out.path("coords.pfm")?, w, h, &coords.to_f32())?;
    out.record("coords.pfm")?;
    save_mask(&mut out, "valid.png", coords.valid())?;
    let p = json!({ "bits": stack.n_bits(), "options": opts });
    out.finish("graycode decode", seed.unwrap_or(0), p)?;
    Ok(())
}

fn read_coords(path: &Path) -> Result<CoordMap> {
    let (w, h, data) = read_pfm_raw(path)?;
    Ok(CoordMap::from_coords(
        w,
        h,
        data.iter().map(|&v| f64::from(v)).collect(),
    )?)
}

fn cmd_graycode_gt(a: &GraycodeGtArgs, out_dir: &Path, seed: Option<u64>) -> Result<()> {
    let mut out = OutDir::create(out_dir)?;
    out.input(&a.left)?;
    out.input(&a.right)?;
    let gt = gt_from_stereo(&read_coords(&a.left)?, &read_coords(&a.right)?)?;
    save_disp(&mut out, "disp_gt.pfm", &gt)?;
    let max = gt
        .data()
        .iter()
        .copied()
        .filter(|v| v.is_finite())
        .fold(0.0f32, f32::max);
    save_png(&mut out, "disp_gt.png", &heatmap(&gt, f64::from(max)))?;
    out.finish("graycode gt", seed.unwrap_or(0), json!({}))?;
    Ok(())
}

fn cmd_ablate(a: &AblateArgs, common: &CommonArgs) -> Result<()> {
    let mut config = match &a.config {
        Some(p) => load_json::<ExperimentConfig>(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = common.seed {
        config.seed = s;
    }
    let out_dir = common
        .out
        .clone()
        .or_else(|| config.out_dir.clone())
        .unwrap_or_else(|| PathBuf::from("out"));
    let mut out = OutDir::create(&out_dir)?;
    if let Some(p) = &a.config {
        out.input(p)?;
    }
    let result = run_ablation(&config)?;
    if let Some(p) = &result.scene_file {
        out.input(p)?;
    }
    let r = &result.render;
    save_png(&mut out, "scene_0000/left.png", &r.left)?;
    save_png(&mut out, "scene_0000/right.png", &r.right)?;
    save_disp(&mut out, "scene_0000/disp_gt.pfm", &r.gt_disparity)?;
    save_mask(&mut out, "scene_0000/occlusion.png", &r.occlusion)?;
    for cell in &result.cells {
        let dir = format!("cells/{}", cell.label);
        save_disp(&mut out, &format!("{dir}/disparity.pfm"), &cell.disparity)?;
        save_png(
            &mut out,
            &format!("{dir}/error.png"),
            &heatmap(&cell.report.error_map, config.eval_threshold),
        )?;
        out.write_json(
            &format!("{dir}/report.json"),
            &LabeledReport {
                label: cell.label.clone(),
                summary: cell.report.summary.clone(),
            },
        )?;
    }
    let text = result.table.to_text();
    print!("{text}");
    out.write_text("ablation.csv", &result.table.to_csv()?)?;
    out.write_text("ablation.txt", &text)?;
    let mut resolved = config.clone();
    resolved.out_dir = None;
    out.write_json("config.json", &resolved)?;
    let p = json!({ "config": resolved, "scene": result.scene, "cells": result.cells.len() });
    out.finish("ablate", config.seed, p)?;
    Ok(())
}

use std::path::PathBuf;

use super::config::ExperimentConfig;
use super::Result;
use crate::eval::{compare_runs, evaluate, ComparisonTable, EvalOptions, EvalReport};
use crate::imgcore::{DisparityMap, RgbImage};
use crate::matcher::{embed_phase, match_stereo, FeatureImage, MatchMode, MatchParams};
use crate::pattern::gen_speckle_pattern;
use crate::ppn::decode;
use crate::simulator::{perturb, render, RenderOutput, SceneSpec};

#[derive(Clone, Debug)]
pub struct AblationCell {
    pub label: String,
    pub mode: MatchMode,
    /// Index into the configured perturbations; `None` for the clean capture.
    pub perturbation: Option<usize>,
    pub disparity: DisparityMap,
    pub report: EvalReport,
}

#[derive(Clone, Debug)]
pub struct AblationResult {
    pub scene: SceneSpec,
    pub scene_file: Option<PathBuf>,
    pub render: RenderOutput,
    pub cells: Vec<AblationCell>,
    pub table: ComparisonTable,
}

fn features(img: &RgbImage, mode: MatchMode, ppn_threshold: f64) -> Result<FeatureImage> {
    Ok(match mode {
        MatchMode::Rgb => FeatureImage::from_rgb(img),
        MatchMode::Phase => embed_phase(&decode(img, ppn_threshold)?),
    })
}

/// Renders the configured scene once, perturbs the right view per
/// configured perturbation, and matches every capture in both modes.
/// Cells are evaluated on pixels visible in both views.
pub fn run_ablation(config: &ExperimentConfig) -> Result<AblationResult> {
    let mut pattern_params = config.pattern.clone();
    pattern_params.seed = config.seed;
    let pattern = gen_speckle_pattern(&pattern_params)?;
    let (mut scene, scene_file) = config.scene.resolve(config.rig.width, config.rig.height)?;
    scene.seed = config.seed;
    let out = render(&scene, &config.rig, &pattern)?;

    let mut conditions = vec![("clean".to_string(), None, out.right.clone())];
    for (i, p) in config.perturbations.iter().enumerate() {
        let mut p = p.clone();
        p.seed = config.seed.wrapping_add(1 + i as u64);
        let name = if config.perturbations.len() == 1 {
            "perturbed".to_string()
        } else {
            format!("perturbed{i}")
        };
        conditions.push((name, Some(i), perturb(&out.right, &p)?));
    }

    let opts = EvalOptions {
        threshold: config.eval_threshold,
        penalize_missing: config.penalize_missing,
    };
    let mut cells = Vec::new();
    for (mode, params) in [
        (MatchMode::Phase, &config.match_params.phase),
        (MatchMode::Rgb, &config.match_params.rgb),
    ] {
        let params = MatchParams { mode, ..params.clone() };
        let left = features(&out.left, mode, config.ppn_threshold)?;
        for (name, perturbation, right) in &conditions {
            let right = features(right, mode, config.ppn_threshold)?;
            let disparity = match_stereo(&left, &right, &params)?;
            let report = evaluate(&disparity, &out.gt_disparity, Some(&out.occlusion), opts)?;
            cells.push(AblationCell {
                label: format!("{mode}-{name}"),
                mode,
                perturbation: *perturbation,
                disparity,
                report,
            });
        }
    }
    let table = compare_runs(
        &cells
            .iter()
            .map(|c| (c.label.clone(), c.report.summary.clone()))
            .collect::<Vec<_>>(),
    )?;
    Ok(AblationResult {
        scene,
        scene_file,
        render: out,
        cells,
        table,
    })
}

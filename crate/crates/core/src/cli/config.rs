use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::{CliError, Result};
use crate::eval::DEFAULT_D1_THRESHOLD;
use crate::matcher::{MatchMode, MatchParams};
use crate::pattern::PatternParams;
use crate::ppn::DEFAULT_MOD_THRESHOLD;
use crate::simulator::{preset_scene_sized, PerturbParams, RigSpec, SceneSpec, PRESET_NAMES};

pub fn load_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|e| CliError::Config {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })
}

/// A preset name, a path to a scene JSON file, or an inline scene.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SceneChoice {
    Named(String),
    Inline(SceneSpec),
}

impl Default for SceneChoice {
    fn default() -> Self {
        SceneChoice::Named("lowalbedo".into())
    }
}

impl SceneChoice {
    /// Resolves to a scene for a `width`×`height` rig, plus the scene file
    /// read (if any) so it can be hashed into the manifest.
    pub fn resolve(&self, width: usize, height: usize) -> Result<(SceneSpec, Option<PathBuf>)> {
        match self {
            SceneChoice::Inline(s) => Ok((s.clone(), None)),
            SceneChoice::Named(name) if PRESET_NAMES.contains(&name.as_str()) => {
                Ok((preset_scene_sized(name, width, height)?, None))
            }
            SceneChoice::Named(name) => {
                let path = PathBuf::from(name);
                if path.exists() {
                    Ok((load_json(&path)?, Some(path)))
                } else {
                    Err(crate::simulator::SimError::UnknownPreset(name.clone()).into())
                }
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MatchModes {
    pub rgb: MatchParams,
    pub phase: MatchParams,
}

impl Default for MatchModes {
    fn default() -> Self {
        Self {
            rgb: MatchParams {
                mode: MatchMode::Rgb,
                ..MatchParams::default()
            },
            phase: MatchParams::default(),
        }
    }
}

/// Configuration of the ablation grid. `seed` is the master seed: it
/// replaces the pattern seed and the scene noise seed, and perturbation `i`
/// uses `seed + 1 + i`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub pattern: PatternParams,
    pub scene: SceneChoice,
    pub rig: RigSpec,
    pub perturbations: Vec<PerturbParams>,
    #[serde(rename = "match")]
    pub match_params: MatchModes,
    pub ppn_threshold: f64,
    pub eval_threshold: f64,
    pub penalize_missing: bool,
    pub seed: u64,
    pub out_dir: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            pattern: PatternParams::default(),
            scene: SceneChoice::default(),
            rig: RigSpec::default(),
            perturbations: vec![PerturbParams {
                gains: [1.3, 0.8, 1.0],
                offsets: [0.1; 3],
                ..PerturbParams::default()
            }],
            match_params: MatchModes::default(),
            ppn_threshold: DEFAULT_MOD_THRESHOLD,
            eval_threshold: DEFAULT_D1_THRESHOLD,
            penalize_missing: false,
            seed: 0,
            out_dir: None,
        }
    }
}

use std::fs;
use std::path::{Path, PathBuf};

use poseforge::pose_model::{Canvas, ParseOptions, DEFAULT_SCORE_THRESHOLD};
use poseforge::render::RenderStyle;
use poseforge::retarget::RetargetConfig;
use serde::{Deserialize, Serialize};

use crate::Failure;

/// Everything a run depends on. Loaded from `--config`, then overridden by flags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CliConfig {
    pub retarget: RetargetConfig,
    pub style: RenderStyle,
    pub score_threshold: f64,
    /// Canvas for OpenPose frames that carry none.
    pub canvas: Option<Canvas>,
    pub paths: Paths,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Paths {
    pub template: Option<PathBuf>,
    pub reference_pose: Option<PathBuf>,
    pub reference_image: Option<PathBuf>,
    pub sequence: Option<PathBuf>,
    pub output: Option<PathBuf>,
    pub out: Option<PathBuf>,
}

impl Default for CliConfig {
    fn default() -> Self {
        CliConfig {
            retarget: RetargetConfig::default(),
            style: RenderStyle::default(),
            score_threshold: DEFAULT_SCORE_THRESHOLD,
            canvas: None,
            paths: Paths::default(),
        }
    }
}

impl CliConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, Failure> {
        let Some(path) = path else {
            return Ok(CliConfig::default());
        };
        let bytes =
            fs::read(path).map_err(|e| Failure::io(format!("reading {}: {e}", path.display())))?;
        let value: serde_json::Value = serde_json::from_slice(&bytes)
            .map_err(|e| Failure::input(format!("config {}: {e}", path.display())))?;
        // A run manifest embeds its config under "config".
        let value = match value.get("config") {
            Some(inner) if value.get("command").is_some() => inner.clone(),
            _ => value,
        };
        serde_json::from_value(value)
            .map_err(|e| Failure::input(format!("config {}: {e}", path.display())))
    }

    pub fn parse_options(&self, check_bounds: bool) -> ParseOptions {
        ParseOptions {
            score_threshold: self.score_threshold,
            canvas: self.canvas,
            check_bounds,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<(), Failure> {
        self.retarget.validate().map_err(Failure::from)?;
        self.style
            .validate(&self.retarget.topology)
            .map_err(Failure::from)?;
        if !(self.score_threshold.is_finite() && (0.0..1.0).contains(&self.score_threshold)) {
            return Err(Failure::input(format!(
                "score threshold must be in [0, 1), got {}",
                self.score_threshold
            )));
        }
        Ok(())
    }
}

pub fn require(path: &Option<PathBuf>, flag: &str) -> Result<PathBuf, Failure> {
    path.clone()
        .ok_or_else(|| Failure::usage(format!("missing required argument {flag}")))
}

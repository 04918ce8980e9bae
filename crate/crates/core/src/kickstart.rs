//! Kickstart alignment: package the reference image together with the first
//! aligned pose so an external pose-guided image generator can re-pose the
//! reference before video generation starts.
//!
//! The generator itself sits behind [`GeneratorAdapter`]. Two adapters ship:
//! [`IdentityAdapter`], which copies the reference image unchanged (for
//! model-free pipeline tests), and [`CommandAdapter`], which hands the bundle
//! to an external program.
//!
//! Whether the generated image replaces the reference for the whole video or
//! only seeds the first frame is left to the downstream system; the bundle
//! keeps both the original reference path and the generated image.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pose_model::{
    parse_sequence_with, serialize_pose_line, serialize_sequence, ParseOptions, Pose, PoseSequence,
};
use crate::render::{render_pose_with, write_png, RenderStyle};
use crate::retarget::{
    retarget_sequence, EpsilonMode, HandScaleSource, RatioStrategy, RetargetConfig,
    UndefinedRatioPolicy,
};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const ALIGNED_FILE: &str = "aligned.ndjson";
pub const FIRST_FRAME_FILE: &str = "first_frame.ndjson";
pub const FIRST_FRAME_IMAGE: &str = "first_frame.png";

/// Config used for kickstart preparation: the pose stays where the template put it.
pub fn kickstart_config() -> RetargetConfig {
    RetargetConfig {
        epsilon_mode: EpsilonMode::Zero,
        ..Default::default()
    }
}

/// Where the inputs came from, as recorded in the manifest.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KickstartInputs {
    pub template: String,
    pub reference_pose: String,
    pub reference_image: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KickstartOutputs {
    pub aligned_sequence: String,
    pub first_frame_pose: String,
    pub first_frame_image: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KickstartManifest {
    pub epsilon_mode: EpsilonMode,
    pub ratio_strategy: RatioStrategy,
    pub undefined_ratio_policy: UndefinedRatioPolicy,
    pub hand_scale_source: HandScaleSource,
    pub retarget_face: bool,
    pub epsilon_len: f64,
    pub topology: String,
    pub version: String,
    pub frames: usize,
    pub inputs: KickstartInputs,
    pub outputs: KickstartOutputs,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KickstartBundle {
    pub out_dir: PathBuf,
    pub reference_image_path: PathBuf,
    /// Frame 0 of the aligned sequence.
    pub first_frame_pose: Pose,
    pub aligned_sequence_ref: PathBuf,
    pub manifest: KickstartManifest,
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Aligns `template` to `reference`, then writes the aligned sequence, the
/// first aligned pose (as NDJSON and PNG), and `manifest.json` into `out_dir`.
pub fn prepare_kickstart(
    template: &PoseSequence,
    reference: &Pose,
    inputs: &KickstartInputs,
    cfg: &RetargetConfig,
    out_dir: &Path,
) -> Result<KickstartBundle> {
    let aligned = retarget_sequence(template, reference, cfg)?;
    let first = aligned.frames()[0].clone();

    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let aligned_path = out_dir.join(ALIGNED_FILE);
    write_file(&aligned_path, &serialize_sequence(&aligned))?;
    let mut line = serialize_pose_line(&first);
    line.push('\n');
    write_file(&out_dir.join(FIRST_FRAME_FILE), line.as_bytes())?;
    let style = RenderStyle::openpose(&cfg.topology);
    let img = render_pose_with(&first, &style, &cfg.topology)?;
    write_png(&img, &out_dir.join(FIRST_FRAME_IMAGE))?;

    let manifest = KickstartManifest {
        epsilon_mode: cfg.epsilon_mode,
        ratio_strategy: cfg.ratio_strategy,
        undefined_ratio_policy: cfg.undefined_ratio_policy,
        hand_scale_source: cfg.hand_scale_source,
        retarget_face: cfg.retarget_face,
        epsilon_len: cfg.epsilon_len,
        topology: cfg.topology.name.clone(),
        version: crate::VERSION.to_string(),
        frames: aligned.len(),
        inputs: inputs.clone(),
        outputs: KickstartOutputs {
            aligned_sequence: ALIGNED_FILE.into(),
            first_frame_pose: FIRST_FRAME_FILE.into(),
            first_frame_image: FIRST_FRAME_IMAGE.into(),
        },
    };
    let mut json = serde_json::to_vec_pretty(&manifest).expect("manifest serializes");
    json.push(b'\n');
    write_file(&out_dir.join(MANIFEST_FILE), &json)?;

    Ok(KickstartBundle {
        out_dir: out_dir.to_path_buf(),
        reference_image_path: inputs.reference_image.clone(),
        first_frame_pose: first,
        aligned_sequence_ref: aligned_path,
        manifest,
    })
}

impl KickstartBundle {
    /// Re-reads a bundle written by [`prepare_kickstart`], checking that the
    /// stored first pose is frame 0 of the stored sequence.
    pub fn load(out_dir: &Path) -> Result<Self> {
        let manifest_path = out_dir.join(MANIFEST_FILE);
        let bytes = fs::read(&manifest_path).map_err(|e| Error::io(&manifest_path, e))?;
        let manifest: KickstartManifest = serde_json::from_slice(&bytes)
            .map_err(|e| Error::parse(manifest_path.display().to_string(), e))?;
        let opts = ParseOptions::lenient();
        let aligned_path = out_dir.join(&manifest.outputs.aligned_sequence);
        let aligned = parse_sequence_with(&aligned_path, &opts)?;
        let first = parse_sequence_with(&out_dir.join(&manifest.outputs.first_frame_pose), &opts)?
            .into_frames()
            .swap_remove(0);
        if first != aligned.frames()[0] {
            return Err(Error::Contract(
                "bundle first-frame pose differs from frame 0 of the aligned sequence".into(),
            ));
        }
        Ok(KickstartBundle {
            out_dir: out_dir.to_path_buf(),
            reference_image_path: manifest.inputs.reference_image.clone(),
            first_frame_pose: first,
            aligned_sequence_ref: aligned_path,
            manifest,
        })
    }

    pub fn manifest_json(&self) -> String {
        serde_json::to_string(&self.manifest).expect("manifest serializes")
    }

    pub fn first_frame_image(&self) -> PathBuf {
        self.out_dir.join(&self.manifest.outputs.first_frame_image)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdapterDescriptor {
    pub name: String,
    pub accepts: Vec<String>,
    pub returns: String,
}

/// A pose-guided image generator: re-renders the reference image in the given pose.
///
/// A conforming adapter writes an image whose dimensions equal the pose canvas
/// and is reproducible for the same inputs. [`IdentityAdapter`] is exempt from
/// the dimension rule: it returns the reference image untouched.
pub trait GeneratorAdapter {
    fn descriptor(&self) -> AdapterDescriptor;

    /// Writes the generated image to `out_path`; returns a failure message otherwise.
    fn generate(
        &self,
        bundle: &KickstartBundle,
        out_path: &Path,
    ) -> std::result::Result<(), String>;
}

fn descriptor(name: &str) -> AdapterDescriptor {
    AdapterDescriptor {
        name: name.to_string(),
        accepts: vec!["image".into(), "pose".into()],
        returns: "image".into(),
    }
}

/// Copies the reference image byte for byte.
#[derive(Debug, Clone, Copy, Default)]
pub struct IdentityAdapter;

impl GeneratorAdapter for IdentityAdapter {
    fn descriptor(&self) -> AdapterDescriptor {
        descriptor("identity")
    }

    fn generate(
        &self,
        bundle: &KickstartBundle,
        out_path: &Path,
    ) -> std::result::Result<(), String> {
        fs::copy(&bundle.reference_image_path, out_path)
            .map(|_| ())
            .map_err(|e| format!("copying {}: {e}", bundle.reference_image_path.display()))
    }
}

/// Runs an external program as
/// `program <reference_image> <first_frame.png> <first_frame.ndjson> <out_path>`.
/// A non-zero exit status is an adapter failure.
#[derive(Debug, Clone)]
pub struct CommandAdapter {
    pub program: PathBuf,
    pub args: Vec<String>,
}

impl GeneratorAdapter for CommandAdapter {
    fn descriptor(&self) -> AdapterDescriptor {
        descriptor(&format!("command:{}", self.program.display()))
    }

    fn generate(
        &self,
        bundle: &KickstartBundle,
        out_path: &Path,
    ) -> std::result::Result<(), String> {
        let output = Command::new(&self.program)
            .args(&self.args)
            .arg(&bundle.reference_image_path)
            .arg(bundle.first_frame_image())
            .arg(
                bundle
                    .out_dir
                    .join(&bundle.manifest.outputs.first_frame_pose),
            )
            .arg(out_path)
            .output()
            .map_err(|e| format!("spawning {}: {e}", self.program.display()))?;
        if !output.status.success() {
            return Err(format!(
                "{} exited with {}: {}",
                self.program.display(),
                output.status,
                String::from_utf8_lossy(&output.stderr).trim()
            ));
        }
        if !out_path.exists() {
            return Err(format!("{} produced no image", self.program.display()));
        }
        Ok(())
    }
}

/// Resolves `identity` or `command:<program>`.
pub fn adapter_by_name(name: &str) -> Option<Box<dyn GeneratorAdapter>> {
    if name == "identity" {
        return Some(Box::new(IdentityAdapter));
    }
    let program = name.strip_prefix("command:")?;
    let mut parts = program.split_whitespace();
    let program = PathBuf::from(parts.next()?);
    Some(Box::new(CommandAdapter {
        program,
        args: parts.map(String::from).collect(),
    }))
}

/// Runs `adapter` on the bundle and returns the generated image path,
/// `kickstart_image.<ext>` in the bundle directory.
pub fn run_generator(adapter: &dyn GeneratorAdapter, bundle: &KickstartBundle) -> Result<PathBuf> {
    let ext = bundle
        .reference_image_path
        .extension()
        .and_then(|e| e.to_str())
        .unwrap_or("png");
    let out = bundle.out_dir.join(format!("kickstart_image.{ext}"));
    adapter
        .generate(bundle, &out)
        .map_err(|message| Error::Adapter {
            name: adapter.descriptor().name,
            message,
            manifest: bundle.manifest_json(),
        })?;
    Ok(out)
}

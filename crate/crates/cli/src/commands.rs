use std::fs;
use std::path::{Path, PathBuf};

use poseforge::kickstart::{self, KickstartInputs};
use poseforge::metrics::{self, AlignmentReport};
use poseforge::pose_model::{self, Pose, PoseSequence};
use poseforge::render::{self, RenderStyle};
use poseforge::retarget::{self, EpsilonMode};
use poseforge::synth::{self, Preset, SynthParams, EDGE_COUNT};
use serde::Serialize;

use crate::config::{require, CliConfig};
use crate::{
    AlignArgs, DemoGenArgs, Failure, KickstartArgs, MetricsArgs, RenderArgs, RetargetFlags,
    EXIT_THRESHOLD,
};

type CmdResult = Result<u8, Failure>;

pub const CONFIG_FILE: &str = "config.json";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const ALIGNED_FILE: &str = "aligned.ndjson";
pub const FRAMES_DIR: &str = "frames";

#[derive(Serialize)]
struct RunManifest<'a, S: Serialize> {
    command: &'a str,
    version: &'a str,
    config: &'a CliConfig,
    summary: S,
}

fn write(path: &Path, bytes: &[u8]) -> Result<(), Failure> {
    fs::write(path, bytes).map_err(|e| Failure::io(format!("writing {}: {e}", path.display())))
}

fn create_dir(path: &Path) -> Result<(), Failure> {
    fs::create_dir_all(path).map_err(|e| Failure::io(format!("creating {}: {e}", path.display())))
}

fn pretty<T: Serialize>(value: &T) -> Vec<u8> {
    let mut bytes = serde_json::to_vec_pretty(value).expect("plain data serializes");
    bytes.push(b'\n');
    bytes
}

fn write_manifest<S: Serialize>(
    dir: &Path,
    command: &str,
    cfg: &CliConfig,
    summary: S,
) -> Result<(), Failure> {
    let manifest = RunManifest {
        command,
        version: poseforge::VERSION,
        config: cfg,
        summary,
    };
    write(&dir.join(MANIFEST_FILE), &pretty(&manifest))?;
    write(&dir.join(CONFIG_FILE), &pretty(cfg))
}

/// Loads `--config` and applies the retargeting flags on top.
fn resolve(flags: &RetargetFlags) -> Result<CliConfig, Failure> {
    let mut cfg = CliConfig::load(flags.config.as_deref())?;
    if let Some(e) = flags.epsilon {
        cfg.retarget.epsilon_mode = e;
    }
    if let Some(s) = flags.ratio_strategy {
        cfg.retarget.ratio_strategy = s;
    }
    if let Some(p) = flags.undefined_ratio {
        cfg.retarget.undefined_ratio_policy = p;
    }
    if let Some(h) = flags.hand_scale {
        cfg.retarget.hand_scale_source = h;
    }
    if flags.no_face_retarget {
        cfg.retarget.retarget_face = false;
    }
    if let Some(t) = flags.score_threshold {
        cfg.score_threshold = t;
    }
    if flags.canvas.is_some() {
        cfg.canvas = flags.canvas;
    }
    Ok(cfg)
}

fn set(slot: &mut Option<PathBuf>, flag: &Option<PathBuf>) {
    if flag.is_some() {
        *slot = flag.clone();
    }
}

fn read_sequence(
    path: &Path,
    cfg: &CliConfig,
    check_bounds: bool,
) -> Result<PoseSequence, Failure> {
    Ok(pose_model::parse_sequence_with(
        path,
        &cfg.parse_options(check_bounds),
    )?)
}

fn read_reference(path: &Path, cfg: &CliConfig) -> Result<Pose, Failure> {
    Ok(pose_model::parse_pose_file(path, &cfg.parse_options(true))?)
}

#[derive(Serialize)]
struct AlignSummary {
    frames: usize,
    edges_defined: usize,
    edges_total: usize,
    offset: [f64; 2],
    canvas: String,
    rendered: bool,
}

pub fn align(args: AlignArgs) -> CmdResult {
    let mut cfg = resolve(&args.retarget)?;
    set(&mut cfg.paths.template, &args.template);
    set(&mut cfg.paths.reference_pose, &args.reference_pose);
    set(&mut cfg.paths.out, &args.out);
    let template_path = require(&cfg.paths.template, "--template")?;
    let reference_path = require(&cfg.paths.reference_pose, "--reference-pose")?;
    let out = require(&cfg.paths.out, "--out")?;
    cfg.validate()?;

    let template = read_sequence(&template_path, &cfg, true)?;
    let reference = read_reference(&reference_path, &cfg)?;
    let run = retarget::retarget_sequence_detailed(&template, &reference, &cfg.retarget)?;

    create_dir(&out)?;
    write(
        &out.join(ALIGNED_FILE),
        &pose_model::serialize_sequence(&run.sequence),
    )?;
    if args.render {
        render::render_sequence_with(
            &run.sequence,
            &cfg.style,
            &cfg.retarget.topology,
            &out.join(FRAMES_DIR),
        )?;
    }
    let summary = AlignSummary {
        frames: run.sequence.len(),
        edges_defined: run.ratios.defined_count(),
        edges_total: run.ratios.len(),
        offset: [run.offset.0, run.offset.1],
        canvas: run.sequence.canvas().to_string(),
        rendered: args.render,
    };
    write_manifest(&out, "align", &cfg, &summary)?;
    println!(
        "aligned {} frames, {}/{} edges defined, strategy {}, epsilon {}",
        summary.frames,
        summary.edges_defined,
        summary.edges_total,
        cfg.retarget.ratio_strategy,
        cfg.retarget.epsilon_mode
    );
    Ok(0)
}

pub fn metrics(args: MetricsArgs) -> CmdResult {
    let mut cfg = resolve(&args.retarget)?;
    set(&mut cfg.paths.template, &args.template);
    set(&mut cfg.paths.output, &args.output);
    set(&mut cfg.paths.reference_pose, &args.reference_pose);
    let template_path = require(&cfg.paths.template, "--template")?;
    let output_path = require(&cfg.paths.output, "--output")?;
    let reference_path = require(&cfg.paths.reference_pose, "--reference-pose")?;
    cfg.validate()?;
    if let Some(t) = args.fail_above {
        if !(t.is_finite() && t >= 0.0) {
            return Err(Failure::input(format!(
                "--fail-above must be a non-negative number, got {t}"
            )));
        }
    }

    let template = read_sequence(&template_path, &cfg, true)?;
    // Aligned output may legitimately sit outside the usual bounds.
    let output = read_sequence(&output_path, &cfg, false)?;
    let reference = read_reference(&reference_path, &cfg)?;
    let ratios = retarget::compute_edge_ratios(&template, &reference, &cfg.retarget)?;
    let report = metrics::evaluate(&template, &output, &reference, &ratios, &cfg.retarget)?;

    let json = metrics::report_to_json(&report);
    match &args.report {
        Some(path) => {
            if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                create_dir(dir)?;
            }
            write(path, &json)?;
            print_metrics_line(&report);
        }
        None => print!("{}", String::from_utf8_lossy(&json)),
    }

    match args.fail_above {
        Some(t) if report.worst_error() > t => {
            eprintln!(
                "worst error {:.3e} exceeds --fail-above {t:e}",
                report.worst_error()
            );
            Ok(EXIT_THRESHOLD)
        }
        _ => Ok(0),
    }
}

fn print_metrics_line(r: &AlignmentReport) {
    println!(
        "{} frames, coverage {:.4}, mean length error {:.3e}, max length error {:.3e}, max angle error {:.3e}, drift {:.3e}",
        r.frames_evaluated, r.coverage, r.mean_length_rel_error, r.max_length_rel_error, r.max_angle_abs_error_rad, r.root_offset_drift
    );
}

pub fn render(args: RenderArgs) -> CmdResult {
    let mut cfg = CliConfig::load(args.config.as_deref())?;
    set(&mut cfg.paths.sequence, &args.sequence);
    set(&mut cfg.paths.out, &args.out);
    if args.canvas.is_some() {
        cfg.canvas = args.canvas;
    }
    if let Some(path) = &args.style {
        let bytes =
            fs::read(path).map_err(|e| Failure::io(format!("reading {}: {e}", path.display())))?;
        cfg.style = serde_json::from_slice::<RenderStyle>(&bytes)
            .map_err(|e| Failure::input(format!("style {}: {e}", path.display())))?;
    }
    let seq_path = require(&cfg.paths.sequence, "--sequence")?;
    let out = require(&cfg.paths.out, "--out")?;
    cfg.validate()?;

    let seq = read_sequence(&seq_path, &cfg, false)?;
    let files = render::render_sequence_with(&seq, &cfg.style, &cfg.retarget.topology, &out)?;
    write_manifest(
        &out,
        "render",
        &cfg,
        serde_json::json!({ "frames": files.len() }),
    )?;
    println!("rendered {} frames to {}", files.len(), out.display());
    Ok(0)
}

pub fn kickstart(args: KickstartArgs) -> CmdResult {
    let mut cfg = CliConfig {
        retarget: kickstart::kickstart_config(),
        ..Default::default()
    };
    if let Some(path) = &args.retarget.config {
        cfg = CliConfig::load(Some(path))?;
    }
    let mut flags = args.retarget.clone();
    flags.config = None;
    let overrides = resolve(&flags)?;
    merge_flags(&mut cfg, &flags, &overrides);
    set(&mut cfg.paths.template, &args.template);
    set(&mut cfg.paths.reference_pose, &args.reference_pose);
    set(&mut cfg.paths.reference_image, &args.reference_image);
    set(&mut cfg.paths.out, &args.out);
    let template_path = require(&cfg.paths.template, "--template")?;
    let reference_path = require(&cfg.paths.reference_pose, "--reference-pose")?;
    let image_path = require(&cfg.paths.reference_image, "--reference-image")?;
    let out = require(&cfg.paths.out, "--out")?;
    cfg.validate()?;
    let adapter = kickstart::adapter_by_name(&args.adapter).ok_or_else(|| {
        Failure::input(format!(
            "unknown adapter `{}` (identity|command:<program>)",
            args.adapter
        ))
    })?;
    if !image_path.is_file() {
        return Err(Failure::io(format!(
            "reference image {} not found",
            image_path.display()
        )));
    }

    let template = read_sequence(&template_path, &cfg, true)?;
    let reference = read_reference(&reference_path, &cfg)?;
    let inputs = KickstartInputs {
        template: template_path.display().to_string(),
        reference_pose: reference_path.display().to_string(),
        reference_image: image_path,
    };
    let bundle = kickstart::prepare_kickstart(&template, &reference, &inputs, &cfg.retarget, &out)?;
    write(&out.join(CONFIG_FILE), &pretty(&cfg))?;
    let generated = kickstart::run_generator(adapter.as_ref(), &bundle)?;
    println!(
        "kickstart bundle for {} frames in {}, generated {}",
        bundle.manifest.frames,
        out.display(),
        generated.display()
    );
    Ok(0)
}

/// Applies only the flags that were actually given, so config-file values
/// survive when a flag is absent.
fn merge_flags(cfg: &mut CliConfig, flags: &RetargetFlags, given: &CliConfig) {
    if flags.epsilon.is_some() {
        cfg.retarget.epsilon_mode = given.retarget.epsilon_mode;
    }
    if flags.ratio_strategy.is_some() {
        cfg.retarget.ratio_strategy = given.retarget.ratio_strategy;
    }
    if flags.undefined_ratio.is_some() {
        cfg.retarget.undefined_ratio_policy = given.retarget.undefined_ratio_policy;
    }
    if flags.hand_scale.is_some() {
        cfg.retarget.hand_scale_source = given.retarget.hand_scale_source;
    }
    if flags.no_face_retarget {
        cfg.retarget.retarget_face = false;
    }
    if flags.score_threshold.is_some() {
        cfg.score_threshold = given.score_threshold;
    }
    if flags.canvas.is_some() {
        cfg.canvas = given.canvas;
    }
}

fn check_in_canvas(seq: &PoseSequence, what: &str) -> Result<(), Failure> {
    for (i, frame) in seq.frames().iter().enumerate() {
        if let Some(kp) = frame
            .keypoints()
            .find(|kp| !frame.canvas.contains(kp.x, kp.y))
        {
            return Err(Failure::input(format!(
                "{what} frame {i}: keypoint ({}, {}) leaves the {} canvas; adjust --canvas, --scale or --limb-scale",
                kp.x, kp.y, frame.canvas
            )));
        }
    }
    Ok(())
}

pub fn demo_gen(args: DemoGenArgs) -> CmdResult {
    if let Some(preset) = args.preset {
        return demo_preset(preset, &args.out);
    }
    if !(args.limb_scale.is_finite() && args.limb_scale > 0.0) {
        return Err(Failure::input(format!(
            "--limb-scale must be positive, got {}",
            args.limb_scale
        )));
    }
    let params = SynthParams {
        motion: args.motion,
        frames: args.frames,
        canvas: args.canvas,
        scale: args.scale,
        seed: args.seed,
        limb_scale: [args.limb_scale; EDGE_COUNT],
        hands: !args.no_hands,
        face: !args.no_face,
        ..Default::default()
    };
    let seq = synth::generate(&params)?;
    check_in_canvas(&seq, "generated")?;
    if let Some(dir) = args.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        create_dir(dir)?;
    }
    write(&args.out, &pose_model::serialize_sequence(&seq))?;
    println!(
        "wrote {} {} frames ({} canvas, seed {}) to {}",
        seq.len(),
        params.motion,
        seq.canvas(),
        params.seed,
        args.out.display()
    );
    Ok(0)
}

pub const PRESET_TEMPLATE: &str = "template.ndjson";
pub const PRESET_REFERENCE: &str = "reference.ndjson";

fn demo_preset(preset: Preset, out: &Path) -> CmdResult {
    let fx = synth::fixture(preset);
    check_in_canvas(&fx.template, "template")?;
    let reference = PoseSequence::new(vec![fx.reference.clone()], None)?;
    check_in_canvas(&reference, "reference")?;
    create_dir(out)?;
    write(
        &out.join(PRESET_TEMPLATE),
        &pose_model::serialize_sequence(&fx.template),
    )?;
    let mut line = pose_model::serialize_pose_line(&fx.reference);
    line.push('\n');
    write(&out.join(PRESET_REFERENCE), line.as_bytes())?;
    let mut cfg = CliConfig::default();
    if preset == Preset::FrameSize {
        cfg.retarget.epsilon_mode = EpsilonMode::BaseDiff;
    }
    cfg.paths.template = Some(out.join(PRESET_TEMPLATE));
    cfg.paths.reference_pose = Some(out.join(PRESET_REFERENCE));
    write_manifest(
        out,
        "demo-gen",
        &cfg,
        serde_json::json!({ "preset": preset.to_string(), "frames": fx.template.len() }),
    )?;
    println!(
        "wrote {preset} preset ({} frames) to {}",
        fx.template.len(),
        out.display()
    );
    Ok(0)
}

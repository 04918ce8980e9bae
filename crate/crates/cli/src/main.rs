//! `poseforge`: align template pose sequences to a reference skeleton.
//!
//! Exit codes: 0 ok, 2 invalid input or usage, 3 I/O, 4 metric threshold
//! exceeded, 5 generator adapter failure.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use poseforge::pose_model::Canvas;
use poseforge::retarget::{EpsilonMode, HandScaleSource, RatioStrategy, UndefinedRatioPolicy};
use poseforge::synth::{Motion, Preset};

pub const EXIT_INPUT: u8 = 2;
pub const EXIT_IO: u8 = 3;
pub const EXIT_THRESHOLD: u8 = 4;
pub const EXIT_ADAPTER: u8 = 5;

#[derive(Debug, Parser)]
#[command(name = "poseforge", version, about = "Training-free 2D pose alignment")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Cmd,
}

#[derive(Debug, Subcommand)]
pub enum Cmd {
    /// Retarget a template sequence onto a reference pose.
    Align(AlignArgs),
    /// Measure how well an output sequence matches the adapter's expectations.
    Metrics(MetricsArgs),
    /// Render a sequence to PNG frames.
    Render(RenderArgs),
    /// Prepare the kickstart bundle and run a generator adapter.
    Kickstart(KickstartArgs),
    /// Write a synthetic sequence, or a preset template/reference pair.
    DemoGen(DemoGenArgs),
}

#[derive(Debug, Clone, Args)]
pub struct RetargetFlags {
    /// JSON config file; flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Root offset: zero, base-diff, or dx,dy in pixels.
    #[arg(long)]
    pub epsilon: Option<EpsilonMode>,
    /// Template length aggregation: first, median, or max.
    #[arg(long)]
    pub ratio_strategy: Option<RatioStrategy>,
    /// What to do with edges lacking a ratio.
    #[arg(long, value_parser = parse_policy)]
    pub undefined_ratio: Option<UndefinedRatioPolicy>,
    /// Hand scale source: forearm or bbox.
    #[arg(long, value_parser = parse_hand_scale)]
    pub hand_scale: Option<HandScaleSource>,
    /// Pass face keypoints through untouched.
    #[arg(long)]
    pub no_face_retarget: bool,
    #[arg(long)]
    pub score_threshold: Option<f64>,
    /// Canvas (WxH) for OpenPose frames without canvas_width/canvas_height.
    #[arg(long)]
    pub canvas: Option<Canvas>,
}

#[derive(Debug, Args)]
pub struct AlignArgs {
    #[arg(long)]
    pub template: Option<PathBuf>,
    #[arg(long)]
    pub reference_pose: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write PNG frames to <out>/frames.
    #[arg(long)]
    pub render: bool,
    #[command(flatten)]
    pub retarget: RetargetFlags,
}

#[derive(Debug, Args)]
pub struct MetricsArgs {
    #[arg(long)]
    pub template: Option<PathBuf>,
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long)]
    pub reference_pose: Option<PathBuf>,
    /// Write the JSON report here instead of stdout.
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Exit 4 when any error exceeds this value.
    #[arg(long)]
    pub fail_above: Option<f64>,
    #[command(flatten)]
    pub retarget: RetargetFlags,
}

#[derive(Debug, Args)]
pub struct RenderArgs {
    #[arg(long)]
    pub sequence: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// RenderStyle JSON.
    #[arg(long)]
    pub style: Option<PathBuf>,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub canvas: Option<Canvas>,
}

#[derive(Debug, Args)]
pub struct KickstartArgs {
    #[arg(long)]
    pub template: Option<PathBuf>,
    #[arg(long)]
    pub reference_pose: Option<PathBuf>,
    #[arg(long)]
    pub reference_image: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// `identity`, or `command:<program>` to call an external generator.
    #[arg(long, default_value = "identity")]
    pub adapter: String,
    #[command(flatten)]
    pub retarget: RetargetFlags,
}

#[derive(Debug, Args)]
pub struct DemoGenArgs {
    #[arg(long, default_value = "walk")]
    pub motion: Motion,
    #[arg(long, default_value_t = 60)]
    pub frames: usize,
    #[arg(long, default_value = "512x768")]
    pub canvas: Canvas,
    #[arg(long, default_value_t = 1.0)]
    pub scale: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Uniform bone length multiplier.
    #[arg(long, default_value_t = 1.0)]
    pub limb_scale: f64,
    #[arg(long)]
    pub no_hands: bool,
    #[arg(long)]
    pub no_face: bool,
    /// Write a template/reference pair (dwarf, frame-size, offset) into the --out directory.
    #[arg(long)]
    pub preset: Option<Preset>,
    #[arg(long)]
    pub out: PathBuf,
}

fn parse_policy(s: &str) -> Result<UndefinedRatioPolicy, String> {
    match s {
        "inherit-unity" | "inherit_unity" | "unity" => Ok(UndefinedRatioPolicy::InheritUnity),
        "mark-missing" | "mark_missing" | "missing" => Ok(UndefinedRatioPolicy::MarkMissing),
        other => Err(format!(
            "unknown policy `{other}` (inherit-unity|mark-missing)"
        )),
    }
}

fn parse_hand_scale(s: &str) -> Result<HandScaleSource, String> {
    match s {
        "forearm" | "forearm_ratio" => Ok(HandScaleSource::ForearmRatio),
        "bbox" | "hand_bbox_ratio" => Ok(HandScaleSource::HandBboxRatio),
        other => Err(format!(
            "unknown hand scale source `{other}` (forearm|bbox)"
        )),
    }
}

/// A command failure with its exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
    pub usage: bool,
}

impl Failure {
    pub fn input(message: impl Into<String>) -> Self {
        Failure {
            code: EXIT_INPUT,
            message: message.into(),
            usage: false,
        }
    }

    pub fn usage(message: impl Into<String>) -> Self {
        Failure {
            usage: true,
            ..Failure::input(message)
        }
    }

    pub fn io(message: impl Into<String>) -> Self {
        Failure {
            code: EXIT_IO,
            message: message.into(),
            usage: false,
        }
    }
}

impl From<poseforge::Error> for Failure {
    fn from(e: poseforge::Error) -> Self {
        let code = match &e {
            poseforge::Error::Adapter { .. } => EXIT_ADAPTER,
            e if e.is_io() => EXIT_IO,
            _ => EXIT_INPUT,
        };
        Failure {
            code,
            message: e.to_string(),
            usage: false,
        }
    }
}

fn init_threads() {
    let Ok(raw) = std::env::var("POSEFORGE_THREADS") else {
        return;
    };
    match raw.trim().parse::<usize>() {
        Ok(n) if n > 0 => {
            if let Err(e) = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global()
            {
                log::warn!("could not size thread pool: {e}");
            }
        }
        _ => log::warn!("ignoring POSEFORGE_THREADS={raw}: expected a positive integer"),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    init_threads();
    let name = match &cli.command {
        Cmd::Align(_) => "align",
        Cmd::Metrics(_) => "metrics",
        Cmd::Render(_) => "render",
        Cmd::Kickstart(_) => "kickstart",
        Cmd::DemoGen(_) => "demo-gen",
    };
    let result = match cli.command {
        Cmd::Align(a) => commands::align(a),
        Cmd::Metrics(a) => commands::metrics(a),
        Cmd::Render(a) => commands::render(a),
        Cmd::Kickstart(a) => commands::kickstart(a),
        Cmd::DemoGen(a) => commands::demo_gen(a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            if f.usage {
                use clap::CommandFactory;
                let mut cmd = Cli::command();
                if let Some(sub) = cmd.find_subcommand_mut(name) {
                    eprintln!("\n{}", sub.render_usage());
                }
            }
            ExitCode::from(f.code)
        }
    }
}

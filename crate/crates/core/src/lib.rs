//! Training-free 2D pose alignment.
//!
//! Retargets a template pose sequence onto a reference character's skeletal
//! proportions while keeping the template's limb directions, then renders,
//! measures, and packages the result for pose-guided image and video
//! generators.

pub mod error;
pub mod kickstart;
pub mod metrics;
pub mod pose_model;
pub mod render;
pub mod retarget;
pub mod synth;

pub use error::{Error, Result};
pub use pose_model::{Canvas, Joint, Keypoint, LimbTopology, Pose, PoseSequence};
pub use retarget::{EdgeRatios, EpsilonMode, RatioStrategy, RetargetConfig};

/// Crate version, recorded in every output manifest.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

//! Pose keypoint data: domain types, skeleton topology, and file formats.
//!
//! Coordinates are held in pixel units of the pose's [`Canvas`]. Normalized
//! `[0, 1]` coordinates only appear at I/O boundaries and are converted with
//! [`denormalize`] / [`normalize`].

mod io;
mod topology;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use io::{
    parse_openpose_frame, parse_openpose_frame_with_diagnostics, parse_pose_file, parse_sequence,
    parse_sequence_bytes, parse_sequence_with, serialize_pose_line, serialize_sequence, CoordUnits,
    ParseOptions, ParsedFrame, BODY25_TO_BODY18,
};
pub use topology::{LimbTopology, HAND_EDGES};

pub const BODY_JOINTS: usize = 18;
pub const HAND_JOINTS: usize = 21;
pub const FACE_JOINTS: usize = 68;

pub const NOSE: usize = 0;
pub const NECK: usize = 1;
pub const R_ELBOW: usize = 3;
pub const R_WRIST: usize = 4;
pub const L_ELBOW: usize = 6;
pub const L_WRIST: usize = 7;

/// OpenPose BODY-18 joint names, in index order.
pub const BODY18_NAMES: [&str; BODY_JOINTS] = [
    "nose",
    "neck",
    "right_shoulder",
    "right_elbow",
    "right_wrist",
    "left_shoulder",
    "left_elbow",
    "left_wrist",
    "right_hip",
    "right_knee",
    "right_ankle",
    "left_hip",
    "left_knee",
    "left_ankle",
    "right_eye",
    "left_eye",
    "right_ear",
    "left_ear",
];

/// Default confidence at or below which a detection counts as missing.
pub const DEFAULT_SCORE_THRESHOLD: f64 = 0.05;

/// A detected 2D joint. Absence is modelled as `None` in a [`Joint`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Keypoint {
    pub x: f64,
    pub y: f64,
    pub score: f64,
}

impl Keypoint {
    pub const fn new(x: f64, y: f64, score: f64) -> Self {
        Keypoint { x, y, score }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.score.is_finite()
    }
}

/// A joint slot: `None` is a MISSING keypoint with no usable coordinates.
pub type Joint = Option<Keypoint>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Canvas {
    pub width: u32,
    pub height: u32,
}

impl Canvas {
    pub const fn new(width: u32, height: u32) -> Self {
        Canvas { width, height }
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= 0.0 && y >= 0.0 && x <= self.width as f64 && y <= self.height as f64
    }
}

impl fmt::Display for Canvas {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}", self.width, self.height)
    }
}

impl std::str::FromStr for Canvas {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let (w, h) = s
            .split_once(['x', 'X'])
            .ok_or_else(|| format!("expected WxH, got `{s}`"))?;
        let width: u32 = w
            .trim()
            .parse()
            .map_err(|e| format!("bad width `{w}`: {e}"))?;
        let height: u32 = h
            .trim()
            .parse()
            .map_err(|e| format!("bad height `{h}`: {e}"))?;
        if width == 0 || height == 0 {
            return Err(format!("canvas dimensions must be positive, got {s}"));
        }
        Ok(Canvas { width, height })
    }
}

/// One frame's skeleton: BODY-18 joints plus optional hands and face.
#[derive(Debug, Clone, PartialEq)]
pub struct Pose {
    pub body: [Joint; BODY_JOINTS],
    pub hand_left: Option<Vec<Joint>>,
    pub hand_right: Option<Vec<Joint>>,
    pub face: Option<Vec<Joint>>,
    pub canvas: Canvas,
}

impl Pose {
    /// A pose with every body joint missing and no hands or face.
    pub fn empty(canvas: Canvas) -> Self {
        Pose {
            body: [None; BODY_JOINTS],
            hand_left: None,
            hand_right: None,
            face: None,
            canvas,
        }
    }

    pub fn neck(&self) -> Joint {
        self.body[NECK]
    }

    /// Iterates every present keypoint across body, hands, and face.
    pub fn keypoints(&self) -> impl Iterator<Item = &Keypoint> {
        self.body
            .iter()
            .chain(self.hand_left.iter().flatten())
            .chain(self.hand_right.iter().flatten())
            .chain(self.face.iter().flatten())
            .flatten()
    }

    /// Applies `f` to every present keypoint, preserving missing slots.
    pub fn map_keypoints(&self, mut f: impl FnMut(&Keypoint) -> Keypoint) -> Pose {
        let mut map_part = |part: &Option<Vec<Joint>>| {
            part.as_ref()
                .map(|joints| joints.iter().map(|j| j.as_ref().map(&mut f)).collect())
        };
        let hand_left = map_part(&self.hand_left);
        let hand_right = map_part(&self.hand_right);
        let face = map_part(&self.face);
        let mut body = [None; BODY_JOINTS];
        for (out, j) in body.iter_mut().zip(&self.body) {
            *out = j.as_ref().map(&mut f);
        }
        Pose {
            body,
            hand_left,
            hand_right,
            face,
            canvas: self.canvas,
        }
    }

    /// Checks structural invariants: part sizes, positive canvas, finite coordinates.
    pub fn validate_structure(&self) -> Result<()> {
        if self.canvas.width == 0 || self.canvas.height == 0 {
            return Err(invalid(
                None,
                None,
                format!("canvas {} must be positive", self.canvas),
            ));
        }
        for (part, joints, expected) in [
            ("hand_left", &self.hand_left, HAND_JOINTS),
            ("hand_right", &self.hand_right, HAND_JOINTS),
            ("face", &self.face, FACE_JOINTS),
        ] {
            if let Some(joints) = joints {
                if joints.len() != expected {
                    return Err(invalid(
                        None,
                        Some(part.to_string()),
                        format!("expected {expected} keypoints, got {}", joints.len()),
                    ));
                }
            }
        }
        self.check_each(|name, kp| {
            if kp.is_finite() {
                Ok(())
            } else {
                Err(invalid(
                    None,
                    Some(name),
                    "non-finite coordinate".to_string(),
                ))
            }
        })
    }

    /// Structural checks plus the coordinate range
    /// `[-0.5 * dim, 1.5 * dim]` on both axes.
    pub fn validate(&self) -> Result<()> {
        self.validate_structure()?;
        let (w, h) = (self.canvas.width as f64, self.canvas.height as f64);
        self.check_each(|name, kp| {
            let in_x = kp.x >= -0.5 * w && kp.x <= 1.5 * w;
            let in_y = kp.y >= -0.5 * h && kp.y <= 1.5 * h;
            if in_x && in_y {
                Ok(())
            } else {
                Err(invalid(
                    None,
                    Some(name),
                    format!(
                        "({}, {}) lies far outside canvas {}",
                        kp.x, kp.y, self.canvas
                    ),
                ))
            }
        })
    }

    fn check_each(&self, mut check: impl FnMut(String, &Keypoint) -> Result<()>) -> Result<()> {
        for (i, j) in self.body.iter().enumerate() {
            if let Some(kp) = j {
                check(format!("body[{i}] ({})", BODY18_NAMES[i]), kp)?;
            }
        }
        for (part, joints) in [
            ("hand_left", &self.hand_left),
            ("hand_right", &self.hand_right),
            ("face", &self.face),
        ] {
            for (i, j) in joints.iter().flatten().enumerate() {
                if let Some(kp) = j {
                    check(format!("{part}[{i}]"), kp)?;
                }
            }
        }
        Ok(())
    }
}

fn invalid(frame: Option<usize>, joint: Option<String>, message: String) -> Error {
    Error::Validation {
        frame,
        joint,
        message,
    }
}

/// Ordered frames sharing one canvas.
#[derive(Debug, Clone, PartialEq)]
pub struct PoseSequence {
    frames: Vec<Pose>,
    fps: Option<f64>,
}

impl PoseSequence {
    /// Builds a sequence, enforcing `M >= 1` and a single shared canvas.
    pub fn new(frames: Vec<Pose>, fps: Option<f64>) -> Result<Self> {
        let first = frames
            .first()
            .ok_or_else(|| Error::EmptySequence("sequence has no frames".into()))?;
        let expected = first.canvas;
        let mismatched: Vec<usize> = frames
            .iter()
            .enumerate()
            .filter(|(_, f)| f.canvas != expected)
            .map(|(i, _)| i)
            .collect();
        if !mismatched.is_empty() {
            return Err(Error::MixedCanvas {
                expected,
                frames: mismatched,
            });
        }
        if let Some(fps) = fps {
            if !(fps.is_finite() && fps > 0.0) {
                return Err(invalid(
                    None,
                    None,
                    format!("fps must be positive, got {fps}"),
                ));
            }
        }
        Ok(PoseSequence { frames, fps })
    }

    pub fn frames(&self) -> &[Pose] {
        &self.frames
    }

    pub fn into_frames(self) -> Vec<Pose> {
        self.frames
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    /// Always false: a constructed sequence holds at least one frame.
    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn fps(&self) -> Option<f64> {
        self.fps
    }

    pub fn canvas(&self) -> Canvas {
        self.frames[0].canvas
    }

    /// Validates every frame (structure and coordinate range), tagging errors with the frame index.
    pub fn validate(&self) -> Result<()> {
        self.validate_frames(Pose::validate)
    }

    pub fn validate_structure(&self) -> Result<()> {
        self.validate_frames(Pose::validate_structure)
    }

    fn validate_frames(&self, check: impl Fn(&Pose) -> Result<()>) -> Result<()> {
        for (i, f) in self.frames.iter().enumerate() {
            check(f).map_err(|e| match e {
                Error::Validation { joint, message, .. } => Error::Validation {
                    frame: Some(i),
                    joint,
                    message,
                },
                other => other,
            })?;
        }
        Ok(())
    }
}

/// Scales normalized `[0, 1]` coordinates up to pixels of `pose.canvas`.
pub fn denormalize(pose: &Pose) -> Pose {
    let (w, h) = (pose.canvas.width as f64, pose.canvas.height as f64);
    pose.map_keypoints(|kp| Keypoint::new(kp.x * w, kp.y * h, kp.score))
}

/// Inverse of [`denormalize`].
pub fn normalize(pose: &Pose) -> Pose {
    let (w, h) = (pose.canvas.width as f64, pose.canvas.height as f64);
    pose.map_keypoints(|kp| Keypoint::new(kp.x / w, kp.y / h, kp.score))
}

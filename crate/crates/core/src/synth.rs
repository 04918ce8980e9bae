//! Synthetic articulated skeletons with exactly known bone lengths.
//!
//! Every edge of the BODY-18 tree gets an absolute direction that varies
//! sinusoidally with the frame index; joints are placed by walking the tree
//! from the neck. Limb lengths are fixed per edge (times an optional
//! per-edge multiplier), so ground truth for retargeting tests is known in
//! closed form. Hands fan out from the wrists along the forearm and the face
//! is a ring around the nose.

use std::f64::consts::{FRAC_PI_2, PI, TAU};
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pose_model::{
    Canvas, Joint, Keypoint, LimbTopology, Pose, PoseSequence, BODY_JOINTS, FACE_JOINTS,
    HAND_JOINTS, L_WRIST, NECK, NOSE, R_WRIST,
};

pub const EDGE_COUNT: usize = 17;

// Bone lengths as fractions of body height, in body18 edge order.
const BONE_FRACTIONS: [f64; EDGE_COUNT] = [
    0.11, 0.16, 0.14, 0.11, 0.16, 0.14, 0.30, 0.23, 0.23, 0.30, 0.23, 0.23, 0.09, 0.025, 0.04,
    0.025, 0.04,
];

const REST_ANGLES: [f64; EDGE_COUNT] = [
    PI,
    FRAC_PI_2 + 0.15,
    FRAC_PI_2 + 0.10,
    0.0,
    FRAC_PI_2 - 0.15,
    FRAC_PI_2 - 0.10,
    FRAC_PI_2 + 0.18,
    FRAC_PI_2 + 0.03,
    FRAC_PI_2,
    FRAC_PI_2 - 0.18,
    FRAC_PI_2 - 0.03,
    FRAC_PI_2,
    -FRAC_PI_2,
    -FRAC_PI_2 - 0.8,
    PI - 0.3,
    -FRAC_PI_2 + 0.8,
    0.3,
];

/// Edges shortened in the physique-mismatch fixture: arms, trunk-to-hip, legs.
pub const DWARF_EDGES: [usize; 10] = [1, 2, 4, 5, 6, 7, 8, 9, 10, 11];
pub const DWARF_FACTOR: f64 = 0.6;

const R_FOREARM: usize = 2;
const L_FOREARM: usize = 5;
const HEAD: usize = 12;
const PERIOD: f64 = 30.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Motion {
    Walk,
    Wave,
    Squat,
}

impl fmt::Display for Motion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Motion::Walk => "walk",
            Motion::Wave => "wave",
            Motion::Squat => "squat",
        })
    }
}

impl std::str::FromStr for Motion {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "walk" => Ok(Motion::Walk),
            "wave" => Ok(Motion::Wave),
            "squat" => Ok(Motion::Squat),
            other => Err(format!("unknown motion `{other}` (walk|wave|squat)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthParams {
    pub motion: Motion,
    pub frames: usize,
    pub canvas: Canvas,
    /// Multiplies every coordinate and the canvas.
    pub scale: f64,
    pub seed: u64,
    /// Per-edge bone length multipliers.
    pub limb_scale: [f64; EDGE_COUNT],
    /// Neck position as a fraction of the canvas.
    pub anchor: (f64, f64),
    pub hands: bool,
    pub face: bool,
    pub fps: Option<f64>,
}

impl Default for SynthParams {
    fn default() -> Self {
        SynthParams {
            motion: Motion::Walk,
            frames: 60,
            canvas: Canvas::new(512, 768),
            scale: 1.0,
            seed: 0,
            limb_scale: [1.0; EDGE_COUNT],
            anchor: (0.5, 0.3),
            hands: true,
            face: true,
            fps: Some(30.0),
        }
    }
}

impl SynthParams {
    /// Body height in unscaled pixels.
    pub fn body_height(&self) -> f64 {
        0.6 * self.canvas.height as f64
    }

    /// Exact bone length of each body18 edge, in output pixels.
    pub fn bone_lengths(&self) -> [f64; EDGE_COUNT] {
        let h = self.body_height();
        let mut out = [0.0; EDGE_COUNT];
        for k in 0..EDGE_COUNT {
            out[k] = BONE_FRACTIONS[k] * h * self.limb_scale[k] * self.scale;
        }
        out
    }

    fn output_canvas(&self) -> Result<Canvas> {
        let w = (self.canvas.width as f64 * self.scale).round();
        let h = (self.canvas.height as f64 * self.scale).round();
        if !(w >= 1.0 && h >= 1.0 && w <= u32::MAX as f64 && h <= u32::MAX as f64) {
            return Err(Error::Contract(format!(
                "scale {} gives an empty canvas from {}",
                self.scale, self.canvas
            )));
        }
        Ok(Canvas::new(w as u32, h as u32))
    }
}

/// Per-run randomness: phase offsets, amplitude factors, and detector scores.
struct Jitter {
    phase: [f64; EDGE_COUNT],
    amplitude: [f64; EDGE_COUNT],
    rng: ChaCha8Rng,
}

impl Jitter {
    fn new(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut phase = [0.0; EDGE_COUNT];
        let mut amplitude = [0.0; EDGE_COUNT];
        for k in 0..EDGE_COUNT {
            phase[k] = rng.gen_range(-0.3..0.3);
            amplitude[k] = rng.gen_range(0.85..1.15);
        }
        Jitter {
            phase,
            amplitude,
            rng,
        }
    }

    fn score(&mut self) -> f64 {
        // Three decimals, like detector output.
        (self.rng.gen_range(800..=1000) as f64) / 1000.0
    }
}

/// Absolute edge directions and root offset (in body heights) for one frame.
fn frame_angles(motion: Motion, i: usize, jitter: &Jitter) -> ([f64; EDGE_COUNT], (f64, f64)) {
    let phi = TAU * i as f64 / PERIOD;
    let wave = |k: usize, amp: f64, harmonic: f64| {
        amp * jitter.amplitude[k] * (harmonic * phi + jitter.phase[k]).sin()
    };
    let mut a = REST_ANGLES;
    let root;
    match motion {
        Motion::Walk => {
            let swing = wave(1, 0.35, 1.0);
            a[1] += swing;
            a[2] += swing + wave(2, 0.2, 1.0).abs();
            a[4] -= swing;
            a[5] -= swing - wave(5, 0.2, 1.0).abs();
            a[7] -= wave(7, 0.4, 1.0);
            a[8] = a[7] - 0.4 * (phi + jitter.phase[8]).sin().max(0.0);
            a[10] += wave(10, 0.4, 1.0);
            a[11] = a[10] + 0.4 * (-(phi + jitter.phase[11]).sin()).max(0.0);
            a[12] += wave(12, 0.05, 2.0);
            root = (0.02 * phi.sin(), 0.01 * (2.0 * phi).sin());
        }
        Motion::Wave => {
            a[1] = -FRAC_PI_2 - 0.6 + wave(1, 0.1, 1.0);
            a[2] = -FRAC_PI_2 + wave(2, 0.5, 1.0);
            a[4] += wave(4, 0.05, 1.0);
            a[5] += wave(5, 0.05, 1.0);
            a[12] += wave(12, 0.08, 1.0);
            root = (0.01 * phi.sin(), 0.0);
        }
        Motion::Squat => {
            let depth = 0.5 * (1.0 - (phi + jitter.phase[7]).cos());
            a[7] += 0.2 + 0.9 * depth;
            a[8] -= 0.5 * depth;
            a[10] -= 0.2 + 0.9 * depth;
            a[11] += 0.5 * depth;
            a[1] -= 0.9 * depth;
            a[2] -= 1.1 * depth;
            a[4] += 0.9 * depth;
            a[5] += 1.1 * depth;
            root = (0.0, 0.25 * depth);
        }
    }
    (a, root)
}

fn hand(
    wrist: &Keypoint,
    forearm_angle: f64,
    forearm_len: f64,
    mirror: f64,
    curl: f64,
    jitter: &mut Jitter,
) -> Vec<Joint> {
    const SEGMENTS: [f64; 4] = [0.30, 0.22, 0.18, 0.15];
    let hand_len = 0.55 * forearm_len;
    let mut out = vec![None; HAND_JOINTS];
    out[0] = Some(*wrist);
    for finger in 0..5 {
        let spread = if finger == 0 {
            -0.7
        } else {
            (finger as f64 - 2.5) * 0.22
        };
        let mut dir = forearm_angle + mirror * spread;
        let (mut x, mut y) = (wrist.x, wrist.y);
        for (s, frac) in SEGMENTS.iter().enumerate() {
            x += hand_len * frac * dir.cos();
            y += hand_len * frac * dir.sin();
            out[1 + 4 * finger + s] = Some(Keypoint::new(x, y, jitter.score()));
            dir += mirror * curl;
        }
    }
    out
}

fn face(nose: &Keypoint, head_len: f64, jitter: &mut Jitter) -> Vec<Joint> {
    let (rx, ry) = (0.55 * head_len, 0.72 * head_len);
    (0..FACE_JOINTS)
        .map(|i| {
            let t = TAU * i as f64 / FACE_JOINTS as f64;
            Some(Keypoint::new(
                nose.x + rx * t.cos(),
                nose.y + 0.1 * head_len + ry * t.sin(),
                jitter.score(),
            ))
        })
        .collect()
}

/// Generates a synthetic sequence. Coordinates are computed at unit scale and
/// multiplied by `params.scale` last, so scaling is exact for powers of two.
pub fn generate(params: &SynthParams) -> Result<PoseSequence> {
    if params.frames == 0 {
        return Err(Error::EmptySequence("frames must be >= 1".into()));
    }
    if !(params.scale.is_finite() && params.scale > 0.0) {
        return Err(Error::Contract(format!(
            "scale must be positive, got {}",
            params.scale
        )));
    }
    if params
        .limb_scale
        .iter()
        .any(|m| !(m.is_finite() && *m > 0.0))
    {
        return Err(Error::Contract("limb multipliers must be positive".into()));
    }
    let canvas = params.output_canvas()?;
    let topo = LimbTopology::body18();
    let h = params.body_height();
    let unit = SynthParams {
        scale: 1.0,
        ..params.clone()
    };
    let lengths = unit.bone_lengths();
    let mut jitter = Jitter::new(params.seed);
    let (ax, ay) = (
        params.anchor.0 * params.canvas.width as f64,
        params.anchor.1 * params.canvas.height as f64,
    );

    let mut frames = Vec::with_capacity(params.frames);
    for i in 0..params.frames {
        let (angles, (rx, ry)) = frame_angles(params.motion, i, &jitter);
        let mut body: [Joint; BODY_JOINTS] = [None; BODY_JOINTS];
        body[NECK] = Some(Keypoint::new(ax + rx * h, ay + ry * h, jitter.score()));
        for (k, &(p, c)) in topo.edges.iter().enumerate() {
            let parent = body[p].expect("topological order");
            body[c] = Some(Keypoint::new(
                parent.x + lengths[k] * angles[k].cos(),
                parent.y + lengths[k] * angles[k].sin(),
                jitter.score(),
            ));
        }
        let curl = 0.15 + 0.1 * (TAU * i as f64 / PERIOD).sin();
        let (hand_left, hand_right) = if params.hands {
            let left = hand(
                body[L_WRIST].as_ref().unwrap(),
                angles[L_FOREARM],
                lengths[L_FOREARM],
                -1.0,
                curl,
                &mut jitter,
            );
            let right = hand(
                body[R_WRIST].as_ref().unwrap(),
                angles[R_FOREARM],
                lengths[R_FOREARM],
                1.0,
                curl,
                &mut jitter,
            );
            (Some(left), Some(right))
        } else {
            (None, None)
        };
        let face = params
            .face
            .then(|| face(body[NOSE].as_ref().unwrap(), lengths[HEAD], &mut jitter));
        let pose = Pose {
            body,
            hand_left,
            hand_right,
            face,
            canvas,
        };
        let s = params.scale;
        frames.push(if s == 1.0 {
            pose
        } else {
            pose.map_keypoints(|kp| Keypoint::new(kp.x * s, kp.y * s, kp.score))
        });
    }
    PoseSequence::new(frames, params.fps)
}

/// Single reference pose: frame 0 of a generated sequence.
pub fn generate_pose(params: &SynthParams) -> Result<Pose> {
    let one = SynthParams {
        frames: 1,
        ..params.clone()
    };
    Ok(generate(&one)?.into_frames().swap_remove(0))
}

/// Offline stand-ins for the three ways a template can disagree with a reference.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    /// Reference arms, trunk and legs at 0.6x the template's.
    Dwarf,
    /// 1280x720 landscape template, 512x768 portrait reference.
    FrameSize,
    /// Same physique, reference standing elsewhere in the frame.
    Offset,
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Preset::Dwarf => "dwarf",
            Preset::FrameSize => "frame-size",
            Preset::Offset => "offset",
        })
    }
}

impl std::str::FromStr for Preset {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "dwarf" => Ok(Preset::Dwarf),
            "frame-size" | "frame_size" => Ok(Preset::FrameSize),
            "offset" => Ok(Preset::Offset),
            other => Err(format!(
                "unknown preset `{other}` (dwarf|frame-size|offset)"
            )),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Fixture {
    pub preset: Preset,
    pub template: PoseSequence,
    pub reference: Pose,
}

pub fn fixture(preset: Preset) -> Fixture {
    let (template, reference) = match preset {
        Preset::Dwarf => {
            let mut limb_scale = [1.0; EDGE_COUNT];
            for k in DWARF_EDGES {
                limb_scale[k] = DWARF_FACTOR;
            }
            (
                SynthParams {
                    seed: 1,
                    ..Default::default()
                },
                SynthParams {
                    seed: 7,
                    limb_scale,
                    anchor: (0.5, 0.35),
                    ..Default::default()
                },
            )
        }
        Preset::FrameSize => (
            SynthParams {
                motion: Motion::Wave,
                frames: 48,
                canvas: Canvas::new(1280, 720),
                anchor: (0.45, 0.3),
                seed: 2,
                ..Default::default()
            },
            SynthParams {
                canvas: Canvas::new(512, 768),
                anchor: (0.5, 0.32),
                seed: 8,
                ..Default::default()
            },
        ),
        Preset::Offset => {
            let limb_scale = [1.1; EDGE_COUNT];
            (
                SynthParams {
                    anchor: (0.3, 0.3),
                    seed: 3,
                    ..Default::default()
                },
                SynthParams {
                    anchor: (0.7, 0.33),
                    limb_scale,
                    seed: 9,
                    ..Default::default()
                },
            )
        }
    };
    Fixture {
        preset,
        template: generate(&template).expect("preset parameters are valid"),
        reference: generate_pose(&reference).expect("preset parameters are valid"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::retarget::limb_geom;

    #[test]
    fn bone_lengths_are_exact() {
        let params = SynthParams {
            motion: Motion::Squat,
            frames: 40,
            ..Default::default()
        };
        let seq = generate(&params).unwrap();
        let lengths = params.bone_lengths();
        let topo = LimbTopology::body18();
        for f in seq.frames() {
            for (k, &(p, c)) in topo.edges.iter().enumerate() {
                let g = limb_geom(f.body[p].as_ref().unwrap(), f.body[c].as_ref().unwrap());
                assert!(
                    (g.length - lengths[k]).abs() <= 1e-9 * lengths[k],
                    "edge {k}"
                );
            }
        }
    }

    #[test]
    fn default_motions_stay_in_frame() {
        for motion in [Motion::Walk, Motion::Wave, Motion::Squat] {
            let seq = generate(&SynthParams {
                motion,
                frames: 90,
                ..Default::default()
            })
            .unwrap();
            seq.validate().unwrap();
            for f in seq.frames() {
                assert!(
                    f.keypoints().all(|k| f.canvas.contains(k.x, k.y)),
                    "{motion}"
                );
            }
        }
    }

    #[test]
    fn hand_root_is_body_wrist() {
        let seq = generate(&SynthParams::default()).unwrap();
        for f in seq.frames() {
            assert_eq!(f.hand_right.as_ref().unwrap()[0], f.body[R_WRIST]);
            assert_eq!(f.hand_left.as_ref().unwrap()[0], f.body[L_WRIST]);
        }
    }

    #[test]
    fn scale_two_doubles_every_coordinate() {
        let base = SynthParams {
            motion: Motion::Wave,
            frames: 10,
            ..Default::default()
        };
        let one = generate(&base).unwrap();
        let two = generate(&SynthParams { scale: 2.0, ..base }).unwrap();
        assert_eq!(two.canvas(), Canvas::new(1024, 1536));
        for (a, b) in one.frames().iter().zip(two.frames()) {
            for (p, q) in a.keypoints().zip(b.keypoints()) {
                assert_eq!(q.x, 2.0 * p.x);
                assert_eq!(q.y, 2.0 * p.y);
                assert_eq!(q.score, p.score);
            }
        }
    }

    #[test]
    fn seed_determines_output() {
        let a = generate(&SynthParams::default()).unwrap();
        let b = generate(&SynthParams::default()).unwrap();
        let c = generate(&SynthParams {
            seed: 5,
            ..Default::default()
        })
        .unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn zero_frames_rejected() {
        assert!(generate(&SynthParams {
            frames: 0,
            ..Default::default()
        })
        .is_err());
    }

    #[test]
    fn presets_build() {
        for p in [Preset::Dwarf, Preset::FrameSize, Preset::Offset] {
            let fx = fixture(p);
            fx.template.validate().unwrap();
            fx.reference.validate().unwrap();
        }
        let fs = fixture(Preset::FrameSize);
        assert_eq!(fs.template.canvas(), Canvas::new(1280, 720));
        assert_eq!(fs.reference.canvas, Canvas::new(512, 768));
    }
}

#![allow(dead_code)]

use poseforge::pose_model::{Canvas, Keypoint, Pose, PoseSequence};
use poseforge::synth::{generate, generate_pose, Motion, SynthParams, EDGE_COUNT};
use proptest::prelude::*;

pub fn motion() -> impl Strategy<Value = Motion> {
    prop_oneof![Just(Motion::Walk), Just(Motion::Wave), Just(Motion::Squat)]
}

pub fn multipliers() -> impl Strategy<Value = [f64; EDGE_COUNT]> {
    prop::array::uniform17(0.3f64..=3.0)
}

/// A synthetic template sequence and a reference pose with its own physique.
#[derive(Debug, Clone)]
pub struct Pair {
    pub template: PoseSequence,
    pub reference: Pose,
}

pub fn pair() -> impl Strategy<Value = Pair> {
    (
        motion(),
        motion(),
        1usize..10,
        any::<u64>(),
        any::<u64>(),
        multipliers(),
        0.2f64..0.8,
        0.2f64..0.5,
    )
        .prop_map(|(tm, rm, frames, ts, rs, limb_scale, ax, ay)| {
            let template = generate(&SynthParams {
                motion: tm,
                frames,
                seed: ts,
                ..Default::default()
            })
            .unwrap();
            let reference = generate_pose(&SynthParams {
                motion: rm,
                seed: rs,
                limb_scale,
                anchor: (ax, ay),
                ..Default::default()
            })
            .unwrap();
            Pair {
                template,
                reference,
            }
        })
}

pub fn scale_pose(p: &Pose, s: f64) -> Pose {
    let mut out = p.map_keypoints(|kp| Keypoint::new(kp.x * s, kp.y * s, kp.score));
    out.canvas = Canvas::new(
        ((p.canvas.width as f64 * s).round() as u32).max(1),
        ((p.canvas.height as f64 * s).round() as u32).max(1),
    );
    out
}

pub fn scale_seq(seq: &PoseSequence, s: f64) -> PoseSequence {
    PoseSequence::new(
        seq.frames().iter().map(|f| scale_pose(f, s)).collect(),
        seq.fps(),
    )
    .unwrap()
}

pub fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(1.0)
}

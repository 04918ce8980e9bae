mod common;

use common::{close, pair, scale_pose, scale_seq};
use poseforge::pose_model::{serialize_sequence, PoseSequence, NECK};
use poseforge::retarget::{
    angle_diff, compute_edge_ratios, edge_geom, retarget_sequence, retarget_sequence_detailed,
    EpsilonMode, RatioStrategy, RetargetConfig, UndefinedRatioPolicy,
};
use proptest::prelude::*;

const TOL: f64 = 1e-9;

fn cfg(mode: EpsilonMode) -> RetargetConfig {
    RetargetConfig {
        epsilon_mode: mode,
        ..Default::default()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn limb_lengths_follow_ratios(p in pair()) {
        let c = cfg(EpsilonMode::Zero);
        let run = retarget_sequence_detailed(&p.template, &p.reference, &c).unwrap();
        for (t, o) in p.template.frames().iter().zip(run.sequence.frames()) {
            for k in 0..c.topology.len() {
                let r = run.ratios.ratios[k].unwrap();
                let want = r * edge_geom(t, &c.topology, k).unwrap().length;
                let got = edge_geom(o, &c.topology, k).unwrap().length;
                prop_assert!((got - want).abs() <= TOL * want, "edge {k}: {got} vs {want}");
            }
        }
    }

    #[test]
    fn limb_angles_are_preserved(p in pair()) {
        let c = cfg(EpsilonMode::BaseDiff);
        let out = retarget_sequence(&p.template, &p.reference, &c).unwrap();
        for (t, o) in p.template.frames().iter().zip(out.frames()) {
            for k in 0..c.topology.len() {
                let a = edge_geom(t, &c.topology, k).unwrap().angle;
                let b = edge_geom(o, &c.topology, k).unwrap().angle;
                prop_assert!(angle_diff(a, b) <= TOL);
            }
        }
    }

    #[test]
    fn zero_offset_pins_the_neck(p in pair()) {
        let out = retarget_sequence(&p.template, &p.reference, &cfg(EpsilonMode::Zero)).unwrap();
        for (t, o) in p.template.frames().iter().zip(out.frames()) {
            let (tn, on) = (t.body[NECK].unwrap(), o.body[NECK].unwrap());
            prop_assert_eq!(tn.x.to_bits(), on.x.to_bits());
            prop_assert_eq!(tn.y.to_bits(), on.y.to_bits());
        }
    }

    #[test]
    fn base_diff_offset_is_constant(p in pair()) {
        let out = retarget_sequence(&p.template, &p.reference, &cfg(EpsilonMode::BaseDiff)).unwrap();
        let t0 = p.template.frames()[0].body[NECK].unwrap();
        let rn = p.reference.body[NECK].unwrap();
        let (ex, ey) = (rn.x - t0.x, rn.y - t0.y);
        for (t, o) in p.template.frames().iter().zip(out.frames()) {
            let (tn, on) = (t.body[NECK].unwrap(), o.body[NECK].unwrap());
            prop_assert!(((on.x - tn.x) - ex).abs() <= TOL);
            prop_assert!(((on.y - tn.y) - ey).abs() <= TOL);
        }
        prop_assert_eq!(out.canvas(), p.reference.canvas);
    }

    #[test]
    fn explicit_offset_shifts_the_neck(p in pair(), dx in -50.0f64..50.0, dy in -50.0f64..50.0) {
        let out = retarget_sequence(&p.template, &p.reference, &cfg(EpsilonMode::Explicit { dx, dy })).unwrap();
        for (t, o) in p.template.frames().iter().zip(out.frames()) {
            let (tn, on) = (t.body[NECK].unwrap(), o.body[NECK].unwrap());
            prop_assert!(((on.x - tn.x) - dx).abs() <= TOL);
            prop_assert!(((on.y - tn.y) - dy).abs() <= TOL);
        }
    }

    #[test]
    fn outputs_scale_with_inputs(p in pair(), s in prop::sample::select(vec![0.5, 2.0, 7.3])) {
        for mode in [EpsilonMode::Zero, EpsilonMode::BaseDiff] {
            let c = cfg(mode);
            let out = retarget_sequence(&p.template, &p.reference, &c).unwrap();
            let scaled = retarget_sequence(&scale_seq(&p.template, s), &scale_pose(&p.reference, s), &c).unwrap();
            for (a, b) in out.frames().iter().zip(scaled.frames()) {
                for (x, y) in a.keypoints().zip(b.keypoints()) {
                    prop_assert!(close(x.x * s, y.x, TOL) && close(x.y * s, y.y, TOL), "{x:?}*{s} vs {y:?}");
                }
            }
        }
    }

    #[test]
    fn output_is_connected_and_finite(p in pair()) {
        let out = retarget_sequence(&p.template, &p.reference, &RetargetConfig::default()).unwrap();
        for (t, o) in p.template.frames().iter().zip(out.frames()) {
            prop_assert_eq!(t.keypoints().count(), o.keypoints().count());
            prop_assert!(o.keypoints().all(|kp| kp.is_finite()));
            prop_assert!(o.validate_structure().is_ok());
        }
    }

    #[test]
    fn missing_joint_drops_its_subtree(p in pair(), joint in 2usize..18) {
        let c = RetargetConfig::default();
        let frames: Vec<_> = p.template.frames().iter().cloned().map(|mut f| {
            f.body[joint] = None;
            f
        }).collect();
        let template = PoseSequence::new(frames, p.template.fps()).unwrap();
        let out = retarget_sequence(&template, &p.reference, &c).unwrap();
        let mut gone = [false; 18];
        gone[joint] = true;
        for &(a, b) in &c.topology.edges {
            gone[b] |= gone[a];
        }
        for o in out.frames() {
            for (j, kp) in o.body.iter().enumerate() {
                prop_assert_eq!(kp.is_none(), gone[j], "joint {}", j);
            }
        }
    }

    #[test]
    fn identity_reference_is_a_fixed_point(p in pair()) {
        let c = RetargetConfig {
            ratio_strategy: RatioStrategy::FirstFrame,
            ..Default::default()
        };
        let reference = p.template.frames()[0].clone();
        let out = retarget_sequence(&p.template, &reference, &c).unwrap();
        prop_assert_eq!(serialize_sequence(&out), serialize_sequence(&p.template));
    }

    #[test]
    fn ratios_are_reference_over_template(p in pair()) {
        let c = cfg(EpsilonMode::Zero);
        let ratios = compute_edge_ratios(&p.template, &p.reference, &c).unwrap();
        for k in 0..c.topology.len() {
            let want = edge_geom(&p.reference, &c.topology, k).unwrap().length
                / ratios.template_lengths[k].unwrap();
            prop_assert!(close(ratios.ratios[k].unwrap(), want, 1e-15));
        }
    }
}

#[test]
fn missing_reference_limb_follows_policy() {
    use poseforge::synth::{generate, generate_pose, SynthParams};
    let template = generate(&SynthParams {
        frames: 3,
        ..Default::default()
    })
    .unwrap();
    let mut reference = generate_pose(&SynthParams {
        seed: 5,
        ..Default::default()
    })
    .unwrap();
    // Joint 4 is the right wrist: only the forearm edge loses its ratio.
    reference.body[4] = None;

    let unity = retarget_sequence(&template, &reference, &RetargetConfig::default()).unwrap();
    let c = RetargetConfig::default();
    for (t, o) in template.frames().iter().zip(unity.frames()) {
        let want = edge_geom(t, &c.topology, 2).unwrap().length;
        let got = edge_geom(o, &c.topology, 2).unwrap().length;
        assert!((got - want).abs() <= TOL * want);
    }

    let marked = RetargetConfig {
        undefined_ratio_policy: UndefinedRatioPolicy::MarkMissing,
        ..Default::default()
    };
    let out = retarget_sequence(&template, &reference, &marked).unwrap();
    for o in out.frames() {
        assert!(o.body[4].is_none());
        assert!(o.body[3].is_some());
        assert!(o.hand_right.as_ref().unwrap().iter().all(Option::is_none));
    }
}

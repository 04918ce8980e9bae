use std::fs;

use poseforge::pose_model::{
    parse_sequence, parse_sequence_bytes, parse_sequence_with, serialize_sequence, Canvas, Joint,
    Keypoint, ParseOptions, Pose, PoseSequence, BODY_JOINTS, FACE_JOINTS, HAND_JOINTS,
};
use proptest::prelude::*;

fn joint(c: Canvas) -> impl Strategy<Value = Joint> {
    let (w, h) = (c.width as f64, c.height as f64);
    prop::option::weighted(
        0.85,
        (-0.5 * w..=1.5 * w, -0.5 * h..=1.5 * h, 0.0501f64..=1.0)
            .prop_map(|(x, y, s)| Keypoint::new(x, y, s)),
    )
}

fn part(c: Canvas, n: usize) -> impl Strategy<Value = Option<Vec<Joint>>> {
    prop::option::of(prop::collection::vec(joint(c), n))
}

fn pose(c: Canvas) -> impl Strategy<Value = Pose> {
    (
        prop::collection::vec(joint(c), BODY_JOINTS),
        part(c, HAND_JOINTS),
        part(c, HAND_JOINTS),
        part(c, FACE_JOINTS),
    )
        .prop_map(move |(body, hand_left, hand_right, face)| Pose {
            body: body.try_into().unwrap(),
            hand_left,
            hand_right,
            face,
            canvas: c,
        })
}

fn sequence() -> impl Strategy<Value = PoseSequence> {
    (1u32..4000, 1u32..4000, prop::option::of(1.0f64..240.0))
        .prop_flat_map(|(w, h, fps)| {
            let c = Canvas::new(w, h);
            (prop::collection::vec(pose(c), 1..6), Just(fps))
        })
        .prop_map(|(frames, fps)| PoseSequence::new(frames, fps).unwrap())
}

fn bits(seq: &PoseSequence) -> Vec<Option<(u64, u64, u64)>> {
    seq.frames()
        .iter()
        .flat_map(|f| {
            let parts = [&f.hand_left, &f.hand_right, &f.face];
            f.body
                .iter()
                .chain(parts.into_iter().flatten().flatten())
                .map(|j| j.map(|k| (k.x.to_bits(), k.y.to_bits(), k.score.to_bits())))
                .collect::<Vec<_>>()
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn parse_inverts_serialize(seq in sequence()) {
        let bytes = serialize_sequence(&seq);
        let back = parse_sequence_bytes(&bytes, &ParseOptions::default()).unwrap();
        prop_assert_eq!(&back, &seq);
        prop_assert_eq!(bits(&back), bits(&seq));
        prop_assert_eq!(serialize_sequence(&back), bytes);
    }
}

#[test]
fn files_and_directories_parse_alike() {
    let dir = tempfile::tempdir().unwrap();
    let c = Canvas::new(100, 200);
    let mut a = Pose::empty(c);
    a.body[1] = Some(Keypoint::new(50.0, 60.0, 0.9));
    a.body[2] = Some(Keypoint::new(40.0, 60.0, 0.8));
    let mut b = a.clone();
    b.body[2] = Some(Keypoint::new(41.0, 61.0, 0.7));
    let seq = PoseSequence::new(vec![a, b], None).unwrap();
    let nd = dir.path().join("seq.ndjson");
    fs::write(&nd, serialize_sequence(&seq)).unwrap();
    assert_eq!(parse_sequence(&nd).unwrap(), seq);

    // One OpenPose document per file, read in name order.
    let frames_dir = dir.path().join("frames");
    fs::create_dir(&frames_dir).unwrap();
    for (i, f) in seq.frames().iter().enumerate() {
        let mut flat = Vec::new();
        for j in &f.body {
            match j {
                Some(k) => flat.extend([k.x, k.y, k.score]),
                None => flat.extend([0.0, 0.0, 0.0]),
            }
        }
        let doc = serde_json::json!({
            "version": 1.3,
            "canvas_width": 100,
            "canvas_height": 200,
            "people": [{ "pose_keypoints_2d": flat }],
        });
        fs::write(
            frames_dir.join(format!("{i:03}_keypoints.json")),
            doc.to_string(),
        )
        .unwrap();
    }
    let opts = ParseOptions {
        units: poseforge::pose_model::CoordUnits::Pixels,
        ..Default::default()
    };
    assert_eq!(parse_sequence_with(&frames_dir, &opts).unwrap(), seq);
}

#[test]
fn missing_file_is_an_io_error() {
    let err = parse_sequence(std::path::Path::new("/nonexistent/seq.ndjson")).unwrap_err();
    assert!(err.is_io());
}

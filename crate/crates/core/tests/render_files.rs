use std::fs;

use poseforge::render::{render_pose, render_sequence, RenderStyle};
use poseforge::synth::{generate, SynthParams};

#[test]
fn frames_are_numbered_and_reproducible() {
    let seq = generate(&SynthParams {
        frames: 12,
        canvas: poseforge::Canvas::new(128, 192),
        ..Default::default()
    })
    .unwrap();
    let style = RenderStyle::default();
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let files = render_sequence(&seq, &style, a.path()).unwrap();
    render_sequence(&seq, &style, b.path()).unwrap();

    let mut names: Vec<_> = fs::read_dir(a.path())
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    let want: Vec<_> = (0..12).map(|i| format!("frame_{i:05}.png")).collect();
    assert_eq!(names, want);
    assert_eq!(files.len(), 12);

    for (i, path) in files.iter().enumerate() {
        let bytes = fs::read(path).unwrap();
        assert_eq!(bytes, fs::read(b.path().join(&want[i])).unwrap());
        let decoded = image::load_from_memory(&bytes).unwrap().to_rgb8();
        assert_eq!(decoded, render_pose(&seq.frames()[i], &style).unwrap());
    }
}

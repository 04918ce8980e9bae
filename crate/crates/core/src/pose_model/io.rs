//! OpenPose JSON ingestion and the internal NDJSON sequence format.
//!
//! Internal NDJSON holds one frame per line:
//!
//! ```text
//! {"canvas":[w,h],"body":[[x,y,s]x18],"hand_l":[[x,y,s]x21]|null,"hand_r":...|null,"face":[[x,y,s]x68]|null}
//! ```
//!
//! Coordinates are pixels. Missing joints are written as `[-1,-1,0]`. An
//! optional `"fps"` key is appended when the sequence carries a frame rate.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{
    Canvas, Joint, Keypoint, Pose, PoseSequence, BODY_JOINTS, DEFAULT_SCORE_THRESHOLD, FACE_JOINTS,
    HAND_JOINTS,
};
use crate::error::{Error, Result};

/// BODY-25 index for each BODY-18 joint. BODY-25 inserts mid-hip at 8 and
/// appends six foot points (19..=24); both are dropped.
pub const BODY25_TO_BODY18: [usize; BODY_JOINTS] = [
    0, 1, 2, 3, 4, 5, 6, 7, 9, 10, 11, 12, 13, 14, 15, 16, 17, 18,
];

/// How raw detector coordinates are interpreted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoordUnits {
    /// Normalized when every confident coordinate lies in `[0, 1]`, pixels otherwise.
    #[default]
    Auto,
    Pixels,
    Normalized,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParseOptions {
    pub score_threshold: f64,
    /// Applies to OpenPose documents only; internal NDJSON is always pixels.
    pub units: CoordUnits,
    /// Canvas for OpenPose documents that do not carry `canvas_width`/`canvas_height`.
    pub canvas: Option<Canvas>,
    /// Enforce the `[-0.5, 1.5] x canvas` coordinate range.
    pub check_bounds: bool,
}

impl Default for ParseOptions {
    fn default() -> Self {
        ParseOptions {
            score_threshold: DEFAULT_SCORE_THRESHOLD,
            units: CoordUnits::Auto,
            canvas: None,
            check_bounds: true,
        }
    }
}

impl ParseOptions {
    /// Options for reading tool outputs, whose retargeted joints may leave the canvas range.
    pub fn lenient() -> Self {
        ParseOptions {
            check_bounds: false,
            ..Default::default()
        }
    }
}

/// A parsed frame together with non-fatal diagnostics.
#[derive(Debug, Clone)]
pub struct ParsedFrame {
    pub pose: Pose,
    pub warnings: Vec<String>,
}

/// Parses a single-frame OpenPose document with default options, logging warnings.
pub fn parse_openpose_frame(text: &[u8], canvas: Canvas) -> Result<Pose> {
    let opts = ParseOptions {
        canvas: Some(canvas),
        ..Default::default()
    };
    let parsed = parse_openpose_frame_with_diagnostics(text, canvas, &opts)?;
    for w in &parsed.warnings {
        log::warn!("{w}");
    }
    Ok(parsed.pose)
}

pub fn parse_openpose_frame_with_diagnostics(
    text: &[u8],
    canvas: Canvas,
    opts: &ParseOptions,
) -> Result<ParsedFrame> {
    let doc: Value = serde_json::from_slice(text).map_err(|e| Error::parse("$", e))?;
    openpose_from_value(&doc, canvas, opts)
}

fn openpose_from_value(doc: &Value, canvas: Canvas, opts: &ParseOptions) -> Result<ParsedFrame> {
    if canvas.width == 0 || canvas.height == 0 {
        return Err(Error::Contract(format!("canvas {canvas} must be positive")));
    }
    let people = doc
        .get("people")
        .ok_or_else(|| Error::parse("$.people", "missing field"))?
        .as_array()
        .ok_or_else(|| Error::parse("$.people", "expected an array"))?;
    let person = people.first().ok_or(Error::EmptyPose)?;
    let mut warnings = Vec::new();
    if people.len() > 1 {
        warnings.push(format!(
            "document has {} people; using person 0 and ignoring the rest",
            people.len()
        ));
    }

    let body_raw = read_triples(person, "pose_keypoints_2d")?
        .ok_or_else(|| Error::parse("$.people[0].pose_keypoints_2d", "missing field"))?;
    let body_raw: Vec<[f64; 3]> = match body_raw.len() {
        18 => body_raw,
        25 => BODY25_TO_BODY18.iter().map(|&i| body_raw[i]).collect(),
        n => {
            return Err(Error::parse(
                "$.people[0].pose_keypoints_2d",
                format!("expected 18 or 25 keypoints, got {n}"),
            ))
        }
    };
    let hand_l = read_part(person, "hand_left_keypoints_2d", HAND_JOINTS)?;
    let hand_r = read_part(person, "hand_right_keypoints_2d", HAND_JOINTS)?;
    let face = read_part(person, "face_keypoints_2d", FACE_JOINTS)?;

    let normalized = match opts.units {
        CoordUnits::Pixels => false,
        CoordUnits::Normalized => true,
        CoordUnits::Auto => {
            let mut confident = body_raw
                .iter()
                .chain(hand_l.iter().flatten())
                .chain(hand_r.iter().flatten())
                .chain(face.iter().flatten())
                .filter(|t| t[2] > opts.score_threshold && t[0] >= 0.0 && t[1] >= 0.0)
                .peekable();
            confident.peek().is_some() && confident.all(|t| t[0] <= 1.0 && t[1] <= 1.0)
        }
    };
    let (sx, sy) = if normalized {
        (canvas.width as f64, canvas.height as f64)
    } else {
        (1.0, 1.0)
    };
    let to_joint = |t: &[f64; 3]| -> Joint {
        let missing = t[2] <= opts.score_threshold || (normalized && (t[0] < 0.0 || t[1] < 0.0));
        (!missing).then(|| Keypoint::new(t[0] * sx, t[1] * sy, t[2]))
    };
    let part = |raw: Option<Vec<[f64; 3]>>| raw.map(|v| v.iter().map(to_joint).collect::<Vec<_>>());

    let mut body = [None; BODY_JOINTS];
    for (slot, t) in body.iter_mut().zip(&body_raw) {
        *slot = to_joint(t);
    }
    let pose = Pose {
        body,
        hand_left: part(hand_l),
        hand_right: part(hand_r),
        face: part(face),
        canvas,
    };
    if opts.check_bounds {
        pose.validate()?;
    } else {
        pose.validate_structure()?;
    }
    Ok(ParsedFrame { pose, warnings })
}

fn read_triples(person: &Value, key: &str) -> Result<Option<Vec<[f64; 3]>>> {
    let path = format!("$.people[0].{key}");
    let Some(v) = person.get(key) else {
        return Ok(None);
    };
    if v.is_null() {
        return Ok(None);
    }
    let arr = v
        .as_array()
        .ok_or_else(|| Error::parse(&path, "expected an array of numbers"))?;
    if arr.is_empty() {
        return Ok(None);
    }
    if arr.len() % 3 != 0 {
        return Err(Error::parse(
            &path,
            format!("length {} is not a multiple of 3", arr.len()),
        ));
    }
    let mut out = Vec::with_capacity(arr.len() / 3);
    for (i, chunk) in arr.chunks(3).enumerate() {
        let mut t = [0.0; 3];
        for (j, n) in chunk.iter().enumerate() {
            t[j] = n.as_f64().filter(|x| x.is_finite()).ok_or_else(|| {
                Error::parse(format!("{path}[{}]", 3 * i + j), "expected a finite number")
            })?;
        }
        out.push(t);
    }
    Ok(Some(out))
}

fn read_part(person: &Value, key: &str, expected: usize) -> Result<Option<Vec<[f64; 3]>>> {
    let part = read_triples(person, key)?;
    if let Some(p) = &part {
        if p.len() != expected {
            return Err(Error::parse(
                format!("$.people[0].{key}"),
                format!("expected {expected} keypoints, got {}", p.len()),
            ));
        }
    }
    Ok(part)
}

#[derive(Serialize, Deserialize)]
struct FrameRecord {
    canvas: [u32; 2],
    body: Vec<[f64; 3]>,
    hand_l: Option<Vec<[f64; 3]>>,
    hand_r: Option<Vec<[f64; 3]>>,
    face: Option<Vec<[f64; 3]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    fps: Option<f64>,
}

const MISSING_TRIPLE: [f64; 3] = [-1.0, -1.0, 0.0];

fn encode(j: &Joint) -> [f64; 3] {
    match j {
        Some(kp) => [kp.x, kp.y, kp.score],
        None => MISSING_TRIPLE,
    }
}

fn encode_part(part: &Option<Vec<Joint>>) -> Option<Vec<[f64; 3]>> {
    part.as_ref().map(|v| v.iter().map(encode).collect())
}

impl FrameRecord {
    fn from_pose(pose: &Pose, fps: Option<f64>) -> Self {
        FrameRecord {
            canvas: [pose.canvas.width, pose.canvas.height],
            body: pose.body.iter().map(encode).collect(),
            hand_l: encode_part(&pose.hand_left),
            hand_r: encode_part(&pose.hand_right),
            face: encode_part(&pose.face),
            fps,
        }
    }

    fn into_pose(self, threshold: f64, loc: &str) -> Result<Pose> {
        let decode = |t: &[f64; 3]| (t[2] > threshold).then(|| Keypoint::new(t[0], t[1], t[2]));
        if self.body.len() != BODY_JOINTS {
            return Err(Error::parse(
                format!("{loc}.body"),
                format!("expected {BODY_JOINTS} keypoints, got {}", self.body.len()),
            ));
        }
        let mut body = [None; BODY_JOINTS];
        for (slot, t) in body.iter_mut().zip(&self.body) {
            *slot = decode(t);
        }
        let part =
            |raw: Option<Vec<[f64; 3]>>, key: &str, n: usize| -> Result<Option<Vec<Joint>>> {
                match raw {
                    None => Ok(None),
                    Some(v) if v.len() == n => Ok(Some(v.iter().map(decode).collect())),
                    Some(v) => Err(Error::parse(
                        format!("{loc}.{key}"),
                        format!("expected {n} keypoints, got {}", v.len()),
                    )),
                }
            };
        if self.canvas[0] == 0 || self.canvas[1] == 0 {
            return Err(Error::parse(
                format!("{loc}.canvas"),
                "dimensions must be positive",
            ));
        }
        Ok(Pose {
            body,
            hand_left: part(self.hand_l, "hand_l", HAND_JOINTS)?,
            hand_right: part(self.hand_r, "hand_r", HAND_JOINTS)?,
            face: part(self.face, "face", FACE_JOINTS)?,
            canvas: Canvas::new(self.canvas[0], self.canvas[1]),
        })
    }
}

/// One internal-format line (without the trailing newline).
pub fn serialize_pose_line(pose: &Pose) -> String {
    serde_json::to_string(&FrameRecord::from_pose(pose, None)).expect("frame record serializes")
}

/// Serializes a sequence as internal NDJSON, one line per frame.
pub fn serialize_sequence(seq: &PoseSequence) -> Vec<u8> {
    let mut out = Vec::new();
    for frame in seq.frames() {
        let rec = FrameRecord::from_pose(frame, seq.fps());
        serde_json::to_writer(&mut out, &rec).expect("frame record serializes");
        out.push(b'\n');
    }
    out
}

/// Parses internal NDJSON bytes.
pub fn parse_sequence_bytes(bytes: &[u8], opts: &ParseOptions) -> Result<PoseSequence> {
    let text = std::str::from_utf8(bytes).map_err(|e| Error::parse("ndjson", e))?;
    let mut frames = Vec::new();
    let mut fps = None;
    for (line_no, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let loc = format!("line {}", line_no + 1);
        let rec: FrameRecord = serde_json::from_str(line).map_err(|e| Error::parse(&loc, e))?;
        if frames.is_empty() {
            fps = rec.fps;
        } else if rec.fps != fps {
            return Err(Error::parse(
                format!("{loc}.fps"),
                "fps differs from the first frame",
            ));
        }
        frames.push(rec.into_pose(opts.score_threshold, &loc)?);
    }
    if frames.is_empty() {
        return Err(Error::EmptySequence("NDJSON input has no frames".into()));
    }
    finish(frames, fps, opts)
}

fn finish(frames: Vec<Pose>, fps: Option<f64>, opts: &ParseOptions) -> Result<PoseSequence> {
    let seq = PoseSequence::new(frames, fps)?;
    if opts.check_bounds {
        seq.validate()?;
    } else {
        seq.validate_structure()?;
    }
    Ok(seq)
}

/// Reads a sequence with default options.
pub fn parse_sequence(path: &Path) -> Result<PoseSequence> {
    parse_sequence_with(path, &ParseOptions::default())
}

/// Reads a sequence from a directory of per-frame JSON files (sorted by name)
/// or from a single NDJSON file.
pub fn parse_sequence_with(path: &Path, opts: &ParseOptions) -> Result<PoseSequence> {
    let meta = fs::metadata(path).map_err(|e| Error::io(path, e))?;
    if meta.is_dir() {
        let mut files: Vec<_> = fs::read_dir(path)
            .map_err(|e| Error::io(path, e))?
            .filter_map(|entry| entry.ok().map(|e| e.path()))
            .filter(|p| {
                p.is_file()
                    && p.extension()
                        .is_some_and(|x| x.eq_ignore_ascii_case("json"))
            })
            .collect();
        files.sort();
        if files.is_empty() {
            return Err(Error::EmptySequence(format!(
                "no .json frames in {}",
                path.display()
            )));
        }
        let mut frames = Vec::with_capacity(files.len());
        for (i, file) in files.iter().enumerate() {
            let bytes = fs::read(file).map_err(|e| Error::io(file, e))?;
            let pose = parse_frame_document(&bytes, opts, &file.display().to_string())
                .map_err(|e| with_frame(e, i))?;
            frames.push(pose);
        }
        return finish(frames, None, opts);
    }

    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if let Ok(doc) = serde_json::from_slice::<Value>(&bytes) {
        if doc.get("people").is_some() {
            let pose = parse_frame_document(&bytes, opts, &path.display().to_string())?;
            return finish(vec![pose], None, opts);
        }
    }
    parse_sequence_bytes(&bytes, opts)
}

/// Reads a single pose: the first frame of any input [`parse_sequence_with`] accepts.
pub fn parse_pose_file(path: &Path, opts: &ParseOptions) -> Result<Pose> {
    let seq = parse_sequence_with(path, opts)?;
    if seq.len() > 1 {
        log::warn!(
            "{} holds {} frames; using frame 0 as the pose",
            path.display(),
            seq.len()
        );
    }
    Ok(seq.into_frames().swap_remove(0))
}

/// A per-frame file: either an OpenPose document or one internal-format record.
fn parse_frame_document(bytes: &[u8], opts: &ParseOptions, loc: &str) -> Result<Pose> {
    let doc: Value = serde_json::from_slice(bytes).map_err(|e| Error::parse(loc, e))?;
    if doc.get("people").is_some() {
        let canvas = document_canvas(&doc).or(opts.canvas).ok_or_else(|| {
            Error::parse(loc, "no canvas_width/canvas_height and no canvas given")
        })?;
        let parsed = openpose_from_value(&doc, canvas, opts)?;
        for w in &parsed.warnings {
            log::warn!("{loc}: {w}");
        }
        Ok(parsed.pose)
    } else {
        let rec: FrameRecord = serde_json::from_value(doc).map_err(|e| Error::parse(loc, e))?;
        rec.into_pose(opts.score_threshold, loc)
    }
}

fn document_canvas(doc: &Value) -> Option<Canvas> {
    let w = doc.get("canvas_width")?.as_u64()?;
    let h = doc.get("canvas_height")?.as_u64()?;
    (w > 0 && h > 0 && w <= u32::MAX as u64 && h <= u32::MAX as u64)
        .then(|| Canvas::new(w as u32, h as u32))
}

fn with_frame(e: Error, frame: usize) -> Error {
    match e {
        Error::Validation { joint, message, .. } => Error::Validation {
            frame: Some(frame),
            joint,
            message,
        },
        other => Error::Frame {
            frame,
            source: Box::new(other),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pose_model::BODY18_NAMES;

    fn flat(triples: &[[f64; 3]]) -> Vec<f64> {
        triples.iter().flatten().copied().collect()
    }

    fn doc(body: &[[f64; 3]]) -> Vec<u8> {
        serde_json::to_vec(&serde_json::json!({"people": [{"pose_keypoints_2d": flat(body)}]}))
            .unwrap()
    }

    fn body18() -> Vec<[f64; 3]> {
        (0..18)
            .map(|i| [10.0 + i as f64, 20.0 + 2.0 * i as f64, 0.9])
            .collect()
    }

    #[test]
    fn parses_minimal_frame() {
        let mut b = body18();
        b[1] = [100.0, 50.0, 0.9];
        let pose = parse_openpose_frame(&doc(&b), Canvas::new(512, 768)).unwrap();
        assert_eq!(pose.body[1], Some(Keypoint::new(100.0, 50.0, 0.9)));
        assert_eq!(pose.body[5], Some(Keypoint::new(15.0, 30.0, 0.9)));
        assert!(pose.hand_left.is_none() && pose.face.is_none());
    }

    #[test]
    fn zero_score_is_missing() {
        let mut b = body18();
        b[4] = [0.0, 0.0, 0.0];
        let pose = parse_openpose_frame(&doc(&b), Canvas::new(512, 768)).unwrap();
        assert_eq!(pose.body[4], None);
    }

    #[test]
    fn threshold_is_inclusive() {
        let mut b = body18();
        b[2] = [30.0, 30.0, DEFAULT_SCORE_THRESHOLD];
        b[3] = [30.0, 30.0, 0.051];
        let pose = parse_openpose_frame(&doc(&b), Canvas::new(512, 768)).unwrap();
        assert_eq!(pose.body[2], None);
        assert!(pose.body[3].is_some());
    }

    // Published BODY-25 joint order, written out by name.
    const BODY25_NAMES: [&str; 25] = [
        "nose",
        "neck",
        "right_shoulder",
        "right_elbow",
        "right_wrist",
        "left_shoulder",
        "left_elbow",
        "left_wrist",
        "mid_hip",
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
        "left_big_toe",
        "left_small_toe",
        "left_heel",
        "right_big_toe",
        "right_small_toe",
        "right_heel",
    ];

    #[test]
    fn body25_maps_by_joint_name() {
        let b25: Vec<[f64; 3]> = (0..25)
            .map(|i| [i as f64 * 3.0, 100.0 + i as f64, 0.8])
            .collect();
        let pose = parse_openpose_frame(&doc(&b25), Canvas::new(512, 768)).unwrap();
        for (i18, name) in BODY18_NAMES.iter().enumerate() {
            let i25 = BODY25_NAMES.iter().position(|n| n == name).unwrap();
            assert_eq!(BODY25_TO_BODY18[i18], i25, "{name}");
            let t = b25[i25];
            assert_eq!(
                pose.body[i18],
                Some(Keypoint::new(t[0], t[1], t[2])),
                "{name}"
            );
        }
    }

    #[test]
    fn normalized_input_is_denormalized() {
        let mut b: Vec<[f64; 3]> = (0..18).map(|i| [i as f64 / 20.0, 0.5, 0.9]).collect();
        b[9] = [-1.0, -1.0, 0.9];
        let pose = parse_openpose_frame(&doc(&b), Canvas::new(200, 100)).unwrap();
        assert_eq!(pose.body[10], Some(Keypoint::new(100.0, 50.0, 0.9)));
        assert_eq!(pose.body[9], None);
    }

    #[test]
    fn zero_people_is_empty_pose() {
        let err = parse_openpose_frame(br#"{"people":[]}"#, Canvas::new(10, 10)).unwrap_err();
        assert!(matches!(err, Error::EmptyPose));
    }

    #[test]
    fn multiple_people_warns_and_uses_first() {
        let b = flat(&body18());
        let other: Vec<f64> = vec![1.0; 54];
        let text = serde_json::to_vec(&serde_json::json!({
            "people": [{"pose_keypoints_2d": b}, {"pose_keypoints_2d": other}]
        }))
        .unwrap();
        let parsed = parse_openpose_frame_with_diagnostics(
            &text,
            Canvas::new(512, 768),
            &ParseOptions::default(),
        )
        .unwrap();
        assert_eq!(parsed.warnings.len(), 1);
        assert_eq!(parsed.pose.body[0], Some(Keypoint::new(10.0, 20.0, 0.9)));
    }

    #[test]
    fn malformed_errors_name_the_path() {
        let err = parse_openpose_frame(
            br#"{"people":[{"pose_keypoints_2d":[1,2]}]}"#,
            Canvas::new(10, 10),
        )
        .unwrap_err();
        assert!(err.to_string().contains("pose_keypoints_2d"), "{err}");
        let err = parse_openpose_frame(
            br#"{"people":[{"pose_keypoints_2d":[1,2,"x"]}]}"#,
            Canvas::new(10, 10),
        )
        .unwrap_err();
        assert!(err.to_string().contains("pose_keypoints_2d[2]"), "{err}");
        let err = parse_openpose_frame(br#"{"persons":[]}"#, Canvas::new(10, 10)).unwrap_err();
        assert!(err.to_string().contains("$.people"), "{err}");
    }

    #[test]
    fn hand_part_must_have_21_points() {
        let text = serde_json::to_vec(&serde_json::json!({"people": [{
            "pose_keypoints_2d": flat(&body18()),
            "hand_left_keypoints_2d": vec![5.0; 60],
        }]}))
        .unwrap();
        let err = parse_openpose_frame(&text, Canvas::new(512, 768)).unwrap_err();
        assert!(err.to_string().contains("hand_left_keypoints_2d"), "{err}");
    }

    #[test]
    fn missing_encodes_as_negative_one_zero() {
        let mut p = Pose::empty(Canvas::new(64, 64));
        p.body[1] = Some(Keypoint::new(3.5, 4.25, 1.0));
        let line = serialize_pose_line(&p);
        assert!(
            line.starts_with(r#"{"canvas":[64,64],"body":[[-1.0,-1.0,0.0],[3.5,4.25,1.0]"#),
            "{line}"
        );
        assert!(
            line.ends_with(r#""hand_l":null,"hand_r":null,"face":null}"#),
            "{line}"
        );
        let seq = PoseSequence::new(vec![p.clone()], None).unwrap();
        let back =
            parse_sequence_bytes(&serialize_sequence(&seq), &ParseOptions::default()).unwrap();
        assert_eq!(back.frames()[0], p);
    }

    #[test]
    fn ndjson_line_count_matches_frames() {
        let frames = vec![Pose::empty(Canvas::new(8, 8)); 100];
        let bytes = serialize_sequence(&PoseSequence::new(frames, Some(30.0)).unwrap());
        assert_eq!(bytes.iter().filter(|&&b| b == b'\n').count(), 100);
        let back = parse_sequence_bytes(&bytes, &ParseOptions::default()).unwrap();
        assert_eq!(back.fps(), Some(30.0));
    }

    #[test]
    fn empty_ndjson_is_an_error() {
        let err = parse_sequence_bytes(b"\n\n", &ParseOptions::default()).unwrap_err();
        assert!(matches!(err, Error::EmptySequence(_)));
    }
}

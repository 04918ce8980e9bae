//! Alignment quality: re-measures output geometry against what the adapter
//! should have produced.
//!
//! For every edge-frame pair where both poses have both endpoints, the
//! expected output limb is the template limb scaled by the edge's effective
//! ratio, and the expected neck is the template neck plus the run's offset.
//!
//! The JSON report schema (key order is fixed):
//!
//! ```text
//! {
//!   "per_edge_length_rel_error": [f64; edges],   mean |actual - expected| / expected
//!   "angle_abs_error_rad": [f64; edges],         mean wrapped angle difference, in [0, pi]
//!   "mean_length_rel_error": f64,                over all evaluated edge-frame pairs
//!   "max_length_rel_error": f64,
//!   "max_angle_abs_error_rad": f64,
//!   "root_offset_drift": f64,                    pixels, max over frames
//!   "expected_offset": [dx, dy],
//!   "frames_evaluated": usize,
//!   "coverage": f64                              evaluated pairs / (frames * edges)
//! }
//! ```

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pose_model::PoseSequence;
use crate::retarget::{angle_diff, limb_geom, resolve_offset, EdgeRatios, RetargetConfig};
use crate::Pose;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignmentReport {
    pub per_edge_length_rel_error: Vec<f64>,
    pub angle_abs_error_rad: Vec<f64>,
    pub mean_length_rel_error: f64,
    pub max_length_rel_error: f64,
    pub max_angle_abs_error_rad: f64,
    pub root_offset_drift: f64,
    pub expected_offset: [f64; 2],
    pub frames_evaluated: usize,
    pub coverage: f64,
}

impl AlignmentReport {
    /// Largest of the length, angle, and drift errors.
    pub fn worst_error(&self) -> f64 {
        self.max_length_rel_error
            .max(self.max_angle_abs_error_rad)
            .max(self.root_offset_drift)
    }
}

pub fn evaluate(
    template: &PoseSequence,
    output: &PoseSequence,
    reference: &Pose,
    ratios: &EdgeRatios,
    cfg: &RetargetConfig,
) -> Result<AlignmentReport> {
    if template.len() != output.len() {
        return Err(Error::Contract(format!(
            "template has {} frames, output has {}",
            template.len(),
            output.len()
        )));
    }
    let topo = &cfg.topology;
    if ratios.len() != topo.len() {
        return Err(Error::Contract(format!(
            "edge ratios cover {} edges but topology `{}` has {}",
            ratios.len(),
            topo.name,
            topo.len()
        )));
    }
    let root = topo.root();
    let first_root = template.frames().iter().find_map(|f| f.body[root].as_ref());
    let (ex, ey) = resolve_offset(first_root, reference, cfg)?;

    let n_edges = topo.len();
    let mut len_sum = vec![0.0; n_edges];
    let mut ang_sum = vec![0.0; n_edges];
    let mut counts = vec![0usize; n_edges];
    let (mut max_len, mut max_ang, mut drift) = (0.0f64, 0.0f64, 0.0f64);
    let mut frames_evaluated = 0;

    for (tf, of) in template.frames().iter().zip(output.frames()) {
        let mut any = false;
        if let (Some(t), Some(o)) = (&tf.body[root], &of.body[root]) {
            let d = ((o.x - t.x) - ex).hypot((o.y - t.y) - ey);
            drift = drift.max(d);
            any = true;
        }
        for (k, &(p, c)) in topo.edges.iter().enumerate() {
            let (Some(tp), Some(tc), Some(op), Some(oc)) =
                (&tf.body[p], &tf.body[c], &of.body[p], &of.body[c])
            else {
                continue;
            };
            let Some(r) = ratios.effective(k, cfg.undefined_ratio_policy) else {
                continue;
            };
            let tg = limb_geom(tp, tc);
            let expected = r * tg.length;
            if tg.length < cfg.epsilon_len || expected <= 0.0 {
                continue;
            }
            let og = limb_geom(op, oc);
            let rel = (og.length - expected).abs() / expected;
            let ang = angle_diff(og.angle, tg.angle);
            len_sum[k] += rel;
            ang_sum[k] += ang;
            counts[k] += 1;
            max_len = max_len.max(rel);
            max_ang = max_ang.max(ang);
            any = true;
        }
        if any {
            frames_evaluated += 1;
        }
    }

    let mean = |sums: &[f64]| -> Vec<f64> {
        sums.iter()
            .zip(&counts)
            .map(|(&s, &n)| if n == 0 { 0.0 } else { s / n as f64 })
            .collect()
    };
    let pairs: usize = counts.iter().sum();
    let total = template.len() * n_edges;
    Ok(AlignmentReport {
        per_edge_length_rel_error: mean(&len_sum),
        angle_abs_error_rad: mean(&ang_sum),
        mean_length_rel_error: if pairs == 0 {
            0.0
        } else {
            len_sum.iter().sum::<f64>() / pairs as f64
        },
        max_length_rel_error: max_len,
        max_angle_abs_error_rad: max_ang,
        root_offset_drift: drift,
        expected_offset: [ex, ey],
        frames_evaluated,
        coverage: if total == 0 {
            0.0
        } else {
            pairs as f64 / total as f64
        },
    })
}

/// Pretty-printed JSON with a fixed key order.
pub fn report_to_json(report: &AlignmentReport) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(report).expect("report serializes");
    out.push(b'\n');
    out
}

pub fn report_from_json(bytes: &[u8]) -> Result<AlignmentReport> {
    serde_json::from_slice(bytes).map_err(|e| Error::parse("report", e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pose_model::{Canvas, Keypoint, LimbTopology};
    use crate::retarget::{compute_edge_ratios, retarget_sequence_detailed};

    fn kp(x: f64, y: f64) -> Keypoint {
        Keypoint::new(x, y, 1.0)
    }

    fn two_limb(points: [(f64, f64); 3]) -> Pose {
        let mut p = Pose::empty(Canvas::new(100, 100));
        for (j, (x, y)) in [1usize, 2, 3].into_iter().zip(points) {
            p.body[j] = Some(kp(x, y));
        }
        p
    }

    fn cfg() -> RetargetConfig {
        RetargetConfig {
            topology: LimbTopology::new("two", vec![(1, 2), (2, 3)]).unwrap(),
            ..Default::default()
        }
    }

    #[test]
    fn adapter_output_scores_zero() {
        let tpl = PoseSequence::new(
            vec![
                two_limb([(10.0, 10.0), (15.0, 10.0), (15.0, 13.0)]),
                two_limb([(12.0, 10.0), (16.0, 13.0), (16.0, 16.0)]),
            ],
            None,
        )
        .unwrap();
        let reference = two_limb([(50.0, 50.0), (60.0, 50.0), (60.0, 59.0)]);
        let run = retarget_sequence_detailed(&tpl, &reference, &cfg()).unwrap();
        let rep = evaluate(&tpl, &run.sequence, &reference, &run.ratios, &cfg()).unwrap();
        assert!(rep.max_length_rel_error <= 1e-9);
        assert!(rep.max_angle_abs_error_rad <= 1e-9);
        assert!(rep.root_offset_drift <= 1e-9);
        assert_eq!(rep.coverage, 1.0);
        assert_eq!(rep.frames_evaluated, 2);
    }

    #[test]
    fn unaligned_output_against_longer_reference() {
        // Template limbs of length 5; reference limbs of length 10.
        // Expected output length 10, actual (raw template) 5 => |5 - 10| / 10 = 0.5.
        let tpl = PoseSequence::new(
            vec![two_limb([(10.0, 10.0), (15.0, 10.0), (15.0, 15.0)])],
            None,
        )
        .unwrap();
        let reference = two_limb([(50.0, 50.0), (60.0, 50.0), (60.0, 60.0)]);
        let ratios = compute_edge_ratios(&tpl, &reference, &cfg()).unwrap();
        let rep = evaluate(&tpl, &tpl, &reference, &ratios, &cfg()).unwrap();
        let oracle = (5.0f64 - 10.0).abs() / 10.0;
        assert_eq!(rep.per_edge_length_rel_error, vec![oracle, oracle]);
        assert_eq!(rep.mean_length_rel_error, oracle);
        assert_eq!(rep.max_angle_abs_error_rad, 0.0);
    }

    #[test]
    fn empty_overlap_reports_zero_coverage() {
        let mut empty = Pose::empty(Canvas::new(100, 100));
        empty.body[1] = None;
        let tpl = PoseSequence::new(vec![empty.clone()], None).unwrap();
        let reference = two_limb([(50.0, 50.0), (60.0, 50.0), (60.0, 60.0)]);
        let ratios = EdgeRatios {
            ratios: vec![Some(1.0); 2],
            template_lengths: vec![None; 2],
            reference_lengths: vec![Some(10.0); 2],
            strategy: Default::default(),
            hand_left: None,
            hand_right: None,
        };
        let rep = evaluate(&tpl, &tpl, &reference, &ratios, &cfg()).unwrap();
        assert_eq!(rep.coverage, 0.0);
        assert_eq!(rep.frames_evaluated, 0);
        assert_eq!(rep.worst_error(), 0.0);
    }

    #[test]
    fn frame_count_mismatch_is_contract_error() {
        let p = two_limb([(10.0, 10.0), (15.0, 10.0), (15.0, 15.0)]);
        let one = PoseSequence::new(vec![p.clone()], None).unwrap();
        let two = PoseSequence::new(vec![p.clone(), p.clone()], None).unwrap();
        let ratios = compute_edge_ratios(&one, &p, &cfg()).unwrap();
        assert!(matches!(
            evaluate(&one, &two, &p, &ratios, &cfg()),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn json_round_trip_and_stable_bytes() {
        let rep = AlignmentReport {
            per_edge_length_rel_error: vec![0.1, 1.0 / 3.0],
            angle_abs_error_rad: vec![0.0, 2e-17],
            mean_length_rel_error: 0.2,
            max_length_rel_error: 0.3,
            max_angle_abs_error_rad: 2e-17,
            root_offset_drift: 0.0,
            expected_offset: [1.5, -2.0],
            frames_evaluated: 3,
            coverage: 0.75,
        };
        let a = report_to_json(&rep);
        let b = report_to_json(&rep.clone());
        assert_eq!(a, b);
        assert_eq!(report_from_json(&a).unwrap(), rep);
        let text = String::from_utf8(a).unwrap();
        assert!(!text.contains("NaN") && !text.contains("null"));
        assert!(text.find("per_edge_length_rel_error").unwrap() < text.find("coverage").unwrap());
    }
}

//! Skeleton-based pose adapter.
//!
//! A template sequence supplies motion (per-frame limb directions and the
//! global trajectory); a reference pose supplies identity (limb lengths and,
//! optionally, position). Per-edge ratios `r_k = reference_length / template_length`
//! are computed once, then every frame is rebuilt by walking the topology from
//! the neck: each child is placed at its already-updated parent plus the
//! template limb vector scaled by `r_k`.
//!
//! Hand and face handling is not pinned down by the method this follows; the
//! policies here ([`HandScaleSource`], `retarget_face`) are explicit choices.

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pose_model::{
    Canvas, Joint, Keypoint, LimbTopology, Pose, PoseSequence, L_WRIST, NOSE, R_WRIST,
};

/// Template limbs shorter than this many pixels have no usable direction.
pub const DEFAULT_EPSILON_LEN: f64 = 1e-6;

/// Base-coordinate offset applied at the skeleton root.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EpsilonMode {
    /// Keep the template's screen position.
    #[default]
    Zero,
    /// Move the motion onto the reference character's neck position.
    BaseDiff,
    Explicit {
        dx: f64,
        dy: f64,
    },
}

impl fmt::Display for EpsilonMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EpsilonMode::Zero => f.write_str("zero"),
            EpsilonMode::BaseDiff => f.write_str("base_diff"),
            EpsilonMode::Explicit { dx, dy } => write!(f, "{dx},{dy}"),
        }
    }
}

impl std::str::FromStr for EpsilonMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "zero" | "0" => Ok(EpsilonMode::Zero),
            "base-diff" | "base_diff" => Ok(EpsilonMode::BaseDiff),
            other => {
                let (dx, dy) = other
                    .split_once(',')
                    .ok_or_else(|| format!("expected zero, base-diff or dx,dy; got `{other}`"))?;
                let dx: f64 = dx
                    .trim()
                    .parse()
                    .map_err(|e| format!("bad dx `{dx}`: {e}"))?;
                let dy: f64 = dy
                    .trim()
                    .parse()
                    .map_err(|e| format!("bad dy `{dy}`: {e}"))?;
                if !(dx.is_finite() && dy.is_finite()) {
                    return Err("explicit offsets must be finite".into());
                }
                Ok(EpsilonMode::Explicit { dx, dy })
            }
        }
    }
}

/// How per-edge template lengths are aggregated across frames.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RatioStrategy {
    FirstFrame,
    #[default]
    Median,
    Max,
}

impl fmt::Display for RatioStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RatioStrategy::FirstFrame => "first_frame",
            RatioStrategy::Median => "median",
            RatioStrategy::Max => "max",
        })
    }
}

impl std::str::FromStr for RatioStrategy {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "first" | "first_frame" | "first-frame" => Ok(RatioStrategy::FirstFrame),
            "median" => Ok(RatioStrategy::Median),
            "max" => Ok(RatioStrategy::Max),
            other => Err(format!(
                "unknown ratio strategy `{other}` (first|median|max)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UndefinedRatioPolicy {
    /// Use `r = 1`, keeping the template limb as is.
    #[default]
    InheritUnity,
    /// Drop the child joint (and so its descendants).
    MarkMissing,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HandScaleSource {
    /// Scale each hand by its elbow-to-wrist edge ratio.
    #[default]
    ForearmRatio,
    /// Scale by reference/template hand bounding-box diagonal, falling back to the forearm ratio.
    HandBboxRatio,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RetargetConfig {
    pub epsilon_mode: EpsilonMode,
    pub ratio_strategy: RatioStrategy,
    pub undefined_ratio_policy: UndefinedRatioPolicy,
    pub hand_scale_source: HandScaleSource,
    /// Translate the face with the nose and scale it by the head edge ratio.
    pub retarget_face: bool,
    pub epsilon_len: f64,
    pub topology: LimbTopology,
}

impl Default for RetargetConfig {
    fn default() -> Self {
        RetargetConfig {
            epsilon_mode: EpsilonMode::Zero,
            ratio_strategy: RatioStrategy::Median,
            undefined_ratio_policy: UndefinedRatioPolicy::InheritUnity,
            hand_scale_source: HandScaleSource::ForearmRatio,
            retarget_face: true,
            epsilon_len: DEFAULT_EPSILON_LEN,
            topology: LimbTopology::body18(),
        }
    }
}

impl RetargetConfig {
    pub fn validate(&self) -> Result<()> {
        self.topology.validate()?;
        if let EpsilonMode::Explicit { dx, dy } = self.epsilon_mode {
            if !(dx.is_finite() && dy.is_finite()) {
                return Err(Error::Contract("explicit epsilon must be finite".into()));
            }
        }
        if !(self.epsilon_len.is_finite() && self.epsilon_len >= 0.0) {
            return Err(Error::Contract(
                "epsilon_len must be finite and non-negative".into(),
            ));
        }
        Ok(())
    }
}

/// Length and direction of one limb. Angles are measured from +x with y pointing down.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LimbGeom {
    pub length: f64,
    /// Radians in `(-pi, pi]`.
    pub angle: f64,
}

pub fn limb_geom(parent: &Keypoint, child: &Keypoint) -> LimbGeom {
    let (dx, dy) = (child.x - parent.x, child.y - parent.y);
    let mut angle = dy.atan2(dx);
    if angle == -std::f64::consts::PI {
        angle = std::f64::consts::PI;
    }
    LimbGeom {
        length: dx.hypot(dy),
        angle,
    }
}

/// Geometry of topology edge `edge` in `pose`.
pub fn edge_geom(pose: &Pose, topology: &LimbTopology, edge: usize) -> Result<LimbGeom> {
    let &(parent, child) = topology.edges.get(edge).ok_or_else(|| {
        Error::Contract(format!("edge {edge} not in topology `{}`", topology.name))
    })?;
    match (&pose.body[parent], &pose.body[child]) {
        (Some(p), Some(c)) => Ok(limb_geom(p, c)),
        _ => Err(Error::MissingJoint {
            edge,
            parent,
            child,
        }),
    }
}

/// Difference `a - b` wrapped into `[0, pi]`.
pub fn angle_diff(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(std::f64::consts::TAU);
    d.min(std::f64::consts::TAU - d)
}

/// Per-edge scale factors from template to reference. `None` marks an UNDEFINED entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeRatios {
    pub ratios: Vec<Option<f64>>,
    pub template_lengths: Vec<Option<f64>>,
    pub reference_lengths: Vec<Option<f64>>,
    pub strategy: RatioStrategy,
    /// Reference/template hand bounding-box diagonal ratios.
    pub hand_left: Option<f64>,
    pub hand_right: Option<f64>,
}

impl EdgeRatios {
    pub fn len(&self) -> usize {
        self.ratios.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ratios.is_empty()
    }

    pub fn defined_count(&self) -> usize {
        self.ratios.iter().flatten().count()
    }

    /// The ratio actually applied to edge `k`, or `None` when the child is dropped.
    pub fn effective(&self, k: usize, policy: UndefinedRatioPolicy) -> Option<f64> {
        match (self.ratios[k], policy) {
            (Some(r), _) => Some(r),
            (None, UndefinedRatioPolicy::InheritUnity) => Some(1.0),
            (None, UndefinedRatioPolicy::MarkMissing) => None,
        }
    }
}

fn aggregate(mut values: Vec<f64>, strategy: RatioStrategy) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    match strategy {
        RatioStrategy::FirstFrame => Some(values[0]),
        RatioStrategy::Max => values.into_iter().reduce(f64::max),
        RatioStrategy::Median => {
            values.sort_by(f64::total_cmp);
            let n = values.len();
            Some(if n % 2 == 1 {
                values[n / 2]
            } else {
                0.5 * (values[n / 2 - 1] + values[n / 2])
            })
        }
    }
}

fn hand_diagonal(hand: &Option<Vec<Joint>>) -> Option<f64> {
    let pts: Vec<&Keypoint> = hand.iter().flatten().flatten().collect();
    if pts.len() < 2 {
        return None;
    }
    let (mut x0, mut y0, mut x1, mut y1) = (f64::MAX, f64::MAX, f64::MIN, f64::MIN);
    for p in pts {
        x0 = x0.min(p.x);
        y0 = y0.min(p.y);
        x1 = x1.max(p.x);
        y1 = y1.max(p.y);
    }
    Some((x1 - x0).hypot(y1 - y0))
}

/// Computes per-edge ratios between `reference` and the aggregated template lengths.
///
/// Both inputs must already be in pixel units.
pub fn compute_edge_ratios(
    template: &PoseSequence,
    reference: &Pose,
    cfg: &RetargetConfig,
) -> Result<EdgeRatios> {
    cfg.validate()?;
    let eps = cfg.epsilon_len;
    let usable = |len: f64| (len >= eps && len.is_finite()).then_some(len);
    let edges = &cfg.topology.edges;

    let reference_lengths: Vec<Option<f64>> = edges
        .iter()
        .map(|&(p, c)| match (&reference.body[p], &reference.body[c]) {
            (Some(a), Some(b)) => usable(limb_geom(a, b).length),
            _ => None,
        })
        .collect();
    if reference_lengths.iter().all(Option::is_none) {
        return Err(Error::UnusableReference(
            "no limb has both endpoints detected".into(),
        ));
    }

    let template_lengths: Vec<Option<f64>> = edges
        .iter()
        .map(|&(p, c)| {
            let measured: Vec<f64> = template
                .frames()
                .iter()
                .filter_map(|f| match (&f.body[p], &f.body[c]) {
                    (Some(a), Some(b)) => Some(limb_geom(a, b).length),
                    _ => None,
                })
                .collect();
            aggregate(measured, cfg.ratio_strategy).and_then(usable)
        })
        .collect();

    let ratios = reference_lengths
        .iter()
        .zip(&template_lengths)
        .map(|(r, t)| match (r, t) {
            (Some(r), Some(t)) => Some(r / t),
            _ => None,
        })
        .collect();

    let hand_ratio = |pick: fn(&Pose) -> &Option<Vec<Joint>>| {
        let reference = hand_diagonal(pick(reference)).and_then(usable)?;
        let measured = template
            .frames()
            .iter()
            .filter_map(|f| hand_diagonal(pick(f)))
            .collect();
        let template = aggregate(measured, cfg.ratio_strategy).and_then(usable)?;
        Some(reference / template)
    };

    Ok(EdgeRatios {
        ratios,
        template_lengths,
        reference_lengths,
        strategy: cfg.ratio_strategy,
        hand_left: hand_ratio(|p| &p.hand_left),
        hand_right: hand_ratio(|p| &p.hand_right),
    })
}

/// The root offset for a given template root position.
pub fn resolve_offset(
    template_root: Option<&Keypoint>,
    reference: &Pose,
    cfg: &RetargetConfig,
) -> Result<(f64, f64)> {
    match cfg.epsilon_mode {
        EpsilonMode::Zero => Ok((0.0, 0.0)),
        EpsilonMode::Explicit { dx, dy } => Ok((dx, dy)),
        EpsilonMode::BaseDiff => {
            let root = cfg.topology.root();
            let r = reference.body[root].ok_or_else(|| {
                Error::UnusableReference("base_diff offset needs the reference neck".into())
            })?;
            Ok(match template_root {
                Some(t) => (r.x - t.x, r.y - t.y),
                None => (0.0, 0.0),
            })
        }
    }
}

fn output_canvas(template: Canvas, reference: &Pose, cfg: &RetargetConfig) -> Canvas {
    match cfg.epsilon_mode {
        EpsilonMode::BaseDiff => reference.canvas,
        _ => template,
    }
}

/// Moves `child` so that it hangs off `parent_out` with its offset from
/// `parent_in` scaled by `scale`. Written as a correction to the input
/// coordinate so that a zero correction returns the input bit-for-bit.
fn place(child: &Keypoint, parent_in: &Keypoint, parent_out: &Keypoint, scale: f64) -> Keypoint {
    let dx = (parent_out.x - parent_in.x) + (scale - 1.0) * (child.x - parent_in.x);
    let dy = (parent_out.y - parent_in.y) + (scale - 1.0) * (child.y - parent_in.y);
    Keypoint::new(shift(child.x, dx), shift(child.y, dy), child.score)
}

fn shift(v: f64, d: f64) -> f64 {
    if d == 0.0 {
        v
    } else {
        v + d
    }
}

struct FramePlan<'a> {
    ratios: &'a EdgeRatios,
    cfg: &'a RetargetConfig,
    offset: (f64, f64),
    canvas: Canvas,
}

impl FramePlan<'_> {
    fn apply(&self, frame: &Pose) -> Pose {
        let topo = &self.cfg.topology;
        let policy = self.cfg.undefined_ratio_policy;
        let mut out = Pose::empty(self.canvas);

        if let Some(root) = frame.body[topo.root()] {
            out.body[topo.root()] = Some(Keypoint::new(
                shift(root.x, self.offset.0),
                shift(root.y, self.offset.1),
                root.score,
            ));
            for (k, &(p, c)) in topo.edges.iter().enumerate() {
                let (Some(pt), Some(ct), Some(po)) = (&frame.body[p], &frame.body[c], &out.body[p])
                else {
                    continue;
                };
                if let Some(r) = self.ratios.effective(k, policy) {
                    out.body[c] = Some(place(ct, pt, po, r));
                }
            }
        }

        let wrist_scale = |wrist: usize, bbox: Option<f64>| {
            let forearm = topo
                .edge_into(wrist)
                .and_then(|k| self.ratios.effective(k, policy));
            match self.cfg.hand_scale_source {
                HandScaleSource::ForearmRatio => forearm,
                HandScaleSource::HandBboxRatio => bbox.or(forearm),
            }
        };
        out.hand_left = follow(
            &frame.hand_left,
            frame.body[L_WRIST].as_ref(),
            out.body[L_WRIST].as_ref(),
            wrist_scale(L_WRIST, self.ratios.hand_left),
            true,
        );
        out.hand_right = follow(
            &frame.hand_right,
            frame.body[R_WRIST].as_ref(),
            out.body[R_WRIST].as_ref(),
            wrist_scale(R_WRIST, self.ratios.hand_right),
            true,
        );
        out.face = if self.cfg.retarget_face {
            let head = topo
                .edge_into(NOSE)
                .and_then(|k| self.ratios.effective(k, policy));
            follow(
                &frame.face,
                frame.body[NOSE].as_ref(),
                out.body[NOSE].as_ref(),
                head,
                false,
            )
        } else {
            frame.face.clone()
        };
        out
    }
}

/// Rigidly moves a keypoint group so its anchor lands on `anchor_out`, then
/// scales it about that point. For hands the group's own point 0 (the hand
/// wrist) is the anchor when present.
fn follow(
    part: &Option<Vec<Joint>>,
    body_anchor_in: Option<&Keypoint>,
    anchor_out: Option<&Keypoint>,
    scale: Option<f64>,
    own_root: bool,
) -> Option<Vec<Joint>> {
    let joints = part.as_ref()?;
    let anchor_in = if own_root {
        joints.first().and_then(Option::as_ref).or(body_anchor_in)
    } else {
        body_anchor_in
    };
    let moved = match (anchor_in, anchor_out, scale) {
        (Some(ai), Some(ao), Some(s)) => joints
            .iter()
            .map(|j| j.as_ref().map(|kp| place(kp, ai, ao, s)))
            .collect(),
        _ => vec![None; joints.len()],
    };
    Some(moved)
}

fn check_ratios(ratios: &EdgeRatios, cfg: &RetargetConfig) -> Result<()> {
    let n = cfg.topology.len();
    if ratios.ratios.len() != n
        || ratios.template_lengths.len() != n
        || ratios.reference_lengths.len() != n
    {
        return Err(Error::Contract(format!(
            "edge ratios cover {} edges but topology `{}` has {n}",
            ratios.len(),
            cfg.topology.name
        )));
    }
    Ok(())
}

/// Retargets one frame. In `base_diff` mode the offset is taken from this
/// frame's own neck; [`retarget_sequence`] instead fixes it once per sequence.
pub fn retarget_frame(
    template_frame: &Pose,
    ratios: &EdgeRatios,
    reference: &Pose,
    cfg: &RetargetConfig,
) -> Result<Pose> {
    cfg.validate()?;
    check_ratios(ratios, cfg)?;
    let offset = resolve_offset(
        template_frame.body[cfg.topology.root()].as_ref(),
        reference,
        cfg,
    )?;
    let plan = FramePlan {
        ratios,
        cfg,
        offset,
        canvas: output_canvas(template_frame.canvas, reference, cfg),
    };
    Ok(plan.apply(template_frame))
}

/// Output of a full sequence run, with the quantities fixed before the per-frame pass.
#[derive(Debug, Clone)]
pub struct Retargeted {
    pub sequence: PoseSequence,
    pub ratios: EdgeRatios,
    pub offset: (f64, f64),
}

pub fn retarget_sequence(
    template: &PoseSequence,
    reference: &Pose,
    cfg: &RetargetConfig,
) -> Result<PoseSequence> {
    retarget_sequence_detailed(template, reference, cfg).map(|r| r.sequence)
}

/// Retargets every frame with one set of ratios and one root offset.
///
/// In `base_diff` mode the offset comes from the first frame with a detected
/// neck, so the template's global trajectory survives. Frames are processed in
/// parallel on the current rayon pool; output order matches input order.
pub fn retarget_sequence_detailed(
    template: &PoseSequence,
    reference: &Pose,
    cfg: &RetargetConfig,
) -> Result<Retargeted> {
    let ratios = compute_edge_ratios(template, reference, cfg)?;
    let root = cfg.topology.root();
    let first_root = template.frames().iter().find_map(|f| f.body[root].as_ref());
    let offset = resolve_offset(first_root, reference, cfg)?;
    let plan = FramePlan {
        ratios: &ratios,
        cfg,
        offset,
        canvas: output_canvas(template.canvas(), reference, cfg),
    };
    let frames: Vec<Pose> = template
        .frames()
        .par_iter()
        .map(|f| plan.apply(f))
        .collect();
    let sequence = PoseSequence::new(frames, template.fps())?;
    Ok(Retargeted {
        sequence,
        ratios,
        offset,
    })
}

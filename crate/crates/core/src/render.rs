//! OpenPose-style skeleton rasterization.
//!
//! Coverage is a pure distance test at integer pixel centers, with no
//! anti-aliasing, so identical inputs give byte-identical images everywhere.

use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use image::codecs::png::{CompressionType, FilterType, PngEncoder};
use image::{ImageEncoder, Rgb, RgbImage};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pose_model::{Joint, Keypoint, LimbTopology, Pose, PoseSequence, HAND_EDGES};

pub type Color = [u8; 3];

/// The conventional 18-color OpenPose wheel, indexed by joint.
pub const OPENPOSE_COLORS: [Color; 18] = [
    [255, 0, 0],
    [255, 85, 0],
    [255, 170, 0],
    [255, 255, 0],
    [170, 255, 0],
    [85, 255, 0],
    [0, 255, 0],
    [0, 255, 85],
    [0, 255, 170],
    [0, 255, 255],
    [0, 170, 255],
    [0, 85, 255],
    [0, 0, 255],
    [85, 0, 255],
    [170, 0, 255],
    [255, 0, 255],
    [255, 0, 170],
    [255, 0, 85],
];

// OpenPose's own limb order; limb k there is painted OPENPOSE_COLORS[k].
const OPENPOSE_LIMB_ORDER: [(usize, usize); 17] = [
    (1, 2),
    (1, 5),
    (2, 3),
    (3, 4),
    (5, 6),
    (6, 7),
    (1, 8),
    (8, 9),
    (9, 10),
    (1, 11),
    (11, 12),
    (12, 13),
    (1, 0),
    (0, 14),
    (14, 16),
    (0, 15),
    (15, 17),
];

// Hue wheel over the 20 hand edges.
const HAND_EDGE_COLORS: [Color; 20] = [
    [255, 0, 0],
    [255, 76, 0],
    [255, 153, 0],
    [255, 229, 0],
    [203, 255, 0],
    [127, 255, 0],
    [51, 255, 0],
    [0, 255, 25],
    [0, 255, 102],
    [0, 255, 178],
    [0, 255, 255],
    [0, 178, 255],
    [0, 102, 255],
    [0, 25, 255],
    [50, 0, 255],
    [127, 0, 255],
    [204, 0, 255],
    [255, 0, 229],
    [255, 0, 152],
    [255, 0, 76],
];
const HAND_JOINT_COLOR: Color = [0, 0, 255];
const FACE_COLOR: Color = [255, 255, 255];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RenderStyle {
    /// One color per topology edge, in edge order.
    pub limb_palette: Vec<Color>,
    /// One color per body joint.
    pub joint_palette: Vec<Color>,
    pub joint_radius: u32,
    pub limb_thickness: u32,
    pub background: Color,
    pub draw_hands: bool,
    pub draw_face: bool,
}

impl Default for RenderStyle {
    fn default() -> Self {
        RenderStyle::openpose(&LimbTopology::body18())
    }
}

impl RenderStyle {
    /// OpenPose colors mapped onto `topology`'s edge order. Edges OpenPose does
    /// not draw take the color of their child joint.
    pub fn openpose(topology: &LimbTopology) -> Self {
        let limb_palette = topology
            .edges
            .iter()
            .map(|e| match OPENPOSE_LIMB_ORDER.iter().position(|o| o == e) {
                Some(k) => OPENPOSE_COLORS[k],
                None => OPENPOSE_COLORS[e.1 % OPENPOSE_COLORS.len()],
            })
            .collect();
        RenderStyle {
            limb_palette,
            joint_palette: OPENPOSE_COLORS.to_vec(),
            joint_radius: 4,
            limb_thickness: 4,
            background: [0, 0, 0],
            draw_hands: true,
            draw_face: true,
        }
    }

    pub fn validate(&self, topology: &LimbTopology) -> Result<()> {
        if self.limb_palette.len() != topology.len() {
            return Err(Error::Contract(format!(
                "limb palette has {} colors, topology `{}` has {} edges",
                self.limb_palette.len(),
                topology.name,
                topology.len()
            )));
        }
        if self.joint_palette.len() != OPENPOSE_COLORS.len() {
            return Err(Error::Contract(format!(
                "joint palette needs {} colors, got {}",
                OPENPOSE_COLORS.len(),
                self.joint_palette.len()
            )));
        }
        if self.joint_radius < 1 || self.limb_thickness < 1 {
            return Err(Error::Contract(
                "joint radius and limb thickness must be >= 1".into(),
            ));
        }
        Ok(())
    }
}

/// Squared distance from `(px, py)` to the segment `a`-`b`.
pub fn segment_distance_sq(px: f64, py: f64, a: (f64, f64), b: (f64, f64)) -> f64 {
    let (vx, vy) = (b.0 - a.0, b.1 - a.1);
    let (wx, wy) = (px - a.0, py - a.1);
    let len_sq = vx * vx + vy * vy;
    let t = if len_sq > 0.0 {
        ((wx * vx + wy * vy) / len_sq).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let (dx, dy) = (wx - t * vx, wy - t * vy);
    dx * dx + dy * dy
}

/// Paints every pixel whose center is within `radius` of segment `a`-`b`.
fn fill_stadium(img: &mut RgbImage, a: (f64, f64), b: (f64, f64), radius: f64, color: Color) {
    let (w, h) = img.dimensions();
    let lo_x = (a.0.min(b.0) - radius).floor().max(0.0);
    let hi_x = (a.0.max(b.0) + radius).ceil().min(w as f64 - 1.0);
    let lo_y = (a.1.min(b.1) - radius).floor().max(0.0);
    let hi_y = (a.1.max(b.1) + radius).ceil().min(h as f64 - 1.0);
    if lo_x > hi_x || lo_y > hi_y {
        return;
    }
    let r_sq = radius * radius;
    for y in lo_y as u32..=hi_y as u32 {
        for x in lo_x as u32..=hi_x as u32 {
            if segment_distance_sq(x as f64, y as f64, a, b) <= r_sq {
                img.put_pixel(x, y, Rgb(color));
            }
        }
    }
}

fn fill_disc(img: &mut RgbImage, c: (f64, f64), radius: f64, color: Color) {
    fill_stadium(img, c, c, radius, color);
}

fn xy(kp: &Keypoint) -> (f64, f64) {
    (kp.x, kp.y)
}

fn draw_hand(img: &mut RgbImage, hand: &[Joint], style: &RenderStyle) {
    let thickness = (style.limb_thickness / 2).max(1) as f64 / 2.0;
    let radius = (style.joint_radius / 2).max(1) as f64;
    for (&(p, c), &color) in HAND_EDGES.iter().zip(&HAND_EDGE_COLORS) {
        if let (Some(Some(a)), Some(Some(b))) = (hand.get(p), hand.get(c)) {
            fill_stadium(img, xy(a), xy(b), thickness.max(0.5), color);
        }
    }
    for kp in hand.iter().flatten() {
        fill_disc(img, xy(kp), radius, HAND_JOINT_COLOR);
    }
}

pub fn render_pose(pose: &Pose, style: &RenderStyle) -> Result<RgbImage> {
    render_pose_with(pose, style, &LimbTopology::body18())
}

/// Draws limbs in topology order, then body joints, then hands and face.
pub fn render_pose_with(
    pose: &Pose,
    style: &RenderStyle,
    topology: &LimbTopology,
) -> Result<RgbImage> {
    style.validate(topology)?;
    let mut img =
        RgbImage::from_pixel(pose.canvas.width, pose.canvas.height, Rgb(style.background));
    let half = style.limb_thickness as f64 / 2.0;
    for (&(p, c), &color) in topology.edges.iter().zip(&style.limb_palette) {
        if let (Some(a), Some(b)) = (&pose.body[p], &pose.body[c]) {
            fill_stadium(&mut img, xy(a), xy(b), half, color);
        }
    }
    for (kp, &color) in pose.body.iter().zip(&style.joint_palette) {
        if let Some(kp) = kp {
            fill_disc(&mut img, xy(kp), style.joint_radius as f64, color);
        }
    }
    if style.draw_hands {
        for hand in [&pose.hand_left, &pose.hand_right].into_iter().flatten() {
            draw_hand(&mut img, hand, style);
        }
    }
    if style.draw_face {
        let radius = (style.joint_radius / 2).max(1) as f64;
        for kp in pose.face.iter().flatten().flatten() {
            fill_disc(&mut img, xy(kp), radius, FACE_COLOR);
        }
    }
    Ok(img)
}

/// Encodes an RGB image as PNG bytes with fixed encoder settings.
pub fn encode_png(img: &RgbImage, path: &Path) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    PngEncoder::new_with_quality(&mut buf, CompressionType::Fast, FilterType::Sub)
        .write_image(
            img.as_raw(),
            img.width(),
            img.height(),
            image::ExtendedColorType::Rgb8,
        )
        .map_err(|source| Error::Image {
            path: path.to_path_buf(),
            source,
        })?;
    Ok(buf)
}

pub fn write_png(img: &RgbImage, path: &Path) -> Result<()> {
    let bytes = encode_png(img, path)?;
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    std::io::Write::write_all(&mut w, &bytes).map_err(|e| Error::io(path, e))?;
    w.into_inner()
        .map_err(|e| Error::io(path, e.into_error()))?
        .sync_all()
        .map_err(|e| Error::io(path, e))
}

pub fn frame_file_name(index: usize) -> String {
    format!("frame_{index:05}.png")
}

/// Renders one PNG per frame into `out_dir` as `frame_00000.png`, `frame_00001.png`, ...
pub fn render_sequence(
    seq: &PoseSequence,
    style: &RenderStyle,
    out_dir: &Path,
) -> Result<Vec<PathBuf>> {
    render_sequence_with(seq, style, &LimbTopology::body18(), out_dir)
}

pub fn render_sequence_with(
    seq: &PoseSequence,
    style: &RenderStyle,
    topology: &LimbTopology,
    out_dir: &Path,
) -> Result<Vec<PathBuf>> {
    style.validate(topology)?;
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    seq.frames()
        .par_iter()
        .enumerate()
        .map(|(i, pose)| {
            let path = out_dir.join(frame_file_name(i));
            render_pose_with(pose, style, topology)
                .and_then(|img| write_png(&img, &path))
                .map(|_| path)
                .map_err(|e| Error::Frame {
                    frame: i,
                    source: Box::new(e),
                })
        })
        .collect()
}

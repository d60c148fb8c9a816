//! PNG renderings of pipeline stages for visual inspection: the event
//! surface as a grayscale backdrop, detected segments, the pose graph, and
//! estimated/ground-truth skeletons drawn over it.

use image::{Rgb, RgbImage};

use crate::error::Result;
use crate::event::AccumulationSurface;
use crate::graph::PoseGraph;
use crate::joints::LIMBS;
use crate::line::LineSegment;
use crate::pose::{GroundTruthPose, PoseEstimate};

const SEGMENT_COLOR: Rgb<u8> = Rgb([255, 120, 200]);
const NODE_COLOR: Rgb<u8> = Rgb([90, 160, 255]);
const EDGE_COLOR: Rgb<u8> = Rgb([60, 90, 160]);
const AUGMENTED_COLOR: Rgb<u8> = Rgb([150, 90, 190]);
/// Prediction skeletons are yellow, ground truth green.
const POSE_COLOR: Rgb<u8> = Rgb([250, 220, 40]);
const GT_COLOR: Rgb<u8> = Rgb([70, 220, 70]);

fn put(img: &mut RgbImage, x: i64, y: i64, color: Rgb<u8>) {
    if x >= 0 && y >= 0 && (x as u32) < img.width() && (y as u32) < img.height() {
        img.put_pixel(x as u32, y as u32, color);
    }
}

/// Draw a 1-px line by sampling at sub-pixel steps; out-of-frame parts clip.
fn draw_line(img: &mut RgbImage, a: [f64; 2], b: [f64; 2], color: Rgb<u8>) {
    let steps = ((b[0] - a[0]).abs().max((b[1] - a[1]).abs()).ceil() as usize).max(1);
    for k in 0..=steps {
        let t = k as f64 / steps as f64;
        let x = a[0] + t * (b[0] - a[0]);
        let y = a[1] + t * (b[1] - a[1]);
        put(img, x.round() as i64, y.round() as i64, color);
    }
}

fn draw_disk(img: &mut RgbImage, c: [f64; 2], r: f64, color: Rgb<u8>) {
    let (cx, cy) = (c[0], c[1]);
    for y in (cy - r).floor() as i64..=(cy + r).ceil() as i64 {
        for x in (cx - r).floor() as i64..=(cx + r).ceil() as i64 {
            let dx = x as f64 - cx;
            let dy = y as f64 - cy;
            if dx * dx + dy * dy <= r * r {
                put(img, x, y, color);
            }
        }
    }
}

/// Draw a skeleton, skipping any bone or marker that touches a joint whose
/// `visible` flag is false. Identical joint positions cover identical pixels
/// regardless of color, so coinciding prediction and ground truth overlap
/// exactly.
fn skeleton(img: &mut RgbImage, joints: &[[f64; 2]; 13], visible: &[bool; 13], color: Rgb<u8>) {
    for (a, b) in LIMBS {
        if visible[a as usize] && visible[b as usize] {
            draw_line(img, joints[a as usize], joints[b as usize], color);
        }
    }
    for (j, p) in joints.iter().enumerate() {
        if visible[j] {
            draw_disk(img, *p, 2.0, color);
        }
    }
}

/// Compose any subset of pipeline artifacts into one frame. The surface, if
/// given, sets the backdrop; everything else draws on top in fixed colors
/// (segments pink, graph blue, ground truth green, estimate yellow). The
/// estimate draws last so coinciding skeletons read as one.
pub fn render_scene(
    width: u32,
    height: u32,
    surface: Option<&AccumulationSurface>,
    segments: &[LineSegment],
    graph: Option<&PoseGraph>,
    pose: Option<&PoseEstimate>,
    gt: Option<&GroundTruthPose>,
) -> RgbImage {
    let mut img = RgbImage::new(width, height);
    if let Some(s) = surface {
        let gray = s.render();
        for (x, y, p) in gray.enumerate_pixels() {
            if x < width && y < height {
                let v = p.0[0];
                img.put_pixel(x, y, Rgb([v, v, v]));
            }
        }
    }
    for seg in segments {
        let (a, b) = seg.endpoints();
        draw_line(&mut img, a, b, SEGMENT_COLOR);
    }
    if let Some(g) = graph {
        for e in &g.edges {
            // Both directions are materialized; drawing one suffices.
            if e.src < e.dst {
                let color = if e.augmented { AUGMENTED_COLOR } else { EDGE_COLOR };
                let (a, b) = (&g.nodes[e.src], &g.nodes[e.dst]);
                draw_line(&mut img, [a.x, a.y], [b.x, b.y], color);
            }
        }
        for n in &g.nodes {
            draw_disk(&mut img, [n.x, n.y], 1.5, NODE_COLOR);
        }
    }
    if let Some(gt) = gt {
        skeleton(&mut img, &gt.joints, &gt.visible, GT_COLOR);
    }
    if let Some(pose) = pose {
        skeleton(&mut img, &pose.joints, &[true; 13], POSE_COLOR);
    }
    img
}

pub fn save_png<P: AsRef<std::path::Path>>(img: &RgbImage, path: P) -> Result<()> {
    img.save_with_format(path.as_ref(), image::ImageFormat::Png)
        .map_err(|e| crate::error::Error::InvalidConfig(format!("png encode: {e}")))
}

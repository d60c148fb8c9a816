//! Pose records: estimates with confidences, ground truth with visibility.
//!
//! Both share one text layout — `t x0 y0 c0 ... x12 y12 c12`, one pose per
//! line with 13 joints in canonical order. For estimates `c` is a confidence
//! in [0, 1]; for ground truth it is a visibility flag (nonzero means the
//! joint is annotated and visible).

mod io;

pub use io::{read_ground_truth, read_poses, write_ground_truth, write_poses};

use crate::joints::{Joint, JOINT_COUNT};

/// Estimated 2D skeleton at a timestamp, in pixel coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct PoseEstimate {
    pub t: u64,
    pub joints: [[f64; 2]; JOINT_COUNT],
    /// Per-joint confidence in [0, 1].
    pub confidence: [f64; JOINT_COUNT],
}

impl PoseEstimate {
    pub fn joint(&self, j: Joint) -> [f64; 2] {
        self.joints[j as usize]
    }
}

/// Annotated 2D skeleton at a timestamp, in pixel coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruthPose {
    pub t: u64,
    pub joints: [[f64; 2]; JOINT_COUNT],
    pub visible: [bool; JOINT_COUNT],
}

impl GroundTruthPose {
    pub fn joint(&self, j: Joint) -> [f64; 2] {
        self.joints[j as usize]
    }

    pub fn is_visible(&self, j: Joint) -> bool {
        self.visible[j as usize]
    }

    pub fn visible_count(&self) -> usize {
        self.visible.iter().filter(|v| **v).count()
    }
}

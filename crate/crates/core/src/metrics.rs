//! Evaluation metrics for 2D pose sequences.
//!
//! PCK: a joint counts as correct when its distance to the ground truth is
//! strictly below `p * T`, where `T` is the subject's torso diagonal in that
//! frame (left shoulder to right hip by default). Per-joint rates average
//! over samples; the overall score is the unweighted mean of the per-joint
//! rates. Samples whose torso reference is invisible or degenerate (zero
//! length) are skipped and counted.
//!
//! MPJPE: per-joint mean pixel distance over visible instances, and the
//! unweighted mean of those as the overall score.
//!
//! The chance baseline replaces predictions with uniform random points over
//! the image rectangle and measures PCK by Monte Carlo.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;

use crate::error::{Error, Result};
use crate::joints::{Cluster, Joint, ALL_CLUSTERS, JOINT_COUNT};
use crate::pose::{GroundTruthPose, PoseEstimate};

/// Default torso reference: left shoulder to right hip.
pub const DEFAULT_TORSO: (Joint, Joint) = (Joint::ShoulderLeft, Joint::HipRight);

#[derive(Debug, Clone)]
pub struct PckResult {
    /// Per-joint rate; `None` when the joint was never measurable.
    pub per_joint: [Option<f64>; JOINT_COUNT],
    /// Unweighted mean of the defined per-joint rates.
    pub overall: f64,
    /// Samples skipped for a missing or degenerate torso reference.
    pub skipped_samples: usize,
    pub measured_samples: usize,
}

#[derive(Debug, Clone)]
pub struct MpjpeResult {
    pub per_joint: [Option<f64>; JOINT_COUNT],
    pub overall: f64,
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

fn check_paired(preds: usize, gts: usize) -> Result<()> {
    if preds != gts {
        return Err(Error::DimensionMismatch {
            context: "prediction/ground-truth sequence lengths",
            expected: gts,
            found: preds,
        });
    }
    Ok(())
}

/// Torso reference length, or `None` if it cannot be measured in this frame.
pub fn torso_length(gt: &GroundTruthPose, torso: (Joint, Joint)) -> Option<f64> {
    if !gt.is_visible(torso.0) || !gt.is_visible(torso.1) {
        return None;
    }
    let t = dist(gt.joint(torso.0), gt.joint(torso.1));
    (t > 0.0).then_some(t)
}

fn overall_of(per_joint: &[Option<f64>; JOINT_COUNT]) -> Result<f64> {
    let defined: Vec<f64> = per_joint.iter().flatten().copied().collect();
    if defined.is_empty() {
        return Err(Error::NoVisibleJoints);
    }
    Ok(defined.iter().sum::<f64>() / defined.len() as f64)
}

/// Percentage of correct keypoints at threshold `p`, sequences paired by
/// index.
pub fn pck(
    preds: &[PoseEstimate],
    gts: &[GroundTruthPose],
    p: f64,
    torso: (Joint, Joint),
) -> Result<PckResult> {
    check_paired(preds.len(), gts.len())?;
    let mut hits = [0usize; JOINT_COUNT];
    let mut totals = [0usize; JOINT_COUNT];
    let mut skipped = 0;
    let mut measured = 0;
    for (pred, gt) in preds.iter().zip(gts) {
        let Some(t) = torso_length(gt, torso) else {
            skipped += 1;
            continue;
        };
        measured += 1;
        for j in 0..JOINT_COUNT {
            if !gt.visible[j] {
                continue;
            }
            totals[j] += 1;
            // Strict inequality: a distance exactly at the threshold (and in
            // particular a zero threshold) does not count.
            if dist(pred.joints[j], gt.joints[j]) < p * t {
                hits[j] += 1;
            }
        }
    }
    let per_joint: [Option<f64>; JOINT_COUNT] =
        std::array::from_fn(|j| (totals[j] > 0).then(|| hits[j] as f64 / totals[j] as f64));
    Ok(PckResult {
        overall: overall_of(&per_joint)?,
        per_joint,
        skipped_samples: skipped,
        measured_samples: measured,
    })
}

/// Mean per-joint position error in pixels.
pub fn mpjpe(preds: &[PoseEstimate], gts: &[GroundTruthPose]) -> Result<MpjpeResult> {
    check_paired(preds.len(), gts.len())?;
    let mut sums = [0.0f64; JOINT_COUNT];
    let mut totals = [0usize; JOINT_COUNT];
    for (pred, gt) in preds.iter().zip(gts) {
        for j in 0..JOINT_COUNT {
            if gt.visible[j] {
                sums[j] += dist(pred.joints[j], gt.joints[j]);
                totals[j] += 1;
            }
        }
    }
    let per_joint: [Option<f64>; JOINT_COUNT] =
        std::array::from_fn(|j| (totals[j] > 0).then(|| sums[j] / totals[j] as f64));
    Ok(MpjpeResult {
        overall: overall_of(&per_joint)?,
        per_joint,
    })
}

/// Mean of the defined per-joint values within each body cluster, in
/// [`ALL_CLUSTERS`] order (torso, arms, legs).
pub fn cluster_means(per_joint: &[Option<f64>; JOINT_COUNT]) -> [Option<f64>; 3] {
    std::array::from_fn(|c| {
        let members = ALL_CLUSTERS[c].members();
        let vals: Vec<f64> = members
            .iter()
            .filter_map(|j| per_joint[*j as usize])
            .collect();
        (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
    })
}

pub fn cluster_label(ix: usize) -> Cluster {
    ALL_CLUSTERS[ix]
}

/// Monte Carlo chance-level PCK: predictions drawn uniformly over the image
/// rectangle, ground-truth samples cycled until `draws` pose comparisons
/// have been made.
pub fn chance_pck(
    gts: &[GroundTruthPose],
    p: f64,
    torso: (Joint, Joint),
    width: u32,
    height: u32,
    draws: usize,
    seed: u64,
) -> Result<f64> {
    if gts.is_empty() {
        return Err(Error::NoVisibleJoints);
    }
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut hits = [0usize; JOINT_COUNT];
    let mut totals = [0usize; JOINT_COUNT];
    for k in 0..draws {
        let gt = &gts[k % gts.len()];
        let Some(t) = torso_length(gt, torso) else {
            continue;
        };
        for j in 0..JOINT_COUNT {
            if !gt.visible[j] {
                continue;
            }
            let px = rng.random_range(0.0..width as f64);
            let py = rng.random_range(0.0..height as f64);
            totals[j] += 1;
            if dist([px, py], gt.joints[j]) < p * t {
                hits[j] += 1;
            }
        }
    }
    let per_joint: [Option<f64>; JOINT_COUNT] =
        std::array::from_fn(|j| (totals[j] > 0).then(|| hits[j] as f64 / totals[j] as f64));
    overall_of(&per_joint)
}

//! Shared helpers and independent oracles for the acceptance suite.
//!
//! Every oracle here is derived directly from the defining formula, written
//! separately from the production code, so each acceptance check compares two
//! independently implemented routes to the same quantity.
#![allow(dead_code)]

use evpose_core::graph::{Edge, PoseGraph};
use evpose_core::joints::JOINT_COUNT;
use evpose_core::model::GraphInput;
use evpose_core::pose::{GroundTruthPose, PoseEstimate};
use evpose_core::{Joint, SurfaceConfig};
use ndarray::ArrayView2;
use rand::rngs::SmallRng;
use rand::{Rng, SeedableRng};

/// Turn a failed condition into a criterion failure message.
pub fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

/// Run one acceptance criterion and print its single pass/fail line. The
/// line is visible under `cargo test -- --nocapture`; a failure also panics
/// with the same message so the suite stays red.
pub fn criterion(n: usize, name: &str, body: impl FnOnce() -> Result<(), String>) {
    match body() {
        Ok(()) => println!("criterion {n:2} [{name}]: PASS"),
        Err(msg) => {
            println!("criterion {n:2} [{name}]: FAIL — {msg}");
            panic!("criterion {n} [{name}] failed: {msg}");
        }
    }
}

/// Map any displayable error into the criterion failure channel.
pub fn fail(e: impl std::fmt::Display) -> String {
    e.to_string()
}

// ---------------------------------------------------------------------------
// Independent Cox–de Boor oracle.

/// B-spline basis function `N_{i,p}` over `knots` at `u`, by the textbook
/// recursion: degree-0 functions are knot-span indicators (the last nonempty
/// span closed at its right end so `u` = 1 is covered), higher degrees blend
/// the two children with the 0/0 = 0 convention.
pub fn cox_oracle(knots: &[f64], i: usize, p: usize, u: f64) -> f64 {
    if p == 0 {
        let lo = knots[i];
        let hi = knots[i + 1];
        if lo >= hi {
            return 0.0;
        }
        let domain_end = *knots.last().expect("non-empty knot vector");
        let in_span = u >= lo && (u < hi || (hi == domain_end && u == domain_end));
        return if in_span { 1.0 } else { 0.0 };
    }
    let mut value = 0.0;
    let left_den = knots[i + p] - knots[i];
    if left_den != 0.0 {
        value += (u - knots[i]) / left_den * cox_oracle(knots, i, p - 1, u);
    }
    let right_den = knots[i + p + 1] - knots[i + 1];
    if right_den != 0.0 {
        value += (knots[i + p + 1] - u) / right_den * cox_oracle(knots, i + 1, p - 1, u);
    }
    value
}

// ---------------------------------------------------------------------------
// Brute-force edge augmentation oracle.

/// Undirected, deduplicated view of an edge list for set comparison.
pub fn edge_set(edges: &[Edge]) -> Vec<(usize, usize, bool)> {
    let mut v: Vec<(usize, usize, bool)> = edges
        .iter()
        .map(|e| (e.src, e.dst, e.augmented))
        .collect();
    v.sort_unstable();
    v
}

/// Expected edge set after augmenting `base` with radius `zeta`: every
/// existing edge, plus both directions of every unconnected pair strictly
/// closer than `zeta`. Connectivity is tracked with an adjacency matrix
/// rather than the production hash set.
pub fn brute_force_augment(base: &PoseGraph, zeta: f64) -> Vec<(usize, usize, bool)> {
    let n = base.nodes.len();
    let mut adj = vec![vec![false; n]; n];
    let mut expected: Vec<(usize, usize, bool)> = Vec::new();
    for e in &base.edges {
        adj[e.src][e.dst] = true;
        expected.push((e.src, e.dst, e.augmented));
    }
    for i in 0..n {
        for j in 0..n {
            if j <= i || adj[i][j] || adj[j][i] {
                continue;
            }
            let dx = base.nodes[i].x - base.nodes[j].x;
            let dy = base.nodes[i].y - base.nodes[j].y;
            if (dx * dx + dy * dy).sqrt() < zeta {
                expected.push((i, j, true));
                expected.push((j, i, true));
            }
        }
    }
    expected.sort_unstable();
    expected
}

// ---------------------------------------------------------------------------
// Loop oracles for metrics and losses. Samples iterate per joint (outer)
// rather than per pose, the opposite nesting of the production code.

fn euclid(a: [f64; 2], b: [f64; 2]) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    (dx * dx + dy * dy).sqrt()
}

fn torso_oracle(gt: &GroundTruthPose, torso: (Joint, Joint)) -> Option<f64> {
    let (a, b) = (torso.0 as usize, torso.1 as usize);
    if !gt.visible[a] || !gt.visible[b] {
        return None;
    }
    let t = euclid(gt.joints[a], gt.joints[b]);
    (t > 0.0).then_some(t)
}

pub struct PckOracle {
    pub per_joint: [Option<f64>; JOINT_COUNT],
    pub overall: f64,
    pub skipped: usize,
    pub measured: usize,
}

/// PCK by direct definition: per joint, the fraction of measurable samples
/// whose error is strictly below `p` times the torso reference.
pub fn pck_oracle(
    preds: &[PoseEstimate],
    gts: &[GroundTruthPose],
    p: f64,
    torso: (Joint, Joint),
) -> PckOracle {
    assert_eq!(preds.len(), gts.len());
    let usable: Vec<(usize, f64)> = gts
        .iter()
        .enumerate()
        .filter_map(|(k, gt)| torso_oracle(gt, torso).map(|t| (k, t)))
        .collect();
    let mut per_joint = [None; JOINT_COUNT];
    for j in 0..JOINT_COUNT {
        let mut hits = 0usize;
        let mut total = 0usize;
        for &(k, t) in &usable {
            if !gts[k].visible[j] {
                continue;
            }
            total += 1;
            if euclid(preds[k].joints[j], gts[k].joints[j]) < p * t {
                hits += 1;
            }
        }
        if total > 0 {
            per_joint[j] = Some(hits as f64 / total as f64);
        }
    }
    PckOracle {
        per_joint,
        overall: mean_defined(&per_joint),
        skipped: gts.len() - usable.len(),
        measured: usable.len(),
    }
}

/// MPJPE by direct definition: per joint, the mean pixel error over samples
/// where the joint is visible; overall is the mean of the defined joints.
pub fn mpjpe_oracle(
    preds: &[PoseEstimate],
    gts: &[GroundTruthPose],
) -> ([Option<f64>; JOINT_COUNT], f64) {
    assert_eq!(preds.len(), gts.len());
    let mut per_joint = [None; JOINT_COUNT];
    for j in 0..JOINT_COUNT {
        let errors: Vec<f64> = preds
            .iter()
            .zip(gts)
            .filter(|(_, gt)| gt.visible[j])
            .map(|(pred, gt)| euclid(pred.joints[j], gt.joints[j]))
            .collect();
        if !errors.is_empty() {
            per_joint[j] = Some(errors.iter().sum::<f64>() / errors.len() as f64);
        }
    }
    let overall = mean_defined(&per_joint);
    (per_joint, overall)
}

fn mean_defined(per_joint: &[Option<f64>; JOINT_COUNT]) -> f64 {
    let defined: Vec<f64> = per_joint.iter().flatten().copied().collect();
    defined.iter().sum::<f64>() / defined.len() as f64
}

/// Target loss by definition: mean squared coordinate error over the visible
/// joints' 2·n_vis scalars.
pub fn target_loss_oracle(
    pred: &ArrayView2<f64>,
    target: &ArrayView2<f64>,
    visible: &[bool; JOINT_COUNT],
) -> f64 {
    let mut sq = Vec::new();
    for j in 0..JOINT_COUNT {
        if visible[j] {
            sq.push((pred[[j, 0]] - target[[j, 0]]).powi(2));
            sq.push((pred[[j, 1]] - target[[j, 1]]).powi(2));
        }
    }
    sq.iter().sum::<f64>() / sq.len() as f64
}

/// Node loss by definition: sum over nodes of each visible joint's MSE over
/// two coordinates, optionally divided by the node count.
pub fn node_loss_oracle(
    candidates: &ArrayView2<f64>,
    target: &ArrayView2<f64>,
    visible: &[bool; JOINT_COUNT],
    mean_over_nodes: bool,
) -> f64 {
    let n = candidates.nrows();
    let mut total = 0.0;
    for i in 0..n {
        for j in 0..JOINT_COUNT {
            if !visible[j] {
                continue;
            }
            let dx = candidates[[i, 2 * j]] - target[[j, 0]];
            let dy = candidates[[i, 2 * j + 1]] - target[[j, 1]];
            total += (dx * dx + dy * dy) / 2.0;
        }
    }
    if mean_over_nodes {
        total / n as f64
    } else {
        total
    }
}

// ---------------------------------------------------------------------------
// Randomized instance generators.

pub const SENSOR_W: u32 = 346;
pub const SENSOR_H: u32 = 260;

pub fn sensor_surface() -> SurfaceConfig {
    SurfaceConfig {
        width: SENSOR_W,
        height: SENSOR_H,
        ..SurfaceConfig::default()
    }
}

/// Random connected-ish graph packaged as a network input.
pub fn random_input(n: usize, seed: u64) -> GraphInput {
    let g = evpose_core::synth::random_graph(n, 3, SENSOR_W, SENSOR_H, seed);
    GraphInput::from_graph(&g, SENSOR_W, SENSOR_H, sensor_surface().zeta_max())
}

/// Ground truth with uniformly random joints. The torso pair is always
/// visible (so the frame is measurable); other joints flicker at
/// `visible_prob`.
pub fn random_gt(rng: &mut SmallRng, t: u64, visible_prob: f64) -> GroundTruthPose {
    let mut joints = [[0.0; 2]; JOINT_COUNT];
    let mut visible = [false; JOINT_COUNT];
    for j in 0..JOINT_COUNT {
        joints[j] = [
            rng.random_range(0.0..SENSOR_W as f64),
            rng.random_range(0.0..SENSOR_H as f64),
        ];
        visible[j] = rng.random_bool(visible_prob);
    }
    visible[Joint::ShoulderLeft as usize] = true;
    visible[Joint::HipRight as usize] = true;
    GroundTruthPose { t, joints, visible }
}

/// Prediction with uniformly random joints and confidences.
pub fn random_pred(rng: &mut SmallRng, t: u64) -> PoseEstimate {
    let mut joints = [[0.0; 2]; JOINT_COUNT];
    let mut confidence = [0.0; JOINT_COUNT];
    for j in 0..JOINT_COUNT {
        joints[j] = [
            rng.random_range(0.0..SENSOR_W as f64),
            rng.random_range(0.0..SENSOR_H as f64),
        ];
        confidence[j] = rng.random_range(0.0..1.0);
    }
    PoseEstimate { t, joints, confidence }
}

/// Paired random evaluation instance with `m` samples.
pub fn random_eval_instance(
    seed: u64,
    m: usize,
) -> (Vec<PoseEstimate>, Vec<GroundTruthPose>) {
    let mut rng = SmallRng::seed_from_u64(seed);
    let mut preds = Vec::with_capacity(m);
    let mut gts = Vec::with_capacity(m);
    for k in 0..m {
        let t = k as u64 * 1_000;
        gts.push(random_gt(&mut rng, t, 0.8));
        preds.push(random_pred(&mut rng, t));
    }
    (preds, gts)
}

/// Stress graph built the way the running system builds them: `m` random
/// short segments scattered over the default sensor, merged and augmented by
/// the production graph builder.
pub fn scattered_segment_input(m: usize, seed: u64) -> (PoseGraph, GraphInput) {
    use evpose_core::graph::{build_graph, GraphConfig};
    use evpose_core::line::LineSegment;

    let surface = SurfaceConfig::default();
    let mut rng = SmallRng::seed_from_u64(seed);
    let segments: Vec<LineSegment> = (0..m)
        .map(|block| {
            let x0 = rng.random_range(20.0..620.0);
            let y0 = rng.random_range(20.0..460.0);
            let angle = rng.random_range(0.0..std::f64::consts::PI);
            let len = rng.random_range(8.0..20.0);
            LineSegment {
                block,
                x0,
                y0,
                x1: (x0 + len * angle.cos()).clamp(0.0, surface.width as f64),
                y1: (y0 + len * angle.sin()).clamp(0.0, surface.height as f64),
                score: 1.0,
            }
        })
        .collect();
    let cfg = GraphConfig::default();
    let mut graph = build_graph(&segments, &cfg);
    graph.augment(cfg.zeta);
    let input = GraphInput::from_graph(&graph, surface.width, surface.height, surface.zeta_max());
    (graph, input)
}

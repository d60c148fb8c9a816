//! Synthetic event streams: a 13-joint stick figure walking back and forth,
//! rendered through an intensity-change event model.
//!
//! Each simulation step rasterizes the figure's limbs as thick capsules into
//! an occupancy bitmap; pixels whose occupancy flips between steps emit a
//! Poisson-distributed burst of events (positive where the figure arrives,
//! negative where it leaves), plus uniform background noise. Ground-truth
//! joint positions are sampled on a fixed clock. Everything is a pure
//! function of the config and seed.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::event::Event;
use crate::graph::{Edge, Node as GraphNode, PoseGraph};
use crate::joints::{Joint, JOINT_COUNT};
use crate::pose::GroundTruthPose;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub width: u32,
    pub height: u32,
    /// Total simulated time in microseconds.
    pub duration_us: u64,
    /// Simulation step; occupancy is differenced at this granularity.
    pub dt_us: u64,
    /// Ground-truth sampling period.
    pub gt_period_us: u64,
    /// One full gait cycle (both legs swing once).
    pub gait_period_us: u64,
    /// Horizontal walking speed in pixels per second; the figure paces back
    /// and forth across the middle half of the frame.
    pub walk_speed: f64,
    /// Uniform scale on all body proportions.
    pub body_scale: f64,
    /// Half-thickness of a rasterized limb, in pixels.
    pub limb_radius: f64,
    /// Mean events emitted per occupancy-flip pixel per step.
    pub edge_event_rate: f64,
    /// Background noise events per second over the whole frame.
    pub noise_rate_hz: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            width: 346,
            height: 260,
            duration_us: 2_000_000,
            dt_us: 2_000,
            gt_period_us: 10_000,
            gait_period_us: 1_000_000,
            walk_speed: 40.0,
            body_scale: 1.0,
            limb_radius: 2.5,
            edge_event_rate: 0.6,
            noise_rate_hz: 5_000.0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::InvalidConfig("frame must be nonzero".into()));
        }
        if self.dt_us == 0 || self.gt_period_us == 0 || self.gait_period_us == 0 {
            return Err(Error::InvalidConfig(
                "simulation periods must be nonzero".into(),
            ));
        }
        if self.duration_us < self.gt_period_us {
            return Err(Error::InvalidConfig(
                "duration shorter than one ground-truth period".into(),
            ));
        }
        for (name, v) in [
            ("body_scale", self.body_scale),
            ("limb_radius", self.limb_radius),
        ] {
            if !(v > 0.0) {
                return Err(Error::InvalidConfig(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        for (name, v) in [
            ("walk_speed", self.walk_speed),
            ("edge_event_rate", self.edge_event_rate),
            ("noise_rate_hz", self.noise_rate_hz),
        ] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::InvalidConfig(format!(
                    "{name} must be finite and non-negative, got {v}"
                )));
            }
        }
        Ok(())
    }
}

// Body proportions in pixels before `body_scale`.
const TORSO_LEN: f64 = 52.0;
const HEAD_LEN: f64 = 16.0;
const SHOULDER_HALF: f64 = 14.0;
const HIP_HALF: f64 = 10.0;
const UPPER_ARM: f64 = 24.0;
const FOREARM: f64 = 22.0;
const THIGH: f64 = 30.0;
const SHIN: f64 = 28.0;
const ARM_SWING: f64 = 0.55;
const LEG_SWING: f64 = 0.6;
const ELBOW_BEND: f64 = 0.35;
const KNEE_BEND: f64 = 0.4;

/// Joint positions of the walker at time `t_us`, in pixel coordinates.
/// Deterministic kinematics; no randomness.
pub fn walker_pose(cfg: &SynthConfig, t_us: u64) -> [[f64; 2]; JOINT_COUNT] {
    let s = cfg.body_scale;
    let t = t_us as f64 / 1e6;
    let phase = std::f64::consts::TAU * (t_us % cfg.gait_period_us) as f64
        / cfg.gait_period_us as f64;

    // Pace back and forth over the middle half of the frame (triangle wave).
    let lo = cfg.width as f64 * 0.25;
    let hi = cfg.width as f64 * 0.75;
    let span = hi - lo;
    let cx = if span > 0.0 && cfg.walk_speed > 0.0 {
        let d = (cfg.walk_speed * t) % (2.0 * span);
        lo + if d < span { d } else { 2.0 * span - d }
    } else {
        (lo + hi) / 2.0
    };
    // Slight vertical bob, plus the hip line placed so the figure fits.
    let leg_len = s * (THIGH + SHIN);
    let cy = cfg.height as f64 - 1.0 - leg_len - s * 3.0 * (1.0 - (2.0 * phase).cos()) / 2.0;

    let hip_c = [cx, cy];
    let shoulder_c = [cx, cy - s * TORSO_LEN];
    // Measured from straight down; positive swings forward (+x).
    let arm = ARM_SWING * phase.sin();
    let leg = LEG_SWING * phase.sin();
    let limb = |from: [f64; 2], len: f64, angle: f64| -> [f64; 2] {
        [from[0] + len * angle.sin(), from[1] + len * angle.cos()]
    };

    let mut p = [[0.0f64; 2]; JOINT_COUNT];
    p[Joint::Head as usize] = [shoulder_c[0], shoulder_c[1] - s * HEAD_LEN];
    p[Joint::ShoulderRight as usize] = [shoulder_c[0] + s * SHOULDER_HALF, shoulder_c[1]];
    p[Joint::ShoulderLeft as usize] = [shoulder_c[0] - s * SHOULDER_HALF, shoulder_c[1]];
    p[Joint::HipRight as usize] = [hip_c[0] + s * HIP_HALF, hip_c[1]];
    p[Joint::HipLeft as usize] = [hip_c[0] - s * HIP_HALF, hip_c[1]];
    // Arms swing in antiphase with the same-side leg.
    p[Joint::ElbowRight as usize] =
        limb(p[Joint::ShoulderRight as usize], s * UPPER_ARM, -arm);
    p[Joint::ElbowLeft as usize] = limb(p[Joint::ShoulderLeft as usize], s * UPPER_ARM, arm);
    p[Joint::WristRight as usize] = limb(
        p[Joint::ElbowRight as usize],
        s * FOREARM,
        -arm - ELBOW_BEND,
    );
    p[Joint::WristLeft as usize] =
        limb(p[Joint::ElbowLeft as usize], s * FOREARM, arm - ELBOW_BEND);
    p[Joint::KneeRight as usize] = limb(p[Joint::HipRight as usize], s * THIGH, leg);
    p[Joint::KneeLeft as usize] = limb(p[Joint::HipLeft as usize], s * THIGH, -leg);
    // The shin trails the thigh; the knee bends most mid-swing.
    let bend_r = KNEE_BEND * (1.0 - phase.cos()) / 2.0;
    let bend_l = KNEE_BEND * (1.0 + phase.cos()) / 2.0;
    p[Joint::AnkleRight as usize] =
        limb(p[Joint::KneeRight as usize], s * SHIN, leg - bend_r);
    p[Joint::AnkleLeft as usize] =
        limb(p[Joint::KneeLeft as usize], s * SHIN, -leg - bend_l);
    p
}

fn ground_truth_at(cfg: &SynthConfig, t_us: u64) -> GroundTruthPose {
    let joints = walker_pose(cfg, t_us);
    let visible = std::array::from_fn(|j| {
        let [x, y] = joints[j];
        x >= 0.0 && y >= 0.0 && x < cfg.width as f64 && y < cfg.height as f64
    });
    GroundTruthPose { t: t_us, joints, visible }
}

/// Distance from point `p` to segment `ab`.
fn dist_to_segment(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    let ab = [b[0] - a[0], b[1] - a[1]];
    let ap = [p[0] - a[0], p[1] - a[1]];
    let len2 = ab[0] * ab[0] + ab[1] * ab[1];
    let t = if len2 > 0.0 {
        ((ap[0] * ab[0] + ap[1] * ab[1]) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let d = [ap[0] - t * ab[0], ap[1] - t * ab[1]];
    (d[0] * d[0] + d[1] * d[1]).sqrt()
}

/// Rasterize the figure at `t_us` into a row-major occupancy bitmap.
fn rasterize(cfg: &SynthConfig, t_us: u64, out: &mut [bool]) {
    out.fill(false);
    let joints = walker_pose(cfg, t_us);
    let r = cfg.limb_radius;
    let (w, h) = (cfg.width as i64, cfg.height as i64);
    let mut paint_capsule = |a: [f64; 2], b: [f64; 2], radius: f64| {
        let x0 = ((a[0].min(b[0]) - radius).floor() as i64).max(0);
        let x1 = ((a[0].max(b[0]) + radius).ceil() as i64).min(w - 1);
        let y0 = ((a[1].min(b[1]) - radius).floor() as i64).max(0);
        let y1 = ((a[1].max(b[1]) + radius).ceil() as i64).min(h - 1);
        for y in y0..=y1 {
            for x in x0..=x1 {
                if dist_to_segment([x as f64, y as f64], a, b) <= radius {
                    out[(y * w + x) as usize] = true;
                }
            }
        }
    };
    for (a, b) in crate::joints::LIMBS {
        paint_capsule(joints[a as usize], joints[b as usize], r);
    }
    // The head gets a blob rather than a line.
    let head = joints[Joint::Head as usize];
    paint_capsule(head, head, r + 3.5 * cfg.body_scale);
}

/// Generate the event stream and ground-truth track for one sequence.
/// Events are timestamp-sorted; polarity is `true` where the figure arrives
/// at a pixel and `false` where it leaves.
pub fn generate(cfg: &SynthConfig, seed: u64) -> Result<(Vec<Event>, Vec<GroundTruthPose>)> {
    cfg.validate()?;
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let npix = (cfg.width * cfg.height) as usize;
    let mut prev = vec![false; npix];
    let mut cur = vec![false; npix];
    rasterize(cfg, 0, &mut prev);

    let mut events: Vec<Event> = Vec::new();
    let mut window: Vec<Event> = Vec::new();
    let edge_burst = (cfg.edge_event_rate > 0.0)
        .then(|| Poisson::new(cfg.edge_event_rate).expect("positive rate"));
    let noise_mean = cfg.noise_rate_hz * cfg.dt_us as f64 / 1e6;
    let noise_burst =
        (noise_mean > 0.0).then(|| Poisson::new(noise_mean).expect("positive rate"));

    let steps = cfg.duration_us / cfg.dt_us;
    for k in 1..=steps {
        let t0 = (k - 1) * cfg.dt_us;
        let t1 = k * cfg.dt_us;
        rasterize(cfg, t1, &mut cur);
        window.clear();
        for i in 0..npix {
            if prev[i] == cur[i] {
                continue;
            }
            let n = edge_burst.map_or(0, |p| p.sample(&mut rng) as u64);
            let x = (i % cfg.width as usize) as u16;
            let y = (i / cfg.width as usize) as u16;
            for _ in 0..n {
                let t = rng.random_range(t0..t1) + 1;
                window.push(Event::new(x, y, t, cur[i]));
            }
        }
        if let Some(p) = noise_burst {
            for _ in 0..p.sample(&mut rng) as u64 {
                let x = rng.random_range(0..cfg.width) as u16;
                let y = rng.random_range(0..cfg.height) as u16;
                let t = rng.random_range(t0..t1) + 1;
                window.push(Event::new(x, y, t, rng.random_bool(0.5)));
            }
        }
        window.sort_by_key(|e| e.t);
        events.extend_from_slice(&window);
        std::mem::swap(&mut prev, &mut cur);
    }

    let mut gts = Vec::new();
    let mut t = cfg.gt_period_us;
    while t <= cfg.duration_us {
        gts.push(ground_truth_at(cfg, t));
        t += cfg.gt_period_us;
    }
    Ok((events, gts))
}

/// Random pose graph for load and latency testing: `n` nodes uniform over
/// the frame, each proposing `k` partners (self-loops and duplicates
/// dropped), every kept pair materialized in both directions. The walker
/// produces only small graphs, so stress tests build their own.
pub fn random_graph(n: usize, k: usize, width: u32, height: u32, seed: u64) -> PoseGraph {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let nodes: Vec<GraphNode> = (0..n)
        .map(|_| GraphNode {
            x: rng.random_range(0.0..width as f64),
            y: rng.random_range(0.0..height as f64),
        })
        .collect();
    let mut seen = std::collections::BTreeSet::new();
    let mut edges = Vec::new();
    for src in 0..n {
        for _ in 0..k {
            let dst = rng.random_range(0..n);
            if src != dst && seen.insert((src.min(dst), src.max(dst))) {
                edges.push(Edge { src, dst, augmented: false });
                edges.push(Edge { src: dst, dst: src, augmented: false });
            }
        }
    }
    PoseGraph { nodes, edges }
}

//! Per-block line extraction.
//!
//! Each block of the accumulation surface is summarized by at most one line
//! segment. A RANSAC loop proposes lines through event pairs, the winning
//! consensus set is refined with a total-least-squares fit, and the result is
//! kept only if its score clears a threshold. The score favours lines that
//! are densely and completely supported by the block's events.

mod io;

pub use io::{read_segments, write_segments};

use rand::rngs::SmallRng;
use rand::{Rng, SeedableRng};

use crate::error::{Error, Result};
use crate::event::{Event, PixelRect};

/// Infinite line in Hesse normal form: `x·cos(theta) + y·sin(theta) = rho`,
/// with `theta` canonicalized to `[0, pi)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineModel {
    pub theta: f64,
    pub rho: f64,
}

impl LineModel {
    /// Canonicalize: `(theta + pi, -rho)` names the same line, so fold the
    /// angle into `[0, pi)` and flip `rho` accordingly.
    pub fn new(theta: f64, rho: f64) -> Self {
        let mut theta = theta.rem_euclid(2.0 * std::f64::consts::PI);
        let mut rho = rho;
        if theta >= std::f64::consts::PI {
            theta -= std::f64::consts::PI;
            rho = -rho;
        }
        Self { theta, rho }
    }

    /// Line through two points. `None` if they coincide.
    pub fn from_points(a: [f64; 2], b: [f64; 2]) -> Option<Self> {
        let dx = b[0] - a[0];
        let dy = b[1] - a[1];
        let len = (dx * dx + dy * dy).sqrt();
        if len == 0.0 {
            return None;
        }
        // Normal is the direction rotated by 90 degrees.
        let nx = -dy / len;
        let ny = dx / len;
        let theta = ny.atan2(nx);
        let rho = a[0] * nx + a[1] * ny;
        Some(Self::new(theta, rho))
    }

    /// Unit normal `(cos theta, sin theta)`.
    pub fn normal(&self) -> [f64; 2] {
        [self.theta.cos(), self.theta.sin()]
    }

    /// Unit direction along the line, `(-sin theta, cos theta)`.
    pub fn direction(&self) -> [f64; 2] {
        [-self.theta.sin(), self.theta.cos()]
    }

    /// Point on the line closest to the origin.
    pub fn foot(&self) -> [f64; 2] {
        let n = self.normal();
        [self.rho * n[0], self.rho * n[1]]
    }

    /// Perpendicular distance from a point.
    pub fn distance(&self, p: [f64; 2]) -> f64 {
        let n = self.normal();
        (p[0] * n[0] + p[1] * n[1] - self.rho).abs()
    }

    /// Signed coordinate of a point's projection along the line direction,
    /// measured from the foot point.
    pub fn project(&self, p: [f64; 2]) -> f64 {
        let f = self.foot();
        let d = self.direction();
        (p[0] - f[0]) * d[0] + (p[1] - f[1]) * d[1]
    }

    /// Point at projection coordinate `t`.
    pub fn point_at(&self, t: f64) -> [f64; 2] {
        let f = self.foot();
        let d = self.direction();
        [f[0] + t * d[0], f[1] + t * d[1]]
    }

    /// Angular separation to another line, in `[0, pi/2]`.
    pub fn angle_to(&self, other: &LineModel) -> f64 {
        let d = (self.theta - other.theta).abs();
        d.min(std::f64::consts::PI - d)
    }

    /// Projection interval of the line's intersection with a rectangle, or
    /// `None` if the line misses it.
    pub fn clip_to_rect(&self, rect: &PixelRect) -> Option<(f64, f64)> {
        let f = self.foot();
        let d = self.direction();
        let mut t0 = f64::NEG_INFINITY;
        let mut t1 = f64::INFINITY;
        for axis in 0..2 {
            let (lo, hi) = if axis == 0 {
                (rect.x0, rect.x1)
            } else {
                (rect.y0, rect.y1)
            };
            if d[axis].abs() < 1e-12 {
                if f[axis] < lo || f[axis] > hi {
                    return None;
                }
            } else {
                let a = (lo - f[axis]) / d[axis];
                let b = (hi - f[axis]) / d[axis];
                t0 = t0.max(a.min(b));
                t1 = t1.min(a.max(b));
            }
        }
        (t0 <= t1).then_some((t0, t1))
    }
}

/// Total-least-squares line through a point set: the line minimizing the sum
/// of squared perpendicular distances. Its normal is the minor axis of the
/// scatter matrix, obtained in closed form from the centered second moments.
/// `None` when the points do not determine a direction (fewer than two
/// distinct points, or an isotropic set).
pub fn fit_line_tls(points: &[[f64; 2]]) -> Option<LineModel> {
    if points.len() < 2 {
        return None;
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p[0]).sum::<f64>() / n;
    let my = points.iter().map(|p| p[1]).sum::<f64>() / n;
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for p in points {
        let dx = p[0] - mx;
        let dy = p[1] - my;
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    if sxx == 0.0 && syy == 0.0 && sxy == 0.0 {
        return None;
    }
    // Major-axis angle of the scatter matrix; the normal is 90 degrees away.
    let theta_major = 0.5 * (2.0 * sxy).atan2(sxx - syy);
    let theta = theta_major + std::f64::consts::FRAC_PI_2;
    let rho = mx * theta.cos() + my * theta.sin();
    Some(LineModel::new(theta, rho))
}

/// Line segment extracted from one block.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineSegment {
    pub block: usize,
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
    pub score: f64,
}

impl LineSegment {
    pub fn endpoints(&self) -> ([f64; 2], [f64; 2]) {
        ([self.x0, self.y0], [self.x1, self.y1])
    }

    pub fn length(&self) -> f64 {
        ((self.x1 - self.x0).powi(2) + (self.y1 - self.y0).powi(2)).sqrt()
    }
}

/// RANSAC and scoring parameters.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct DetectorConfig {
    /// Blocks with fewer stored events are skipped.
    pub min_events: usize,
    /// RANSAC proposal count per block.
    pub ransac_iters: usize,
    /// Inlier threshold: perpendicular distance in pixels.
    pub inlier_dist: f64,
    /// Segments scoring below this are discarded.
    pub score_threshold: f64,
    /// Seed for the per-block sampling RNG.
    pub seed: u64,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self {
            min_events: 10,
            ransac_iters: 50,
            inlier_dist: 1.5,
            score_threshold: 0.3,
            seed: 0,
        }
    }
}

impl DetectorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.min_events < 2 {
            return Err(Error::InvalidConfig(
                "min_events must be at least 2 to define a line".into(),
            ));
        }
        if self.ransac_iters == 0 {
            return Err(Error::InvalidConfig("ransac_iters must be positive".into()));
        }
        if !self.inlier_dist.is_finite() || self.inlier_dist <= 0.0 {
            return Err(Error::InvalidConfig(format!(
                "inlier_dist must be finite and positive, got {}",
                self.inlier_dist
            )));
        }
        if !self.score_threshold.is_finite() || !(0.0..=1.0).contains(&self.score_threshold) {
            return Err(Error::InvalidConfig(format!(
                "score_threshold must lie in [0, 1], got {}",
                self.score_threshold
            )));
        }
        Ok(())
    }
}

/// Result of fitting one block, including diagnostics used by tests and
/// tooling.
#[derive(Debug, Clone)]
pub struct BlockDetection {
    pub model: LineModel,
    pub segment: LineSegment,
    pub inlier_count: usize,
    pub event_count: usize,
}

fn mix_seed(seed: u64, block: usize) -> u64 {
    // splitmix64 finalizer over the combined seed, so block RNG streams are
    // decorrelated and independent of processing order.
    let mut z = seed ^ (block as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Fit at most one line segment to a block's events.
///
/// `events` is the block snapshot (active and inactive entries both count as
/// support), `core` the block's active rectangle, and `block` its index. The
/// segment spans the inlier extent clipped to the core rectangle, so segments
/// from adjacent blocks meet at block borders.
pub fn detect_block(
    events: &[Event],
    core: &PixelRect,
    block: usize,
    cfg: &DetectorConfig,
) -> Option<BlockDetection> {
    if events.len() < cfg.min_events {
        return None;
    }
    let points: Vec<[f64; 2]> = events.iter().map(|e| [e.x as f64, e.y as f64]).collect();
    let mut rng = SmallRng::seed_from_u64(mix_seed(cfg.seed, block));

    let mut best: Option<(usize, LineModel)> = None;
    for _ in 0..cfg.ransac_iters {
        let i = rng.random_range(0..points.len());
        let j = rng.random_range(0..points.len());
        if i == j {
            continue;
        }
        let Some(candidate) = LineModel::from_points(points[i], points[j]) else {
            continue;
        };
        let inliers = points
            .iter()
            .filter(|p| candidate.distance(**p) <= cfg.inlier_dist)
            .count();
        if best.as_ref().is_none_or(|(n, _)| inliers > *n) {
            best = Some((inliers, candidate));
        }
    }
    let (_, coarse) = best?;

    // Refine on the consensus set, then re-evaluate support against the
    // refined line.
    let consensus: Vec<[f64; 2]> = points
        .iter()
        .copied()
        .filter(|p| coarse.distance(*p) <= cfg.inlier_dist)
        .collect();
    let model = fit_line_tls(&consensus)?;
    let inliers: Vec<[f64; 2]> = points
        .iter()
        .copied()
        .filter(|p| model.distance(*p) <= cfg.inlier_dist)
        .collect();
    if inliers.len() < 2 {
        return None;
    }

    // Segment extent: inlier projections intersected with the line's span
    // across the core rectangle.
    let (mut t_lo, mut t_hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for p in &inliers {
        let t = model.project(*p);
        t_lo = t_lo.min(t);
        t_hi = t_hi.max(t);
    }
    let (c_lo, c_hi) = model.clip_to_rect(core)?;
    let s_lo = t_lo.max(c_lo);
    let s_hi = t_hi.min(c_hi);
    if s_hi <= s_lo {
        return None;
    }

    // Occupancy: fraction of one-pixel bins along the clipped span holding at
    // least one inlier projection.
    let n_bins = (s_hi - s_lo).ceil().max(1.0) as usize;
    let mut occupied = vec![false; n_bins];
    for p in &inliers {
        let t = model.project(*p);
        if t >= s_lo && t <= s_hi {
            let bin = ((t - s_lo).floor() as usize).min(n_bins - 1);
            occupied[bin] = true;
        }
    }
    let occupancy = occupied.iter().filter(|b| **b).count() as f64 / n_bins as f64;
    let effective = inliers.len() as f64 / events.len() as f64;
    let score = occupancy * effective;
    if score < cfg.score_threshold {
        return None;
    }

    let p0 = model.point_at(s_lo);
    let p1 = model.point_at(s_hi);
    Some(BlockDetection {
        model,
        segment: LineSegment {
            block,
            x0: p0[0],
            y0: p0[1],
            x1: p1[0],
            y1: p1[1],
            score,
        },
        inlier_count: inliers.len(),
        event_count: events.len(),
    })
}

/// Run block-wise detection over the whole surface, in block order.
pub fn detect_lines(
    surface: &crate::event::AccumulationSurface,
    cfg: &DetectorConfig,
) -> Vec<LineSegment> {
    let mut segments = Vec::new();
    for block in 0..surface.block_count() {
        let events = surface.snapshot_block(block).expect("index in range");
        let core = surface.config().block_rect(block);
        if let Some(det) = detect_block(&events, &core, block, cfg) {
            segments.push(det.segment);
        }
    }
    segments
}

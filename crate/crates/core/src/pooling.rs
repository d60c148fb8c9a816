//! Confidence-weighted pooling from node features to joint estimates.
//!
//! Every node proposes a position for each joint — its own (normalized)
//! location plus a learned offset — and a confidence logit. Softmax over the
//! nodes turns the logits into convex weights, and the estimate is the
//! weighted sum of proposals:
//!
//! `y_j = sum_i softmax_i(c_{.j}) * (p_i + o_{ij})`
//!
//! In `Single` mode one logit per (node, joint) weights both axes; in
//! `AxisSeparated` mode x and y get independent logits and softmaxes. The
//! reported per-joint confidence is the concentration of the weights:
//! `1 - H(w) / ln(N)`, which is 1 when one node dominates and 0 for a
//! uniform spread.

use ndarray::{Array1, Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gnn::scalar::Scalar;
use crate::joints::JOINT_COUNT;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConfidenceMode {
    /// One confidence per (node, joint); both axes share the weights.
    #[default]
    Single,
    /// Separate confidences and softmaxes for x and y.
    AxisSeparated,
}

impl ConfidenceMode {
    /// Number of logit columns per joint.
    fn logit_axes(self) -> usize {
        match self {
            ConfidenceMode::Single => 1,
            ConfidenceMode::AxisSeparated => 2,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PoolingHead<T> {
    /// `[feat, 2 * J]` offset projection.
    pub w_off: Array2<T>,
    pub b_off: Array1<T>,
    /// `[feat, J]` (single) or `[feat, 2 * J]` (axis-separated) logits.
    pub w_conf: Array2<T>,
    pub b_conf: Array1<T>,
    pub mode: ConfidenceMode,
}

/// Joint estimates in the normalized coordinate system plus confidences.
#[derive(Debug, Clone)]
pub struct PooledPose {
    pub pred: Array2<f64>,
    pub confidence: [f64; JOINT_COUNT],
}

impl PooledPose {
    /// Scale the unit-square prediction back to pixel coordinates.
    pub fn to_estimate(&self, t: u64, width: u32, height: u32) -> crate::pose::PoseEstimate {
        let joints = std::array::from_fn(|j| {
            [
                self.pred[[j, 0]] * width as f64,
                self.pred[[j, 1]] * height as f64,
            ]
        });
        crate::pose::PoseEstimate {
            t,
            joints,
            confidence: self.confidence,
        }
    }
}

pub struct PoolCache {
    h: Array2<f64>,
    offsets: Array2<f64>,
    /// Softmax weights, `[N, J]` or `[N, 2J]` matching the mode.
    weights: Array2<f64>,
    positions: Array2<f64>,
}

pub struct PoolGrads {
    pub w_off: Array2<f64>,
    pub b_off: Array1<f64>,
    pub w_conf: Array2<f64>,
    pub b_conf: Array1<f64>,
}

/// Column-wise softmax with the usual max-shift for stability.
fn softmax_column<T: Scalar>(logits: &Array2<T>, col: usize) -> Vec<f64> {
    let n = logits.nrows();
    let mut m = f64::NEG_INFINITY;
    for i in 0..n {
        m = m.max(logits[[i, col]].to_f64());
    }
    let mut w = Vec::with_capacity(n);
    let mut sum = 0.0;
    for i in 0..n {
        let e = (logits[[i, col]].to_f64() - m).exp();
        w.push(e);
        sum += e;
    }
    for v in &mut w {
        *v /= sum;
    }
    w
}

/// Weight concentration: `1 - H(w)/ln(N)`; defined as 1 for a single node.
fn concentration(w: &[f64]) -> f64 {
    let n = w.len();
    if n <= 1 {
        return 1.0;
    }
    let h: f64 = w
        .iter()
        .filter(|v| **v > 0.0)
        .map(|v| -v * v.ln())
        .sum();
    1.0 - h / (n as f64).ln()
}

impl<T: Scalar> PoolingHead<T> {
    pub fn new(feat_dim: usize, mode: ConfidenceMode) -> Self {
        let conf_cols = JOINT_COUNT * mode.logit_axes();
        Self {
            w_off: Array2::from_elem((feat_dim, 2 * JOINT_COUNT), T::zero()),
            b_off: Array1::from_elem(2 * JOINT_COUNT, T::zero()),
            w_conf: Array2::from_elem((feat_dim, conf_cols), T::zero()),
            b_conf: Array1::from_elem(conf_cols, T::zero()),
            mode,
        }
    }

    pub fn feat_dim(&self) -> usize {
        self.w_off.nrows()
    }

    fn check(&self, h: &ArrayView2<T>, positions: &ArrayView2<T>) -> Result<()> {
        if h.ncols() != self.feat_dim() {
            return Err(Error::DimensionMismatch {
                context: "pooling feature dim",
                expected: self.feat_dim(),
                found: h.ncols(),
            });
        }
        if positions.nrows() != h.nrows() || positions.ncols() != 2 {
            return Err(Error::DimensionMismatch {
                context: "pooling position rows",
                expected: h.nrows(),
                found: positions.nrows(),
            });
        }
        if h.nrows() == 0 {
            return Err(Error::NoEstimate);
        }
        Ok(())
    }

    /// Pool node features `h` (`[N, feat]`) and normalized positions
    /// (`[N, 2]`) into per-joint estimates.
    pub fn forward(&self, h: &ArrayView2<T>, positions: &ArrayView2<T>) -> Result<PooledPose> {
        Ok(self.forward_impl(h, positions)?.0)
    }

    /// Forward pass that also returns the per-node candidate matrix
    /// `[n, 2 * JOINT_COUNT]` (position plus predicted offset).
    pub fn forward_detailed(
        &self,
        h: &ArrayView2<T>,
        positions: &ArrayView2<T>,
    ) -> Result<(PooledPose, Array2<f64>)> {
        let (pose, _, offsets) = self.forward_impl(h, positions)?;
        let mut cand = offsets;
        for i in 0..h.nrows() {
            for j in 0..JOINT_COUNT {
                for a in 0..2 {
                    cand[[i, 2 * j + a]] += positions[[i, a]].to_f64();
                }
            }
        }
        Ok((pose, cand))
    }

    fn forward_impl(
        &self,
        h: &ArrayView2<T>,
        positions: &ArrayView2<T>,
    ) -> Result<(PooledPose, Array2<f64>, Array2<f64>)> {
        self.check(h, positions)?;
        let n = h.nrows();
        let mut offsets = h.dot(&self.w_off);
        for mut row in offsets.rows_mut() {
            for (c, v) in row.iter_mut().enumerate() {
                *v = *v + self.b_off[c];
            }
        }
        let mut logits = h.dot(&self.w_conf);
        for mut row in logits.rows_mut() {
            for (c, v) in row.iter_mut().enumerate() {
                *v = *v + self.b_conf[c];
            }
        }

        let axes = self.mode.logit_axes();
        let mut weights = Array2::zeros((n, JOINT_COUNT * axes));
        let mut pred = Array2::zeros((JOINT_COUNT, 2));
        let mut confidence = [0.0; JOINT_COUNT];
        for j in 0..JOINT_COUNT {
            match self.mode {
                ConfidenceMode::Single => {
                    let w = softmax_column(&logits, j);
                    for a in 0..2 {
                        let mut acc = 0.0;
                        for i in 0..n {
                            let cand = positions[[i, a]].to_f64() + offsets[[i, 2 * j + a]].to_f64();
                            acc += w[i] * cand;
                        }
                        pred[[j, a]] = acc;
                    }
                    confidence[j] = concentration(&w);
                    for i in 0..n {
                        weights[[i, j]] = w[i];
                    }
                }
                ConfidenceMode::AxisSeparated => {
                    let mut conf_sum = 0.0;
                    for a in 0..2 {
                        let w = softmax_column(&logits, 2 * j + a);
                        let mut acc = 0.0;
                        for i in 0..n {
                            let cand = positions[[i, a]].to_f64() + offsets[[i, 2 * j + a]].to_f64();
                            acc += w[i] * cand;
                        }
                        pred[[j, a]] = acc;
                        conf_sum += concentration(&w);
                        for i in 0..n {
                            weights[[i, 2 * j + a]] = w[i];
                        }
                    }
                    confidence[j] = conf_sum / 2.0;
                }
            }
        }
        let offsets64 = offsets.mapv(|v| v.to_f64());
        Ok((PooledPose { pred, confidence }, weights, offsets64))
    }
}

impl PoolingHead<f64> {
    /// Forward pass retaining intermediates for backward.
    pub fn forward_cached(
        &self,
        h: &ArrayView2<f64>,
        positions: &ArrayView2<f64>,
    ) -> Result<(PooledPose, PoolCache)> {
        let (pose, weights, offsets) = self.forward_impl(h, positions)?;
        let cache = PoolCache {
            h: h.to_owned(),
            offsets,
            weights,
            positions: positions.to_owned(),
        };
        Ok((pose, cache))
    }

    /// Per-node joint proposals from a cached forward pass: `[N, 2J]` with
    /// `cand[i, 2j+a] = position[i, a] + offset[i, 2j+a]`. These are the
    /// quantities the per-node loss supervises directly.
    pub fn candidates(&self, cache: &PoolCache) -> Array2<f64> {
        let n = cache.h.nrows();
        let mut cand = cache.offsets.clone();
        for i in 0..n {
            for j in 0..JOINT_COUNT {
                for a in 0..2 {
                    cand[[i, 2 * j + a]] += cache.positions[[i, a]];
                }
            }
        }
        cand
    }

    /// Backpropagate `dpred` (`[J, 2]`, gradient on the normalized joint
    /// estimates). Confidences are a readout, not a trained quantity, so no
    /// gradient flows through them. Returns the gradient on `h`.
    pub fn backward(&self, cache: &PoolCache, dpred: &ArrayView2<f64>, grads: &mut PoolGrads) -> Array2<f64> {
        self.backward_with_candidates(cache, dpred, None, grads)
    }

    /// [`backward`](Self::backward) with an additional gradient applied
    /// straight to the per-node candidates (`[N, 2J]`), as produced by the
    /// per-node loss. Candidates are position plus offset, so this gradient
    /// flows through the offset projection only.
    pub fn backward_with_candidates(
        &self,
        cache: &PoolCache,
        dpred: &ArrayView2<f64>,
        d_candidates: Option<&ArrayView2<f64>>,
        grads: &mut PoolGrads,
    ) -> Array2<f64> {
        let n = cache.h.nrows();
        let mut d_off = match d_candidates {
            Some(d) => d.to_owned(),
            None => Array2::zeros((n, 2 * JOINT_COUNT)),
        };
        let axes = self.mode.logit_axes();
        let mut d_logit = Array2::zeros((n, JOINT_COUNT * axes));

        for j in 0..JOINT_COUNT {
            match self.mode {
                ConfidenceMode::Single => {
                    // dw accumulated over both axes, then softmax backward.
                    let mut dw = vec![0.0; n];
                    for a in 0..2 {
                        for i in 0..n {
                            let w = cache.weights[[i, j]];
                            let cand = cache.positions[[i, a]] + cache.offsets[[i, 2 * j + a]];
                            d_off[[i, 2 * j + a]] += w * dpred[[j, a]];
                            dw[i] += dpred[[j, a]] * cand;
                        }
                    }
                    let dot: f64 = (0..n).map(|i| cache.weights[[i, j]] * dw[i]).sum();
                    for i in 0..n {
                        d_logit[[i, j]] = cache.weights[[i, j]] * (dw[i] - dot);
                    }
                }
                ConfidenceMode::AxisSeparated => {
                    for a in 0..2 {
                        let col = 2 * j + a;
                        let mut dw = vec![0.0; n];
                        for i in 0..n {
                            let w = cache.weights[[i, col]];
                            let cand = cache.positions[[i, a]] + cache.offsets[[i, col]];
                            d_off[[i, col]] += w * dpred[[j, a]];
                            dw[i] = dpred[[j, a]] * cand;
                        }
                        let dot: f64 = (0..n).map(|i| cache.weights[[i, col]] * dw[i]).sum();
                        for i in 0..n {
                            d_logit[[i, col]] = cache.weights[[i, col]] * (dw[i] - dot);
                        }
                    }
                }
            }
        }

        grads.w_off += &cache.h.t().dot(&d_off);
        grads.b_off += &d_off.sum_axis(ndarray::Axis(0));
        grads.w_conf += &cache.h.t().dot(&d_logit);
        grads.b_conf += &d_logit.sum_axis(ndarray::Axis(0));
        d_off.dot(&self.w_off.t()) + d_logit.dot(&self.w_conf.t())
    }

    pub fn zero_grads(&self) -> PoolGrads {
        PoolGrads {
            w_off: Array2::zeros(self.w_off.raw_dim()),
            b_off: Array1::zeros(self.b_off.raw_dim()),
            w_conf: Array2::zeros(self.w_conf.raw_dim()),
            b_conf: Array1::zeros(self.b_conf.raw_dim()),
        }
    }
}

//! Batch normalization over the nodes of a graph batch.
//!
//! Statistics are per feature, computed across all nodes fed to the layer in
//! one pass, with biased variance. The training forward is pure: it returns
//! the batch statistics instead of mutating the running estimates, and the
//! caller decides when to fold them in. Inference normalizes with the
//! running estimates.

use ndarray::{Array1, Array2, ArrayView2, Axis};

use crate::gnn::scalar::Scalar;

pub const BN_EPS: f64 = 1e-5;
pub const BN_MOMENTUM: f64 = 0.1;

#[derive(Debug, Clone)]
pub struct BatchNorm<T> {
    pub scale: Array1<T>,
    pub shift: Array1<T>,
    pub running_mean: Array1<T>,
    pub running_var: Array1<T>,
}

/// Batch statistics from one training forward pass.
#[derive(Debug, Clone)]
pub struct BatchStats {
    pub mean: Array1<f64>,
    /// Biased (population) variance.
    pub var: Array1<f64>,
}

pub struct NormCache {
    xhat: Array2<f64>,
    inv_std: Array1<f64>,
}

pub struct NormGrads {
    pub scale: Array1<f64>,
    pub shift: Array1<f64>,
}

impl<T: Scalar> BatchNorm<T> {
    pub fn new(dim: usize) -> Self {
        Self {
            scale: Array1::from_elem(dim, T::from_f64(1.0)),
            shift: Array1::from_elem(dim, T::zero()),
            running_mean: Array1::from_elem(dim, T::zero()),
            running_var: Array1::from_elem(dim, T::from_f64(1.0)),
        }
    }

    pub fn dim(&self) -> usize {
        self.scale.len()
    }

    /// Normalize with running statistics (inference path).
    pub fn forward_eval(&self, x: &ArrayView2<T>) -> Array2<T> {
        // Precompute per-feature affine: y = x * a + b.
        let dim = self.dim();
        let mut a = Vec::with_capacity(dim);
        let mut b = Vec::with_capacity(dim);
        for c in 0..dim {
            let inv = 1.0 / (self.running_var[c].to_f64() + BN_EPS).sqrt();
            let ac = T::from_f64(inv) * self.scale[c];
            a.push(ac);
            b.push(self.shift[c] - self.running_mean[c] * ac);
        }
        let mut y = x.to_owned();
        for mut row in y.rows_mut() {
            for (c, v) in row.iter_mut().enumerate() {
                *v = *v * a[c] + b[c];
            }
        }
        y
    }
}

impl BatchNorm<f64> {
    /// Normalize with batch statistics. Pure: running estimates are not
    /// touched; apply the returned stats via [`update_running`] when the
    /// step is committed.
    ///
    /// [`update_running`]: Self::update_running
    pub fn forward_train(&self, x: &ArrayView2<f64>) -> (Array2<f64>, NormCache, BatchStats) {
        let n = x.nrows().max(1) as f64;
        let mean = x.sum_axis(Axis(0)) / n;
        let mut var = Array1::<f64>::zeros(self.dim());
        for row in x.rows() {
            for (c, v) in row.iter().enumerate() {
                let d = v - mean[c];
                var[c] += d * d;
            }
        }
        var /= n;

        let inv_std = var.mapv(|v| 1.0 / (v + BN_EPS).sqrt());
        let mut xhat = x.to_owned();
        for mut row in xhat.rows_mut() {
            for (c, v) in row.iter_mut().enumerate() {
                *v = (*v - mean[c]) * inv_std[c];
            }
        }
        let mut y = xhat.clone();
        for mut row in y.rows_mut() {
            for (c, v) in row.iter_mut().enumerate() {
                *v = *v * self.scale[c] + self.shift[c];
            }
        }
        (y, NormCache { xhat, inv_std }, BatchStats { mean, var })
    }

    /// Fold batch statistics into the running estimates:
    /// `running = (1 - momentum) * running + momentum * batch`.
    pub fn update_running(&mut self, stats: &BatchStats) {
        for c in 0..self.dim() {
            self.running_mean[c] = (1.0 - BN_MOMENTUM) * self.running_mean[c] + BN_MOMENTUM * stats.mean[c];
            self.running_var[c] = (1.0 - BN_MOMENTUM) * self.running_var[c] + BN_MOMENTUM * stats.var[c];
        }
    }

    /// Backward through the batch-statistics normalization.
    pub fn backward(&self, cache: &NormCache, dy: &ArrayView2<f64>, grads: &mut NormGrads) -> Array2<f64> {
        let n = dy.nrows() as f64;
        let dim = self.dim();
        let mut sum_dy = Array1::<f64>::zeros(dim);
        let mut sum_dy_xhat = Array1::<f64>::zeros(dim);
        for (row, drow) in cache.xhat.rows().into_iter().zip(dy.rows()) {
            for c in 0..dim {
                sum_dy[c] += drow[c];
                sum_dy_xhat[c] += drow[c] * row[c];
            }
        }
        for c in 0..dim {
            grads.shift[c] += sum_dy[c];
            grads.scale[c] += sum_dy_xhat[c];
        }
        let mut dx = Array2::zeros(dy.raw_dim());
        for i in 0..dy.nrows() {
            for c in 0..dim {
                let term = dy[[i, c]] - sum_dy[c] / n - cache.xhat[[i, c]] * sum_dy_xhat[c] / n;
                dx[[i, c]] = self.scale[c] * cache.inv_std[c] * term;
            }
        }
        dx
    }

    pub fn zero_grads(&self) -> NormGrads {
        NormGrads {
            scale: Array1::zeros(self.dim()),
            shift: Array1::zeros(self.dim()),
        }
    }
}

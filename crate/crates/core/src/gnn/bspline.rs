//! Open uniform B-spline basis on the unit interval.
//!
//! A kernel of size `k` and degree `d` has `k` basis functions over the knot
//! vector with `d + 1` zeros, `k - d - 1` uniform interior knots, and `d + 1`
//! ones. At any `u` in `[0, 1]` exactly `d + 1` functions are nonzero; their
//! values are computed with the de Boor triangular scheme and sum to one.
//! Two-dimensional queries take the tensor product, giving `(d + 1)^2`
//! (kernel index, weight) pairs.

use crate::error::{Error, Result};

/// Maximum supported degree; fixed-size scratch arrays are sized for it.
pub const MAX_DEGREE: usize = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct SplineBasis {
    degree: usize,
    kernel_size: usize,
    knots: Vec<f64>,
}

impl SplineBasis {
    pub fn new(degree: usize, kernel_size: usize) -> Result<Self> {
        if !(1..=MAX_DEGREE).contains(&degree) {
            return Err(Error::InvalidConfig(format!(
                "spline degree must be 1..={MAX_DEGREE}, got {degree}"
            )));
        }
        if kernel_size < degree + 1 {
            return Err(Error::InvalidConfig(format!(
                "kernel_size {kernel_size} too small for degree {degree} (need >= {})",
                degree + 1
            )));
        }
        let mut knots = Vec::with_capacity(kernel_size + degree + 1);
        let spans = (kernel_size - degree) as f64;
        for i in 0..(kernel_size + degree + 1) {
            let t = if i <= degree {
                0.0
            } else if i >= kernel_size {
                1.0
            } else {
                (i - degree) as f64 / spans
            };
            knots.push(t);
        }
        Ok(Self { degree, kernel_size, knots })
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn kernel_size(&self) -> usize {
        self.kernel_size
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    /// Number of nonzero basis functions per dimension.
    pub fn support(&self) -> usize {
        self.degree + 1
    }

    /// Index of the non-degenerate knot span containing `u`, in
    /// `[degree, kernel_size - 1]`. Interior knots are uniform, so this is a
    /// direct computation; `u = 1` belongs to the last span.
    pub fn span_of(&self, u: f64) -> usize {
        let spans = self.kernel_size - self.degree;
        let raw = (u.clamp(0.0, 1.0) * spans as f64).floor() as usize;
        self.degree + raw.min(spans - 1)
    }

    /// Values of the `degree + 1` nonzero basis functions at `u`, together
    /// with the index of the first one. `u` outside `[0, 1]` is clamped.
    pub fn eval_1d(&self, u: f64) -> (usize, [f64; MAX_DEGREE + 1]) {
        let u = u.clamp(0.0, 1.0);
        let d = self.degree;
        let span = self.span_of(u);
        let t = &self.knots;
        let mut vals = [0.0f64; MAX_DEGREE + 1];
        let mut left = [0.0f64; MAX_DEGREE + 1];
        let mut right = [0.0f64; MAX_DEGREE + 1];
        vals[0] = 1.0;
        for j in 1..=d {
            left[j] = u - t[span + 1 - j];
            right[j] = t[span + j] - u;
            let mut saved = 0.0;
            for r in 0..j {
                let temp = vals[r] / (right[r + 1] + left[j - r]);
                vals[r] = saved + right[r + 1] * temp;
                saved = left[j - r] * temp;
            }
            vals[j] = saved;
        }
        (span - d, vals)
    }

    /// Tensor-product evaluation at `(u, v)`: appends exactly
    /// `(degree + 1)^2` pairs of (flat kernel index, weight) to `out`, where
    /// the flat index is `cx * kernel_size + cy`. Weights sum to one.
    pub fn eval_2d_into(&self, u: f64, v: f64, out: &mut Vec<(usize, f64)>) {
        let (fx, wx) = self.eval_1d(u);
        let (fy, wy) = self.eval_1d(v);
        let s = self.support();
        for ix in 0..s {
            for iy in 0..s {
                out.push(((fx + ix) * self.kernel_size + (fy + iy), wx[ix] * wy[iy]));
            }
        }
    }

    /// Allocating convenience wrapper around [`eval_2d_into`](Self::eval_2d_into).
    pub fn eval_2d(&self, u: f64, v: f64) -> Vec<(usize, f64)> {
        let mut out = Vec::with_capacity(self.support() * self.support());
        self.eval_2d_into(u, v, &mut out);
        out
    }

    /// Flat cell index of the knot-span pair containing `(u, v)`; edges in
    /// the same cell activate the same kernel indices.
    pub fn cell_of(&self, u: f64, v: f64) -> usize {
        let spans = self.kernel_size - self.degree;
        (self.span_of(u) - self.degree) * spans + (self.span_of(v) - self.degree)
    }

    /// Number of distinct cells.
    pub fn cell_count(&self) -> usize {
        let spans = self.kernel_size - self.degree;
        spans * spans
    }
}

/// Naive Cox–de Boor recursion evaluating basis function `i` of degree `p`
/// over `knots` at `u`, with the 0/0 = 0 convention and the last
/// non-degenerate span closed at its right end. Reference oracle for
/// [`SplineBasis`]; quadratic work per query, used only in tests.
pub fn cox_de_boor(knots: &[f64], i: usize, p: usize, u: f64) -> f64 {
    if p == 0 {
        let last = *knots.last().unwrap();
        let closes_domain = knots[i + 1] == last && knots[i] < knots[i + 1];
        if (knots[i] <= u && u < knots[i + 1]) || (u == last && closes_domain) {
            return 1.0;
        }
        return 0.0;
    }
    let mut acc = 0.0;
    let denom_l = knots[i + p] - knots[i];
    if denom_l > 0.0 {
        acc += (u - knots[i]) / denom_l * cox_de_boor(knots, i, p - 1, u);
    }
    let denom_r = knots[i + p + 1] - knots[i + 1];
    if denom_r > 0.0 {
        acc += (knots[i + p + 1] - u) / denom_r * cox_de_boor(knots, i + 1, p - 1, u);
    }
    acc
}

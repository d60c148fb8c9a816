//! Spline-kernel graph convolution.
//!
//! Each edge carries pseudo-coordinates in the unit square; a B-spline
//! kernel turns them into weights over a `k x k` grid of learned `in x out`
//! matrices. A node's output is its own features through a root matrix plus
//! the mean over incoming edges of the spline-weighted transform of the
//! source features:
//!
//! `y_i = root^T x_i + (1/|N(i)|) * sum_{j->i} sum_c B_c(u_ji) W_c^T x_j`
//!
//! The production forward pass groups edges by knot-span cell so each cell
//! contributes a handful of dense matrix products; a per-edge reference
//! implementation with identical semantics is kept for equivalence tests.

use ndarray::{Array2, Array3, ArrayView2, Axis};

use crate::error::{Error, Result};
use crate::gnn::bspline::SplineBasis;
use crate::gnn::scalar::Scalar;
use crate::graph::Edge;

/// One spline convolution layer. Parameters are stored at scalar type `T`;
/// basis evaluation always happens in `f64`.
#[derive(Debug, Clone)]
pub struct SplineConv<T> {
    /// `[k*k, in, out]` spline-kernel control matrices.
    pub weight: Array3<T>,
    /// `[in, out]` root transform applied to the node's own features.
    pub root: Array2<T>,
    basis: SplineBasis,
}

/// Per-edge basis activation: flat kernel index and weight pairs.
type EdgeBasis = Vec<(usize, f64)>;

/// Values captured by a training forward pass and consumed by backward.
pub struct ConvCache {
    x: Array2<f64>,
    basis: Vec<EdgeBasis>,
    edges: Vec<Edge>,
    deg: Vec<f64>,
}

/// Gradients mirroring a layer's parameters.
pub struct ConvGrads {
    pub weight: Array3<f64>,
    pub root: Array2<f64>,
}

impl<T: Scalar> SplineConv<T> {
    pub fn new(in_dim: usize, out_dim: usize, kernel_size: usize, degree: usize) -> Result<Self> {
        let basis = SplineBasis::new(degree, kernel_size)?;
        Ok(Self {
            weight: Array3::from_elem((kernel_size * kernel_size, in_dim, out_dim), T::zero()),
            root: Array2::from_elem((in_dim, out_dim), T::zero()),
            basis,
        })
    }

    pub fn in_dim(&self) -> usize {
        self.root.nrows()
    }

    pub fn out_dim(&self) -> usize {
        self.root.ncols()
    }

    pub fn basis(&self) -> &SplineBasis {
        &self.basis
    }

    fn check_shapes(&self, x: &ArrayView2<T>, edges: &[Edge], pseudo: &ArrayView2<f64>) -> Result<()> {
        if x.ncols() != self.in_dim() {
            return Err(Error::DimensionMismatch {
                context: "spline conv input features",
                expected: self.in_dim(),
                found: x.ncols(),
            });
        }
        if pseudo.nrows() != edges.len() || pseudo.ncols() != 2 {
            return Err(Error::DimensionMismatch {
                context: "pseudo-coordinate rows",
                expected: edges.len(),
                found: pseudo.nrows(),
            });
        }
        Ok(())
    }

    /// In-degree of every node under `edges` (messages flow src -> dst).
    fn degrees(n: usize, edges: &[Edge]) -> Vec<f64> {
        let mut deg = vec![0.0; n];
        for e in edges {
            deg[e.dst] += 1.0;
        }
        deg
    }

    /// Reference forward pass: literal per-edge accumulation. Semantics are
    /// the contract; the grouped implementation must match to near machine
    /// precision. Kept for tests and used as the equivalence oracle.
    pub fn forward_reference(
        &self,
        x: &ArrayView2<T>,
        edges: &[Edge],
        pseudo: &ArrayView2<f64>,
    ) -> Result<Array2<T>> {
        self.check_shapes(x, edges, pseudo)?;
        let n = x.nrows();
        let (in_dim, out_dim) = (self.in_dim(), self.out_dim());
        let deg = Self::degrees(n, edges);
        let mut y = Array2::from_elem((n, out_dim), T::zero());

        for (k, e) in edges.iter().enumerate() {
            let pairs = self.basis.eval_2d(pseudo[[k, 0]], pseudo[[k, 1]]);
            let scale = T::from_f64(1.0 / deg[e.dst]);
            for (c, w) in pairs {
                let wt = T::from_f64(w);
                for a in 0..in_dim {
                    let xa = x[[e.src, a]];
                    for b in 0..out_dim {
                        let contrib = wt * self.weight[[c, a, b]] * xa * scale;
                        y[[e.dst, b]] = y[[e.dst, b]] + contrib;
                    }
                }
            }
        }
        for i in 0..n {
            for a in 0..in_dim {
                let xa = x[[i, a]];
                for b in 0..out_dim {
                    y[[i, b]] = y[[i, b]] + self.root[[a, b]] * xa;
                }
            }
        }
        Ok(y)
    }

    /// Production forward pass: edges grouped by basis cell, one dense
    /// product per (cell, kernel corner).
    pub fn forward(
        &self,
        x: &ArrayView2<T>,
        edges: &[Edge],
        pseudo: &ArrayView2<f64>,
    ) -> Result<Array2<T>> {
        self.check_shapes(x, edges, pseudo)?;
        let n = x.nrows();
        let (in_dim, out_dim) = (self.in_dim(), self.out_dim());
        let deg = Self::degrees(n, edges);

        // Root term for everyone: y = x . root.
        let mut y = x.dot(&self.root);

        // Bucket edge ids by basis cell.
        let mut cells: Vec<Vec<usize>> = vec![Vec::new(); self.basis.cell_count()];
        for (k, _) in edges.iter().enumerate() {
            cells[self.basis.cell_of(pseudo[[k, 0]], pseudo[[k, 1]])].push(k);
        }

        let support = self.basis.support() * self.basis.support();
        let mut pairs: Vec<(usize, f64)> = Vec::with_capacity(support);
        for cell in cells.iter().filter(|c| !c.is_empty()) {
            let m = cell.len();
            // Degree-normalized gathered inputs and per-edge basis weights.
            let mut gathered = Array2::from_elem((m, in_dim), T::zero());
            let mut weights = Array2::zeros((m, support));
            let mut kernel_ix = vec![0usize; support];
            for (row, &k) in cell.iter().enumerate() {
                let e = &edges[k];
                let scale = T::from_f64(1.0 / deg[e.dst]);
                for a in 0..in_dim {
                    gathered[[row, a]] = x[[e.src, a]] * scale;
                }
                pairs.clear();
                self.basis.eval_2d_into(pseudo[[k, 0]], pseudo[[k, 1]], &mut pairs);
                for (slot, (c, w)) in pairs.iter().enumerate() {
                    weights[[row, slot]] = *w;
                    kernel_ix[slot] = *c;
                }
            }
            // All edges in a cell share kernel indices, so each corner is one
            // GEMM of the weight-scaled gather against that corner's matrix.
            let mut acc = Array2::from_elem((m, out_dim), T::zero());
            let mut scaled = Array2::from_elem((m, in_dim), T::zero());
            for slot in 0..support {
                for row in 0..m {
                    let w = T::from_f64(weights[[row, slot]]);
                    for a in 0..in_dim {
                        scaled[[row, a]] = gathered[[row, a]] * w;
                    }
                }
                let wmat = self.weight.index_axis(Axis(0), kernel_ix[slot]);
                ndarray::linalg::general_mat_mul(T::one(), &scaled, &wmat, T::one(), &mut acc);
            }
            for (row, &k) in cell.iter().enumerate() {
                let dst = edges[k].dst;
                for b in 0..out_dim {
                    y[[dst, b]] = y[[dst, b]] + acc[[row, b]];
                }
            }
        }
        Ok(y)
    }
}

impl SplineConv<f64> {
    /// Forward pass that records what backward needs.
    pub fn forward_cached(
        &self,
        x: &ArrayView2<f64>,
        edges: &[Edge],
        pseudo: &ArrayView2<f64>,
    ) -> Result<(Array2<f64>, ConvCache)> {
        let y = self.forward(x, edges, pseudo)?;
        let basis = (0..edges.len())
            .map(|k| self.basis.eval_2d(pseudo[[k, 0]], pseudo[[k, 1]]))
            .collect();
        let cache = ConvCache {
            x: x.to_owned(),
            basis,
            edges: edges.to_vec(),
            deg: Self::degrees(x.nrows(), edges),
        };
        Ok((y, cache))
    }

    /// Backpropagate `dy`, accumulating parameter gradients into `grads` and
    /// returning the gradient with respect to the layer input.
    pub fn backward(&self, cache: &ConvCache, dy: &ArrayView2<f64>, grads: &mut ConvGrads) -> Array2<f64> {
        let (in_dim, out_dim) = (self.in_dim(), self.out_dim());
        let n = cache.x.nrows();
        let mut dx = Array2::zeros((n, in_dim));

        // Root term: y += x . root.
        grads.root += &cache.x.t().dot(dy);
        dx += &dy.dot(&self.root.t());

        // Message term, per edge: dmsg = dy[dst] / deg[dst].
        for (k, e) in cache.edges.iter().enumerate() {
            let inv_deg = 1.0 / cache.deg[e.dst];
            for &(c, w) in &cache.basis[k] {
                let scale = w * inv_deg;
                for a in 0..in_dim {
                    let xa = cache.x[[e.src, a]];
                    let mut acc = 0.0;
                    for b in 0..out_dim {
                        let d = dy[[e.dst, b]] * scale;
                        grads.weight[[c, a, b]] += d * xa;
                        acc += d * self.weight[[c, a, b]];
                    }
                    dx[[e.src, a]] += acc;
                }
            }
        }
        dx
    }

    pub fn zero_grads(&self) -> ConvGrads {
        ConvGrads {
            weight: Array3::zeros(self.weight.raw_dim()),
            root: Array2::zeros(self.root.raw_dim()),
        }
    }
}

//! The full network: a stack of spline-convolution layers with batch
//! normalization and ReLU, followed by the confidence-weighted pooling head.
//!
//! Training instantiates the model at `f64`; the latency-critical inference
//! path casts the same parameters to `f32`. All parameters live on the `f32`
//! grid (enforced after initialization and after every optimizer step), so
//! the cast loses nothing and checkpoints round-trip bit-exactly.
//!
//! Flat parameter order, used by the optimizer, gradient checks, and
//! checkpoints: for each layer its kernel, root, norm scale, norm shift;
//! then the head's offset weight, offset bias, confidence weight, confidence
//! bias. Running statistics are state, not parameters: they are checkpointed
//! but never optimized.

use ndarray::{s, Array1, Array2, ArrayView2};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gnn::norm::{BatchNorm, BatchStats, NormCache};
use crate::gnn::conv::{ConvCache, SplineConv};
use crate::gnn::scalar::{quantize_f32, Scalar};
use crate::graph::{Edge, PoseGraph};
use crate::pooling::{ConfidenceMode, PoolCache, PooledPose, PoolingHead};

/// Architecture description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    /// Node input feature width (normalized position).
    pub input_dim: usize,
    /// Output width of each layer.
    pub dims: Vec<usize>,
    /// Kernel size of each layer (same length as `dims`).
    pub kernels: Vec<usize>,
    /// B-spline degree shared by all layers.
    pub degree: usize,
    pub confidence_mode: ConfidenceMode,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self::conic()
    }
}

impl ModelConfig {
    /// Ten layers widening toward the head.
    pub fn conic() -> Self {
        Self {
            input_dim: 2,
            dims: vec![16, 32, 32, 64, 64, 64, 128, 128, 128, 256],
            kernels: vec![3, 3, 4, 4, 5, 5, 6, 6, 7, 7],
            degree: 1,
            confidence_mode: ConfidenceMode::default(),
        }
    }

    /// Ten layers widening to the middle and narrowing again.
    pub fn biconic() -> Self {
        Self {
            input_dim: 2,
            dims: vec![32, 64, 128, 256, 256, 256, 128, 64, 64, 32],
            kernels: vec![3, 4, 5, 6, 7, 7, 6, 5, 4, 3],
            degree: 1,
            confidence_mode: ConfidenceMode::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dims.is_empty() {
            return Err(Error::InvalidConfig("model needs at least one layer".into()));
        }
        if self.dims.len() != self.kernels.len() {
            return Err(Error::InvalidConfig(format!(
                "dims ({}) and kernels ({}) must have equal length",
                self.dims.len(),
                self.kernels.len()
            )));
        }
        if self.input_dim == 0 {
            return Err(Error::InvalidConfig("input_dim must be nonzero".into()));
        }
        Ok(())
    }

    pub fn num_layers(&self) -> usize {
        self.dims.len()
    }

    pub fn feat_dim(&self) -> usize {
        *self.dims.last().expect("validated non-empty")
    }
}

/// Everything the network needs about one graph, precomputed.
#[derive(Debug, Clone)]
pub struct GraphInput {
    /// `[N, 2]` normalized node positions; also the layer-0 features.
    pub features: Array2<f64>,
    pub edges: Vec<Edge>,
    /// `[E, 2]` pseudo-coordinates aligned with `edges`.
    pub pseudo: Array2<f64>,
}

impl GraphInput {
    pub fn from_graph(graph: &PoseGraph, width: u32, height: u32, zeta_max: f64) -> Self {
        Self {
            features: graph.node_features(width, height),
            edges: graph.edges.clone(),
            pseudo: graph.pseudo_coords(zeta_max),
        }
    }

    pub fn node_count(&self) -> usize {
        self.features.nrows()
    }
}

#[derive(Debug, Clone)]
pub struct Model<T> {
    pub layers: Vec<(SplineConv<T>, BatchNorm<T>)>,
    pub head: PoolingHead<T>,
    pub config: ModelConfig,
}

/// Intermediates of one training forward pass over a graph-batch. The GNN
/// and normalization run once over all graphs' nodes stacked; pooling is
/// cached per graph.
pub struct ForwardCache {
    convs: Vec<ConvCache>,
    norms: Vec<NormCache>,
    /// Post-norm activations, for the ReLU mask.
    pre_relu: Vec<Array2<f64>>,
    pools: Vec<PoolCache>,
    /// Node-row range of each graph in the stacked matrices.
    ranges: Vec<std::ops::Range<usize>>,
    /// Batch statistics per layer; fold into running stats when the step is
    /// committed.
    pub stats: Vec<BatchStats>,
}

/// Gradients in the same structure as the parameters.
pub struct ModelGrads {
    pub layers: Vec<(crate::gnn::conv::ConvGrads, crate::gnn::norm::NormGrads)>,
    pub head: crate::pooling::PoolGrads,
}

/// Stack several graphs into one block-diagonal graph-batch: node rows are
/// concatenated, edge endpoints shifted by each graph's node offset. Returns
/// the merged input and each graph's node-row range.
fn merge_inputs(inputs: &[&GraphInput]) -> (GraphInput, Vec<std::ops::Range<usize>>) {
    let total_n: usize = inputs.iter().map(|g| g.node_count()).sum();
    let total_e: usize = inputs.iter().map(|g| g.edges.len()).sum();
    let mut features = Array2::<f64>::zeros((total_n, 2));
    let mut pseudo = Array2::<f64>::zeros((total_e, 2));
    let mut edges = Vec::with_capacity(total_e);
    let mut ranges = Vec::with_capacity(inputs.len());
    let (mut n0, mut e0) = (0usize, 0usize);
    for g in inputs {
        let n = g.node_count();
        features
            .slice_mut(s![n0..n0 + n, ..])
            .assign(&g.features);
        pseudo
            .slice_mut(s![e0..e0 + g.edges.len(), ..])
            .assign(&g.pseudo);
        edges.extend(g.edges.iter().map(|e| Edge {
            src: e.src + n0,
            dst: e.dst + n0,
            augmented: e.augmented,
        }));
        ranges.push(n0..n0 + n);
        n0 += n;
        e0 += g.edges.len();
    }
    (
        GraphInput {
            features,
            edges,
            pseudo,
        },
        ranges,
    )
}

fn relu<T: Scalar>(x: &mut Array2<T>) {
    let zero = T::zero();
    x.mapv_inplace(|v| if v > zero { v } else { zero });
}

impl<T: Scalar> Model<T> {
    /// Inference forward pass: running-statistics normalization, no caches.
    pub fn forward_eval(&self, input: &GraphInput) -> Result<PooledPose> {
        let positions = input.features.mapv(T::from_f64);
        let h = self.eval_features(&positions, input)?;
        self.head.forward(&h.view(), &positions.view())
    }

    /// Inference forward pass that also returns the `[N, 2 * JOINT_COUNT]`
    /// per-node candidate matrix (for validation-time node loss).
    pub fn forward_eval_detailed(
        &self,
        input: &GraphInput,
    ) -> Result<(PooledPose, Array2<f64>)> {
        let positions = input.features.mapv(T::from_f64);
        let h = self.eval_features(&positions, input)?;
        self.head.forward_detailed(&h.view(), &positions.view())
    }

    fn eval_features(&self, positions: &Array2<T>, input: &GraphInput) -> Result<Array2<T>> {
        let mut h = positions.clone();
        for (conv, norm) in &self.layers {
            let z = conv.forward(&h.view(), &input.edges, &input.pseudo.view())?;
            let mut a = norm.forward_eval(&z.view());
            relu(&mut a);
            h = a;
        }
        Ok(h)
    }
}

impl Model<f64> {
    /// Build a model with uniform init on the `f32` grid. Kernel and root
    /// entries are drawn from `±sqrt(6 / (in_dim * (degree + 1)^2))`, head
    /// weights from `±sqrt(6 / feat_dim)`, biases start at zero.
    pub fn init(config: ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let mut layers = Vec::with_capacity(config.num_layers());
        let mut in_dim = config.input_dim;
        for (i, (&out_dim, &kernel)) in config.dims.iter().zip(&config.kernels).enumerate() {
            let mut conv = SplineConv::<f64>::new(in_dim, out_dim, kernel, config.degree)
                .map_err(|e| Error::InvalidConfig(format!("layer {i}: {e}")))?;
            let bound = (6.0 / (in_dim as f64 * (config.degree as f64 + 1.0).powi(2))).sqrt();
            conv.weight.mapv_inplace(|_| rng.random_range(-bound..bound));
            conv.root.mapv_inplace(|_| rng.random_range(-bound..bound));
            layers.push((conv, BatchNorm::new(out_dim)));
            in_dim = out_dim;
        }
        let mut head = PoolingHead::<f64>::new(config.feat_dim(), config.confidence_mode);
        let hbound = (6.0 / config.feat_dim() as f64).sqrt();
        head.w_off.mapv_inplace(|_| rng.random_range(-hbound..hbound));
        head.w_conf.mapv_inplace(|_| rng.random_range(-hbound..hbound));
        let mut model = Self { layers, head, config };
        model.quantize_params();
        Ok(model)
    }

    /// Training forward pass over one graph with batch-statistics
    /// normalization; a graph-batch of one.
    pub fn forward_train(&self, input: &GraphInput) -> Result<(PooledPose, ForwardCache)> {
        let (mut poses, cache) = self.forward_train_batch(&[input])?;
        Ok((poses.pop().expect("one graph in, one pose out"), cache))
    }

    /// Training forward pass over a graph-batch: normalization statistics
    /// pool over every graph's nodes (stacked block-diagonally, so no
    /// messages cross graphs), while pooling and the returned poses stay
    /// per graph.
    pub fn forward_train_batch(
        &self,
        inputs: &[&GraphInput],
    ) -> Result<(Vec<PooledPose>, ForwardCache)> {
        if inputs.is_empty() {
            return Err(Error::InvalidConfig("empty graph-batch".into()));
        }
        let (merged, ranges) = merge_inputs(inputs);
        let positions = merged.features.clone();
        let mut h = positions.clone();
        let mut convs = Vec::with_capacity(self.layers.len());
        let mut norms = Vec::with_capacity(self.layers.len());
        let mut pre_relu = Vec::with_capacity(self.layers.len());
        let mut stats = Vec::with_capacity(self.layers.len());
        for (conv, norm) in &self.layers {
            let (z, ccache) = conv.forward_cached(&h.view(), &merged.edges, &merged.pseudo.view())?;
            let (a, ncache, nstats) = norm.forward_train(&z.view());
            pre_relu.push(a.clone());
            let mut a = a;
            relu(&mut a);
            h = a;
            convs.push(ccache);
            norms.push(ncache);
            stats.push(nstats);
        }
        let mut poses = Vec::with_capacity(inputs.len());
        let mut pools = Vec::with_capacity(inputs.len());
        for range in &ranges {
            let hg = h.slice(s![range.clone(), ..]);
            let pg = positions.slice(s![range.clone(), ..]);
            let (pose, pool) = self.head.forward_cached(&hg, &pg)?;
            poses.push(pose);
            pools.push(pool);
        }
        Ok((
            poses,
            ForwardCache { convs, norms, pre_relu, pools, ranges, stats },
        ))
    }

    /// Per-node joint proposals for graph `g` of a cached forward pass (see
    /// [`PoolingHead::candidates`]).
    pub fn candidates_for(&self, cache: &ForwardCache, g: usize) -> Array2<f64> {
        self.head.candidates(&cache.pools[g])
    }

    /// [`candidates_for`](Self::candidates_for) on a single-graph batch.
    pub fn candidates(&self, cache: &ForwardCache) -> Array2<f64> {
        self.candidates_for(cache, 0)
    }

    /// Backpropagate a gradient on the pooled (normalized) joint estimates,
    /// optionally together with a gradient on the per-node candidates (the
    /// per-node loss term). Single-graph batch.
    pub fn backward(
        &self,
        cache: &ForwardCache,
        dpred: &ArrayView2<f64>,
        d_candidates: Option<&ArrayView2<f64>>,
    ) -> ModelGrads {
        self.backward_batch(
            cache,
            &[dpred.to_owned()],
            &[d_candidates.map(|d| d.to_owned())],
        )
        .expect("single-graph batch gradients")
    }

    /// Backpropagate per-graph gradients through a graph-batch forward pass.
    /// `dpreds[g]` is the gradient on graph `g`'s pooled estimate and
    /// `d_candidates[g]` the optional gradient on its candidate matrix;
    /// parameter gradients accumulate over the whole batch.
    pub fn backward_batch(
        &self,
        cache: &ForwardCache,
        dpreds: &[Array2<f64>],
        d_candidates: &[Option<Array2<f64>>],
    ) -> Result<ModelGrads> {
        if dpreds.len() != cache.pools.len() || d_candidates.len() != cache.pools.len() {
            return Err(Error::DimensionMismatch {
                context: "per-graph gradients in a batch",
                expected: cache.pools.len(),
                found: dpreds.len().min(d_candidates.len()),
            });
        }
        let mut grads = self.zero_grads();
        let total = cache.ranges.last().map_or(0, |r| r.end);
        let mut d = Array2::<f64>::zeros((total, self.config.feat_dim()));
        for (g, range) in cache.ranges.iter().enumerate() {
            let dh = self.head.backward_with_candidates(
                &cache.pools[g],
                &dpreds[g].view(),
                d_candidates[g].as_ref().map(|x| x.view()).as_ref(),
                &mut grads.head,
            );
            d.slice_mut(s![range.clone(), ..]).assign(&dh);
        }
        for (i, (conv, norm)) in self.layers.iter().enumerate().rev() {
            // ReLU mask from the recorded pre-activation.
            for (dv, pre) in d.iter_mut().zip(cache.pre_relu[i].iter()) {
                if *pre <= 0.0 {
                    *dv = 0.0;
                }
            }
            let (cg, ng) = &mut grads.layers[i];
            let dz = norm.backward(&cache.norms[i], &d.view(), ng);
            d = conv.backward(&cache.convs[i], &dz.view(), cg);
        }
        Ok(grads)
    }

    /// Fold the batch statistics of a committed step into the running
    /// estimates, keeping them on the `f32` grid so checkpoints round-trip.
    pub fn update_running_stats(&mut self, stats: &[BatchStats]) {
        for ((_, norm), s) in self.layers.iter_mut().zip(stats) {
            norm.update_running(s);
            norm.running_mean.mapv_inplace(quantize_f32);
            norm.running_var.mapv_inplace(quantize_f32);
        }
    }

    pub fn zero_grads(&self) -> ModelGrads {
        ModelGrads {
            layers: self
                .layers
                .iter()
                .map(|(c, n)| (c.zero_grads(), n.zero_grads()))
                .collect(),
            head: self.head.zero_grads(),
        }
    }

    /// Total trainable parameter count.
    pub fn num_params(&self) -> usize {
        let mut n = 0;
        for (conv, norm) in &self.layers {
            n += conv.weight.len() + conv.root.len() + norm.scale.len() + norm.shift.len();
        }
        n + self.head.w_off.len()
            + self.head.b_off.len()
            + self.head.w_conf.len()
            + self.head.b_conf.len()
    }

    /// Parameters in canonical flat order.
    pub fn pack_params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_params());
        for (conv, norm) in &self.layers {
            out.extend(conv.weight.iter());
            out.extend(conv.root.iter());
            out.extend(norm.scale.iter());
            out.extend(norm.shift.iter());
        }
        out.extend(self.head.w_off.iter());
        out.extend(self.head.b_off.iter());
        out.extend(self.head.w_conf.iter());
        out.extend(self.head.b_conf.iter());
        out
    }

    /// Write a flat parameter vector back into the model.
    pub fn unpack_params(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.num_params() {
            return Err(Error::DimensionMismatch {
                context: "flat parameter vector",
                expected: self.num_params(),
                found: flat.len(),
            });
        }
        let mut it = flat.iter().copied();
        let mut fill = |arr: &mut dyn Iterator<Item = &mut f64>| {
            for v in arr {
                *v = it.next().expect("length checked");
            }
        };
        for (conv, norm) in &mut self.layers {
            fill(&mut conv.weight.iter_mut());
            fill(&mut conv.root.iter_mut());
            fill(&mut norm.scale.iter_mut());
            fill(&mut norm.shift.iter_mut());
        }
        fill(&mut self.head.w_off.iter_mut());
        fill(&mut self.head.b_off.iter_mut());
        fill(&mut self.head.w_conf.iter_mut());
        fill(&mut self.head.b_conf.iter_mut());
        Ok(())
    }

    /// Gradients flattened in the same order as [`pack_params`](Self::pack_params).
    pub fn pack_grads(grads: &ModelGrads) -> Vec<f64> {
        let mut out = Vec::new();
        for (cg, ng) in &grads.layers {
            out.extend(cg.weight.iter());
            out.extend(cg.root.iter());
            out.extend(ng.scale.iter());
            out.extend(ng.shift.iter());
        }
        out.extend(grads.head.w_off.iter());
        out.extend(grads.head.b_off.iter());
        out.extend(grads.head.w_conf.iter());
        out.extend(grads.head.b_conf.iter());
        out
    }

    /// Snap every parameter to the nearest `f32`-representable value.
    pub fn quantize_params(&mut self) {
        for (conv, norm) in &mut self.layers {
            conv.weight.mapv_inplace(quantize_f32);
            conv.root.mapv_inplace(quantize_f32);
            norm.scale.mapv_inplace(quantize_f32);
            norm.shift.mapv_inplace(quantize_f32);
        }
        self.head.w_off.mapv_inplace(quantize_f32);
        self.head.b_off.mapv_inplace(quantize_f32);
        self.head.w_conf.mapv_inplace(quantize_f32);
        self.head.b_conf.mapv_inplace(quantize_f32);
    }

    /// Cast to the `f32` inference representation. Lossless when parameters
    /// are on the `f32` grid, which init, training, and checkpoint loading
    /// all maintain.
    pub fn to_f32(&self) -> Model<f32> {
        let layers = self
            .layers
            .iter()
            .map(|(conv, norm)| {
                let mut c32 = SplineConv::<f32>::new(
                    conv.in_dim(),
                    conv.out_dim(),
                    conv.basis().kernel_size(),
                    conv.basis().degree(),
                )
                .expect("same validated config");
                c32.weight = conv.weight.mapv(|v| v as f32);
                c32.root = conv.root.mapv(|v| v as f32);
                let n32 = BatchNorm::<f32> {
                    scale: norm.scale.mapv(|v| v as f32),
                    shift: norm.shift.mapv(|v| v as f32),
                    running_mean: norm.running_mean.mapv(|v| v as f32),
                    running_var: norm.running_var.mapv(|v| v as f32),
                };
                (c32, n32)
            })
            .collect();
        let head = PoolingHead::<f32> {
            w_off: self.head.w_off.mapv(|v| v as f32),
            b_off: self.head.b_off.mapv(|v| v as f32),
            w_conf: self.head.w_conf.mapv(|v| v as f32),
            b_conf: self.head.b_conf.mapv(|v| v as f32),
            mode: self.head.mode,
        };
        Model {
            layers,
            head,
            config: self.config.clone(),
        }
    }

    /// All stateful tensors as (name, dims, data) triples, in checkpoint
    /// order: per layer the parameters then the running statistics, then the
    /// head.
    pub fn named_tensors(&self) -> Vec<(String, Vec<usize>, Vec<f64>)> {
        let mut out = Vec::new();
        for (i, (conv, norm)) in self.layers.iter().enumerate() {
            let p = format!("gnn.{i:02}");
            out.push((
                format!("{p}.kernel"),
                conv.weight.shape().to_vec(),
                conv.weight.iter().copied().collect(),
            ));
            out.push((
                format!("{p}.root"),
                conv.root.shape().to_vec(),
                conv.root.iter().copied().collect(),
            ));
            for (suffix, arr) in [
                ("norm.scale", &norm.scale),
                ("norm.shift", &norm.shift),
                ("norm.running_mean", &norm.running_mean),
                ("norm.running_var", &norm.running_var),
            ] {
                out.push((format!("{p}.{suffix}"), vec![arr.len()], arr.to_vec()));
            }
        }
        for (name, w) in [("head.offset.weight", &self.head.w_off), ("head.conf.weight", &self.head.w_conf)] {
            out.push((name.to_string(), w.shape().to_vec(), w.iter().copied().collect()));
        }
        for (name, b) in [("head.offset.bias", &self.head.b_off), ("head.conf.bias", &self.head.b_conf)] {
            out.push((name.to_string(), vec![b.len()], b.to_vec()));
        }
        // Keep a stable file order; names are the contract.
        out.sort_by(|a, b| a.0.cmp(&b.0));
        out
    }

    /// Load tensor data by name, the inverse of [`named_tensors`](Self::named_tensors).
    pub fn load_tensor(&mut self, name: &str, dims: &[usize], data: &[f64]) -> Result<()> {
        let fail = |msg: String| Err(Error::Checkpoint(msg));
        let expect_shape = |want: &[usize]| -> Result<()> {
            if dims != want {
                return fail(format!("tensor {name}: dims {dims:?}, expected {want:?}"));
            }
            Ok(())
        };
        if let Some(rest) = name.strip_prefix("gnn.") {
            let (ix_str, field) = rest
                .split_once('.')
                .ok_or_else(|| Error::Checkpoint(format!("malformed tensor name {name}")))?;
            let ix: usize = ix_str
                .parse()
                .map_err(|_| Error::Checkpoint(format!("bad layer index in {name}")))?;
            let Some((conv, norm)) = self.layers.get_mut(ix) else {
                return fail(format!("tensor {name}: layer {ix} out of range"));
            };
            match field {
                "kernel" => {
                    expect_shape(conv.weight.shape())?;
                    for (dst, src) in conv.weight.iter_mut().zip(data) {
                        *dst = *src;
                    }
                }
                "root" => {
                    expect_shape(conv.root.shape())?;
                    for (dst, src) in conv.root.iter_mut().zip(data) {
                        *dst = *src;
                    }
                }
                "norm.scale" | "norm.shift" | "norm.running_mean" | "norm.running_var" => {
                    let arr = match field {
                        "norm.scale" => &mut norm.scale,
                        "norm.shift" => &mut norm.shift,
                        "norm.running_mean" => &mut norm.running_mean,
                        _ => &mut norm.running_var,
                    };
                    if dims != [arr.len()] {
                        return fail(format!("tensor {name}: dims {dims:?}, expected [{}]", arr.len()));
                    }
                    for (dst, src) in arr.iter_mut().zip(data) {
                        *dst = *src;
                    }
                }
                other => return fail(format!("unknown layer field {other} in {name}")),
            }
            return Ok(());
        }
        match name {
            "head.offset.weight" => {
                expect_shape(self.head.w_off.shape())?;
                for (dst, src) in self.head.w_off.iter_mut().zip(data) {
                    *dst = *src;
                }
            }
            "head.offset.bias" => {
                expect_shape(&[self.head.b_off.len()])?;
                self.head.b_off = Array1::from_vec(data.to_vec());
            }
            "head.conf.weight" => {
                expect_shape(self.head.w_conf.shape())?;
                for (dst, src) in self.head.w_conf.iter_mut().zip(data) {
                    *dst = *src;
                }
            }
            "head.conf.bias" => {
                expect_shape(&[self.head.b_conf.len()])?;
                self.head.b_conf = Array1::from_vec(data.to_vec());
            }
            other => return fail(format!("unknown tensor {other}")),
        }
        Ok(())
    }
}

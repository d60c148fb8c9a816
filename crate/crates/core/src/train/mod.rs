//! Training: loss paradigms, the per-sample optimization loop, and the
//! epoch metrics log.
//!
//! Each optimizer step processes one graph sample: forward with batch
//! statistics, weighted target/node losses, backprop, global-norm clipping,
//! Adam, parameter re-quantization to the `f32` grid, and a running-stats
//! update. Validation runs the inference path (running statistics) and is
//! what the metrics log records.

pub mod dataset;
pub mod loss;
pub mod optim;

use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gnn::quantize_f32;
use crate::metrics::{mpjpe, pck, DEFAULT_TORSO};
use crate::model::Model;
use crate::pose::{GroundTruthPose, PoseEstimate};
use dataset::Dataset;
use loss::{node_loss, target_loss};
use optim::{clip_global_norm, Adam, AdamConfig};

/// Which loss terms drive the optimizer, per epoch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Paradigm {
    /// Both losses, weighted `(alpha, beta)`, every epoch.
    Together,
    /// Node loss only: `(0, beta)`.
    NodeOnly,
    /// Pooled target loss only: `(alpha, 0)`.
    TargetOnly,
    /// Node-only warmup for `staggered_node_epochs`, then both losses for
    /// `staggered_joint_epochs`.
    Staggered,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub paradigm: Paradigm,
    pub alpha: f64,
    pub beta: f64,
    /// Divide the node loss by the node count instead of summing.
    pub node_loss_mean: bool,
    /// Graphs per optimizer step. Normalization statistics pool over the
    /// whole graph-batch, which is what makes the running estimates used at
    /// inference representative; single-graph batches train but evaluate
    /// poorly.
    pub batch_size: usize,
    /// Epoch count for the non-staggered paradigms.
    pub epochs: usize,
    pub staggered_node_epochs: usize,
    pub staggered_joint_epochs: usize,
    pub adam: AdamConfig,
    pub clip_norm: f64,
    /// Seed for the train/validation split and per-epoch shuffling.
    pub seed: u64,
    pub val_fraction: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            paradigm: Paradigm::Together,
            alpha: 1.0,
            beta: 1.0,
            node_loss_mean: false,
            batch_size: 8,
            epochs: 50,
            staggered_node_epochs: 20,
            staggered_joint_epochs: 50,
            adam: AdamConfig::default(),
            clip_norm: 5.0,
            seed: 0,
            val_fraction: 0.2,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.adam.validate()?;
        if self.total_epochs() == 0 {
            return Err(Error::InvalidConfig("epoch count must be nonzero".into()));
        }
        for (name, v) in [("alpha", self.alpha), ("beta", self.beta)] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidConfig(format!(
                    "loss weight {name} must be finite and non-negative, got {v}"
                )));
            }
        }
        if !(self.clip_norm > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "gradient clip norm must be positive, got {}",
                self.clip_norm
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidConfig("batch size must be nonzero".into()));
        }
        if !(0.0..1.0).contains(&self.val_fraction) {
            return Err(Error::InvalidConfig(format!(
                "validation fraction must lie in [0, 1), got {}",
                self.val_fraction
            )));
        }
        Ok(())
    }

    pub fn total_epochs(&self) -> usize {
        match self.paradigm {
            Paradigm::Staggered => self.staggered_node_epochs + self.staggered_joint_epochs,
            _ => self.epochs,
        }
    }
}

/// The `(alpha, beta)` loss weights applied at every epoch, in order.
pub fn loss_weight_schedule(cfg: &TrainConfig) -> Vec<(f64, f64)> {
    match cfg.paradigm {
        Paradigm::Together => vec![(cfg.alpha, cfg.beta); cfg.epochs],
        Paradigm::NodeOnly => vec![(0.0, cfg.beta); cfg.epochs],
        Paradigm::TargetOnly => vec![(cfg.alpha, 0.0); cfg.epochs],
        Paradigm::Staggered => {
            let mut s = vec![(0.0, cfg.beta); cfg.staggered_node_epochs];
            s.extend(vec![(cfg.alpha, cfg.beta); cfg.staggered_joint_epochs]);
            s
        }
    }
}

/// Validation-set measurements after one epoch.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochLog {
    /// 1-based epoch index.
    pub epoch: usize,
    pub l_target: f64,
    pub l_node: f64,
    pub pck04: f64,
    pub mpjpe: f64,
}

/// Train in place; returns one log entry per epoch. `on_epoch` fires after
/// each epoch's validation pass (progress printing, checkpointing, ...).
pub fn train(
    model: &mut Model<f64>,
    data: &Dataset,
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochLog),
) -> Result<Vec<EpochLog>> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::InvalidConfig("dataset has no samples".into()));
    }
    let (train_ix, val_ix) = data.split(cfg.val_fraction, cfg.seed);
    // Tiny datasets may round to an empty validation split; measure on the
    // training set then rather than log nothing.
    let val_ix = if val_ix.is_empty() { train_ix.clone() } else { val_ix };
    let mut adam = Adam::new(cfg.adam, model.num_params());
    let mut params = model.pack_params();
    let schedule = loss_weight_schedule(cfg);
    let mut history = Vec::with_capacity(schedule.len());
    for (epoch0, &(alpha, beta)) in schedule.iter().enumerate() {
        let epoch = epoch0 + 1;
        let mut order = train_ix.clone();
        let mut rng = ChaCha12Rng::seed_from_u64(
            cfg.seed ^ (epoch as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15),
        );
        order.shuffle(&mut rng);
        for chunk in order.chunks(cfg.batch_size) {
            let inputs: Vec<&crate::model::GraphInput> =
                chunk.iter().map(|&ix| &data.samples[ix].input).collect();
            let (poses, cache) = model.forward_train_batch(&inputs)?;
            let scale = 1.0 / chunk.len() as f64;
            let mut total = 0.0;
            let mut dpreds = Vec::with_capacity(chunk.len());
            let mut dcands = Vec::with_capacity(chunk.len());
            for (g, &ix) in chunk.iter().enumerate() {
                let sample = &data.samples[ix];
                let (l_t, dpred) =
                    target_loss(&poses[g].pred.view(), &sample.target.view(), &sample.visible)?;
                total += scale * alpha * l_t;
                dpreds.push(dpred * (alpha * scale));
                if beta != 0.0 {
                    let cands = model.candidates_for(&cache, g);
                    let (l_n, dcand) = node_loss(
                        &cands.view(),
                        &sample.target.view(),
                        &sample.visible,
                        cfg.node_loss_mean,
                    )?;
                    total += scale * beta * l_n;
                    dcands.push(Some(dcand * (beta * scale)));
                } else {
                    dcands.push(None);
                }
            }
            if !total.is_finite() {
                return Err(Error::Diverged { epoch, loss: total });
            }
            let grads = model.backward_batch(&cache, &dpreds, &dcands)?;
            let mut flat = Model::pack_grads(&grads);
            clip_global_norm(&mut flat, cfg.clip_norm);
            adam.step(&mut params, &flat)?;
            for v in params.iter_mut() {
                *v = quantize_f32(*v);
            }
            model.unpack_params(&params)?;
            model.update_running_stats(&cache.stats);
        }
        let log = validate_epoch(model, data, &val_ix, cfg, epoch)?;
        on_epoch(&log);
        history.push(log);
    }
    Ok(history)
}

/// Measure validation losses and metrics with the inference path.
fn validate_epoch(
    model: &Model<f64>,
    data: &Dataset,
    val_ix: &[usize],
    cfg: &TrainConfig,
    epoch: usize,
) -> Result<EpochLog> {
    let mut l_t = 0.0;
    let mut l_n = 0.0;
    let mut preds: Vec<PoseEstimate> = Vec::with_capacity(val_ix.len());
    let mut gts: Vec<GroundTruthPose> = Vec::with_capacity(val_ix.len());
    for &ix in val_ix {
        let sample = &data.samples[ix];
        let (pose, cands) = model.forward_eval_detailed(&sample.input)?;
        let (lt, _) = target_loss(&pose.pred.view(), &sample.target.view(), &sample.visible)?;
        let (ln_, _) = node_loss(
            &cands.view(),
            &sample.target.view(),
            &sample.visible,
            cfg.node_loss_mean,
        )?;
        l_t += lt;
        l_n += ln_;
        preds.push(pose.to_estimate(sample.t, data.width, data.height));
        gts.push(sample.gt.clone());
    }
    let n = val_ix.len() as f64;
    Ok(EpochLog {
        epoch,
        l_target: l_t / n,
        l_node: l_n / n,
        pck04: pck(&preds, &gts, 0.4, DEFAULT_TORSO)?.overall,
        mpjpe: mpjpe(&preds, &gts)?.overall,
    })
}

/// Write the metrics log, one `epoch l_target l_node pck04 mpjpe` line per
/// epoch.
pub fn write_metrics_log<P: AsRef<Path>>(path: P, logs: &[EpochLog]) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    for l in logs {
        writeln!(
            f,
            "{} {} {} {} {}",
            l.epoch, l.l_target, l.l_node, l.pck04, l.mpjpe
        )?;
    }
    f.flush()?;
    Ok(())
}

pub fn read_metrics_log<P: AsRef<Path>>(path: P) -> Result<Vec<EpochLog>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path)?;
    let mut logs = Vec::new();
    for (ix, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let err = |msg: String| Error::Parse {
            path: path.display().to_string(),
            line: ix + 1,
            msg,
        };
        let fields: Vec<&str> = trimmed.split_whitespace().collect();
        if fields.len() != 5 {
            return Err(err(format!("expected 5 fields, found {}", fields.len())));
        }
        let epoch: usize = fields[0]
            .parse()
            .map_err(|e| err(format!("bad epoch: {e}")))?;
        let mut vals = [0.0f64; 4];
        for (slot, field) in vals.iter_mut().zip(&fields[1..]) {
            *slot = field
                .parse()
                .map_err(|e| err(format!("bad float {field:?}: {e}")))?;
        }
        logs.push(EpochLog {
            epoch,
            l_target: vals[0],
            l_node: vals[1],
            pck04: vals[2],
            mpjpe: vals[3],
        });
    }
    Ok(logs)
}

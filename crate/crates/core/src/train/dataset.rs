//! Pairing of event streams with ground-truth poses into training samples.
//!
//! Events are replayed through the accumulation surface in timestamp order;
//! at each labelled instant the surface is detected into line segments,
//! assembled into a graph, and frozen as one sample. Frames that yield an
//! empty graph or have no visible joints are skipped (counted, not errors):
//! they carry no supervision signal.

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;

use crate::error::Result;
use crate::event::{AccumulationSurface, Event, SurfaceConfig};
use crate::graph::{build_graph, GraphConfig};
use crate::joints::JOINT_COUNT;
use crate::line::{detect_lines, DetectorConfig};
use crate::model::GraphInput;
use crate::pose::GroundTruthPose;

/// One supervised frame: a graph snapshot plus its normalized target.
#[derive(Debug, Clone)]
pub struct Sample {
    pub t: u64,
    pub input: GraphInput,
    /// `[JOINT_COUNT, 2]` target in unit-square coordinates.
    pub target: Array2<f64>,
    pub visible: [bool; JOINT_COUNT],
    /// Original pixel-space ground truth, for metric evaluation.
    pub gt: GroundTruthPose,
}

#[derive(Debug, Clone)]
pub struct Dataset {
    pub samples: Vec<Sample>,
    pub width: u32,
    pub height: u32,
    /// Ground-truth frames dropped for lack of a graph or visible joints.
    pub skipped: usize,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Deterministic shuffled split into (train, validation) index sets.
    pub fn split(&self, val_fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
        let mut ix: Vec<usize> = (0..self.samples.len()).collect();
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        ix.shuffle(&mut rng);
        let n_val = (self.samples.len() as f64 * val_fraction).round() as usize;
        let n_val = n_val.min(self.samples.len());
        let val = ix.split_off(self.samples.len() - n_val);
        (ix, val)
    }
}

/// Ground-truth joints scaled to the unit square.
pub fn normalized_target(gt: &GroundTruthPose, width: u32, height: u32) -> Array2<f64> {
    Array2::from_shape_fn((JOINT_COUNT, 2), |(j, a)| {
        let scale = if a == 0 { width } else { height } as f64;
        gt.joints[j][a] / scale
    })
}

/// Replay `events` (timestamp-ordered) against labelled instants and build
/// one sample per usable ground-truth frame. Events strictly after a frame's
/// timestamp stay queued for later frames.
pub fn build_dataset(
    events: &[Event],
    gts: &[GroundTruthPose],
    surface_cfg: &SurfaceConfig,
    detector: &DetectorConfig,
    graph_cfg: &GraphConfig,
) -> Result<Dataset> {
    let surface = AccumulationSurface::new(surface_cfg.clone())?;
    let zeta_max = surface_cfg.zeta_max();
    let mut samples = Vec::new();
    let mut skipped = 0;
    let mut next_event = 0;
    for gt in gts {
        while next_event < events.len() && events[next_event].t <= gt.t {
            surface.push(events[next_event])?;
            next_event += 1;
        }
        if gt.visible_count() == 0 {
            skipped += 1;
            continue;
        }
        let segments = detect_lines(&surface, detector);
        let mut graph = build_graph(&segments, graph_cfg);
        graph.augment(graph_cfg.zeta);
        if graph.nodes.is_empty() {
            skipped += 1;
            continue;
        }
        let input = GraphInput::from_graph(&graph, surface_cfg.width, surface_cfg.height, zeta_max);
        samples.push(Sample {
            t: gt.t,
            input,
            target: normalized_target(gt, surface_cfg.width, surface_cfg.height),
            visible: gt.visible,
            gt: gt.clone(),
        });
    }
    Ok(Dataset {
        samples,
        width: surface_cfg.width,
        height: surface_cfg.height,
        skipped,
    })
}

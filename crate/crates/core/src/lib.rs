//! Event-camera human pose estimation.
//!
//! The pipeline turns a raw event stream into 2D skeleton estimates in five
//! stages: events accumulate on a velocity-invariant block surface; each
//! block is reduced to at most one line segment; segments merge into a sparse
//! geometric graph; a spline-kernel graph network computes node features; a
//! confidence-weighted pooling head reads out 13 joint locations.
//!
//! Everything is deterministic given a seed, and every stage has a plain-text
//! serialization so intermediate results can be inspected and replayed.

pub mod checkpoint;
pub mod config;
pub mod error;
pub mod event;
pub mod gnn;
pub mod graph;
pub mod joints;
pub mod line;
pub mod metrics;
pub mod model;
pub mod pipeline;
pub mod pooling;
pub mod pose;
pub mod synth;
pub mod train;
pub mod viz;

pub use checkpoint::{load_checkpoint, save_checkpoint};
pub use config::Config;
pub use error::{Error, Result};
pub use event::{AccumulationSurface, Event, SurfaceConfig};
pub use graph::{Edge, GraphConfig, Node, PoseGraph};
pub use joints::{Cluster, Joint, ALL_JOINTS, JOINT_COUNT, LIMBS};
pub use line::{DetectorConfig, LineModel, LineSegment};
pub use model::{GraphInput, Model, ModelConfig};
pub use pooling::{ConfidenceMode, PooledPose};
pub use pose::{GroundTruthPose, PoseEstimate};
pub use train::{Paradigm, TrainConfig};

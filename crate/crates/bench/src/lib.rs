//! Shared fixtures for the stage benchmarks: deterministic event streams and
//! stress graphs sized like the real pipeline's inputs.

use evpose_core::event::{Event, SurfaceConfig};
use evpose_core::model::{GraphInput, Model, ModelConfig};
use evpose_core::synth::{self, SynthConfig};

/// Default-scene event stream (346x260 walker, two seconds).
pub fn walker_events() -> (Vec<Event>, SynthConfig) {
    let cfg = SynthConfig::default();
    let (events, _) = synth::generate(&cfg, 0).expect("default scene generates");
    (events, cfg)
}

/// Surface config matching [`walker_events`].
pub fn walker_surface() -> SurfaceConfig {
    let synth = SynthConfig::default();
    SurfaceConfig {
        width: synth.width,
        height: synth.height,
        ..SurfaceConfig::default()
    }
}

/// A stress graph of `n` nodes with walker-like degree, ready for the model.
pub fn stress_input(n: usize, surface: &SurfaceConfig, seed: u64) -> GraphInput {
    let graph = synth::random_graph(n, 3, surface.width, surface.height, seed);
    GraphInput::from_graph(&graph, surface.width, surface.height, surface.zeta_max())
}

/// The ten-layer conic network at inference precision.
pub fn conic_f32(seed: u64) -> Model<f32> {
    Model::init(ModelConfig::conic(), seed)
        .expect("conic config is valid")
        .to_f32()
}

//! Acceptance gate, latency criterion. Lives in its own test binary so the
//! timing measurement never shares a process (or a core) with the rest of
//! the suite.

mod common;

use std::time::Instant;

use evpose_core::model::{Model, ModelConfig};
use evpose_core::pipeline::{run_threaded, PipelineConfig, StageTiming};
use evpose_core::synth::{generate, SynthConfig};
use evpose_core::{DetectorConfig, GraphConfig};

use common::{criterion, ensure, fail};

#[test]
fn criterion_08_latency_and_throughput() {
    criterion(8, "latency and throughput", || {
        // Part A: median GNN forward + pooling stays under 10 ms on graphs
        // up to 300 nodes, built by the production graph builder and run
        // single-threaded at the deployment depth.
        let model = Model::<f64>::init(ModelConfig::conic(), 21).map_err(fail)?.to_f32();
        let mut biggest = 0usize;
        for (m, seed) in [(25usize, 31u64), (50, 32), (100, 33), (150, 34)] {
            let (graph, input) = common::scattered_segment_input(m, seed);
            let n = graph.nodes.len();
            ensure(
                n <= 300,
                format!("stress graph from {m} segments has {n} > 300 nodes"),
            )?;
            biggest = biggest.max(n);
            for _ in 0..3 {
                model.forward_eval(&input).map_err(fail)?;
            }
            let mut timing = StageTiming::new("forward");
            for _ in 0..30 {
                let started = Instant::now();
                model.forward_eval(&input).map_err(fail)?;
                timing.record(started.elapsed());
            }
            let stats = timing.stats();
            println!(
                "  . forward+pool: {n} nodes, {} edges, median {:.2} ms",
                graph.edges.len(),
                stats.median_ms
            );
            ensure(
                stats.median_ms < 10.0,
                format!("{n}-node median {:.2} ms breaches the 10 ms budget", stats.median_ms),
            )?;
        }
        ensure(
            biggest >= 280,
            format!("largest stress graph only reached {biggest} nodes"),
        )?;

        // Part B: while the full threaded pipeline runs, the ingest stage
        // sustains at least two million events per second of its wall time.
        let (events, _) = generate(&SynthConfig::default(), 23).map_err(fail)?;
        let report = run_threaded(
            &events,
            &common::sensor_surface(),
            &DetectorConfig::default(),
            &GraphConfig::default(),
            &model,
            &PipelineConfig { threaded: true, ..PipelineConfig::default() },
        )
        .map_err(fail)?;
        let names: Vec<&str> = report.stages.iter().map(|s| s.name).collect();
        ensure(
            names == ["ingest", "detect", "graph", "infer"],
            format!("unexpected stage set {names:?}"),
        )?;
        let infer = &report.stages[3];
        ensure(infer.invocations > 0, "inference never ran during the pipeline")?;
        println!(
            "  . threaded: {} events, ingest {:.2} Mev/s, infer median {:.2} ms over {} ticks",
            report.events_ingested,
            report.ingest_events_per_sec / 1e6,
            infer.median_ms,
            infer.invocations
        );
        ensure(
            report.events_ingested == events.len(),
            format!(
                "ingested {} of {} events",
                report.events_ingested,
                events.len()
            ),
        )?;
        ensure(
            report.ingest_events_per_sec >= 2e6,
            format!(
                "ingest sustained only {:.2} Mev/s while the network ran",
                report.ingest_events_per_sec / 1e6
            ),
        )?;

        // The reported frequency follows from the slowest stage's median.
        let slowest = report
            .stages
            .iter()
            .map(|s| s.median_ms)
            .fold(0.0f64, f64::max);
        let expected = 1e3 / slowest;
        ensure(
            (report.frequency_hz - expected).abs() <= 1e-9 * expected,
            format!("frequency {} Hz, expected {expected} Hz", report.frequency_hz),
        )
    });
}

//! Staged runtime: ingest → line detection → graph build → inference.
//!
//! Two execution modes share the same stage functions. Sequential mode runs
//! every stage to completion at each tick and is bit-deterministic: the same
//! events and configs produce identical segments, graphs, and poses on every
//! run. Threaded mode runs the four stages concurrently, connected by
//! single-slot latest-wins channels: when a downstream stage is slower than
//! its producer it simply skips to the newest work item, so ingestion never
//! blocks on inference. Stage wall-times are collected either way.
//!
//! A "tick" is a fixed span of event time (`tick_period_us`); each completed
//! tick may yield one pose estimate stamped with the tick's end time.

use std::sync::{Condvar, Mutex};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::event::{AccumulationSurface, Event, SurfaceConfig};
use crate::gnn::Scalar;
use crate::graph::{build_graph, GraphConfig, PoseGraph};
use crate::line::{detect_lines, DetectorConfig, LineSegment};
use crate::model::{GraphInput, Model};
use crate::pose::PoseEstimate;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    /// Event-time span of one processing tick, microseconds.
    pub tick_period_us: u64,
    /// Run stages concurrently (latest-wins handoff) instead of in lockstep.
    pub threaded: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            tick_period_us: 10_000,
            threaded: false,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.tick_period_us == 0 {
            return Err(Error::InvalidConfig("tick period must be nonzero".into()));
        }
        Ok(())
    }
}

/// Single-value handoff cell: writers replace the stored value (latest
/// wins), readers block until a value or close arrives.
pub struct LatestSlot<T> {
    state: Mutex<(Option<T>, bool)>,
    cv: Condvar,
}

impl<T> Default for LatestSlot<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T> LatestSlot<T> {
    pub fn new() -> Self {
        Self {
            state: Mutex::new((None, false)),
            cv: Condvar::new(),
        }
    }

    /// Store a value, replacing any unconsumed one. Returns whether a value
    /// was displaced.
    pub fn put(&self, value: T) -> bool {
        let mut s = self.state.lock().expect("slot lock");
        let displaced = s.0.is_some();
        s.0 = Some(value);
        self.cv.notify_one();
        displaced
    }

    /// Block until a value is available; `None` once the slot is closed and
    /// drained.
    pub fn take(&self) -> Option<T> {
        let mut s = self.state.lock().expect("slot lock");
        loop {
            if let Some(v) = s.0.take() {
                return Some(v);
            }
            if s.1 {
                return None;
            }
            s = self.cv.wait(s).expect("slot lock");
        }
    }

    /// Mark the slot closed; readers drain the pending value first.
    pub fn close(&self) {
        let mut s = self.state.lock().expect("slot lock");
        s.1 = true;
        self.cv.notify_all();
    }
}

/// Wall-time samples of one stage.
#[derive(Debug, Clone)]
pub struct StageTiming {
    name: &'static str,
    samples_ms: Vec<f64>,
}

/// Summary of one stage's wall-times, all in milliseconds.
#[derive(Debug, Clone, PartialEq)]
pub struct StageStats {
    pub name: &'static str,
    pub invocations: usize,
    pub min_ms: f64,
    pub median_ms: f64,
    pub p99_ms: f64,
}

impl StageTiming {
    pub fn new(name: &'static str) -> Self {
        Self {
            name,
            samples_ms: Vec::new(),
        }
    }

    pub fn record(&mut self, elapsed: Duration) {
        self.samples_ms.push(elapsed.as_secs_f64() * 1e3);
    }

    /// Time a closure and record its duration.
    pub fn time<R>(&mut self, f: impl FnOnce() -> R) -> R {
        let start = Instant::now();
        let out = f();
        self.record(start.elapsed());
        out
    }

    pub fn stats(&self) -> StageStats {
        let mut sorted = self.samples_ms.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite timings"));
        let pick = |q: f64| -> f64 {
            if sorted.is_empty() {
                return 0.0;
            }
            let ix = ((q * sorted.len() as f64).ceil() as usize).max(1) - 1;
            sorted[ix.min(sorted.len() - 1)]
        };
        StageStats {
            name: self.name,
            invocations: sorted.len(),
            min_ms: sorted.first().copied().unwrap_or(0.0),
            median_ms: pick(0.5),
            p99_ms: pick(0.99),
        }
    }
}

/// Everything one completed tick produced.
#[derive(Debug, Clone)]
pub struct TickOutput {
    pub t: u64,
    pub segments: Vec<LineSegment>,
    pub graph: PoseGraph,
    pub pose: PoseEstimate,
}

#[derive(Debug, Clone)]
pub struct PipelineReport {
    pub outputs: Vec<TickOutput>,
    pub stages: Vec<StageStats>,
    /// Sustainable tick frequency: the slowest stage's median decides.
    pub frequency_hz: f64,
    pub events_ingested: usize,
    /// Ingest-stage throughput in events per second of wall time.
    pub ingest_events_per_sec: f64,
    /// Ticks whose intermediate product was displaced before consumption
    /// (threaded mode only).
    pub ticks_dropped: usize,
}

fn frequency_of(stages: &[StageStats]) -> f64 {
    let worst = stages
        .iter()
        .map(|s| s.median_ms)
        .fold(0.0f64, f64::max);
    if worst > 0.0 {
        1e3 / worst
    } else {
        f64::INFINITY
    }
}

struct GraphStageOut {
    t: u64,
    segments: Vec<LineSegment>,
    graph: PoseGraph,
    input: Option<GraphInput>,
}

fn graph_stage(
    t: u64,
    segments: Vec<LineSegment>,
    graph_cfg: &GraphConfig,
    surface_cfg: &SurfaceConfig,
) -> GraphStageOut {
    let mut graph = build_graph(&segments, graph_cfg);
    graph.augment(graph_cfg.zeta);
    let input = (!graph.nodes.is_empty()).then(|| {
        GraphInput::from_graph(
            &graph,
            surface_cfg.width,
            surface_cfg.height,
            surface_cfg.zeta_max(),
        )
    });
    GraphStageOut { t, segments, graph, input }
}

fn infer_stage<T: Scalar>(
    model: &Model<T>,
    staged: GraphStageOut,
    surface_cfg: &SurfaceConfig,
) -> Result<Option<TickOutput>> {
    let Some(input) = staged.input else {
        return Ok(None);
    };
    let pose = model.forward_eval(&input)?;
    Ok(Some(TickOutput {
        t: staged.t,
        segments: staged.segments,
        graph: staged.graph,
        pose: pose.to_estimate(staged.t, surface_cfg.width, surface_cfg.height),
    }))
}

/// Replay `events` tick by tick, running every stage to completion in order.
/// Deterministic: identical inputs yield identical outputs on every run.
pub fn run_sequential<T: Scalar>(
    events: &[Event],
    surface_cfg: &SurfaceConfig,
    detector: &DetectorConfig,
    graph_cfg: &GraphConfig,
    model: &Model<T>,
    cfg: &PipelineConfig,
) -> Result<PipelineReport> {
    cfg.validate()?;
    let surface = AccumulationSurface::new(surface_cfg.clone())?;
    let mut ingest = StageTiming::new("ingest");
    let mut detect = StageTiming::new("detect");
    let mut graphing = StageTiming::new("graph");
    let mut infer = StageTiming::new("infer");

    let last_t = events.last().map_or(0, |e| e.t);
    let ticks = last_t / cfg.tick_period_us;
    let mut outputs = Vec::new();
    let mut next = 0usize;
    let mut ingest_secs = 0.0f64;
    for k in 1..=ticks {
        let t_end = k * cfg.tick_period_us;
        let start = Instant::now();
        while next < events.len() && events[next].t <= t_end {
            surface.push(events[next])?;
            next += 1;
        }
        let d = start.elapsed();
        ingest.record(d);
        ingest_secs += d.as_secs_f64();
        let segments = detect.time(|| detect_lines(&surface, detector));
        let staged = graphing.time(|| graph_stage(t_end, segments, graph_cfg, surface_cfg));
        let out = infer.time(|| infer_stage(model, staged, surface_cfg)).transpose();
        if let Some(out) = out {
            outputs.push(out?);
        }
    }
    // Events after the last full tick still land on the surface; no tick
    // fires for them.
    let start = Instant::now();
    while next < events.len() {
        surface.push(events[next])?;
        next += 1;
    }
    ingest_secs += start.elapsed().as_secs_f64();
    let stages = vec![ingest.stats(), detect.stats(), graphing.stats(), infer.stats()];
    Ok(PipelineReport {
        frequency_hz: frequency_of(&stages),
        events_ingested: next,
        ingest_events_per_sec: if ingest_secs > 0.0 {
            next as f64 / ingest_secs
        } else {
            f64::INFINITY
        },
        ticks_dropped: 0,
        outputs,
        stages,
    })
}

/// Replay `events` with the four stages on separate threads, handing work
/// through latest-wins slots. Slow stages skip stale ticks instead of
/// stalling ingestion, so under load fewer poses come out than ticks went
/// in. Output order still follows tick order.
pub fn run_threaded<T: Scalar>(
    events: &[Event],
    surface_cfg: &SurfaceConfig,
    detector: &DetectorConfig,
    graph_cfg: &GraphConfig,
    model: &Model<T>,
    cfg: &PipelineConfig,
) -> Result<PipelineReport> {
    cfg.validate()?;
    let surface = AccumulationSurface::new(surface_cfg.clone())?;
    let tick_slot: LatestSlot<u64> = LatestSlot::new();
    let seg_slot: LatestSlot<(u64, Vec<LineSegment>)> = LatestSlot::new();
    let graph_slot: LatestSlot<GraphStageOut> = LatestSlot::new();

    struct IngestOut {
        timing: StageTiming,
        pushed: usize,
        secs: f64,
        dropped: usize,
        err: Option<Error>,
    }

    let (ingest_out, detect_t, graph_t, infer_res) = std::thread::scope(|scope| {
        let surface_ref = &surface;
        let tick_ref = &tick_slot;
        let seg_ref = &seg_slot;
        let graph_ref = &graph_slot;

        let ingest_h = scope.spawn(move || {
            let mut timing = StageTiming::new("ingest");
            let mut secs = 0.0f64;
            let mut dropped = 0usize;
            let mut next = 0usize;
            let mut err = None;
            let last_t = events.last().map_or(0, |e| e.t);
            let ticks = last_t / cfg.tick_period_us;
            'ticks: for k in 1..=ticks {
                let t_end = k * cfg.tick_period_us;
                let start = Instant::now();
                while next < events.len() && events[next].t <= t_end {
                    if let Err(e) = surface_ref.push(events[next]) {
                        err = Some(e);
                        break 'ticks;
                    }
                    next += 1;
                }
                let d = start.elapsed();
                timing.record(d);
                secs += d.as_secs_f64();
                if tick_ref.put(t_end) {
                    dropped += 1;
                }
            }
            if err.is_none() {
                let start = Instant::now();
                while next < events.len() {
                    if let Err(e) = surface_ref.push(events[next]) {
                        err = Some(e);
                        break;
                    }
                    next += 1;
                }
                secs += start.elapsed().as_secs_f64();
            }
            tick_ref.close();
            IngestOut { timing, pushed: next, secs, dropped, err }
        });

        let detect_h = scope.spawn(move || {
            let mut timing = StageTiming::new("detect");
            let mut dropped = 0usize;
            while let Some(t) = tick_ref.take() {
                let segments = timing.time(|| detect_lines(surface_ref, detector));
                if seg_ref.put((t, segments)) {
                    dropped += 1;
                }
            }
            seg_ref.close();
            (timing, dropped)
        });

        let graph_h = scope.spawn(move || {
            let mut timing = StageTiming::new("graph");
            let mut dropped = 0usize;
            while let Some((t, segments)) = seg_ref.take() {
                let staged = timing.time(|| graph_stage(t, segments, graph_cfg, surface_cfg));
                if graph_ref.put(staged) {
                    dropped += 1;
                }
            }
            graph_ref.close();
            (timing, dropped)
        });

        let infer_h = scope.spawn(move || {
            let mut timing = StageTiming::new("infer");
            let mut outputs = Vec::new();
            while let Some(staged) = graph_ref.take() {
                match timing.time(|| infer_stage(model, staged, surface_cfg)) {
                    Ok(Some(out)) => outputs.push(out),
                    Ok(None) => {}
                    Err(e) => return Err(e),
                }
            }
            Ok((timing, outputs))
        });

        (
            ingest_h.join().expect("ingest thread"),
            detect_h.join().expect("detect thread"),
            graph_h.join().expect("graph thread"),
            infer_h.join().expect("infer thread"),
        )
    });

    if let Some(e) = ingest_out.err {
        return Err(e);
    }
    let (infer_timing, outputs) = infer_res?;
    let (detect_timing, detect_dropped) = detect_t;
    let (graph_timing, graph_dropped) = graph_t;
    let stages = vec![
        ingest_out.timing.stats(),
        detect_timing.stats(),
        graph_timing.stats(),
        infer_timing.stats(),
    ];
    Ok(PipelineReport {
        frequency_hz: frequency_of(&stages),
        events_ingested: ingest_out.pushed,
        ingest_events_per_sec: if ingest_out.secs > 0.0 {
            ingest_out.pushed as f64 / ingest_out.secs
        } else {
            f64::INFINITY
        },
        ticks_dropped: ingest_out.dropped + detect_dropped + graph_dropped,
        outputs,
        stages,
    })
}

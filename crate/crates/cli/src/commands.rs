//! Implementations of the `evpose` subcommands.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{ArgGroup, Args, ValueEnum};

use evpose_core::config::Config;
use evpose_core::event::{read_events, write_events, AccumulationSurface, Event, EventFileReader};
use evpose_core::graph::write_graph;
use evpose_core::line::{read_segments, write_segments};
use evpose_core::metrics::{self, DEFAULT_TORSO};
use evpose_core::model::Model;
use evpose_core::pipeline::{run_sequential, run_threaded, PipelineReport};
use evpose_core::pose::{
    read_ground_truth, read_poses, write_ground_truth, write_poses, GroundTruthPose,
};
use evpose_core::train::dataset::build_dataset;
use evpose_core::train::write_metrics_log;
use evpose_core::viz::{render_scene, save_png};
use evpose_core::{load_checkpoint, save_checkpoint};

use crate::align;
use crate::report;

fn load_config(path: &Option<PathBuf>) -> Result<Config> {
    match path {
        Some(p) => Config::load(p).with_context(|| format!("loading config {}", p.display())),
        None => Ok(Config::default()),
    }
}

// ---------------------------------------------------------------- synth ----

#[derive(Args)]
pub struct SynthArgs {
    /// Pipeline config; the [synth] section drives generation.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output event file (`t x y p` lines).
    #[arg(long)]
    out_events: PathBuf,
    /// Output ground-truth pose file.
    #[arg(long)]
    out_gt: PathBuf,
}

pub fn synth(a: SynthArgs) -> Result<()> {
    let cfg = load_config(&a.config)?;
    let (events, gts) = evpose_core::synth::generate(&cfg.synth, a.seed)?;
    write_events(&a.out_events, &events)?;
    write_ground_truth(&a.out_gt, &gts)?;
    println!(
        "synthesized {} events and {} ground-truth poses over {:.2} s at {}x{}",
        events.len(),
        gts.len(),
        cfg.synth.duration_us as f64 / 1e6,
        cfg.synth.width,
        cfg.synth.height
    );
    Ok(())
}

// --------------------------------------------------------- detect-lines ----

#[derive(Args)]
pub struct DetectLinesArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Input event file; the whole stream accumulates before detection.
    #[arg(long)]
    events: PathBuf,
    /// Output segment file (`block_ix x0 y0 x1 y1 score` lines).
    #[arg(long)]
    out: PathBuf,
    /// Optional PNG of the surface with detected segments drawn on top.
    #[arg(long)]
    overlay: Option<PathBuf>,
}

pub fn detect_lines(a: DetectLinesArgs) -> Result<()> {
    let cfg = load_config(&a.config)?;
    let events = read_events(&a.events)?;
    let surface = AccumulationSurface::new(cfg.surface.clone())?;
    for e in &events {
        surface.push(*e)?;
    }
    let segments = evpose_core::line::detect_lines(&surface, &cfg.detector);
    write_segments(&a.out, &segments)?;
    println!("{} events -> {} segments", events.len(), segments.len());
    if let Some(path) = &a.overlay {
        let img = render_scene(
            cfg.surface.width,
            cfg.surface.height,
            Some(&surface),
            &segments,
            None,
            None,
            None,
        );
        save_png(&img, path)?;
        println!("overlay written to {}", path.display());
    }
    Ok(())
}

// ----------------------------------------------------------- build-graph ---

#[derive(Args)]
pub struct BuildGraphArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Input segment file.
    #[arg(long)]
    segments: PathBuf,
    /// Output graph file.
    #[arg(long)]
    out: PathBuf,
}

pub fn build_graph(a: BuildGraphArgs) -> Result<()> {
    let cfg = load_config(&a.config)?;
    let segments = read_segments(&a.segments)?;
    let mut graph = evpose_core::graph::build_graph(&segments, &cfg.graph);
    graph.augment(cfg.graph.zeta);
    write_graph(&a.out, &graph)?;
    let augmented = graph.edges.iter().filter(|e| e.augmented && e.src < e.dst).count();
    println!(
        "{} segments -> {} nodes, {} edges ({} augmented pairs)",
        segments.len(),
        graph.nodes.len(),
        graph.edges.len(),
        augmented
    );
    Ok(())
}

// ----------------------------------------------------------------- train ---

#[derive(Args)]
pub struct TrainArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Training event stream.
    #[arg(long)]
    events: PathBuf,
    /// Ground-truth poses aligned with the event stream.
    #[arg(long)]
    gt: PathBuf,
    /// Where to store the trained checkpoint.
    #[arg(long)]
    checkpoint_out: PathBuf,
    /// Optional per-epoch metrics log (validation values).
    #[arg(long)]
    log: Option<PathBuf>,
    /// Suppress per-epoch progress lines.
    #[arg(long)]
    quiet: bool,
}

pub fn train(a: TrainArgs) -> Result<()> {
    let cfg = load_config(&a.config)?;
    let events = read_events(&a.events)?;
    let gts = read_ground_truth(&a.gt)?;
    let dataset = build_dataset(&events, &gts, &cfg.surface, &cfg.detector, &cfg.graph)?;
    println!(
        "dataset: {} samples ({} frames skipped: empty graph or no visible joints)",
        dataset.len(),
        dataset.skipped
    );
    let mut model = Model::init(cfg.model.clone(), cfg.training.seed)?;
    let logs = evpose_core::train::train(&mut model, &dataset, &cfg.training, |log| {
        if !a.quiet {
            println!(
                "epoch {:>4}  l_target {:.6}  l_node {:.6}  pck@0.4 {:.4}  mpjpe {:.3}",
                log.epoch, log.l_target, log.l_node, log.pck04, log.mpjpe
            );
        }
    })?;
    save_checkpoint(&a.checkpoint_out, &model)?;
    println!("checkpoint written to {}", a.checkpoint_out.display());
    if let Some(path) = &a.log {
        write_metrics_log(path, &logs)?;
        println!("metrics log written to {}", path.display());
    }
    Ok(())
}

// ------------------------------------------------------------------ eval ---

#[derive(Args)]
pub struct EvalArgs {
    /// Prediction pose file.
    #[arg(long)]
    pred: PathBuf,
    /// Ground-truth pose file.
    #[arg(long)]
    gt: PathBuf,
    /// PCK threshold as a fraction of the torso diagonal.
    #[arg(long, default_value_t = 0.4)]
    threshold: f64,
    /// Maximum timestamp distance when pairing predictions with ground truth.
    #[arg(long, default_value_t = 5_000)]
    tolerance_us: u64,
    /// Write the aligned table here as well as stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write a machine-readable `key value` report here.
    #[arg(long)]
    kv: Option<PathBuf>,
    /// Threshold sweep `start:step:end` (inclusive), e.g. `0.1:0.1:0.9`.
    #[arg(long, value_name = "START:STEP:END")]
    pck_thresholds: Option<String>,
    /// Output file for the sweep (`threshold pck` lines).
    #[arg(long, requires = "pck_thresholds")]
    plot: Option<PathBuf>,
}

fn parse_sweep(spec: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = spec.split(':').collect();
    let [start, step, end] = parts.as_slice() else {
        bail!("sweep must be start:step:end, got '{spec}'");
    };
    let (start, step, end): (f64, f64, f64) = (start.parse()?, step.parse()?, end.parse()?);
    if !(step > 0.0) || end < start {
        bail!("sweep needs step > 0 and end >= start");
    }
    let n = ((end - start) / step).round() as usize;
    Ok((0..=n)
        .map(|k| start + k as f64 * step)
        .filter(|&t| t <= end + 1e-9)
        .collect())
}

pub fn eval(a: EvalArgs) -> Result<()> {
    let preds = read_poses(&a.pred)?;
    let gts = read_ground_truth(&a.gt)?;
    let (preds, gts, skipped) = align::pair_by_time(&preds, &gts, a.tolerance_us);
    if skipped > 0 {
        eprintln!(
            "warning: {skipped} predictions had no ground truth within {} us",
            a.tolerance_us
        );
    }
    if preds.is_empty() {
        bail!("no prediction/ground-truth pairs within {} us", a.tolerance_us);
    }
    let pck = metrics::pck(&preds, &gts, a.threshold, DEFAULT_TORSO)?;
    let mpjpe = metrics::mpjpe(&preds, &gts)?;
    let table = report::metric_table(a.threshold, &pck, &mpjpe);
    print!("{table}");
    if let Some(path) = &a.out {
        fs::write(path, &table)?;
    }
    if let Some(path) = &a.kv {
        fs::write(path, report::metric_kv(a.threshold, &pck, &mpjpe))?;
    }
    if let Some(spec) = &a.pck_thresholds {
        let mut lines = String::from("# threshold pck\n");
        for t in parse_sweep(spec)? {
            let r = metrics::pck(&preds, &gts, t, DEFAULT_TORSO)?;
            lines.push_str(&format!("{t} {}\n", r.overall));
        }
        match &a.plot {
            Some(path) => {
                fs::write(path, lines)?;
                println!("sweep written to {}", path.display());
            }
            None => print!("{lines}"),
        }
    }
    Ok(())
}

// ----------------------------------------------------------------- bench ---

#[derive(Args)]
pub struct BenchArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Event file to replay; omitted, a synthetic stream is generated.
    #[arg(long)]
    events: Option<PathBuf>,
    /// Checkpoint to load; omitted, parameters are freshly initialized.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Seed for synthetic generation when no event file is given.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Measure the sequential runner instead of the threaded one.
    #[arg(long)]
    sequential: bool,
    /// Write the key/value report here as well as stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn load_or_init(checkpoint: &Option<PathBuf>, cfg: &Config) -> Result<Model<f64>> {
    match checkpoint {
        Some(p) => {
            load_checkpoint(p, &cfg.model).with_context(|| format!("loading {}", p.display()))
        }
        None => Ok(Model::init(cfg.model.clone(), cfg.training.seed)?),
    }
}

fn run_pipeline(
    events: &[Event],
    cfg: &Config,
    model: &Model<f32>,
    threaded: bool,
) -> Result<PipelineReport> {
    let report = if threaded {
        run_threaded(events, &cfg.surface, &cfg.detector, &cfg.graph, model, &cfg.pipeline)?
    } else {
        run_sequential(events, &cfg.surface, &cfg.detector, &cfg.graph, model, &cfg.pipeline)?
    };
    Ok(report)
}

pub fn bench(a: BenchArgs) -> Result<()> {
    let cfg = load_config(&a.config)?;
    let events = match &a.events {
        Some(p) => read_events(p)?,
        None => {
            let (events, _) = evpose_core::synth::generate(&cfg.synth, a.seed)?;
            println!("# synthesized {} events", events.len());
            events
        }
    };
    let model = load_or_init(&a.checkpoint, &cfg)?.to_f32();
    let pipeline_report = run_pipeline(&events, &cfg, &model, !a.sequential)?;
    let text = report::timing_kv(&pipeline_report);
    print!("{text}");
    if let Some(path) = &a.out {
        fs::write(path, &text)?;
    }
    Ok(())
}

// ------------------------------------------------------------- visualize ---

#[derive(Args)]
pub struct VisualizeArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Prediction pose file to overlay (yellow).
    #[arg(long)]
    poses: Option<PathBuf>,
    /// Ground-truth pose file to overlay (green).
    #[arg(long)]
    gt: Option<PathBuf>,
    /// Event file rendered as the grayscale backdrop.
    #[arg(long)]
    events: Option<PathBuf>,
    /// Directory for the numbered PNG frames.
    #[arg(long)]
    out_dir: PathBuf,
    /// Maximum timestamp distance when pairing frames with ground truth.
    #[arg(long, default_value_t = 5_000)]
    tolerance_us: u64,
    /// Render at most this many frames, evenly spaced over the sequence.
    #[arg(long)]
    max_frames: Option<usize>,
}

pub fn visualize(a: VisualizeArgs) -> Result<()> {
    let cfg = load_config(&a.config)?;
    let poses = match &a.poses {
        Some(p) => read_poses(p)?,
        None => Vec::new(),
    };
    let mut gts = match &a.gt {
        Some(p) => read_ground_truth(p)?,
        None => Vec::new(),
    };
    gts.sort_by_key(|g| g.t);
    let gt_ts: Vec<u64> = gts.iter().map(|g| g.t).collect();
    let events = match &a.events {
        Some(p) => read_events(p)?,
        None => Vec::new(),
    };

    // Frame clock: predictions if present, else ground truth, else one frame
    // of the fully accumulated surface.
    let mut frame_ts: Vec<u64> = if !poses.is_empty() {
        poses.iter().map(|p| p.t).collect()
    } else if !gts.is_empty() {
        gt_ts.clone()
    } else if let Some(last) = events.last() {
        vec![last.t]
    } else {
        bail!("nothing to draw: pass at least one of --poses, --gt, --events");
    };
    frame_ts.sort_unstable();
    frame_ts.dedup();
    if let Some(n) = a.max_frames {
        if n == 0 {
            bail!("--max-frames must be positive");
        }
        if n < frame_ts.len() {
            let len = frame_ts.len();
            frame_ts = (0..n).map(|k| frame_ts[k * len / n]).collect();
        }
    }

    fs::create_dir_all(&a.out_dir)?;
    let surface = match events.is_empty() {
        true => None,
        false => Some(AccumulationSurface::new(cfg.surface.clone())?),
    };
    let mut cursor = 0;
    let mut unmatched_gt = 0;
    for &t in &frame_ts {
        if let Some(surface) = &surface {
            while cursor < events.len() && events[cursor].t <= t {
                surface.push(events[cursor])?;
                cursor += 1;
            }
        }
        let pose = poses.iter().find(|p| p.t == t);
        let gt = align::nearest_gt(&gts, &gt_ts, t, a.tolerance_us);
        if a.gt.is_some() && gt.is_none() {
            unmatched_gt += 1;
        }
        let img = render_scene(
            cfg.surface.width,
            cfg.surface.height,
            surface.as_ref(),
            &[],
            None,
            pose,
            gt,
        );
        save_png(&img, a.out_dir.join(format!("frame_{t:012}.png")))?;
    }
    if unmatched_gt > 0 {
        eprintln!(
            "warning: {unmatched_gt} frames had no ground truth within {} us; drawn without",
            a.tolerance_us
        );
    }
    println!("{} frames written to {}", frame_ts.len(), a.out_dir.display());
    Ok(())
}

// ------------------------------------------------------------------- run ---

#[derive(Args)]
#[command(group(ArgGroup::new("params").required(true).args(["checkpoint", "untrained"])))]
pub struct RunArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Event file to replay.
    #[arg(long)]
    events: PathBuf,
    /// Trained checkpoint to run.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Explicitly run with freshly initialized, untrained parameters.
    #[arg(long)]
    untrained: bool,
    /// Output pose file.
    #[arg(long)]
    out: PathBuf,
    /// Also write every tick's segments, separated by `# t <tick>` comments.
    #[arg(long)]
    segments_out: Option<PathBuf>,
    /// Also write every tick's graph, separated by `# t <tick>` comments.
    #[arg(long)]
    graphs_out: Option<PathBuf>,
    /// Write the stage-timing key/value report here.
    #[arg(long)]
    report: Option<PathBuf>,
    /// Use the concurrent staged runner (latest-wins handoff) instead of the
    /// deterministic sequential one.
    #[arg(long)]
    threaded: bool,
}

fn write_tick_segments(path: &Path, report: &PipelineReport) -> Result<()> {
    let mut w = std::io::BufWriter::new(fs::File::create(path)?);
    for tick in &report.outputs {
        writeln!(w, "# t {}", tick.t)?;
        for s in &tick.segments {
            writeln!(w, "{} {} {} {} {} {}", s.block, s.x0, s.y0, s.x1, s.y1, s.score)?;
        }
    }
    w.flush()?;
    Ok(())
}

fn write_tick_graphs(path: &Path, report: &PipelineReport) -> Result<()> {
    let mut w = std::io::BufWriter::new(fs::File::create(path)?);
    for tick in &report.outputs {
        writeln!(w, "# t {}", tick.t)?;
        let g = &tick.graph;
        writeln!(w, "{} nodes {} edges", g.nodes.len(), g.edges.len())?;
        for (ix, n) in g.nodes.iter().enumerate() {
            writeln!(w, "{} {} {}", ix, n.x, n.y)?;
        }
        for e in &g.edges {
            writeln!(w, "{} {} {}", e.src, e.dst, u8::from(e.augmented))?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn run(a: RunArgs) -> Result<()> {
    let cfg = load_config(&a.config)?;
    let events = read_events(&a.events)?;
    let model = load_or_init(&a.checkpoint, &cfg)?.to_f32();
    let pipeline_report = run_pipeline(&events, &cfg, &model, a.threaded)?;
    let poses: Vec<_> = pipeline_report.outputs.iter().map(|o| o.pose.clone()).collect();
    write_poses(&a.out, &poses)?;
    if let Some(path) = &a.segments_out {
        write_tick_segments(path, &pipeline_report)?;
    }
    if let Some(path) = &a.graphs_out {
        write_tick_graphs(path, &pipeline_report)?;
    }
    if let Some(path) = &a.report {
        fs::write(path, report::timing_kv(&pipeline_report))?;
    }
    println!(
        "{} events -> {} poses ({} ticks dropped), pipeline frequency {:.1} Hz",
        pipeline_report.events_ingested,
        poses.len(),
        pipeline_report.ticks_dropped,
        pipeline_report.frequency_hz
    );
    Ok(())
}

// ---------------------------------------------------------------- ingest ---

#[derive(ValueEnum, Clone, Copy)]
pub enum DatasetKind {
    /// 346x260-class recordings.
    Dhp19,
    /// 640x480-class recordings.
    Eh36m,
}

impl DatasetKind {
    fn resolution(self) -> (u32, u32) {
        match self {
            DatasetKind::Dhp19 => (346, 260),
            DatasetKind::Eh36m => (640, 480),
        }
    }

    fn name(self) -> &'static str {
        match self {
            DatasetKind::Dhp19 => "dhp19",
            DatasetKind::Eh36m => "eh36m",
        }
    }
}

#[derive(Args)]
pub struct IngestArgs {
    /// Resolution class to validate against.
    #[arg(long, value_enum)]
    kind: DatasetKind,
    /// Converted event export to validate.
    #[arg(long)]
    events: PathBuf,
    /// Validated native event file.
    #[arg(long)]
    out_events: PathBuf,
    /// Optional converted ground-truth export.
    #[arg(long, requires = "out_gt")]
    gt: Option<PathBuf>,
    /// Validated native ground-truth file.
    #[arg(long, requires = "gt")]
    out_gt: Option<PathBuf>,
}

fn validate_gt(gts: &[GroundTruthPose], width: u32, height: u32) -> Result<()> {
    for (row, gt) in gts.iter().enumerate() {
        for (j, p) in gt.joints.iter().enumerate() {
            if !gt.visible[j] {
                continue;
            }
            let in_frame = p[0].is_finite()
                && p[1].is_finite()
                && (0.0..width as f64).contains(&p[0])
                && (0.0..height as f64).contains(&p[1]);
            if !in_frame {
                bail!(
                    "pose row {} (t = {} us): visible joint {} at ({}, {}) outside {}x{}",
                    row + 1,
                    gt.t,
                    evpose_core::joints::ALL_JOINTS[j].name(),
                    p[0],
                    p[1],
                    width,
                    height
                );
            }
        }
    }
    Ok(())
}

pub fn ingest(a: IngestArgs) -> Result<()> {
    let (width, height) = a.kind.resolution();
    let mut reader = EventFileReader::open(&a.events)?;
    let mut events = Vec::new();
    let mut prev_t = 0u64;
    while let Some(event) = reader.next() {
        let event = event?;
        let line = reader.line_number();
        if event.x as u32 >= width || event.y as u32 >= height {
            bail!(
                "{}:{}: event ({}, {}) outside {}x{}",
                a.events.display(),
                line,
                event.x,
                event.y,
                width,
                height
            );
        }
        if event.t < prev_t {
            bail!(
                "{}:{}: timestamp {} us decreases below previous {} us",
                a.events.display(),
                line,
                event.t,
                prev_t
            );
        }
        prev_t = event.t;
        events.push(event);
    }
    write_events(&a.out_events, &events)?;
    let mut gt_count = 0;
    if let (Some(gt_path), Some(out_gt)) = (&a.gt, &a.out_gt) {
        let gts = read_ground_truth(gt_path)?;
        validate_gt(&gts, width, height)?;
        write_ground_truth(out_gt, &gts)?;
        gt_count = gts.len();
    }
    println!(
        "validated {} events{} against the {} class ({}x{})",
        events.len(),
        if gt_count > 0 {
            format!(" and {gt_count} poses")
        } else {
            String::new()
        },
        a.kind.name(),
        width,
        height
    );
    Ok(())
}

//! End-to-end exercises of the `evpose` binary: synth -> detect-lines ->
//! build-graph -> train -> run -> eval -> visualize -> bench -> ingest, plus
//! the advertised failure paths (nonzero exit, line-numbered messages).

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn evpose(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_evpose"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = evpose(args);
    assert!(
        out.status.success(),
        "evpose {:?} failed\nstdout: {}\nstderr: {}",
        args,
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn fails(args: &[&str]) -> String {
    let out = evpose(args);
    assert!(!out.status.success(), "evpose {args:?} unexpectedly succeeded");
    String::from_utf8_lossy(&out.stderr).into_owned()
}

/// Small scene, small network: the whole flow in seconds.
const CONFIG: &str = r#"
[surface]
width = 160
height = 120
block_size = 16

[synth]
width = 160
height = 120
duration_us = 500000
gt_period_us = 50000
body_scale = 0.5
noise_rate_hz = 2000.0

[model]
dims = [8, 8]
kernels = [2, 2]

[training]
epochs = 2
batch_size = 4
"#;

struct Workspace {
    _dir: tempfile::TempDir,
    root: PathBuf,
}

impl Workspace {
    fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        let root = dir.path().to_path_buf();
        std::fs::write(root.join("config.toml"), CONFIG).unwrap();
        Self { _dir: dir, root }
    }

    fn path(&self, name: &str) -> String {
        self.root.join(name).to_str().unwrap().to_string()
    }
}

fn lines_of(path: &str) -> usize {
    std::fs::read_to_string(path).unwrap().lines().count()
}

#[test]
fn full_flow_produces_consistent_artifacts() {
    let ws = Workspace::new();
    let cfg = ws.path("config.toml");

    // synth
    let (events, gt) = (ws.path("events.txt"), ws.path("gt.txt"));
    let out = ok(&["synth", "--config", &cfg, "--out-events", &events, "--out-gt", &gt]);
    assert!(out.contains("ground-truth poses"));
    assert!(lines_of(&events) > 100, "expected a usable event stream");
    assert!(lines_of(&gt) >= 5);

    // detect-lines with overlay
    let (segs, overlay) = (ws.path("segments.txt"), ws.path("overlay.png"));
    ok(&["detect-lines", "--config", &cfg, "--events", &events, "--out", &segs, "--overlay", &overlay]);
    assert!(lines_of(&segs) > 0, "no segments detected");
    assert!(Path::new(&overlay).exists());

    // build-graph
    let graph = ws.path("graph.txt");
    ok(&["build-graph", "--config", &cfg, "--segments", &segs, "--out", &graph]);
    let header = std::fs::read_to_string(&graph).unwrap();
    assert!(header.lines().next().unwrap().contains("nodes"));

    // train
    let (ckpt, log) = (ws.path("model.ckpt"), ws.path("train.log"));
    let out = ok(&[
        "train", "--config", &cfg, "--events", &events, "--gt", &gt,
        "--checkpoint-out", &ckpt, "--log", &log, "--quiet",
    ]);
    assert!(out.contains("dataset:"));
    assert!(Path::new(&ckpt).exists());
    assert_eq!(lines_of(&log), 2, "one metrics line per epoch");

    // run (sequential) twice: byte-identical outputs
    let run_once = |tag: &str| {
        let poses = ws.path(&format!("poses_{tag}.txt"));
        let segs = ws.path(&format!("tick_segments_{tag}.txt"));
        let graphs = ws.path(&format!("tick_graphs_{tag}.txt"));
        let report = ws.path(&format!("report_{tag}.kv"));
        ok(&[
            "run", "--config", &cfg, "--events", &events, "--checkpoint", &ckpt,
            "--out", &poses, "--segments-out", &segs, "--graphs-out", &graphs,
            "--report", &report,
        ]);
        (poses, segs, graphs)
    };
    let (poses_a, segs_a, graphs_a) = run_once("a");
    let (poses_b, segs_b, graphs_b) = run_once("b");
    for (a, b) in [(&poses_a, &poses_b), (&segs_a, &segs_b), (&graphs_a, &graphs_b)] {
        assert_eq!(
            std::fs::read(a).unwrap(),
            std::fs::read(b).unwrap(),
            "sequential replay must be byte-identical ({a} vs {b})"
        );
    }
    assert!(lines_of(&poses_a) > 0, "no poses emitted");

    // eval with kv report and threshold sweep
    let (kv, sweep) = (ws.path("metrics.kv"), ws.path("sweep.txt"));
    let out = ok(&[
        "eval", "--pred", &poses_a, "--gt", &gt, "--kv", &kv,
        "--pck-thresholds", "0.2:0.2:0.8", "--plot", &sweep,
    ]);
    assert!(out.contains("overall"));
    let kv_text = std::fs::read_to_string(&kv).unwrap();
    assert!(kv_text.contains("pck.overall "));
    assert!(kv_text.contains("mpjpe.overall "));
    // Header plus one line per threshold in [0.2, 0.8].
    assert_eq!(lines_of(&sweep), 1 + 4);

    // visualize a few frames
    let viz_dir = ws.path("frames");
    ok(&[
        "visualize", "--config", &cfg, "--poses", &poses_a, "--gt", &gt,
        "--events", &events, "--out-dir", &viz_dir, "--max-frames", "3",
    ]);
    let frames: Vec<_> = std::fs::read_dir(&viz_dir).unwrap().collect();
    assert_eq!(frames.len(), 3);

    // bench emits the stage report
    let bench_kv = ws.path("bench.kv");
    ok(&["bench", "--config", &cfg, "--events", &events, "--out", &bench_kv]);
    let bench_text = std::fs::read_to_string(&bench_kv).unwrap();
    for key in ["stage.ingest.median_ms", "stage.detect.median_ms", "stage.graph.p99_ms", "stage.infer.invocations", "frequency_hz", "ingest_events_per_sec"] {
        assert!(bench_text.contains(key), "bench report missing {key}:\n{bench_text}");
    }

    // ingest accepts the in-class stream and is idempotent byte-for-byte
    let native_a = ws.path("native_a.txt");
    let native_b = ws.path("native_b.txt");
    ok(&["ingest", "--kind", "dhp19", "--events", &events, "--out-events", &native_a]);
    ok(&["ingest", "--kind", "dhp19", "--events", &native_a, "--out-events", &native_b]);
    assert_eq!(std::fs::read(&native_a).unwrap(), std::fs::read(&native_b).unwrap());
}

#[test]
fn run_requires_explicit_parameter_choice() {
    let ws = Workspace::new();
    let stderr = fails(&[
        "run", "--events", &ws.path("events.txt"), "--out", &ws.path("poses.txt"),
    ]);
    assert!(stderr.contains("--checkpoint") || stderr.contains("--untrained"));
}

#[test]
fn run_untrained_works_without_checkpoint() {
    let ws = Workspace::new();
    let cfg = ws.path("config.toml");
    let (events, gt) = (ws.path("events.txt"), ws.path("gt.txt"));
    ok(&["synth", "--config", &cfg, "--out-events", &events, "--out-gt", &gt]);
    let poses = ws.path("poses.txt");
    ok(&["run", "--config", &cfg, "--events", &events, "--untrained", "--out", &poses]);
    assert!(lines_of(&poses) > 0);
}

#[test]
fn ingest_rejects_out_of_range_events_with_line_number() {
    let ws = Workspace::new();
    let bad = ws.path("bad_events.txt");
    std::fs::write(&bad, "0 10 10 1\n5 400 10 0\n").unwrap();
    let stderr = fails(&["ingest", "--kind", "dhp19", "--events", &bad, "--out-events", &ws.path("out.txt")]);
    assert!(stderr.contains(":2"), "expected line number in: {stderr}");
    assert!(stderr.contains("346x260"));
}

#[test]
fn ingest_rejects_decreasing_timestamps() {
    let ws = Workspace::new();
    let bad = ws.path("bad_events.txt");
    std::fs::write(&bad, "10 1 1 1\n5 1 1 0\n").unwrap();
    let stderr = fails(&["ingest", "--kind", "eh36m", "--events", &bad, "--out-events", &ws.path("out.txt")]);
    assert!(stderr.contains(":2") && stderr.contains("decreases"));
}

#[test]
fn malformed_inputs_exit_nonzero_with_line() {
    let ws = Workspace::new();
    let bad = ws.path("bad.txt");
    std::fs::write(&bad, "1 2 3 1\nnot an event\n").unwrap();
    let stderr = fails(&["detect-lines", "--events", &bad, "--out", &ws.path("segs.txt")]);
    assert!(stderr.contains(":2:"), "expected line info in: {stderr}");
}

#[test]
fn eval_rejects_unpairable_streams() {
    let ws = Workspace::new();
    let pred = ws.path("pred.txt");
    let gt = ws.path("gt.txt");
    let row = |t: u64| {
        let mut s = t.to_string();
        for _ in 0..13 {
            s.push_str(" 1 1 1");
        }
        s.push('\n');
        s
    };
    std::fs::write(&pred, row(1_000_000)).unwrap();
    std::fs::write(&gt, row(0)).unwrap();
    let stderr = fails(&["eval", "--pred", &pred, "--gt", &gt, "--tolerance-us", "10"]);
    assert!(stderr.contains("no prediction/ground-truth pairs"));
}

#[test]
fn visualize_with_empty_pose_file_renders_background_only() {
    let ws = Workspace::new();
    let cfg = ws.path("config.toml");
    let (events, gt) = (ws.path("events.txt"), ws.path("gt.txt"));
    ok(&["synth", "--config", &cfg, "--out-events", &events, "--out-gt", &gt]);
    let empty = ws.path("empty_poses.txt");
    std::fs::write(&empty, "# no rows\n").unwrap();
    let dir = ws.path("frames");
    ok(&["visualize", "--config", &cfg, "--poses", &empty, "--events", &events, "--out-dir", &dir]);
    // No pose timestamps and no gt file: one frame of the final surface.
    assert_eq!(std::fs::read_dir(&dir).unwrap().count(), 1);
}

//! Text reports: the aligned metric table for humans and `key value` files
//! for scripts. Floats print with shortest round-trip formatting so reports
//! are stable and machine-parseable.

use std::fmt::Write as _;

use evpose_core::joints::{ALL_CLUSTERS, ALL_JOINTS};
use evpose_core::metrics::{cluster_means, MpjpeResult, PckResult};
use evpose_core::pipeline::PipelineReport;

fn cell(v: Option<f64>) -> String {
    match v {
        Some(v) => format!("{v:.4}"),
        None => "-".into(),
    }
}

/// Human-readable table: one row per joint, then cluster means, then the
/// overall line and sample counts.
pub fn metric_table(threshold: f64, pck: &PckResult, mpjpe: &MpjpeResult) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{:<16} {:>10} {:>12}", "joint", format!("pck@{threshold}"), "mpjpe_px");
    for j in ALL_JOINTS {
        let ix = j as usize;
        let _ = writeln!(
            s,
            "{:<16} {:>10} {:>12}",
            j.name(),
            cell(pck.per_joint[ix]),
            cell(mpjpe.per_joint[ix])
        );
    }
    let pck_clusters = cluster_means(&pck.per_joint);
    let mpjpe_clusters = cluster_means(&mpjpe.per_joint);
    for (k, c) in ALL_CLUSTERS.iter().enumerate() {
        let _ = writeln!(
            s,
            "{:<16} {:>10} {:>12}",
            format!("cluster:{}", c.name()),
            cell(pck_clusters[k]),
            cell(mpjpe_clusters[k])
        );
    }
    let _ = writeln!(
        s,
        "{:<16} {:>10} {:>12}",
        "overall",
        cell(Some(pck.overall)),
        cell(Some(mpjpe.overall))
    );
    let _ = writeln!(
        s,
        "samples: {} measured, {} skipped (missing torso)",
        pck.measured_samples, pck.skipped_samples
    );
    s
}

/// Machine-readable `key value` lines covering the same numbers as
/// [`metric_table`]. Undefined entries are omitted rather than printed as
/// placeholders.
pub fn metric_kv(threshold: f64, pck: &PckResult, mpjpe: &MpjpeResult) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "pck.threshold {threshold}");
    let _ = writeln!(s, "pck.overall {}", pck.overall);
    let _ = writeln!(s, "mpjpe.overall {}", mpjpe.overall);
    for j in ALL_JOINTS {
        let ix = j as usize;
        if let Some(v) = pck.per_joint[ix] {
            let _ = writeln!(s, "pck.joint.{} {v}", j.name());
        }
        if let Some(v) = mpjpe.per_joint[ix] {
            let _ = writeln!(s, "mpjpe.joint.{} {v}", j.name());
        }
    }
    let pck_clusters = cluster_means(&pck.per_joint);
    let mpjpe_clusters = cluster_means(&mpjpe.per_joint);
    for (k, c) in ALL_CLUSTERS.iter().enumerate() {
        if let Some(v) = pck_clusters[k] {
            let _ = writeln!(s, "pck.cluster.{} {v}", c.name());
        }
        if let Some(v) = mpjpe_clusters[k] {
            let _ = writeln!(s, "mpjpe.cluster.{} {v}", c.name());
        }
    }
    let _ = writeln!(s, "samples.measured {}", pck.measured_samples);
    let _ = writeln!(s, "samples.skipped {}", pck.skipped_samples);
    s
}

/// Stage timing and throughput as `key value` lines.
pub fn timing_kv(report: &PipelineReport) -> String {
    let mut s = String::new();
    for stage in &report.stages {
        let _ = writeln!(s, "stage.{}.invocations {}", stage.name, stage.invocations);
        let _ = writeln!(s, "stage.{}.min_ms {}", stage.name, stage.min_ms);
        let _ = writeln!(s, "stage.{}.median_ms {}", stage.name, stage.median_ms);
        let _ = writeln!(s, "stage.{}.p99_ms {}", stage.name, stage.p99_ms);
    }
    let _ = writeln!(s, "frequency_hz {}", report.frequency_hz);
    let _ = writeln!(s, "events_ingested {}", report.events_ingested);
    let _ = writeln!(s, "ingest_events_per_sec {}", report.ingest_events_per_sec);
    let _ = writeln!(s, "ticks_dropped {}", report.ticks_dropped);
    let _ = writeln!(s, "poses_emitted {}", report.outputs.len());
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use evpose_core::joints::JOINT_COUNT;

    fn sample_results() -> (PckResult, MpjpeResult) {
        let mut per_joint = [Some(0.5); JOINT_COUNT];
        per_joint[3] = None;
        (
            PckResult {
                per_joint,
                overall: 0.5,
                skipped_samples: 1,
                measured_samples: 9,
            },
            MpjpeResult {
                per_joint: [Some(2.0); JOINT_COUNT],
                overall: 2.0,
            },
        )
    }

    #[test]
    fn table_has_a_row_per_joint_cluster_and_overall() {
        let (pck, mpjpe) = sample_results();
        let table = metric_table(0.4, &pck, &mpjpe);
        // Header + 13 joints + 3 clusters + overall + samples line.
        assert_eq!(table.lines().count(), 1 + 13 + 3 + 1 + 1);
        assert!(table.contains("hip_left"));
        assert!(table.contains("cluster:legs"));
    }

    #[test]
    fn undefined_joint_prints_dash_in_table_and_vanishes_in_kv() {
        let (pck, mpjpe) = sample_results();
        let table = metric_table(0.4, &pck, &mpjpe);
        let row = table.lines().find(|l| l.starts_with("hip_left")).unwrap();
        assert!(row.contains('-'));
        let kv = metric_kv(0.4, &pck, &mpjpe);
        assert!(!kv.contains("pck.joint.hip_left"));
        assert!(kv.contains("mpjpe.joint.hip_left 2"));
    }

    #[test]
    fn kv_lines_are_single_key_single_value() {
        let (pck, mpjpe) = sample_results();
        for line in metric_kv(0.4, &pck, &mpjpe).lines() {
            assert_eq!(line.split_whitespace().count(), 2, "bad line: {line}");
        }
    }

    #[test]
    fn kv_reports_counts() {
        let (pck, mpjpe) = sample_results();
        let kv = metric_kv(0.4, &pck, &mpjpe);
        assert!(kv.contains("samples.measured 9"));
        assert!(kv.contains("samples.skipped 1"));
    }
}

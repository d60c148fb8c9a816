//! Text serialization of pose sequences.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::joints::JOINT_COUNT;
use crate::pose::{GroundTruthPose, PoseEstimate};

const FIELDS: usize = 1 + 3 * JOINT_COUNT;

fn parse_row(path: &Path, line_no: usize, line: &str) -> Result<(u64, [[f64; 2]; JOINT_COUNT], [f64; JOINT_COUNT])> {
    let err = |msg: String| Error::Parse {
        path: path.display().to_string(),
        line: line_no,
        msg,
    };
    let fields: Vec<&str> = line.split_whitespace().collect();
    if fields.len() != FIELDS {
        return Err(err(format!("expected {FIELDS} fields, found {}", fields.len())));
    }
    let t = fields[0]
        .parse::<u64>()
        .map_err(|_| err("invalid timestamp".into()))?;
    let mut joints = [[0.0; 2]; JOINT_COUNT];
    let mut c = [0.0; JOINT_COUNT];
    for j in 0..JOINT_COUNT {
        for (k, slot) in [(0, 0), (1, 1)] {
            joints[j][slot] = fields[1 + 3 * j + k]
                .parse::<f64>()
                .map_err(|_| err(format!("invalid coordinate for joint {j}")))?;
        }
        c[j] = fields[3 + 3 * j]
            .parse::<f64>()
            .map_err(|_| err(format!("invalid confidence for joint {j}")))?;
    }
    Ok((t, joints, c))
}

fn read_rows(path: impl AsRef<Path>) -> Result<Vec<(u64, [[f64; 2]; JOINT_COUNT], [f64; JOINT_COUNT])>> {
    let path = path.as_ref();
    let file = File::open(path)?;
    let mut rows = Vec::new();
    for (ix, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        rows.push(parse_row(path, ix + 1, t)?);
    }
    Ok(rows)
}

fn write_rows<'a>(
    path: impl AsRef<Path>,
    rows: impl Iterator<Item = (u64, &'a [[f64; 2]; JOINT_COUNT], [f64; JOINT_COUNT])>,
) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for (t, joints, c) in rows {
        write!(w, "{t}")?;
        for j in 0..JOINT_COUNT {
            write!(w, " {} {} {}", joints[j][0], joints[j][1], c[j])?;
        }
        writeln!(w)?;
    }
    w.flush()?;
    Ok(())
}

/// Read estimate rows; the third per-joint column is the confidence.
pub fn read_poses(path: impl AsRef<Path>) -> Result<Vec<PoseEstimate>> {
    Ok(read_rows(path)?
        .into_iter()
        .map(|(t, joints, confidence)| PoseEstimate { t, joints, confidence })
        .collect())
}

pub fn write_poses(path: impl AsRef<Path>, poses: &[PoseEstimate]) -> Result<()> {
    write_rows(path, poses.iter().map(|p| (p.t, &p.joints, p.confidence)))
}

/// Read ground-truth rows; a nonzero third column marks the joint visible.
pub fn read_ground_truth(path: impl AsRef<Path>) -> Result<Vec<GroundTruthPose>> {
    Ok(read_rows(path)?
        .into_iter()
        .map(|(t, joints, c)| GroundTruthPose {
            t,
            joints,
            visible: std::array::from_fn(|j| c[j] != 0.0),
        })
        .collect())
}

pub fn write_ground_truth(path: impl AsRef<Path>, poses: &[GroundTruthPose]) -> Result<()> {
    write_rows(
        path,
        poses.iter().map(|p| {
            let vis = std::array::from_fn(|j| if p.visible[j] { 1.0 } else { 0.0 });
            (p.t, &p.joints, vis)
        }),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn estimates_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("poses.txt");
        let mut joints = [[0.0; 2]; JOINT_COUNT];
        for (j, p) in joints.iter_mut().enumerate() {
            *p = [j as f64 * 1.5, 100.0 - j as f64 / 3.0];
        }
        let poses = vec![PoseEstimate {
            t: 123,
            joints,
            confidence: std::array::from_fn(|j| j as f64 / 13.0),
        }];
        write_poses(&path, &poses).unwrap();
        assert_eq!(read_poses(&path).unwrap(), poses);
    }

    #[test]
    fn ground_truth_round_trips_visibility() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("gt.txt");
        let mut gt = GroundTruthPose {
            t: 0,
            joints: [[1.0, 2.0]; JOINT_COUNT],
            visible: [true; JOINT_COUNT],
        };
        gt.visible[4] = false;
        gt.visible[12] = false;
        let poses = vec![gt];
        write_ground_truth(&path, &poses).unwrap();
        assert_eq!(read_ground_truth(&path).unwrap(), poses);
    }

    #[test]
    fn short_row_reports_field_count_and_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("poses.txt");
        std::fs::write(&path, "0 1 2 0.5\n").unwrap();
        match read_poses(&path).unwrap_err() {
            Error::Parse { line, msg, .. } => {
                assert_eq!(line, 1);
                assert!(msg.contains("40"), "message names the expected width: {msg}");
            }
            other => panic!("unexpected error {other:?}"),
        }
    }
}

//! Text serialization of detected segments.
//!
//! One segment per line: `block_ix x0 y0 x1 y1 score`. Floats are written in
//! Rust's shortest round-trip form, so replaying a file reproduces the exact
//! values.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::line::LineSegment;

/// Write segments as `block_ix x0 y0 x1 y1 score` lines.
pub fn write_segments(path: impl AsRef<Path>, segments: &[LineSegment]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for s in segments {
        writeln!(w, "{} {} {} {} {} {}", s.block, s.x0, s.y0, s.x1, s.y1, s.score)?;
    }
    w.flush()?;
    Ok(())
}

/// Read a segments file written by [`write_segments`].
pub fn read_segments(path: impl AsRef<Path>) -> Result<Vec<LineSegment>> {
    let path = path.as_ref();
    let file = File::open(path)?;
    let mut out = Vec::new();
    for (ix, line) in BufReader::new(file).lines().enumerate() {
        let line_no = ix + 1;
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let err = |msg: &str| Error::Parse {
            path: path.display().to_string(),
            line: line_no,
            msg: msg.to_string(),
        };
        let fields: Vec<&str> = trimmed.split_whitespace().collect();
        if fields.len() != 6 {
            return Err(err("expected 6 fields: block x0 y0 x1 y1 score"));
        }
        let block = fields[0].parse::<usize>().map_err(|_| err("invalid block index"))?;
        let mut f = [0.0f64; 5];
        for (slot, raw) in f.iter_mut().zip(&fields[1..]) {
            *slot = raw.parse::<f64>().map_err(|_| err("invalid float field"))?;
        }
        out.push(LineSegment {
            block,
            x0: f[0],
            y0: f[1],
            x1: f[2],
            y1: f[3],
            score: f[4],
        });
    }
    Ok(out)
}

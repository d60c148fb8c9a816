//! Text serialization of event streams.
//!
//! One event per line, whitespace-separated: `t x y p` with `t` in
//! microseconds and `p` in {0, 1}. Blank lines and lines starting with `#`
//! are ignored on read.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::event::Event;

fn parse_line(path: &Path, line_no: usize, line: &str) -> Result<Event> {
    let err = |msg: &str| Error::Parse {
        path: path.display().to_string(),
        line: line_no,
        msg: msg.to_string(),
    };
    let mut parts = line.split_whitespace();
    let t = parts
        .next()
        .ok_or_else(|| err("missing timestamp"))?
        .parse::<u64>()
        .map_err(|_| err("invalid timestamp"))?;
    let x = parts
        .next()
        .ok_or_else(|| err("missing x"))?
        .parse::<u16>()
        .map_err(|_| err("invalid x"))?;
    let y = parts
        .next()
        .ok_or_else(|| err("missing y"))?
        .parse::<u16>()
        .map_err(|_| err("invalid y"))?;
    let polarity = match parts.next() {
        Some("0") => false,
        Some("1") => true,
        Some(_) => return Err(err("polarity must be 0 or 1")),
        None => return Err(err("missing polarity")),
    };
    if parts.next().is_some() {
        return Err(err("trailing fields"));
    }
    Ok(Event { x, y, t, polarity })
}

/// Streaming reader over an event file, yielding events in file order.
pub struct EventFileReader {
    path: PathBuf,
    lines: std::io::Lines<BufReader<File>>,
    line_no: usize,
}

impl EventFileReader {
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let file = File::open(&path)?;
        Ok(Self {
            path,
            lines: BufReader::new(file).lines(),
            line_no: 0,
        })
    }

    /// 1-based line number of the most recently yielded event; 0 before the
    /// first. Lets callers report post-parse validation failures (bounds,
    /// ordering) against the offending line.
    pub fn line_number(&self) -> usize {
        self.line_no
    }
}

impl Iterator for EventFileReader {
    type Item = Result<Event>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            self.line_no += 1;
            match self.lines.next()? {
                Err(e) => return Some(Err(e.into())),
                Ok(line) => {
                    let trimmed = line.trim();
                    if trimmed.is_empty() || trimmed.starts_with('#') {
                        continue;
                    }
                    return Some(parse_line(&self.path, self.line_no, trimmed));
                }
            }
        }
    }
}

/// Read a whole event file into memory.
pub fn read_events(path: impl AsRef<Path>) -> Result<Vec<Event>> {
    EventFileReader::open(path)?.collect()
}

/// Write events as `t x y p` lines.
pub fn write_events(path: impl AsRef<Path>, events: &[Event]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for e in events {
        writeln!(w, "{} {} {} {}", e.t, e.x, e.y, u8::from(e.polarity))?;
    }
    w.flush()?;
    Ok(())
}

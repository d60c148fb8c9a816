//! Event ingestion and the per-block FIFO accumulation surface.
//!
//! The sensor plane is tiled by square blocks. Every block keeps a bounded
//! FIFO of the most recent events that fall in its *active* region (the block
//! itself) or its *inactive* region (a margin overlapping the neighbouring
//! blocks). Because each block holds a fixed number of the latest events, the
//! stored picture of an edge is independent of how fast it moves.
//!
//! One ingestion thread may push while detector threads snapshot blocks; each
//! block is protected by its own lock so the writer never waits on downstream
//! processing.

mod io;

pub use io::{read_events, write_events, EventFileReader};

use std::collections::VecDeque;
use std::sync::atomic::{AtomicI64, AtomicU64, Ordering};
use std::sync::Mutex;

use crate::error::{Error, Result};

/// A single camera event.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Event {
    /// Pixel column.
    pub x: u16,
    /// Pixel row.
    pub y: u16,
    /// Timestamp in microseconds, non-decreasing within a stream.
    pub t: u64,
    /// Polarity: `true` for intensity increase. Stored but not used by line
    /// fitting.
    pub polarity: bool,
}

impl Event {
    pub fn new(x: u16, y: u16, t: u64, polarity: bool) -> Self {
        Self { x, y, t, polarity }
    }
}

/// Geometry and capacity of the accumulation surface.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct SurfaceConfig {
    pub width: u32,
    pub height: u32,
    /// Side of a square block in pixels. Border blocks may be partial.
    pub block_size: u32,
    /// Maximum events stored per block (active and inactive together).
    pub fifo_capacity: usize,
    /// Extent in pixels of the inactive region around each block.
    pub inactive_margin: u32,
}

impl Default for SurfaceConfig {
    fn default() -> Self {
        Self {
            width: 640,
            height: 480,
            block_size: 20,
            fifo_capacity: 64,
            inactive_margin: 10,
        }
    }
}

/// Axis-aligned pixel rectangle, `x0 <= x < x1`, `y0 <= y < y1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PixelRect {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl PixelRect {
    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.x0 && x < self.x1 && y >= self.y0 && y < self.y1
    }

    pub fn width(&self) -> f64 {
        self.x1 - self.x0
    }

    pub fn height(&self) -> f64 {
        self.y1 - self.y0
    }
}

impl SurfaceConfig {
    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::InvalidConfig("surface resolution must be nonzero".into()));
        }
        if self.block_size == 0 {
            return Err(Error::InvalidConfig("block_size must be nonzero".into()));
        }
        if self.fifo_capacity == 0 {
            return Err(Error::InvalidConfig("fifo_capacity must be >= 1".into()));
        }
        Ok(())
    }

    /// Number of blocks along x and y. The grid tiles the sensor; the last
    /// row/column may be partial.
    pub fn grid_dims(&self) -> (usize, usize) {
        let bx = self.width.div_ceil(self.block_size) as usize;
        let by = self.height.div_ceil(self.block_size) as usize;
        (bx, by)
    }

    pub fn block_count(&self) -> usize {
        let (bx, by) = self.grid_dims();
        bx * by
    }

    /// Pseudo-coordinate normalization range: twice the block side, the
    /// farthest two endpoints of lines in adjacent blocks can sit apart.
    pub fn zeta_max(&self) -> f64 {
        2.0 * self.block_size as f64
    }

    /// Block index (row-major) of the block whose active region contains the
    /// pixel.
    pub fn block_of(&self, x: u16, y: u16) -> usize {
        let (bx, _) = self.grid_dims();
        let cx = (x as u32 / self.block_size) as usize;
        let cy = (y as u32 / self.block_size) as usize;
        cy * bx + cx
    }

    /// Active (core) rectangle of a block, clipped to the sensor.
    pub fn block_rect(&self, index: usize) -> PixelRect {
        let (bx, _) = self.grid_dims();
        let cx = (index % bx) as u32;
        let cy = (index / bx) as u32;
        PixelRect {
            x0: (cx * self.block_size) as f64,
            y0: (cy * self.block_size) as f64,
            x1: ((cx + 1) * self.block_size).min(self.width) as f64,
            y1: ((cy + 1) * self.block_size).min(self.height) as f64,
        }
    }

    /// Core rectangle expanded by the inactive margin (not clipped).
    pub fn expanded_rect(&self, index: usize) -> PixelRect {
        let core = self.block_rect(index);
        let m = self.inactive_margin as f64;
        PixelRect {
            x0: core.x0 - m,
            y0: core.y0 - m,
            x1: core.x1 + m,
            y1: core.y1 + m,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct StoredEvent {
    ev: Event,
    active: bool,
}

/// Grid of per-block FIFO buffers. One writer pushes events; any number of
/// readers snapshot blocks concurrently.
pub struct AccumulationSurface {
    config: SurfaceConfig,
    blocks: Vec<Mutex<VecDeque<StoredEvent>>>,
    /// Number of active entries across all blocks. Every event is active in
    /// exactly one block, so this counts distinct stored events.
    active_count: AtomicI64,
    last_t: AtomicU64,
    has_events: AtomicI64,
}

impl AccumulationSurface {
    pub fn new(config: SurfaceConfig) -> Result<Self> {
        config.validate()?;
        let blocks = (0..config.block_count())
            .map(|_| Mutex::new(VecDeque::new()))
            .collect();
        Ok(Self {
            config,
            blocks,
            active_count: AtomicI64::new(0),
            last_t: AtomicU64::new(0),
            has_events: AtomicI64::new(0),
        })
    }

    pub fn config(&self) -> &SurfaceConfig {
        &self.config
    }

    pub fn block_count(&self) -> usize {
        self.blocks.len()
    }

    /// Total events currently stored (each counted once, in its active block).
    pub fn event_count(&self) -> u64 {
        self.active_count.load(Ordering::Relaxed).max(0) as u64
    }

    /// Timestamp of the most recent accepted event, if any.
    pub fn last_timestamp(&self) -> Option<u64> {
        if self.has_events.load(Ordering::Relaxed) > 0 {
            Some(self.last_t.load(Ordering::Relaxed))
        } else {
            None
        }
    }

    /// Store one event: into the FIFO of its active block and into every
    /// neighbouring block whose inactive region covers it. Evicts the oldest
    /// entry of a full block.
    pub fn push(&self, ev: Event) -> Result<()> {
        let cfg = &self.config;
        if (ev.x as u32) >= cfg.width || (ev.y as u32) >= cfg.height {
            return Err(Error::OutOfBounds {
                x: ev.x as i64,
                y: ev.y as i64,
                width: cfg.width,
                height: cfg.height,
            });
        }
        let prev = self.last_t.load(Ordering::Relaxed);
        if self.has_events.load(Ordering::Relaxed) > 0 && ev.t < prev {
            return Err(Error::NonMonotonicTimestamp { prev, new: ev.t });
        }

        let active_ix = cfg.block_of(ev.x, ev.y);
        self.insert(active_ix, ev, true);

        // Neighbouring blocks whose expanded rectangle covers the pixel get an
        // inactive copy. The candidate range below over-approximates; the
        // exact rectangle test filters partial border blocks.
        let (gx, gy) = cfg.grid_dims();
        let bs = cfg.block_size as i64;
        let m = cfg.inactive_margin as i64;
        let cx_lo = (((ev.x as i64 - m).max(0)) / bs) as usize;
        let cx_hi = (((ev.x as i64 + m) / bs) as usize).min(gx - 1);
        let cy_lo = (((ev.y as i64 - m).max(0)) / bs) as usize;
        let cy_hi = (((ev.y as i64 + m) / bs) as usize).min(gy - 1);
        for cy in cy_lo..=cy_hi {
            for cx in cx_lo..=cx_hi {
                let ix = cy * gx + cx;
                if ix == active_ix {
                    continue;
                }
                if cfg.expanded_rect(ix).contains(ev.x as f64, ev.y as f64) {
                    self.insert(ix, ev, false);
                }
            }
        }

        self.last_t.store(ev.t, Ordering::Relaxed);
        self.has_events.store(1, Ordering::Relaxed);
        Ok(())
    }

    fn insert(&self, block: usize, ev: Event, active: bool) {
        let mut buf = self.blocks[block].lock().unwrap();
        if buf.len() == self.config.fifo_capacity {
            if let Some(old) = buf.pop_front() {
                if old.active {
                    self.active_count.fetch_sub(1, Ordering::Relaxed);
                }
            }
        }
        buf.push_back(StoredEvent { ev, active });
        if active {
            self.active_count.fetch_add(1, Ordering::Relaxed);
        }
    }

    /// Consistent copy of one block's buffer (active and inactive entries, in
    /// FIFO order).
    pub fn snapshot_block(&self, index: usize) -> Result<Vec<Event>> {
        Ok(self
            .snapshot_block_flagged(index)?
            .into_iter()
            .map(|(ev, _)| ev)
            .collect())
    }

    /// Like [`snapshot_block`](Self::snapshot_block) but keeps each entry's
    /// active flag.
    pub fn snapshot_block_flagged(&self, index: usize) -> Result<Vec<(Event, bool)>> {
        let buf = self
            .blocks
            .get(index)
            .ok_or(Error::InvalidBlockIndex {
                index,
                count: self.blocks.len(),
            })?
            .lock()
            .unwrap();
        Ok(buf.iter().map(|s| (s.ev, s.active)).collect())
    }

    /// Per-pixel count of stored active events.
    pub fn active_histogram(&self) -> Vec<u32> {
        let w = self.config.width as usize;
        let h = self.config.height as usize;
        let mut counts = vec![0u32; w * h];
        for block in &self.blocks {
            let buf = block.lock().unwrap();
            for s in buf.iter() {
                if s.active {
                    counts[s.ev.y as usize * w + s.ev.x as usize] += 1;
                }
            }
        }
        counts
    }

    /// Grayscale rendering: pixel intensity proportional to the count of
    /// stored active events at that pixel, normalized to [0, 255].
    pub fn render(&self) -> image::GrayImage {
        let w = self.config.width;
        let h = self.config.height;
        let counts = self.active_histogram();
        let max = counts.iter().copied().max().unwrap_or(0);
        let mut img = image::GrayImage::new(w, h);
        if max > 0 {
            for (i, &c) in counts.iter().enumerate() {
                let v = ((c as f64 * 255.0 / max as f64).round()) as u8;
                img.put_pixel((i % w as usize) as u32, (i / w as usize) as u32, image::Luma([v]));
            }
        }
        img
    }
}

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use super::perimeter;
use crate::error::{Error, Result};

/// A horizontal run of foreground pixels: `len` pixels starting at `(start, row)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Run {
    pub row: u32,
    pub start: u32,
    pub len: u32,
}

impl Run {
    pub fn new(row: u32, start: u32, len: u32) -> Self {
        Run { row, start, len }
    }

    /// One past the last column covered by the run.
    #[inline]
    pub fn end(&self) -> u32 {
        self.start + self.len
    }
}

/// Tight bounding box, inclusive on both ends.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BBox {
    pub min_col: u32,
    pub min_row: u32,
    pub max_col: u32,
    pub max_row: u32,
}

impl BBox {
    pub fn width(&self) -> u32 {
        self.max_col - self.min_col + 1
    }

    pub fn height(&self) -> u32 {
        self.max_row - self.min_row + 1
    }

    pub fn intersects(&self, other: &BBox) -> bool {
        self.min_col <= other.max_col
            && other.min_col <= self.max_col
            && self.min_row <= other.max_row
            && other.min_row <= self.max_row
    }
}

/// One segmented instance stored as sorted, merged row runs.
///
/// Runs are sorted by `(row, start)`; runs in the same row never touch or
/// overlap. Area and bounding box are computed at construction, the
/// perimeter on first use.
#[derive(Debug, Clone)]
pub struct Mask {
    width: u32,
    height: u32,
    runs: Vec<Run>,
    area: u64,
    bbox: BBox,
    perimeter: OnceLock<f64>,
}

impl PartialEq for Mask {
    fn eq(&self, other: &Self) -> bool {
        self.width == other.width && self.height == other.height && self.runs == other.runs
    }
}

impl Eq for Mask {}

impl Mask {
    /// Builds a mask from arbitrary runs. Runs are sorted and merged; zero
    /// length runs are ignored. Fails when a run leaves the image or when no
    /// pixel remains.
    pub fn from_runs(width: u32, height: u32, runs: impl IntoIterator<Item = Run>) -> Result<Mask> {
        let mut runs: Vec<Run> = runs.into_iter().filter(|r| r.len > 0).collect();
        for r in &runs {
            if r.row >= height || r.start as u64 + r.len as u64 > width as u64 {
                return Err(Error::invalid(format!(
                    "run (row {}, start {}, len {}) outside {}x{} image",
                    r.row, r.start, r.len, width, height
                )));
            }
        }
        runs.sort_unstable();
        let mut merged: Vec<Run> = Vec::with_capacity(runs.len());
        for r in runs {
            match merged.last_mut() {
                Some(last) if last.row == r.row && r.start <= last.end() => {
                    let end = last.end().max(r.end());
                    last.len = end - last.start;
                }
                _ => merged.push(r),
            }
        }
        Self::from_normalized(width, height, merged)
    }

    /// Builds a mask from runs already sorted and merged (as produced by scans).
    pub(crate) fn from_normalized(width: u32, height: u32, runs: Vec<Run>) -> Result<Mask> {
        if runs.is_empty() {
            return Err(Error::invalid("mask has no foreground pixels"));
        }
        debug_assert!(runs.windows(2).all(|w| w[0].row < w[1].row
            || (w[0].row == w[1].row && w[0].end() < w[1].start)));
        let mut area = 0u64;
        let mut bbox = BBox {
            min_col: u32::MAX,
            min_row: runs[0].row,
            max_col: 0,
            max_row: runs[runs.len() - 1].row,
        };
        for r in &runs {
            area += r.len as u64;
            bbox.min_col = bbox.min_col.min(r.start);
            bbox.max_col = bbox.max_col.max(r.end() - 1);
        }
        Ok(Mask {
            width,
            height,
            runs,
            area,
            bbox,
            perimeter: OnceLock::new(),
        })
    }

    /// Builds a mask from a row-major boolean bitmap.
    pub fn from_bitmap(width: u32, height: u32, bits: &[bool]) -> Result<Mask> {
        if bits.len() != width as usize * height as usize {
            return Err(Error::invalid(format!(
                "bitmap length {} does not match {}x{}",
                bits.len(),
                width,
                height
            )));
        }
        let mut runs = Vec::new();
        for (row, line) in bits.chunks(width.max(1) as usize).enumerate() {
            push_row_runs(&mut runs, row as u32, line.iter().copied());
        }
        Self::from_normalized(width, height, runs)
    }

    /// Builds a mask from a list of `(col, row)` pixel coordinates.
    pub fn from_pixels(width: u32, height: u32, pixels: impl IntoIterator<Item = (u32, u32)>) -> Result<Mask> {
        Self::from_runs(width, height, pixels.into_iter().map(|(c, r)| Run::new(r, c, 1)))
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn runs(&self) -> &[Run] {
        &self.runs
    }

    pub fn area(&self) -> u64 {
        self.area
    }

    pub fn bbox(&self) -> BBox {
        self.bbox
    }

    /// Chain-code perimeter in pixels; see [`perimeter::chain_code_perimeter`].
    pub fn perimeter(&self) -> f64 {
        *self
            .perimeter
            .get_or_init(|| perimeter::chain_code_perimeter(self))
    }

    /// Iterates `(col, row)` of every foreground pixel in scan order.
    pub fn pixels(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        self.runs
            .iter()
            .flat_map(|r| (r.start..r.end()).map(move |c| (c, r.row)))
    }

    pub fn contains(&self, col: u32, row: u32) -> bool {
        let i = self.runs.partition_point(|r| (r.row, r.start) <= (row, col));
        i > 0 && {
            let r = self.runs[i - 1];
            r.row == row && col < r.end()
        }
    }

    pub fn to_bitmap(&self) -> Vec<bool> {
        let mut bits = vec![false; self.width as usize * self.height as usize];
        for r in &self.runs {
            let base = r.row as usize * self.width as usize;
            bits[base + r.start as usize..base + r.end() as usize].fill(true);
        }
        bits
    }

    /// Exact number of pixels shared with `other`.
    pub fn intersection_area(&self, other: &Mask) -> u64 {
        if !self.bbox.intersects(&other.bbox) {
            return 0;
        }
        let (a, b) = (&self.runs, &other.runs);
        let (mut i, mut j) = (0, 0);
        let mut total = 0u64;
        while i < a.len() && j < b.len() {
            let (ra, rb) = (a[i], b[j]);
            if ra.row != rb.row {
                if ra.row < rb.row {
                    i += 1;
                } else {
                    j += 1;
                }
                continue;
            }
            let lo = ra.start.max(rb.start);
            let hi = ra.end().min(rb.end());
            if hi > lo {
                total += (hi - lo) as u64;
            }
            if ra.end() <= rb.end() {
                i += 1;
            } else {
                j += 1;
            }
        }
        total
    }

    /// Intersection and union pixel counts.
    pub fn overlap_counts(&self, other: &Mask) -> Result<(u64, u64)> {
        self.check_dims(other)?;
        let inter = self.intersection_area(other);
        Ok((inter, self.area + other.area - inter))
    }

    /// Intersection over union, computed from exact integer counts.
    pub fn iou(&self, other: &Mask) -> Result<f64> {
        let (inter, union) = self.overlap_counts(other)?;
        Ok(inter as f64 / union as f64)
    }

    fn check_dims(&self, other: &Mask) -> Result<()> {
        if self.width != other.width || self.height != other.height {
            return Err(Error::invalid(format!(
                "mask dimensions differ: {}x{} vs {}x{}",
                self.width, self.height, other.width, other.height
            )));
        }
        Ok(())
    }

    /// Shifts every pixel by `(dx, dy)`; fails when the result leaves the image.
    pub fn translate(&self, dx: i64, dy: i64) -> Result<Mask> {
        let runs = self
            .runs
            .iter()
            .map(|r| {
                let row = r.row as i64 + dy;
                let start = r.start as i64 + dx;
                if row < 0 || start < 0 || row >= self.height as i64 || start + r.len as i64 > self.width as i64 {
                    Err(Error::invalid("translated mask leaves the image"))
                } else {
                    Ok(Run::new(row as u32, start as u32, r.len))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_normalized(self.width, self.height, runs)
    }

    /// Nearest-neighbour upscale by an integer factor into a `k`-times larger image.
    pub fn upscale(&self, k: u32) -> Result<Mask> {
        if k == 0 {
            return Err(Error::invalid("upscale factor must be positive"));
        }
        let mut runs = Vec::with_capacity(self.runs.len() * k as usize);
        for r in &self.runs {
            for dy in 0..k {
                runs.push(Run::new(r.row * k + dy, r.start * k, r.len * k));
            }
        }
        Self::from_normalized(self.width * k, self.height * k, runs)
    }
}

/// Appends the foreground runs of one row given as a boolean iterator.
pub(crate) fn push_row_runs(runs: &mut Vec<Run>, row: u32, line: impl Iterator<Item = bool>) {
    let mut start: Option<u32> = None;
    let mut col = 0u32;
    for on in line {
        match (on, start) {
            (true, None) => start = Some(col),
            (false, Some(s)) => {
                runs.push(Run::new(row, s, col - s));
                start = None;
            }
            _ => {}
        }
        col += 1;
    }
    if let Some(s) = start {
        runs.push(Run::new(row, s, col - s));
    }
}

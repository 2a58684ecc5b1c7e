//! Chain-code perimeter estimation.
//!
//! Every boundary loop of a mask (the outer contour of each 8-connected
//! component plus the contour around each 4-connected hole) is followed with
//! Moore-neighbour tracing through pixel centres. Axis steps count 1 and
//! diagonal steps count sqrt(2). An isolated pixel has no steps and is given
//! the perimeter of a unit square, 4.

use std::f64::consts::SQRT_2;

use super::components::{group_runs, Connectivity};
use super::rle::{Mask, Run};

// Clockwise in image coordinates (y grows downward), starting east.
const DIRS: [(i32, i32); 8] = [
    (1, 0),
    (1, 1),
    (0, 1),
    (-1, 1),
    (-1, 0),
    (-1, -1),
    (0, -1),
    (1, -1),
];
const EAST: usize = 0;
const WEST: usize = 4;

const ISOLATED_PIXEL_PERIMETER: f64 = 4.0;

/// Mask bitmap over its bounding box with a one pixel empty border.
struct Patch {
    width: i32,
    height: i32,
    origin: (i64, i64),
    bits: Vec<bool>,
}

impl Patch {
    fn new(mask: &Mask) -> Self {
        let bb = mask.bbox();
        let width = bb.width() as i32 + 2;
        let height = bb.height() as i32 + 2;
        let origin = (bb.min_col as i64 - 1, bb.min_row as i64 - 1);
        let mut bits = vec![false; (width * height) as usize];
        for r in mask.runs() {
            let y = (r.row as i64 - origin.1) as i32;
            let x0 = (r.start as i64 - origin.0) as i32;
            let base = (y * width + x0) as usize;
            bits[base..base + r.len as usize].fill(true);
        }
        Patch {
            width,
            height,
            origin,
            bits,
        }
    }

    #[inline]
    fn at(&self, x: i32, y: i32) -> bool {
        x >= 0 && y >= 0 && x < self.width && y < self.height && self.bits[(y * self.width + x) as usize]
    }

    fn local(&self, col: u32, row: u32) -> (i32, i32) {
        ((col as i64 - self.origin.0) as i32, (row as i64 - self.origin.1) as i32)
    }

    /// Background runs of the patch in local coordinates.
    fn background_runs(&self) -> Vec<Run> {
        let mut runs = Vec::new();
        for y in 0..self.height {
            let line = (0..self.width).map(|x| !self.at(x, y));
            super::rle::push_row_runs(&mut runs, y as u32, line);
        }
        runs
    }
}

/// Length of the Moore contour starting at foreground pixel `start` whose
/// backtrack neighbour (a background pixel) lies in direction `back`.
fn trace(patch: &Patch, start: (i32, i32), back: usize) -> f64 {
    let mut p = start;
    let mut back = back;
    let mut first: Option<(i32, i32)> = None;
    let mut length = 0.0;
    // a contour visits each pixel at most four times
    let limit = 4 * patch.bits.len() + 8;
    for _ in 0..limit {
        let mut next = None;
        for k in 1..=8 {
            let d = (back + k) % 8;
            let q = (p.0 + DIRS[d].0, p.1 + DIRS[d].1);
            if patch.at(q.0, q.1) {
                next = Some((d, q));
                break;
            }
        }
        let Some((d, q)) = next else {
            return 0.0;
        };
        if p == start && first == Some(q) {
            return length;
        }
        if first.is_none() {
            first = Some(q);
        }
        length += if d % 2 == 0 { 1.0 } else { SQRT_2 };
        // the neighbour checked just before `q` is background and adjacent to `q`
        let prev = (back + (d + 8 - back) % 8 + 7) % 8;
        let b = (p.0 + DIRS[prev].0, p.1 + DIRS[prev].1);
        let rel = (b.0 - q.0, b.1 - q.1);
        back = DIRS.iter().position(|&v| v == rel).expect("backtrack is a neighbour");
        p = q;
    }
    debug_assert!(false, "contour tracing did not close");
    length
}

pub fn chain_code_perimeter(mask: &Mask) -> f64 {
    let patch = Patch::new(mask);
    let mut total = 0.0;

    for component in group_runs(mask.runs(), Connectivity::Eight) {
        let first = component[0];
        let start = patch.local(first.start, first.row);
        let len = trace(&patch, start, WEST);
        total += if len == 0.0 { ISOLATED_PIXEL_PERIMETER } else { len };
    }

    // Background touching the patch border is outside; every other
    // 4-connected background component is a hole.
    let bg = patch.background_runs();
    let (w, h) = (patch.width as u32, patch.height as u32);
    for region in group_runs(&bg, Connectivity::Four) {
        let touches_border = region
            .iter()
            .any(|r| r.row == 0 || r.row == h - 1 || r.start == 0 || r.end() == w);
        if touches_border {
            continue;
        }
        let first = region[0];
        // the pixel left of a hole's first pixel is foreground
        let start = (first.start as i32 - 1, first.row as i32);
        total += trace(&patch, start, EAST);
    }
    total
}

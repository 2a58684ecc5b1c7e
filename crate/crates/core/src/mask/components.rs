//! Scanline connected-component labelling over row runs.
//!
//! Runs of consecutive rows are joined with a union-find when their column
//! ranges touch (4-connectivity) or touch diagonally (8-connectivity).

use super::grid::ImageGrid;
use super::rle::{push_row_runs, Mask, Run};
use super::set::MaskSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Connectivity {
    Four,
    Eight,
}

impl Connectivity {
    pub fn from_neighbours(n: u8) -> Option<Self> {
        match n {
            4 => Some(Connectivity::Four),
            8 => Some(Connectivity::Eight),
            _ => None,
        }
    }
}

struct DisjointSet {
    parent: Vec<usize>,
}

impl DisjointSet {
    fn new(n: usize) -> Self {
        DisjointSet {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    // The smaller index stays root so roots are the earliest run in scan order.
    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent[hi] = lo;
        }
    }
}

/// Groups sorted, merged runs into connected components.
///
/// Components are returned in scan order of their first pixel; runs inside a
/// component keep their sorted order.
pub fn group_runs(runs: &[Run], connectivity: Connectivity) -> Vec<Vec<Run>> {
    if runs.is_empty() {
        return Vec::new();
    }
    let reach = match connectivity {
        Connectivity::Four => 0u32,
        Connectivity::Eight => 1u32,
    };
    let mut sets = DisjointSet::new(runs.len());

    // [start, end) index ranges of each row's runs
    let mut prev: (usize, usize) = (0, 0);
    let mut prev_row: Option<u32> = None;
    let mut i = 0;
    while i < runs.len() {
        let row = runs[i].row;
        let mut j = i;
        while j < runs.len() && runs[j].row == row {
            j += 1;
        }
        if prev_row == Some(row.wrapping_sub(1)) && row > 0 {
            let mut k = prev.0;
            for cur in i..j {
                let c = runs[cur];
                let lo = c.start.saturating_sub(reach);
                let hi = c.end() + reach;
                while k < prev.1 && runs[k].end() <= lo {
                    k += 1;
                }
                let mut m = k;
                while m < prev.1 && runs[m].start < hi {
                    sets.union(cur, m);
                    m += 1;
                }
            }
        }
        prev = (i, j);
        prev_row = Some(row);
        i = j;
    }

    let mut order: Vec<usize> = Vec::new();
    let mut slot = vec![usize::MAX; runs.len()];
    let mut groups: Vec<Vec<Run>> = Vec::new();
    for (idx, run) in runs.iter().enumerate() {
        let root = sets.find(idx);
        if slot[root] == usize::MAX {
            slot[root] = groups.len();
            order.push(root);
            groups.push(Vec::new());
        }
        groups[slot[root]].push(*run);
    }
    groups
}

/// Labels the non-zero pixels of `grid` into one mask per connected component.
pub fn connected_components(grid: &ImageGrid, connectivity: Connectivity) -> MaskSet {
    let (w, h) = (grid.width(), grid.height());
    let mut runs = Vec::new();
    for row in 0..h {
        push_row_runs(&mut runs, row, grid.row(row).iter().map(|&v| v != 0));
    }
    let masks = group_runs(&runs, connectivity)
        .into_iter()
        .map(|g| Mask::from_normalized(w, h, g).expect("component is non-empty"))
        .collect();
    MaskSet::new(w, h, masks).expect("components fit the grid")
}

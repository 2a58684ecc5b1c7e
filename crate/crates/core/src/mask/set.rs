use serde::{Deserialize, Serialize};

use super::rle::Mask;
use crate::error::{Error, Result};

/// Which segmenter produced a mask set, for which genome.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub segmenter: String,
    pub genome_hash: String,
}

/// All masks returned by one segmenter call on one image. Masks may overlap.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskSet {
    width: u32,
    height: u32,
    masks: Vec<Mask>,
    provenance: Option<Provenance>,
}

impl MaskSet {
    pub fn new(width: u32, height: u32, masks: Vec<Mask>) -> Result<Self> {
        for (i, m) in masks.iter().enumerate() {
            if m.width() != width || m.height() != height {
                return Err(Error::invalid(format!(
                    "mask {i} is {}x{}, set is {width}x{height}",
                    m.width(),
                    m.height()
                )));
            }
        }
        Ok(MaskSet {
            width,
            height,
            masks,
            provenance: None,
        })
    }

    pub fn empty(width: u32, height: u32) -> Self {
        MaskSet {
            width,
            height,
            masks: Vec::new(),
            provenance: None,
        }
    }

    pub fn with_provenance(mut self, provenance: Provenance) -> Self {
        self.provenance = Some(provenance);
        self
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn masks(&self) -> &[Mask] {
        &self.masks
    }

    pub fn into_masks(self) -> Vec<Mask> {
        self.masks
    }

    pub fn provenance(&self) -> Option<&Provenance> {
        self.provenance.as_ref()
    }

    pub fn len(&self) -> usize {
        self.masks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.masks.is_empty()
    }

    pub fn areas(&self) -> Vec<u64> {
        self.masks.iter().map(Mask::area).collect()
    }

    pub fn pairwise_iou(&self) -> PairwiseIou {
        PairwiseIou::compute(&self.masks)
    }
}

/// Strict upper triangle of the IoU matrix, packed row by row.
#[derive(Debug, Clone, PartialEq)]
pub struct PairwiseIou {
    n: usize,
    values: Vec<f64>,
}

impl PairwiseIou {
    pub fn compute(masks: &[Mask]) -> Self {
        let n = masks.len();
        let mut values = Vec::with_capacity(n * n.saturating_sub(1) / 2);
        for i in 0..n {
            for j in i + 1..n {
                let inter = masks[i].intersection_area(&masks[j]);
                let union = masks[i].area() + masks[j].area() - inter;
                values.push(inter as f64 / union as f64);
            }
        }
        PairwiseIou { n, values }
    }

    /// Number of masks the matrix was built from.
    pub fn size(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// IoU of masks `i < j`.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        assert!(i < j && j < self.n, "pair ({i}, {j}) outside upper triangle of {}", self.n);
        // rows 0..i hold (n-1) + (n-2) + ... + (n-i) entries
        let offset = i * (2 * self.n - i - 1) / 2;
        self.values[offset + (j - i - 1)]
    }

    /// Iterates `(i, j, iou)` over all unordered pairs.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        let n = self.n;
        (0..n)
            .flat_map(move |i| (i + 1..n).map(move |j| (i, j)))
            .zip(self.values.iter().copied())
            .map(|((i, j), v)| (i, j, v))
    }
}

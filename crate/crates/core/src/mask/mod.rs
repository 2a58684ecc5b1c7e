//! Raster masks and the geometry every reward consumes.

mod components;
mod grid;
pub mod io;
mod perimeter;
mod rle;
mod set;

pub use components::{connected_components, group_runs, Connectivity};
pub use grid::ImageGrid;
pub use perimeter::chain_code_perimeter;
pub use rle::{BBox, Mask, Run};
pub use set::{MaskSet, PairwiseIou, Provenance};

use crate::error::Result;

/// Intersection over union of two masks on the same image.
pub fn iou(a: &Mask, b: &Mask) -> Result<f64> {
    a.iou(b)
}

/// Perimeter of a mask; see [`chain_code_perimeter`].
pub fn perimeter(m: &Mask) -> f64 {
    m.perimeter()
}

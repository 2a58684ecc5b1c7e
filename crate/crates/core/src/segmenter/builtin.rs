//! Deterministic reference segmenter driven by the same named knobs as an
//! automatic mask generator.
//!
//! The knob mappings are deliberately simple:
//!
//! - seeds sit on a `points_per_side` square grid per crop;
//! - a seed's value is the median of its 3 x 3 neighbourhood, rounded to a
//!   multiple of [`SEED_QUANTUM`];
//! - its region is the 4-connected set of pixels within tolerance
//!   `T = round((1 - pred_iou_thresh) * 65535 * 2)` of that value;
//! - stability is `|R(T - d)| / |R(T + d)|` with
//!   `d = stability_score_offset * STABILITY_STEP`;
//! - regions touching all four borders of their crop are background;
//! - proposals are deduplicated by greedy NMS (stability descending, then
//!   area ascending) at `box_nms_thresh`, across crops at `crop_nms_thresh`
//!   (smaller crops first);
//! - finally masks below `stability_score_thresh` or `min_mask_region_area`
//!   are dropped.

use std::collections::{BTreeMap, HashMap};

use crate::error::{Error, Result};
use crate::mask::{ImageGrid, Mask, Run};
use crate::space::ParamValue;

/// Seed values are rounded to a multiple of this.
pub const SEED_QUANTUM: u32 = 256;
/// Tolerance step per unit of `stability_score_offset`.
pub const STABILITY_STEP: f64 = 512.0;

/// Parameter names the builtin segmenter accepts.
pub const PARAM_NAMES: [&str; 13] = [
    "min_mask_region_area",
    "pred_iou_thresh",
    "stability_score_thresh",
    "stability_score_offset",
    "box_nms_thresh",
    "crop_nms_thresh",
    "points_per_batch",
    "output_mode",
    "points_per_side",
    "crop_n_layers",
    "crop_overlap_ratio",
    "crop_n_points_downscale_factor",
    "point_grids",
];

#[derive(Debug, Clone, PartialEq)]
pub struct BuiltinParams {
    pub min_mask_region_area: u64,
    pub pred_iou_thresh: f64,
    pub stability_score_thresh: f64,
    pub stability_score_offset: f64,
    pub box_nms_thresh: f64,
    pub crop_nms_thresh: f64,
    pub points_per_side: u32,
    pub crop_n_layers: u32,
    pub crop_overlap_ratio: f64,
    pub crop_n_points_downscale_factor: u32,
}

impl Default for BuiltinParams {
    /// Mid-span values of the default space, with no area gate.
    fn default() -> Self {
        BuiltinParams {
            min_mask_region_area: 0,
            pred_iou_thresh: 0.92,
            stability_score_thresh: 0.945,
            stability_score_offset: 1.0,
            box_nms_thresh: 0.45,
            crop_nms_thresh: 0.45,
            points_per_side: 36,
            crop_n_layers: 1,
            crop_overlap_ratio: 0.4,
            crop_n_points_downscale_factor: 3,
        }
    }
}

impl BuiltinParams {
    /// Reads named values. Unknown names are rejected; missing names keep
    /// their default.
    pub fn from_map(params: &BTreeMap<String, ParamValue>) -> Result<Self> {
        let mut p = BuiltinParams::default();
        for (name, value) in params {
            let num = || {
                value
                    .as_f64()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| Error::invalid(format!("parameter {name} must be numeric, got {value}")))
            };
            let count = |lo: f64| -> Result<f64> {
                let v = num()?;
                if v.fract() != 0.0 || v < lo {
                    return Err(Error::invalid(format!("parameter {name} must be an integer >= {lo}, got {v}")));
                }
                Ok(v)
            };
            let unit = || -> Result<f64> {
                let v = num()?;
                if !(0.0..=1.0).contains(&v) {
                    return Err(Error::invalid(format!("parameter {name} must lie in [0, 1], got {v}")));
                }
                Ok(v)
            };
            match name.as_str() {
                "min_mask_region_area" => p.min_mask_region_area = count(0.0)? as u64,
                "pred_iou_thresh" => p.pred_iou_thresh = unit()?,
                "stability_score_thresh" => p.stability_score_thresh = unit()?,
                "stability_score_offset" => {
                    p.stability_score_offset = num()?;
                    if p.stability_score_offset < 0.0 {
                        return Err(Error::invalid("stability_score_offset must be non-negative"));
                    }
                }
                "box_nms_thresh" => p.box_nms_thresh = unit()?,
                "crop_nms_thresh" => p.crop_nms_thresh = unit()?,
                "points_per_side" => p.points_per_side = count(1.0)? as u32,
                "crop_n_layers" => p.crop_n_layers = count(0.0)? as u32,
                "crop_overlap_ratio" => p.crop_overlap_ratio = unit()?,
                "crop_n_points_downscale_factor" => p.crop_n_points_downscale_factor = count(1.0)? as u32,
                "points_per_batch" => {
                    count(1.0)?;
                }
                "output_mode" => {}
                "point_grids" => {
                    if !matches!(value, ParamValue::Text(s) if s == "none") {
                        return Err(Error::invalid("custom point_grids are not supported"));
                    }
                }
                other => return Err(Error::invalid(format!("unknown parameter `{other}`"))),
            }
        }
        if p.crop_n_layers > 4 {
            return Err(Error::invalid(format!("crop_n_layers {} exceeds 4", p.crop_n_layers)));
        }
        Ok(p)
    }

    pub fn tolerance(&self) -> u32 {
        ((1.0 - self.pred_iou_thresh) * 65535.0 * 2.0).round() as u32
    }

    pub fn stability_delta(&self) -> u32 {
        (self.stability_score_offset * STABILITY_STEP).round() as u32
    }
}

/// Half-open pixel box `[x0, x1) x [y0, y1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CropBox {
    pub x0: u32,
    pub y0: u32,
    pub x1: u32,
    pub y1: u32,
    pub layer: u32,
}

impl CropBox {
    fn area(&self) -> u64 {
        (self.x1 - self.x0) as u64 * (self.y1 - self.y0) as u64
    }
}

/// Full image, then `2^i x 2^i` overlapping crops for layers `i = 1..=n`.
pub fn crop_boxes(width: u32, height: u32, layers: u32, overlap_ratio: f64) -> Vec<CropBox> {
    let mut boxes = vec![CropBox {
        x0: 0,
        y0: 0,
        x1: width,
        y1: height,
        layer: 0,
    }];
    let short = width.min(height) as f64;
    for layer in 1..=layers {
        let per_side = 1u32 << layer;
        let overlap = (overlap_ratio * short * 2.0 / per_side as f64) as u32;
        let len = |orig: u32| (overlap as f64 * (per_side - 1) as f64 + orig as f64) / per_side as f64;
        let (cw, ch) = (len(width).ceil() as u32, len(height).ceil() as u32);
        for j in 0..per_side {
            for i in 0..per_side {
                let x0 = (cw.saturating_sub(overlap)) * i;
                let y0 = (ch.saturating_sub(overlap)) * j;
                if x0 >= width || y0 >= height {
                    continue;
                }
                boxes.push(CropBox {
                    x0,
                    y0,
                    x1: (x0 + cw).min(width),
                    y1: (y0 + ch).min(height),
                    layer,
                });
            }
        }
    }
    boxes
}

/// `n x n` seed pixels at the cell centres of a crop.
fn seed_grid(b: &CropBox, n: u32) -> Vec<(u32, u32)> {
    let (w, h) = ((b.x1 - b.x0) as f64, (b.y1 - b.y0) as f64);
    let mut seeds = Vec::with_capacity((n * n) as usize);
    for j in 0..n {
        for i in 0..n {
            let fx = (i as f64 + 0.5) / n as f64;
            let fy = (j as f64 + 0.5) / n as f64;
            let x = b.x0 + ((fx * w) as u32).min(b.x1 - b.x0 - 1);
            let y = b.y0 + ((fy * h) as u32).min(b.y1 - b.y0 - 1);
            seeds.push((x, y));
        }
    }
    seeds
}

#[derive(Debug, Clone)]
pub struct Proposal {
    pub mask: Mask,
    pub stability: f64,
    crop_area: u64,
}

impl Proposal {
    pub fn new(mask: Mask, stability: f64) -> Self {
        Proposal { mask, stability, crop_area: 0 }
    }
}

/// Regions found so far, keyed by `(seed value, tolerance)`.
struct RegionCache<'a> {
    image: &'a ImageGrid,
    crop: CropBox,
    regions: HashMap<(u32, u32), Vec<Mask>>,
    stamp: Vec<u32>,
    epoch: u32,
    stack: Vec<(u32, u32)>,
}

impl<'a> RegionCache<'a> {
    fn new(image: &'a ImageGrid, crop: CropBox) -> Self {
        RegionCache {
            image,
            crop,
            regions: HashMap::new(),
            stamp: vec![0; crop.area() as usize],
            epoch: 0,
            stack: Vec::new(),
        }
    }

    /// Index of the region containing `p`, or `None` when `p` itself is out of tolerance.
    fn region(&mut self, p: (u32, u32), value: u32, tol: u32) -> Option<(u32, u32, usize)> {
        let px = self.image.get(p.0, p.1) as u32;
        if px.abs_diff(value) > tol {
            return None;
        }
        let key = (value, tol);
        if let Some(list) = self.regions.get(&key) {
            if let Some(i) = list.iter().position(|m| m.contains(p.0, p.1)) {
                return Some((value, tol, i));
            }
        }
        let mask = self.flood(p, value, tol);
        let list = self.regions.entry(key).or_default();
        list.push(mask);
        Some((value, tol, list.len() - 1))
    }

    fn get(&self, id: (u32, u32, usize)) -> &Mask {
        &self.regions[&(id.0, id.1)][id.2]
    }

    fn flood(&mut self, p: (u32, u32), value: u32, tol: u32) -> Mask {
        let c = self.crop;
        let cw = c.x1 - c.x0;
        self.epoch += 1;
        let epoch = self.epoch;
        let lo = value.saturating_sub(tol);
        let hi = value + tol;
        let inside = |img: &ImageGrid, x: u32, y: u32| {
            let v = img.get(x, y) as u32;
            v >= lo && v <= hi
        };
        let mut pixels: Vec<u64> = Vec::new();
        self.stack.clear();
        self.stack.push(p);
        self.stamp[((p.1 - c.y0) * cw + (p.0 - c.x0)) as usize] = epoch;
        while let Some((x, y)) = self.stack.pop() {
            pixels.push(((y as u64) << 32) | x as u64);
            let mut visit = |nx: u32, ny: u32, stack: &mut Vec<(u32, u32)>| {
                let i = ((ny - c.y0) * cw + (nx - c.x0)) as usize;
                if self.stamp[i] != epoch && inside(self.image, nx, ny) {
                    self.stamp[i] = epoch;
                    stack.push((nx, ny));
                }
            };
            let mut stack = std::mem::take(&mut self.stack);
            if x > c.x0 {
                visit(x - 1, y, &mut stack);
            }
            if x + 1 < c.x1 {
                visit(x + 1, y, &mut stack);
            }
            if y > c.y0 {
                visit(x, y - 1, &mut stack);
            }
            if y + 1 < c.y1 {
                visit(x, y + 1, &mut stack);
            }
            self.stack = stack;
        }
        pixels.sort_unstable();
        let mut runs: Vec<Run> = Vec::new();
        for key in pixels {
            let (row, x) = ((key >> 32) as u32, key as u32);
            match runs.last_mut() {
                Some(r) if r.row == row && r.start + r.len == x => r.len += 1,
                _ => runs.push(Run::new(row, x, 1)),
            }
        }
        Mask::from_runs(self.image.width(), self.image.height(), runs).expect("flood fill stays in bounds")
    }
}

fn seed_value(image: &ImageGrid, c: &CropBox, x: u32, y: u32) -> u32 {
    let mut window = [0u16; 9];
    let mut n = 0;
    for yy in y.saturating_sub(1).max(c.y0)..=(y + 1).min(c.y1 - 1) {
        for xx in x.saturating_sub(1).max(c.x0)..=(x + 1).min(c.x1 - 1) {
            window[n] = image.get(xx, yy);
            n += 1;
        }
    }
    let window = &mut window[..n];
    window.sort_unstable();
    let median = window[n / 2] as f64;
    ((median / SEED_QUANTUM as f64).round() as u32) * SEED_QUANTUM
}

fn touches(mask: &Mask, c: &CropBox) -> [bool; 4] {
    let b = mask.bbox();
    [b.min_col == c.x0, b.max_col + 1 == c.x1, b.min_row == c.y0, b.max_row + 1 == c.y1]
}

/// Proposals of one crop after background removal, edge filtering and NMS.
fn crop_proposals(image: &ImageGrid, crop: CropBox, n: u32, p: &BuiltinParams) -> Vec<Proposal> {
    let tol = p.tolerance();
    let delta = p.stability_delta();
    let mut cache = RegionCache::new(image, crop);
    let mut best: BTreeMap<(u32, u32, usize), f64> = BTreeMap::new();
    for (x, y) in seed_grid(&crop, n) {
        let v = seed_value(image, &crop, x, y);
        let Some(id) = cache.region((x, y), v, tol) else {
            continue;
        };
        let inner = cache.region((x, y), v, tol.saturating_sub(delta)).map_or(0, |i| cache.get(i).area());
        let outer = cache.region((x, y), v, tol + delta).map_or(0, |i| cache.get(i).area());
        let stability = if outer == 0 { 0.0 } else { inner as f64 / outer as f64 };
        let e = best.entry(id).or_insert(stability);
        if stability > *e {
            *e = stability;
        }
    }
    let internal = [crop.x0 > 0, crop.x1 < image.width(), crop.y0 > 0, crop.y1 < image.height()];
    let mut proposals: Vec<Proposal> = Vec::new();
    for (id, stability) in best {
        let mask = cache.get(id);
        let t = touches(mask, &crop);
        if t.iter().all(|&b| b) {
            continue;
        }
        if t.iter().zip(&internal).any(|(&t, &i)| t && i) {
            continue;
        }
        if proposals.iter().any(|q| &q.mask == mask) {
            continue;
        }
        proposals.push(Proposal {
            mask: mask.clone(),
            stability,
            crop_area: crop.area(),
        });
    }
    proposals.sort_by(|a, b| {
        b.stability
            .total_cmp(&a.stability)
            .then(a.mask.area().cmp(&b.mask.area()))
            .then_with(|| first_pixel(&a.mask).cmp(&first_pixel(&b.mask)))
    });
    nms(proposals, p.box_nms_thresh)
}

fn first_pixel(m: &Mask) -> (u32, u32) {
    let r = m.runs()[0];
    (r.row, r.start)
}

/// Greedy suppression in the given order: a proposal is dropped when its
/// IoU with a kept one is positive and at least `thresh`.
pub fn nms(ordered: Vec<Proposal>, thresh: f64) -> Vec<Proposal> {
    let mut kept: Vec<Proposal> = Vec::new();
    for cand in ordered {
        let suppressed = kept.iter().any(|k| {
            let iou = k.mask.iou(&cand.mask).expect("same dims");
            iou > 0.0 && iou >= thresh
        });
        if !suppressed {
            kept.push(cand);
        }
    }
    kept
}

/// Runs the full pipeline and returns masks with their stability.
pub fn segment_with_scores(image: &ImageGrid, p: &BuiltinParams) -> Vec<Proposal> {
    let crops = crop_boxes(image.width(), image.height(), p.crop_n_layers, p.crop_overlap_ratio);
    let multi = crops.len() > 1;
    let mut all = Vec::new();
    for crop in crops {
        let n = (p.points_per_side / p.crop_n_points_downscale_factor.pow(crop.layer)).max(1);
        all.extend(crop_proposals(image, crop, n, p));
    }
    if multi {
        all.sort_by(|a, b| {
            a.crop_area
                .cmp(&b.crop_area)
                .then(b.stability.total_cmp(&a.stability))
                .then(a.mask.area().cmp(&b.mask.area()))
                .then_with(|| first_pixel(&a.mask).cmp(&first_pixel(&b.mask)))
        });
        all = nms(all, p.crop_nms_thresh);
    }
    all.retain(|q| q.stability >= p.stability_score_thresh && q.mask.area() >= p.min_mask_region_area);
    all
}

pub fn segment(image: &ImageGrid, p: &BuiltinParams) -> Vec<Mask> {
    segment_with_scores(image, p).into_iter().map(|q| q.mask).collect()
}

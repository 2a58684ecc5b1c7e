//! Synthetic grayscale scenes with known ground truth.
//!
//! Every scene is a flat background with flat-intensity shapes and additive
//! Gaussian noise. Where two shapes overlap the pixel takes the mean of their
//! intensities.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::Result;
use crate::mask::{ImageGrid, Mask, MaskSet, Run};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShapeKind {
    Disk,
    Rectangle,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub kind: ShapeKind,
    pub mask: Mask,
    pub intensity: u16,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub image: ImageGrid,
    pub instances: Vec<Instance>,
}

impl Scene {
    pub fn truth(&self) -> MaskSet {
        MaskSet::new(
            self.image.width(),
            self.image.height(),
            self.instances.iter().map(|i| i.mask.clone()).collect(),
        )
        .expect("instances fit the image")
    }
}

/// Pixels whose centre `(x, y)` satisfies `(x-cx)^2 + (y-cy)^2 <= r^2`.
pub fn disk(width: u32, height: u32, cx: f64, cy: f64, r: f64) -> Result<Mask> {
    let mut runs = Vec::new();
    let y0 = (cy - r).ceil().max(0.0) as i64;
    let y1 = (cy + r).floor().min(height as f64 - 1.0) as i64;
    for y in y0..=y1 {
        let dy = y as f64 - cy;
        let half = (r * r - dy * dy).sqrt();
        let x0 = (cx - half).ceil().max(0.0) as i64;
        let x1 = (cx + half).floor().min(width as f64 - 1.0) as i64;
        if x1 >= x0 {
            runs.push(Run::new(y as u32, x0 as u32, (x1 - x0 + 1) as u32));
        }
    }
    Mask::from_runs(width, height, runs)
}

pub fn rectangle(width: u32, height: u32, x0: u32, y0: u32, w: u32, h: u32) -> Result<Mask> {
    Mask::from_runs(width, height, (y0..y0 + h).map(|y| Run::new(y, x0, w)))
}

/// Area of the intersection of two disks of radius `r` whose centres are `s` apart.
fn lens_area(r: f64, s: f64) -> f64 {
    if s >= 2.0 * r {
        return 0.0;
    }
    2.0 * r * r * (s / (2.0 * r)).acos() - 0.5 * s * (4.0 * r * r - s * s).sqrt()
}

/// Centre distance at which two disks of radius `r` have the given IoU.
fn separation_for_iou(r: f64, iou: f64) -> f64 {
    let disk = std::f64::consts::PI * r * r;
    let (mut lo, mut hi) = (0.0, 2.0 * r);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        let inter = lens_area(r, mid);
        if inter / (2.0 * disk - inter) > iou {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn render(width: u32, height: u32, background: u16, instances: &[Instance], sigma: f64, rng: &mut ChaCha8Rng) -> Result<ImageGrid> {
    let n = (width * height) as usize;
    let mut sum = vec![0u64; n];
    let mut count = vec![0u32; n];
    for inst in instances {
        for (x, y) in inst.mask.pixels() {
            let i = (y * width + x) as usize;
            sum[i] += inst.intensity as u64;
            count[i] += 1;
        }
    }
    let noise = Normal::new(0.0, sigma.max(0.0)).expect("finite sigma");
    let data = (0..n)
        .map(|i| {
            let base = if count[i] == 0 {
                background as f64
            } else {
                sum[i] as f64 / count[i] as f64
            };
            let v = if sigma > 0.0 { base + noise.sample(rng) } else { base };
            v.round().clamp(0.0, ImageGrid::MAX_INTENSITY as f64) as u16
        })
        .collect();
    ImageGrid::new(width, height, data)
}

/// One noise-free disk of radius `r` centred in a `size x size` image.
pub fn single_disk(size: u32, r: f64, intensity: u16, background: u16) -> Result<Scene> {
    let c = (size as f64 - 1.0) / 2.0;
    let inst = Instance {
        kind: ShapeKind::Disk,
        mask: disk(size, size, c, c, r)?,
        intensity,
    };
    let image = render(size, size, background, std::slice::from_ref(&inst), 0.0, &mut ChaCha8Rng::seed_from_u64(0))?;
    Ok(Scene { image, instances: vec![inst] })
}

/// Five separated disks of radii 12 to 20 on a 200 x 200 image.
pub fn disjoint_disks(seed: u64, sigma: f64) -> Result<Scene> {
    let (w, h) = (200, 200);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let centres = [(45.0, 45.0), (150.0, 50.0), (100.0, 100.0), (50.0, 155.0), (152.0, 150.0)];
    let mut instances = Vec::new();
    for (k, &(cx, cy)) in centres.iter().enumerate() {
        let r = 12.0 + 2.0 * k as f64;
        instances.push(Instance {
            kind: ShapeKind::Disk,
            mask: disk(w, h, cx + rng.random_range(-4.0..4.0), cy + rng.random_range(-4.0..4.0), r)?,
            intensity: rng.random_range(26000..34000),
        });
    }
    let image = render(w, h, 4000, &instances, sigma, &mut rng)?;
    Ok(Scene { image, instances })
}

/// Disk pairs with a controlled pair IoU, laid out on a grid of cells.
#[derive(Debug, Clone, PartialEq)]
pub struct OverlapScene {
    pub pairs: usize,
    pub columns: usize,
    pub cell: u32,
    pub radius: (f64, f64),
    /// Target IoU of the two disks of a pair.
    pub iou: (f64, f64),
    /// Intensity gap between the two disks of a pair.
    pub contrast: (u16, u16),
    pub sigma: f64,
    pub seed: u64,
}

impl Default for OverlapScene {
    fn default() -> Self {
        OverlapScene {
            pairs: 20,
            columns: 5,
            cell: 60,
            radius: (10.0, 13.0),
            iou: (0.40, 0.48),
            contrast: (10000, 11000),
            sigma: 250.0,
            seed: 0,
        }
    }
}

impl OverlapScene {
    pub fn build(&self) -> Result<Scene> {
        let rows = self.pairs.div_ceil(self.columns);
        let (w, h) = (self.columns as u32 * self.cell, rows as u32 * self.cell);
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut instances = Vec::with_capacity(2 * self.pairs);
        for p in 0..self.pairs {
            let cx = (p % self.columns) as f64 * self.cell as f64 + self.cell as f64 / 2.0;
            let cy = (p / self.columns) as f64 * self.cell as f64 + self.cell as f64 / 2.0;
            loop {
                let r = rng.random_range(self.radius.0..=self.radius.1);
                let s = separation_for_iou(r, rng.random_range(self.iou.0..=self.iou.1));
                let angle = rng.random_range(0.0..std::f64::consts::PI);
                let (dx, dy) = (0.5 * s * angle.cos(), 0.5 * s * angle.sin());
                let jx = rng.random_range(-3.0..3.0);
                let jy = rng.random_range(-3.0..3.0);
                let a = disk(w, h, cx + jx - dx, cy + jy - dy, r)?;
                let b = disk(w, h, cx + jx + dx, cy + jy + dy, r)?;
                let iou = a.iou(&b)?;
                if !(self.iou.0..=self.iou.1).contains(&iou) {
                    continue;
                }
                let lo: u16 = rng.random_range(24000..30000);
                let hi = lo + rng.random_range(self.contrast.0..=self.contrast.1);
                let (ia, ib) = if rng.random::<bool>() { (lo, hi) } else { (hi, lo) };
                instances.push(Instance { kind: ShapeKind::Disk, mask: a, intensity: ia });
                instances.push(Instance { kind: ShapeKind::Disk, mask: b, intensity: ib });
                break;
            }
        }
        let image = render(w, h, 4000, &instances, self.sigma, &mut rng)?;
        Ok(Scene { image, instances })
    }
}

/// Places shapes at random without overlap (with a gap), up to `tries` attempts each.
fn place<F>(rng: &mut ChaCha8Rng, placed: &mut Vec<Mask>, gap: u32, tries: usize, mut make: F) -> Result<Option<Mask>>
where
    F: FnMut(&mut ChaCha8Rng) -> Result<Mask>,
{
    for _ in 0..tries {
        let m = make(rng)?;
        let b = m.bbox();
        let clear = placed.iter().all(|o| {
            let ob = o.bbox();
            b.min_col > ob.max_col + gap || ob.min_col > b.max_col + gap || b.min_row > ob.max_row + gap || ob.min_row > b.max_row + gap
        });
        if clear {
            placed.push(m.clone());
            return Ok(Some(m));
        }
    }
    Ok(None)
}

/// Many small disks and a few large blobs, none touching.
#[derive(Debug, Clone, PartialEq)]
pub struct BimodalScene {
    pub size: u32,
    pub small: usize,
    pub small_radius: (f64, f64),
    pub large: usize,
    pub large_radius: (f64, f64),
    pub sigma: f64,
    pub seed: u64,
}

impl Default for BimodalScene {
    fn default() -> Self {
        BimodalScene {
            size: 256,
            small: 60,
            small_radius: (3.5, 4.5),
            large: 4,
            large_radius: (36.0, 42.0),
            sigma: 250.0,
            seed: 0,
        }
    }
}

impl BimodalScene {
    pub fn build(&self) -> Result<Scene> {
        let n = self.size;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut placed = Vec::new();
        let mut instances = Vec::new();
        let groups = [(self.large, self.large_radius), (self.small, self.small_radius)];
        for (count, (rlo, rhi)) in groups {
            for _ in 0..count {
                let m = place(&mut rng, &mut placed, 4, 500, |rng| {
                    let r = rng.random_range(rlo..=rhi);
                    let c = |rng: &mut ChaCha8Rng| rng.random_range(r + 3.0..n as f64 - r - 4.0);
                    let (cx, cy) = (c(rng), c(rng));
                    disk(n, n, cx, cy, r)
                })?;
                if let Some(mask) = m {
                    instances.push(Instance {
                        kind: ShapeKind::Disk,
                        mask,
                        intensity: rng.random_range(26000..34000),
                    });
                }
            }
        }
        let image = render(n, n, 4000, &instances, self.sigma, &mut rng)?;
        Ok(Scene { image, instances })
    }
}

/// Disks and 3:1 rectangles of similar area, none touching.
#[derive(Debug, Clone, PartialEq)]
pub struct MixedScene {
    pub size: u32,
    pub disks: usize,
    pub rectangles: usize,
    pub sigma: f64,
    pub seed: u64,
}

impl Default for MixedScene {
    fn default() -> Self {
        MixedScene {
            size: 256,
            disks: 8,
            rectangles: 8,
            sigma: 250.0,
            seed: 0,
        }
    }
}

impl MixedScene {
    pub fn build(&self) -> Result<Scene> {
        let n = self.size;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut placed = Vec::new();
        let mut instances = Vec::new();
        for k in 0..self.disks + self.rectangles {
            let kind = if k % 2 == 0 && k / 2 < self.disks || k / 2 >= self.rectangles {
                ShapeKind::Disk
            } else {
                ShapeKind::Rectangle
            };
            let m = place(&mut rng, &mut placed, 5, 500, |rng| match kind {
                ShapeKind::Disk => {
                    let r = rng.random_range(10.0..14.0);
                    let c = |rng: &mut ChaCha8Rng| rng.random_range(r + 3.0..n as f64 - r - 4.0);
                    let (cx, cy) = (c(rng), c(rng));
                    disk(n, n, cx, cy, r)
                }
                ShapeKind::Rectangle => {
                    let short = rng.random_range(10..=13);
                    let (w, h) = if rng.random::<bool>() { (3 * short, short) } else { (short, 3 * short) };
                    let x0 = rng.random_range(3..n - w - 3);
                    let y0 = rng.random_range(3..n - h - 3);
                    rectangle(n, n, x0, y0, w, h)
                }
            })?;
            if let Some(mask) = m {
                instances.push(Instance {
                    kind,
                    mask,
                    intensity: rng.random_range(26000..34000),
                });
            }
        }
        let image = render(n, n, 4000, &instances, self.sigma, &mut rng)?;
        Ok(Scene { image, instances })
    }
}

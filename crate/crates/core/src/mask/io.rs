//! Mask set and image files.
//!
//! The mask set text format is line oriented:
//!
//! ```text
//! samstar-masks 1
//! dims <width> <height>
//! source <segmenter> <genome-hash>      (optional)
//! mask <row>,<start>,<len> <row>,<start>,<len> ...
//! ```
//!
//! One `mask` line per instance, in set order. Blank lines and lines
//! starting with `#` are ignored.

use std::fmt::Write as _;
use std::path::Path;

use image::{ImageBuffer, Luma};

use super::grid::ImageGrid;
use super::rle::{Mask, Run};
use super::set::{MaskSet, Provenance};
use crate::error::{Error, Result};

const MAGIC: &str = "samstar-masks";
const FORMAT_VERSION: u32 = 1;

pub fn format_mask_set(set: &MaskSet) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{MAGIC} {FORMAT_VERSION}");
    let _ = writeln!(out, "dims {} {}", set.width(), set.height());
    if let Some(p) = set.provenance() {
        let _ = writeln!(out, "source {} {}", p.segmenter, p.genome_hash);
    }
    for m in set.masks() {
        out.push_str("mask");
        for r in m.runs() {
            let _ = write!(out, " {},{},{}", r.row, r.start, r.len);
        }
        out.push('\n');
    }
    out
}

/// Parses the text format; `origin` names the source in diagnostics.
pub fn parse_mask_set(text: &str, origin: &str) -> Result<MaskSet> {
    let err = |line: usize, message: String| Error::Parse {
        path: origin.to_string(),
        line,
        message,
    };
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));

    let (n, header) = lines.next().ok_or_else(|| err(1, "empty document".into()))?;
    match header.split_whitespace().collect::<Vec<_>>().as_slice() {
        [MAGIC, v] if *v == FORMAT_VERSION.to_string() => {}
        _ => return Err(err(n, format!("expected header `{MAGIC} {FORMAT_VERSION}`"))),
    }

    let (n, dims) = lines.next().ok_or_else(|| err(n, "missing dims line".into()))?;
    let (width, height) = match dims.split_whitespace().collect::<Vec<_>>().as_slice() {
        ["dims", w, h] => (
            w.parse::<u32>().map_err(|e| err(n, format!("width: {e}")))?,
            h.parse::<u32>().map_err(|e| err(n, format!("height: {e}")))?,
        ),
        _ => return Err(err(n, "expected `dims <width> <height>`".into())),
    };
    if width == 0 || height == 0 {
        return Err(err(n, "dims must be at least 1x1".into()));
    }

    let mut masks = Vec::new();
    let mut provenance = None;
    for (n, line) in lines {
        let mut fields = line.split_whitespace();
        match fields.next() {
            Some("source") => {
                let parts: Vec<&str> = fields.collect();
                let [segmenter, hash] = parts.as_slice() else {
                    return Err(err(n, "expected `source <segmenter> <genome-hash>`".into()));
                };
                provenance = Some(Provenance {
                    segmenter: segmenter.to_string(),
                    genome_hash: hash.to_string(),
                });
            }
            Some("mask") => {
                let mut runs = Vec::new();
                for (k, triple) in fields.enumerate() {
                    let nums: Vec<&str> = triple.split(',').collect();
                    let parsed: Vec<u32> = nums
                        .iter()
                        .map(|s| s.parse::<u32>())
                        .collect::<std::result::Result<_, _>>()
                        .map_err(|e| err(n, format!("run {}: {e}", k + 1)))?;
                    let [row, start, len] = parsed.as_slice() else {
                        return Err(err(n, format!("run {}: expected row,start,len", k + 1)));
                    };
                    runs.push(Run::new(*row, *start, *len));
                }
                let mask = Mask::from_runs(width, height, runs).map_err(|e| err(n, e.to_string()))?;
                masks.push(mask);
            }
            Some(other) => return Err(err(n, format!("unknown record `{other}`"))),
            None => {}
        }
    }
    let set = MaskSet::new(width, height, masks)?;
    Ok(match provenance {
        Some(p) => set.with_provenance(p),
        None => set,
    })
}

pub fn read_mask_set(path: &Path) -> Result<MaskSet> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    parse_mask_set(&text, &path.display().to_string())
}

pub fn write_mask_set(path: &Path, set: &MaskSet) -> Result<()> {
    std::fs::write(path, format_mask_set(set)).map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

/// Paints masks into a 16-bit label map, mask `i` getting label `i + 1`.
///
/// Larger masks are painted first so smaller overlapping masks stay visible.
/// Equal areas keep set order. Overlaps are lossy in this representation.
pub fn label_map(set: &MaskSet) -> Result<Vec<u16>> {
    if set.len() > u16::MAX as usize {
        return Err(Error::Unrepresentable(format!(
            "{} masks exceed the 65535 labels of a 16-bit label map",
            set.len()
        )));
    }
    let w = set.width() as usize;
    let mut labels = vec![0u16; w * set.height() as usize];
    let mut order: Vec<usize> = (0..set.len()).collect();
    order.sort_by(|&a, &b| set.masks()[b].area().cmp(&set.masks()[a].area()).then(a.cmp(&b)));
    for i in order {
        let label = (i + 1) as u16;
        for r in set.masks()[i].runs() {
            let base = r.row as usize * w;
            labels[base + r.start as usize..base + r.end() as usize].fill(label);
        }
    }
    Ok(labels)
}

/// Inverse of [`label_map`] for overlap-free sets: label `k` becomes mask `k - 1`.
/// Labels that do not occur are skipped.
pub fn masks_from_labels(width: u32, height: u32, labels: &[u16]) -> Result<MaskSet> {
    if labels.len() != width as usize * height as usize {
        return Err(Error::invalid("label map size does not match dims"));
    }
    let mut per_label: Vec<Vec<Run>> = vec![Vec::new(); u16::MAX as usize + 1];
    for row in 0..height {
        let line = &labels[row as usize * width as usize..(row as usize + 1) * width as usize];
        let mut col = 0usize;
        while col < line.len() {
            let v = line[col];
            let start = col;
            while col < line.len() && line[col] == v {
                col += 1;
            }
            if v != 0 {
                per_label[v as usize].push(Run::new(row, start as u32, (col - start) as u32));
            }
        }
    }
    let masks = per_label
        .into_iter()
        .filter(|runs| !runs.is_empty())
        .map(|runs| Mask::from_normalized(width, height, runs))
        .collect::<Result<Vec<_>>>()?;
    MaskSet::new(width, height, masks)
}

pub fn write_label_png(path: &Path, set: &MaskSet) -> Result<()> {
    let labels = label_map(set)?;
    let buf: ImageBuffer<Luma<u16>, Vec<u16>> =
        ImageBuffer::from_raw(set.width(), set.height(), labels).expect("label buffer matches dims");
    buf.save(path).map_err(|e| Error::Image {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

pub fn read_label_png(path: &Path) -> Result<MaskSet> {
    let img = open_image(path)?.into_luma16();
    masks_from_labels(img.width(), img.height(), img.as_raw())
}

fn open_image(path: &Path) -> Result<image::DynamicImage> {
    image::open(path).map_err(|e| Error::Image {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

/// Loads a grayscale PNG. 8-bit images are widened to the 16-bit range.
pub fn read_image(path: &Path) -> Result<ImageGrid> {
    let img = open_image(path)?.into_luma16();
    ImageGrid::new(img.width(), img.height(), img.into_raw())
}

pub fn write_image(path: &Path, grid: &ImageGrid) -> Result<()> {
    let buf: ImageBuffer<Luma<u16>, Vec<u16>> =
        ImageBuffer::from_raw(grid.width(), grid.height(), grid.data().to_vec()).expect("grid buffer matches dims");
    buf.save(path).map_err(|e| Error::Image {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

/// PNG bytes of a 16-bit grayscale image, for inline transport.
pub fn encode_png(grid: &ImageGrid) -> Result<Vec<u8>> {
    let buf: ImageBuffer<Luma<u16>, Vec<u16>> =
        ImageBuffer::from_raw(grid.width(), grid.height(), grid.data().to_vec()).expect("grid buffer matches dims");
    let mut out = std::io::Cursor::new(Vec::new());
    buf.write_to(&mut out, image::ImageFormat::Png)
        .map_err(|e| Error::invalid(format!("png encoding failed: {e}")))?;
    Ok(out.into_inner())
}

pub fn decode_png(bytes: &[u8]) -> Result<ImageGrid> {
    let img = image::load_from_memory_with_format(bytes, image::ImageFormat::Png)
        .map_err(|e| Error::invalid(format!("png decoding failed: {e}")))?
        .into_luma16();
    ImageGrid::new(img.width(), img.height(), img.into_raw())
}

//! The builtin segmenter on five disjoint disks, at the mid-span vector and
//! at a hand-picked one.
//!
//! cargo run --release --example builtin_segmenter

use samstar::segmenter::{segment, BuiltinSegmenter, ImageInput};
use samstar::space::{repair, AreaGate, SearchSpace};
use samstar::synth;

fn main() -> samstar::Result<()> {
    let scene = synth::disjoint_disks(1, 250.0)?;
    let image = ImageInput::from_grid(scene.image.clone());
    let space = SearchSpace::standard(AreaGate::fallback(scene.image.area()));

    let mid = space.midpoint();
    let masks = segment(&BuiltinSegmenter, &image, &mid, 0)?;
    println!("mid-span vector: {} masks", masks.len());

    // Genes in table order; see the search_space example.
    let names: Vec<&str> = space.gene_params().map(|p| p.name.as_str()).collect();
    let mut raw = mid.genome().to_vec();
    for (name, value) in [
        ("min_mask_region_area", 100.0),
        ("pred_iou_thresh", 0.95),
        ("stability_score_thresh", 0.9),
        ("points_per_side", 48.0),
    ] {
        if let Some(i) = names.iter().position(|n| *n == name) {
            raw[i] = value;
        }
    }
    let tuned = repair(&space, &raw)?;
    let masks = segment(&BuiltinSegmenter, &image, &tuned, 0)?;
    println!("tuned vector {}: {} masks", tuned.hash(), masks.len());
    for truth in &scene.instances {
        let best = masks.masks().iter().map(|m| m.iou(&truth.mask)).collect::<samstar::Result<Vec<_>>>()?;
        let best = best.into_iter().fold(0.0, f64::max);
        println!("  disk of {:>4} px: best IoU {best:.3}", truth.mask.area());
    }
    Ok(())
}

//! Run-length masks: IoU, perimeter, circularity and the text format.
//!
//! cargo run --example mask_geometry

use samstar::mask::{io, MaskSet};
use samstar::reward::{aspect_ratio, circularity, classify_shape};
use samstar::synth;

fn main() -> samstar::Result<()> {
    let a = synth::disk(64, 64, 24.0, 32.0, 12.0)?;
    let b = synth::disk(64, 64, 38.0, 32.0, 12.0)?;
    let bar = synth::rectangle(64, 64, 4, 46, 45, 15)?;

    let (inter, union) = a.overlap_counts(&b)?;
    println!("disk areas {} and {}", a.area(), b.area());
    println!("intersection {inter}, union {union}, IoU {:.4}", a.iou(&b)?);
    for (name, m) in [("disk", &a), ("bar", &bar)] {
        println!(
            "{name}: area {}, perimeter {:.1}, circularity {:.3}, aspect {:.2}, looks like {:?}",
            m.area(),
            m.perimeter(),
            circularity(m),
            aspect_ratio(m),
            classify_shape(m)
        );
    }

    let set = MaskSet::new(64, 64, vec![a, b, bar])?;
    let text = io::format_mask_set(&set);
    println!("\n{} bytes of RLE text:", text.len());
    for line in text.lines().take(4) {
        println!("  {}", if line.len() > 72 { &line[..72] } else { line });
    }
    assert_eq!(io::parse_mask_set(&text, "example")?, set);
    Ok(())
}

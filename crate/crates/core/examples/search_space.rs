//! The default search space: bounds, sampling, repair of out-of-range genes
//! and genome hashes.
//!
//! cargo run --example search_space

use samstar::space::{repair, sample, AreaGate, SearchSpace};

fn main() -> samstar::Result<()> {
    // 2 nm/px and a 20 nm smallest feature pin min_mask_region_area.
    let space = SearchSpace::standard(AreaGate::from_feature_size(20.0, 2.0)?);
    println!("{} params, {} genes", space.params().len(), space.genome_len());
    for p in space.params() {
        println!("  {:<32} {:?} [{}, {}]", p.name, p.kind, p.lo, p.hi);
    }

    let mid = space.midpoint();
    println!("\nmid-span vector {}", mid.hash());
    let drawn = sample(&space, 7);
    println!("sampled vector  {}", drawn.hash());
    for (name, value, _) in drawn.iter() {
        println!("  {name} = {value}");
    }

    let mut raw = drawn.genome().to_vec();
    raw[0] = f64::NAN;
    raw[1] = 1e9;
    raw[2] = -3.0;
    let fixed = repair(&space, &raw)?;
    println!("\nrepaired genome {:?}", fixed.genome());
    assert_eq!(repair(&space, fixed.genome())?.hash(), fixed.hash());

    let deep = SearchSpace::standard(AreaGate::fallback(256 * 256)).with_deep_crops();
    let v = sample(&deep, 3);
    for (name, value, active) in v.iter().filter(|(n, _, _)| n.starts_with("crop")) {
        println!("  {name} = {value}{}", if active { "" } else { " (inactive)" });
    }
    Ok(())
}

//! Score a mask set against every reward: the ground truth of an overlap
//! scene, then the same set with a duplicate and a merged pair added.
//!
//! cargo run --example score_masks

use samstar::campaign::commands::score_set;
use samstar::mask::MaskSet;
use samstar::reward::{ObjectiveId, RewardSpec};
use samstar::synth::OverlapScene;

fn main() -> samstar::Result<()> {
    let scene = OverlapScene { pairs: 6, columns: 3, ..Default::default() }.build()?;
    let spec = RewardSpec { objectives: ObjectiveId::ALL.to_vec(), ..RewardSpec::default() };
    let truth = scene.truth();
    println!("ground truth ({} masks)\n{}", truth.len(), score_set(&truth, &spec));

    let mut masks = truth.masks().to_vec();
    masks.push(masks[0].clone());
    // Three whole pairs fused into one mask, over three times the median area.
    let merged: Vec<_> = masks[2..8].iter().flat_map(|m| m.pixels()).collect();
    masks.push(samstar::Mask::from_pixels(truth.width(), truth.height(), merged)?);
    let noisy = MaskSet::new(truth.width(), truth.height(), masks)?;
    println!("with a duplicate and a merge ({} masks)\n{}", noisy.len(), score_set(&noisy, &spec));
    Ok(())
}

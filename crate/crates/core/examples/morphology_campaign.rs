//! Circularity against aspect ratio on a scene of disks and elongated
//! rectangles. Tuning the segmenter cannot make it prefer one shape, but
//! the per-mask descriptors separate the shapes after the fact.
//!
//! cargo run --release --example morphology_campaign [-- <out dir>]

use std::path::PathBuf;

use samstar::campaign::{Campaign, CampaignConfig, Mode};
use samstar::mask::{io, iou};
use samstar::reward::{self, ObjectiveId};
use samstar::synth::MixedScene;

fn main() -> samstar::Result<()> {
    env_logger::init();
    let out = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("samstar-mixed"));
    std::fs::create_dir_all(&out).map_err(|e| samstar::Error::io("creating output", e))?;
    let scene = MixedScene::default().build()?;
    let image = out.join("scene.png");
    io::write_image(&image, &scene.image)?;

    let mut cfg = CampaignConfig::default();
    cfg.mode = Some(Mode::Multi);
    cfg.image.paths = vec![image];
    cfg.image.nm_per_px = Some(1.0);
    cfg.image.min_feature_nm = Some(8.0);
    cfg.reward.objectives = vec![ObjectiveId::Circularity, ObjectiveId::AspectRatio];
    cfg.ga.population = 16;
    cfg.ga.generations = 8;
    cfg.ga.seed = 5;

    let campaign = Campaign::prepare(&cfg)?;
    let result = campaign.run(&out.join("run"), &mut |_| {})?;
    println!("front of {}, normalized spread {:.3}", result.evolution.front.len(), reward::front_spread(&result.evolution.front.iter().map(|m| m.objectives.values()).collect::<Vec<_>>()));

    let detected = &campaign.evaluator().mask_sets(&result.tradeoff.vector, 0)?[0];
    let mut correct = 0;
    for inst in &scene.instances {
        let best = detected
            .masks()
            .iter()
            .map(|m| (iou(m, &inst.mask).unwrap_or(0.0), m))
            .max_by(|a, b| a.0.total_cmp(&b.0));
        let Some((overlap, mask)) = best else { continue };
        let class = reward::classify_shape(mask);
        println!(
            "{:?} matched at IoU {overlap:.2}: circularity {:.3}, aspect {:.2} -> {class:?}",
            inst.kind,
            reward::circularity(mask),
            reward::aspect_ratio(mask)
        );
        if overlap >= 0.5 && class == inst.kind {
            correct += 1;
        }
    }
    println!("{correct}/{} shapes classified", scene.instances.len());
    Ok(())
}

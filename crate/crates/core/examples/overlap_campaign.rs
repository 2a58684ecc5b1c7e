//! Single-objective campaign on twenty pairs of overlapping disks: tune the
//! builtin segmenter for overlap fidelity and compare against the mid-span
//! vector.
//!
//! cargo run --release --example overlap_campaign [-- <out dir>]

use std::path::PathBuf;

use samstar::campaign::{Campaign, CampaignConfig, Mode};
use samstar::mask::io;
use samstar::reward::ObjectiveId;
use samstar::synth::OverlapScene;

fn main() -> samstar::Result<()> {
    env_logger::init();
    let out = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("samstar-overlap"));
    std::fs::create_dir_all(&out).map_err(|e| samstar::Error::io("creating output", e))?;
    let scene = OverlapScene::default().build()?;
    let image = out.join("scene.png");
    io::write_image(&image, &scene.image)?;

    let mut cfg = CampaignConfig::default();
    cfg.mode = Some(Mode::Single);
    cfg.image.paths = vec![image];
    // 1 nm/px and a 6.2 nm smallest feature: masks under ~30 px are dropped.
    cfg.image.nm_per_px = Some(1.0);
    cfg.image.min_feature_nm = Some(6.2);
    cfg.reward.objectives = vec![ObjectiveId::OverlapFidelity];
    cfg.ga.population = 24;
    cfg.ga.generations = 15;
    cfg.ga.seed = 1;

    let campaign = Campaign::prepare(&cfg)?;
    let result = campaign.run(&out.join("run"), &mut |s| {
        println!("generation {:>2}: best {:?}", s.generation, s.best());
    })?;
    let (_, base) = result.baseline.clone().expect("baseline evaluated");
    let best = &result.tradeoff;
    let masks = campaign.evaluator().mask_sets(&best.vector, 0)?;
    println!("mid-span reward {}", base.value(0));
    println!("tuned reward    {} ({})", best.objectives.value(0), best.hash());
    println!("tuned mask count {} (truth {})", masks[0].len(), scene.instances.len());
    for (name, value, active) in best.vector.iter() {
        if active {
            println!("  {name} = {value}");
        }
    }
    println!("{} evaluations, outputs in {}", result.evolution.evaluations, result.out_dir.display());
    Ok(())
}

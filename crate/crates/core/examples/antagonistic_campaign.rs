//! Two-objective campaign on a bimodal scene (many small disks, a few large
//! ones): small-object sensitivity against large-object coverage. Prints the
//! front and the members biased toward each objective.
//!
//! cargo run --release --example antagonistic_campaign [-- <out dir>]

use std::path::PathBuf;

use samstar::campaign::{Campaign, CampaignConfig, Mode};
use samstar::mask::io;
use samstar::reward::ObjectiveId;
use samstar::synth::BimodalScene;

fn main() -> samstar::Result<()> {
    env_logger::init();
    let out = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("samstar-bimodal"));
    std::fs::create_dir_all(&out).map_err(|e| samstar::Error::io("creating output", e))?;
    let scene = BimodalScene::default().build()?;
    let image = out.join("scene.png");
    io::write_image(&image, &scene.image)?;

    let mut cfg = CampaignConfig::default();
    cfg.mode = Some(Mode::Multi);
    cfg.image.paths = vec![image];
    // The area gate is set from physics (smallest feature 4 nm at 1 nm/px),
    // so the grid density and tolerances decide which sizes are found.
    cfg.image.nm_per_px = Some(1.0);
    cfg.image.min_feature_nm = Some(4.0);
    cfg.reward.objectives = vec![ObjectiveId::SmallSensitivity, ObjectiveId::LargeCoverage];
    cfg.ga.population = 24;
    cfg.ga.generations = 12;
    cfg.ga.seed = 3;

    let campaign = Campaign::prepare(&cfg)?;
    let result = campaign.run(&out.join("run"), &mut |_| {})?;
    let evaluator = campaign.evaluator();
    println!("front ({} members):", result.evolution.front.len());
    for m in result.evolution.front.iter() {
        let n = evaluator.mask_sets(&m.vector, 0)?[0].len();
        println!("  {}  sensitivity {:.5}  mean area {:>8.1}  masks {n}", m.hash(), m.objectives.value(0), m.objectives.value(1));
    }
    let show = |label: &str, m: &samstar::Individual| -> samstar::Result<()> {
        let n = evaluator.mask_sets(&m.vector, 0)?[0].len();
        println!("{label:<22} mean area {:>8.1}  masks {n}", m.objectives.value(1));
        Ok(())
    };
    show("biased to coverage", &result.extremes[1].1)?;
    show("trade-off", &result.tradeoff)?;
    show("biased to sensitivity", &result.extremes[0].1)?;
    Ok(())
}

//! Tuning campaigns: config, closed-loop evaluation, artifacts, and the
//! command line front end.
//!
//! A campaign directory holds:
//!
//! - `manifest.toml`: the resolved config plus tool version and image hashes; rerunnable as a config.
//! - `history.csv`: every distinct evaluated vector.
//! - `front.csv`: the final non-dominated set.
//! - `tradeoff.txt`: the selected trade-off vector, its objectives and the mid-span baseline.
//! - `renders/*.png`, `masks/*.rle`: label maps and full mask sets of the trade-off and per-objective extremes.
//! - `INCOMPLETE`: present while a run is in progress or after it failed.

pub mod cli;
pub mod commands;
mod config;

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use sha2::{Digest, Sha256};

pub use config::{
    CampaignConfig, ImageSection, Mode, OutputSection, Overrides, RunSection, SegmenterSection, SpaceSection,
};

use crate::error::{Error, Result};
use crate::mask::{io, MaskSet};
use crate::nsga2::{
    evaluation_seed, evolve, select_tradeoff, write_history_csv, Evaluator, Evolution, GenerationSnapshot,
    HistoryRecord, Individual,
};
use crate::reward::{self, ObjectiveVector, RewardSpec};
use crate::segmenter::{self, ExternalOptions, ImageInput, Segmenter, SegmenterSpec};
use crate::space::{AreaGate, HyperparamVector, SearchSpace, SpaceDocument};

pub const INCOMPLETE_MARKER: &str = "INCOMPLETE";

pub fn tool_version() -> String {
    format!("samstar {}", env!("CARGO_PKG_VERSION"))
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Scores a vector by segmenting every image and averaging the objectives.
pub struct RewardEvaluator<'a> {
    pub segmenter: &'a dyn Segmenter,
    pub images: &'a [ImageInput],
    pub spec: &'a RewardSpec,
}

impl RewardEvaluator<'_> {
    pub fn mask_sets(&self, vector: &HyperparamVector, seed: u64) -> Result<Vec<MaskSet>> {
        self.images
            .iter()
            .map(|img| segmenter::segment(self.segmenter, img, vector, seed))
            .collect()
    }
}

impl Evaluator for RewardEvaluator<'_> {
    fn objective_names(&self) -> Vec<String> {
        self.spec.objectives.iter().map(|o| o.name().to_string()).collect()
    }

    fn evaluate(&self, vector: &HyperparamVector, seed: u64) -> Result<ObjectiveVector> {
        let sets = self.mask_sets(vector, seed)?;
        let per_image: Vec<ObjectiveVector> = sets.iter().map(|s| reward::evaluate(s, self.spec)).collect();
        if per_image.len() == 1 {
            return Ok(per_image.into_iter().next().expect("one image"));
        }
        let n = per_image.len() as f64;
        let names = self.objective_names();
        ObjectiveVector::new(
            names
                .iter()
                .enumerate()
                .map(|(i, name)| (name.clone(), per_image.iter().map(|v| v.value(i)).sum::<f64>() / n)),
        )
    }
}

/// A validated campaign: images loaded and hashed, space resolved,
/// segmenter open.
pub struct Campaign {
    /// Self-contained form of the input config: absolute image paths,
    /// inline space, run section filled.
    pub resolved: CampaignConfig,
    pub mode: Mode,
    pub space: SearchSpace,
    pub images: Vec<ImageInput>,
    segmenter: Box<dyn Segmenter>,
}

#[derive(Debug, Clone)]
pub struct CampaignResult {
    pub evolution: Evolution,
    pub tradeoff: Individual,
    /// Objectives of the mid-span vector, when its evaluation succeeded.
    pub baseline: Option<(HyperparamVector, ObjectiveVector)>,
    /// Per objective, the front member maximizing it.
    pub extremes: Vec<(String, Individual)>,
    pub out_dir: PathBuf,
}

impl Campaign {
    pub fn prepare(config: &CampaignConfig) -> Result<Self> {
        let mut resolved = config.clone();
        if resolved.image.paths.is_empty() {
            return Err(Error::Config("no image given".into()));
        }
        let mut images = Vec::new();
        let mut hashes = Vec::new();
        for p in &resolved.image.paths {
            if !p.is_file() {
                return Err(Error::Config(format!("image {} does not exist", p.display())));
            }
            let bytes = fs::read(p).map_err(|e| Error::io(format!("reading {}", p.display()), e))?;
            hashes.push(sha256_hex(&bytes));
            images.push(ImageInput::load(p)?);
        }
        if let Some(run) = &config.run {
            if run.image_sha256.len() != hashes.len() {
                return Err(Error::Config(format!(
                    "manifest lists {} image hashes for {} images",
                    run.image_sha256.len(),
                    hashes.len()
                )));
            }
            for ((want, got), p) in run.image_sha256.iter().zip(&hashes).zip(&resolved.image.paths) {
                if want != got {
                    return Err(Error::Config(format!(
                        "image {} has sha256 {got}, manifest expects {want}",
                        p.display()
                    )));
                }
            }
            if run.tool_version != tool_version() {
                log::warn!("manifest was written by {}, running {}", run.tool_version, tool_version());
            }
        }
        resolved.image.paths = images.iter().map(|i| i.path.clone().expect("loaded from disk")).collect();

        for w in resolved.reward.validate()? {
            log::warn!("{w}");
        }
        let n_obj = resolved.reward.objectives.len();
        let mode = resolved
            .mode
            .unwrap_or(if n_obj == 1 { Mode::Single } else { Mode::Multi });
        match mode {
            Mode::Single if n_obj != 1 => {
                return Err(Error::Config(format!("single-objective mode needs exactly 1 objective, got {n_obj}")))
            }
            Mode::Multi if n_obj < 2 => {
                return Err(Error::Config(format!("multi-objective mode needs at least 2 objectives, got {n_obj}")))
            }
            _ => {}
        }
        resolved.mode = Some(mode);

        let doc = match (&resolved.space.file, resolved.space.param.is_empty()) {
            (Some(_), false) => return Err(Error::Config("[space] takes either `file` or inline params, not both".into())),
            (Some(f), true) => SpaceDocument::load(f)?,
            (None, false) => SpaceDocument {
                param: resolved.space.param.clone(),
            },
            (None, true) => SpaceDocument::bundled(),
        };
        let gate = match (resolved.image.nm_per_px, resolved.image.min_feature_nm) {
            (Some(cal), Some(feature)) => AreaGate::from_feature_size(feature, cal)?,
            (None, None) => {
                if doc.has_physics_param() {
                    log::warn!("no pixel calibration: the area gate is searched instead of set from a feature size");
                }
                AreaGate::fallback(images.iter().map(|i| i.grid.area()).min().expect("at least one image"))
            }
            _ => {
                return Err(Error::Config(
                    "nm_per_px and min_feature_nm must be given together".into(),
                ))
            }
        };
        let mut space = doc.resolve(gate)?;
        if resolved.space.deep_crops {
            space = space.with_deep_crops();
        }
        resolved.space.file = None;
        resolved.space.param = doc.param;

        resolved.ga.validate()?;
        let seg_spec: SegmenterSpec = resolved.segmenter.spec.parse()?;
        let timeout = resolved.segmenter.timeout_s;
        if !(timeout.is_finite() && timeout > 0.0) {
            return Err(Error::Config(format!("segmenter timeout must be positive, got {timeout}")));
        }
        let segmenter = seg_spec.open(ExternalOptions {
            timeout: Duration::from_secs_f64(timeout),
            retries: resolved.segmenter.retries,
            ..Default::default()
        })?;
        resolved.run = Some(RunSection {
            tool_version: tool_version(),
            image_sha256: hashes,
        });
        Ok(Campaign {
            resolved,
            mode,
            space,
            images,
            segmenter,
        })
    }

    pub fn segmenter(&self) -> &dyn Segmenter {
        self.segmenter.as_ref()
    }

    pub fn evaluator(&self) -> RewardEvaluator<'_> {
        RewardEvaluator {
            segmenter: self.segmenter.as_ref(),
            images: &self.images,
            spec: &self.resolved.reward,
        }
    }

    /// The manifest text. Worker count and output directory are left out:
    /// they do not change results.
    pub fn manifest(&self) -> Result<String> {
        let mut m = self.resolved.clone();
        m.output = OutputSection::default();
        let mut table = toml::Table::try_from(&m).map_err(|e| Error::Config(format!("serializing manifest: {e}")))?;
        if let Some(toml::Value::Table(ga)) = table.get_mut("ga") {
            ga.remove("workers");
        }
        if let Some(toml::Value::Table(out)) = table.get("output") {
            if out.is_empty() {
                table.remove("output");
            }
        }
        toml::to_string(&table).map_err(|e| Error::Config(format!("serializing manifest: {e}")))
    }

    /// Runs the campaign and writes its artifacts to `out`.
    pub fn run(&self, out: &Path, observer: &mut dyn FnMut(&GenerationSnapshot)) -> Result<CampaignResult> {
        let write = |path: PathBuf, text: &str| -> Result<()> {
            fs::write(&path, text).map_err(|e| Error::io(format!("writing {}", path.display()), e))
        };
        for d in [out.to_path_buf(), out.join("renders"), out.join("masks")] {
            fs::create_dir_all(&d).map_err(|e| Error::io(format!("creating {}", d.display()), e))?;
        }
        write(out.join(INCOMPLETE_MARKER), "campaign did not finish\n")?;
        write(out.join("manifest.toml"), &self.manifest()?)?;

        let ga = &self.resolved.ga;
        let evaluator = self.evaluator();
        let mid = self.space.midpoint();
        let baseline = match evaluator.evaluate(&mid, evaluation_seed(ga.seed, mid.hash())) {
            Ok(v) => Some((mid, v)),
            Err(e) => {
                log::warn!("mid-span baseline evaluation failed: {e}");
                None
            }
        };

        let evolution = evolve(&self.space, &evaluator, ga, observer)?;
        let names = evaluator.objective_names();
        let history_path = out.join("history.csv");
        let file = fs::File::create(&history_path).map_err(|e| Error::io(format!("creating {}", history_path.display()), e))?;
        write_history_csv(file, &names, &evolution.history)?;

        let front_records: Vec<HistoryRecord> = evolution
            .front
            .iter()
            .map(|m| HistoryRecord {
                generation: ga.generations,
                vector: m.vector.clone(),
                objectives: m.objectives.clone(),
                failed: m.failed,
                rank: 0,
                crowding: m.crowding,
            })
            .collect();
        let front_path = out.join("front.csv");
        let file = fs::File::create(&front_path).map_err(|e| Error::io(format!("creating {}", front_path.display()), e))?;
        write_history_csv(file, &names, &front_records)?;

        if evolution.front.iter().all(|m| m.failed) {
            log::warn!("every front member is a failed evaluation");
        }
        let tradeoff = select_tradeoff(&evolution.front)?.clone();
        let extremes: Vec<(String, Individual)> = names
            .iter()
            .enumerate()
            .map(|(i, name)| {
                let best = evolution
                    .front
                    .iter()
                    .max_by(|a, b| {
                        a.objectives
                            .value(i)
                            .total_cmp(&b.objectives.value(i))
                            .then_with(|| b.hash().cmp(a.hash()))
                    })
                    .expect("front is non-empty");
                (name.clone(), best.clone())
            })
            .collect();
        write(out.join("tradeoff.txt"), &tradeoff_document(&tradeoff, baseline.as_ref())?)?;

        let mut renders = vec![("tradeoff".to_string(), &tradeoff)];
        renders.extend(extremes.iter().map(|(n, m)| (format!("best_{n}"), m)));
        for (label, member) in renders {
            let sets = evaluator.mask_sets(&member.vector, evaluation_seed(ga.seed, member.hash()))?;
            for (i, set) in sets.iter().enumerate() {
                let stem = if sets.len() == 1 { label.clone() } else { format!("{label}_{i}") };
                io::write_label_png(&out.join("renders").join(format!("{stem}.png")), set)?;
                io::write_mask_set(&out.join("masks").join(format!("{stem}.rle")), set)?;
            }
        }

        let marker = out.join(INCOMPLETE_MARKER);
        fs::remove_file(&marker).map_err(|e| Error::io(format!("removing {}", marker.display()), e))?;
        Ok(CampaignResult {
            evolution,
            tradeoff,
            baseline,
            extremes,
            out_dir: out.to_path_buf(),
        })
    }
}

fn vector_table(v: &HyperparamVector, objectives: &ObjectiveVector) -> Result<toml::Table> {
    let ser = |e: toml::ser::Error| Error::Config(format!("serializing trade-off: {e}"));
    let mut t = toml::Table::new();
    t.insert("genome_hash".into(), toml::Value::String(v.hash().to_string()));
    let mut objs = toml::Table::new();
    for (name, value) in objectives.entries() {
        objs.insert(name.clone(), toml::Value::Float(*value));
    }
    t.insert("objectives".into(), toml::Value::Table(objs));
    let params = toml::Table::try_from(v.canonical_map()).map_err(ser)?;
    t.insert("params".into(), toml::Value::Table(params));
    Ok(t)
}

fn tradeoff_document(tradeoff: &Individual, baseline: Option<&(HyperparamVector, ObjectiveVector)>) -> Result<String> {
    let mut doc = vector_table(&tradeoff.vector, &tradeoff.objectives)?;
    if let Some((v, o)) = baseline {
        doc.insert("baseline".into(), toml::Value::Table(vector_table(v, o)?));
    }
    toml::to_string(&doc).map_err(|e| Error::Config(format!("serializing trade-off: {e}")))
}

/// Loads a config (or manifest), applies overrides and runs it. The output
/// directory comes from the overrides or the `[output]` section.
pub fn cmd_tune(config: Option<&Path>, overrides: &Overrides) -> Result<CampaignResult> {
    let mut cfg = match config {
        Some(p) => CampaignConfig::load(p)?,
        None => CampaignConfig::default(),
    };
    cfg.apply(overrides);
    let out = cfg
        .output
        .dir
        .clone()
        .ok_or_else(|| Error::Config("no output directory: pass --out or set [output] dir".into()))?;
    let campaign = Campaign::prepare(&cfg)?;
    log::info!(
        "{} campaign over {} image(s), population {}, {} generations, segmenter {}",
        campaign.mode,
        campaign.images.len(),
        cfg.ga.population,
        cfg.ga.generations,
        campaign.segmenter().id()
    );
    campaign.run(&out, &mut |snap: &GenerationSnapshot| {
        log::info!(
            "generation {}: {} evaluations, best {:?}",
            snap.generation,
            snap.evaluations,
            snap.best()
        );
    })
}

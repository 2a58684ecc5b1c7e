use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nsga2::GaConfig;
use crate::reward::RewardSpec;
use crate::space::ParamEntry;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Exactly one active objective.
    Single,
    /// Two or more active objectives.
    Multi,
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "single" => Ok(Mode::Single),
            "multi" => Ok(Mode::Multi),
            _ => Err(Error::Config(format!("mode `{s}` is not `single` or `multi`"))),
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Single => "single",
            Mode::Multi => "multi",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ImageSection {
    pub paths: Vec<PathBuf>,
    /// Pixel calibration. Together with `min_feature_nm` it fixes the area gate.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nm_per_px: Option<f64>,
    /// Diameter of the smallest feature worth a mask.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub min_feature_nm: Option<f64>,
}

/// Either a space document file or inline `[[space.param]]` tables; the
/// bundled space when both are absent.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpaceSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub file: Option<PathBuf>,
    #[serde(skip_serializing_if = "std::ops::Not::not")]
    pub deep_crops: bool,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub param: Vec<ParamEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SegmenterSection {
    /// `builtin`, `cmd:<launch command>` or `tcp:<host:port>`.
    pub spec: String,
    pub timeout_s: f64,
    pub retries: u32,
}

impl Default for SegmenterSection {
    fn default() -> Self {
        SegmenterSection {
            spec: "builtin".into(),
            timeout_s: 120.0,
            retries: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
}

/// Present in manifests: what the run was made with.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub tool_version: String,
    /// One per image, hex.
    pub image_sha256: Vec<String>,
}

/// A campaign config file. Manifests written by a run are configs too.
///
/// ```toml
/// mode = "single"
///
/// [image]
/// paths = ["scene.png"]
/// nm_per_px = 1.0
/// min_feature_nm = 6.0
///
/// [reward]
/// objectives = ["overlap_fidelity"]
///
/// [ga]
/// population = 24
/// generations = 15
/// seed = 7
///
/// [segmenter]
/// spec = "builtin"
///
/// [output]
/// dir = "out"
/// ```
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CampaignConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<Mode>,
    #[serde(default)]
    pub image: ImageSection,
    #[serde(default)]
    pub reward: RewardSpec,
    #[serde(default)]
    pub space: SpaceSection,
    #[serde(default)]
    pub ga: GaConfig,
    #[serde(default)]
    pub segmenter: SegmenterSection,
    #[serde(default)]
    pub output: OutputSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub run: Option<RunSection>,
}

/// Command-line values that take precedence over the config file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub images: Vec<PathBuf>,
    pub seed: Option<u64>,
    pub population: Option<usize>,
    pub generations: Option<usize>,
    pub workers: Option<usize>,
    pub segmenter: Option<String>,
    pub out: Option<PathBuf>,
    pub mode: Option<Mode>,
}

impl CampaignConfig {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// Reads a config; relative paths in it are taken relative to its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
        let mut cfg = Self::parse(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })?;
        let base = path.parent().unwrap_or(Path::new(""));
        let rebase = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        cfg.image.paths.iter_mut().for_each(rebase);
        cfg.space.file.iter_mut().for_each(rebase);
        cfg.output.dir.iter_mut().for_each(rebase);
        Ok(cfg)
    }

    pub fn apply(&mut self, o: &Overrides) {
        if !o.images.is_empty() {
            self.image.paths = o.images.clone();
        }
        if let Some(s) = o.seed {
            self.ga.seed = s;
        }
        if let Some(p) = o.population {
            self.ga.population = p;
        }
        if let Some(g) = o.generations {
            self.ga.generations = g;
        }
        if let Some(w) = o.workers {
            self.ga.workers = w;
        }
        if let Some(s) = &o.segmenter {
            self.segmenter.spec = s.clone();
        }
        if let Some(d) = &o.out {
            self.output.dir = Some(d.clone());
        }
        if o.mode.is_some() {
            self.mode = o.mode;
        }
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(format!("serializing config: {e}")))
    }
}

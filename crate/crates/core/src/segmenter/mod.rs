//! Segmenters: the builtin reference segmenter and clients for external
//! workers speaking the line protocol in [`protocol`].

pub mod builtin;
mod external;
pub mod protocol;
mod worker;

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Duration;

pub use external::{ExternalOptions, ExternalSegmenter};
pub use worker::{serve, serve_tcp, WorkerOptions};

use crate::error::{Error, Result};
use crate::mask::{io, ImageGrid, MaskSet, Provenance};
use crate::space::{HyperparamVector, ParamValue};

/// An image plus, when it came from disk, its path (external workers read
/// images by path when they can).
#[derive(Debug, Clone, PartialEq)]
pub struct ImageInput {
    pub grid: ImageGrid,
    pub path: Option<PathBuf>,
}

impl ImageInput {
    pub fn from_grid(grid: ImageGrid) -> Self {
        ImageInput { grid, path: None }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let grid = io::read_image(path)?;
        let path = std::fs::canonicalize(path).unwrap_or_else(|_| path.to_path_buf());
        Ok(ImageInput { grid, path: Some(path) })
    }
}

pub trait Segmenter: Send + Sync {
    /// Identifier recorded in mask-set provenance.
    fn id(&self) -> String;

    fn segment_params(&self, image: &ImageInput, params: &BTreeMap<String, ParamValue>, seed: u64) -> Result<MaskSet>;
}

/// Segments `image` with the canonical values of `vector` and tags the
/// result with the genome hash.
pub fn segment(seg: &dyn Segmenter, image: &ImageInput, vector: &HyperparamVector, seed: u64) -> Result<MaskSet> {
    let set = seg.segment_params(image, &vector.canonical_map(), seed)?;
    Ok(set.with_provenance(Provenance {
        segmenter: seg.id(),
        genome_hash: vector.hash().to_string(),
    }))
}

/// The deterministic reference segmenter of [`builtin`].
#[derive(Debug, Clone, Copy, Default)]
pub struct BuiltinSegmenter;

impl Segmenter for BuiltinSegmenter {
    fn id(&self) -> String {
        "builtin".into()
    }

    fn segment_params(&self, image: &ImageInput, params: &BTreeMap<String, ParamValue>, _seed: u64) -> Result<MaskSet> {
        let p = builtin::BuiltinParams::from_map(params)?;
        MaskSet::new(image.grid.width(), image.grid.height(), builtin::segment(&image.grid, &p))
    }
}

/// Where masks come from: `builtin`, `cmd:<launch command>` or `tcp:<host:port>`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SegmenterSpec {
    Builtin,
    Command(Vec<String>),
    Tcp(String),
}

impl FromStr for SegmenterSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "builtin" {
            return Ok(SegmenterSpec::Builtin);
        }
        if let Some(cmd) = s.strip_prefix("cmd:") {
            let argv: Vec<String> = cmd.split_whitespace().map(String::from).collect();
            if argv.is_empty() {
                return Err(Error::Config("`cmd:` needs a launch command".into()));
            }
            return Ok(SegmenterSpec::Command(argv));
        }
        if let Some(addr) = s.strip_prefix("tcp:") {
            if addr.is_empty() {
                return Err(Error::Config("`tcp:` needs an address".into()));
            }
            return Ok(SegmenterSpec::Tcp(addr.to_string()));
        }
        Err(Error::Config(format!(
            "segmenter `{s}` is not `builtin`, `cmd:<command>` or `tcp:<addr>`"
        )))
    }
}

impl fmt::Display for SegmenterSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SegmenterSpec::Builtin => f.write_str("builtin"),
            SegmenterSpec::Command(argv) => write!(f, "cmd:{}", argv.join(" ")),
            SegmenterSpec::Tcp(addr) => write!(f, "tcp:{addr}"),
        }
    }
}

impl SegmenterSpec {
    pub fn open(&self, opts: ExternalOptions) -> Result<Box<dyn Segmenter>> {
        match self {
            SegmenterSpec::Builtin => Ok(Box::new(BuiltinSegmenter)),
            _ => Ok(Box::new(ExternalSegmenter::new(self.clone(), opts)?)),
        }
    }
}

impl Default for ExternalOptions {
    fn default() -> Self {
        ExternalOptions {
            timeout: Duration::from_secs(120),
            retries: 2,
            protocol: protocol::PROTOCOL_VERSION,
            client: format!("samstar {}", env!("CARGO_PKG_VERSION")),
        }
    }
}

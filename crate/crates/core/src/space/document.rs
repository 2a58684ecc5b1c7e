use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Condition, ParamDescriptor, ParamKind, ParamValue, SearchSpace};
use crate::error::{Error, Result};

const BUNDLED: &str = include_str!("../../assets/standard_space.toml");

/// One `[[param]]` table of a space document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamEntry {
    pub name: String,
    pub kind: ParamKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lo: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hi: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<ParamValue>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub active_if: Option<String>,
    /// Span resolved from the image and calibration rather than written here.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub physics: bool,
}

/// How the physics-derived area gate is resolved.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AreaGate {
    /// Cutoff computed from a physical feature size: the parameter becomes fixed.
    Physics { cutoff_px2: u64 },
    /// No calibration: the gate is searched over `[0, max]`.
    Span { max: u64 },
}

impl AreaGate {
    /// Fallback span for an image of `area` pixels: `[0, area / 16]`.
    pub fn fallback(image_area: u64) -> Self {
        AreaGate::Span { max: image_area / 16 }
    }

    /// Area in px^2 of a disk with the given physical diameter.
    pub fn from_feature_size(min_feature_nm: f64, nm_per_px: f64) -> Result<Self> {
        if !(min_feature_nm > 0.0 && nm_per_px > 0.0) {
            return Err(Error::Config(format!(
                "feature size {min_feature_nm} nm and calibration {nm_per_px} nm/px must be positive"
            )));
        }
        let radius_px = min_feature_nm / nm_per_px / 2.0;
        Ok(AreaGate::Physics {
            cutoff_px2: (PI * radius_px * radius_px).round() as u64,
        })
    }
}

/// Parsed space document, before the area gate is resolved.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpaceDocument {
    pub param: Vec<ParamEntry>,
}

impl SpaceDocument {
    pub fn bundled() -> Self {
        Self::parse(BUNDLED).expect("bundled space document parses")
    }

    pub fn bundled_text() -> &'static str {
        BUNDLED
    }

    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(format!("space document: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
        Self::parse(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("space document serializes")
    }

    pub fn has_physics_param(&self) -> bool {
        self.param.iter().any(|p| p.physics)
    }

    pub fn resolve(&self, gate: AreaGate) -> Result<SearchSpace> {
        let params = self
            .param
            .iter()
            .map(|e| resolve_entry(e, gate))
            .collect::<Result<Vec<_>>>()?;
        SearchSpace::new(params)
    }
}

fn resolve_entry(e: &ParamEntry, gate: AreaGate) -> Result<ParamDescriptor> {
    let fail = |msg: &str| Err(Error::Config(format!("parameter {}: {msg}", e.name)));
    let mut d = if e.physics {
        if e.lo.is_some() || e.hi.is_some() || e.value.is_some() {
            return fail("physics parameters take no lo/hi/value");
        }
        match gate {
            AreaGate::Physics { cutoff_px2 } => ParamDescriptor::fixed(&e.name, ParamValue::Int(cutoff_px2 as i64)),
            AreaGate::Span { max } => ParamDescriptor {
                name: e.name.clone(),
                kind: e.kind,
                lo: 0.0,
                hi: if e.kind == ParamKind::EvenInt { (max - max % 2) as f64 } else { max as f64 },
                fixed_value: None,
                active_if: None,
            },
        }
    } else if e.kind == ParamKind::Fixed {
        let Some(v) = e.value.clone() else {
            return fail("fixed parameter needs `value`");
        };
        if e.lo.is_some() || e.hi.is_some() {
            return fail("fixed parameter takes no span");
        }
        ParamDescriptor::fixed(&e.name, v)
    } else {
        let (Some(lo), Some(hi)) = (e.lo, e.hi) else {
            return fail("ranged parameter needs `lo` and `hi`");
        };
        if e.value.is_some() {
            return fail("only fixed parameters take `value`");
        }
        ParamDescriptor {
            name: e.name.clone(),
            kind: e.kind,
            lo,
            hi,
            fixed_value: None,
            active_if: None,
        }
    };
    if let Some(c) = &e.active_if {
        d.active_if = Some(Condition::parse(c)?);
    }
    Ok(d)
}

//! Typed, bounded and partially conditional hyperparameter search space.
//!
//! The optimizer evolves a flat genome over the non-fixed parameters;
//! [`repair`] maps any raw genome back onto the space (clamp, round, snap to
//! even) and flags conditional parameters whose predicate is false.

mod document;
mod vector;

use std::fmt;

use serde::{Deserialize, Serialize};

pub use document::{AreaGate, ParamEntry, SpaceDocument};
pub use vector::{genome_hash, repair, sample, sample_with, GenomeHash, HyperparamVector};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamKind {
    Float,
    Int,
    EvenInt,
    Fixed,
}

/// A concrete parameter value as sent to a segmenter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamValue {
    Int(i64),
    Float(f64),
    Text(String),
}

impl ParamValue {
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            ParamValue::Int(v) => Some(*v as f64),
            ParamValue::Float(v) => Some(*v),
            ParamValue::Text(_) => None,
        }
    }

    /// Representation used for hashing; floats by bit pattern.
    fn canonical_repr(&self) -> String {
        match self {
            ParamValue::Int(v) => format!("i{v}"),
            ParamValue::Float(v) => format!("f{:016x}", v.to_bits()),
            ParamValue::Text(s) => format!("s{s}"),
        }
    }
}

impl fmt::Display for ParamValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParamValue::Int(v) => write!(f, "{v}"),
            ParamValue::Float(v) => write!(f, "{v}"),
            ParamValue::Text(s) => f.write_str(s),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Comparator {
    Gt,
    Ge,
    Lt,
    Le,
    Eq,
    Ne,
}

impl Comparator {
    fn symbol(self) -> &'static str {
        match self {
            Comparator::Gt => ">",
            Comparator::Ge => ">=",
            Comparator::Lt => "<",
            Comparator::Le => "<=",
            Comparator::Eq => "==",
            Comparator::Ne => "!=",
        }
    }

    fn holds(self, lhs: f64, rhs: f64) -> bool {
        match self {
            Comparator::Gt => lhs > rhs,
            Comparator::Ge => lhs >= rhs,
            Comparator::Lt => lhs < rhs,
            Comparator::Le => lhs <= rhs,
            Comparator::Eq => lhs == rhs,
            Comparator::Ne => lhs != rhs,
        }
    }
}

/// Activation predicate `<param> <comparator> <value>`.
#[derive(Debug, Clone, PartialEq)]
pub struct Condition {
    pub param: String,
    pub op: Comparator,
    pub value: f64,
}

impl Condition {
    pub fn parse(text: &str) -> Result<Self> {
        let parts: Vec<&str> = text.split_whitespace().collect();
        let [param, op, value] = parts.as_slice() else {
            return Err(Error::Config(format!("condition `{text}` must read `<param> <op> <value>`")));
        };
        let op = match *op {
            ">" => Comparator::Gt,
            ">=" => Comparator::Ge,
            "<" => Comparator::Lt,
            "<=" => Comparator::Le,
            "==" => Comparator::Eq,
            "!=" => Comparator::Ne,
            other => return Err(Error::Config(format!("unknown comparator `{other}` in `{text}`"))),
        };
        let value = value
            .parse::<f64>()
            .map_err(|e| Error::Config(format!("condition `{text}`: {e}")))?;
        Ok(Condition {
            param: param.to_string(),
            op,
            value,
        })
    }

    pub fn holds(&self, lhs: f64) -> bool {
        self.op.holds(lhs, self.value)
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {}", self.param, self.op.symbol(), self.value)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamDescriptor {
    pub name: String,
    pub kind: ParamKind,
    pub lo: f64,
    pub hi: f64,
    /// Present iff `kind` is `Fixed`.
    pub fixed_value: Option<ParamValue>,
    pub active_if: Option<Condition>,
}

impl ParamDescriptor {
    pub fn float(name: &str, lo: f64, hi: f64) -> Self {
        Self::ranged(name, ParamKind::Float, lo, hi)
    }

    pub fn int(name: &str, lo: i64, hi: i64) -> Self {
        Self::ranged(name, ParamKind::Int, lo as f64, hi as f64)
    }

    pub fn even_int(name: &str, lo: i64, hi: i64) -> Self {
        Self::ranged(name, ParamKind::EvenInt, lo as f64, hi as f64)
    }

    pub fn fixed(name: &str, value: ParamValue) -> Self {
        let v = value.as_f64().unwrap_or(0.0);
        ParamDescriptor {
            name: name.to_string(),
            kind: ParamKind::Fixed,
            lo: v,
            hi: v,
            fixed_value: Some(value),
            active_if: None,
        }
    }

    fn ranged(name: &str, kind: ParamKind, lo: f64, hi: f64) -> Self {
        ParamDescriptor {
            name: name.to_string(),
            kind,
            lo,
            hi,
            fixed_value: None,
            active_if: None,
        }
    }

    pub fn active_if(mut self, condition: Condition) -> Self {
        self.active_if = Some(condition);
        self
    }

    pub fn is_fixed(&self) -> bool {
        self.kind == ParamKind::Fixed
    }

    fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(format!("parameter {}: {msg}", self.name)));
        if self.name.is_empty() || self.name.contains(char::is_whitespace) {
            return fail("name must be a non-empty identifier".into());
        }
        match self.kind {
            ParamKind::Fixed => {
                if self.fixed_value.is_none() {
                    return fail("fixed parameter needs a value".into());
                }
                if self.active_if.is_some() {
                    return fail("fixed parameter cannot be conditional".into());
                }
            }
            kind => {
                if self.fixed_value.is_some() {
                    return fail("only fixed parameters carry a value".into());
                }
                if !(self.lo.is_finite() && self.hi.is_finite()) || self.lo > self.hi {
                    return fail(format!("invalid span [{}, {}]", self.lo, self.hi));
                }
                let integral = |v: f64| v.fract() == 0.0;
                if kind != ParamKind::Float && !(integral(self.lo) && integral(self.hi)) {
                    return fail("integer span needs integer endpoints".into());
                }
                if kind == ParamKind::EvenInt && (self.lo as i64 % 2 != 0 || self.hi as i64 % 2 != 0) {
                    return fail("even-int span needs even endpoints".into());
                }
            }
        }
        Ok(())
    }

    /// Value a raw gene maps to (clamped and rounded for the kind).
    fn snap(&self, raw: f64) -> ParamValue {
        let x = if raw.is_nan() { self.lo } else { raw.clamp(self.lo, self.hi) };
        match self.kind {
            ParamKind::Float => ParamValue::Float(x),
            ParamKind::Int => ParamValue::Int((x + 0.5).floor() as i64),
            ParamKind::EvenInt => {
                let v = 2.0 * (x / 2.0 + 0.5).floor();
                ParamValue::Int(v.clamp(self.lo, self.hi) as i64)
            }
            ParamKind::Fixed => self.fixed_value.clone().expect("validated fixed value"),
        }
    }

    /// Canonical value carried by an inactive parameter.
    fn canonical(&self) -> ParamValue {
        self.snap(self.lo)
    }
}

/// Ordered parameter descriptors; genes are the non-fixed parameters in order.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchSpace {
    params: Vec<ParamDescriptor>,
    genes: Vec<usize>,
}

impl SearchSpace {
    pub fn new(params: Vec<ParamDescriptor>) -> Result<Self> {
        if params.is_empty() {
            return Err(Error::Config("search space has no parameters".into()));
        }
        for (i, p) in params.iter().enumerate() {
            p.validate()?;
            if params[..i].iter().any(|q| q.name == p.name) {
                return Err(Error::Config(format!("parameter {} defined twice", p.name)));
            }
        }
        for p in &params {
            if let Some(c) = &p.active_if {
                let Some(target) = params.iter().find(|q| q.name == c.param) else {
                    return Err(Error::Config(format!(
                        "parameter {} depends on unknown parameter {}",
                        p.name, c.param
                    )));
                };
                if target.name == p.name || target.active_if.is_some() {
                    return Err(Error::Config(format!(
                        "parameter {} must depend on an unconditional parameter",
                        p.name
                    )));
                }
                if target.fixed_value.as_ref().is_some_and(|v| v.as_f64().is_none()) {
                    return Err(Error::Config(format!("parameter {} depends on a text parameter", p.name)));
                }
            }
        }
        let genes = params
            .iter()
            .enumerate()
            .filter(|(_, p)| !p.is_fixed())
            .map(|(i, _)| i)
            .collect();
        Ok(SearchSpace { params, genes })
    }

    /// The bundled default space. `gate` resolves the physics-derived area gate.
    pub fn standard(gate: AreaGate) -> Self {
        SpaceDocument::bundled()
            .resolve(gate)
            .expect("bundled space document is valid")
    }

    pub fn params(&self) -> &[ParamDescriptor] {
        &self.params
    }

    pub fn param(&self, name: &str) -> Option<&ParamDescriptor> {
        self.params.iter().find(|p| p.name == name)
    }

    pub fn genome_len(&self) -> usize {
        self.genes.len()
    }

    /// Descriptors of the genome positions, in order.
    pub fn gene_params(&self) -> impl Iterator<Item = &ParamDescriptor> + '_ {
        self.genes.iter().map(|&i| &self.params[i])
    }

    /// Per-gene `(lo, hi)` bounds.
    pub fn gene_bounds(&self) -> Vec<(f64, f64)> {
        self.gene_params().map(|p| (p.lo, p.hi)).collect()
    }

    /// Opt-in deeper crop pyramid: widens `crop_n_layers` to 0-3.
    pub fn with_deep_crops(mut self) -> Self {
        if let Some(p) = self.params.iter_mut().find(|p| p.name == "crop_n_layers") {
            if !p.is_fixed() {
                p.hi = p.hi.max(3.0);
            }
        }
        self
    }

    /// Vector at the middle of every span.
    pub fn midpoint(&self) -> HyperparamVector {
        let genome: Vec<f64> = self.gene_params().map(|p| 0.5 * (p.lo + p.hi)).collect();
        repair(self, &genome).expect("genome length matches")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn standard() -> SearchSpace {
        SearchSpace::standard(AreaGate::Span { max: 4096 })
    }

    #[test]
    fn standard_matches_the_documented_rows() {
        let space = standard();
        assert_eq!(space.params().len(), 13);
        let fixed: Vec<&str> = space.params().iter().filter(|p| p.is_fixed()).map(|p| p.name.as_str()).collect();
        assert_eq!(fixed, ["stability_score_offset", "points_per_batch", "output_mode", "point_grids"]);
        let conditional: Vec<&str> = space
            .params()
            .iter()
            .filter(|p| p.active_if.is_some())
            .map(|p| p.name.as_str())
            .collect();
        assert_eq!(conditional, ["crop_nms_thresh", "crop_overlap_ratio", "crop_n_points_downscale_factor"]);
        let span = |n: &str| {
            let p = space.param(n).unwrap();
            (p.lo, p.hi)
        };
        assert_eq!(span("pred_iou_thresh"), (0.85, 0.99));
        assert_eq!(span("stability_score_thresh"), (0.90, 0.99));
        assert_eq!(span("box_nms_thresh"), (0.20, 0.70));
        assert_eq!(span("crop_nms_thresh"), (0.20, 0.70));
        assert_eq!(span("points_per_side"), (6.0, 64.0));
        assert_eq!(space.param("points_per_side").unwrap().kind, ParamKind::EvenInt);
        assert_eq!(span("crop_n_layers"), (0.0, 2.0));
        assert_eq!(span("crop_overlap_ratio"), (0.20, 0.60));
        assert_eq!(span("crop_n_points_downscale_factor"), (1.0, 4.0));
        assert_eq!(span("min_mask_region_area"), (0.0, 4096.0));
        assert_eq!(space.param("stability_score_offset").unwrap().fixed_value, Some(ParamValue::Float(1.0)));
        assert_eq!(space.genome_len(), 9);
    }

    #[test]
    fn deep_crops_are_opt_in() {
        assert_eq!(standard().with_deep_crops().param("crop_n_layers").unwrap().hi, 3.0);
    }

    #[test]
    fn descriptor_invariants() {
        assert!(SearchSpace::new(vec![ParamDescriptor::float("a", 1.0, 0.0)]).is_err());
        assert!(SearchSpace::new(vec![ParamDescriptor::even_int("a", 1, 8)]).is_err());
        assert!(SearchSpace::new(vec![ParamDescriptor::int("a", 0, 2), ParamDescriptor::int("a", 0, 2)]).is_err());
        let dangling = ParamDescriptor::float("a", 0.0, 1.0).active_if(Condition::parse("b > 0").unwrap());
        assert!(SearchSpace::new(vec![dangling]).is_err());
        assert!(SearchSpace::new(vec![]).is_err());
    }

    #[test]
    fn conditions_parse() {
        let c = Condition::parse("crop_n_layers > 0").unwrap();
        assert!(c.holds(1.0) && !c.holds(0.0));
        assert_eq!(c.to_string(), "crop_n_layers > 0");
        assert!(Condition::parse("x ~ 1").is_err());
        assert!(Condition::parse("x >").is_err());
    }

    #[test]
    fn midpoint_snaps() {
        let mid = standard().midpoint();
        assert_eq!(mid.get("points_per_side"), Some(&ParamValue::Int(36)));
        assert_eq!(mid.get("crop_n_layers"), Some(&ParamValue::Int(1)));
        assert!((mid.get("pred_iou_thresh").unwrap().as_f64().unwrap() - 0.92).abs() < 1e-12);
    }
}

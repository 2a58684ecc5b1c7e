use std::collections::BTreeMap;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{ParamKind, ParamValue, SearchSpace};
use crate::error::{Error, Result};

/// Stable identifier of a repaired, canonicalized hyperparameter vector.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct GenomeHash(String);

impl GenomeHash {
    pub fn as_str(&self) -> &str {
        &self.0
    }

    /// First 64 bits, for seeding per-individual streams.
    pub fn as_u64(&self) -> u64 {
        u64::from_str_radix(&self.0, 16).expect("hash is hex")
    }
}

impl fmt::Display for GenomeHash {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Entry {
    name: String,
    value: ParamValue,
    active: bool,
    /// Value used for hashing and evaluation.
    canonical: ParamValue,
}

/// A complete assignment of a search space, plus its genome.
#[derive(Debug, Clone, PartialEq)]
pub struct HyperparamVector {
    entries: Vec<Entry>,
    genome: Vec<f64>,
    hash: GenomeHash,
}

impl HyperparamVector {
    /// Genome over the non-fixed parameters, in descriptor order.
    pub fn genome(&self) -> &[f64] {
        &self.genome
    }

    pub fn hash(&self) -> &GenomeHash {
        &self.hash
    }

    pub fn get(&self, name: &str) -> Option<&ParamValue> {
        self.entries.iter().find(|e| e.name == name).map(|e| &e.value)
    }

    pub fn is_active(&self, name: &str) -> Option<bool> {
        self.entries.iter().find(|e| e.name == name).map(|e| e.active)
    }

    /// `(name, value, active)` in descriptor order.
    pub fn iter(&self) -> impl Iterator<Item = (&str, &ParamValue, bool)> + '_ {
        self.entries.iter().map(|e| (e.name.as_str(), &e.value, e.active))
    }

    /// Name to value map with inactive parameters replaced by their canonical
    /// value. This is what segmenters receive.
    pub fn canonical_map(&self) -> BTreeMap<String, ParamValue> {
        self.entries
            .iter()
            .map(|e| (e.name.clone(), e.canonical.clone()))
            .collect()
    }

    pub fn canonical(&self, name: &str) -> Option<&ParamValue> {
        self.entries.iter().find(|e| e.name == name).map(|e| &e.canonical)
    }
}

/// Maps a raw genome onto the space: clamp to span, round integers half up,
/// snap even integers to the nearest even value (ties upward) and flag
/// conditional parameters whose predicate is false.
pub fn repair(space: &SearchSpace, raw: &[f64]) -> Result<HyperparamVector> {
    if raw.len() != space.genome_len() {
        return Err(Error::invalid(format!(
            "genome has {} genes, space expects {}",
            raw.len(),
            space.genome_len()
        )));
    }
    let mut values: Vec<ParamValue> = Vec::with_capacity(space.params().len());
    let mut genes = raw.iter();
    for p in space.params() {
        let v = if p.is_fixed() {
            p.fixed_value.clone().expect("validated fixed value")
        } else {
            p.snap(*genes.next().expect("length checked"))
        };
        values.push(v);
    }
    Ok(assemble(space, values))
}

fn assemble(space: &SearchSpace, values: Vec<ParamValue>) -> HyperparamVector {
    let lookup = |name: &str| -> Option<f64> {
        let i = space.params().iter().position(|p| p.name == name)?;
        values[i].as_f64()
    };
    let entries: Vec<Entry> = space
        .params()
        .iter()
        .zip(&values)
        .map(|(p, v)| {
            let active = match &p.active_if {
                None => true,
                Some(c) => lookup(&c.param).is_some_and(|x| c.holds(x)),
            };
            Entry {
                name: p.name.clone(),
                value: v.clone(),
                active,
                canonical: if active { v.clone() } else { p.canonical() },
            }
        })
        .collect();
    let genome = space
        .params()
        .iter()
        .zip(&values)
        .filter(|(p, _)| !p.is_fixed())
        .map(|(_, v)| v.as_f64().expect("ranged parameters are numeric"))
        .collect();
    let hash = hash_entries(&entries);
    HyperparamVector { entries, genome, hash }
}

fn hash_entries(entries: &[Entry]) -> GenomeHash {
    let mut h = Sha256::new();
    for e in entries {
        h.update(e.name.as_bytes());
        h.update(b"=");
        h.update(e.canonical.canonical_repr().as_bytes());
        h.update(b";");
    }
    let digest = h.finalize();
    GenomeHash(digest[..8].iter().map(|b| format!("{b:02x}")).collect())
}

/// Hash of the canonicalized vector: inactive parameters do not contribute
/// their carried value.
pub fn genome_hash(v: &HyperparamVector) -> GenomeHash {
    v.hash.clone()
}

/// Independent uniform draw per non-fixed parameter, deterministic in `seed`.
pub fn sample(space: &SearchSpace, seed: u64) -> HyperparamVector {
    sample_with(space, &mut ChaCha8Rng::seed_from_u64(seed))
}

pub fn sample_with<R: Rng + ?Sized>(space: &SearchSpace, rng: &mut R) -> HyperparamVector {
    let values = space
        .params()
        .iter()
        .map(|p| match p.kind {
            ParamKind::Fixed => p.fixed_value.clone().expect("validated fixed value"),
            ParamKind::Float => ParamValue::Float(if p.lo == p.hi { p.lo } else { rng.random_range(p.lo..=p.hi) }),
            ParamKind::Int => ParamValue::Int(rng.random_range(p.lo as i64..=p.hi as i64)),
            ParamKind::EvenInt => ParamValue::Int(2 * rng.random_range(p.lo as i64 / 2..=p.hi as i64 / 2)),
        })
        .collect();
    assemble(space, values)
}

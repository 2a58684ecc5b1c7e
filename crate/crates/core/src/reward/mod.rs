//! Reward functions scoring a [`MaskSet`].
//!
//! - Overlap fidelity: `(1 + O) / (1 + alpha*D + beta*B)` where `O` counts
//!   partially overlapping pairs, `D` near-duplicate pairs and `B` masks much
//!   larger than the median.
//! - Circularity `4*pi*A / P^2` and bounding box aspect ratio per mask,
//!   aggregated over the set.
//! - Small-object sensitivity `mean(1 / (A + eps))` and large-object coverage
//!   `mean(A)`, which pull in opposite directions.
//!
//! Every objective is maximised.

mod spec;

use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};

pub use spec::{Aggregator, RewardSpec};

use crate::error::{Error, Result};
use crate::mask::{Mask, MaskSet};
use crate::synth::ShapeKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectiveId {
    OverlapFidelity,
    Circularity,
    AspectRatio,
    SmallSensitivity,
    LargeCoverage,
}

impl ObjectiveId {
    pub const ALL: [ObjectiveId; 5] = [
        ObjectiveId::OverlapFidelity,
        ObjectiveId::Circularity,
        ObjectiveId::AspectRatio,
        ObjectiveId::SmallSensitivity,
        ObjectiveId::LargeCoverage,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ObjectiveId::OverlapFidelity => "overlap_fidelity",
            ObjectiveId::Circularity => "circularity",
            ObjectiveId::AspectRatio => "aspect_ratio",
            ObjectiveId::SmallSensitivity => "small_sensitivity",
            ObjectiveId::LargeCoverage => "large_coverage",
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|o| o.name() == name)
            .ok_or_else(|| Error::Config(format!("unknown objective `{name}`")))
    }
}

impl fmt::Display for ObjectiveId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Named objective values in the order of the reward spec's objective list.
/// Every objective is maximised.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveVector {
    entries: Vec<(String, f64)>,
}

impl ObjectiveVector {
    pub fn new<S: Into<String>>(entries: impl IntoIterator<Item = (S, f64)>) -> Result<Self> {
        let entries: Vec<(String, f64)> = entries.into_iter().map(|(k, v)| (k.into(), v)).collect();
        if let Some((id, v)) = entries.iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::invalid(format!("objective {id} is not finite: {v}")));
        }
        Ok(ObjectiveVector { entries })
    }

    pub fn names(&self) -> impl Iterator<Item = &str> + '_ {
        self.entries.iter().map(|e| e.0.as_str())
    }

    pub fn values(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.1).collect()
    }

    pub fn value(&self, i: usize) -> f64 {
        self.entries[i].1
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.entries.iter().find(|e| e.0 == name).map(|e| e.1)
    }

    pub fn entries(&self) -> &[(String, f64)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Whether both vectors name the same objectives in the same order.
    pub fn same_objectives(&self, other: &ObjectiveVector) -> bool {
        self.entries.len() == other.entries.len()
            && self.entries.iter().zip(&other.entries).all(|(a, b)| a.0 == b.0)
    }
}

/// Unordered pairs `i < j` with `tau_low <= IoU <= tau_high`.
pub fn overlap_count(set: &MaskSet, spec: &RewardSpec) -> u64 {
    set.pairwise_iou()
        .iter()
        .filter(|&(_, _, v)| v >= spec.tau_low && v <= spec.tau_high)
        .count() as u64
}

/// Unordered pairs with `IoU >= tau_dup`.
pub fn duplicate_count(set: &MaskSet, spec: &RewardSpec) -> u64 {
    set.pairwise_iou().iter().filter(|&(_, _, v)| v >= spec.tau_dup).count() as u64
}

/// Median of the areas; the mean of the two middle values for even counts.
pub fn median_area(areas: &[u64]) -> Option<f64> {
    if areas.is_empty() {
        return None;
    }
    let mut sorted = areas.to_vec();
    sorted.sort_unstable();
    let n = sorted.len();
    Some(if n % 2 == 1 {
        sorted[n / 2] as f64
    } else {
        (sorted[n / 2 - 1] as f64 + sorted[n / 2] as f64) / 2.0
    })
}

/// Masks whose area is at least `gamma` times the median area of the set.
pub fn merged_count(set: &MaskSet, spec: &RewardSpec) -> u64 {
    let areas = set.areas();
    let Some(median) = median_area(&areas) else {
        return 0;
    };
    let cutoff = spec.gamma * median;
    areas.iter().filter(|&&a| a as f64 >= cutoff).count() as u64
}

/// The three counts behind the overlap reward, computed from one IoU pass.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct OverlapCounts {
    pub overlapping: u64,
    pub duplicates: u64,
    pub merged: u64,
}

impl OverlapCounts {
    pub fn of(set: &MaskSet, spec: &RewardSpec) -> Self {
        let mut counts = OverlapCounts {
            merged: merged_count(set, spec),
            ..Default::default()
        };
        for (_, _, v) in set.pairwise_iou().iter() {
            if v >= spec.tau_low && v <= spec.tau_high {
                counts.overlapping += 1;
            }
            if v >= spec.tau_dup {
                counts.duplicates += 1;
            }
        }
        counts
    }

    pub fn reward(&self, spec: &RewardSpec) -> f64 {
        (1.0 + self.overlapping as f64)
            / (1.0 + spec.alpha * self.duplicates as f64 + spec.beta * self.merged as f64)
    }
}

pub fn overlap_reward(set: &MaskSet, spec: &RewardSpec) -> f64 {
    OverlapCounts::of(set, spec).reward(spec)
}

pub fn circularity(mask: &Mask) -> f64 {
    let p = mask.perimeter();
    4.0 * PI * mask.area() as f64 / (p * p)
}

pub fn aspect_ratio(mask: &Mask) -> f64 {
    let bb = mask.bbox();
    let (w, h) = (bb.width() as f64, bb.height() as f64);
    (w / h).max(h / w)
}

/// Mean of `1 / (A + eps)`; 0 for an empty set.
pub fn small_sensitivity_reward(set: &MaskSet, spec: &RewardSpec) -> f64 {
    if set.is_empty() {
        return 0.0;
    }
    let sum: f64 = set.masks().iter().map(|m| 1.0 / (m.area() as f64 + spec.epsilon)).sum();
    sum / set.len() as f64
}

/// Mean mask area; 0 for an empty set.
pub fn large_coverage_reward(set: &MaskSet) -> f64 {
    if set.is_empty() {
        return 0.0;
    }
    set.masks().iter().map(|m| m.area() as f64).sum::<f64>() / set.len() as f64
}

fn aggregate(values: &mut [f64], how: Aggregator) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    match how {
        Aggregator::Mean => values.iter().sum::<f64>() / values.len() as f64,
        Aggregator::Median => {
            values.sort_by(|a, b| a.total_cmp(b));
            let n = values.len();
            if n % 2 == 1 {
                values[n / 2]
            } else {
                (values[n / 2 - 1] + values[n / 2]) / 2.0
            }
        }
    }
}

/// Set-level circularity: per-mask values combined with the spec's aggregator; 0 when empty.
pub fn circularity_score(set: &MaskSet, how: Aggregator) -> f64 {
    let mut v: Vec<f64> = set.masks().iter().map(circularity).collect();
    aggregate(&mut v, how)
}

/// Set-level aspect ratio: per-mask values combined with the spec's aggregator; 0 when empty.
pub fn aspect_ratio_score(set: &MaskSet, how: Aggregator) -> f64 {
    let mut v: Vec<f64> = set.masks().iter().map(aspect_ratio).collect();
    aggregate(&mut v, how)
}

pub fn objective_value(set: &MaskSet, spec: &RewardSpec, id: ObjectiveId) -> f64 {
    match id {
        ObjectiveId::OverlapFidelity => overlap_reward(set, spec),
        ObjectiveId::Circularity => circularity_score(set, spec.aggregate),
        ObjectiveId::AspectRatio => aspect_ratio_score(set, spec.aggregate),
        ObjectiveId::SmallSensitivity => small_sensitivity_reward(set, spec),
        ObjectiveId::LargeCoverage => large_coverage_reward(set),
    }
}

/// Round or elongated, from the two descriptors: an aspect ratio of at
/// least 2 or a circularity under 0.85 reads as a rectangle.
pub fn classify_shape(mask: &Mask) -> ShapeKind {
    if aspect_ratio(mask) >= 2.0 || circularity(mask) < 0.85 {
        ShapeKind::Rectangle
    } else {
        ShapeKind::Disk
    }
}

/// Largest pairwise Euclidean distance between points after min-max
/// normalizing each objective over the set (a constant objective adds 0).
pub fn front_spread(points: &[Vec<f64>]) -> f64 {
    let Some(dims) = points.first().map(Vec::len) else {
        return 0.0;
    };
    let scaled: Vec<Vec<f64>> = {
        let ranges: Vec<(f64, f64)> = (0..dims)
            .map(|k| {
                points
                    .iter()
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| (lo.min(p[k]), hi.max(p[k])))
            })
            .collect();
        points
            .iter()
            .map(|p| {
                p.iter()
                    .zip(&ranges)
                    .map(|(&v, &(lo, hi))| if hi > lo { (v - lo) / (hi - lo) } else { 0.0 })
                    .collect()
            })
            .collect()
    };
    let mut best = 0.0f64;
    for (i, a) in scaled.iter().enumerate() {
        for b in &scaled[i + 1..] {
            let d = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
            best = best.max(d);
        }
    }
    best
}

/// Scores a mask set on every active objective of `spec`, in spec order.
pub fn evaluate(set: &MaskSet, spec: &RewardSpec) -> ObjectiveVector {
    let entries = spec
        .objectives
        .iter()
        .map(|&id| (id.name(), objective_value(set, spec, id)))
        .collect::<Vec<_>>();
    ObjectiveVector::new(entries).expect("rewards of a valid spec are finite")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mask::Run;

    fn square(x: u32, y: u32, s: u32) -> Mask {
        Mask::from_runs(64, 64, (y..y + s).map(|r| Run::new(r, x, s))).unwrap()
    }

    fn block(x: u32, y: u32, w: u32, h: u32) -> Mask {
        Mask::from_runs(64, 64, (y..y + h).map(|r| Run::new(r, x, w))).unwrap()
    }

    fn set(masks: Vec<Mask>) -> MaskSet {
        MaskSet::new(64, 64, masks).unwrap()
    }

    fn spec() -> RewardSpec {
        RewardSpec::default()
    }

    #[test]
    fn counts_on_empty_and_singleton() {
        let s = spec();
        for ms in [set(vec![]), set(vec![square(0, 0, 5)])] {
            assert_eq!(overlap_count(&ms, &s), 0);
            assert_eq!(duplicate_count(&ms, &s), 0);
        }
        assert_eq!(merged_count(&set(vec![]), &s), 0);
        assert_eq!(merged_count(&set(vec![square(0, 0, 5)]), &s), 0);
    }

    #[test]
    fn one_third_iou_pair() {
        // 10x10 squares shifted 5 columns: IoU = 50 / 150
        let ms = set(vec![square(0, 0, 10), square(5, 0, 10)]);
        assert_eq!(overlap_count(&ms, &spec()), 1);
        assert_eq!(duplicate_count(&ms, &spec()), 0);
    }

    #[test]
    fn identical_pair_is_duplicate() {
        let ms = set(vec![square(3, 3, 6), square(3, 3, 6)]);
        assert_eq!(duplicate_count(&ms, &spec()), 1);
        assert_eq!(overlap_count(&ms, &spec()), 0);
        assert_eq!(overlap_reward(&ms, &spec()), 0.5);
    }

    #[test]
    fn merged_uses_median_of_all_masks() {
        // areas 100, 100, 100, 400 -> median 100, one mask >= 300
        let ms = set(vec![square(0, 0, 10), square(12, 0, 10), square(24, 0, 10), square(40, 40, 20)]);
        assert_eq!(merged_count(&ms, &spec()), 1);
        let mut s = spec();
        s.gamma = 1.0;
        let uniform = set(vec![square(0, 0, 10), square(12, 0, 10)]);
        assert_eq!(merged_count(&uniform, &s), 2);
        assert_eq!(median_area(&[1, 3, 10, 4]), Some(3.5));
    }

    #[test]
    fn overlap_reward_substitution() {
        let s = spec();
        assert_eq!(overlap_reward(&set(vec![]), &s), 1.0);
        let c = OverlapCounts { overlapping: 3, duplicates: 1, merged: 0 };
        assert_eq!(c.reward(&s), 2.0);
        assert_eq!(OverlapCounts::default().reward(&s), 1.0);
    }

    #[test]
    fn aspect_ratio_examples() {
        assert_eq!(aspect_ratio(&square(0, 0, 7)), 1.0);
        assert_eq!(aspect_ratio(&block(0, 0, 30, 10)), 3.0);
        assert_eq!(aspect_ratio(&block(0, 0, 10, 30)), 3.0);
    }

    #[test]
    fn circularity_orders_rectangle_below_square() {
        // 30x10 and the closest-area square (17x17 = 289 vs 300)
        assert!(circularity(&block(0, 0, 30, 10)) < circularity(&square(0, 0, 17)));
    }

    #[test]
    fn size_rewards() {
        let mut s = spec();
        s.epsilon = 0.0;
        let one = set(vec![square(0, 0, 10)]);
        assert_eq!(small_sensitivity_reward(&one, &s), 0.01);
        assert_eq!(large_coverage_reward(&one), 100.0);
        let two = set(vec![square(0, 0, 10), square(20, 20, 20)]);
        assert_eq!(small_sensitivity_reward(&two, &s), 0.00625);
        assert_eq!(large_coverage_reward(&two), 250.0);
        assert_eq!(small_sensitivity_reward(&set(vec![]), &s), 0.0);
        assert_eq!(large_coverage_reward(&set(vec![])), 0.0);
    }

    #[test]
    fn evaluate_follows_spec_order() {
        let mut s = spec();
        s.epsilon = 0.0;
        s.objectives = vec![ObjectiveId::SmallSensitivity, ObjectiveId::LargeCoverage];
        let two = set(vec![square(0, 0, 10), square(20, 20, 20)]);
        assert_eq!(evaluate(&two, &s).values(), vec![0.00625, 250.0]);

        s.objectives = vec![ObjectiveId::OverlapFidelity];
        assert_eq!(evaluate(&set(vec![]), &s).values(), vec![1.0]);
    }

    #[test]
    fn morphology_on_squares() {
        let mut s = spec();
        s.objectives = vec![ObjectiveId::Circularity, ObjectiveId::AspectRatio];
        let squares = set(vec![square(0, 0, 8), square(20, 20, 8)]);
        let v = evaluate(&squares, &s).values();
        let expected = 4.0 * PI * 64.0 / (28.0 * 28.0);
        assert!((v[0] - expected).abs() < 1e-12);
        assert_eq!(v[1], 1.0);
    }

    #[test]
    fn median_aggregator() {
        let ms = set(vec![block(0, 0, 3, 1), block(0, 5, 5, 1), block(0, 10, 2, 2)]);
        assert_eq!(aspect_ratio_score(&ms, Aggregator::Median), 3.0);
        assert_eq!(aspect_ratio_score(&ms, Aggregator::Mean), 3.0);
        assert_eq!(aspect_ratio_score(&set(vec![]), Aggregator::Median), 0.0);
    }

    #[test]
    fn objective_names_round_trip() {
        for id in ObjectiveId::ALL {
            assert_eq!(ObjectiveId::parse(id.name()).unwrap(), id);
        }
        assert!(ObjectiveId::parse("bogus").is_err());
    }
}

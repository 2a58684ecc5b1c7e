use std::cmp::Ordering;

use crate::error::{Error, Result};
use crate::reward::ObjectiveVector;

/// Maximisation dominance on raw values: `a >= b` everywhere and `a > b` somewhere.
pub fn dominates_values(a: &[f64], b: &[f64]) -> bool {
    debug_assert_eq!(a.len(), b.len());
    let mut strictly = false;
    for (x, y) in a.iter().zip(b) {
        if x < y {
            return false;
        }
        if x > y {
            strictly = true;
        }
    }
    strictly
}

pub fn dominates(a: &ObjectiveVector, b: &ObjectiveVector) -> Result<bool> {
    if !a.same_objectives(b) {
        return Err(Error::invalid(format!(
            "objective lists differ: {:?} vs {:?}",
            a.names().collect::<Vec<_>>(),
            b.names().collect::<Vec<_>>()
        )));
    }
    Ok(dominates_values(&a.values(), &b.values()))
}

/// Partitions `points` into successive non-dominated fronts of indices.
/// Indices within a front are ascending.
pub fn fast_nondominated_sort(points: &[Vec<f64>]) -> Vec<Vec<usize>> {
    let n = points.len();
    let mut dominated_by_me: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut dominators = vec![0usize; n];
    for i in 0..n {
        for j in i + 1..n {
            if dominates_values(&points[i], &points[j]) {
                dominated_by_me[i].push(j);
                dominators[j] += 1;
            } else if dominates_values(&points[j], &points[i]) {
                dominated_by_me[j].push(i);
                dominators[i] += 1;
            }
        }
    }
    let mut fronts = Vec::new();
    let mut current: Vec<usize> = (0..n).filter(|&i| dominators[i] == 0).collect();
    while !current.is_empty() {
        let mut next = Vec::new();
        for &i in &current {
            for &j in &dominated_by_me[i] {
                dominators[j] -= 1;
                if dominators[j] == 0 {
                    next.push(j);
                }
            }
        }
        next.sort_unstable();
        fronts.push(current);
        current = next;
    }
    fronts
}

/// Crowding distance of each point of one front.
///
/// Fronts of at most two points are all `+inf`. Per objective the two
/// boundary points get `+inf` and interior points the normalised gap between
/// their neighbours. An objective with zero range contributes nothing.
pub fn crowding_distance(front: &[Vec<f64>]) -> Vec<f64> {
    let n = front.len();
    if n <= 2 {
        return vec![f64::INFINITY; n];
    }
    let m = front[0].len();
    let mut distance = vec![0.0; n];
    let mut order: Vec<usize> = (0..n).collect();
    for k in 0..m {
        order.sort_by(|&a, &b| front[a][k].partial_cmp(&front[b][k]).unwrap_or(Ordering::Equal).then(a.cmp(&b)));
        let lo = front[order[0]][k];
        let hi = front[order[n - 1]][k];
        let range = hi - lo;
        if !(range > 0.0) {
            continue;
        }
        distance[order[0]] = f64::INFINITY;
        distance[order[n - 1]] = f64::INFINITY;
        for w in 1..n - 1 {
            let i = order[w];
            distance[i] += (front[order[w + 1]][k] - front[order[w - 1]][k]) / range;
        }
    }
    distance
}

//! Real-coded genetic operators on bounded genomes.

use rand::Rng;

const EPS: f64 = 1e-14;

/// Simulated binary crossover with bounds, applied gene by gene with
/// probability 1/2.
pub fn sbx<R: Rng + ?Sized>(rng: &mut R, p1: &[f64], p2: &[f64], bounds: &[(f64, f64)], eta: f64) -> (Vec<f64>, Vec<f64>) {
    let mut c1 = p1.to_vec();
    let mut c2 = p2.to_vec();
    for (i, &(lo, hi)) in bounds.iter().enumerate() {
        if rng.random::<f64>() > 0.5 {
            continue;
        }
        if (p1[i] - p2[i]).abs() <= EPS || hi - lo <= 0.0 {
            continue;
        }
        let (y1, y2) = if p1[i] < p2[i] { (p1[i], p2[i]) } else { (p2[i], p1[i]) };
        let u: f64 = rng.random();
        let spread = |beta: f64| {
            let alpha = 2.0 - beta.powf(-(eta + 1.0));
            if u <= 1.0 / alpha {
                (u * alpha).powf(1.0 / (eta + 1.0))
            } else {
                (1.0 / (2.0 - u * alpha)).powf(1.0 / (eta + 1.0))
            }
        };
        let bq1 = spread(1.0 + 2.0 * (y1 - lo) / (y2 - y1));
        let bq2 = spread(1.0 + 2.0 * (hi - y2) / (y2 - y1));
        let a = (0.5 * ((y1 + y2) - bq1 * (y2 - y1))).clamp(lo, hi);
        let b = (0.5 * ((y1 + y2) + bq2 * (y2 - y1))).clamp(lo, hi);
        if rng.random::<bool>() {
            c1[i] = b;
            c2[i] = a;
        } else {
            c1[i] = a;
            c2[i] = b;
        }
    }
    (c1, c2)
}

/// Bounded polynomial mutation, each gene mutated with probability `p`.
pub fn polynomial_mutation<R: Rng + ?Sized>(rng: &mut R, genome: &mut [f64], bounds: &[(f64, f64)], eta: f64, p: f64) {
    for (y, &(lo, hi)) in genome.iter_mut().zip(bounds) {
        if rng.random::<f64>() >= p {
            continue;
        }
        let span = hi - lo;
        if span <= 0.0 {
            continue;
        }
        let d1 = (*y - lo) / span;
        let d2 = (hi - *y) / span;
        let u: f64 = rng.random();
        let pow = 1.0 / (eta + 1.0);
        let dq = if u < 0.5 {
            let val = 2.0 * u + (1.0 - 2.0 * u) * (1.0 - d1).powf(eta + 1.0);
            val.powf(pow) - 1.0
        } else {
            let val = 2.0 * (1.0 - u) + 2.0 * (u - 0.5) * (1.0 - d2).powf(eta + 1.0);
            1.0 - val.powf(pow)
        };
        *y = (*y + dq * span).clamp(lo, hi);
    }
}

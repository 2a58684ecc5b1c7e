//! NSGA-II on a one-variable two-objective problem whose Pareto set is
//! x in [0, 2].
//!
//! cargo run --example nsga2_toy

use samstar::nsga2::{evolve, select_tradeoff, FnEvaluator, GaConfig};
use samstar::space::{ParamDescriptor, SearchSpace};
use samstar::ObjectiveVector;

fn main() -> samstar::Result<()> {
    let space = SearchSpace::new(vec![ParamDescriptor::float("x", -10.0, 10.0)])?;
    let toy = FnEvaluator::new(["f1", "f2"], |v, _| {
        let x = v.genome()[0];
        ObjectiveVector::new([("f1", -x * x), ("f2", -(x - 2.0) * (x - 2.0))])
    });
    let cfg = GaConfig { population: 32, generations: 30, seed: 42, workers: 2, ..GaConfig::default() };
    let run = evolve(&space, &toy, &cfg, &mut |s| {
        if s.generation % 10 == 0 {
            println!("generation {:>2}: {} evaluations, front {}", s.generation, s.evaluations, s.front().len());
        }
    })?;
    let mut xs: Vec<f64> = run.front.iter().map(|i| i.vector.genome()[0]).collect();
    xs.sort_by(f64::total_cmp);
    println!("front of {}: x from {:.3} to {:.3}", xs.len(), xs[0], xs[xs.len() - 1]);
    let t = select_tradeoff(&run.front)?;
    println!("trade-off x = {:.3}, objectives {:?}", t.vector.genome()[0], t.objectives.values());
    Ok(())
}

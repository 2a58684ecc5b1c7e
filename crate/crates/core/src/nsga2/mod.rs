//! Mixed-integer NSGA-II over a [`SearchSpace`].
//!
//! Genomes are evolved with SBX crossover and polynomial mutation and then
//! repaired onto the space. Every objective is maximised. With a single
//! objective the same loop is an elitist (mu + lambda) GA.
//!
//! ```
//! use samstar::nsga2::{evolve, FnEvaluator, GaConfig};
//! use samstar::space::{ParamDescriptor, SearchSpace};
//! use samstar::ObjectiveVector;
//!
//! let space = SearchSpace::new(vec![ParamDescriptor::float("x", -5.0, 5.0)]).unwrap();
//! let toy = FnEvaluator::new(["f1", "f2"], |v, _seed| {
//!     let x = v.genome()[0];
//!     ObjectiveVector::new([("f1", -x * x), ("f2", -(x - 2.0) * (x - 2.0))])
//! });
//! let cfg = GaConfig { population: 16, generations: 10, seed: 7, ..GaConfig::default() };
//! let run = evolve(&space, &toy, &cfg, &mut |_| {}).unwrap();
//! assert!(!run.front.is_empty());
//! ```

mod history;
mod operators;
mod sort;

use std::collections::{HashMap, HashSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use history::{parse_history_csv, write_history_csv, HistoryRecord, HistoryRow, HistoryTable};
pub use operators::{polynomial_mutation, sbx};
pub use sort::{crowding_distance, dominates, dominates_values, fast_nondominated_sort};

use crate::error::{Error, Result};
use crate::reward::ObjectiveVector;
use crate::space::{repair, sample_with, GenomeHash, HyperparamVector, SearchSpace};

/// Objective value given to every objective of a failed evaluation.
pub const FAILED_OBJECTIVE: f64 = -1e300;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GaConfig {
    pub population: usize,
    pub generations: usize,
    pub crossover_rate: f64,
    pub eta_c: f64,
    pub eta_m: f64,
    /// Per-gene mutation probability; `1 / genome length` when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mutation_prob: Option<f64>,
    pub seed: u64,
    /// Number of evaluations run concurrently.
    pub workers: usize,
}

impl Default for GaConfig {
    fn default() -> Self {
        GaConfig {
            population: 32,
            generations: 20,
            crossover_rate: 0.9,
            eta_c: 15.0,
            eta_m: 20.0,
            mutation_prob: None,
            seed: 0,
            workers: 1,
        }
    }
}

impl GaConfig {
    pub fn validate(&self) -> Result<()> {
        if self.population < 4 || self.population % 2 != 0 {
            return Err(Error::invalid(format!(
                "population must be even and at least 4, got {}",
                self.population
            )));
        }
        let unit = |name: &str, v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(Error::invalid(format!("{name} = {v} is outside [0, 1]")))
            }
        };
        unit("crossover_rate", self.crossover_rate)?;
        if let Some(p) = self.mutation_prob {
            unit("mutation_prob", p)?;
        }
        if !(self.eta_c > 0.0 && self.eta_m > 0.0) {
            return Err(Error::invalid("distribution indices must be positive"));
        }
        if self.workers == 0 {
            return Err(Error::invalid("workers must be at least 1"));
        }
        Ok(())
    }
}

/// Fitness function of a campaign. Must be pure per `(vector, seed)`.
pub trait Evaluator: Sync {
    /// Names of the objectives every evaluation returns, in order.
    fn objective_names(&self) -> Vec<String>;

    /// `seed` is derived from the run seed and the genome hash, for
    /// evaluators with stochastic internals.
    fn evaluate(&self, vector: &HyperparamVector, seed: u64) -> Result<ObjectiveVector>;
}

/// Adapts a closure into an [`Evaluator`].
pub struct FnEvaluator<F> {
    names: Vec<String>,
    f: F,
}

impl<F> FnEvaluator<F>
where
    F: Fn(&HyperparamVector, u64) -> Result<ObjectiveVector> + Sync,
{
    pub fn new<S: Into<String>>(names: impl IntoIterator<Item = S>, f: F) -> Self {
        FnEvaluator {
            names: names.into_iter().map(Into::into).collect(),
            f,
        }
    }
}

impl<F> Evaluator for FnEvaluator<F>
where
    F: Fn(&HyperparamVector, u64) -> Result<ObjectiveVector> + Sync,
{
    fn objective_names(&self) -> Vec<String> {
        self.names.clone()
    }

    fn evaluate(&self, vector: &HyperparamVector, seed: u64) -> Result<ObjectiveVector> {
        (self.f)(vector, seed)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Individual {
    pub vector: HyperparamVector,
    pub objectives: ObjectiveVector,
    /// 0 is non-dominated.
    pub rank: usize,
    pub crowding: f64,
    /// The evaluation failed and `objectives` holds the sentinel.
    pub failed: bool,
}

impl Individual {
    pub fn hash(&self) -> &GenomeHash {
        self.vector.hash()
    }
}

/// Non-dominated individuals, unique by genome hash, sorted by the first
/// objective (ascending).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParetoFront {
    members: Vec<Individual>,
}

impl ParetoFront {
    /// Non-dominated subset of `individuals`.
    pub fn from_individuals(individuals: &[Individual]) -> Self {
        let mut seen = HashSet::new();
        let unique: Vec<&Individual> = individuals.iter().filter(|i| seen.insert(i.hash().clone())).collect();
        let points: Vec<Vec<f64>> = unique.iter().map(|i| i.objectives.values()).collect();
        let fronts = fast_nondominated_sort(&points);
        let mut members: Vec<Individual> = fronts
            .first()
            .map(|f| f.iter().map(|&k| unique[k].clone()).collect())
            .unwrap_or_default();
        let distance = crowding_distance(&members.iter().map(|m| m.objectives.values()).collect::<Vec<_>>());
        for (m, d) in members.iter_mut().zip(distance) {
            m.rank = 0;
            m.crowding = d;
        }
        members.sort_by(|a, b| {
            a.objectives
                .value(0)
                .total_cmp(&b.objectives.value(0))
                .then_with(|| a.hash().cmp(b.hash()))
        });
        ParetoFront { members }
    }

    pub fn members(&self) -> &[Individual] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Individual> {
        self.members.iter()
    }

    /// Whether some member dominates another.
    pub fn is_valid(&self) -> bool {
        let pts: Vec<Vec<f64>> = self.members.iter().map(|m| m.objectives.values()).collect();
        !pts.iter().any(|a| pts.iter().any(|b| dominates_values(a, b)))
    }
}

/// Member maximising the smallest min-max normalised objective. Ties go to
/// the larger first objective, then the smaller genome hash. An objective
/// that is constant over the front normalises to 1.
pub fn select_tradeoff(front: &ParetoFront) -> Result<&Individual> {
    let members = front.members();
    if members.is_empty() {
        return Err(Error::invalid("trade-off selection needs a non-empty front"));
    }
    let m = members[0].objectives.len();
    let mut lo = vec![f64::INFINITY; m];
    let mut hi = vec![f64::NEG_INFINITY; m];
    for ind in members {
        for k in 0..m {
            lo[k] = lo[k].min(ind.objectives.value(k));
            hi[k] = hi[k].max(ind.objectives.value(k));
        }
    }
    let score = |ind: &Individual| {
        (0..m)
            .map(|k| {
                let range = hi[k] - lo[k];
                if range > 0.0 {
                    (ind.objectives.value(k) - lo[k]) / range
                } else {
                    1.0
                }
            })
            .fold(f64::INFINITY, f64::min)
    };
    let best = members
        .iter()
        .max_by(|a, b| {
            score(a)
                .total_cmp(&score(b))
                .then_with(|| a.objectives.value(0).total_cmp(&b.objectives.value(0)))
                .then_with(|| b.hash().cmp(a.hash()))
        })
        .expect("non-empty");
    Ok(best)
}

/// State handed to the observer after each generation.
pub struct GenerationSnapshot<'a> {
    /// 0 is the initial population.
    pub generation: usize,
    pub population: &'a [Individual],
    /// Distinct genomes evaluated so far.
    pub evaluations: usize,
    /// Genomes first evaluated in this generation.
    pub fresh: usize,
}

impl GenerationSnapshot<'_> {
    pub fn front(&self) -> ParetoFront {
        ParetoFront::from_individuals(self.population)
    }

    /// Per objective, the best value in the population.
    pub fn best(&self) -> Vec<f64> {
        let m = self.population.first().map_or(0, |i| i.objectives.len());
        (0..m)
            .map(|k| {
                self.population
                    .iter()
                    .map(|i| i.objectives.value(k))
                    .fold(f64::NEG_INFINITY, f64::max)
            })
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct Evolution {
    pub front: ParetoFront,
    pub population: Vec<Individual>,
    /// One record per distinct evaluated genome, in evaluation order.
    pub history: Vec<HistoryRecord>,
    pub evaluations: usize,
}

struct Cached {
    objectives: ObjectiveVector,
    failed: bool,
}

/// Derives the evaluation seed of one genome from the run seed.
pub fn evaluation_seed(run_seed: u64, hash: &GenomeHash) -> u64 {
    let mut z = run_seed ^ hash.as_u64();
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

struct Engine<'a, E: Evaluator + ?Sized> {
    evaluator: &'a E,
    names: Vec<String>,
    seed: u64,
    pool: Option<rayon::ThreadPool>,
    cache: HashMap<GenomeHash, Cached>,
}

impl<E: Evaluator + ?Sized> Engine<'_, E> {
    /// Evaluates the distinct uncached vectors and returns their hashes in
    /// first-seen order.
    fn evaluate_batch(&mut self, batch: &[HyperparamVector]) -> Result<Vec<GenomeHash>> {
        let mut seen = HashSet::new();
        let todo: Vec<&HyperparamVector> = batch
            .iter()
            .filter(|v| !self.cache.contains_key(v.hash()) && seen.insert(v.hash().clone()))
            .collect();
        let run = |v: &&HyperparamVector| self.evaluator.evaluate(v, evaluation_seed(self.seed, v.hash()));
        let results: Vec<Result<ObjectiveVector>> = match &self.pool {
            Some(pool) => pool.install(|| todo.par_iter().map(run).collect()),
            None => todo.iter().map(run).collect(),
        };
        let mut fresh = Vec::with_capacity(todo.len());
        for (v, result) in todo.into_iter().zip(results) {
            let entry = match result {
                Ok(obj) => {
                    if !obj.names().eq(self.names.iter().map(String::as_str)) {
                        return Err(Error::invalid(format!(
                            "evaluator returned objectives {:?}, declared {:?}",
                            obj.names().collect::<Vec<_>>(),
                            self.names
                        )));
                    }
                    Cached {
                        objectives: obj,
                        failed: false,
                    }
                }
                Err(e) => {
                    log::warn!("evaluation of genome {} failed: {e}", v.hash());
                    Cached {
                        objectives: ObjectiveVector::new(self.names.iter().map(|n| (n.clone(), FAILED_OBJECTIVE)))?,
                        failed: true,
                    }
                }
            };
            self.cache.insert(v.hash().clone(), entry);
            fresh.push(v.hash().clone());
        }
        Ok(fresh)
    }

    fn individual(&self, v: HyperparamVector) -> Individual {
        let c = &self.cache[v.hash()];
        Individual {
            objectives: c.objectives.clone(),
            failed: c.failed,
            vector: v,
            rank: 0,
            crowding: 0.0,
        }
    }
}

/// Sets rank and crowding on every individual and returns the fronts.
fn rank(pool: &mut [Individual]) -> Vec<Vec<usize>> {
    let points: Vec<Vec<f64>> = pool.iter().map(|i| i.objectives.values()).collect();
    let fronts = fast_nondominated_sort(&points);
    for (r, front) in fronts.iter().enumerate() {
        let pts: Vec<Vec<f64>> = front.iter().map(|&i| points[i].clone()).collect();
        for (&i, d) in front.iter().zip(crowding_distance(&pts)) {
            pool[i].rank = r;
            pool[i].crowding = d;
        }
    }
    fronts
}

fn better(a: &Individual, b: &Individual) -> bool {
    a.rank < b.rank || (a.rank == b.rank && a.crowding > b.crowding)
}

fn tournament<'p, R: Rng>(rng: &mut R, pop: &'p [Individual]) -> &'p Individual {
    let a = &pop[rng.random_range(0..pop.len())];
    let b = &pop[rng.random_range(0..pop.len())];
    if better(b, a) {
        b
    } else {
        a
    }
}

fn record_fresh(history: &mut Vec<HistoryRecord>, generation: usize, fresh: &[GenomeHash], pool: &[Individual]) {
    for h in fresh {
        let ind = pool.iter().find(|i| i.hash() == h).expect("fresh genome is in the pool");
        history.push(HistoryRecord {
            generation,
            vector: ind.vector.clone(),
            objectives: ind.objectives.clone(),
            failed: ind.failed,
            rank: ind.rank,
            crowding: ind.crowding,
        });
    }
}

/// Runs NSGA-II for `cfg.generations` generations after the initial one.
///
/// Genetic operators draw from a single stream seeded by `cfg.seed`, before
/// any evaluation of the generation, so results do not depend on
/// `cfg.workers`. Each distinct genome is evaluated once. A failed evaluation
/// is logged and scored [`FAILED_OBJECTIVE`] on every objective.
pub fn evolve<E: Evaluator + ?Sized>(
    space: &SearchSpace,
    evaluator: &E,
    cfg: &GaConfig,
    observer: &mut dyn FnMut(&GenerationSnapshot),
) -> Result<Evolution> {
    cfg.validate()?;
    let names = evaluator.objective_names();
    if names.is_empty() {
        return Err(Error::invalid("evaluator declares no objectives"));
    }
    let pool = if cfg.workers > 1 {
        Some(
            rayon::ThreadPoolBuilder::new()
                .num_threads(cfg.workers)
                .build()
                .map_err(|e| Error::invalid(format!("evaluation pool: {e}")))?,
        )
    } else {
        None
    };
    let mut engine = Engine {
        evaluator,
        names,
        seed: cfg.seed,
        pool,
        cache: HashMap::new(),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let bounds = space.gene_bounds();
    let p_mut = cfg
        .mutation_prob
        .unwrap_or(if bounds.is_empty() { 0.0 } else { 1.0 / bounds.len() as f64 });
    let n = cfg.population;
    let mut history = Vec::new();

    let initial: Vec<HyperparamVector> = (0..n).map(|_| sample_with(space, &mut rng)).collect();
    let fresh = engine.evaluate_batch(&initial)?;
    let mut population: Vec<Individual> = initial.into_iter().map(|v| engine.individual(v)).collect();
    rank(&mut population);
    record_fresh(&mut history, 0, &fresh, &population);
    observer(&GenerationSnapshot {
        generation: 0,
        population: &population,
        evaluations: engine.cache.len(),
        fresh: fresh.len(),
    });

    for generation in 1..=cfg.generations {
        let mut offspring = Vec::with_capacity(n);
        while offspring.len() < n {
            let p1 = tournament(&mut rng, &population).vector.genome().to_vec();
            let p2 = tournament(&mut rng, &population).vector.genome().to_vec();
            let (mut c1, mut c2) = if rng.random::<f64>() < cfg.crossover_rate {
                sbx(&mut rng, &p1, &p2, &bounds, cfg.eta_c)
            } else {
                (p1, p2)
            };
            polynomial_mutation(&mut rng, &mut c1, &bounds, cfg.eta_m, p_mut);
            polynomial_mutation(&mut rng, &mut c2, &bounds, cfg.eta_m, p_mut);
            offspring.push(repair(space, &c1)?);
            offspring.push(repair(space, &c2)?);
        }
        let fresh = engine.evaluate_batch(&offspring)?;
        let mut merged: Vec<Individual> = population;
        merged.extend(offspring.into_iter().map(|v| engine.individual(v)));
        let fronts = rank(&mut merged);
        record_fresh(&mut history, generation, &fresh, &merged);

        let mut keep: Vec<usize> = Vec::with_capacity(n);
        for front in fronts {
            if keep.len() + front.len() <= n {
                keep.extend(front);
                continue;
            }
            let mut last = front;
            last.sort_by(|&a, &b| merged[b].crowding.total_cmp(&merged[a].crowding).then(a.cmp(&b)));
            keep.extend(last.into_iter().take(n - keep.len()));
            break;
        }
        keep.sort_unstable();
        let mut slots: Vec<Option<Individual>> = merged.into_iter().map(Some).collect();
        population = keep.into_iter().map(|i| slots[i].take().expect("kept once")).collect();
        debug_assert!(ParetoFront::from_individuals(&population).is_valid());
        observer(&GenerationSnapshot {
            generation,
            population: &population,
            evaluations: engine.cache.len(),
            fresh: fresh.len(),
        });
    }

    Ok(Evolution {
        front: ParetoFront::from_individuals(&population),
        population,
        history,
        evaluations: engine.cache.len(),
    })
}

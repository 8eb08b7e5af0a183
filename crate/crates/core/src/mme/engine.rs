//! The outer loop: selection, variation, duplicate removal and two-pass scoring.

use std::collections::{BTreeMap, HashMap};

use rand::Rng;
use rayon::prelude::*;

use super::config::MmeConfig;
use super::dataset::RegressionDataset;
use super::individual::{assign_fitness, rank_cmp, Individual};
use super::micro::micro_evolve;
use super::report::{MmeReport, ReportEntry};
use super::variation::{crossover, mutate, random_tree, TreeSpace};
use crate::error::{Error, Result};
use crate::rng::stream;

const STREAM_INIT: u64 = 1;
const STREAM_BREED: u64 = 2;
const STREAM_MICRO: u64 = 3;
const STREAM_RESEED: u64 = 4;
const STREAM_CHILD: u64 = 5;

/// Per-generation bookkeeping.
#[derive(Clone, Debug, PartialEq)]
pub struct GenerationStats {
    pub generation: usize,
    pub children: usize,
    pub duplicates_removed: usize,
    pub invalid_discarded: usize,
    pub tuned: usize,
    pub survivors: usize,
    pub best_mse: f64,
    pub best_fitness: f64,
    pub worst_mse: f64,
    pub reseeded: bool,
}

fn space(data: &RegressionDataset, cfg: &MmeConfig) -> TreeSpace {
    TreeSpace { n_features: data.n_features(), operators: cfg.operators.clone(), max_nodes: cfg.max_nodes }
}

fn make(expr: crate::exprtree::ExprNode, params: Vec<f64>, cfg: &MmeConfig, generation: usize) -> Individual {
    let mut ind = Individual::new(expr, params, &cfg.costs).expect("variation keeps trees valid");
    ind.generation = generation;
    ind
}

/// Ramped half-and-half initial population.
pub fn initial_population(data: &RegressionDataset, cfg: &MmeConfig, stream_id: u64) -> Vec<Individual> {
    let mut rng = stream(cfg.rng_seed, &[stream_id]);
    let sp = space(data, cfg);
    (0..cfg.population_size)
        .map(|i| {
            let depth = 1 + i % cfg.init_max_depth;
            let (e, p) = random_tree(&mut rng, &sp, depth, i % 2 == 0);
            make(e, p, cfg, 0)
        })
        .collect()
}

fn tournament<'a, R: Rng + ?Sized>(rng: &mut R, pop: &'a [Individual], size: usize) -> &'a Individual {
    let mut best = &pop[rng.random_range(0..pop.len())];
    for _ in 1..size {
        let c = &pop[rng.random_range(0..pop.len())];
        if rank_cmp(c, best).is_lt() {
            best = c;
        }
    }
    best
}

fn score_all(inds: &mut [Individual], data: &RegressionDataset) {
    inds.par_iter_mut().for_each(|i| {
        let _ = i.ensure_mse(data);
    });
}

/// Keeps the best-MSE representative of each structure and drops invalid individuals.
/// Returns the survivors (in first-seen order), the duplicate count and the invalid count.
pub fn remove_duplicates(inds: Vec<Individual>) -> (Vec<Individual>, usize, usize) {
    let total = inds.len();
    let mut index: HashMap<String, usize> = HashMap::with_capacity(total);
    let mut kept: Vec<Individual> = Vec::with_capacity(total);
    let mut invalid = 0;
    for ind in inds {
        if !ind.is_valid() {
            invalid += 1;
            continue;
        }
        let key = ind.structure_key();
        match index.get(&key) {
            Some(&slot) => {
                let cur = kept[slot].mse().and_then(Result::ok).unwrap_or(f64::INFINITY);
                let new = ind.mse().and_then(Result::ok).unwrap_or(f64::INFINITY);
                let replace = new < cur || (new == cur && ind.tuned && !kept[slot].tuned);
                if replace {
                    kept[slot] = ind;
                }
            }
            None => {
                index.insert(key, kept.len());
                kept.push(ind);
            }
        }
    }
    let dups = total - invalid - kept.len();
    (kept, dups, invalid)
}

/// One macro generation. `pop` holds the parents (typically last generation's survivors).
pub fn macro_generation(
    pop: Vec<Individual>,
    data: &RegressionDataset,
    cfg: &MmeConfig,
    generation: usize,
) -> (Vec<Individual>, GenerationStats) {
    let sp = space(data, cfg);
    let mut parents = pop;
    score_all(&mut parents, data);
    let mut reseeded = false;
    parents.retain(Individual::is_valid);
    if parents.is_empty() {
        reseeded = true;
        parents = initial_population(data, cfg, STREAM_RESEED ^ ((generation as u64) << 8));
        for p in &mut parents {
            p.generation = generation;
        }
        score_all(&mut parents, data);
        parents.retain(Individual::is_valid);
    }
    let (mut parents, _, _) = remove_duplicates(parents);
    assign_fitness(&mut parents, cfg);

    // Breeding
    let n_children = cfg.population_size.saturating_sub(parents.len()).max(1);
    let mut rng = stream(cfg.rng_seed, &[STREAM_BREED, generation as u64]);
    let mut children = Vec::with_capacity(n_children);
    if !parents.is_empty() {
        while children.len() < n_children {
            let p1 = tournament(&mut rng, &parents, cfg.tournament_size);
            let mut child = None;
            let crossed = rng.random_bool(cfg.crossover_rate);
            if crossed {
                let p2 = tournament(&mut rng, &parents, cfg.tournament_size);
                child = crossover(&mut rng, (p1.expr(), p1.params()), (p2.expr(), p2.params()), cfg.max_nodes);
            }
            if !crossed || rng.random_bool(cfg.mutation_rate) {
                let base = child.as_ref().map(|(e, p)| (e, p.as_slice())).unwrap_or((p1.expr(), p1.params()));
                if let Some(m) = mutate(&mut rng, base, &sp) {
                    child = Some(m);
                }
            }
            match child {
                Some((e, p)) => children.push(make(e, p, cfg, generation)),
                // variation could not produce a bounded tree; inject a fresh one
                None => {
                    let (e, p) = random_tree(&mut rng, &sp, cfg.init_max_depth, false);
                    children.push(make(e, p, cfg, generation));
                }
            }
        }
    }
    score_all(&mut children, data);
    let n_children = children.len();
    if cfg.tune_children {
        children = children
            .into_par_iter()
            .enumerate()
            .map(|(i, ind)| {
                let mut rng = stream(cfg.rng_seed, &[STREAM_CHILD, generation as u64, i as u64]);
                micro_evolve(&ind, data, &cfg.micro, &mut rng)
            })
            .collect();
    }

    // Duplicate removal over parents and children, then the first ranking pass.
    let mut pool = parents;
    pool.extend(children);
    let (mut pool, duplicates_removed, invalid_discarded) = remove_duplicates(pool);
    if pool.is_empty() {
        let stats = GenerationStats {
            generation,
            children: n_children,
            duplicates_removed,
            invalid_discarded,
            tuned: 0,
            survivors: 0,
            best_mse: f64::INFINITY,
            best_fitness: f64::INFINITY,
            worst_mse: f64::INFINITY,
            reseeded,
        };
        return (pool, stats);
    }
    assign_fitness(&mut pool, cfg);
    pool.sort_by(rank_cmp);
    let k = cfg.survivor_count().min(pool.len());
    // The most accurate individual always survives.
    let best_mse_idx = pool
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.mse().unwrap().unwrap().total_cmp(&b.1.mse().unwrap().unwrap()).then(a.0.cmp(&b.0)))
        .map(|(i, _)| i)
        .expect("non-empty");
    if best_mse_idx >= k {
        let elite = pool.remove(best_mse_idx);
        pool.insert(k - 1, elite);
    }
    pool.truncate(k);

    // Second pass: parameter tuning of the survivors.
    let tuned_count = std::sync::atomic::AtomicUsize::new(0);
    let micro_cfg = &cfg.micro;
    let mut survivors: Vec<Individual> = pool
        .into_par_iter()
        .enumerate()
        .map(|(i, ind)| {
            if ind.tuned && !cfg.retune_survivors {
                return ind;
            }
            tuned_count.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
            let mut rng = stream(cfg.rng_seed, &[STREAM_MICRO, generation as u64, i as u64]);
            micro_evolve(&ind, data, micro_cfg, &mut rng)
        })
        .collect();
    survivors.retain(Individual::is_valid);
    let worst = assign_fitness(&mut survivors, cfg).unwrap_or(f64::INFINITY);
    survivors.sort_by(rank_cmp);

    let best_mse = survivors.iter().filter_map(|i| i.mse().and_then(Result::ok)).fold(f64::INFINITY, f64::min);
    let best_fitness = survivors.first().and_then(|i| i.fitness()).and_then(Result::ok).unwrap_or(f64::INFINITY);
    let stats = GenerationStats {
        generation,
        children: n_children,
        duplicates_removed,
        invalid_discarded,
        tuned: tuned_count.into_inner(),
        survivors: survivors.len(),
        best_mse,
        best_fitness,
        worst_mse: worst,
        reseeded,
    };
    (survivors, stats)
}

/// Best individual per complexity value across a run.
#[derive(Default)]
struct HallOfFame {
    by_complexity: BTreeMap<u32, Individual>,
}

impl HallOfFame {
    fn offer(&mut self, ind: &Individual) {
        let Some(Ok(mse)) = ind.mse() else { return };
        match self.by_complexity.get(&ind.complexity()) {
            Some(cur) if cur.mse().and_then(Result::ok).is_some_and(|m| m <= mse) => {}
            _ => {
                self.by_complexity.insert(ind.complexity(), ind.clone());
            }
        }
    }

    /// Entries not dominated in (complexity, MSE), ascending complexity.
    fn front(&self) -> Vec<Individual> {
        let mut out: Vec<Individual> = Vec::new();
        let mut best = f64::INFINITY;
        for ind in self.by_complexity.values() {
            let m = ind.mse().and_then(Result::ok).expect("only valid entries");
            if m < best {
                best = m;
                out.push(ind.clone());
            }
        }
        out
    }
}

/// Runs the full nested search and returns the complexity-sorted front.
pub fn run_mme(data: &RegressionDataset, cfg: &MmeConfig) -> Result<MmeReport> {
    run_mme_with(data, cfg, |_| {})
}

/// As [`run_mme`], calling `observe` after every generation.
pub fn run_mme_with(
    data: &RegressionDataset,
    cfg: &MmeConfig,
    mut observe: impl FnMut(&GenerationStats),
) -> Result<MmeReport> {
    cfg.validate()?;
    if data.n_rows() == 0 {
        return Err(Error::Config("dataset has no rows".into()));
    }
    let mut pop = initial_population(data, cfg, STREAM_INIT);
    let mut hof = HallOfFame::default();
    let mut history = Vec::with_capacity(cfg.max_generations);
    let mut recoveries = 0;
    for g in 1..=cfg.max_generations {
        let (next, stats) = macro_generation(pop, data, cfg, g);
        if stats.reseeded {
            recoveries += 1;
        }
        for ind in &next {
            hof.offer(ind);
        }
        observe(&stats);
        history.push(stats);
        pop = next;
    }
    let front = hof.front();
    let worst = front.iter().filter_map(|i| i.mse().and_then(Result::ok)).fold(0.0, f64::max);
    let entries = front
        .into_iter()
        .map(|mut ind| {
            let f = super::individual::fitness(&ind, worst, cfg);
            ind.set_fitness(f);
            ReportEntry::from_individual(&ind)
        })
        .collect();
    let mut final_population = pop;
    final_population.sort_by(rank_cmp);
    Ok(MmeReport::new(entries, final_population, history, recoveries, cfg.tau))
}

//! Genetic algorithm over network genomes: truncation selection, uniform
//! parent sampling, Gaussian mutation and elitism, with order-independent
//! parallel evaluation.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{cleanup_with, develop_final, CellGrid, CleanupOptions, Morphology};
use crate::nets::{Genome, NetworkArchitecture, NetworkInstance};
use crate::physics::{evaluate_locomotion, MaterialParams, PhysicsConfig};
use crate::regen::similarity;
use crate::rng::{self, Purpose};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitnessKind {
    /// Horizontal distance travelled.
    Locomotion2d,
    /// Distance minus `voxel_cost_weight` per live voxel.
    Locomotion3d,
    /// Voxel similarity to a target morphology.
    Similarity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvoConfig {
    pub population_size: usize,
    /// Number of evaluated generations; 0 still evaluates the initial
    /// population once.
    pub generations: usize,
    pub truncation_fraction: f64,
    pub elite_count: usize,
    pub sigma: f64,
    /// Standard deviation of generation-0 parameters.
    pub init_std: f64,
    pub seed: u64,
    pub fitness_kind: FitnessKind,
    pub voxel_cost_weight: f64,
    /// Write a checkpoint every this many generations; 0 disables.
    pub checkpoint_every: usize,
}

impl Default for EvoConfig {
    fn default() -> Self {
        EvoConfig {
            population_size: 300,
            generations: 500,
            truncation_fraction: 0.2,
            elite_count: 1,
            sigma: 0.03,
            init_std: 0.03,
            seed: 0,
            fitness_kind: FitnessKind::Locomotion2d,
            voxel_cost_weight: 0.05,
            checkpoint_every: 10,
        }
    }
}

impl EvoConfig {
    pub fn truncation_count(&self) -> usize {
        truncation_count(self.population_size, self.truncation_fraction)
    }

    pub fn evaluated_generations(&self) -> usize {
        self.generations.max(1)
    }

    pub fn validate(&self) -> Result<()> {
        if self.population_size == 0 {
            return Err(Error::config("population size must be positive"));
        }
        if !(self.truncation_fraction > 0.0 && self.truncation_fraction <= 1.0) {
            return Err(Error::config(format!(
                "truncation fraction must lie in (0, 1], got {}",
                self.truncation_fraction
            )));
        }
        if self.elite_count > self.truncation_count() {
            return Err(Error::config(format!(
                "elite count {} exceeds truncation count {}",
                self.elite_count,
                self.truncation_count()
            )));
        }
        if !(self.sigma >= 0.0 && self.init_std >= 0.0) {
            return Err(Error::config("sigma and init_std must be non-negative"));
        }
        if !(self.voxel_cost_weight >= 0.0) {
            return Err(Error::config("voxel cost weight must be non-negative"));
        }
        Ok(())
    }
}

fn truncation_count(n: usize, fraction: f64) -> usize {
    ((fraction * n as f64).ceil() as usize).clamp(1, n.max(1))
}

/// `theta + sigma * eps` with `eps ~ N(0, I)` drawn from `rng`.
pub fn mutate<R: Rng + ?Sized>(g: &Genome, sigma: f64, rng: &mut R) -> Genome {
    let mut out = g.clone();
    if sigma == 0.0 {
        return out;
    }
    for p in &mut out.params {
        let e: f64 = rng.sample(StandardNormal);
        *p += sigma * e;
    }
    out
}

/// Indices ordered by descending fitness, lower index first among ties.
pub fn rank_order(fitnesses: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..fitnesses.len()).collect();
    idx.sort_by(|&a, &b| fitnesses[b].total_cmp(&fitnesses[a]).then(a.cmp(&b)));
    idx
}

/// The top `ceil(fraction * N)` indices in [`rank_order`].
pub fn select_truncation(fitnesses: &[f64], truncation_fraction: f64) -> Vec<usize> {
    let mut order = rank_order(fitnesses);
    order.truncate(truncation_count(fitnesses.len(), truncation_fraction));
    order
}

/// Builds the population for generation `generation + 1`.
pub fn next_generation(
    population: &[Genome],
    fitnesses: &[f64],
    cfg: &EvoConfig,
    generation: usize,
) -> Result<Vec<Genome>> {
    if population.len() != fitnesses.len() || population.len() != cfg.population_size {
        return Err(Error::contract(format!(
            "population {} / fitnesses {} / configured size {} disagree",
            population.len(),
            fitnesses.len(),
            cfg.population_size
        )));
    }
    let order = rank_order(fitnesses);
    let parents = &order[..cfg.truncation_count()];
    let next_gen = generation as u64 + 1;
    let out = (0..cfg.population_size)
        .map(|slot| {
            if slot < cfg.elite_count {
                population[order[slot]].clone()
            } else {
                let mut rng = rng::stream(cfg.seed, Purpose::Breed, next_gen, slot as u64);
                let parent = parents[rng.random_range(0..parents.len())];
                mutate(&population[parent], cfg.sigma, &mut rng)
            }
        })
        .collect();
    Ok(out)
}

/// Generation-0 population.
pub fn initial_population(arch: NetworkArchitecture, cfg: &EvoConfig) -> Vec<Genome> {
    (0..cfg.population_size)
        .map(|slot| {
            let mut rng = rng::stream(cfg.seed, Purpose::Init, 0, slot as u64);
            Genome::random(arch, &mut rng, cfg.init_std)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub fitness: f64,
    pub live_voxels: usize,
    /// The physics blew up; fitness was forced to 0.
    pub diverged: bool,
}

/// Anything that scores a genome deterministically.
pub trait Fitness: Sync {
    fn architecture(&self) -> NetworkArchitecture;
    fn evaluate(&self, genome: &Genome) -> Result<Evaluation>;
}

/// Shared development pipeline: start grid, steps, cleanup.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Development {
    pub start: CellGrid,
    pub steps: usize,
    pub cleanup: CleanupOptions,
}

impl Development {
    pub fn grow(&self, genome: &Genome) -> Result<(CellGrid, Morphology)> {
        let net = NetworkInstance::new(genome.clone());
        let grid = develop_final(&self.start, &net, self.steps)?;
        let morph = cleanup_with(&grid, self.cleanup);
        Ok((grid, morph))
    }
}

/// Everything a fitness evaluation needs besides the genome.
#[derive(Debug, Clone, PartialEq)]
pub struct FitnessContext {
    pub arch: NetworkArchitecture,
    pub development: Development,
    pub material: MaterialParams,
    pub physics: PhysicsConfig,
    /// Seconds of actuated locomotion.
    pub duration: f64,
    /// Target for [`FitnessKind::Similarity`].
    pub target: Option<Morphology>,
}

/// Grow, clean up, then score according to `cfg.fitness_kind`.
pub fn fitness_of(genome: &Genome, cfg: &EvoConfig, ctx: &FitnessContext) -> Result<Evaluation> {
    if genome.arch != ctx.arch {
        return Err(Error::contract("genome architecture does not match the preset"));
    }
    let (_, morph) = ctx.development.grow(genome)?;
    let live = morph.live_voxel_count();
    let eval = |fitness| Evaluation {
        fitness,
        live_voxels: live,
        diverged: false,
    };
    match cfg.fitness_kind {
        FitnessKind::Similarity => {
            let target = ctx
                .target
                .as_ref()
                .ok_or_else(|| Error::config("similarity fitness needs a target morphology"))?;
            Ok(eval(similarity(&morph, target)? as f64))
        }
        FitnessKind::Locomotion2d | FitnessKind::Locomotion3d => {
            if live == 0 {
                return Ok(eval(0.0));
            }
            match evaluate_locomotion(&morph, &ctx.material, &ctx.physics, ctx.duration) {
                Ok(r) => {
                    let cost = match cfg.fitness_kind {
                        FitnessKind::Locomotion3d => cfg.voxel_cost_weight * live as f64,
                        _ => 0.0,
                    };
                    Ok(eval(r.distance - cost))
                }
                Err(Error::Diverged { .. }) => Ok(Evaluation {
                    fitness: 0.0,
                    live_voxels: live,
                    diverged: true,
                }),
                Err(e) => Err(e),
            }
        }
    }
}

/// A [`FitnessContext`] bound to an [`EvoConfig`].
#[derive(Debug, Clone)]
pub struct Task {
    pub cfg: EvoConfig,
    pub ctx: FitnessContext,
}

impl Fitness for Task {
    fn architecture(&self) -> NetworkArchitecture {
        self.ctx.arch
    }

    fn evaluate(&self, genome: &Genome) -> Result<Evaluation> {
        fitness_of(genome, &self.cfg, &self.ctx)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub generation: usize,
    pub individual_index: usize,
    pub fitness: f64,
    pub live_voxel_count: usize,
    pub rng_stream_id: u64,
    pub diverged: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GenerationStats {
    pub generation: usize,
    pub best: f64,
    pub mean: f64,
    pub min: f64,
    pub best_live_voxels: usize,
    /// Best fitness seen in this or any earlier generation.
    pub best_so_far: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvoHistory {
    pub generations: Vec<GenerationStats>,
    pub best_genome: Option<Genome>,
    pub best_fitness: Option<f64>,
    pub records: Vec<EvalRecord>,
}

impl EvoHistory {
    pub fn new() -> Self {
        EvoHistory {
            generations: Vec::new(),
            best_genome: None,
            best_fitness: None,
            records: Vec::new(),
        }
    }

    /// True if best-so-far never decreases and each generation's best is at
    /// least the previous generation's best.
    pub fn is_elitist_monotone(&self) -> bool {
        self.generations
            .windows(2)
            .all(|w| w[1].best >= w[0].best && w[1].best_so_far >= w[0].best_so_far)
    }
}

impl Default for EvoHistory {
    fn default() -> Self {
        Self::new()
    }
}

/// Resumable evolution state: the population about to be evaluated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvolutionState {
    /// Index of the next generation to evaluate; doubles as the RNG cursor.
    pub generation: usize,
    pub population: Vec<Genome>,
    pub history: EvoHistory,
}

impl EvolutionState {
    pub fn initial(arch: NetworkArchitecture, cfg: &EvoConfig) -> Self {
        EvolutionState {
            generation: 0,
            population: initial_population(arch, cfg),
            history: EvoHistory::new(),
        }
    }

    pub fn is_finished(&self, cfg: &EvoConfig) -> bool {
        self.generation >= cfg.evaluated_generations()
    }
}

/// Hooks called from the evolution loop.
pub trait Observer {
    fn on_generation(&mut self, _stats: &GenerationStats, _history: &EvoHistory) -> Result<()> {
        Ok(())
    }
    fn on_checkpoint(&mut self, _state: &EvolutionState) -> Result<()> {
        Ok(())
    }
}

pub struct NoopObserver;

impl Observer for NoopObserver {}

/// Evaluates a population; the result is independent of `threads`.
pub fn evaluate_population<F: Fitness + ?Sized>(
    population: &[Genome],
    fitness: &F,
    threads: usize,
) -> Result<Vec<Evaluation>> {
    if threads <= 1 {
        return population.iter().map(|g| fitness.evaluate(g)).collect();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::config(format!("cannot build thread pool: {e}")))?;
    pool.install(|| population.par_iter().map(|g| fitness.evaluate(g)).collect())
}

pub fn evolve<F: Fitness + ?Sized>(cfg: &EvoConfig, fitness: &F, threads: usize) -> Result<EvoHistory> {
    let state = EvolutionState::initial(fitness.architecture(), cfg);
    resume(cfg, fitness, threads, state, &mut NoopObserver)
}

/// Runs the loop from `state` until all generations are evaluated.
pub fn resume<F: Fitness + ?Sized>(
    cfg: &EvoConfig,
    fitness: &F,
    threads: usize,
    mut state: EvolutionState,
    observer: &mut dyn Observer,
) -> Result<EvoHistory> {
    cfg.validate()?;
    if state.population.len() != cfg.population_size {
        return Err(Error::Checkpoint(format!(
            "state holds {} genomes, config expects {}",
            state.population.len(),
            cfg.population_size
        )));
    }
    let total = cfg.evaluated_generations();
    while state.generation < total {
        let gen = state.generation;
        let evals = evaluate_population(&state.population, fitness, threads)?;
        let fitnesses: Vec<f64> = evals.iter().map(|e| e.fitness).collect();
        let order = rank_order(&fitnesses);
        let top = order[0];

        let hist = &mut state.history;
        for (i, e) in evals.iter().enumerate() {
            let stream = if gen == 0 {
                rng::stream_id(Purpose::Init, 0, i as u64)
            } else {
                rng::stream_id(Purpose::Breed, gen as u64, i as u64)
            };
            hist.records.push(EvalRecord {
                generation: gen,
                individual_index: i,
                fitness: e.fitness,
                live_voxel_count: e.live_voxels,
                rng_stream_id: stream,
                diverged: e.diverged,
            });
        }
        if hist.best_fitness.is_none_or(|b| fitnesses[top] > b) {
            hist.best_fitness = Some(fitnesses[top]);
            hist.best_genome = Some(state.population[top].clone());
        }
        let stats = GenerationStats {
            generation: gen,
            best: fitnesses[top],
            mean: fitnesses.iter().sum::<f64>() / fitnesses.len() as f64,
            min: fitnesses.iter().copied().fold(f64::INFINITY, f64::min),
            best_live_voxels: evals[top].live_voxels,
            best_so_far: hist.best_fitness.unwrap_or(fitnesses[top]),
        };
        hist.generations.push(stats);
        observer.on_generation(&stats, hist)?;

        if gen + 1 < total {
            state.population = next_generation(&state.population, &fitnesses, cfg, gen)?;
        }
        state.generation = gen + 1;
        if cfg.checkpoint_every > 0 && state.generation % cfg.checkpoint_every == 0 && state.generation < total {
            observer.on_checkpoint(&state)?;
        }
    }
    Ok(state.history)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nets::NetworkVariant;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn small_arch() -> NetworkArchitecture {
        NetworkArchitecture::new(NetworkVariant::FeedForward, 2, 4).unwrap()
    }

    #[test]
    fn zero_sigma_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let g = Genome::random(small_arch(), &mut rng, 1.0);
        assert_eq!(mutate(&g, 0.0, &mut rng), g);
    }

    #[test]
    fn mutation_replays() {
        let g = Genome::zeros(small_arch());
        let a = mutate(&g, 0.03, &mut rng::stream(5, Purpose::Breed, 1, 2));
        let b = mutate(&g, 0.03, &mut rng::stream(5, Purpose::Breed, 1, 2));
        assert_eq!(a, b);
        assert_ne!(a, g);
    }

    #[test]
    fn truncation_examples() {
        assert_eq!(select_truncation(&[3.0, 1.0, 2.0], 1.0 / 3.0), vec![0]);
        assert_eq!(select_truncation(&[2.0, 2.0, 1.0], 1.0 / 3.0), vec![0]);
        assert_eq!(select_truncation(&[2.0, 5.0, 1.0], 1.0), vec![1, 0, 2]);
        assert_eq!(select_truncation(&[1.0; 10], 0.2), vec![0, 1]);
    }

    #[test]
    fn config_validation() {
        let mut cfg = EvoConfig {
            population_size: 10,
            ..EvoConfig::default()
        };
        assert!(cfg.validate().is_ok());
        cfg.elite_count = 3;
        assert!(cfg.validate().is_err());
        cfg.elite_count = 1;
        cfg.truncation_fraction = 0.0;
        assert!(cfg.validate().is_err());
    }

    struct SumFitness;

    impl Fitness for SumFitness {
        fn architecture(&self) -> NetworkArchitecture {
            small_arch()
        }
        fn evaluate(&self, genome: &Genome) -> Result<Evaluation> {
            Ok(Evaluation {
                fitness: genome.params.iter().sum(),
                live_voxels: 0,
                diverged: false,
            })
        }
    }

    fn cfg(pop: usize, gens: usize, elite: usize) -> EvoConfig {
        EvoConfig {
            population_size: pop,
            generations: gens,
            elite_count: elite,
            seed: 42,
            ..EvoConfig::default()
        }
    }

    #[test]
    fn all_elite_copies_sorted_population() {
        let c = EvoConfig {
            truncation_fraction: 1.0,
            ..cfg(5, 2, 5)
        };
        let pop = initial_population(small_arch(), &c);
        let fit: Vec<f64> = pop.iter().map(|g| g.params.iter().sum()).collect();
        let next = next_generation(&pop, &fit, &c, 0).unwrap();
        let sorted: Vec<Genome> = rank_order(&fit).into_iter().map(|i| pop[i].clone()).collect();
        assert_eq!(next, sorted);
    }

    #[test]
    fn generation_zero_only() {
        let h = evolve(&cfg(8, 0, 1), &SumFitness, 1).unwrap();
        assert_eq!(h.generations.len(), 1);
        assert_eq!(h.records.len(), 8);
    }

    #[test]
    fn elitism_keeps_best_and_is_monotone() {
        let h = evolve(&cfg(20, 15, 1), &SumFitness, 1).unwrap();
        assert_eq!(h.generations.len(), 15);
        assert_eq!(h.records.len(), 15 * 20);
        assert!(h.is_elitist_monotone());
        assert!(h.generations.last().unwrap().best > h.generations[0].best);
    }

    #[test]
    fn thread_count_does_not_change_history() {
        let a = evolve(&cfg(12, 4, 1), &SumFitness, 1).unwrap();
        let b = evolve(&cfg(12, 4, 1), &SumFitness, 3).unwrap();
        assert_eq!(a, b);
    }

    #[derive(Default)]
    struct Capture(Vec<EvolutionState>);

    impl Observer for Capture {
        fn on_checkpoint(&mut self, state: &EvolutionState) -> Result<()> {
            self.0.push(state.clone());
            Ok(())
        }
    }

    #[test]
    fn resume_from_checkpoint_matches_full_run() {
        let c = EvoConfig {
            checkpoint_every: 2,
            ..cfg(10, 7, 1)
        };
        let mut cap = Capture::default();
        let full = resume(&c, &SumFitness, 1, EvolutionState::initial(small_arch(), &c), &mut cap).unwrap();
        assert_eq!(cap.0.iter().map(|s| s.generation).collect::<Vec<_>>(), vec![2, 4, 6]);
        let resumed = resume(&c, &SumFitness, 1, cap.0[1].clone(), &mut NoopObserver).unwrap();
        assert_eq!(full, resumed);
    }
}

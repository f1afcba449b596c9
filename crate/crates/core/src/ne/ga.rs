//! Selection, averaging crossover, Gaussian mutation and the elitist
//! generation loop.

use std::cmp::Ordering;

use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::{GaParams, NeError};
use crate::neuro::Genome;

/// Tournament size used by [`select`].
pub const TOURNAMENT_SIZE: usize = 3;

#[derive(Clone, Debug, PartialEq)]
pub struct Individual {
    pub genome: Genome,
    pub fitness: Option<f64>,
}

impl Individual {
    pub fn new(genome: Genome) -> Self {
        Self {
            genome,
            fitness: None,
        }
    }

    fn score(&self) -> f64 {
        self.fitness.expect("individual evaluated before comparison")
    }
}

pub type Population = Vec<Individual>;

/// Anything that scores a genome; larger is better.
pub trait Fitness {
    fn evaluate(&self, genome: &Genome) -> f64;
}

impl<F: Fn(&Genome) -> f64> Fitness for F {
    fn evaluate(&self, genome: &Genome) -> f64 {
        self(genome)
    }
}

/// Adds `Normal(0, sigma^2)` noise to each gene independently with
/// probability `rate`.
pub fn mutate<R: Rng + ?Sized>(genome: &Genome, rate: f64, sigma: f64, rng: &mut R) -> Genome {
    assert!((0.0..=1.0).contains(&rate), "mutation rate outside [0, 1]");
    let normal = Normal::new(0.0, sigma).expect("positive sigma");
    let values = genome
        .values()
        .iter()
        .map(|&v| {
            if rng.random::<f64>() < rate {
                v + normal.sample(rng)
            } else {
                v
            }
        })
        .collect();
    genome.with_values(values)
}

/// Elementwise mean of two parents.
pub fn crossover(a: &Genome, b: &Genome) -> Result<Genome, NeError> {
    if !a.same_shape(b) {
        return Err(NeError::ShapeMismatch);
    }
    let values = a
        .values()
        .iter()
        .zip(b.values())
        .map(|(x, y)| (x + y) / 2.0)
        .collect();
    Ok(a.with_values(values))
}

/// Seed genome first, then `population - 1` mutants of it.
pub fn init_population<R: Rng + ?Sized>(seed: &Genome, params: &GaParams, rng: &mut R) -> Population {
    let mut pop = Vec::with_capacity(params.population as usize);
    pop.push(Individual::new(seed.clone()));
    for _ in 1..params.population {
        pop.push(Individual::new(mutate(
            seed,
            params.mutation_rate,
            params.mutation_sigma,
            rng,
        )));
    }
    pop
}

/// Size-3 tournament with replacement; returns the index of the winner.
/// Ties go to the lower population index.
pub fn select_index<R: Rng + ?Sized>(pop: &[Individual], rng: &mut R) -> usize {
    assert!(!pop.is_empty(), "selection from an empty population");
    let mut best = rng.random_range(0..pop.len());
    for _ in 1..TOURNAMENT_SIZE {
        let c = rng.random_range(0..pop.len());
        let (fc, fb) = (pop[c].score(), pop[best].score());
        if fc > fb || (fc == fb && c < best) {
            best = c;
        }
    }
    best
}

pub fn select<'a, R: Rng + ?Sized>(pop: &'a [Individual], rng: &mut R) -> &'a Individual {
    &pop[select_index(pop, rng)]
}

/// Descending fitness; a stable sort keeps lower indices first among ties.
fn rank(pop: &mut Population) {
    pop.sort_by(|a, b| b.score().partial_cmp(&a.score()).unwrap_or(Ordering::Equal));
}

#[derive(Clone, Debug, PartialEq)]
pub struct GenerationStats {
    pub generation: u32,
    pub best_fitness: f64,
    pub mean_fitness: f64,
    /// Best fitness seen in this or any earlier generation.
    pub best_ever: f64,
    pub evaluations: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvolveOutcome {
    pub best: Genome,
    pub best_fitness: f64,
    /// Fitness of the unmodified seed genome on the same evaluator.
    pub seed_fitness: f64,
    pub history: Vec<GenerationStats>,
    pub evaluations: usize,
    pub early_exit: bool,
}

/// Runs the elitist GA from `seed`. Stops after `params.generations`
/// evaluated generations, or as soon as the best fitness reaches
/// `target` when one is given.
pub fn evolve<R, F>(
    seed: &Genome,
    params: &GaParams,
    fitness: &F,
    target: Option<f64>,
    rng: &mut R,
    mut on_generation: impl FnMut(&GenerationStats),
) -> Result<EvolveOutcome, NeError>
where
    R: Rng + ?Sized,
    F: Fitness + ?Sized,
{
    params.validate()?;
    let mut pop = init_population(seed, params, rng);
    let mut history = Vec::with_capacity(params.generations as usize);
    let mut best: Option<Individual> = None;
    let mut seed_fitness = f64::NAN;
    let mut evaluations = 0;
    let mut early_exit = false;

    for generation in 0..params.generations {
        for ind in pop.iter_mut().filter(|i| i.fitness.is_none()) {
            let f = fitness.evaluate(&ind.genome);
            if !f.is_finite() {
                return Err(NeError::NonFiniteFitness(f));
            }
            ind.fitness = Some(f);
            evaluations += 1;
        }
        if generation == 0 {
            seed_fitness = pop[0].score();
        }
        rank(&mut pop);
        if best.as_ref().is_none_or(|b| pop[0].score() > b.score()) {
            best = Some(pop[0].clone());
        }
        let best_ever = best.as_ref().map(Individual::score).expect("set above");
        let stats = GenerationStats {
            generation,
            best_fitness: pop[0].score(),
            mean_fitness: pop.iter().map(Individual::score).sum::<f64>() / pop.len() as f64,
            best_ever,
            evaluations,
        };
        on_generation(&stats);
        history.push(stats);

        if target.is_some_and(|t| best_ever >= t) {
            early_exit = generation + 1 < params.generations;
            break;
        }
        if generation + 1 == params.generations {
            break;
        }
        pop = next_generation(&pop, params, rng)?;
    }

    let best = best.expect("at least one generation");
    Ok(EvolveOutcome {
        best_fitness: best.score(),
        best: best.genome,
        seed_fitness,
        history,
        evaluations,
        early_exit,
    })
}

fn next_generation<R: Rng + ?Sized>(ranked: &[Individual], params: &GaParams, rng: &mut R) -> Result<Population, NeError> {
    let size = params.population as usize;
    let mut next: Population = ranked[..params.elitism as usize].to_vec();
    while next.len() < size {
        let a = select(ranked, rng);
        let b = select(ranked, rng);
        let child = if rng.random::<f64>() < params.crossover_rate {
            crossover(&a.genome, &b.genome)?
        } else if b.score() > a.score() {
            b.genome.clone()
        } else {
            a.genome.clone()
        };
        next.push(Individual::new(mutate(
            &child,
            params.mutation_rate,
            params.mutation_sigma,
            rng,
        )));
    }
    Ok(next)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ne::{tier_params, GaTier};
    use crate::neuro::{NetTopology, OutputHead};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn raw(v: &[f64]) -> Genome {
        Genome::raw(v.to_vec()).unwrap()
    }

    fn evaluated(fitness: &[f64]) -> Population {
        fitness
            .iter()
            .enumerate()
            .map(|(i, &f)| Individual {
                genome: raw(&[i as f64]),
                fitness: Some(f),
            })
            .collect()
    }

    #[test]
    fn crossover_examples() {
        let a = raw(&[0.0, 2.0]);
        let b = raw(&[2.0, 0.0]);
        assert_eq!(crossover(&a, &b).unwrap().values(), &[1.0, 1.0]);
        assert_eq!(crossover(&a, &a).unwrap(), a);
        assert_eq!(crossover(&a, &b).unwrap(), crossover(&b, &a).unwrap());
        assert_eq!(crossover(&a, &raw(&[1.0])), Err(NeError::ShapeMismatch));
        let t1 = NetTopology::new(vec![1, 1], OutputHead::Linear).unwrap();
        let t2 = NetTopology::new(vec![1, 1], OutputHead::Softmax).unwrap();
        let g1 = Genome::new(vec![0.0, 0.0], t1).unwrap();
        let g2 = Genome::new(vec![0.0, 0.0], t2).unwrap();
        assert_eq!(crossover(&g1, &g2), Err(NeError::ShapeMismatch));
    }

    #[test]
    fn zero_rate_mutation_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let g = raw(&[0.5; 100]);
        assert_eq!(mutate(&g, 0.0, 0.05, &mut rng), g);
    }

    #[test]
    fn population_seeding() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let seed = raw(&[1.0, 2.0, 3.0]);
        let mut p = tier_params(GaTier::Low);
        p.population = 2;
        p.mutation_rate = 1.0;
        let pop = init_population(&seed, &p, &mut rng);
        assert_eq!(pop.len(), 2);
        assert_eq!(pop[0].genome, seed);
        assert_ne!(pop[1].genome, seed);

        p.population = 10;
        p.mutation_rate = 0.0;
        assert!(init_population(&seed, &p, &mut rng).iter().all(|i| i.genome == seed));
    }

    #[test]
    fn tournament_of_identical_candidates() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let pop = evaluated(&[3.0]);
        for _ in 0..10 {
            assert_eq!(select_index(&pop, &mut rng), 0);
        }
    }

    #[test]
    fn generation_one_full_elitism_keeps_population() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let seed = raw(&[0.3, -0.4]);
        let params = GaParams {
            generations: 1,
            population: 6,
            elitism: 6,
            ..tier_params(GaTier::High)
        };
        let sphere = |g: &Genome| -g.values().iter().map(|v| v * v).sum::<f64>();
        let mut probe = rng.clone();
        let initial = init_population(&seed, &params, &mut probe);
        let best_initial = initial
            .iter()
            .map(|i| sphere(&i.genome))
            .fold(f64::NEG_INFINITY, f64::max);
        let out = evolve(&seed, &params, &sphere, None, &mut rng, |_| {}).unwrap();
        assert_eq!(out.best_fitness, best_initial);
        assert_eq!(out.history.len(), 1);
        assert_eq!(out.seed_fitness, sphere(&seed));
    }

    #[test]
    fn early_exit_on_target() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let seed = raw(&[0.0]);
        let out = evolve(&seed, &tier_params(GaTier::Low), &|_: &Genome| 5.0, Some(5.0), &mut rng, |_| {}).unwrap();
        assert_eq!(out.history.len(), 1);
        assert!(out.early_exit);
    }

    #[test]
    fn nonfinite_fitness_is_an_error() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let err = evolve(&raw(&[0.0]), &tier_params(GaTier::Low), &|_: &Genome| f64::NAN, None, &mut rng, |_| {});
        assert!(matches!(err, Err(NeError::NonFiniteFitness(_))));
    }

    #[test]
    fn full_rate_mutation_moments() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let g = raw(&[0.0; 10_000]);
        let m = mutate(&g, 1.0, 0.05, &mut rng);
        let n = m.len() as f64;
        let mean = m.values().iter().sum::<f64>() / n;
        let std = (m.values().iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        assert!(mean.abs() <= 0.002, "mean {mean}");
        assert!((std - 0.05).abs() <= 0.005, "std {std}");
    }

    #[test]
    fn partial_rate_changes_expected_count() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let g = raw(&[1.0; 10_000]);
        let changed = mutate(&g, 0.2, 0.05, &mut rng)
            .values()
            .iter()
            .filter(|&&v| v != 1.0)
            .count();
        assert!((changed as f64 - 2000.0).abs() <= 100.0, "changed {changed}");
    }

    #[test]
    fn seeded_population_differs_in_about_one_percent_of_genes() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let seed = raw(&[0.25; 500]);
        let pop = init_population(&seed, &tier_params(GaTier::Low), &mut rng);
        let (mut diff, mut total) = (0usize, 0usize);
        for ind in &pop[1..] {
            diff += ind.genome.values().iter().filter(|&&v| v != 0.25).count();
            total += ind.genome.len();
        }
        let frac = diff as f64 / total as f64;
        // 39 x 500 genes at p = 0.01: sd of the fraction is about 0.0007.
        assert!((frac - 0.01).abs() < 0.003, "fraction {frac}");
    }

    #[test]
    fn tournament_returns_global_best_when_drawn() {
        let pop = evaluated(&[1.0, 9.0, 3.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..200 {
            let mut probe = rng.clone();
            let draws: Vec<usize> = (0..TOURNAMENT_SIZE).map(|_| probe.random_range(0..3)).collect();
            let winner = select_index(&pop, &mut rng);
            if draws.contains(&1) {
                assert_eq!(winner, 1);
            }
        }
    }

    #[test]
    fn tournament_ties_go_to_lower_index() {
        let pop = evaluated(&[5.0, 5.0, 5.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        for _ in 0..200 {
            let mut probe = rng.clone();
            let lowest = (0..TOURNAMENT_SIZE).map(|_| probe.random_range(0..3)).min().unwrap();
            assert_eq!(select_index(&pop, &mut rng), lowest);
        }
    }

    #[test]
    fn selection_pressure_increases_with_rank() {
        let pop = evaluated(&(1..=10).map(f64::from).collect::<Vec<_>>());
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        let mut counts = [0usize; 10];
        for _ in 0..10_000 {
            counts[select_index(&pop, &mut rng)] += 1;
        }
        assert!(counts.windows(2).all(|w| w[0] < w[1]), "{counts:?}");
    }

    #[test]
    fn identical_jobs_are_bit_identical() {
        let seed = raw(&[0.5, -0.5, 0.1]);
        let sphere = |g: &Genome| -g.values().iter().map(|v| v * v).sum::<f64>();
        let run = || {
            let mut rng = ChaCha8Rng::seed_from_u64(16);
            evolve(&seed, &tier_params(GaTier::Low), &sphere, None, &mut rng, |_| {}).unwrap()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn best_ever_is_monotone_and_reproducible() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let seed = raw(&[0.9, -0.7, 0.4, 0.2]);
        let sphere = |g: &Genome| -g.values().iter().map(|v| v * v).sum::<f64>();
        let mut sizes = Vec::new();
        let out = evolve(&seed, &tier_params(GaTier::Medium), &sphere, None, &mut rng, |g| {
            sizes.push(g.evaluations)
        })
        .unwrap();
        assert!(out.history.windows(2).all(|w| w[1].best_fitness >= w[0].best_fitness));
        assert!(out.history.windows(2).all(|w| w[1].best_ever >= w[0].best_ever));
        assert_eq!(out.best_fitness, sphere(&out.best));
        // Elites are never re-evaluated: each later generation adds population - elitism.
        let p = tier_params(GaTier::Medium);
        assert_eq!(sizes[0], p.population as usize);
        assert!(sizes.windows(2).all(|w| w[1] - w[0] == (p.population - p.elitism) as usize));
    }
}

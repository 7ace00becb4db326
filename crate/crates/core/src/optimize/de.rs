//! Differential evolution, `best/1/bin` with dithered mutation.
//!
//! Trial vectors for a generation are built sequentially from one seeded
//! stream, then evaluated together (in parallel) and selected afterwards.
//! Evaluation order therefore never touches the random stream and the result
//! is identical for any thread count.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeConfig {
    pub population: usize,
    pub max_generations: usize,
    /// Mutation factor is drawn uniformly from this range once per generation.
    pub mutation: (f64, f64),
    pub crossover: f64,
    /// Stop once `max - min` of the population objective falls below
    /// `tol * (1 + |best|)`.
    pub tol: f64,
    pub seed: u64,
}

impl DeConfig {
    /// Population of 15 per dimension, 200 generations, CR 0.7.
    pub fn for_dimension(dim: usize, seed: u64) -> Self {
        Self {
            population: 15 * dim,
            max_generations: 200,
            mutation: (0.5, 1.0),
            crossover: 0.7,
            tol: 1e-8,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeResult {
    pub x: Vec<f64>,
    pub value: f64,
    /// Final population objective values.
    pub population_values: Vec<f64>,
    pub generations: usize,
    pub evaluations: usize,
    pub converged: bool,
}

fn finite_or_inf(v: f64) -> f64 {
    if v.is_finite() {
        v
    } else {
        f64::INFINITY
    }
}

fn argmin(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v < values[best] {
            best = i;
        }
    }
    best
}

fn spread_converged(values: &[f64], tol: f64) -> bool {
    let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    hi.is_finite() && hi - lo <= tol * (1.0 + lo.abs())
}

/// Minimizes `f` over the box `[lower, upper]`. Non-finite objective values
/// count as `+inf`.
pub fn differential_evolution<F>(f: F, lower: &[f64], upper: &[f64], cfg: &DeConfig) -> DeResult
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let dim = lower.len();
    assert_eq!(dim, upper.len(), "bound vectors differ in length");
    assert!(cfg.population >= 4, "population must be at least 4");
    let np = cfg.population;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let mut pop: Vec<Vec<f64>> = (0..np)
        .map(|_| {
            (0..dim)
                .map(|j| lower[j] + rng.random::<f64>() * (upper[j] - lower[j]))
                .collect()
        })
        .collect();
    let mut values: Vec<f64> = pop.par_iter().map(|x| finite_or_inf(f(x))).collect();
    let mut evaluations = np;
    let mut best = argmin(&values);
    let mut generations = 0;
    let mut converged = spread_converged(&values, cfg.tol);

    while !converged && generations < cfg.max_generations {
        let scale = cfg.mutation.0 + rng.random::<f64>() * (cfg.mutation.1 - cfg.mutation.0);
        let trials: Vec<Vec<f64>> = (0..np)
            .map(|i| {
                let (r1, r2) = loop {
                    let a = rng.random_range(0..np);
                    let b = rng.random_range(0..np);
                    if a != i && b != i && a != b {
                        break (a, b);
                    }
                };
                let forced = rng.random_range(0..dim);
                (0..dim)
                    .map(|j| {
                        let cross = j == forced || rng.random::<f64>() < cfg.crossover;
                        if !cross {
                            return pop[i][j];
                        }
                        let v = pop[best][j] + scale * (pop[r1][j] - pop[r2][j]);
                        if v < lower[j] || v > upper[j] {
                            lower[j] + rng.random::<f64>() * (upper[j] - lower[j])
                        } else {
                            v
                        }
                    })
                    .collect()
            })
            .collect();
        let trial_values: Vec<f64> = trials.par_iter().map(|x| finite_or_inf(f(x))).collect();
        evaluations += np;
        for (i, (x, v)) in trials.into_iter().zip(trial_values).enumerate() {
            if v <= values[i] {
                pop[i] = x;
                values[i] = v;
            }
        }
        best = argmin(&values);
        generations += 1;
        converged = spread_converged(&values, cfg.tol);
    }

    DeResult {
        x: pop[best].clone(),
        value: values[best],
        population_values: values,
        generations,
        evaluations,
        converged,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rosenbrock(x: &[f64]) -> f64 {
        x.windows(2)
            .map(|w| 100.0 * (w[1] - w[0] * w[0]).powi(2) + (1.0 - w[0]).powi(2))
            .sum()
    }

    #[test]
    fn finds_rosenbrock_minimum() {
        let mut cfg = DeConfig::for_dimension(3, 11);
        cfg.max_generations = 1000;
        let r = differential_evolution(rosenbrock, &[-2.0; 3], &[2.0; 3], &cfg);
        for v in &r.x {
            assert!((v - 1.0).abs() < 1e-3, "{:?}", r.x);
        }
        assert!(r.value < 1e-6);
    }

    #[test]
    fn best_is_population_minimum() {
        let cfg = DeConfig::for_dimension(2, 3);
        let r = differential_evolution(rosenbrock, &[-2.0; 2], &[2.0; 2], &cfg);
        assert!(r.population_values.iter().all(|v| r.value <= *v));
    }

    #[test]
    fn respects_bounds() {
        let cfg = DeConfig::for_dimension(2, 5);
        // Unconstrained minimum at (3, -3) lies outside the box.
        let r = differential_evolution(
            |x: &[f64]| (x[0] - 3.0).powi(2) + (x[1] + 3.0).powi(2),
            &[-1.0, -1.0],
            &[1.0, 1.0],
            &cfg,
        );
        assert!((r.x[0] - 1.0).abs() < 1e-6 && (r.x[1] + 1.0).abs() < 1e-6, "{:?}", r.x);
    }

    #[test]
    fn infinite_values_are_avoided() {
        let cfg = DeConfig::for_dimension(1, 9);
        let r = differential_evolution(
            |x: &[f64]| if x[0] < 0.0 { f64::NAN } else { (x[0] - 0.5).powi(2) },
            &[-1.0],
            &[1.0],
            &cfg,
        );
        assert!((r.x[0] - 0.5).abs() < 1e-4);
    }

    #[test]
    fn deterministic_across_thread_counts() {
        let cfg = DeConfig::for_dimension(3, 42);
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| differential_evolution(rosenbrock, &[-2.0; 3], &[2.0; 3], &cfg))
        };
        assert_eq!(run(1), run(4));
    }
}

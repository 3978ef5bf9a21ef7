//! Fixtures shared by the benchmarks.

use pimp_core::benchmarks::make_cases;
use pimp_core::individual::ramped_half_and_half;
use pimp_core::{FitnessCases, Individual, Population, PrimitiveSet, Problem};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn cases(problem: Problem) -> FitnessCases {
    make_cases(problem, &mut rng(1))
}

/// An evaluated ramped half-and-half population.
pub fn population(problem: Problem, size: usize, seed: u64) -> Population {
    let prims = PrimitiveSet::new(problem.num_vars());
    let mut r = rng(seed);
    let sols = ramped_half_and_half(size, 2, 6, &prims, &mut r);
    let prefs = ramped_half_and_half(size, 2, 6, &prims, &mut r);
    let cases = cases(problem);
    let mut members: Vec<Individual> = sols.into_iter().zip(prefs).map(|(s, p)| Individual::new(s, p)).collect();
    for m in &mut members {
        m.evaluate(&cases).expect("generated trees use valid variables");
    }
    Population::new(members)
}

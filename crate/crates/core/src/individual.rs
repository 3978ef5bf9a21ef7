//! Dual-chromosome individuals and ramped half-and-half initialization.

use std::io::{BufRead, Write};

use rand::Rng;

use crate::benchmarks::FitnessCases;
use crate::engine::RunConfig;
use crate::error::{Error, Result};
use crate::primitives::{Evaluator, ExprTree, Function, Node, PrimitiveSet};

/// A solution chromosome plus an encoded ideal-partner chromosome. Fitness
/// depends only on the solution.
#[derive(Clone, Debug, PartialEq)]
pub struct Individual {
    pub solution: ExprTree,
    pub preference: ExprTree,
    fitness: Option<f64>,
}

impl Individual {
    pub fn new(solution: ExprTree, preference: ExprTree) -> Self {
        Individual {
            solution,
            preference,
            fitness: None,
        }
    }

    pub fn fitness(&self) -> Option<f64> {
        self.fitness
    }

    pub fn set_fitness(&mut self, fitness: f64) {
        debug_assert!(fitness >= 0.0);
        self.fitness = Some(fitness);
    }

    pub fn clear_fitness(&mut self) {
        self.fitness = None;
    }

    /// Fitness of an evaluated individual; panics otherwise.
    pub fn evaluated_fitness(&self) -> f64 {
        self.fitness.expect("individual has not been evaluated")
    }

    /// Mean squared error of the solution chromosome over `cases`, cached.
    pub fn evaluate(&mut self, cases: &FitnessCases) -> Result<f64> {
        let mut ev = Evaluator::new();
        self.evaluate_with(cases, &mut ev)
    }

    pub fn evaluate_with(&mut self, cases: &FitnessCases, ev: &mut Evaluator) -> Result<f64> {
        let outputs = ev.eval_columns(&self.solution, cases.columns())?;
        let fitness = mse(&outputs, cases.targets());
        ev.recycle(outputs);
        self.fitness = Some(fitness);
        Ok(fitness)
    }
}

/// Mean of squared differences; saturates to `f64::MAX` if the sum overflows.
pub fn mse(outputs: &[f64], targets: &[f64]) -> f64 {
    debug_assert_eq!(outputs.len(), targets.len());
    let sum: f64 = outputs
        .iter()
        .zip(targets)
        .map(|(o, t)| {
            let d = o - t;
            d * d
        })
        .sum();
    let m = sum / outputs.len() as f64;
    if m.is_finite() {
        m
    } else {
        f64::MAX
    }
}

#[derive(Clone, Debug, PartialEq, Default)]
pub struct Population {
    members: Vec<Individual>,
}

impl Population {
    pub fn new(members: Vec<Individual>) -> Self {
        Population { members }
    }

    pub fn members(&self) -> &[Individual] {
        &self.members
    }

    pub fn members_mut(&mut self) -> &mut [Individual] {
        &mut self.members
    }

    pub fn into_members(self) -> Vec<Individual> {
        self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn get(&self, index: usize) -> &Individual {
        &self.members[index]
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Individual> {
        self.members.iter()
    }

    pub fn is_evaluated(&self) -> bool {
        self.members.iter().all(|m| m.fitness.is_some())
    }

    /// Sorted solution serializations.
    pub fn solution_strings(&self) -> Vec<String> {
        let mut out: Vec<String> = self.members.iter().map(|m| m.solution.to_string()).collect();
        out.sort();
        out
    }

    /// One line per individual: `solution<TAB>preference<TAB>fitness`, with
    /// `NA` for unevaluated fitness.
    pub fn write_snapshot(&self, mut out: impl Write) -> std::io::Result<()> {
        for m in &self.members {
            match m.fitness {
                Some(f) => writeln!(out, "{}\t{}\t{:?}", m.solution, m.preference, f)?,
                None => writeln!(out, "{}\t{}\tNA", m.solution, m.preference)?,
            }
        }
        Ok(())
    }

    pub fn read_snapshot(input: impl BufRead) -> Result<Population> {
        let mut members = Vec::new();
        for (n, line) in input.lines().enumerate() {
            let line = line.map_err(|e| Error::io("<snapshot>", e))?;
            if line.is_empty() {
                continue;
            }
            let bad = |msg: &str| Error::Format {
                path: "<snapshot>".into(),
                message: format!("line {}: {msg}", n + 1),
            };
            let mut fields = line.split('\t');
            let (Some(sol), Some(pref), Some(fit), None) =
                (fields.next(), fields.next(), fields.next(), fields.next())
            else {
                return Err(bad("expected three tab-separated fields"));
            };
            let mut ind = Individual::new(sol.parse()?, pref.parse()?);
            if fit != "NA" {
                let f: f64 = fit.parse().map_err(|_| bad("fitness is not a number"))?;
                ind.set_fitness(f);
            }
            members.push(ind);
        }
        Ok(Population { members })
    }
}

impl<'a> IntoIterator for &'a Population {
    type Item = &'a Individual;
    type IntoIter = std::slice::Iter<'a, Individual>;

    fn into_iter(self) -> Self::IntoIter {
        self.members.iter()
    }
}

fn random_terminal<R: Rng + ?Sized>(prims: &PrimitiveSet, rng: &mut R) -> Node {
    Node::Var(rng.gen_range(0..prims.num_vars))
}

fn random_function<R: Rng + ?Sized>(rng: &mut R) -> Node {
    Node::Func(Function::ALL[rng.gen_range(0..Function::ALL.len())])
}

fn build(
    prims: &PrimitiveSet,
    rng: &mut (impl Rng + ?Sized),
    level: usize,
    max_depth: usize,
    min_depth: usize,
    full: bool,
    out: &mut Vec<Node>,
) {
    let node = if level >= max_depth {
        random_terminal(prims, rng)
    } else if full || level < min_depth {
        random_function(rng)
    } else if rng.gen_bool(prims.terminal_ratio()) {
        random_terminal(prims, rng)
    } else {
        random_function(rng)
    };
    out.push(node);
    for _ in 0..node.arity() {
        build(prims, rng, level + 1, max_depth, min_depth, full, out);
    }
}

/// Full method: every branch reaches exactly `depth`.
pub fn full_tree<R: Rng + ?Sized>(prims: &PrimitiveSet, depth: usize, rng: &mut R) -> ExprTree {
    assert!(depth >= 1);
    let mut nodes = Vec::new();
    build(prims, rng, 1, depth, depth, true, &mut nodes);
    ExprTree::from_nodes_unchecked(nodes)
}

/// Grow method: nodes shallower than `min_depth` are functions, nodes at
/// `max_depth` are terminals, and in between a terminal is picked with
/// probability |T| / (|T| + |F|).
pub fn grow_tree<R: Rng + ?Sized>(
    prims: &PrimitiveSet,
    min_depth: usize,
    max_depth: usize,
    rng: &mut R,
) -> ExprTree {
    assert!(1 <= min_depth && min_depth <= max_depth);
    let mut nodes = Vec::new();
    build(prims, rng, 1, max_depth, min_depth, false, &mut nodes);
    ExprTree::from_nodes_unchecked(nodes)
}

/// Ramped half-and-half: each tree draws its depth limit uniformly from
/// `[depth_low, depth_high]`; even positions use full, odd positions grow.
pub fn ramped_half_and_half<R: Rng + ?Sized>(
    count: usize,
    depth_low: usize,
    depth_high: usize,
    prims: &PrimitiveSet,
    rng: &mut R,
) -> Vec<ExprTree> {
    assert!(1 <= depth_low && depth_low <= depth_high, "invalid depth range");
    (0..count)
        .map(|i| {
            let depth = rng.gen_range(depth_low..=depth_high);
            if i % 2 == 0 {
                full_tree(prims, depth, rng)
            } else {
                grow_tree(prims, depth_low, depth, rng)
            }
        })
        .collect()
}

/// Builds generation 0. Solutions come only from `rng_solutions` and
/// preferences only from `rng_preferences`, so every approach sharing a run
/// seed starts from the same solution chromosomes.
pub fn init_population<R1: Rng + ?Sized, R2: Rng + ?Sized>(
    config: &RunConfig,
    rng_solutions: &mut R1,
    rng_preferences: &mut R2,
) -> Population {
    let prims = PrimitiveSet::new(config.problem.num_vars());
    let (lo, hi) = config.init_depth_range;
    let solutions = ramped_half_and_half(config.population_size, lo, hi, &prims, rng_solutions);
    let preferences = ramped_half_and_half(config.population_size, lo, hi, &prims, rng_preferences);
    Population::new(
        solutions
            .into_iter()
            .zip(preferences)
            .map(|(s, p)| Individual::new(s, p))
            .collect(),
    )
}

//! Generational loop and per-run metrics.
//!
//! Each generation breeds exactly `population_size` offspring (select →
//! crossover → mutate) and replaces the parents wholesale. Offspring `i` of
//! generation `g` draws all of its randomness from its own substream keyed by
//! `(run_seed, g, i)`.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::benchmarks::{make_cases, FitnessCases, Problem};
use crate::error::{Error, Result};
use crate::individual::{init_population, mse, Individual, Population};
use crate::primitives::{Evaluator, ExprTree, PrimitiveSet};
pub use crate::selection::Approach;
use crate::selection::{select_couple, CoupleRecord, MatingPool, SelectionConfig};
use crate::streams::{breeding_stream, stream, Stream};
use crate::variation::{one_point_crossover, subtree_mutation, VariationConfig};

/// A run succeeds once some individual scores strictly below this MSE.
pub const SUCCESS_THRESHOLD: f64 = 1e-4;

/// Mutation rates studied in the experiment matrix.
pub const STUDIED_MUTATION_RATES: [f64; 2] = [0.05, 0.10];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub approach: Approach,
    pub problem: Problem,
    pub mutation_prob: f64,
    pub crossover_prob: f64,
    pub population_size: usize,
    pub generations: usize,
    pub tournament_size: usize,
    pub candidate_set_size: usize,
    pub max_depth: usize,
    pub init_depth_range: (usize, usize),
    pub mutation_depth_range: (usize, usize),
    pub run_seed: u64,
    pub metrics_interval: usize,
}

impl RunConfig {
    /// Default setup: population 100, 1500 generations, crossover 0.9,
    /// tournaments and candidate sets of 5, depth cap 17, ramp [2, 6].
    pub fn new(approach: Approach, problem: Problem, mutation_prob: f64, run_seed: u64) -> Self {
        RunConfig {
            approach,
            problem,
            mutation_prob,
            crossover_prob: 0.9,
            population_size: 100,
            generations: 1500,
            tournament_size: 5,
            candidate_set_size: 5,
            max_depth: 17,
            init_depth_range: (2, 6),
            mutation_depth_range: (2, 6),
            run_seed,
            metrics_interval: 100,
        }
    }

    pub fn variation(&self) -> VariationConfig {
        VariationConfig {
            crossover_prob: self.crossover_prob,
            mutation_prob: self.mutation_prob,
            max_depth: self.max_depth,
            mutation_depth: self.mutation_depth_range,
        }
    }

    pub fn selection(&self) -> SelectionConfig {
        SelectionConfig {
            approach: self.approach,
            tournament_size: self.tournament_size,
            candidate_set_size: self.candidate_set_size,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.population_size < 1 {
            return Err(Error::config("population size must be positive"));
        }
        if self.metrics_interval < 1 {
            return Err(Error::config("metrics interval must be positive"));
        }
        let (lo, hi) = self.init_depth_range;
        if lo < 1 || lo > hi {
            return Err(Error::config(format!("invalid initial depth range [{lo}, {hi}]")));
        }
        self.variation().validate()?;
        self.selection().validate(self.population_size)
    }

    /// Names of fields that differ from the default setup.
    pub fn overrides(&self) -> Vec<String> {
        let d = RunConfig::new(self.approach, self.problem, self.mutation_prob, self.run_seed);
        let mut out = Vec::new();
        if !STUDIED_MUTATION_RATES.contains(&self.mutation_prob) {
            out.push("mutation_prob".to_string());
        }
        let mut check = |name: &str, differs: bool| {
            if differs {
                out.push(name.to_string());
            }
        };
        check("crossover_prob", self.crossover_prob != d.crossover_prob);
        check("population_size", self.population_size != d.population_size);
        check("generations", self.generations != d.generations);
        check("tournament_size", self.tournament_size != d.tournament_size);
        check("candidate_set_size", self.candidate_set_size != d.candidate_set_size);
        check("max_depth", self.max_depth != d.max_depth);
        check("init_depth_range", self.init_depth_range != d.init_depth_range);
        check("mutation_depth_range", self.mutation_depth_range != d.mutation_depth_range);
        check("metrics_interval", self.metrics_interval != d.metrics_interval);
        out
    }
}

/// Roles among the distinct individuals selected in one generation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoleTally {
    pub generation: u64,
    pub choosers_only: usize,
    pub courters_only: usize,
    pub both: usize,
    /// Best (lowest) fitness within each role group.
    pub mbf_choosers: Option<f64>,
    pub mbf_courters: Option<f64>,
    pub mbf_both: Option<f64>,
    /// Mean fitness within each role group.
    pub mean_choosers: Option<f64>,
    pub mean_courters: Option<f64>,
    pub mean_both: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenerationRecord {
    #[serde(rename = "gen")]
    pub generation: u64,
    pub best: f64,
    pub mean_size: f64,
    /// Present at every metrics interval and at the final generation.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub unique: Option<usize>,
    pub roots: BTreeMap<String, usize>,
    pub roles: RoleTally,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub config: RunConfig,
    pub overrides: Vec<String>,
    pub final_best: f64,
    pub final_best_tree: String,
    pub best_ever: f64,
    pub best_ever_generation: u64,
    pub best_ever_tree: String,
    pub success: bool,
    pub final_unique: usize,
    pub root_converged: bool,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
enum LogLine {
    Generation(GenerationRecord),
    Summary(RunSummary),
}

/// Persisted part of a run: per-generation records plus the summary.
#[derive(Clone, Debug, PartialEq)]
pub struct RunRecord {
    pub generations: Vec<GenerationRecord>,
    pub summary: RunSummary,
}

impl RunRecord {
    /// JSON-lines: one `"kind":"generation"` object per generation followed
    /// by a single `"kind":"summary"` object.
    pub fn write_jsonl(&self, mut out: impl Write) -> std::io::Result<()> {
        for g in &self.generations {
            serde_json::to_writer(&mut out, &LogLine::Generation(g.clone()))?;
            out.write_all(b"\n")?;
        }
        serde_json::to_writer(&mut out, &LogLine::Summary(self.summary.clone()))?;
        out.write_all(b"\n")
    }

    pub fn read_jsonl(input: impl BufRead) -> Result<RunRecord> {
        let mut generations = Vec::new();
        let mut summary = None;
        for (n, line) in input.lines().enumerate() {
            let line = line.map_err(|e| Error::io("<run log>", e))?;
            if line.trim().is_empty() {
                continue;
            }
            let parsed: LogLine = serde_json::from_str(&line).map_err(|e| Error::Format {
                path: "<run log>".into(),
                message: format!("line {}: {e}", n + 1),
            })?;
            match parsed {
                LogLine::Generation(g) => generations.push(g),
                LogLine::Summary(s) => summary = Some(s),
            }
        }
        let summary = summary.ok_or_else(|| Error::Incomplete("run log has no summary record".into()))?;
        Ok(RunRecord {
            generations,
            summary,
        })
    }

    /// Final-generation unique-solution count as a percentage of the population.
    pub fn final_unique_pct(&self) -> f64 {
        100.0 * self.summary.final_unique as f64 / self.summary.config.population_size as f64
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MetricsLog {
    pub record: RunRecord,
    pub initial_population: Population,
    pub final_population: Population,
}

impl MetricsLog {
    pub fn generations(&self) -> &[GenerationRecord] {
        &self.record.generations
    }

    pub fn summary(&self) -> &RunSummary {
        &self.record.summary
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BestOfRun {
    /// Best fitness in the final population (the MBF contribution).
    pub final_best: f64,
    pub final_best_tree: String,
    /// Best fitness seen in any generation.
    pub best_ever: f64,
    pub success: bool,
}

pub fn best_of_run(log: &MetricsLog) -> BestOfRun {
    let s = log.summary();
    BestOfRun {
        final_best: s.final_best,
        final_best_tree: s.final_best_tree.clone(),
        best_ever: s.best_ever,
        success: is_success(s.best_ever),
    }
}

pub fn is_success(best_ever: f64) -> bool {
    best_ever < SUCCESS_THRESHOLD
}

/// Number of distinct solution chromosomes; preferences are ignored.
pub fn unique_solutions(pop: &Population) -> usize {
    pop.iter().map(|m| &m.solution).collect::<HashSet<&ExprTree>>().len()
}

/// True iff every solution has the same root symbol.
pub fn root_converged(pop: &Population) -> Result<bool> {
    let first = pop
        .iter()
        .next()
        .ok_or_else(|| Error::config("root convergence of an empty population"))?
        .solution
        .root();
    Ok(pop.iter().all(|m| m.solution.root() == first))
}

/// Count of solutions per root symbol.
pub fn root_census(pop: &Population) -> BTreeMap<String, usize> {
    let mut census = BTreeMap::new();
    for m in pop {
        *census.entry(m.solution.root().symbol()).or_insert(0) += 1;
    }
    census
}

/// Partitions the distinct individuals picked in one generation into
/// chooser-only, courter-only and both, with per-group best and mean fitness.
pub fn tally_roles(couples: &[CoupleRecord], pop: &Population, generation: u64) -> Result<RoleTally> {
    let mut choosers = BTreeSet::new();
    let mut courters = BTreeSet::new();
    for c in couples {
        if c.generation != generation {
            return Err(Error::config(format!(
                "couple from generation {} tallied as generation {generation}",
                c.generation
            )));
        }
        if c.chooser >= pop.len() || c.courter >= pop.len() {
            return Err(Error::config("couple index outside the population"));
        }
        choosers.insert(c.chooser);
        courters.insert(c.courter);
    }
    let both: Vec<usize> = choosers.intersection(&courters).copied().collect();
    let choosers_only: Vec<usize> = choosers.difference(&courters).copied().collect();
    let courters_only: Vec<usize> = courters.difference(&choosers).copied().collect();
    let stat = |group: &[usize]| -> (Option<f64>, Option<f64>) {
        if group.is_empty() {
            return (None, None);
        }
        let fits: Vec<f64> = group.iter().map(|&i| pop.get(i).evaluated_fitness()).collect();
        let best = fits.iter().copied().fold(f64::INFINITY, f64::min);
        let mean = fits.iter().sum::<f64>() / fits.len() as f64;
        (Some(best), Some(mean.min(f64::MAX)))
    };
    let (mbf_choosers, mean_choosers) = stat(&choosers_only);
    let (mbf_courters, mean_courters) = stat(&courters_only);
    let (mbf_both, mean_both) = stat(&both);
    Ok(RoleTally {
        generation,
        choosers_only: choosers_only.len(),
        courters_only: courters_only.len(),
        both: both.len(),
        mbf_choosers,
        mbf_courters,
        mbf_both,
        mean_choosers,
        mean_courters,
        mean_both,
    })
}

/// Evaluates every member, reusing fitness and outputs for trees already
/// scored in `known` or earlier in `pop`. Returns per-member solution outputs.
fn evaluate_population(
    pop: &mut Population,
    cases: &FitnessCases,
    ev: &mut Evaluator,
    known: Option<(&Population, &[Vec<f64>])>,
) -> Result<Vec<Vec<f64>>> {
    let mut by_tree: HashMap<ExprTree, (f64, usize)> = HashMap::new();
    let mut outputs: Vec<Vec<f64>> = Vec::with_capacity(pop.len());
    let mut previous: HashMap<&ExprTree, usize> = HashMap::new();
    if let Some((prev, _)) = known {
        for (i, m) in prev.iter().enumerate() {
            previous.entry(&m.solution).or_insert(i);
        }
    }
    for (i, m) in pop.members_mut().iter_mut().enumerate() {
        if let Some(&j) = previous.get(&m.solution) {
            let (prev, prev_out) = known.expect("previous generation present");
            m.set_fitness(prev.get(j).evaluated_fitness());
            outputs.push(prev_out[j].clone());
        } else if let Some(&(f, j)) = by_tree.get(&m.solution) {
            m.set_fitness(f);
            outputs.push(outputs[j].clone());
        } else {
            let out = ev.eval_columns(&m.solution, cases.columns())?;
            let f = mse(&out, cases.targets());
            m.set_fitness(f);
            by_tree.insert(m.solution.clone(), (f, i));
            outputs.push(out);
        }
    }
    Ok(outputs)
}

fn generation_record(pop: &Population, generation: u64, unique: bool, roles: RoleTally) -> GenerationRecord {
    let best = pop
        .iter()
        .map(Individual::evaluated_fitness)
        .fold(f64::INFINITY, f64::min);
    let mean_size = pop.iter().map(|m| m.solution.size() as f64).sum::<f64>() / pop.len() as f64;
    GenerationRecord {
        generation,
        best,
        mean_size,
        unique: unique.then(|| unique_solutions(pop)),
        roots: root_census(pop),
        roles,
    }
}

fn best_member(pop: &Population) -> &Individual {
    // first index among equals
    pop.iter()
        .reduce(|a, b| if b.evaluated_fitness() < a.evaluated_fitness() { b } else { a })
        .expect("non-empty population")
}

/// Executes one complete run.
pub fn run(config: &RunConfig) -> Result<MetricsLog> {
    run_with_couples(config, |_| {})
}

/// Like [`run`], also handing every couple to `on_couple` in index order.
pub fn run_with_couples(config: &RunConfig, mut on_couple: impl FnMut(&CoupleRecord)) -> Result<MetricsLog> {
    config.validate()?;
    let seed = config.run_seed;
    let prims = PrimitiveSet::new(config.problem.num_vars());
    let variation = config.variation();
    let selection = config.selection();
    let cases = make_cases(config.problem, &mut stream(seed, Stream::FitnessCases));

    let mut pop = init_population(
        config,
        &mut stream(seed, Stream::InitSolutions),
        &mut stream(seed, Stream::InitPreferences),
    );
    let mut ev = Evaluator::new();
    let mut outputs = evaluate_population(&mut pop, &cases, &mut ev, None)?;
    let initial_population = pop.clone();

    let last = config.generations as u64;
    let interval = config.metrics_interval as u64;
    let mut records = Vec::with_capacity(config.generations + 1);
    let mut best_ever = f64::INFINITY;
    let mut best_ever_generation = 0;
    let mut best_ever_tree = String::new();

    for g in 0..=last {
        let champion = best_member(&pop);
        if champion.evaluated_fitness() < best_ever {
            best_ever = champion.evaluated_fitness();
            best_ever_generation = g;
            best_ever_tree = champion.solution.to_string();
        }
        let track_unique = g % interval == 0 || g == last;
        if g == last {
            let roles = tally_roles(&[], &pop, g)?;
            records.push(generation_record(&pop, g, track_unique, roles));
            break;
        }

        let pool = MatingPool::with_solution_outputs(&pop, &cases, &outputs);
        let mut couples = Vec::with_capacity(pop.len());
        let mut offspring = Vec::with_capacity(pop.len());
        for i in 0..pop.len() {
            let mut rng = breeding_stream(seed, g + 1, i as u64);
            let (chooser, courter) = select_couple(&pool, &selection, &mut rng);
            let child = one_point_crossover(pop.get(chooser), pop.get(courter), &variation, &mut rng);
            let child = subtree_mutation(child, &variation, &prims, &mut rng);
            let couple = CoupleRecord {
                generation: g,
                chooser,
                courter,
            };
            on_couple(&couple);
            couples.push(couple);
            offspring.push(child);
        }
        drop(pool);
        let roles = tally_roles(&couples, &pop, g)?;
        records.push(generation_record(&pop, g, track_unique, roles));

        let mut next = Population::new(offspring);
        let next_outputs = evaluate_population(&mut next, &cases, &mut ev, Some((&pop, &outputs)))?;
        pop = next;
        outputs = next_outputs;
    }

    let champion = best_member(&pop);
    let summary = RunSummary {
        config: config.clone(),
        overrides: config.overrides(),
        final_best: champion.evaluated_fitness(),
        final_best_tree: champion.solution.to_string(),
        best_ever,
        best_ever_generation,
        best_ever_tree,
        success: is_success(best_ever),
        final_unique: unique_solutions(&pop),
        root_converged: root_converged(&pop)?,
    };
    Ok(MetricsLog {
        record: RunRecord {
            generations: records,
            summary,
        },
        initial_population,
        final_population: pop,
    })
}

//! Experiment plans: which cells to run and how seeds are assigned.
//!
//! The on-disk format is flat `key = value` text with `#` comments:
//!
//! ```text
//! problems       = koza1, nguyen6, pagie1
//! mutation_rates = 0.05, 0.10
//! approaches     = pimp, random, standard
//! runs           = 30
//! master_seed    = 2024
//! generations    = 200    # optional override
//! population     = 100    # optional override
//! ```

use std::fmt;
use std::str::FromStr;

use crate::benchmarks::Problem;
use crate::engine::{RunConfig, STUDIED_MUTATION_RATES};
use crate::error::{Error, Result};
use crate::selection::Approach;
use crate::streams::mix;

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentPlan {
    pub problems: Vec<Problem>,
    pub mutation_rates: Vec<f64>,
    pub approaches: Vec<Approach>,
    pub runs: usize,
    pub master_seed: u64,
    pub generations: Option<usize>,
    pub population: Option<usize>,
}

impl ExperimentPlan {
    /// The full matrix: 3 problems x 2 rates x 3 approaches x 30 runs.
    pub fn full(master_seed: u64) -> Self {
        ExperimentPlan {
            problems: Problem::ALL.to_vec(),
            mutation_rates: STUDIED_MUTATION_RATES.to_vec(),
            approaches: Approach::ALL.to_vec(),
            runs: 30,
            master_seed,
            generations: None,
            population: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.problems.is_empty() || self.mutation_rates.is_empty() || self.approaches.is_empty() {
            return Err(Error::config("plan lists no problems, rates or approaches"));
        }
        if self.runs == 0 {
            return Err(Error::config("plan needs at least one run per cell"));
        }
        for &rate in &self.mutation_rates {
            if !STUDIED_MUTATION_RATES.contains(&rate) {
                return Err(Error::config(format!(
                    "mutation rate {rate} is not one of {STUDIED_MUTATION_RATES:?}"
                )));
            }
        }
        fn distinct<T: PartialEq>(xs: &[T]) -> bool {
            xs.iter().enumerate().all(|(i, x)| !xs[..i].contains(x))
        }
        if !distinct(&self.problems) || !distinct(&self.mutation_rates) || !distinct(&self.approaches) {
            return Err(Error::config("plan lists a value twice"));
        }
        if self.population == Some(0) {
            return Err(Error::config("population must be positive"));
        }
        Ok(())
    }

    /// Cells in canonical order (problem, then rate), independent of the
    /// order written in the plan file.
    pub fn cells(&self) -> Vec<(Problem, f64)> {
        let mut out = Vec::new();
        for p in Problem::ALL {
            if !self.problems.contains(&p) {
                continue;
            }
            for rate in STUDIED_MUTATION_RATES {
                if self.mutation_rates.contains(&rate) {
                    out.push((p, rate));
                }
            }
        }
        out
    }

    /// Approaches in canonical order.
    pub fn approaches_sorted(&self) -> Vec<Approach> {
        Approach::ALL.into_iter().filter(|a| self.approaches.contains(a)).collect()
    }

    pub fn total_runs(&self) -> usize {
        self.problems.len() * self.mutation_rates.len() * self.approaches.len() * self.runs
    }

    pub fn run_seed(&self, problem: Problem, rate: f64, run: usize) -> u64 {
        run_seed(self.master_seed, problem, rate, run)
    }

    pub fn run_config(&self, approach: Approach, problem: Problem, rate: f64, run: usize) -> RunConfig {
        let mut cfg = RunConfig::new(approach, problem, rate, self.run_seed(problem, rate, run));
        if let Some(g) = self.generations {
            cfg.generations = g;
        }
        if let Some(p) = self.population {
            cfg.population_size = p;
        }
        cfg
    }
}

/// Seed of run `run` in a cell. The approach is deliberately not mixed in,
/// so all approaches in a cell start from the same populations and cases.
pub fn run_seed(master_seed: u64, problem: Problem, rate: f64, run: usize) -> u64 {
    mix(&[master_seed, problem.seed_tag(), rate_tag(rate), run as u64])
}

fn rate_tag(rate: f64) -> u64 {
    (rate * 1000.0).round() as u64
}

/// Directory name for a mutation rate, e.g. `0.05`.
pub fn rate_label(rate: f64) -> String {
    format!("{rate:.2}")
}

fn parse_list<T>(key: &str, value: &str, f: impl Fn(&str) -> Result<T>) -> Result<Vec<T>> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| f(s).map_err(|e| Error::config(format!("{key}: {e}"))))
        .collect()
}

fn parse_num<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::config(format!("{key}: cannot parse {value:?}")))
}

impl FromStr for ExperimentPlan {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let mut problems = None;
        let mut rates = None;
        let mut approaches = None;
        let mut runs = None;
        let mut seed = None;
        let mut generations = None;
        let mut population = None;
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::config(format!("line {}: expected key = value", n + 1)));
            };
            let (key, value) = (key.trim(), value.trim());
            match key {
                "problems" => problems = Some(parse_list(key, value, str::parse::<Problem>)?),
                "mutation_rates" => rates = Some(parse_list(key, value, |s| parse_num::<f64>(key, s))?),
                "approaches" => approaches = Some(parse_list(key, value, str::parse::<Approach>)?),
                "runs" => runs = Some(parse_num(key, value)?),
                "master_seed" => seed = Some(parse_num(key, value)?),
                "generations" => generations = Some(parse_num(key, value)?),
                "population" => population = Some(parse_num(key, value)?),
                other => return Err(Error::config(format!("line {}: unknown key {other:?}", n + 1))),
            }
        }
        let missing = |k: &str| Error::config(format!("plan is missing {k:?}"));
        let plan = ExperimentPlan {
            problems: problems.ok_or_else(|| missing("problems"))?,
            mutation_rates: rates.ok_or_else(|| missing("mutation_rates"))?,
            approaches: approaches.ok_or_else(|| missing("approaches"))?,
            runs: runs.ok_or_else(|| missing("runs"))?,
            master_seed: seed.ok_or_else(|| missing("master_seed"))?,
            generations,
            population,
        };
        plan.validate()?;
        Ok(plan)
    }
}

/// Canonical form; parsing it back gives an equal plan.
impl fmt::Display for ExperimentPlan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let join = |xs: Vec<String>| xs.join(", ");
        writeln!(f, "problems = {}", join(self.problems.iter().map(|p| p.name().to_string()).collect()))?;
        writeln!(f, "mutation_rates = {}", join(self.mutation_rates.iter().map(|r| rate_label(*r)).collect()))?;
        writeln!(f, "approaches = {}", join(self.approaches.iter().map(|a| a.name().to_string()).collect()))?;
        writeln!(f, "runs = {}", self.runs)?;
        writeln!(f, "master_seed = {}", self.master_seed)?;
        if let Some(g) = self.generations {
            writeln!(f, "generations = {g}")?;
        }
        if let Some(p) = self.population {
            writeln!(f, "population = {p}")?;
        }
        Ok(())
    }
}

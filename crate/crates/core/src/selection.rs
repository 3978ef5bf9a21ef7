//! Parent selection: evolvable-preference mate choice (PIMP), random mate
//! choice, and the two-tournament baseline.

use std::cell::{Cell, RefCell};
use std::fmt;
use std::str::FromStr;

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::benchmarks::FitnessCases;
use crate::error::{Error, Result};
use crate::individual::{mse, Individual, Population};
use crate::primitives::Evaluator;

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Approach {
    #[serde(rename = "pimp")]
    Pimp,
    #[serde(rename = "random")]
    RandomMate,
    #[serde(rename = "standard")]
    Standard,
}

impl Approach {
    pub const ALL: [Approach; 3] = [Approach::Pimp, Approach::RandomMate, Approach::Standard];

    /// Command-line / directory name.
    pub fn name(self) -> &'static str {
        match self {
            Approach::Pimp => "pimp",
            Approach::RandomMate => "random",
            Approach::Standard => "standard",
        }
    }

    /// Column header used in reports.
    pub fn label(self) -> &'static str {
        match self {
            Approach::Pimp => "PIMP",
            Approach::RandomMate => "RandomMate",
            Approach::Standard => "Standard",
        }
    }
}

impl fmt::Display for Approach {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Approach {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "pimp" => Ok(Approach::Pimp),
            "random" | "randommate" | "random-mate" => Ok(Approach::RandomMate),
            "standard" => Ok(Approach::Standard),
            other => Err(Error::config(format!("unknown approach '{other}'"))),
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub struct SelectionConfig {
    pub approach: Approach,
    pub tournament_size: usize,
    pub candidate_set_size: usize,
}

impl SelectionConfig {
    pub fn new(approach: Approach) -> Self {
        SelectionConfig {
            approach,
            tournament_size: 5,
            candidate_set_size: 5,
        }
    }

    pub fn validate(&self, population_size: usize) -> Result<()> {
        if self.tournament_size < 1 || self.tournament_size > population_size {
            return Err(Error::config(format!(
                "tournament size {} must lie in [1, {population_size}]",
                self.tournament_size
            )));
        }
        if self.approach != Approach::Standard && population_size < 2 {
            return Err(Error::config("mate choice needs at least two individuals"));
        }
        if self.approach == Approach::Pimp
            && (self.candidate_set_size < 1 || self.candidate_set_size > population_size - 1)
        {
            return Err(Error::config(format!(
                "candidate set size {} must lie in [1, {}]",
                self.candidate_set_size,
                population_size - 1
            )));
        }
        Ok(())
    }
}

/// One mating event. `generation` is the generation of the population the
/// indices refer to.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoupleRecord {
    #[serde(rename = "gen")]
    pub generation: u64,
    pub chooser: usize,
    pub courter: usize,
}

/// Samples `k` distinct members and returns the one with the lowest fitness;
/// ties go to the earliest sampled.
pub fn tournament<R: Rng + ?Sized>(pop: &Population, k: usize, rng: &mut R) -> usize {
    assert!(k >= 1 && k <= pop.len(), "tournament size out of range");
    let mut best: Option<(usize, f64)> = None;
    for i in index::sample(rng, pop.len(), k).iter() {
        let f = pop.get(i).evaluated_fitness();
        if best.is_none_or(|(_, bf)| f < bf) {
            best = Some((i, f));
        }
    }
    best.expect("k >= 1").0
}

/// MSE between the candidate's solution outputs and the chooser's preference
/// outputs over the case inputs; the preference plays the role of the target.
pub fn preference_distance(chooser: &Individual, candidate: &Individual, cases: &FitnessCases) -> f64 {
    let mut ev = Evaluator::new();
    let wanted = ev
        .eval_columns(&chooser.preference, cases.columns())
        .expect("preference uses the problem's variables");
    let offered = ev
        .eval_columns(&candidate.solution, cases.columns())
        .expect("solution uses the problem's variables");
    mse(&offered, &wanted)
}

/// Evaluated population plus lazily computed, per-member preference outputs.
///
/// Solution outputs can be supplied from fitness evaluation so that distances
/// need no re-evaluation; results are bit-identical to
/// [`preference_distance`] either way.
pub struct MatingPool<'a> {
    pop: &'a Population,
    cases: &'a FitnessCases,
    solution_outputs: Option<&'a [Vec<f64>]>,
    preference_outputs: RefCell<Vec<Option<Vec<f64>>>>,
    evaluator: RefCell<Evaluator>,
    preference_reads: Cell<usize>,
}

impl<'a> MatingPool<'a> {
    pub fn new(pop: &'a Population, cases: &'a FitnessCases) -> Self {
        MatingPool {
            pop,
            cases,
            solution_outputs: None,
            preference_outputs: RefCell::new(vec![None; pop.len()]),
            evaluator: RefCell::new(Evaluator::new()),
            preference_reads: Cell::new(0),
        }
    }

    pub fn with_solution_outputs(
        pop: &'a Population,
        cases: &'a FitnessCases,
        outputs: &'a [Vec<f64>],
    ) -> Self {
        assert_eq!(outputs.len(), pop.len());
        MatingPool {
            solution_outputs: Some(outputs),
            ..MatingPool::new(pop, cases)
        }
    }

    pub fn population(&self) -> &'a Population {
        self.pop
    }

    /// Number of distance computations, i.e. reads of a preference chromosome.
    pub fn preference_reads(&self) -> usize {
        self.preference_reads.get()
    }

    pub fn distance(&self, chooser: usize, candidate: usize) -> f64 {
        self.preference_reads.set(self.preference_reads.get() + 1);
        let mut prefs = self.preference_outputs.borrow_mut();
        let mut ev = self.evaluator.borrow_mut();
        if prefs[chooser].is_none() {
            let out = ev
                .eval_columns(&self.pop.get(chooser).preference, self.cases.columns())
                .expect("preference uses the problem's variables");
            prefs[chooser] = Some(out);
        }
        let wanted = prefs[chooser].as_deref().unwrap();
        match self.solution_outputs {
            Some(outputs) => mse(&outputs[candidate], wanted),
            None => {
                let offered = ev
                    .eval_columns(&self.pop.get(candidate).solution, self.cases.columns())
                    .expect("solution uses the problem's variables");
                let d = mse(&offered, wanted);
                ev.recycle(offered);
                d
            }
        }
    }
}

/// PIMP candidate set: `k` distinct indices from `0..n` excluding the
/// chooser, in sampled order. This is exactly the draw [`pick_courter`]
/// makes, so replaying a cloned generator reproduces the set.
pub fn candidate_set<R: Rng + ?Sized>(rng: &mut R, n: usize, k: usize, chooser: usize) -> Vec<usize> {
    index::sample(rng, n - 1, k)
        .iter()
        .map(|i| if i >= chooser { i + 1 } else { i })
        .collect()
}

/// Picks the second parent for `chooser`. Fitness is never consulted.
pub fn pick_courter<R: Rng + ?Sized>(
    pool: &MatingPool<'_>,
    cfg: &SelectionConfig,
    chooser: usize,
    rng: &mut R,
) -> usize {
    let n = pool.pop.len();
    match cfg.approach {
        Approach::Standard => tournament(pool.pop, cfg.tournament_size, rng),
        Approach::RandomMate => {
            let i = rng.gen_range(0..n - 1);
            if i >= chooser {
                i + 1
            } else {
                i
            }
        }
        Approach::Pimp => {
            let mut best: Option<(usize, f64)> = None;
            for c in candidate_set(rng, n, cfg.candidate_set_size, chooser) {
                let d = pool.distance(chooser, c);
                if best.is_none_or(|(_, bd)| d < bd) {
                    best = Some((c, d));
                }
            }
            best.expect("candidate set is non-empty").0
        }
    }
}

/// Returns `(chooser, courter)`. The chooser always wins a fitness
/// tournament; how the courter is found depends on the approach.
pub fn select_couple<R: Rng + ?Sized>(
    pool: &MatingPool<'_>,
    cfg: &SelectionConfig,
    rng: &mut R,
) -> (usize, usize) {
    let chooser = tournament(pool.pop, cfg.tournament_size, rng);
    let courter = pick_courter(pool, cfg, chooser, rng);
    (chooser, courter)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::primitives::ExprTree;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn t(s: &str) -> ExprTree {
        s.parse().unwrap()
    }

    fn with_fitness(sol: &str, pref: &str, f: f64) -> Individual {
        let mut ind = Individual::new(t(sol), t(pref));
        ind.set_fitness(f);
        ind
    }

    fn cases() -> FitnessCases {
        FitnessCases::new(vec![vec![1.0], vec![2.0]], vec![0.0, 0.0]).unwrap()
    }

    #[test]
    fn distance_example() {
        let chooser = Individual::new(t("(sin x)"), t("x"));
        let candidate = Individual::new(t("(add x x)"), t("(cos x)"));
        assert_eq!(preference_distance(&chooser, &candidate, &cases()), 2.5);
        let mirror = Individual::new(t("x"), t("(exp x)"));
        assert_eq!(preference_distance(&chooser, &mirror, &cases()), 0.0);
        // independent of chooser.solution and candidate.preference
        let chooser2 = Individual::new(t("(plog x)"), t("x"));
        let candidate2 = Individual::new(t("(add x x)"), t("y"));
        assert_eq!(preference_distance(&chooser2, &candidate2, &cases()), 2.5);
    }

    #[test]
    fn tournament_picks_best_and_breaks_ties_by_order() {
        let mut members: Vec<Individual> =
            (0..10).map(|i| with_fitness("x", "x", 1.0 + i as f64)).collect();
        members[7].set_fitness(0.0);
        let pop = Population::new(members);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(tournament(&pop, 10, &mut rng), 7);

        let flat = Population::new((0..10).map(|_| with_fitness("x", "x", 2.0)).collect());
        for seed in 0..20 {
            let mut a = ChaCha8Rng::seed_from_u64(seed);
            let mut b = ChaCha8Rng::seed_from_u64(seed);
            let first = index::sample(&mut b, 10, 5).index(0);
            assert_eq!(tournament(&flat, 5, &mut a), first);
        }
    }

    #[test]
    fn pimp_picks_matching_candidate() {
        // chooser (index 0) prefers `(add x x)`; exactly one member offers it
        let mut members = vec![with_fitness("x", "(add x x)", 0.0)];
        for i in 1..6 {
            let sol = if i == 4 { "(add x x)" } else { "(sin x)" };
            members.push(with_fitness(sol, "x", 10.0));
        }
        let pop = Population::new(members);
        let c = cases();
        let pool = MatingPool::new(&pop, &c);
        let mut cfg = SelectionConfig::new(Approach::Pimp);
        cfg.tournament_size = 6;
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        // candidate set of 5 out of 5 others covers everyone
        assert_eq!(pick_courter(&pool, &cfg, 0, &mut rng), 4);
        let (chooser, courter) = select_couple(&pool, &cfg, &mut rng);
        assert_eq!(chooser, 0);
        assert_eq!(courter, 4);
    }

    #[test]
    fn pimp_identical_candidates_take_first_sampled() {
        let mut members = vec![with_fitness("x", "(add x x)", 0.0)];
        members.extend((1..20).map(|_| with_fitness("(sin x)", "x", 3.0)));
        let pop = Population::new(members);
        let c = cases();
        let pool = MatingPool::new(&pop, &c);
        let cfg = SelectionConfig::new(Approach::Pimp);
        for seed in 0..20 {
            let mut a = ChaCha8Rng::seed_from_u64(seed);
            let mut b = ChaCha8Rng::seed_from_u64(seed);
            let first = candidate_set(&mut b, 20, 5, 0)[0];
            assert_eq!(pick_courter(&pool, &cfg, 0, &mut a), first);
        }
    }

    #[test]
    fn courter_is_never_the_chooser() {
        let pop = Population::new((0..6).map(|i| with_fitness("x", "x", i as f64)).collect());
        let c = cases();
        let pool = MatingPool::new(&pop, &c);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for approach in [Approach::Pimp, Approach::RandomMate] {
            let mut cfg = SelectionConfig::new(approach);
            cfg.candidate_set_size = 5;
            for chooser in 0..6 {
                for _ in 0..50 {
                    assert_ne!(pick_courter(&pool, &cfg, chooser, &mut rng), chooser);
                }
            }
        }
    }

    #[test]
    fn standard_never_reads_preferences() {
        let pop = Population::new((0..30).map(|i| with_fitness("x", "(sin x)", i as f64)).collect());
        let c = cases();
        let pool = MatingPool::new(&pop, &c);
        let cfg = SelectionConfig::new(Approach::Standard);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            select_couple(&pool, &cfg, &mut rng);
        }
        assert_eq!(pool.preference_reads(), 0);

        let pimp = SelectionConfig::new(Approach::Pimp);
        select_couple(&pool, &pimp, &mut rng);
        assert_eq!(pool.preference_reads(), 5);
    }

    #[test]
    fn cached_outputs_match_direct_distance() {
        let pop = Population::new(vec![
            with_fitness("(mul x (cos x))", "(pdiv x (sin x))", 1.0),
            with_fitness("(exp (plog x))", "(sub x x)", 1.0),
            with_fitness("(add (sin x) x)", "(mul x x)", 1.0),
        ]);
        let c = FitnessCases::new(vec![vec![0.0], vec![-1.3], vec![2.7]], vec![0.0; 3]).unwrap();
        let mut ev = Evaluator::new();
        let outputs: Vec<Vec<f64>> = pop
            .iter()
            .map(|m| ev.eval_columns(&m.solution, c.columns()).unwrap())
            .collect();
        let cached = MatingPool::with_solution_outputs(&pop, &c, &outputs);
        let plain = MatingPool::new(&pop, &c);
        for i in 0..3 {
            for j in 0..3 {
                let d = preference_distance(pop.get(i), pop.get(j), &c);
                assert_eq!(cached.distance(i, j).to_bits(), d.to_bits());
                assert_eq!(plain.distance(i, j).to_bits(), d.to_bits());
            }
        }
    }

    #[test]
    fn courter_choice_is_fitness_blind() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let prims = crate::primitives::PrimitiveSet::new(1);
        let sols = crate::individual::ramped_half_and_half(40, 2, 5, &prims, &mut rng);
        let prefs = crate::individual::ramped_half_and_half(40, 2, 5, &prims, &mut rng);
        let c = FitnessCases::new(
            (0..8).map(|i| vec![i as f64 / 4.0 - 1.0]).collect(),
            vec![0.0; 8],
        )
        .unwrap();
        let base: Vec<Individual> = sols
            .into_iter()
            .zip(prefs)
            .enumerate()
            .map(|(i, (s, p))| {
                let mut ind = Individual::new(s, p);
                ind.set_fitness(i as f64);
                ind
            })
            .collect();
        let mut relabeled = base.clone();
        for (i, m) in relabeled.iter_mut().enumerate() {
            m.set_fitness(((i * 17) % 40) as f64 * 0.5);
        }
        let a = Population::new(base);
        let b = Population::new(relabeled);
        let (pa, pb) = (MatingPool::new(&a, &c), MatingPool::new(&b, &c));
        for approach in [Approach::Pimp, Approach::RandomMate] {
            let cfg = SelectionConfig::new(approach);
            for seed in 0..50u64 {
                let chooser = (seed % 40) as usize;
                let ca = pick_courter(&pa, &cfg, chooser, &mut ChaCha8Rng::seed_from_u64(seed));
                let cb = pick_courter(&pb, &cfg, chooser, &mut ChaCha8Rng::seed_from_u64(seed));
                assert_eq!(ca, cb);
            }
        }
    }

    #[test]
    fn config_validation() {
        assert!(SelectionConfig::new(Approach::Pimp).validate(100).is_ok());
        assert!(SelectionConfig::new(Approach::Pimp).validate(5).is_err());
        assert!(SelectionConfig::new(Approach::Standard).validate(4).is_err());
        let mut cfg = SelectionConfig::new(Approach::RandomMate);
        cfg.tournament_size = 0;
        assert!(cfg.validate(100).is_err());
    }

    #[test]
    fn couple_record_json() {
        let rec = CoupleRecord {
            generation: 3,
            chooser: 10,
            courter: 42,
        };
        assert_eq!(
            serde_json::to_string(&rec).unwrap(),
            r#"{"gen":3,"chooser":10,"courter":42}"#
        );
    }

    #[test]
    fn approach_names_round_trip() {
        for a in Approach::ALL {
            assert_eq!(a.name().parse::<Approach>().unwrap(), a);
        }
        assert!("elitist".parse::<Approach>().is_err());
    }
}

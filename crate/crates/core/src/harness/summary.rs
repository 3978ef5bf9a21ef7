//! Per-cell aggregation and the statistical test cascade.

use serde::Serialize;

use crate::benchmarks::Problem;
use crate::engine::RunRecord;
use crate::error::Error;
use crate::selection::Approach;
use crate::stats::{
    bartlett_test, bonferroni, cochran_q, friedman_test, mcnemar, wilcoxon_signed_rank, BinaryOutcomes,
    PairedSamples, TestResult, ALPHA, DEFAULT_EXACT_THRESHOLD,
};

/// All run records of one (problem, mutation rate) cell, indexed
/// `[approach][run]` with approaches in canonical order.
#[derive(Clone, Debug)]
pub struct CellData {
    pub problem: Problem,
    pub mutation_rate: f64,
    pub approaches: Vec<Approach>,
    pub runs: Vec<Vec<RunRecord>>,
}

/// Mean value of a per-generation quantity across runs.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CurvePoint {
    pub generation: u64,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Default, Serialize)]
pub struct RoleCurves {
    pub choosers: Vec<CurvePoint>,
    pub courters: Vec<CurvePoint>,
    pub both: Vec<CurvePoint>,
    pub best_choosers: Vec<CurvePoint>,
    pub best_courters: Vec<CurvePoint>,
    pub best_both: Vec<CurvePoint>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ApproachSummary {
    pub approach: Approach,
    pub runs: usize,
    pub mbf_mean: f64,
    /// Sample standard deviation; absent with a single run.
    pub mbf_sd: Option<f64>,
    pub mbf_median: f64,
    pub success_count: usize,
    pub unique_pct_mean: f64,
    pub root_avoided: usize,
    #[serde(skip)]
    pub unique_curve: Vec<CurvePoint>,
    #[serde(skip)]
    pub roles: RoleCurves,
}

impl ApproachSummary {
    pub fn success_pct(&self) -> f64 {
        100.0 * self.success_count as f64 / self.runs as f64
    }
}

/// One line of `stats.json`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TestReport {
    pub test: String,
    pub metric: String,
    /// Compared approaches for pairwise post-hoc tests.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pair: Option<[Approach; 2]>,
    pub statistic: Option<f64>,
    pub p: Option<f64>,
    pub alpha: f64,
    pub corrected_p: Option<f64>,
    /// `reject` (significant), `retain`, or `undefined`.
    pub decision: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl TestReport {
    fn new(test: &str, metric: &str, pair: Option<[Approach; 2]>, result: Result<(TestResult, f64), String>) -> Self {
        match result {
            Ok((r, corrected)) => TestReport {
                test: test.into(),
                metric: metric.into(),
                pair,
                statistic: Some(r.statistic),
                p: Some(r.p_value),
                alpha: ALPHA,
                corrected_p: Some(corrected),
                decision: if corrected < ALPHA { "reject" } else { "retain" }.into(),
                note: None,
            },
            Err(why) => TestReport {
                test: test.into(),
                metric: metric.into(),
                pair,
                statistic: None,
                p: None,
                alpha: ALPHA,
                corrected_p: None,
                decision: "undefined".into(),
                note: Some(why),
            },
        }
    }

    pub fn is_significant(&self) -> bool {
        self.decision == "reject"
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CellSummary {
    pub problem: Problem,
    pub mutation_rate: f64,
    pub runs: usize,
    pub approaches: Vec<ApproachSummary>,
    pub tests: Vec<TestReport>,
}

impl CellSummary {
    pub fn approach(&self, a: Approach) -> Option<&ApproachSummary> {
        self.approaches.iter().find(|s| s.approach == a)
    }

    /// Finds a test by name, metric and (for post-hoc tests) unordered pair.
    pub fn test(&self, test: &str, metric: &str, pair: Option<(Approach, Approach)>) -> Option<&TestReport> {
        self.tests.iter().find(|t| {
            t.test == test
                && t.metric == metric
                && match (pair, t.pair) {
                    (None, None) => true,
                    (Some((a, b)), Some([x, y])) => (a, b) == (x, y) || (a, b) == (y, x),
                    _ => false,
                }
        })
    }

    /// Aggregate rows, one per approach.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "approach,runs,mbf_mean,mbf_sd,mbf_median,success_count,success_pct,unique_pct_mean,root_avoided\n",
        );
        for s in &self.approaches {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{}\n",
                s.approach.label(),
                s.runs,
                s.mbf_mean,
                opt(s.mbf_sd),
                s.mbf_median,
                s.success_count,
                s.success_pct(),
                s.unique_pct_mean,
                s.root_avoided
            ));
        }
        out
    }
}

pub(crate) fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |x| x.to_string())
}

/// Raw per-run values, for external checks such as normality tests.
pub fn runs_csv(cell: &CellData) -> String {
    let mut out =
        String::from("approach,run,seed,final_best,best_ever,best_ever_generation,success,final_unique,root_converged\n");
    for (a, runs) in cell.approaches.iter().zip(&cell.runs) {
        for (r, rec) in runs.iter().enumerate() {
            let s = &rec.summary;
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{}\n",
                a.label(),
                r,
                s.config.run_seed,
                s.final_best,
                s.best_ever,
                s.best_ever_generation,
                s.success,
                s.final_unique,
                s.root_converged
            ));
        }
    }
    out
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn sample_sd(xs: &[f64]) -> Option<f64> {
    if xs.len() < 2 {
        return None;
    }
    let m = mean(xs);
    Some((xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64).sqrt())
}

fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

/// Mean over runs of `f(record)` at each generation where every run has a value.
fn curve(runs: &[RunRecord], f: impl Fn(&crate::engine::GenerationRecord) -> Option<f64>) -> Vec<CurvePoint> {
    let Some(first) = runs.first() else {
        return Vec::new();
    };
    let mut out = Vec::new();
    for (i, g) in first.generations.iter().enumerate() {
        let vals: Option<Vec<f64>> = runs.iter().map(|r| r.generations.get(i).and_then(&f)).collect();
        if let Some(vals) = vals {
            out.push(CurvePoint {
                generation: g.generation,
                value: mean(&vals),
            });
        }
    }
    out
}

fn summarize_approach(approach: Approach, runs: &[RunRecord]) -> ApproachSummary {
    let mbf: Vec<f64> = runs.iter().map(|r| r.summary.final_best).collect();
    let unique: Vec<f64> = runs.iter().map(RunRecord::final_unique_pct).collect();
    let pop = |r: &RunRecord| r.summary.config.population_size as f64;
    let roles = if runs.is_empty() {
        RoleCurves::default()
    } else {
        // the final generation has no breeding and therefore no roles
        let bred = |g: &crate::engine::GenerationRecord| {
            let t = &g.roles;
            t.choosers_only + t.courters_only + t.both > 0
        };
        RoleCurves {
            choosers: curve(runs, |g| bred(g).then_some(g.roles.choosers_only as f64)),
            courters: curve(runs, |g| bred(g).then_some(g.roles.courters_only as f64)),
            both: curve(runs, |g| bred(g).then_some(g.roles.both as f64)),
            best_choosers: curve(runs, |g| g.roles.mbf_choosers),
            best_courters: curve(runs, |g| g.roles.mbf_courters),
            best_both: curve(runs, |g| g.roles.mbf_both),
        }
    };
    let unique_curve = {
        let first = runs.first();
        let mut out = Vec::new();
        if let Some(first) = first {
            for (i, g) in first.generations.iter().enumerate() {
                let vals: Option<Vec<f64>> = runs
                    .iter()
                    .map(|r| r.generations.get(i).and_then(|x| x.unique).map(|u| 100.0 * u as f64 / pop(r)))
                    .collect();
                if let Some(vals) = vals {
                    out.push(CurvePoint {
                        generation: g.generation,
                        value: mean(&vals),
                    });
                }
            }
        }
        out
    };
    ApproachSummary {
        approach,
        runs: runs.len(),
        mbf_mean: mean(&mbf),
        mbf_sd: sample_sd(&mbf),
        mbf_median: median(&mbf),
        success_count: runs.iter().filter(|r| r.summary.success).count(),
        unique_pct_mean: mean(&unique),
        root_avoided: runs.iter().filter(|r| !r.summary.root_converged).count(),
        unique_curve,
        roles,
    }
}

fn pairs(approaches: &[Approach]) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for i in 0..approaches.len() {
        for j in i + 1..approaches.len() {
            out.push((i, j));
        }
    }
    out
}

fn err_text(e: Error) -> String {
    e.to_string()
}

fn quantitative(cell: &CellData, metric: &str, values: &[Vec<f64>], tests: &mut Vec<TestReport>) {
    let approaches = &cell.approaches;
    let samples = PairedSamples::from_columns(values);
    tests.push(TestReport::new(
        "friedman",
        metric,
        None,
        samples.as_ref().map(|s| {
            let r = friedman_test(s);
            (r, r.p_value)
        })
        .map_err(|e| e.to_string()),
    ));
    let ps = pairs(approaches);
    for &(i, j) in &ps {
        let r = wilcoxon_signed_rank(&values[i], &values[j], DEFAULT_EXACT_THRESHOLD)
            .map(|r| (r, bonferroni(r.p_value, ps.len())))
            .map_err(err_text);
        tests.push(TestReport::new("wilcoxon", metric, Some([approaches[i], approaches[j]]), r));
    }
    tests.push(TestReport::new(
        "bartlett",
        metric,
        None,
        samples
            .map_err(err_text)
            .and_then(|s| bartlett_test(&s).map_err(err_text))
            .map(|r| (r, r.p_value)),
    ));
}

fn qualitative(cell: &CellData, metric: &str, values: &[Vec<bool>], tests: &mut Vec<TestReport>) {
    let approaches = &cell.approaches;
    tests.push(TestReport::new(
        "cochran_q",
        metric,
        None,
        BinaryOutcomes::from_columns(values)
            .map(|o| {
                let r = cochran_q(&o);
                (r, r.p_value)
            })
            .map_err(err_text),
    ));
    let ps = pairs(approaches);
    for &(i, j) in &ps {
        let r = mcnemar(&values[i], &values[j])
            .map(|r| (r, bonferroni(r.p_value, ps.len())))
            .map_err(err_text);
        tests.push(TestReport::new("mcnemar", metric, Some([approaches[i], approaches[j]]), r));
    }
}

/// Aggregates a complete cell and runs every test. Post-hoc pairwise tests
/// are always reported; their decision uses the Bonferroni-corrected p.
pub fn summarize_cell(cell: &CellData) -> CellSummary {
    let approaches: Vec<ApproachSummary> = cell
        .approaches
        .iter()
        .zip(&cell.runs)
        .map(|(a, runs)| summarize_approach(*a, runs))
        .collect();
    let column = |f: &dyn Fn(&RunRecord) -> f64| -> Vec<Vec<f64>> {
        cell.runs.iter().map(|runs| runs.iter().map(f).collect()).collect()
    };
    let flags = |f: &dyn Fn(&RunRecord) -> bool| -> Vec<Vec<bool>> {
        cell.runs.iter().map(|runs| runs.iter().map(f).collect()).collect()
    };
    let mut tests = Vec::new();
    quantitative(cell, "mbf", &column(&|r| r.summary.final_best), &mut tests);
    quantitative(cell, "unique", &column(&|r| r.summary.final_unique as f64), &mut tests);
    qualitative(cell, "success", &flags(&|r| r.summary.success), &mut tests);
    qualitative(cell, "root_avoided", &flags(&|r| !r.summary.root_converged), &mut tests);
    CellSummary {
        problem: cell.problem,
        mutation_rate: cell.mutation_rate,
        runs: cell.runs.first().map_or(0, Vec::len),
        approaches,
        tests,
    }
}

//! Cross-cell result tables. Cells that are absent or incomplete show up as
//! `NA`, never as zero.

use crate::benchmarks::Problem;
use crate::harness::plan::{rate_label, ExperimentPlan};
use crate::harness::summary::{opt, ApproachSummary, CellSummary};
use crate::selection::Approach;

/// A named CSV document.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub file_name: String,
    pub contents: String,
}

const NA: &str = "NA";

fn find(summaries: &[CellSummary], problem: Problem, rate: f64) -> Option<&CellSummary> {
    summaries.iter().find(|s| s.problem == problem && s.mutation_rate == rate)
}

fn header(first: &str, approaches: &[Approach]) -> String {
    let mut h = first.to_string();
    for a in approaches {
        h.push(',');
        h.push_str(a.label());
    }
    h.push('\n');
    h
}

fn row(
    lead: &str,
    cell: Option<&CellSummary>,
    approaches: &[Approach],
    value: impl Fn(&ApproachSummary) -> String,
) -> String {
    let mut line = lead.to_string();
    for &a in approaches {
        line.push(',');
        match cell.and_then(|c| c.approach(a)) {
            Some(s) => line.push_str(&value(s)),
            None => line.push_str(NA),
        }
    }
    line.push('\n');
    line
}

/// One MBF table per mutation rate, with an MBF row and a StDev row per
/// problem, plus one table each for success rate, final unique solutions
/// and root-convergence avoidance.
pub fn emit_tables(plan: &ExperimentPlan, summaries: &[CellSummary]) -> Vec<Table> {
    let approaches = plan.approaches_sorted();
    let cells = plan.cells();
    let mut rates: Vec<f64> = Vec::new();
    for &(_, r) in &cells {
        if !rates.contains(&r) {
            rates.push(r);
        }
    }
    let mut problems: Vec<Problem> = Vec::new();
    for &(p, _) in &cells {
        if !problems.contains(&p) {
            problems.push(p);
        }
    }

    let mut tables = Vec::new();
    for &rate in &rates {
        let mut t = header("problem,measure", &approaches);
        for &p in &problems {
            let cell = find(summaries, p, rate);
            t.push_str(&row(&format!("{},MBF", p.label()), cell, &approaches, |s| s.mbf_mean.to_string()));
            t.push_str(&row(&format!("{},StDev", p.label()), cell, &approaches, |s| opt(s.mbf_sd)));
        }
        tables.push(Table {
            file_name: format!("mbf_{}.csv", rate_label(rate)),
            contents: t,
        });
    }

    let per_cell = |name: &str, value: &dyn Fn(&ApproachSummary) -> String| {
        let mut t = header("problem,mutation", &approaches);
        for &(p, rate) in &cells {
            let lead = format!("{},{}", p.label(), rate_label(rate));
            t.push_str(&row(&lead, find(summaries, p, rate), &approaches, value));
        }
        Table {
            file_name: name.to_string(),
            contents: t,
        }
    };
    tables.push(per_cell("success_rate.csv", &|s| s.success_pct().to_string()));
    tables.push(per_cell("unique_solutions.csv", &|s| s.unique_pct_mean.to_string()));
    tables.push(per_cell("root_convergence.csv", &|s| format!("{}/{}", s.root_avoided, s.runs)));
    tables
}

#[cfg(test)]
mod tests {
    use super::*;

    fn summary(approach: Approach, runs: usize, success: usize) -> ApproachSummary {
        ApproachSummary {
            approach,
            runs,
            mbf_mean: 0.5,
            mbf_sd: Some(0.25),
            mbf_median: 0.5,
            success_count: success,
            unique_pct_mean: 80.0,
            root_avoided: 3,
            unique_curve: Vec::new(),
            roles: Default::default(),
        }
    }

    fn plan() -> ExperimentPlan {
        let mut plan = ExperimentPlan::full(1);
        plan.problems = vec![Problem::Koza1, Problem::Nguyen6];
        plan
    }

    #[test]
    fn layout_and_gaps() {
        let cell = CellSummary {
            problem: Problem::Koza1,
            mutation_rate: 0.05,
            runs: 30,
            approaches: Approach::ALL.iter().map(|&a| summary(a, 30, 13)).collect(),
            tests: Vec::new(),
        };
        let tables = emit_tables(&plan(), &[cell]);
        let names: Vec<&str> = tables.iter().map(|t| t.file_name.as_str()).collect();
        assert_eq!(
            names,
            ["mbf_0.05.csv", "mbf_0.10.csv", "success_rate.csv", "unique_solutions.csv", "root_convergence.csv"]
        );
        assert_eq!(
            tables[0].contents,
            "problem,measure,PIMP,RandomMate,Standard\n\
             Koza-1,MBF,0.5,0.5,0.5\n\
             Koza-1,StDev,0.25,0.25,0.25\n\
             Nguyen-6,MBF,NA,NA,NA\n\
             Nguyen-6,StDev,NA,NA,NA\n"
        );
        let success = &tables[2].contents;
        let koza = success.lines().nth(1).unwrap();
        let pct: f64 = koza.split(',').nth(2).unwrap().parse().unwrap();
        assert_eq!(pct, 100.0 * 13.0 / 30.0);
        assert!(success.contains("Nguyen-6,0.10,NA,NA,NA"));
        assert!(tables[4].contents.contains("Koza-1,0.05,3/30,3/30,3/30"));
    }
}

//! Experiment orchestration: run matrices, resumable persistence, per-cell
//! aggregation, tables and charts.
//!
//! Layout under the output directory:
//!
//! ```text
//! plan.txt
//! <problem>/<rate>/<approach>/run_<r>.jsonl        run log (written last)
//! <problem>/<rate>/<approach>/run_<r>.gen0.pop     initial population
//! <problem>/<rate>/<approach>/run_<r>.final.pop    final population
//! <problem>/<rate>/summary.csv, runs.csv, stats.json
//! tables/*.csv                                     written by `analyze`
//! ```
//!
//! A run counts as done once its `.jsonl` exists. Every file is written to a
//! temporary name and renamed into place, so an interrupted experiment never
//! leaves a truncated log behind.

pub mod plan;
pub mod summary;
pub mod svg;
pub mod tables;

use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::benchmarks::Problem;
use crate::engine::{run, RunRecord};
use crate::error::{Error, Result};
use crate::individual::Population;
use crate::selection::Approach;

pub use plan::{rate_label, run_seed, ExperimentPlan};
pub use summary::{summarize_cell, ApproachSummary, CellData, CellSummary, TestReport};
pub use tables::{emit_tables, Table};

pub const PLAN_FILE: &str = "plan.txt";
pub const TABLES_DIR: &str = "tables";

pub fn cell_dir(out: &Path, problem: Problem, rate: f64) -> PathBuf {
    out.join(problem.name()).join(rate_label(rate))
}

pub fn run_log_path(out: &Path, problem: Problem, rate: f64, approach: Approach, run: usize) -> PathBuf {
    cell_dir(out, problem, rate).join(approach.name()).join(format!("run_{run}.jsonl"))
}

/// `which` is `gen0` or `final`.
pub fn snapshot_path(out: &Path, problem: Problem, rate: f64, approach: Approach, run: usize, which: &str) -> PathBuf {
    cell_dir(out, problem, rate).join(approach.name()).join(format!("run_{run}.{which}.pop"))
}

pub(crate) fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, contents).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

#[derive(Copy, Clone, Debug, PartialEq)]
pub struct RunTask {
    pub problem: Problem,
    pub rate: f64,
    pub approach: Approach,
    pub run: usize,
}

/// Every run of the plan, in canonical order.
pub fn tasks(plan: &ExperimentPlan) -> Vec<RunTask> {
    let mut out = Vec::new();
    for (problem, rate) in plan.cells() {
        for approach in plan.approaches_sorted() {
            for run in 0..plan.runs {
                out.push(RunTask {
                    problem,
                    rate,
                    approach,
                    run,
                });
            }
        }
    }
    out
}

fn execute(plan: &ExperimentPlan, out: &Path, t: RunTask) -> Result<()> {
    let cfg = plan.run_config(t.approach, t.problem, t.rate, t.run);
    let log = run(&cfg)?;
    let snapshot = |pop: &Population| {
        let mut buf = Vec::new();
        pop.write_snapshot(&mut buf).expect("writing to memory");
        buf
    };
    write_atomic(
        &snapshot_path(out, t.problem, t.rate, t.approach, t.run, "gen0"),
        &snapshot(&log.initial_population),
    )?;
    write_atomic(
        &snapshot_path(out, t.problem, t.rate, t.approach, t.run, "final"),
        &snapshot(&log.final_population),
    )?;
    let mut buf = Vec::new();
    log.record.write_jsonl(&mut buf).expect("writing to memory");
    write_atomic(&run_log_path(out, t.problem, t.rate, t.approach, t.run), &buf)
}

#[derive(Clone, Debug)]
pub struct ExperimentReport {
    pub executed: usize,
    pub skipped: usize,
    pub summaries: Vec<CellSummary>,
}

/// Runs every pending run of `plan` on `jobs` worker threads, then writes
/// the per-cell summaries. Runs whose log already exists are skipped, so an
/// interrupted experiment can be resumed by calling this again.
pub fn run_experiment(plan: &ExperimentPlan, out: &Path, jobs: usize) -> Result<ExperimentReport> {
    plan.validate()?;
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let plan_path = out.join(PLAN_FILE);
    let text = plan.to_string();
    if plan_path.exists() {
        let existing = load_plan(out)?;
        if existing != *plan {
            return Err(Error::config(format!(
                "{} holds a different plan; use a fresh output directory",
                out.display()
            )));
        }
    } else {
        write_atomic(&plan_path, text.as_bytes())?;
    }

    let all = tasks(plan);
    let pending: Vec<RunTask> = all
        .iter()
        .copied()
        .filter(|t| !run_log_path(out, t.problem, t.rate, t.approach, t.run).exists())
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::config(format!("cannot start worker pool: {e}")))?;
    pool.install(|| pending.par_iter().try_for_each(|&t| execute(plan, out, t)))?;

    let mut summaries = Vec::new();
    for (problem, rate) in plan.cells() {
        let cell = load_cell(out, plan, problem, rate)?;
        let s = summarize_cell(&cell);
        write_cell_files(out, &cell, &s)?;
        summaries.push(s);
    }
    Ok(ExperimentReport {
        executed: pending.len(),
        skipped: all.len() - pending.len(),
        summaries,
    })
}

pub fn load_plan(dir: &Path) -> Result<ExperimentPlan> {
    let path = dir.join(PLAN_FILE);
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    text.parse().map_err(|e: Error| Error::Format {
        path,
        message: e.to_string(),
    })
}

pub fn read_run(path: &Path) -> Result<RunRecord> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    RunRecord::read_jsonl(BufReader::new(file)).map_err(|e| match e {
        Error::Format { message, .. } => Error::Format {
            path: path.to_path_buf(),
            message,
        },
        Error::Incomplete(m) => Error::Incomplete(format!("{}: {m}", path.display())),
        other => other,
    })
}

pub fn read_snapshot(path: &Path) -> Result<Population> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    Population::read_snapshot(BufReader::new(file))
}

/// Loads every run log of a cell; a missing log is an `Incomplete` error.
pub fn load_cell(dir: &Path, plan: &ExperimentPlan, problem: Problem, rate: f64) -> Result<CellData> {
    let approaches = plan.approaches_sorted();
    let mut runs = Vec::with_capacity(approaches.len());
    for &a in &approaches {
        let mut records = Vec::with_capacity(plan.runs);
        for r in 0..plan.runs {
            let path = run_log_path(dir, problem, rate, a, r);
            if !path.exists() {
                return Err(Error::Incomplete(format!("missing run log {}", path.display())));
            }
            records.push(read_run(&path)?);
        }
        runs.push(records);
    }
    Ok(CellData {
        problem,
        mutation_rate: rate,
        approaches,
        runs,
    })
}

fn write_cell_files(dir: &Path, cell: &CellData, s: &CellSummary) -> Result<()> {
    let base = cell_dir(dir, cell.problem, cell.mutation_rate);
    write_atomic(&base.join("summary.csv"), s.to_csv().as_bytes())?;
    write_atomic(&base.join("runs.csv"), summary::runs_csv(cell).as_bytes())?;
    let mut json = serde_json::to_string_pretty(s).expect("summary serializes");
    json.push('\n');
    write_atomic(&base.join("stats.json"), json.as_bytes())
}

/// Complete cells plus the cells that could not be summarized.
#[derive(Clone, Debug)]
pub struct Collected {
    pub plan: ExperimentPlan,
    pub cells: Vec<(CellData, CellSummary)>,
    pub missing: Vec<(Problem, f64)>,
}

/// Reads whatever is complete under `dir` without writing anything.
pub fn collect(dir: &Path) -> Result<Collected> {
    let plan = load_plan(dir)?;
    let mut cells = Vec::new();
    let mut missing = Vec::new();
    for (problem, rate) in plan.cells() {
        match load_cell(dir, &plan, problem, rate) {
            Ok(cell) => {
                let s = summarize_cell(&cell);
                cells.push((cell, s));
            }
            Err(Error::Incomplete(_)) => missing.push((problem, rate)),
            Err(e) => return Err(e),
        }
    }
    Ok(Collected { plan, cells, missing })
}

#[derive(Clone, Debug)]
pub struct Analysis {
    pub summaries: Vec<CellSummary>,
    pub missing: Vec<(Problem, f64)>,
    pub written: Vec<PathBuf>,
}

/// Rewrites per-cell summaries and the cross-cell tables. Fails with
/// `Incomplete`, writing nothing, when no cell is complete.
pub fn analyze(dir: &Path) -> Result<Analysis> {
    let c = collect(dir)?;
    if c.cells.is_empty() {
        return Err(Error::Incomplete(format!("no complete cells under {}", dir.display())));
    }
    let mut written = Vec::new();
    for (cell, s) in &c.cells {
        write_cell_files(dir, cell, s)?;
        written.push(cell_dir(dir, cell.problem, cell.mutation_rate).join("stats.json"));
    }
    let summaries: Vec<CellSummary> = c.cells.into_iter().map(|(_, s)| s).collect();
    for t in emit_tables(&c.plan, &summaries) {
        let path = dir.join(TABLES_DIR).join(&t.file_name);
        write_atomic(&path, t.contents.as_bytes())?;
        written.push(path);
    }
    Ok(Analysis {
        summaries,
        missing: c.missing,
        written,
    })
}

fn curve_series(name: &str, points: &[summary::CurvePoint]) -> svg::Series {
    svg::Series {
        name: name.to_string(),
        points: points.iter().map(|p| (p.generation as f64, p.value)).collect(),
    }
}

/// Charts for every complete cell: unique-solution percentage per approach,
/// and per approach the role counts and best fitness per role.
pub fn emit_plots(summaries: &[CellSummary]) -> Vec<(String, String)> {
    let mut out = Vec::new();
    for s in summaries {
        let tag = format!("{}_{}", s.problem.name(), rate_label(s.mutation_rate));
        let where_ = format!("{} (mutation {})", s.problem.label(), rate_label(s.mutation_rate));
        let unique = svg::LineChart {
            title: format!("Unique solutions, {where_}"),
            x_label: "generation".into(),
            y_label: "unique solutions (%)".into(),
            log_y: false,
            series: s
                .approaches
                .iter()
                .map(|a| curve_series(a.approach.label(), &a.unique_curve))
                .collect(),
        };
        out.push((format!("unique_{tag}.svg"), unique.render()));
        for a in &s.approaches {
            let r = &a.roles;
            let counts = svg::LineChart {
                title: format!("Roles, {} {where_}", a.approach.label()),
                x_label: "generation".into(),
                y_label: "individuals".into(),
                log_y: false,
                series: vec![
                    curve_series("Choosers", &r.choosers),
                    curve_series("Courters", &r.courters),
                    curve_series("Both", &r.both),
                ],
            };
            out.push((format!("roles_{tag}_{}.svg", a.approach.name()), counts.render()));
            let fitness = svg::LineChart {
                title: format!("Best fitness per role, {} {where_}", a.approach.label()),
                x_label: "generation".into(),
                y_label: "MSE (mean over runs)".into(),
                log_y: true,
                series: vec![
                    curve_series("Choosers", &r.best_choosers),
                    curve_series("Courters", &r.best_courters),
                    curve_series("Both", &r.best_both),
                ],
            };
            out.push((format!("role_mbf_{tag}_{}.svg", a.approach.name()), fitness.render()));
        }
    }
    out
}

/// Writes the charts of every complete cell under `input` into `out`.
pub fn plot(input: &Path, out: &Path) -> Result<Vec<PathBuf>> {
    let c = collect(input)?;
    if c.cells.is_empty() {
        return Err(Error::Incomplete(format!("no complete cells under {}", input.display())));
    }
    let summaries: Vec<CellSummary> = c.cells.into_iter().map(|(_, s)| s).collect();
    let mut written = Vec::new();
    for (name, svg) in emit_plots(&summaries) {
        let path = out.join(name);
        write_atomic(&path, svg.as_bytes())?;
        written.push(path);
    }
    Ok(written)
}

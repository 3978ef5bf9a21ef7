//! `pimp`: single runs, experiment matrices, analysis and charts.

use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use pimp_core::harness::{self, ExperimentPlan};
use pimp_core::{engine, Approach, Error, Problem, RunConfig};

#[derive(Parser)]
#[command(name = "pimp", version, about = "Genetic programming with evolvable mate preferences")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute one run and write its JSON-lines log.
    Run {
        #[arg(long)]
        approach: Approach,
        #[arg(long)]
        problem: Problem,
        #[arg(long)]
        mutation: f64,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        generations: Option<usize>,
        #[arg(long)]
        pop: Option<usize>,
        /// Log file (stdout when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write every selected couple as JSON lines to this file.
        #[arg(long)]
        couples: Option<PathBuf>,
    },
    /// Execute (or resume) every run of a plan, then summarize each cell.
    Experiment {
        #[arg(long)]
        plan: PathBuf,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        #[arg(long)]
        out: PathBuf,
        /// Override the plan's generation count (e.g. 200 for quick checks).
        #[arg(long)]
        generations: Option<usize>,
    },
    /// Recompute cell summaries, statistics and tables from run logs.
    Analyze {
        #[arg(long = "in")]
        input: PathBuf,
    },
    /// Render SVG charts from run logs.
    Plot {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

const EXIT_USAGE: u8 = 1;
const EXIT_INCOMPLETE: u8 = 2;

/// Usage errors exit with 1, missing or unreadable results with 2. When
/// reading results (`analyze`, `plot`) an unreadable input is missing data.
fn exit_code(err: &anyhow::Error, reads_results: bool) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(Error::Incomplete(_) | Error::Format { .. }) => EXIT_INCOMPLETE,
        Some(Error::Io { .. }) if reads_results => EXIT_INCOMPLETE,
        _ => EXIT_USAGE,
    }
}

fn single_run(
    approach: Approach,
    problem: Problem,
    mutation: f64,
    seed: u64,
    generations: Option<usize>,
    pop: Option<usize>,
    out: Option<PathBuf>,
    couples: Option<PathBuf>,
) -> anyhow::Result<()> {
    let mut cfg = RunConfig::new(approach, problem, mutation, seed);
    if let Some(g) = generations {
        cfg.generations = g;
    }
    if let Some(p) = pop {
        cfg.population_size = p;
    }
    let mut couple_log = match &couples {
        Some(path) => Some(BufWriter::new(
            fs::File::create(path).with_context(|| format!("creating {}", path.display()))?,
        )),
        None => None,
    };
    let mut couple_err = None;
    let log = engine::run_with_couples(&cfg, |c| {
        if let (Some(w), None) = (couple_log.as_mut(), couple_err.as_ref()) {
            if let Err(e) = serde_json::to_writer(&mut *w, c).map_err(io::Error::from).and_then(|_| w.write_all(b"\n")) {
                couple_err = Some(e);
            }
        }
    })?;
    if let Some(e) = couple_err {
        return Err(e).context("writing couple log");
    }
    if let Some(mut w) = couple_log {
        w.flush().context("writing couple log")?;
    }
    match out {
        Some(path) => {
            let mut w = BufWriter::new(fs::File::create(&path).with_context(|| format!("creating {}", path.display()))?);
            log.record.write_jsonl(&mut w)?;
            w.flush()?;
        }
        None => {
            let stdout = io::stdout();
            let mut w = BufWriter::new(stdout.lock());
            log.record.write_jsonl(&mut w)?;
            w.flush()?;
        }
    }
    let s = log.summary();
    eprintln!(
        "final best {:e}, best ever {:e} (generation {}), success {}, unique {}, root converged {}",
        s.final_best, s.best_ever, s.best_ever_generation, s.success, s.final_unique, s.root_converged
    );
    Ok(())
}

fn execute(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Run {
            approach,
            problem,
            mutation,
            seed,
            generations,
            pop,
            out,
            couples,
        } => single_run(approach, problem, mutation, seed, generations, pop, out, couples),
        Command::Experiment {
            plan,
            jobs,
            out,
            generations,
        } => {
            let text = fs::read_to_string(&plan).with_context(|| format!("reading {}", plan.display()))?;
            let mut parsed: ExperimentPlan = text.parse()?;
            if generations.is_some() {
                parsed.generations = generations;
            }
            let rep = harness::run_experiment(&parsed, &out, jobs)?;
            eprintln!(
                "{} runs executed, {} already present, {} cells summarized",
                rep.executed,
                rep.skipped,
                rep.summaries.len()
            );
            Ok(())
        }
        Command::Analyze { input } => {
            let a = harness::analyze(&input)?;
            for s in &a.summaries {
                println!("{} mutation {}", s.problem.label(), harness::rate_label(s.mutation_rate));
                for x in &s.approaches {
                    println!(
                        "  {:<10} MBF {:.6e}  success {}/{}  unique {:.1}%  root avoided {}/{}",
                        x.approach.label(),
                        x.mbf_mean,
                        x.success_count,
                        x.runs,
                        x.unique_pct_mean,
                        x.root_avoided,
                        x.runs
                    );
                }
            }
            if a.missing.is_empty() {
                Ok(())
            } else {
                let cells: Vec<String> = a
                    .missing
                    .iter()
                    .map(|(p, r)| format!("{} {}", p.name(), harness::rate_label(*r)))
                    .collect();
                Err(Error::Incomplete(format!("cells without complete data: {}", cells.join(", "))).into())
            }
        }
        Command::Plot { input, out } => {
            let files = harness::plot(&input, &out)?;
            eprintln!("{} charts written to {}", files.len(), out.display());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_USAGE) } else { ExitCode::SUCCESS };
        }
    };
    let reads_results = matches!(cli.command, Command::Analyze { .. } | Command::Plot { .. });
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e, reads_results))
        }
    }
}

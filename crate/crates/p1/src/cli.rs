//! Command-line front end: solve, flatten, dump linear systems, cross-check
//! against the brute-force oracle, and benchmark directories of `.p1` files.
//!
//! Exit codes are stable: 0 = SAT, 1 = UNSAT, 2 = error.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use num::BigUint;
use serde::{Deserialize, Serialize};

use crate::engine::{oracle_sat_upto, solve, Mode, SolveConfig, Status, Verdict};
use crate::flatten::flatten;
use crate::formula::{signature_of, Formula};
use crate::linsys::{eliminate_congruences, encode, expand_negated};
use crate::parser::{parse, render};
use crate::types::{TypeSpace, DEFAULT_SIGNATURE_CAP};

pub const EXIT_SAT: i32 = 0;
pub const EXIT_UNSAT: i32 = 1;
pub const EXIT_ERROR: i32 = 2;

#[derive(Parser)]
#[command(
    name = "p1",
    about = "Finite-satisfiability solver for one-variable counting logic",
    version
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, ValueEnum)]
enum ModeArg {
    Full,
    Sparse,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, ValueEnum)]
enum OutputFormat {
    Text,
    Json,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, ValueEnum)]
enum BenchFormat {
    Csv,
    Json,
}

#[derive(clap::Args, Clone)]
struct SolveFlags {
    /// Type-space strategy: full enumeration (complete) or sampled supports
    /// (sound for SAT only).
    #[arg(long, value_enum, default_value = "full")]
    mode: ModeArg,
    /// Signature-size cap for full type enumeration.
    #[arg(long, default_value_t = DEFAULT_SIGNATURE_CAP)]
    cap: usize,
    /// Random seed (sparse-mode sampling).
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Sampled supports tried per flat leaf in sparse mode.
    #[arg(long, default_value_t = 64)]
    budget: u64,
    /// Close a free-variable formula as "exists x" instead of rejecting it.
    #[arg(long)]
    assume_exists: bool,
    /// Worker threads for independent leaf/branch units.
    #[arg(long, default_value_t = 1)]
    parallel: usize,
}

impl SolveFlags {
    fn to_config(&self) -> SolveConfig {
        SolveConfig {
            mode: match self.mode {
                ModeArg::Full => Mode::Full,
                ModeArg::Sparse => Mode::Sparse,
            },
            signature_cap: self.cap.max(1),
            sparse_budget: self.budget.max(1),
            seed: self.seed,
            parallel: self.parallel.max(1),
            assume_exists: self.assume_exists,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Decide finite satisfiability of a `.p1` file and print a model.
    Check {
        path: PathBuf,
        #[arg(long, value_enum, default_value = "text")]
        format: OutputFormat,
        #[command(flatten)]
        flags: SolveFlags,
    },
    /// List the flat leaves of the input sentence, one per line.
    Flatten { path: PathBuf },
    /// Dump the linear system of one flat leaf, before and after
    /// congruence elimination.
    Encode {
        path: PathBuf,
        /// Index of the flat leaf to encode.
        #[arg(long, default_value_t = 0)]
        leaf: usize,
        #[arg(long, default_value_t = DEFAULT_SIGNATURE_CAP)]
        cap: usize,
    },
    /// Brute-force ground truth: search characteristic vectors up to a
    /// total size bound.
    Oracle {
        path: PathBuf,
        #[arg(long, default_value_t = 8)]
        bound: u64,
        /// Also run the solver and report agreement.
        #[arg(long)]
        compare: bool,
    },
    /// Solve every `.p1` file in a directory and tabulate timings.
    Bench {
        dir: PathBuf,
        #[arg(long, value_enum, default_value = "csv")]
        format: BenchFormat,
        #[command(flatten)]
        flags: SolveFlags,
    },
}

/// Machine-readable result of a `check` run. Field names are frozen and
/// match the JSON schema shipped in `schemas/run_report.schema.json`.
#[derive(Serialize, Deserialize, Clone, Debug)]
pub struct RunReport {
    pub command: String,
    pub input: String,
    /// "sat" or "unsat".
    pub status: String,
    /// Present iff status is "sat".
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model: Option<ModelReport>,
    /// Wall time per pipeline stage, in microseconds.
    pub stages: BTreeMap<String, u64>,
    pub leaves: u64,
    pub branches: u64,
    pub incomplete: bool,
    pub config: ConfigEcho,
}

#[derive(Serialize, Deserialize, Clone, Debug)]
pub struct ModelReport {
    /// Nonzero entries of the characteristic vector; counts are decimal
    /// strings because they are unbounded integers.
    pub types: Vec<TypeCount>,
    pub domain_size: String,
}

#[derive(Serialize, Deserialize, Clone, Debug)]
pub struct TypeCount {
    #[serde(rename = "type")]
    pub one_type: String,
    pub count: String,
}

#[derive(Serialize, Deserialize, Clone, Debug)]
pub struct ConfigEcho {
    pub mode: String,
    pub cap: usize,
    pub seed: u64,
    pub budget: u64,
    pub assume_exists: bool,
    pub parallel: usize,
}

/// Parses `std::env::args` and runs; returns the process exit code.
pub fn run() -> i32 {
    run_from(std::env::args_os())
}

pub fn run_from<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            // clap handles --help/--version with success exit codes
            let code = if e.use_stderr() { EXIT_ERROR } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(message) => {
            eprintln!("error: {message}");
            EXIT_ERROR
        }
    }
}

fn dispatch(command: Command) -> Result<i32, String> {
    match command {
        Command::Check {
            path,
            format,
            flags,
        } => cmd_check(&path, format, &flags),
        Command::Flatten { path } => cmd_flatten(&path),
        Command::Encode { path, leaf, cap } => cmd_encode(&path, leaf, cap),
        Command::Oracle {
            path,
            bound,
            compare,
        } => cmd_oracle(&path, bound, compare),
        Command::Bench { dir, format, flags } => cmd_bench(&dir, format, &flags),
    }
}

fn load_formula(path: &Path) -> Result<Formula, String> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    parse(&text).map_err(|e| format!("{}: {e}", path.display()))
}

fn cmd_check(path: &Path, format: OutputFormat, flags: &SolveFlags) -> Result<i32, String> {
    let started = Instant::now();
    let formula = load_formula(path)?;
    let parse_time = started.elapsed();
    let cfg = flags.to_config();
    let solve_start = Instant::now();
    let verdict = solve(&formula, &cfg).map_err(|e| e.to_string())?;
    let solve_time = solve_start.elapsed();

    let mut stages = BTreeMap::new();
    stages.insert("parse".to_string(), parse_time.as_micros() as u64);
    stages.insert("solve".to_string(), solve_time.as_micros() as u64);
    stages.insert(
        "ilp".to_string(),
        verdict.stats.solver.wall.as_micros() as u64,
    );
    stages.insert("total".to_string(), started.elapsed().as_micros() as u64);

    let report = RunReport {
        command: "check".to_string(),
        input: path.display().to_string(),
        status: if verdict.is_sat() { "sat" } else { "unsat" }.to_string(),
        model: model_report(&verdict),
        stages,
        leaves: verdict.stats.leaves,
        branches: verdict.stats.branches,
        incomplete: verdict.stats.incomplete,
        config: ConfigEcho {
            mode: match cfg.mode {
                Mode::Full => "full",
                Mode::Sparse => "sparse",
            }
            .to_string(),
            cap: cfg.signature_cap,
            seed: cfg.seed,
            budget: cfg.sparse_budget,
            assume_exists: cfg.assume_exists,
            parallel: cfg.parallel,
        },
    };

    match format {
        OutputFormat::Json => {
            println!(
                "{}",
                serde_json::to_string_pretty(&report).map_err(|e| e.to_string())?
            );
        }
        OutputFormat::Text => print!("{}", render_text_report(&verdict, &report)),
    }
    Ok(if verdict.is_sat() { EXIT_SAT } else { EXIT_UNSAT })
}

fn model_report(verdict: &Verdict) -> Option<ModelReport> {
    let Status::Sat { vector, .. } = &verdict.status else {
        return None;
    };
    let sig = vector.signature();
    let types = vector
        .entries()
        .map(|(ty, count)| TypeCount {
            one_type: ty.describe(sig),
            count: count.to_string(),
        })
        .collect();
    Some(ModelReport {
        types,
        domain_size: vector.total().to_string(),
    })
}

fn render_text_report(verdict: &Verdict, report: &RunReport) -> String {
    let mut out = String::new();
    match &verdict.status {
        Status::Sat { vector, .. } => {
            let _ = writeln!(out, "SAT");
            let _ = writeln!(out, "model: {vector}");
            let _ = writeln!(out, "domain size: {}", vector.total());
        }
        Status::Unsat => {
            let _ = writeln!(out, "UNSAT");
            if report.incomplete {
                let _ = writeln!(out, "note: sparse budget exhausted; verdict is not conclusive");
            }
        }
    }
    let _ = writeln!(
        out,
        "leaves: {}, branches: {}",
        report.leaves, report.branches
    );
    out
}

fn cmd_flatten(path: &Path) -> Result<i32, String> {
    let formula = load_formula(path)?;
    let leaves = flatten(&formula).map_err(|e| e.to_string())?;
    for (i, leaf) in leaves.enumerate() {
        println!("leaf {i}: {}", render(&leaf.to_formula()));
    }
    Ok(EXIT_SAT)
}

fn cmd_encode(path: &Path, leaf_index: usize, cap: usize) -> Result<i32, String> {
    let formula = load_formula(path)?;
    let leaves: Vec<_> = flatten(&formula).map_err(|e| e.to_string())?.collect();
    let leaf = leaves.get(leaf_index).ok_or_else(|| {
        format!(
            "leaf index {leaf_index} out of range; the sentence has {} leaves",
            leaves.len()
        )
    })?;
    let sig = signature_of(&formula);
    let space = TypeSpace::enumerate(sig, cap).map_err(|e| e.to_string())?;
    let system = encode(leaf, &space).map_err(|e| e.to_string())?;
    println!("# leaf {leaf_index}: system");
    println!("{}", system.dump());
    for (b, branch) in expand_negated(&system).iter().enumerate() {
        let eliminated = eliminate_congruences(branch).map_err(|e| e.to_string())?;
        println!("# leaf {leaf_index}: branch {b} after elimination");
        println!("{}", eliminated.dump());
    }
    Ok(EXIT_SAT)
}

fn cmd_oracle(path: &Path, bound: u64, compare: bool) -> Result<i32, String> {
    let formula = load_formula(path)?;
    let witness = oracle_sat_upto(&formula, bound).map_err(|e| e.to_string())?;
    match &witness {
        Some(vector) => println!("oracle: sat at total {} with {vector}", vector.total()),
        None => println!("oracle: unsat up to size {bound}"),
    }
    if compare {
        let verdict =
            solve(&formula, &SolveConfig::default()).map_err(|e| e.to_string())?;
        match (&witness, &verdict.status) {
            (Some(_), Status::Sat { .. }) => println!("compare: agreement (both sat)"),
            (None, Status::Unsat) => println!("compare: agreement (both unsat)"),
            (None, Status::Sat { vector, .. }) => {
                if vector.total() > BigUint::from(bound) {
                    println!(
                        "compare: solver witness has total {} above the oracle bound {bound}; \
                         raise --bound to cross-check",
                        vector.total()
                    );
                } else {
                    return Err(format!(
                        "disagreement: solver found a model of total {} within the oracle \
                         bound {bound}",
                        vector.total()
                    ));
                }
            }
            (Some(vector), Status::Unsat) => {
                return Err(format!(
                    "disagreement: oracle found {vector} but the solver reports unsat"
                ));
            }
        }
    }
    Ok(if witness.is_some() {
        EXIT_SAT
    } else {
        EXIT_UNSAT
    })
}

#[derive(Serialize)]
struct BenchRow {
    file: String,
    status: String,
    parse_micros: u64,
    solve_micros: u64,
    leaves: u64,
    branches: u64,
}

fn cmd_bench(dir: &Path, format: BenchFormat, flags: &SolveFlags) -> Result<i32, String> {
    let entries =
        std::fs::read_dir(dir).map_err(|e| format!("cannot read {}: {e}", dir.display()))?;
    let mut files: Vec<PathBuf> = entries
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| p.extension().is_some_and(|x| x == "p1"))
        .collect();
    files.sort();

    let cfg = flags.to_config();
    let mut rows = Vec::new();
    for file in files {
        let parse_start = Instant::now();
        let formula = match load_formula(&file) {
            Ok(f) => f,
            Err(e) => {
                eprintln!("warning: skipping {e}");
                continue;
            }
        };
        let parse_micros = parse_start.elapsed().as_micros() as u64;
        let solve_start = Instant::now();
        let verdict = match solve(&formula, &cfg) {
            Ok(v) => v,
            Err(e) => {
                eprintln!("warning: skipping {}: {e}", file.display());
                continue;
            }
        };
        rows.push(BenchRow {
            file: file.display().to_string(),
            status: if verdict.is_sat() { "sat" } else { "unsat" }.to_string(),
            parse_micros,
            solve_micros: solve_start.elapsed().as_micros() as u64,
            leaves: verdict.stats.leaves,
            branches: verdict.stats.branches,
        });
    }

    match format {
        BenchFormat::Csv => {
            println!("file,status,parse_micros,solve_micros,leaves,branches");
            for r in &rows {
                println!(
                    "{},{},{},{},{},{}",
                    r.file, r.status, r.parse_micros, r.solve_micros, r.leaves, r.branches
                );
            }
        }
        BenchFormat::Json => println!(
            "{}",
            serde_json::to_string_pretty(&rows).map_err(|e| e.to_string())?
        ),
    }
    Ok(EXIT_SAT)
}

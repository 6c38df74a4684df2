use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Parser, Subcommand, ValueEnum};

use idfnl::proofs::{check_derivation, parse_derivation, SchemaId};
use idfnl::search::{find_countermodel, fmp_bound, SearchConfig, SearchError, Verdict};
use idfnl::selftest::run_all;
use idfnl::semantics::{denotation, parse_model, satisfies, FrameProperty, Model};
use idfnl::syntax::{closure, parse_formula, parse_sequent, render_formula, FormulaSet};

const HOLDS: u8 = 0;
const FAILS: u8 = 1;
const USAGE: u8 = 2;
const ABORT: u8 = 3;

#[derive(Parser)]
#[command(name = "idfnl", version, about = "Model checker, countermodel search and proof checker for DFNL with iterative division")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the set of states satisfying a formula, or whether one state does.
    Eval {
        model: PathBuf,
        formula: String,
        #[arg(long)]
        state: Option<String>,
    },
    /// Search for a countermodel to a sequent.
    Valid {
        sequent: String,
        #[arg(long, default_value_t = 3, value_parser = clap::value_parser!(u64).range(1..))]
        max_states: u64,
        /// Restrict the search to frames with this property (repeatable).
        #[arg(long = "frame", value_enum)]
        frames: Vec<Frame>,
        /// Worker threads; the output does not depend on this.
        #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
        jobs: u64,
        /// Skip relations isomorphic to one already visited.
        #[arg(long)]
        symmetry_breaking: bool,
        /// Give up after this many seconds.
        #[arg(long)]
        timeout: Option<f64>,
    },
    /// Check a derivation file.
    CheckProof {
        path: PathBuf,
        /// Allow an extension schema (repeatable).
        #[arg(long = "ext", value_enum)]
        extensions: Vec<Extension>,
    },
    /// Print the closure of some formulas, one per line.
    Closure {
        #[arg(required = true)]
        formulas: Vec<String>,
        /// Read a single sequent and also print its finite-model bound.
        #[arg(long)]
        sequent: bool,
    },
    /// Re-print a formula or sequent in canonical form.
    Fmt { text: String },
    /// Run the randomized cross-check suites.
    Selftest {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 100)]
        iterations: u64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Frame {
    Reflexive,
    Commutative,
}

#[derive(Clone, Copy, ValueEnum)]
#[value(rename_all = "snake_case")]
enum Extension {
    WeakContraction,
    WeakCommutativity,
}

fn fail(msg: impl std::fmt::Display) -> u8 {
    eprintln!("error: {msg}");
    USAGE
}

fn read(path: &Path) -> Result<String, u8> {
    fs::read_to_string(path).map_err(|e| fail(format!("{}: {e}", path.display())))
}

fn load_model(path: &Path) -> Result<Model, u8> {
    parse_model(&read(path)?).map_err(|e| fail(format!("{}: {e}", path.display())))
}

fn eval(model: &Path, formula: &str, state: Option<&str>) -> Result<u8, u8> {
    let m = load_model(model)?;
    let f = parse_formula(formula).map_err(fail)?;
    match state {
        Some(s) => {
            let holds = satisfies(&m, s, &f).map_err(fail)?;
            println!("{holds}");
            Ok(if holds { HOLDS } else { FAILS })
        }
        None => {
            let mut names = m.names_of(&denotation(&m, &f));
            names.sort_unstable();
            println!("{{{}}}", names.join(", "));
            Ok(HOLDS)
        }
    }
}

fn valid(
    sequent: &str,
    max_states: u64,
    frames: &[Frame],
    jobs: u64,
    symmetry_breaking: bool,
    timeout: Option<f64>,
) -> Result<u8, u8> {
    let sq = parse_sequent(sequent).map_err(fail)?;
    let mut cfg = SearchConfig::new(max_states as usize);
    for frame in frames {
        cfg.frame_properties.insert(match frame {
            Frame::Reflexive => FrameProperty::Reflexive,
            Frame::Commutative => FrameProperty::Commutative,
        });
    }
    cfg.parallel = jobs > 1;
    cfg.threads = Some(jobs as usize);
    cfg.symmetry_breaking = symmetry_breaking;
    if let Some(secs) = timeout {
        cfg.timeout = Some(Duration::try_from_secs_f64(secs).map_err(fail)?);
    }
    match find_countermodel(&sq, &cfg) {
        Ok(v) => {
            print!("{v}");
            Ok(if matches!(v, Verdict::Countermodel { .. }) { FAILS } else { HOLDS })
        }
        Err(e @ (SearchError::Timeout(_) | SearchError::TooLarge { .. } | SearchError::Pool(_))) => {
            eprintln!("aborted: {e}");
            Err(ABORT)
        }
    }
}

fn check_proof(path: &Path, extensions: &[Extension]) -> Result<u8, u8> {
    let d = parse_derivation(&read(path)?).map_err(|e| fail(format!("{}: {e}", path.display())))?;
    let enabled: BTreeSet<SchemaId> = extensions
        .iter()
        .map(|e| match e {
            Extension::WeakContraction => SchemaId::WeakContraction,
            Extension::WeakCommutativity => SchemaId::WeakCommutativity,
        })
        .collect();
    let report = check_derivation(&d, &enabled);
    match report.first_failure {
        None => {
            println!("OK");
            Ok(HOLDS)
        }
        Some((step, reason)) => {
            println!("step {step}: {reason}");
            Ok(FAILS)
        }
    }
}

fn print_closure(texts: &[String], sequent: bool) -> Result<u8, u8> {
    let mut roots = FormulaSet::new();
    let mut bound = None;
    if sequent {
        let [text] = texts else {
            return Err(fail("--sequent takes exactly one sequent"));
        };
        let sq = parse_sequent(text).map_err(fail)?;
        bound = Some(fmp_bound(&sq));
        roots.insert(sq.lhs);
        roots.insert(sq.rhs);
    } else {
        for text in texts {
            roots.insert(parse_formula(text).map_err(fail)?);
        }
    }
    let mut lines: Vec<String> = closure(&roots).iter().map(render_formula).collect();
    lines.sort();
    for line in lines {
        println!("{line}");
    }
    match bound {
        Some(Ok(b)) => println!("bound: {b}"),
        Some(Err(e)) => println!("bound: 2^{}", e.0),
        None => {}
    }
    Ok(HOLDS)
}

fn fmt(text: &str) -> Result<u8, u8> {
    if text.contains("|-") {
        println!("{}", parse_sequent(text).map_err(fail)?);
    } else {
        println!("{}", parse_formula(text).map_err(fail)?);
    }
    Ok(HOLDS)
}

fn selftest(seed: u64, iterations: u64) -> Result<u8, u8> {
    let reports = std::panic::catch_unwind(|| run_all(seed, iterations)).map_err(|_| ABORT)?;
    let failed = reports.iter().filter(|r| !r.passed()).count();
    for r in &reports {
        println!("{r}");
    }
    println!("{} suites passed, {failed} failed (seed {seed})", reports.len() - failed);
    Ok(if failed == 0 { HOLDS } else { FAILS })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Eval { model, formula, state } => eval(model, formula, state.as_deref()),
        Command::Valid { sequent, max_states, frames, jobs, symmetry_breaking, timeout } => {
            valid(sequent, *max_states, frames, *jobs, *symmetry_breaking, *timeout)
        }
        Command::CheckProof { path, extensions } => check_proof(path, extensions),
        Command::Closure { formulas, sequent } => print_closure(formulas, *sequent),
        Command::Fmt { text } => fmt(text),
        Command::Selftest { seed, iterations } => selftest(*seed, *iterations),
    };
    ExitCode::from(result.unwrap_or_else(|code| code))
}

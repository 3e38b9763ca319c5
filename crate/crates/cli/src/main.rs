use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use byztame::checker::{check, CheckInput, Verdict};
use byztame::histfile;
use byztame::scenario::{builtin, execute, parse_with_default, Scenario, ScenarioError, BUILTINS};
use byztame::sim::{TraceMode, DEFAULT_MAX_STEPS};

/// Byzantine shared-memory objects on a deterministic simulator.
#[derive(Parser)]
#[command(name = "byztame", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario once and write trace.log, history.txt and verdict.txt.
    Run {
        /// Scenario file, or the name of a built-in scenario.
        scenario: String,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Run a scenario over a range of seeds and summarize.
    Sweep {
        scenario: String,
        /// Inclusive range `A..B`.
        #[arg(long)]
        seeds: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check a history file for Byzantine linearizability.
    Check {
        history: PathBuf,
        /// Most hypothesized Byzantine operations to use.
        #[arg(long, default_value_t = byztame::checker::DEFAULT_BUDGET)]
        budget: usize,
    },
    /// List the built-in scenarios.
    List,
}

enum Failure {
    Expectation(String),
    Parse(String),
}

fn default_max_steps() -> Result<u64> {
    match std::env::var("BYZTAME_MAX_STEPS") {
        Ok(v) => v
            .trim()
            .parse()
            .with_context(|| format!("BYZTAME_MAX_STEPS={v} is not a number")),
        Err(_) => Ok(DEFAULT_MAX_STEPS),
    }
}

fn load(spec: &str) -> Result<std::result::Result<Scenario, Failure>> {
    let path = Path::new(spec);
    let (origin, text) = if path.exists() {
        (
            spec.to_string(),
            fs::read_to_string(path).with_context(|| format!("reading {spec}"))?,
        )
    } else if let Some(text) = builtin(spec) {
        (format!("built-in {spec}"), text.to_string())
    } else {
        bail!("{spec}: no such file or built-in scenario");
    };
    Ok(parse_with_default(&text, default_max_steps()?)
        .map_err(|e: ScenarioError| Failure::Parse(format!("{origin}: {e}"))))
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<()> {
    let path = dir.join(name);
    fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))
}

fn run(spec: &str, seed: Option<u64>, out: &Path) -> Result<std::result::Result<(), Failure>> {
    let mut scenario = match load(spec)? {
        Ok(s) => s,
        Err(e) => return Ok(Err(e)),
    };
    if let Some(seed) = seed {
        scenario = scenario.with_seed(seed);
    }
    let report = execute(&scenario, TraceMode::Full)?;
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    write(out, "trace.log", &report.outcome.trace)?;
    write(out, "history.txt", &report.history_text())?;
    let verdict = report.verdict_text();
    write(out, "verdict.txt", &verdict)?;
    print!("{verdict}");
    let failed: Vec<String> = report.failed().iter().map(|r| r.name.clone()).collect();
    if failed.is_empty() {
        Ok(Ok(()))
    } else {
        Ok(Err(Failure::Expectation(failed.join(", "))))
    }
}

fn parse_range(s: &str) -> Result<(u64, u64)> {
    let (a, b) = s
        .split_once("..")
        .with_context(|| format!("seed range `{s}` is not A..B"))?;
    let a: u64 = a.trim().parse().with_context(|| format!("bad seed `{a}`"))?;
    let b: u64 = b.trim().parse().with_context(|| format!("bad seed `{b}`"))?;
    if b < a {
        bail!("empty seed range {a}..{b}");
    }
    Ok((a, b))
}

fn sweep(spec: &str, seeds: &str, out: Option<&Path>) -> Result<std::result::Result<(), Failure>> {
    let scenario = match load(spec)? {
        Ok(s) => s,
        Err(e) => return Ok(Err(e)),
    };
    let (a, b) = parse_range(seeds)?;
    let mut lines = vec![format!("{:>8} {:<17} {:>9} result", "seed", "status", "steps")];
    let mut passed = 0u64;
    let mut max_steps = 0u64;
    let mut failures: Vec<String> = Vec::new();
    for seed in a..=b {
        let report = execute(&scenario.clone().with_seed(seed), TraceMode::Off)?;
        let failed: Vec<String> = report.failed().iter().map(|r| r.name.clone()).collect();
        let result = if failed.is_empty() {
            passed += 1;
            "pass".to_string()
        } else {
            for f in &failed {
                if !failures.contains(f) {
                    failures.push(f.clone());
                }
            }
            format!("FAIL {}", failed.join(", "))
        };
        max_steps = max_steps.max(report.outcome.steps);
        lines.push(format!(
            "{seed:>8} {:<17} {:>9} {result}",
            report.outcome.status.name(),
            report.outcome.steps
        ));
    }
    let total = b - a + 1;
    lines.push(format!(
        "scenario={} seeds={a}..{b} passed={passed}/{total} rate={:.1}% max-steps={max_steps}",
        scenario.name,
        100.0 * passed as f64 / total as f64
    ));
    let summary = lines.join("\n") + "\n";
    print!("{summary}");
    if let Some(dir) = out {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        write(dir, "summary.txt", &summary)?;
    }
    if failures.is_empty() {
        Ok(Ok(()))
    } else {
        Ok(Err(Failure::Expectation(failures.join(", "))))
    }
}

fn check_file(path: &Path, budget: usize) -> Result<ExitCode> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let (kind, _, history) = match histfile::parse(&text) {
        Ok(parsed) => parsed,
        Err(e) => {
            eprintln!("{}: {e}", path.display());
            return Ok(ExitCode::from(2));
        }
    };
    let input = CheckInput::new(kind, history).budget(budget);
    let report = match check(&input) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("{}: malformed history: {e}", path.display());
            return Ok(ExitCode::from(2));
        }
    };
    print!("{report}");
    Ok(match report.verdict {
        Verdict::Linearizable { .. } => ExitCode::SUCCESS,
        Verdict::Violation { .. } => ExitCode::from(1),
        Verdict::Inconclusive { .. } => ExitCode::from(3),
    })
}

fn finish(result: std::result::Result<(), Failure>) -> ExitCode {
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Expectation(names)) => {
            eprintln!("expectation failed: {names}");
            ExitCode::from(1)
        }
        Err(Failure::Parse(msg)) => {
            eprintln!("{msg}");
            ExitCode::from(2)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { scenario, seed, out } => run(&scenario, seed, &out).map(finish),
        Command::Sweep { scenario, seeds, out } => sweep(&scenario, &seeds, out.as_deref()).map(finish),
        Command::Check { history, budget } => check_file(&history, budget),
        Command::List => {
            for (name, _) in BUILTINS {
                println!("{name}");
            }
            Ok(ExitCode::SUCCESS)
        }
    };
    result.unwrap_or_else(|e| {
        eprintln!("error: {e:#}");
        ExitCode::from(2)
    })
}

//! `nmas`: validate, run and inspect scenario bundles.
//!
//! Exit status: 0 on success, 1 when a run misses its success conditions
//! or leaves violations unremedied (or `validate` finds errors), 2 when the
//! input cannot be used at all.

use std::fs;
use std::io::{self, BufRead, IsTerminal, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use nmas::conformance::run_fixture;
use nmas::oracle::{Cassette, Oracle, Recorder, Replay};
use nmas::repl::{run_session, Flow, Repl};
use nmas::runtime::SystemState;
use nmas::scenario::{run_scenario_with, FileError, Scenario, ScenarioInvalid, Summary};
use nmas::trace::{Trace, TraceKind};

#[derive(Parser)]
#[command(name = "nmas", version, about = "Normative BDI multi-agent scenarios")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum OracleMode {
    /// Answer from the bundle's oracle script.
    Scripted,
    /// Answer from a recorded cassette.
    Replay,
    /// Answer from the script and record every call to the cassette.
    Record,
    /// Call a remote model; needs the `live` feature and NMAS_LLM_* variables.
    Live,
}

#[derive(clap::Args)]
struct RunArgs {
    /// Scenario bundle directory.
    scenario: PathBuf,
    #[arg(long)]
    max_cycles: Option<u64>,
    /// Write the NDJSON trace here.
    #[arg(long)]
    trace: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "scripted")]
    oracle: OracleMode,
    /// Cassette file for replay and record modes (and optionally live).
    #[arg(long)]
    cassette: Option<PathBuf>,
    /// Passed to the live backend; the runtime itself is deterministic.
    #[arg(long)]
    seed: Option<u64>,
    /// Open a human-proxy session before running.
    #[arg(long)]
    interactive: bool,
    /// Read session commands from this file instead of the terminal.
    #[arg(long)]
    transcript: Option<PathBuf>,
    /// Role (or agent name) the human proxy acts as.
    #[arg(long)]
    human_role: Option<String>,
    /// Print the summary as JSON.
    #[arg(long)]
    json: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Parse and lint every file of a bundle.
    Validate { scenario: PathBuf },
    /// Run a bundle to quiescence or the cycle limit.
    Run(RunArgs),
    /// Human-proxy session without the automatic run afterwards.
    Repl(RunArgs),
    /// Run a bundle and compare it with the values pinned in its manifest.
    Check { scenarios: Vec<PathBuf> },
    /// Pretty-print or filter a trace file.
    Trace {
        file: PathBuf,
        #[arg(long)]
        kind: Vec<String>,
        #[arg(long)]
        agent: Vec<String>,
        #[arg(long)]
        from: Option<u64>,
        #[arg(long)]
        to: Option<u64>,
        /// Emit matching lines unchanged instead of pretty-printing.
        #[arg(long)]
        raw: bool,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Validate { scenario } => validate(&scenario),
        Command::Run(args) => run(&args, true),
        Command::Repl(args) => run(&args, false),
        Command::Check { scenarios } => check(&scenarios),
        Command::Trace {
            file,
            kind,
            agent,
            from,
            to,
            raw,
        } => trace(&file, &kind, &agent, from, to, raw),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn print_errors(errors: &[FileError]) {
    for e in errors {
        eprintln!("error: {e}");
    }
}

fn load(dir: &Path) -> Result<Scenario, ExitCode> {
    Scenario::load(dir).map_err(|ScenarioInvalid(errors)| {
        print_errors(&errors);
        ExitCode::from(2)
    })
}

fn validate(dir: &Path) -> Result<ExitCode> {
    let scenario = match Scenario::load(dir) {
        Ok(s) => s,
        Err(ScenarioInvalid(errors)) => {
            print_errors(&errors);
            println!("{}: {} error(s)", dir.display(), errors.len());
            return Ok(ExitCode::from(1));
        }
    };
    let (errors, warnings) = scenario.lint();
    print_errors(&errors);
    for w in &warnings {
        eprintln!("warning: {w}");
    }
    println!(
        "{}: {} error(s), {} warning(s)",
        scenario.name,
        errors.len(),
        warnings.len()
    );
    Ok(if errors.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

fn oracle_for(scenario: &Scenario, args: &RunArgs) -> Result<Box<dyn Oracle>> {
    let cassette = || args.cassette.as_deref().context("this oracle mode needs --cassette");
    Ok(match args.oracle {
        OracleMode::Scripted => Box::new(scenario.scripted_oracle()),
        OracleMode::Replay => {
            let path = cassette()?;
            let c = Cassette::load(path).with_context(|| format!("reading {}", path.display()))?;
            Box::new(Replay::new(c))
        }
        OracleMode::Record => {
            let path = cassette()?;
            Box::new(
                Recorder::to_file(scenario.scripted_oracle(), path)
                    .with_context(|| format!("creating {}", path.display()))?,
            )
        }
        OracleMode::Live => live_oracle(args)?,
    })
}

#[cfg(feature = "live")]
fn live_oracle(args: &RunArgs) -> Result<Box<dyn Oracle>> {
    use nmas::oracle::{LiveConfig, LiveOracle};
    let live = LiveOracle::new(LiveConfig::from_env(args.seed)?);
    Ok(match &args.cassette {
        Some(path) => Box::new(Recorder::to_file(live, path)?),
        None => Box::new(live),
    })
}

#[cfg(not(feature = "live"))]
fn live_oracle(_: &RunArgs) -> Result<Box<dyn Oracle>> {
    bail!("this build has no live oracle; rebuild with `--features live`")
}

enum Input {
    Nothing,
    Text(String),
    Terminal,
}

/// Session input: `--transcript`, else the terminal when interactive (or
/// for `repl`), else the bundle's own transcript if it has one.
fn session_input(args: &RunArgs, scenario: &Scenario, terminal: bool) -> Result<Input> {
    if let Some(path) = &args.transcript {
        return Ok(Input::Text(
            fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?,
        ));
    }
    if args.interactive || terminal {
        return Ok(Input::Terminal);
    }
    match scenario.read_transcript() {
        Ok(t) => Ok(t.map(Input::Text).unwrap_or(Input::Nothing)),
        Err(ScenarioInvalid(errors)) => {
            print_errors(&errors);
            bail!("unreadable transcript")
        }
    }
}

fn terminal_session(system: &mut SystemState, role: &str) -> Result<()> {
    let mut repl = Repl::new(system, role)?;
    let stdin = io::stdin();
    let mut out = io::stdout();
    let prompt = stdin.is_terminal();
    writeln!(out, "acting as {}; type `help` for commands", repl.human())?;
    let mut lines = stdin.lock().lines();
    loop {
        if prompt {
            write!(out, "> ")?;
            out.flush()?;
        }
        let Some(line) = lines.next() else { break };
        if repl.execute(&line?, &mut out)? == Flow::Quit {
            break;
        }
    }
    Ok(())
}

fn run(args: &RunArgs, auto_run: bool) -> Result<ExitCode> {
    let mut scenario = match load(&args.scenario) {
        Ok(s) => s,
        Err(code) => return Ok(code),
    };
    if let Some(role) = &args.human_role {
        scenario.human_role = role.clone();
    }
    let (errors, _) = scenario.lint();
    if !errors.is_empty() {
        print_errors(&errors);
        return Ok(ExitCode::from(2));
    }
    let max_cycles = args.max_cycles.unwrap_or(scenario.constants.max_cycles);
    let oracle = oracle_for(&scenario, args)?;
    let input = session_input(args, &scenario, !auto_run)?;
    // Keep stdout parseable when it carries the JSON summary.
    let mut echo: Box<dyn Write> = if args.json {
        Box::new(io::stderr())
    } else {
        Box::new(io::stdout())
    };
    let system = match input {
        Input::Nothing => run_scenario_with(&scenario, max_cycles, oracle, None, &mut echo),
        Input::Text(text) if auto_run => run_scenario_with(&scenario, max_cycles, oracle, Some(&text), &mut echo),
        Input::Text(text) => build_and(&scenario, oracle, |system| {
            let mut repl = Repl::new(system, &scenario.human_role)?;
            run_session(&mut repl, text.as_bytes(), &mut echo)?;
            Ok(())
        }),
        Input::Terminal => build_and(&scenario, oracle, |system| {
            terminal_session(system, &scenario.human_role)?;
            if auto_run {
                let done = system.cycle;
                nmas::runtime::run(system, max_cycles.saturating_sub(done));
            }
            Ok(())
        }),
    };
    let system = match system {
        Ok(s) => s,
        Err(ScenarioInvalid(errors)) => {
            print_errors(&errors);
            return Ok(ExitCode::from(2));
        }
    };
    if let Some(path) = &args.trace {
        fs::write(path, system.trace.to_ndjson()).with_context(|| format!("writing {}", path.display()))?;
    }
    let summary = Summary::of(&scenario, &system);
    if args.json {
        println!("{}", serde_json::to_string_pretty(&summary)?);
    } else {
        println!("{summary}");
    }
    Ok(if summary.ok() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

fn build_and(
    scenario: &Scenario,
    oracle: Box<dyn Oracle>,
    f: impl FnOnce(&mut SystemState) -> Result<()>,
) -> Result<SystemState, ScenarioInvalid> {
    let mut system = scenario.build(oracle)?;
    f(&mut system).map_err(|e| {
        ScenarioInvalid(vec![FileError {
            file: "session".into(),
            line: None,
            column: None,
            message: format!("{e:#}"),
        }])
    })?;
    Ok(system)
}

fn check(dirs: &[PathBuf]) -> Result<ExitCode> {
    if dirs.is_empty() {
        bail!("name at least one scenario bundle");
    }
    let mut all = true;
    for dir in dirs {
        match run_fixture(dir) {
            Ok(report) => {
                all &= report.passed();
                println!("{report}");
                println!("  digest {}", report.summary.digest);
            }
            Err(ScenarioInvalid(errors)) => {
                all = false;
                print_errors(&errors);
                println!("{}: invalid", dir.display());
            }
        }
    }
    Ok(if all { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

fn trace(
    file: &Path,
    kinds: &[String],
    agents: &[String],
    from: Option<u64>,
    to: Option<u64>,
    raw: bool,
) -> Result<ExitCode> {
    let text = fs::read_to_string(file).with_context(|| format!("reading {}", file.display()))?;
    let trace = Trace::parse(&text)?;
    let mut wanted = Vec::new();
    for k in kinds {
        match TraceKind::parse(k) {
            Some(k) => wanted.push(k),
            None => {
                let all: Vec<&str> = TraceKind::ALL.iter().map(|k| k.as_str()).collect();
                bail!("unknown trace kind `{k}`; expected one of {}", all.join(", "));
            }
        }
    }
    let mut out = io::stdout().lock();
    for e in trace.entries() {
        let keep = (wanted.is_empty() || wanted.contains(&e.kind))
            && (agents.is_empty() || agents.contains(&e.agent))
            && from.is_none_or(|f| e.cycle >= f)
            && to.is_none_or(|t| e.cycle <= t);
        if !keep {
            continue;
        }
        if raw {
            writeln!(out, "{}", e.to_line())?;
        } else {
            writeln!(
                out,
                "{:>4}.{:<3} {:<14} {:<22} {}",
                e.cycle,
                e.seq,
                e.agent,
                e.kind.as_str(),
                explain(&e.payload)
            )?;
        }
    }
    Ok(ExitCode::SUCCESS)
}

/// One-line rendering of a payload, most telling fields first.
fn explain(payload: &serde_json::Value) -> String {
    const FIRST: &[&str] = &[
        "step",
        "performed",
        "event",
        "trigger",
        "belief",
        "percept",
        "content",
        "prompt",
        "norm",
        "id",
        "outcome",
    ];
    let Some(obj) = payload.as_object() else {
        return payload.to_string();
    };
    let mut keys: Vec<&String> = obj.keys().collect();
    keys.sort_by_key(|k| FIRST.iter().position(|f| f == k).unwrap_or(FIRST.len()));
    keys.iter()
        .map(|k| match &obj[*k] {
            serde_json::Value::String(s) => format!("{k}={s}"),
            v => format!("{k}={v}"),
        })
        .collect::<Vec<_>>()
        .join("  ")
}

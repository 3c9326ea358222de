//! Scenario bundles: a directory holding `scenario.json` and the files it
//! names.
//!
//! ```json
//! {"name": "figs23_end_to_end",
//!  "agents": [{"name": "CodingAgent", "roles": ["coder"], "sources": ["../agents/coding_agent.asl"]}],
//!  "environment": "env.json", "oracle": "oracle.json",
//!  "norms": "norms.json", "commitments": "commitments.json",
//!  "constants": {"max_cycles": 200, "cycles_per_hour": 1, "obligation_window": 50},
//!  "success": [{"agent": "CodingAgent", "belief": "test_result(t1, pass)"}],
//!  "expected": {"violations": 0, "commitments": {"satisfied": 1}}}
//! ```
//!
//! Paths are relative to the bundle directory.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::commitment::{CState, CommitmentFile};
use crate::env::{EnvFixture, SimEnv};
use crate::lang::{parse_agent_source, parse_literal, AgentProgram, Literal, PlanStep};
use crate::norms::{lint_program, NormSet, Party, DEFAULT_WINDOW};
use crate::oracle::{Oracle, OracleScript, ScriptedOracle};
use crate::repl::{run_session, Repl};
use crate::runtime::{run, SystemState};

pub const MANIFEST: &str = "scenario.json";

/// One problem found while loading, located as precisely as possible.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FileError {
    pub file: String,
    pub line: Option<usize>,
    pub column: Option<usize>,
    pub message: String,
}

impl fmt::Display for FileError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.line, self.column) {
            (Some(l), Some(c)) => write!(f, "{}:{l}:{c}: {}", self.file, self.message),
            (Some(l), None) => write!(f, "{}:{l}: {}", self.file, self.message),
            _ => write!(f, "{}: {}", self.file, self.message),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub struct ScenarioInvalid(pub Vec<FileError>);

impl fmt::Display for ScenarioInvalid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "scenario is invalid:")?;
        for e in &self.0 {
            write!(f, "\n  {e}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct Constants {
    pub max_cycles: u64,
    pub cycles_per_hour: u64,
    pub obligation_window: u64,
}

impl Default for Constants {
    fn default() -> Self {
        Constants {
            max_cycles: 200,
            cycles_per_hour: 1,
            obligation_window: DEFAULT_WINDOW,
        }
    }
}

/// Counts a fixture pins; absent fields are not checked.
#[derive(Debug, Clone, Default, PartialEq, Eq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct Expected {
    #[serde(default)]
    pub violations: Option<u64>,
    #[serde(default)]
    pub prevented: Option<u64>,
    #[serde(default)]
    pub remedies: Option<u64>,
    #[serde(default)]
    pub goals_failed: Option<u64>,
    #[serde(default)]
    pub cycles: Option<u64>,
    /// State name to count, e.g. `{"satisfied": 1}`.
    #[serde(default)]
    pub commitments: BTreeMap<String, usize>,
    #[serde(default)]
    pub digest: Option<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAgent {
    name: String,
    #[serde(default)]
    roles: Vec<String>,
    #[serde(default)]
    sources: Vec<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCondition {
    agent: String,
    belief: String,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawManifest {
    name: String,
    #[serde(default)]
    description: String,
    agents: Vec<RawAgent>,
    #[serde(default)]
    environment: Option<String>,
    #[serde(default)]
    oracle: Option<String>,
    #[serde(default)]
    norms: Option<String>,
    #[serde(default)]
    commitments: Option<String>,
    #[serde(default)]
    constants: Constants,
    #[serde(default = "human")]
    human_role: String,
    #[serde(default)]
    success: Vec<RawCondition>,
    #[serde(default)]
    expected: Option<Expected>,
    #[serde(default)]
    transcript: Option<String>,
}

fn human() -> String {
    "human".into()
}

#[derive(Debug, Clone)]
pub struct AgentSpec {
    pub name: String,
    pub roles: Vec<String>,
    /// Source files with their parsed programs, in manifest order.
    pub sources: Vec<(String, AgentProgram)>,
}

impl AgentSpec {
    pub fn program(&self) -> AgentProgram {
        let mut p = AgentProgram::default();
        for (_, src) in &self.sources {
            p.extend(src.clone());
        }
        p
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Condition {
    pub agent: String,
    pub belief: Literal,
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.agent, self.belief)
    }
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub dir: PathBuf,
    pub name: String,
    pub description: String,
    pub agents: Vec<AgentSpec>,
    pub env: EnvFixture,
    pub oracle: OracleScript,
    pub norms: NormSet,
    pub commitments: CommitmentFile,
    pub constants: Constants,
    pub human_role: String,
    pub success: Vec<Condition>,
    pub expected: Option<Expected>,
    pub transcript: Option<PathBuf>,
}

fn read(dir: &Path, rel: &str, errors: &mut Vec<FileError>) -> Option<String> {
    match std::fs::read_to_string(dir.join(rel)) {
        Ok(t) => Some(t),
        Err(e) => {
            errors.push(FileError {
                file: rel.to_string(),
                line: None,
                column: None,
                message: e.to_string(),
            });
            None
        }
    }
}

fn json_error(file: &str, e: &serde_json::Error) -> FileError {
    FileError {
        file: file.to_string(),
        line: Some(e.line()),
        column: Some(e.column()),
        message: e.to_string(),
    }
}

fn plain(file: &str, message: impl Into<String>) -> FileError {
    FileError {
        file: file.to_string(),
        line: None,
        column: None,
        message: message.into(),
    }
}

impl Scenario {
    /// Load and parse every file of a bundle, reporting all problems.
    pub fn load(dir: &Path) -> Result<Scenario, ScenarioInvalid> {
        let mut errors = Vec::new();
        let Some(text) = read(dir, MANIFEST, &mut errors) else {
            return Err(ScenarioInvalid(errors));
        };
        let raw: RawManifest =
            serde_json::from_str(&text).map_err(|e| ScenarioInvalid(vec![json_error(MANIFEST, &e)]))?;
        let mut agents = Vec::new();
        for a in &raw.agents {
            if agents.iter().any(|x: &AgentSpec| x.name == a.name) {
                errors.push(plain(MANIFEST, format!("agent {} is listed twice", a.name)));
                continue;
            }
            let mut sources = Vec::new();
            for rel in &a.sources {
                let Some(src) = read(dir, rel, &mut errors) else {
                    continue;
                };
                match parse_agent_source(&src) {
                    Ok(p) => sources.push((rel.clone(), p)),
                    Err(e) => {
                        let (line, column) = e.position();
                        errors.push(FileError {
                            file: rel.clone(),
                            line: Some(line),
                            column: Some(column),
                            message: e.to_string(),
                        });
                    }
                }
            }
            agents.push(AgentSpec {
                name: a.name.clone(),
                roles: a.roles.clone(),
                sources,
            });
        }
        let env = match &raw.environment {
            None => EnvFixture::default(),
            Some(rel) => read(dir, rel, &mut errors)
                .and_then(|t| EnvFixture::from_json(&t).map_err(|e| errors.push(plain(rel, e.0))).ok())
                .unwrap_or_default(),
        };
        let oracle = match &raw.oracle {
            None => OracleScript::refuse_all(),
            Some(rel) => read(dir, rel, &mut errors)
                .and_then(|t| {
                    OracleScript::from_json(&t)
                        .map_err(|e| errors.push(plain(rel, e.0)))
                        .ok()
                })
                .unwrap_or_else(OracleScript::refuse_all),
        };
        let norms = match &raw.norms {
            None => NormSet::default(),
            Some(rel) => read(dir, rel, &mut errors)
                .and_then(|t| {
                    NormSet::from_json_with_window(&t, raw.constants.obligation_window)
                        .map_err(|e| errors.push(plain(rel, e.to_string())))
                        .ok()
                })
                .unwrap_or_default(),
        };
        let commitments = match &raw.commitments {
            None => CommitmentFile::default(),
            Some(rel) => read(dir, rel, &mut errors)
                .and_then(|t| {
                    CommitmentFile::from_json(&t)
                        .map_err(|e| errors.push(plain(rel, e.0)))
                        .ok()
                })
                .unwrap_or_default(),
        };
        let mut success = Vec::new();
        for c in &raw.success {
            if !agents.iter().any(|a| a.name == c.agent) {
                errors.push(plain(
                    MANIFEST,
                    format!("success condition names unknown agent {}", c.agent),
                ));
            }
            match parse_literal(&c.belief) {
                Ok(belief) => success.push(Condition {
                    agent: c.agent.clone(),
                    belief,
                }),
                Err(e) => errors.push(plain(MANIFEST, format!("success condition `{}`: {e}", c.belief))),
            }
        }
        if let Some(e) = &raw.expected {
            for state in e.commitments.keys() {
                if parse_state(state).is_none() {
                    errors.push(plain(MANIFEST, format!("unknown commitment state `{state}`")));
                }
            }
        }
        if raw.constants.cycles_per_hour == 0 {
            errors.push(plain(MANIFEST, "cycles_per_hour must be positive"));
        }
        if !errors.is_empty() {
            return Err(ScenarioInvalid(errors));
        }
        Ok(Scenario {
            dir: dir.to_path_buf(),
            name: raw.name,
            description: raw.description,
            agents,
            env,
            oracle,
            norms,
            commitments,
            constants: raw.constants,
            human_role: raw.human_role,
            success,
            expected: raw.expected,
            transcript: raw.transcript.map(|t| dir.join(t)),
        })
    }

    /// Static checks beyond parsing. Errors make the bundle unusable;
    /// warnings preview plans that always-active prohibitions forbid.
    pub fn lint(&self) -> (Vec<FileError>, Vec<FileError>) {
        let mut errors = Vec::new();
        let mut warnings = Vec::new();
        let env = SimEnv::new(self.env.clone());
        for agent in &self.agents {
            let party = Party::new(&agent.name, &agent.roles);
            for (file, program) in &agent.sources {
                for plan in &program.plans {
                    for step in &plan.body {
                        if let PlanStep::ExternalAction(l) = step {
                            if !env.knows_action(&l.predicate, l.arity()) {
                                errors.push(plain(
                                    file,
                                    format!(
                                        "plan {} of {} uses undeclared action {}/{}",
                                        plan.index,
                                        agent.name,
                                        l.predicate,
                                        l.arity()
                                    ),
                                ));
                            }
                        }
                    }
                }
                for (index, norm, step) in lint_program(program, party, &self.norms) {
                    warnings.push(plain(
                        file,
                        format!(
                            "plan {index} of {} has step {step} prohibited by norm {norm}",
                            agent.name
                        ),
                    ));
                }
            }
        }
        let known = |who: &str| {
            self.agents
                .iter()
                .any(|a| a.name == who || a.roles.iter().any(|r| r == who))
        };
        for c in &self.commitments.commitments {
            for party in [&c.debtor, &c.creditor] {
                if !known(party) {
                    errors.push(plain(
                        "commitments",
                        format!("commitment party {party} is not a registered agent or role"),
                    ));
                }
            }
        }
        for n in &self.norms.norms {
            if !known(&n.subject) {
                warnings.push(plain(
                    "norms",
                    format!("norm {} names unknown subject {}", n.id, n.subject),
                ));
            }
        }
        (errors, warnings)
    }

    /// A scripted oracle over the bundle's script.
    pub fn scripted_oracle(&self) -> ScriptedOracle {
        ScriptedOracle::new(self.oracle.clone())
    }

    pub fn read_transcript(&self) -> Result<Option<String>, ScenarioInvalid> {
        match &self.transcript {
            None => Ok(None),
            Some(path) => std::fs::read_to_string(path)
                .map(Some)
                .map_err(|e| ScenarioInvalid(vec![plain(&path.display().to_string(), e.to_string())])),
        }
    }

    /// Register the agents and commitments into a fresh system.
    pub fn build(&self, oracle: Box<dyn Oracle>) -> Result<SystemState, ScenarioInvalid> {
        let mut system = SystemState::new(SimEnv::new(self.env.clone()), self.norms.clone(), oracle);
        system.cycles_per_hour = self.constants.cycles_per_hour;
        system.human_role = self.human_role.clone();
        for a in &self.agents {
            system
                .register_agent(&a.name, a.roles.clone(), a.program())
                .map_err(|e| ScenarioInvalid(vec![plain(MANIFEST, e.to_string())]))?;
        }
        system
            .install_commitments(&self.commitments)
            .map_err(|e| ScenarioInvalid(vec![plain("commitments", e.to_string())]))?;
        Ok(system)
    }

    /// Placeholder beliefs such as `task_status(_, _)` are not evidence.
    pub fn success_holds(&self, system: &SystemState) -> Vec<(Condition, bool)> {
        self.success
            .iter()
            .map(|c| {
                let ok = system
                    .agent(&c.agent)
                    .map(|a| {
                        a.beliefs
                            .without_placeholders()
                            .holds(std::slice::from_ref(&c.belief))
                            .unwrap_or(false)
                    })
                    .unwrap_or(false);
                (c.clone(), ok)
            })
            .collect()
    }
}

pub fn parse_state(s: &str) -> Option<CState> {
    use CState::*;
    [Null, Active, Detached, Satisfied, Violated, Expired, Cancelled]
        .into_iter()
        .find(|c| c.as_str() == s)
}

/// Build and run a scenario with the given oracle. A bundle transcript is
/// replayed through the human-proxy session first, its output discarded.
pub fn run_scenario(
    scenario: &Scenario,
    max_cycles: u64,
    oracle: Box<dyn Oracle>,
) -> Result<SystemState, ScenarioInvalid> {
    let transcript = scenario.read_transcript()?;
    run_scenario_with(
        scenario,
        max_cycles,
        oracle,
        transcript.as_deref(),
        &mut std::io::sink(),
    )
}

/// Build, replay `transcript` (if any) as REPL input, then run to
/// quiescence or `max_cycles` total cycles.
pub fn run_scenario_with(
    scenario: &Scenario,
    max_cycles: u64,
    oracle: Box<dyn Oracle>,
    transcript: Option<&str>,
    out: &mut dyn Write,
) -> Result<SystemState, ScenarioInvalid> {
    let mut system = scenario.build(oracle)?;
    if let Some(text) = transcript {
        let mut repl = Repl::new(&mut system, &scenario.human_role)
            .map_err(|e| ScenarioInvalid(vec![plain(MANIFEST, e.to_string())]))?;
        run_session(&mut repl, text.as_bytes(), out)
            .map_err(|e| ScenarioInvalid(vec![plain("transcript", e.to_string())]))?;
    }
    let done = system.cycle;
    run(&mut system, max_cycles.saturating_sub(done));
    Ok(system)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Summary {
    pub scenario: String,
    pub cycles: u64,
    pub goals_achieved: u64,
    pub goals_failed: u64,
    pub violations: u64,
    pub prevented: u64,
    pub remedies: u64,
    pub unremedied: u64,
    pub commitments: BTreeMap<String, usize>,
    pub success: Vec<(String, bool)>,
    pub digest: String,
}

impl Summary {
    pub fn of(scenario: &Scenario, system: &SystemState) -> Summary {
        let (goals_achieved, goals_failed) = system.goals();
        let mut commitments = BTreeMap::new();
        for c in system.commitments.iter() {
            *commitments.entry(c.state.as_str().to_string()).or_insert(0) += 1;
        }
        Summary {
            scenario: scenario.name.clone(),
            cycles: system.cycle,
            goals_achieved,
            goals_failed,
            violations: system.counters.violations,
            prevented: system.prevented(),
            remedies: system.counters.remedies,
            unremedied: system.counters.unremedied,
            commitments,
            success: scenario
                .success_holds(system)
                .into_iter()
                .map(|(c, ok)| (c.to_string(), ok))
                .collect(),
            digest: system.trace.digest(),
        }
    }

    /// The run's exit criterion.
    pub fn ok(&self) -> bool {
        self.unremedied == 0 && self.success.iter().all(|(_, ok)| *ok)
    }

    pub fn commitments_in(&self, state: CState) -> usize {
        self.commitments.get(state.as_str()).copied().unwrap_or(0)
    }
}

impl fmt::Display for Summary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "scenario: {}", self.scenario)?;
        writeln!(f, "cycles: {}", self.cycles)?;
        writeln!(
            f,
            "goals: {} achieved, {} failed",
            self.goals_achieved, self.goals_failed
        )?;
        writeln!(
            f,
            "violations: {} ({} prevented attempts), remedies: {}, unremedied: {}",
            self.violations, self.prevented, self.remedies, self.unremedied
        )?;
        let states: Vec<String> = self.commitments.iter().map(|(s, n)| format!("{n} {s}")).collect();
        writeln!(
            f,
            "commitments: {}",
            if states.is_empty() {
                "none".into()
            } else {
                states.join(", ")
            }
        )?;
        for (c, ok) in &self.success {
            writeln!(f, "success {}: {c}", if *ok { "holds" } else { "FAILS" })?;
        }
        write!(f, "trace digest: {}", self.digest)
    }
}

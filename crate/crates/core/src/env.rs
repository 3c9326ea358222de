//! In-memory stand-in for the repository host, issue tracker and CI that
//! the agents act on. Everything is scripted by a JSON fixture:
//!
//! ```json
//! {
//!   "repos": [{"url": "https://github.com/codebase.git", "files": {"README.md": "demo"}}],
//!   "backlog": [{"id": "t1", "title": "signup form"}],
//!   "ci": {"t1": {"verdict": "pass", "effects": ["logged(ip_address(u1))"]}},
//!   "visibility": {"CodingAgent": ["backlog", "prs", "ci"], "TestingAgent": ["prs"]},
//!   "actions": [{"name": "hard_code_api_key", "params": ["K"], "effects": ["api_key_in_source(K)"]}]
//! }
//! ```
//!
//! Environment facts carry the agent that caused them and a channel.
//! Agents perceive facts they caused plus facts on channels listed for
//! them under `visibility` (`"*"` means every channel).

use indexmap::IndexMap;
use serde::Deserialize;

use crate::lang::{parse_literal, parse_term, Literal, Term};
use crate::logic::{unify, unify_literals, Substitution};

pub const BUILTIN_ACTIONS: &[(&str, usize)] = &[
    ("clone_repo", 1),
    ("get_backlog_item", 1),
    ("save_code_to_file", 2),
    ("submitPR", 1),
    ("compile_and_test", 2),
    ("purge_log", 1),
];

const ALIASES: &[(&str, &str)] = &[("complile_and_test", "compile_and_test")];

/// The channel facts produced by fixture CI effects are published on.
pub const LOG_CHANNEL: &str = "logs";

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EnvError {
    #[error("unknown action {name}/{arity}")]
    UnknownAction { name: String, arity: usize },
    #[error("argument {position} of {action} must be bound")]
    UnboundRequiredArgument { action: String, position: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{0}")]
pub struct FixtureError(pub String);

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ActionResult {
    pub success: bool,
    pub bindings: Substitution,
    pub effects: Vec<Literal>,
}

impl ActionResult {
    fn ok(effects: Vec<Literal>) -> Self {
        ActionResult {
            success: true,
            bindings: Substitution::new(),
            effects,
        }
    }

    fn failed() -> Self {
        ActionResult::default()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnvFact {
    pub literal: Literal,
    pub author: String,
    pub channel: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CiEntry {
    pub verdict: Term,
    pub effects: Vec<Literal>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeclaredAction {
    pub name: String,
    pub params: Vec<String>,
    pub effects: Vec<Literal>,
    pub channel: String,
    pub succeeds: bool,
}

impl DeclaredAction {
    pub fn arity(&self) -> usize {
        self.params.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Task {
    pub id: String,
    pub title: String,
    pub status: String,
    pub taken_by: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SavedFile {
    pub path: String,
    pub content: String,
    pub task: Option<String>,
    pub author: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PullRequest {
    pub id: u32,
    pub task: Option<String>,
    pub author: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Workspace {
    pub files: IndexMap<String, String>,
    pub branches: Vec<String>,
    pub cloned_by: Vec<String>,
    pub prs: Vec<PullRequest>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct EnvFixture {
    pub repos: IndexMap<String, Workspace>,
    pub backlog: Vec<Task>,
    pub ci: IndexMap<String, CiEntry>,
    pub visibility: IndexMap<String, Vec<String>>,
    pub actions: Vec<DeclaredAction>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRepo {
    url: String,
    #[serde(default)]
    files: IndexMap<String, String>,
    #[serde(default)]
    branches: Vec<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTask {
    id: String,
    #[serde(default)]
    title: String,
    #[serde(default = "open")]
    status: String,
}

fn open() -> String {
    "open".into()
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCi {
    verdict: String,
    #[serde(default)]
    effects: Vec<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAction {
    name: String,
    #[serde(default)]
    params: Vec<String>,
    #[serde(default)]
    effects: Vec<String>,
    #[serde(default)]
    channel: Option<String>,
    #[serde(default = "yes")]
    succeeds: bool,
}

fn yes() -> bool {
    true
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFixture {
    #[serde(default)]
    repos: Vec<RawRepo>,
    #[serde(default)]
    backlog: Vec<RawTask>,
    #[serde(default)]
    ci: IndexMap<String, RawCi>,
    #[serde(default)]
    visibility: IndexMap<String, Vec<String>>,
    #[serde(default)]
    actions: Vec<RawAction>,
}

fn literal_field(what: &str, text: &str) -> Result<Literal, FixtureError> {
    parse_literal(text).map_err(|e| FixtureError(format!("{what}: `{text}`: {e}")))
}

impl EnvFixture {
    pub fn from_json(text: &str) -> Result<Self, FixtureError> {
        let raw: RawFixture = serde_json::from_str(text).map_err(|e| FixtureError(e.to_string()))?;
        let mut fx = EnvFixture::default();
        for r in raw.repos {
            if fx.repos.contains_key(&r.url) {
                return Err(FixtureError(format!("duplicate repo {}", r.url)));
            }
            fx.repos.insert(
                r.url,
                Workspace {
                    files: r.files,
                    branches: r.branches,
                    ..Default::default()
                },
            );
        }
        for t in raw.backlog {
            if fx.backlog.iter().any(|x| x.id == t.id) {
                return Err(FixtureError(format!("duplicate task id {}", t.id)));
            }
            if parse_term(&t.id).ok().filter(|x| matches!(x, Term::Atom(_))).is_none() {
                return Err(FixtureError(format!("task id `{}` is not an atom", t.id)));
            }
            fx.backlog.push(Task {
                id: t.id,
                title: t.title,
                status: t.status,
                taken_by: None,
            });
        }
        for (task, c) in raw.ci {
            let verdict = parse_term(&c.verdict).map_err(|e| FixtureError(format!("ci {task} verdict: {e}")))?;
            let effects = c
                .effects
                .iter()
                .map(|e| literal_field(&format!("ci {task} effect"), e))
                .collect::<Result<_, _>>()?;
            fx.ci.insert(task, CiEntry { verdict, effects });
        }
        fx.visibility = raw.visibility;
        for a in raw.actions {
            if lookup_builtin(&a.name, a.params.len()).is_some() {
                return Err(FixtureError(format!("action {} shadows a built-in action", a.name)));
            }
            if fx
                .actions
                .iter()
                .any(|x| x.name == a.name && x.params.len() == a.params.len())
            {
                return Err(FixtureError(format!("duplicate action {}/{}", a.name, a.params.len())));
            }
            let effects = a
                .effects
                .iter()
                .map(|e| literal_field(&format!("action {} effect", a.name), e))
                .collect::<Result<_, _>>()?;
            fx.actions.push(DeclaredAction {
                channel: a.channel.unwrap_or_else(|| a.name.clone()),
                name: a.name,
                params: a.params,
                effects,
                succeeds: a.succeeds,
            });
        }
        Ok(fx)
    }
}

fn lookup_builtin(name: &str, arity: usize) -> Option<&'static str> {
    let name = ALIASES
        .iter()
        .find(|(a, _)| *a == name)
        .map(|(_, c)| *c)
        .unwrap_or(name);
    BUILTIN_ACTIONS
        .iter()
        .find(|(n, a)| *n == name && *a == arity)
        .map(|(n, _)| *n)
}

/// Deterministic environment state.
#[derive(Debug, Clone, PartialEq)]
pub struct SimEnv {
    repos: IndexMap<String, Workspace>,
    backlog: Vec<Task>,
    ci: IndexMap<String, CiEntry>,
    visibility: IndexMap<String, Vec<String>>,
    actions: Vec<DeclaredAction>,
    saved: Vec<SavedFile>,
    verdicts: Vec<(String, Term, String)>,
    facts: Vec<EnvFact>,
    active_task: Option<String>,
    log: Vec<String>,
}

fn text_of(term: &Term) -> String {
    term.as_text()
}

impl SimEnv {
    pub fn new(fixture: EnvFixture) -> Self {
        SimEnv {
            repos: fixture.repos,
            backlog: fixture.backlog,
            ci: fixture.ci,
            visibility: fixture.visibility,
            actions: fixture.actions,
            saved: Vec::new(),
            verdicts: Vec::new(),
            facts: Vec::new(),
            active_task: None,
            log: Vec::new(),
        }
    }

    pub fn empty() -> Self {
        SimEnv::new(EnvFixture::default())
    }

    /// Every action name/arity the environment accepts, built-ins first.
    pub fn vocabulary(&self) -> Vec<(String, usize)> {
        let mut v: Vec<(String, usize)> = BUILTIN_ACTIONS.iter().map(|(n, a)| (n.to_string(), *a)).collect();
        v.extend(ALIASES.iter().map(|(a, c)| {
            let arity = BUILTIN_ACTIONS
                .iter()
                .find(|(n, _)| n == c)
                .map(|(_, a)| *a)
                .unwrap_or(0);
            (a.to_string(), arity)
        }));
        v.extend(self.actions.iter().map(|a| (a.name.clone(), a.arity())));
        v
    }

    pub fn knows_action(&self, name: &str, arity: usize) -> bool {
        lookup_builtin(name, arity).is_some() || self.declared(name, arity).is_some()
    }

    fn declared(&self, name: &str, arity: usize) -> Option<&DeclaredAction> {
        self.actions.iter().find(|a| a.name == name && a.arity() == arity)
    }

    pub fn backlog(&self) -> &[Task] {
        &self.backlog
    }

    pub fn repos(&self) -> &IndexMap<String, Workspace> {
        &self.repos
    }

    pub fn saved_files(&self) -> &[SavedFile] {
        &self.saved
    }

    pub fn log(&self) -> &[String] {
        &self.log
    }

    pub fn perform(&mut self, agent: &str, action: &Literal) -> Result<ActionResult, EnvError> {
        let arity = action.arity();
        let result = match lookup_builtin(&action.predicate, arity) {
            Some("clone_repo") => self.clone_repo(agent, action),
            Some("get_backlog_item") => Ok(self.get_backlog_item(agent, &action.args[0])),
            Some("save_code_to_file") => self.save_code_to_file(agent, action),
            Some("submitPR") => self.submit_pr(agent, action),
            Some("compile_and_test") => self.compile_and_test(agent, action),
            Some("purge_log") => Ok(self.purge_log(agent, action)),
            _ => match self.declared(&action.predicate, arity).cloned() {
                Some(decl) => Ok(self.declared_action(agent, action, &decl)),
                None => {
                    return Err(EnvError::UnknownAction {
                        name: action.predicate.clone(),
                        arity,
                    })
                }
            },
        }?;
        self.log.push(format!(
            "{agent} {} {}",
            result.bindings.apply_literal(action),
            if result.success { "ok" } else { "failed" }
        ));
        Ok(result)
    }

    fn require_ground(action: &Literal, position: usize) -> Result<&Term, EnvError> {
        let t = &action.args[position];
        if t.is_ground() && !matches!(t, Term::Wildcard) {
            Ok(t)
        } else {
            Err(EnvError::UnboundRequiredArgument {
                action: action.predicate.clone(),
                position,
            })
        }
    }

    fn bind(result: &mut ActionResult, target: &Term, value: Term) -> bool {
        match unify(target, &value, &result.bindings) {
            Some(s) => {
                result.bindings = s;
                true
            }
            None => false,
        }
    }

    fn clone_repo(&mut self, agent: &str, action: &Literal) -> Result<ActionResult, EnvError> {
        let url = text_of(Self::require_ground(action, 0)?);
        let Some(ws) = self.repos.get_mut(&url) else {
            return Ok(ActionResult::failed());
        };
        if !ws.cloned_by.iter().any(|a| a == agent) {
            ws.cloned_by.push(agent.to_string());
        }
        Ok(ActionResult::ok(vec![Literal::new("cloned", vec![Term::string(url)])]))
    }

    fn get_backlog_item(&mut self, agent: &str, target: &Term) -> ActionResult {
        let want = target.is_ground().then(|| text_of(target));
        let Some(task) = self
            .backlog
            .iter_mut()
            .find(|t| t.status == "open" && want.as_ref().is_none_or(|w| *w == t.id))
        else {
            return ActionResult::failed();
        };
        task.status = "taken".into();
        task.taken_by = Some(agent.to_string());
        let id = task.id.clone();
        self.active_task = Some(id.clone());
        let mut result = ActionResult::ok(vec![backlog_fact(&id, "taken")]);
        Self::bind(&mut result, target, Term::atom(id));
        result
    }

    fn save_code_to_file(&mut self, agent: &str, action: &Literal) -> Result<ActionResult, EnvError> {
        let content = text_of(Self::require_ground(action, 1)?);
        let mut result = ActionResult::ok(Vec::new());
        let path = if action.args[0].is_ground() {
            text_of(&action.args[0])
        } else {
            let stem = self.active_task.clone().unwrap_or_else(|| "scratch".into());
            let path = format!("work/{stem}/{}_{}.txt", agent.to_lowercase(), self.saved.len() + 1);
            Self::bind(&mut result, &action.args[0], Term::string(path.clone()));
            path
        };
        self.saved.retain(|f| f.path != path);
        self.saved.push(SavedFile {
            path: path.clone(),
            content,
            task: self.active_task.clone(),
            author: agent.to_string(),
        });
        result.effects.push(Literal::new("saved", vec![Term::string(path)]));
        Ok(result)
    }

    fn submit_pr(&mut self, agent: &str, action: &Literal) -> Result<ActionResult, EnvError> {
        let url = text_of(Self::require_ground(action, 0)?);
        let task = self
            .backlog
            .iter()
            .find(|t| t.taken_by.as_deref() == Some(agent))
            .map(|t| t.id.clone())
            .or_else(|| self.active_task.clone());
        let Some(ws) = self.repos.get_mut(&url) else {
            return Ok(ActionResult::failed());
        };
        let id = ws.prs.len() as u32 + 1;
        ws.prs.push(PullRequest {
            id,
            task: task.clone(),
            author: agent.to_string(),
        });
        let subject = task.map(Term::atom).unwrap_or_else(|| Term::number(id as f64));
        Ok(ActionResult::ok(vec![Literal::new("pr_submitted", vec![subject])]))
    }

    fn compile_and_test(&mut self, agent: &str, action: &Literal) -> Result<ActionResult, EnvError> {
        let path = text_of(Self::require_ground(action, 0)?);
        let Some(task) = self.saved.iter().find(|f| f.path == path).and_then(|f| f.task.clone()) else {
            return Ok(ActionResult::failed());
        };
        let Some(entry) = self.ci.get(&task).cloned() else {
            return Ok(ActionResult::failed());
        };
        let mut result = ActionResult::ok(Vec::new());
        if !Self::bind(&mut result, &action.args[1], entry.verdict.clone()) {
            return Ok(ActionResult::failed());
        }
        self.verdicts.retain(|(t, _, _)| *t != task);
        self.verdicts
            .push((task.clone(), entry.verdict.clone(), agent.to_string()));
        result.effects.push(verdict_fact(&task, &entry.verdict));
        for e in &entry.effects {
            self.add_fact(e.clone(), agent, LOG_CHANNEL);
            result.effects.push(e.clone());
        }
        Ok(result)
    }

    fn purge_log(&mut self, agent: &str, action: &Literal) -> ActionResult {
        let pattern = &action.args[0];
        let empty = Substitution::new();
        self.facts
            .retain(|f| unify(&f.literal.to_term(), pattern, &empty).is_none());
        let fact = Literal::new("purged", vec![pattern.clone()]);
        self.add_fact(fact.clone(), agent, LOG_CHANNEL);
        ActionResult::ok(vec![fact])
    }

    fn declared_action(&mut self, agent: &str, action: &Literal, decl: &DeclaredAction) -> ActionResult {
        if !decl.succeeds {
            return ActionResult::failed();
        }
        let params = Literal::new(
            decl.name.clone(),
            decl.params.iter().map(|p| Term::var(p.clone())).collect(),
        );
        let s = unify_literals(&params, action, &Substitution::new()).unwrap_or_default();
        let effects: Vec<Literal> = decl.effects.iter().map(|e| s.apply_literal(e)).collect();
        for e in &effects {
            self.add_fact(e.clone(), agent, &decl.channel);
        }
        ActionResult::ok(effects)
    }

    fn add_fact(&mut self, literal: Literal, author: &str, channel: &str) {
        if !self.facts.iter().any(|f| f.literal == literal && f.author == author) {
            self.facts.push(EnvFact {
                literal,
                author: author.to_string(),
                channel: channel.to_string(),
            });
        }
    }

    /// Every environment fact in a fixed order: backlog, clones, files,
    /// pull requests, CI verdicts, then action effects.
    pub fn facts(&self) -> Vec<EnvFact> {
        let mut out = Vec::new();
        let env = "env".to_string();
        for t in &self.backlog {
            out.push(EnvFact {
                literal: backlog_fact(&t.id, &t.status),
                author: t.taken_by.clone().unwrap_or_else(|| env.clone()),
                channel: "backlog".into(),
            });
        }
        for (url, ws) in &self.repos {
            for a in &ws.cloned_by {
                out.push(EnvFact {
                    literal: Literal::new("cloned", vec![Term::string(url.clone())]),
                    author: a.clone(),
                    channel: "repos".into(),
                });
            }
        }
        for f in &self.saved {
            out.push(EnvFact {
                literal: Literal::new("saved", vec![Term::string(f.path.clone())]),
                author: f.author.clone(),
                channel: "files".into(),
            });
        }
        for ws in self.repos.values() {
            for pr in &ws.prs {
                let subject = pr
                    .task
                    .clone()
                    .map(Term::atom)
                    .unwrap_or_else(|| Term::number(pr.id as f64));
                out.push(EnvFact {
                    literal: Literal::new("pr_submitted", vec![subject]),
                    author: pr.author.clone(),
                    channel: "prs".into(),
                });
            }
        }
        for (task, verdict, author) in &self.verdicts {
            out.push(EnvFact {
                literal: verdict_fact(task, verdict),
                author: author.clone(),
                channel: "ci".into(),
            });
        }
        out.extend(self.facts.iter().cloned());
        out
    }

    /// Facts visible to `agent`, without duplicates, in [`SimEnv::facts`] order.
    pub fn percepts(&self, agent: &str) -> Vec<Literal> {
        let channels = self.visibility.get(agent);
        let sees = |f: &EnvFact| {
            f.author == agent || channels.is_some_and(|cs| cs.iter().any(|c| c == "*" || *c == f.channel))
        };
        let mut out: Vec<Literal> = Vec::new();
        for f in self.facts().into_iter().filter(sees) {
            if !out.contains(&f.literal) {
                out.push(f.literal);
            }
        }
        out
    }
}

fn backlog_fact(id: &str, status: &str) -> Literal {
    Literal::new("backlog_task", vec![Term::atom(id), Term::atom(status)])
}

fn verdict_fact(task: &str, verdict: &Term) -> Literal {
    Literal::new("test_verdict", vec![Term::atom(task), verdict.clone()])
}

#[cfg(test)]
mod tests {
    use super::*;

    const STANDARD: &str = r#"{
        "repos": [{"url": "https://github.com/codebase.git"}],
        "backlog": [{"id": "t1", "title": "signup"}, {"id": "t2", "title": "login"}],
        "ci": {"t1": {"verdict": "pass", "effects": ["logged(ip_address(u1))"]}},
        "visibility": {"CodingAgent": ["backlog", "ci"], "TestingAgent": ["prs"]},
        "actions": [{"name": "hard_code_api_key", "params": ["K"], "effects": ["api_key_in_source(K)"]}]
    }"#;

    fn env() -> SimEnv {
        SimEnv::new(EnvFixture::from_json(STANDARD).unwrap())
    }

    fn lit(s: &str) -> Literal {
        parse_literal(s).unwrap()
    }

    #[test]
    fn clone_repo_creates_workspace() {
        let mut e = env();
        let r = e
            .perform("CodingAgent", &lit(r#"clone_repo("https://github.com/codebase.git")"#))
            .unwrap();
        assert!(r.success);
        assert_eq!(
            e.repos()["https://github.com/codebase.git"].cloned_by,
            vec!["CodingAgent"]
        );
        assert!(!e.perform("CodingAgent", &lit(r#"clone_repo("nope")"#)).unwrap().success);
    }

    #[test]
    fn backlog_items_are_taken_in_order() {
        let mut e = env();
        let r = e.perform("CodingAgent", &lit("get_backlog_item(T)")).unwrap();
        assert_eq!(r.bindings.get("T"), Some(&Term::atom("t1")));
        assert_eq!(e.backlog()[0].status, "taken");
        let r = e.perform("CodingAgent", &lit("get_backlog_item(T)")).unwrap();
        assert_eq!(r.bindings.get("T"), Some(&Term::atom("t2")));
        assert!(!e.perform("CodingAgent", &lit("get_backlog_item(T)")).unwrap().success);
        assert_eq!(e.backlog().len(), 2);
    }

    #[test]
    fn empty_backlog_fails() {
        let mut e = SimEnv::empty();
        assert!(!e.perform("a", &lit("get_backlog_item(T)")).unwrap().success);
    }

    #[test]
    fn compile_and_test_reads_the_ci_script() {
        let mut e = env();
        e.perform("CodingAgent", &lit("get_backlog_item(T)")).unwrap();
        let saved = e
            .perform("TestingAgent", &lit(r#"save_code_to_file(P, "code")"#))
            .unwrap();
        let path = saved.bindings.get("P").unwrap().clone();
        let step = Literal::new("complile_and_test", vec![path, Term::var("R")]);
        let r = e.perform("TestingAgent", &step).unwrap();
        assert_eq!(r.bindings.get("R"), Some(&Term::atom("pass")));
        assert_eq!(
            r.effects,
            vec![lit("test_verdict(t1, pass)"), lit("logged(ip_address(u1))")]
        );
        let seen = e.percepts("TestingAgent");
        for effect in &r.effects {
            assert!(seen.contains(effect), "{effect}");
        }
    }

    #[test]
    fn unbound_and_unknown_actions_are_errors() {
        let mut e = env();
        assert!(matches!(
            e.perform("a", &lit("clone_repo(U)")),
            Err(EnvError::UnboundRequiredArgument { position: 0, .. })
        ));
        assert!(matches!(
            e.perform("a", &lit("deploy(x)")),
            Err(EnvError::UnknownAction { .. })
        ));
    }

    #[test]
    fn pr_visibility_follows_the_map() {
        let mut e = env();
        e.perform("CodingAgent", &lit("get_backlog_item(T)")).unwrap();
        e.perform("CodingAgent", &lit(r#"submitPR("https://github.com/codebase.git")"#))
            .unwrap();
        assert!(e.percepts("TestingAgent").contains(&lit("pr_submitted(t1)")));
        assert!(e.percepts("CodingAgent").contains(&lit("pr_submitted(t1)")));
        assert!(e.percepts("Nobody").is_empty());
    }

    #[test]
    fn fresh_fixture_with_no_visibility_perceives_nothing() {
        assert!(env().percepts("Stranger").is_empty());
        assert!(!env().percepts("CodingAgent").is_empty());
    }

    #[test]
    fn declared_actions_instantiate_effects() {
        let mut e = env();
        let r = e.perform("CodingAgent", &lit(r#"hard_code_api_key("k-123")"#)).unwrap();
        assert_eq!(r.effects, vec![lit(r#"api_key_in_source("k-123")"#)]);
        assert!(e.percepts("CodingAgent").contains(&r.effects[0]));
    }

    #[test]
    fn purge_log_removes_matching_facts() {
        let mut e = env();
        e.perform("CodingAgent", &lit("get_backlog_item(T)")).unwrap();
        let saved = e
            .perform("CodingAgent", &lit(r#"save_code_to_file("a.rs", "x")"#))
            .unwrap();
        assert!(saved.success);
        e.perform("CodingAgent", &lit(r#"compile_and_test("a.rs", R)"#))
            .unwrap();
        assert!(e.percepts("CodingAgent").contains(&lit("logged(ip_address(u1))")));
        e.perform("CodingAgent", &lit("purge_log(logged(ip_address(_)))"))
            .unwrap();
        assert!(!e.percepts("CodingAgent").contains(&lit("logged(ip_address(u1))")));
    }

    #[test]
    fn fixture_errors_are_reported() {
        assert!(EnvFixture::from_json("{").is_err());
        assert!(EnvFixture::from_json(r#"{"backlog": [{"id": "t1"}, {"id": "t1"}]}"#).is_err());
        assert!(EnvFixture::from_json(r#"{"ci": {"t1": {"verdict": "pass", "effects": ["bad("]}}}"#).is_err());
        assert!(EnvFixture::from_json(r#"{"actions": [{"name": "clone_repo", "params": ["U"]}]}"#).is_err());
        assert!(EnvFixture::from_json(r#"{"surprise": 1}"#).is_err());
    }

    #[test]
    fn unchanged_environment_gives_identical_percepts() {
        let mut e = env();
        e.perform("CodingAgent", &lit("get_backlog_item(T)")).unwrap();
        assert_eq!(e.percepts("CodingAgent"), e.percepts("CodingAgent"));
    }
}

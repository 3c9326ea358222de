//! Referees for the regression suite: a brute-force evaluator that answers
//! queries by ground instantiation, and a fixture runner that compares a
//! bundle's run against the values pinned in its manifest.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::path::Path;

use crate::commitment::CState;
use crate::lang::{Literal, Rule, Term};
use crate::logic::{unify_literals, BeliefBase, QueryError, Substitution};
use crate::scenario::{parse_state, run_scenario, Scenario, ScenarioInvalid, Summary};

pub const MAX_UNIVERSE: usize = 10;

/// Rule chains deeper than this are taken as not derivable.
const DEPTH: usize = 64;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("universe of {0} constants exceeds the limit of {MAX_UNIVERSE}")]
pub struct UniverseTooLarge(pub usize);

/// Variable name to rendered term, for the goal's named variables.
pub type Answer = BTreeMap<String, String>;

struct Ground<'a> {
    facts: &'a [Literal],
    rules: &'a [Rule],
    universe: &'a [Term],
    memo: HashMap<Literal, bool>,
}

/// Every way of binding `vars` to universe constants on top of `base`.
fn assignments(vars: &[String], universe: &[Term], base: &Substitution) -> Vec<Substitution> {
    let mut out = vec![base.clone()];
    for v in vars {
        let mut next = Vec::with_capacity(out.len() * universe.len());
        for s in &out {
            for c in universe {
                let mut s2 = s.clone();
                if s2.bind(v, c) {
                    next.push(s2);
                }
            }
        }
        out = next;
    }
    out
}

fn wildcards_to_vars(t: &Term, n: &mut usize) -> Term {
    match t {
        Term::Wildcard => {
            *n += 1;
            Term::var(format!("_W{n}"))
        }
        Term::Compound(f, args) => Term::Compound(f.clone(), args.iter().map(|a| wildcards_to_vars(a, n)).collect()),
        other => other.clone(),
    }
}

fn distinct_vars(lits: &[Literal]) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for l in lits {
        for v in l.vars() {
            if !out.iter().any(|o| o == v) {
                out.push(v.to_string());
            }
        }
    }
    out
}

impl Ground<'_> {
    fn holds(&mut self, atom: &Literal, depth: usize) -> bool {
        if let Some(&v) = self.memo.get(atom) {
            return v;
        }
        if depth > DEPTH {
            return false;
        }
        let empty = Substitution::new();
        let mut result = self.facts.iter().any(|f| unify_literals(f, atom, &empty).is_some());
        if !result {
            for rule in self.rules {
                let Some(s) = unify_literals(&rule.head, atom, &empty) else {
                    continue;
                };
                let free: Vec<String> = distinct_vars(&rule.body)
                    .into_iter()
                    .filter(|v| s.get(v).is_none())
                    .collect();
                let body = rule.body.clone();
                if assignments(&free, self.universe, &s)
                    .iter()
                    .any(|a| body.iter().all(|l| self.literal(&a.apply_literal(l), depth + 1)))
                {
                    result = true;
                    break;
                }
            }
        }
        self.memo.insert(atom.clone(), result);
        result
    }

    /// A literal whose only unbound positions are wildcards, which are
    /// existential inside the literal.
    fn literal(&mut self, lit: &Literal, depth: usize) -> bool {
        if lit.is_true() {
            return true;
        }
        let mut n = 0;
        let positive = Literal::new(
            lit.predicate.clone(),
            lit.args.iter().map(|a| wildcards_to_vars(a, &mut n)).collect(),
        );
        let vars = distinct_vars(std::slice::from_ref(&positive));
        let found = assignments(&vars, self.universe, &Substitution::new())
            .iter()
            .any(|a| self.holds(&a.apply_literal(&positive), depth));
        found != lit.negated
    }
}

/// Answer a conjunctive goal by trying every assignment of its variables
/// over `universe` and deciding each ground literal by exhaustive rule
/// instantiation, with negation as failure.
pub fn ground_query_oracle(
    facts: &[Literal],
    rules: &[Rule],
    goal: &[Literal],
    universe: &[Term],
) -> Result<BTreeSet<Answer>, UniverseTooLarge> {
    if universe.len() > MAX_UNIVERSE {
        return Err(UniverseTooLarge(universe.len()));
    }
    let mut g = Ground {
        facts,
        rules,
        universe,
        memo: HashMap::new(),
    };
    let vars = distinct_vars(goal);
    let mut out = BTreeSet::new();
    for a in assignments(&vars, universe, &Substitution::new()) {
        if goal.iter().all(|l| g.literal(&a.apply_literal(l), 0)) {
            out.insert(
                vars.iter()
                    .map(|v| (v.clone(), a.apply(&Term::var(v.clone())).to_string()))
                    .collect(),
            );
        }
    }
    Ok(out)
}

/// The engine's answers to `goal`, restricted to the goal's variables.
pub fn engine_answers(bb: &BeliefBase, goal: &[Literal]) -> Result<BTreeSet<Answer>, QueryError> {
    let vars = distinct_vars(goal);
    let mut out = BTreeSet::new();
    for s in bb.query(goal) {
        let s = s?;
        out.insert(
            vars.iter()
                .map(|v| (v.clone(), s.apply(&Term::var(v.clone())).to_string()))
                .collect(),
        );
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Check {
    pub what: String,
    pub expected: String,
    pub actual: String,
}

impl Check {
    pub fn ok(&self) -> bool {
        self.expected == self.actual
    }
}

#[derive(Debug, Clone)]
pub struct FixtureReport {
    pub summary: Summary,
    pub checks: Vec<Check>,
}

impl FixtureReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(Check::ok)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.ok())
    }
}

impl fmt::Display for FixtureReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let verdict = if self.passed() { "pass" } else { "FAIL" };
        write!(f, "{}: {verdict} ({} checks)", self.summary.scenario, self.checks.len())?;
        for c in self.failures() {
            write!(f, "\n  {}: expected {}, got {}", c.what, c.expected, c.actual)?;
        }
        Ok(())
    }
}

fn check(checks: &mut Vec<Check>, what: &str, expected: impl ToString, actual: impl ToString) {
    checks.push(Check {
        what: what.to_string(),
        expected: expected.to_string(),
        actual: actual.to_string(),
    });
}

/// Run a bundle with its scripted oracle and compare against the manifest.
pub fn run_fixture(dir: &Path) -> Result<FixtureReport, ScenarioInvalid> {
    let scenario = Scenario::load(dir)?;
    let system = run_scenario(
        &scenario,
        scenario.constants.max_cycles,
        Box::new(scenario.scripted_oracle()),
    )?;
    let summary = Summary::of(&scenario, &system);
    let mut checks = Vec::new();
    for (cond, holds) in &summary.success {
        check(&mut checks, &format!("success {cond}"), true, holds);
    }
    check(&mut checks, "unremedied violations", 0, summary.unremedied);
    if let Some(e) = &scenario.expected {
        let counts = [
            ("violations", e.violations, summary.violations),
            ("prevented", e.prevented, summary.prevented),
            ("remedies", e.remedies, summary.remedies),
            ("goals failed", e.goals_failed, summary.goals_failed),
            ("cycles", e.cycles, summary.cycles),
        ];
        for (what, want, got) in counts {
            if let Some(want) = want {
                check(&mut checks, what, want, got);
            }
        }
        for (state, want) in &e.commitments {
            let got = parse_state(state)
                .map(|s: CState| summary.commitments_in(s))
                .unwrap_or(0);
            check(&mut checks, &format!("{state} commitments"), want, got);
        }
        if let Some(d) = &e.digest {
            check(&mut checks, "trace digest", d, &summary.digest);
        }
    }
    Ok(FixtureReport { summary, checks })
}

use indexmap::IndexSet;

use super::query::Solutions;
use super::unify::{rename_literal, unify_literals, Substitution};
use super::QueryError;
use crate::lang::{Literal, Rule};

pub const DEFAULT_DEPTH_BOUND: usize = 512;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum BeliefError {
    #[error("cannot store negated literal `{0}` as a belief")]
    NegatedAssertion(Literal),
}

/// Facts and rules of one agent. Facts have set semantics and keep their
/// insertion order, which fixes the order answers are produced in.
#[derive(Debug, Clone)]
pub struct BeliefBase {
    facts: IndexSet<Literal>,
    rules: Vec<Rule>,
    revision: u64,
    depth_bound: usize,
}

impl Default for BeliefBase {
    fn default() -> Self {
        BeliefBase {
            facts: IndexSet::new(),
            rules: Vec::new(),
            revision: 0,
            depth_bound: DEFAULT_DEPTH_BOUND,
        }
    }
}

/// Equality compares contents, not revision counters or configuration.
impl PartialEq for BeliefBase {
    fn eq(&self, other: &Self) -> bool {
        self.facts == other.facts && self.rules == other.rules
    }
}

impl BeliefBase {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_rules(rules: Vec<Rule>) -> Self {
        BeliefBase {
            rules,
            ..Self::default()
        }
    }

    pub fn with_depth_bound(mut self, bound: usize) -> Self {
        self.depth_bound = bound;
        self
    }

    pub fn depth_bound(&self) -> usize {
        self.depth_bound
    }

    pub fn revision(&self) -> u64 {
        self.revision
    }

    pub fn len(&self) -> usize {
        self.facts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.facts.is_empty()
    }

    pub fn facts(&self) -> impl Iterator<Item = &Literal> {
        self.facts.iter()
    }

    pub fn rules(&self) -> &[Rule] {
        &self.rules
    }

    pub fn contains(&self, lit: &Literal) -> bool {
        self.facts.contains(lit)
    }

    pub fn add_rule(&mut self, rule: Rule) {
        self.rules.push(rule);
        self.revision += 1;
    }

    /// Add a fact. Returns whether it was new.
    ///
    /// A fact holding wildcards, such as `current_task(_)`, is a
    /// placeholder: asserting a fully specified instance of it replaces it.
    pub fn assert(&mut self, lit: Literal) -> Result<bool, BeliefError> {
        if lit.negated {
            return Err(BeliefError::NegatedAssertion(lit));
        }
        if lit.is_ground() && !lit.has_wildcard() {
            let empty = Substitution::new();
            let before = self.facts.len();
            self.facts
                .retain(|f| !(f.has_wildcard() && unify_literals(f, &lit, &empty).is_some()));
            if self.facts.len() != before {
                self.revision += 1;
            }
        }
        let added = self.facts.insert(lit);
        if added {
            self.revision += 1;
        }
        Ok(added)
    }

    /// A copy holding only fully specified facts, for questions a placeholder
    /// must not answer.
    pub fn without_placeholders(&self) -> BeliefBase {
        let mut bb = self.clone();
        bb.facts.retain(|f| !f.has_wildcard());
        bb
    }

    /// Remove every fact unifying with `pattern` (polarity ignored) and
    /// return the removed facts in insertion order.
    pub fn retract(&mut self, pattern: &Literal) -> Vec<Literal> {
        let empty = Substitution::new();
        let (gone, kept): (Vec<Literal>, Vec<Literal>) = self
            .facts
            .drain(..)
            .partition(|f| unify_literals(pattern, &rename_literal(f, "r"), &empty).is_some());
        self.facts = kept.into_iter().collect();
        if !gone.is_empty() {
            self.revision += 1;
        }
        gone
    }

    /// Remove every fact with the given predicate and arity.
    pub fn retract_signature(&mut self, predicate: &str, arity: usize) -> Vec<Literal> {
        let before = self.facts.len();
        let mut gone = Vec::new();
        self.facts.retain(|f| {
            let keep = !(f.predicate == predicate && f.args.len() == arity);
            if !keep {
                gone.push(f.clone());
            }
            keep
        });
        if self.facts.len() != before {
            self.revision += 1;
        }
        gone
    }

    /// Lazily enumerate answers to a conjunctive goal.
    pub fn query<'a>(&'a self, goal: &[Literal]) -> Solutions<'a> {
        Solutions::new(self, goal.to_vec(), Substitution::new(), 0)
    }

    /// Answers to `goal` starting from existing bindings `s`. Answers keep
    /// all of `s`'s bindings plus those for variables of `goal`.
    pub fn query_with<'a>(&'a self, goal: &[Literal], s: &Substitution) -> Solutions<'a> {
        Solutions::new(self, goal.to_vec(), s.clone(), 0)
    }

    pub fn holds(&self, goal: &[Literal]) -> Result<bool, QueryError> {
        Ok(self.first(goal, &Substitution::new())?.is_some())
    }

    pub fn first(&self, goal: &[Literal], s: &Substitution) -> Result<Option<Substitution>, QueryError> {
        self.query_with(goal, s).next().transpose()
    }

    pub fn all(&self, goal: &[Literal]) -> Result<Vec<Substitution>, QueryError> {
        self.query(goal).collect()
    }
}

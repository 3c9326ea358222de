//! Depth-first SLD resolution with negation-as-failure.

use super::belief::BeliefBase;
use super::unify::{rename_literal, unify_literals, Substitution};
use super::QueryError;
use crate::lang::Literal;

struct Branch {
    /// Remaining goals, last element is resolved next.
    goals: Vec<(Literal, usize)>,
    subst: Substitution,
}

/// Lazy answer stream for a conjunctive query. Yields at most one error,
/// after which it is exhausted.
pub struct Solutions<'a> {
    bb: &'a BeliefBase,
    stack: Vec<Branch>,
    keep: Vec<String>,
    renames: u64,
    failed: bool,
}

impl<'a> Solutions<'a> {
    pub(crate) fn new(bb: &'a BeliefBase, goal: Vec<Literal>, base: Substitution, depth: usize) -> Self {
        let mut keep: Vec<String> = Vec::new();
        for l in &goal {
            for v in l.vars() {
                if !keep.iter().any(|k| k == v) {
                    keep.push(v.to_string());
                }
            }
        }
        for (k, _) in base.iter() {
            if !keep.iter().any(|x| x == k) {
                keep.push(k.to_string());
            }
        }
        let goals = goal.into_iter().rev().map(|l| (l, depth)).collect();
        Solutions {
            bb,
            stack: vec![Branch { goals, subst: base }],
            keep,
            renames: 0,
            failed: false,
        }
    }

    fn fresh_tag(&mut self, depth: usize) -> String {
        self.renames += 1;
        format!("{depth}.{}", self.renames)
    }

    fn expand(&mut self, mut branch: Branch) -> Result<Option<Substitution>, QueryError> {
        let Some((goal, depth)) = branch.goals.pop() else {
            let keep: Vec<&str> = self.keep.iter().map(String::as_str).collect();
            return Ok(Some(branch.subst.restrict(&keep)));
        };
        let goal = branch.subst.apply_literal(&goal);
        if goal.is_true() {
            self.stack.push(branch);
            return Ok(None);
        }
        if goal.negated {
            if !goal.is_ground() {
                return Err(QueryError::FloundedNegation(goal));
            }
            let positive = goal.clone().negate();
            let mut sub = Solutions::new(self.bb, vec![positive], Substitution::new(), depth);
            match sub.next() {
                Some(Err(e)) => return Err(e),
                Some(Ok(_)) => {}
                None => self.stack.push(branch),
            }
            return Ok(None);
        }
        if depth >= self.bb.depth_bound() {
            return Err(QueryError::DepthExceeded {
                bound: self.bb.depth_bound(),
                goal,
            });
        }
        let mut alternatives = Vec::new();
        for fact in self.bb.facts().filter(|f| f.signature() == goal.signature()) {
            let tag = self.fresh_tag(depth);
            if let Some(s) = unify_literals(&goal, &rename_literal(fact, &tag), &branch.subst) {
                alternatives.push(Branch {
                    goals: branch.goals.clone(),
                    subst: s,
                });
            }
        }
        for rule in self
            .bb
            .rules()
            .iter()
            .filter(|r| r.head.signature() == goal.signature())
        {
            let tag = self.fresh_tag(depth);
            let head = rename_literal(&rule.head, &tag);
            if let Some(s) = unify_literals(&goal, &head, &branch.subst) {
                let mut goals = branch.goals.clone();
                goals.extend(rule.body.iter().rev().map(|l| (rename_literal(l, &tag), depth + 1)));
                alternatives.push(Branch { goals, subst: s });
            }
        }
        self.stack.extend(alternatives.into_iter().rev());
        Ok(None)
    }
}

impl Iterator for Solutions<'_> {
    type Item = Result<Substitution, QueryError>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.failed {
            return None;
        }
        while let Some(branch) = self.stack.pop() {
            match self.expand(branch) {
                Ok(Some(answer)) => return Some(Ok(answer)),
                Ok(None) => {}
                Err(e) => {
                    self.failed = true;
                    self.stack.clear();
                    return Some(Err(e));
                }
            }
        }
        None
    }
}

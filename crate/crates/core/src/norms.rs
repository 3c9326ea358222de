//! Deontic norms and the compliance checks agents run on themselves.
//!
//! A norm file is a JSON array:
//!
//! ```json
//! [{"id": "no_api_keys", "modality": "prohibition", "subject": "coder", "object": "team",
//!   "antecedent": "true", "consequent": "hard_code_api_key(_)",
//!   "detector": {"substring": "HARDCODED_KEY"}},
//!  {"id": "test_after_impl", "modality": "obligation", "subject": "CodingAgent",
//!   "object": "TestingAgent", "antecedent": "task_status(T, implemented)",
//!   "consequent": "test(T, \"privacy leaks\")", "window": 30}]
//! ```
//!
//! Prohibitions and permissions constrain their subject. An obligation is
//! held by its subject (whose beliefs activate it) and binds its object.
//! Activation is always evaluated in the evaluating agent's own beliefs.
//! When consequents overlap, permission beats prohibition beats
//! obligation.

use std::collections::{BTreeMap, HashSet};

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::lang::{parse_conjunction, parse_literal, AgentProgram, Literal, Plan, Term};
use crate::logic::{rename_literal, unify_literals, BeliefBase, Substitution};

pub const DEFAULT_WINDOW: u64 = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Modality {
    Obligation,
    Prohibition,
    Permission,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Stage {
    #[serde(rename = "desire")]
    Desire,
    #[serde(rename = "plan")]
    Plan,
    #[serde(rename = "action")]
    Action,
    #[serde(rename = "llm-output")]
    LlmOutput,
}

impl Stage {
    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Desire => "desire",
            Stage::Plan => "plan",
            Stage::Action => "action",
            Stage::LlmOutput => "llm-output",
        }
    }
}

/// Placeholder accepted in remedy templates for the violating agent.
pub const VIOLATOR: &str = "$violator";

#[derive(Debug, Clone, PartialEq)]
pub struct CommitmentTemplate {
    pub debtor: String,
    pub creditor: String,
    pub antecedent: Literal,
    pub consequent: Literal,
    pub deadline: Option<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum RemedySpec {
    Compensate(Literal),
    Secondary(CommitmentTemplate),
    Escalate(String),
}

#[derive(Debug, Clone)]
pub enum Detector {
    Substring(String),
    Pattern(Regex),
}

impl Detector {
    pub fn matches(&self, text: &str) -> bool {
        match self {
            Detector::Substring(s) => !s.is_empty() && text.contains(s.as_str()),
            Detector::Pattern(re) => re.is_match(text),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Norm {
    pub id: String,
    pub modality: Modality,
    pub subject: String,
    pub object: String,
    pub antecedent: Vec<Literal>,
    pub consequent: Literal,
    pub remedy: Option<RemedySpec>,
    pub window: u64,
    pub detector: Option<Detector>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("norm {index}: {message}")]
pub struct NormFileError {
    pub index: usize,
    pub message: String,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTemplate {
    debtor: String,
    creditor: String,
    #[serde(default = "true_text")]
    antecedent: String,
    consequent: String,
    #[serde(default)]
    deadline: Option<u64>,
}

fn true_text() -> String {
    "true".into()
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields, rename_all = "lowercase")]
enum RawRemedy {
    Compensate(String),
    Secondary(RawTemplate),
    Escalate(String),
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields, rename_all = "lowercase")]
enum RawDetector {
    Substring(String),
    Pattern(String),
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawNorm {
    id: String,
    modality: Modality,
    subject: String,
    object: String,
    #[serde(default = "true_text")]
    antecedent: String,
    consequent: String,
    #[serde(default)]
    remedy: Option<RawRemedy>,
    #[serde(default)]
    window: Option<u64>,
    #[serde(default)]
    detector: Option<RawDetector>,
}

/// Norms in file order, which is also the tie-break order.
#[derive(Debug, Clone, Default)]
pub struct NormSet {
    pub norms: Vec<Norm>,
}

fn positive_literal(text: &str, what: &str) -> Result<Literal, String> {
    let l = parse_literal(text).map_err(|e| format!("{what} `{text}`: {e}"))?;
    if l.negated {
        return Err(format!("{what} `{text}` must be positive"));
    }
    Ok(l)
}

impl NormSet {
    pub fn new(norms: Vec<Norm>) -> Self {
        NormSet { norms }
    }

    pub fn is_empty(&self) -> bool {
        self.norms.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&Norm> {
        self.norms.iter().find(|n| n.id == id)
    }

    pub fn from_json(text: &str) -> Result<Self, NormFileError> {
        Self::from_json_with_window(text, DEFAULT_WINDOW)
    }

    /// As [`NormSet::from_json`], with `window` for obligations that do not
    /// give their own.
    pub fn from_json_with_window(text: &str, window: u64) -> Result<Self, NormFileError> {
        let raw: Vec<RawNorm> = serde_json::from_str(text).map_err(|e| NormFileError {
            index: 0,
            message: e.to_string(),
        })?;
        let mut norms: Vec<Norm> = Vec::with_capacity(raw.len());
        for (index, r) in raw.into_iter().enumerate() {
            let err = |message: String| NormFileError { index, message };
            if norms.iter().any(|n| n.id == r.id) {
                return Err(err(format!("duplicate norm id `{}`", r.id)));
            }
            let antecedent = parse_conjunction(&r.antecedent).map_err(|e| err(format!("antecedent: {e}")))?;
            let consequent = positive_literal(&r.consequent, "consequent").map_err(err)?;
            let remedy = match r.remedy {
                None => None,
                Some(RawRemedy::Compensate(g)) => Some(RemedySpec::Compensate(
                    positive_literal(&g, "compensating goal").map_err(err)?,
                )),
                Some(RawRemedy::Escalate(role)) => Some(RemedySpec::Escalate(role)),
                Some(RawRemedy::Secondary(t)) => Some(RemedySpec::Secondary(CommitmentTemplate {
                    antecedent: positive_literal(&t.antecedent, "template antecedent").map_err(err)?,
                    consequent: positive_literal(&t.consequent, "template consequent").map_err(err)?,
                    debtor: t.debtor,
                    creditor: t.creditor,
                    deadline: t.deadline,
                })),
            };
            let detector = match r.detector {
                None => None,
                Some(RawDetector::Substring(s)) => Some(Detector::Substring(s)),
                Some(RawDetector::Pattern(p)) => Some(Detector::Pattern(
                    Regex::new(&p).map_err(|e| err(format!("detector: {e}")))?,
                )),
            };
            if detector.is_some() && r.modality != Modality::Prohibition {
                return Err(err("detectors are only meaningful on prohibitions".into()));
            }
            norms.push(Norm {
                id: r.id,
                modality: r.modality,
                subject: r.subject,
                object: r.object,
                antecedent,
                consequent,
                remedy,
                window: r.window.unwrap_or(window),
                detector,
            });
        }
        Ok(NormSet { norms })
    }
}

/// An agent as norms see it: its name and the roles it plays.
#[derive(Debug, Clone, Copy)]
pub struct Party<'a> {
    pub name: &'a str,
    pub roles: &'a [String],
}

impl<'a> Party<'a> {
    pub fn new(name: &'a str, roles: &'a [String]) -> Self {
        Party { name, roles }
    }

    /// Names match exactly; a role name matches every agent in the role.
    pub fn is(&self, who: &str) -> bool {
        self.name == who || self.roles.iter().any(|r| r == who)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Violation {
    pub norm: String,
    pub violator: String,
    pub instant: u64,
    pub instance: Literal,
    pub stage: Stage,
}

/// Replace unbound variables by `_` so the literal is ground.
pub fn close(lit: &Literal) -> Literal {
    fn go(t: &Term) -> Term {
        match t {
            Term::Var(_) => Term::Wildcard,
            Term::Compound(f, args) => Term::Compound(f.clone(), args.iter().map(go).collect()),
            _ => t.clone(),
        }
    }
    Literal {
        negated: lit.negated,
        predicate: lit.predicate.clone(),
        args: lit.args.iter().map(go).collect(),
    }
}

/// Consequent instances of `norm` under each antecedent solution in `bb`.
/// Query errors count as "not derivable".
pub fn active_instances(norm: &Norm, bb: &BeliefBase) -> Vec<Literal> {
    let mut out: Vec<Literal> = Vec::new();
    for answer in bb.query(&norm.antecedent) {
        let Ok(s) = answer else { break };
        let inst = s.apply_literal(&norm.consequent);
        if !out.contains(&inst) {
            out.push(inst);
        }
    }
    out
}

fn overlaps(instance: &Literal, candidate: &Literal) -> bool {
    unify_literals(&rename_literal(instance, "norm"), candidate, &Substitution::new()).is_some()
}

fn covered(norms: &NormSet, modality: Modality, party: Party, bb: &BeliefBase, lit: &Literal) -> Option<usize> {
    norms.norms.iter().position(|n| {
        n.modality == modality && party.is(&n.subject) && active_instances(n, bb).iter().any(|i| overlaps(i, lit))
    })
}

/// The first active prohibition on `lit` for `party` that no active
/// permission overrides.
pub fn prohibited<'n>(lit: &Literal, party: Party, norms: &'n NormSet, bb: &BeliefBase) -> Option<&'n Norm> {
    let idx = covered(norms, Modality::Prohibition, party, bb, lit)?;
    if covered(norms, Modality::Permission, party, bb, lit).is_some() {
        return None;
    }
    Some(&norms.norms[idx])
}

fn violation(norm: &Norm, party: Party, cycle: u64, instance: &Literal, stage: Stage) -> Violation {
    Violation {
        norm: norm.id.clone(),
        violator: party.name.to_string(),
        instant: cycle,
        instance: close(instance),
        stage,
    }
}

fn prohibited_steps<'p>(plan: &'p Plan, s: &Substitution) -> impl Iterator<Item = Literal> + 'p {
    let s = s.clone();
    plan.body
        .iter()
        .filter_map(|step| step.normative_literal())
        .map(move |l| s.apply_literal(l))
}

/// Compliance in desires. Rejects a goal that is itself prohibited, or
/// whose every relevant plan contains a prohibited step.
pub fn screen_goal(
    goal: &Literal,
    party: Party,
    norms: &NormSet,
    bb: &BeliefBase,
    plans: &[Plan],
    cycle: u64,
) -> Result<(), Vec<Violation>> {
    if let Some(n) = prohibited(goal, party, norms, bb) {
        return Err(vec![violation(n, party, cycle, goal, Stage::Desire)]);
    }
    let relevant: Vec<(&Plan, Substitution)> = plans
        .iter()
        .filter(|p| p.trigger.is_goal())
        .filter_map(|p| {
            let trig = rename_literal(p.trigger.literal(), "g");
            unify_literals(&trig, goal, &Substitution::new()).map(|s| (p, s))
        })
        .collect();
    if relevant.is_empty() {
        return Ok(());
    }
    let mut found = Vec::new();
    for (plan, s) in &relevant {
        let renamed = rename_plan(plan, "g");
        let hit = prohibited_steps(&renamed, s).find_map(|l| prohibited(&l, party, norms, bb).map(|n| (n, l)));
        match hit {
            Some((n, l)) => found.push(violation(n, party, cycle, &l, Stage::Desire)),
            None => return Ok(()),
        }
    }
    found.dedup_by(|a, b| a.norm == b.norm && a.instance == b.instance);
    Err(found)
}

fn rename_plan(plan: &Plan, tag: &str) -> Plan {
    use crate::lang::PlanStep;
    let body = plan
        .body
        .iter()
        .map(|step| match step {
            PlanStep::ExternalAction(l) => PlanStep::ExternalAction(rename_literal(l, tag)),
            PlanStep::AddBelief(l) => PlanStep::AddBelief(rename_literal(l, tag)),
            PlanStep::ReplaceBelief(l) => PlanStep::ReplaceBelief(rename_literal(l, tag)),
            PlanStep::SubGoal(l) => PlanStep::SubGoal(rename_literal(l, tag)),
            other => other.clone(),
        })
        .collect();
    Plan {
        trigger: plan.trigger.clone(),
        context: plan.context.clone(),
        body,
        index: plan.index,
    }
}

/// Plans with the substitution that made them applicable.
pub type Applicable = Vec<(Plan, Substitution)>;

/// Compliance in plans: drop every plan instance with a prohibited step.
/// Returns the survivors in order and one plan-stage violation per
/// removed instance.
pub fn filter_plans(
    applicable: Applicable,
    party: Party,
    norms: &NormSet,
    bb: &BeliefBase,
    cycle: u64,
) -> (Applicable, Vec<(usize, Violation)>) {
    let mut kept = Vec::new();
    let mut dropped = Vec::new();
    for (plan, s) in applicable {
        let hit = prohibited_steps(&plan, &s).find_map(|l| prohibited(&l, party, norms, bb).map(|n| (n, l)));
        match hit {
            Some((n, l)) => dropped.push((plan.index, violation(n, party, cycle, &l, Stage::Plan))),
            None => kept.push((plan, s)),
        }
    }
    (kept, dropped)
}

/// Compliance in actions: one violation per active prohibition matched by
/// the action or by one of its observed effects.
pub fn monitor_action(
    action: &Literal,
    effects: &[Literal],
    party: Party,
    norms: &NormSet,
    bb: &BeliefBase,
    cycle: u64,
) -> Vec<Violation> {
    let mut out = Vec::new();
    for n in &norms.norms {
        if n.modality != Modality::Prohibition || !party.is(&n.subject) {
            continue;
        }
        let instances = active_instances(n, bb);
        let hit = std::iter::once(action)
            .chain(effects)
            .find(|l| instances.iter().any(|i| overlaps(i, l)) && prohibited(l, party, norms, bb).is_some());
        if let Some(l) = hit {
            out.push(violation(n, party, cycle, l, Stage::Action));
        }
    }
    out
}

/// LLM output check: flags output matched by the detector of an active
/// prohibition on `party`.
pub fn check_llm_output(
    output: &str,
    party: Party,
    norms: &NormSet,
    bb: &BeliefBase,
    cycle: u64,
) -> Result<(), Vec<Violation>> {
    if output.is_empty() {
        return Ok(());
    }
    let flagged: Vec<Violation> = norms
        .norms
        .iter()
        .filter(|n| n.modality == Modality::Prohibition && party.is(&n.subject))
        .filter(|n| n.detector.as_ref().is_some_and(|d| d.matches(output)))
        .filter_map(|n| {
            let inst = active_instances(n, bb).into_iter().next()?;
            covered(norms, Modality::Permission, party, bb, &inst)
                .is_none()
                .then(|| violation(n, party, cycle, &inst, Stage::LlmOutput))
        })
        .collect();
    if flagged.is_empty() {
        Ok(())
    } else {
        Err(flagged)
    }
}

/// Static preview for validation: steps that hit prohibitions whose
/// antecedent is empty. Returns (plan index, norm id, step literal).
pub fn lint_program(program: &AgentProgram, party: Party, norms: &NormSet) -> Vec<(usize, String, Literal)> {
    let empty = BeliefBase::new();
    let mut out = Vec::new();
    for plan in &program.plans {
        for step in plan.body.iter().filter_map(|s| s.normative_literal()) {
            for n in &norms.norms {
                if n.modality == Modality::Prohibition
                    && n.antecedent.is_empty()
                    && party.is(&n.subject)
                    && overlaps(&n.consequent, step)
                    && covered(norms, Modality::Permission, party, &empty, step).is_none()
                {
                    out.push((plan.index, n.id.clone(), step.clone()));
                }
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
struct Pending {
    norm: String,
    holder: String,
    instance: Literal,
    since: u64,
}

/// Tracks obligation instances from activation until they are met or
/// their window lapses. Each (norm, holder, instance) fires at most once.
#[derive(Debug, Clone, Default)]
pub struct ObligationMonitor {
    pending: Vec<Pending>,
    settled: HashSet<(String, String, Literal)>,
    activity: Vec<(String, Literal, u64)>,
}

impl ObligationMonitor {
    pub fn new() -> Self {
        Self::default()
    }

    /// Record that `agent` adopted a goal or performed an action.
    pub fn note_activity(&mut self, agent: &str, lit: &Literal, cycle: u64) {
        self.activity.push((agent.to_string(), lit.clone(), cycle));
    }

    pub fn pending(&self) -> usize {
        self.pending.len()
    }

    /// Evaluate obligations held by `holder`. `resolve` maps a norm object
    /// to the agents it names, each with their roles.
    pub fn check(
        &mut self,
        holder: Party,
        norms: &NormSet,
        bb: &BeliefBase,
        roster: &[(String, Vec<String>)],
        cycle: u64,
    ) -> Vec<Violation> {
        for n in norms
            .norms
            .iter()
            .filter(|n| n.modality == Modality::Obligation && holder.is(&n.subject))
        {
            for inst in active_instances(n, bb) {
                let inst = close(&inst);
                let key = (n.id.clone(), holder.name.to_string(), inst.clone());
                if self.settled.contains(&key)
                    || self
                        .pending
                        .iter()
                        .any(|p| p.norm == n.id && p.holder == holder.name && p.instance == inst)
                {
                    continue;
                }
                self.pending.push(Pending {
                    norm: n.id.clone(),
                    holder: holder.name.to_string(),
                    instance: inst,
                    since: cycle,
                });
            }
        }
        let mut fired = Vec::new();
        let mut still = Vec::new();
        for p in std::mem::take(&mut self.pending) {
            if p.holder != holder.name {
                still.push(p);
                continue;
            }
            let Some(n) = norms.get(&p.norm) else { continue };
            let obliged: Vec<Party> = roster
                .iter()
                .map(|(name, roles)| Party::new(name, roles))
                .filter(|a| a.is(&n.object))
                .collect();
            let met = bb.holds(std::slice::from_ref(&p.instance)).unwrap_or(false)
                || self.activity.iter().any(|(who, l, at)| {
                    *at >= p.since && obliged.iter().any(|a| a.name == who) && overlaps(&p.instance, l)
                });
            let key = (p.norm.clone(), p.holder.clone(), p.instance.clone());
            if met {
                self.settled.insert(key);
            } else if cycle.saturating_sub(p.since) > n.window {
                let defeated = obliged
                    .iter()
                    .any(|a| covered(norms, Modality::Prohibition, *a, bb, &p.instance).is_some());
                if !defeated {
                    fired.push(Violation {
                        norm: n.id.clone(),
                        violator: obliged
                            .first()
                            .map(|a| a.name.to_string())
                            .unwrap_or_else(|| n.object.clone()),
                        instant: cycle,
                        instance: p.instance.clone(),
                        stage: Stage::Action,
                    });
                }
                self.settled.insert(key);
            } else {
                still.push(p);
            }
        }
        self.pending = still;
        fired
    }
}

/// A remedy ready to be carried out by the runtime.
#[derive(Debug, Clone, PartialEq)]
pub enum Remedy {
    /// Post `goal` at the front of `agent`'s event queue.
    Goal {
        agent: String,
        goal: Literal,
    },
    Commitment(CommitmentTemplate),
    /// Tell `message` to every agent in `role`.
    Escalate {
        role: String,
        message: Literal,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RemedyError {
    #[error("escalation target `{0}` names no registered agent or role")]
    UnknownRole(String),
}

/// Remembers which violations have been remedied.
#[derive(Debug, Clone, Default)]
pub struct RemedyLedger {
    fired: HashSet<Violation>,
}

impl RemedyLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn already_fired(&self, v: &Violation) -> bool {
        self.fired.contains(v)
    }

    /// Instantiate the remedy of `v`'s norm. Returns an empty list when the
    /// norm has no remedy or the same violation was already handled.
    /// `known` decides whether an escalation target exists.
    pub fn trigger_remedy(
        &mut self,
        v: &Violation,
        norms: &NormSet,
        known: impl Fn(&str) -> bool,
    ) -> Result<Vec<Remedy>, RemedyError> {
        let Some(norm) = norms.get(&v.norm) else {
            return Ok(Vec::new());
        };
        let Some(spec) = &norm.remedy else {
            return Ok(Vec::new());
        };
        if self.fired.contains(v) {
            return Ok(Vec::new());
        }
        let s = unify_literals(&norm.consequent, &v.instance, &Substitution::new()).unwrap_or_default();
        let who = |name: &str| {
            if name == VIOLATOR {
                v.violator.clone()
            } else {
                name.to_string()
            }
        };
        let remedy = match spec {
            RemedySpec::Compensate(goal) => Remedy::Goal {
                agent: v.violator.clone(),
                goal: close(&s.apply_literal(goal)),
            },
            RemedySpec::Secondary(t) => Remedy::Commitment(CommitmentTemplate {
                debtor: who(&t.debtor),
                creditor: who(&t.creditor),
                antecedent: s.apply_literal(&t.antecedent),
                consequent: s.apply_literal(&t.consequent),
                deadline: t.deadline,
            }),
            RemedySpec::Escalate(role) => {
                if !known(role) {
                    return Err(RemedyError::UnknownRole(role.clone()));
                }
                Remedy::Escalate {
                    role: role.clone(),
                    message: Literal::new(
                        "norm_violated",
                        vec![
                            Term::string(v.norm.clone()),
                            Term::string(v.violator.clone()),
                            v.instance.to_term(),
                        ],
                    ),
                }
            }
        };
        self.fired.insert(v.clone());
        Ok(vec![remedy])
    }
}

/// Violation counts by stage, for summaries.
pub fn count_by_stage(vs: &[Violation]) -> BTreeMap<Stage, usize> {
    let mut m = BTreeMap::new();
    for v in vs {
        *m.entry(v.stage).or_insert(0) += 1;
    }
    m
}

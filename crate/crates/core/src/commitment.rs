//! Social commitments `C(debtor, creditor, antecedent, consequent)`.
//!
//! ```text
//! Null ──create──▶ Active ──r holds──▶ Detached ──u holds──▶ Satisfied
//!                    │                   │
//!                    ├─creditor cancels─▶ Expired            ├─deadline / debtor cancels─▶ Violated
//!                    └─debtor cancels──▶ Cancelled
//! ```
//!
//! Detaching and satisfaction are judged in the creditor's beliefs.
//! Deadlines count cycles from the detach cycle.

use std::collections::HashSet;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::lang::{parse_agent_source, parse_body, parse_literal, AgentProgram, Literal, ParseError, PlanStep, Term};
use crate::logic::{unify_literals, BeliefBase, Substitution};
use crate::oracle::{Oracle, OracleError, OracleKind, OracleRequest};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CState {
    Null,
    Active,
    Detached,
    Satisfied,
    Violated,
    Expired,
    Cancelled,
}

impl CState {
    pub fn is_terminal(self) -> bool {
        matches!(
            self,
            CState::Satisfied | CState::Violated | CState::Expired | CState::Cancelled
        )
    }

    pub fn as_str(self) -> &'static str {
        match self {
            CState::Null => "null",
            CState::Active => "active",
            CState::Detached => "detached",
            CState::Satisfied => "satisfied",
            CState::Violated => "violated",
            CState::Expired => "expired",
            CState::Cancelled => "cancelled",
        }
    }
}

impl std::fmt::Display for CState {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// The transition table.
pub fn is_legal(from: CState, to: CState) -> bool {
    use CState::*;
    matches!(
        (from, to),
        (Null, Active)
            | (Active, Detached)
            | (Active, Expired)
            | (Active, Cancelled)
            | (Detached, Satisfied)
            | (Detached, Violated)
    )
}

#[derive(Debug, Clone, PartialEq)]
pub struct Commitment {
    pub id: String,
    pub debtor: String,
    pub creditor: String,
    pub antecedent: Literal,
    pub consequent: Literal,
    pub state: CState,
    /// Cycles allowed between detach and satisfaction.
    pub deadline: Option<u64>,
    pub created_at: u64,
    pub updated_at: u64,
    pub detached_at: Option<u64>,
    /// Set on commitments created to remedy the violation of another.
    pub secondary_of: Option<String>,
}

impl std::fmt::Display for Commitment {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "C({}, {}, {}, {})",
            self.debtor, self.creditor, self.antecedent, self.consequent
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct HistoryEntry {
    pub id: String,
    pub from: CState,
    pub to: CState,
    pub cycle: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CommitmentError {
    #[error("{0} cannot commit to itself")]
    SelfCommitment(String),
    #[error("no commitment `{0}`")]
    Unknown(String),
    #[error("illegal transition of `{id}` from {from} to {to}")]
    IllegalTransition { id: String, from: CState, to: CState },
    #[error("{party} is not a party to `{id}`")]
    NotAParty { id: String, party: String },
    #[error("translation rejected: {reason}")]
    TranslationRejected { reason: String, raw: String },
    #[error("unknown protocol vocabulary: {}", .0.join(", "))]
    UnknownVocabulary(Vec<String>),
    #[error("generated protocol does not parse: {0}")]
    Generation(ParseError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Change {
    pub id: String,
    pub from: CState,
    pub to: CState,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct CommitmentStore {
    commitments: IndexMap<String, Commitment>,
    history: Vec<HistoryEntry>,
    next: u64,
}

impl CommitmentStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, id: &str) -> Option<&Commitment> {
        self.commitments.get(id)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Commitment> {
        self.commitments.values()
    }

    pub fn len(&self) -> usize {
        self.commitments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.commitments.is_empty()
    }

    pub fn history(&self) -> &[HistoryEntry] {
        &self.history
    }

    pub fn count(&self, state: CState) -> usize {
        self.iter().filter(|c| c.state == state).count()
    }

    fn fresh_id(&mut self, stem: Option<&str>) -> String {
        loop {
            self.next += 1;
            let id = match stem {
                Some(s) if self.next == 1 && !self.commitments.contains_key(s) => s.to_string(),
                Some(s) => format!("{s}_{}", self.next),
                None => format!("c{}", self.next),
            };
            if !self.commitments.contains_key(&id) {
                return id;
            }
        }
    }

    /// Create an Active commitment. `id` is used when it is still free.
    #[allow(clippy::too_many_arguments)]
    pub fn create(
        &mut self,
        id: Option<&str>,
        debtor: &str,
        creditor: &str,
        antecedent: Literal,
        consequent: Literal,
        deadline: Option<u64>,
        cycle: u64,
    ) -> Result<String, CommitmentError> {
        if debtor == creditor {
            return Err(CommitmentError::SelfCommitment(debtor.to_string()));
        }
        let id = match id {
            Some(wanted) if !self.commitments.contains_key(wanted) => wanted.to_string(),
            other => self.fresh_id(other),
        };
        self.commitments.insert(
            id.clone(),
            Commitment {
                id: id.clone(),
                debtor: debtor.to_string(),
                creditor: creditor.to_string(),
                antecedent,
                consequent,
                state: CState::Null,
                deadline,
                created_at: cycle,
                updated_at: cycle,
                detached_at: None,
                secondary_of: None,
            },
        );
        self.transition(&id, CState::Active, cycle)?;
        Ok(id)
    }

    pub fn mark_secondary(&mut self, id: &str, of: &str) {
        if let Some(c) = self.commitments.get_mut(id) {
            c.secondary_of = Some(of.to_string());
        }
    }

    fn transition(&mut self, id: &str, to: CState, cycle: u64) -> Result<Change, CommitmentError> {
        let c = self
            .commitments
            .get_mut(id)
            .ok_or_else(|| CommitmentError::Unknown(id.to_string()))?;
        let from = c.state;
        if !is_legal(from, to) {
            return Err(CommitmentError::IllegalTransition {
                id: id.to_string(),
                from,
                to,
            });
        }
        c.state = to;
        c.updated_at = cycle;
        if to == CState::Detached {
            c.detached_at = Some(cycle);
        }
        self.history.push(HistoryEntry {
            id: id.to_string(),
            from,
            to,
            cycle,
        });
        Ok(Change {
            id: id.to_string(),
            from,
            to,
        })
    }

    /// Withdraw. A debtor cancelling before detach cancels; after detach it
    /// violates. A creditor releasing an Active commitment expires it.
    pub fn cancel(&mut self, id: &str, by: &str, cycle: u64) -> Result<Change, CommitmentError> {
        let c = self.get(id).ok_or_else(|| CommitmentError::Unknown(id.to_string()))?;
        let to = if by == c.debtor {
            match c.state {
                CState::Detached => CState::Violated,
                _ => CState::Cancelled,
            }
        } else if by == c.creditor {
            CState::Expired
        } else {
            return Err(CommitmentError::NotAParty {
                id: id.to_string(),
                party: by.to_string(),
            });
        };
        self.transition(id, to, cycle)
    }

    /// Expire an Active commitment whose antecedent can no longer hold.
    pub fn expire(&mut self, id: &str, cycle: u64) -> Result<Change, CommitmentError> {
        self.transition(id, CState::Expired, cycle)
    }

    /// Move every open commitment forward. `beliefs` gives the belief base
    /// of a creditor; creditors without one never detach or satisfy.
    pub fn advance_lifecycle<'b>(
        &mut self,
        beliefs: impl Fn(&str) -> Option<&'b BeliefBase>,
        cycle: u64,
    ) -> Vec<Change> {
        let mut changes = Vec::new();
        let ids: Vec<String> = self.commitments.keys().cloned().collect();
        for id in ids {
            let c = self.commitments[&id].clone();
            let bb = beliefs(&c.creditor);
            if c.state == CState::Active {
                let answer = if c.antecedent.is_true() {
                    Some(Substitution::new())
                } else {
                    bb.and_then(|bb| {
                        bb.first(std::slice::from_ref(&c.antecedent), &Substitution::new())
                            .ok()
                            .flatten()
                    })
                };
                if let Some(s) = answer {
                    let entry = self.commitments.get_mut(&id).expect("present");
                    entry.antecedent = s.apply_literal(&entry.antecedent);
                    entry.consequent = s.apply_literal(&entry.consequent);
                    changes.push(self.transition(&id, CState::Detached, cycle).expect("legal"));
                }
            }
            let c = self.commitments[&id].clone();
            if c.state == CState::Detached {
                let holds = bb
                    .map(|bb| bb.holds(std::slice::from_ref(&c.consequent)).unwrap_or(false))
                    .unwrap_or(false);
                if holds {
                    changes.push(self.transition(&id, CState::Satisfied, cycle).expect("legal"));
                } else if let (Some(d), Some(at)) = (c.deadline, c.detached_at) {
                    if cycle.saturating_sub(at) > d {
                        changes.push(self.transition(&id, CState::Violated, cycle).expect("legal"));
                    }
                }
            }
        }
        changes
    }

    /// Detached commitments with a deadline that has not lapsed yet.
    pub fn live_deadlines(&self) -> usize {
        self.iter()
            .filter(|c| c.state == CState::Detached && c.deadline.is_some())
            .count()
    }

    /// Check that every history entry is legal and that replaying the
    /// history reproduces the current states.
    pub fn validate_history(&self) -> Result<(), String> {
        let mut states: IndexMap<&str, CState> = IndexMap::new();
        for h in &self.history {
            let cur = states.get(h.id.as_str()).copied().unwrap_or(CState::Null);
            if cur != h.from {
                return Err(format!("{}: history says {} but replay is at {}", h.id, h.from, cur));
            }
            if !is_legal(h.from, h.to) {
                return Err(format!("{}: illegal {} -> {}", h.id, h.from, h.to));
            }
            states.insert(&h.id, h.to);
        }
        for c in self.iter() {
            let replayed = states.get(c.id.as_str()).copied().unwrap_or(CState::Null);
            if replayed != c.state {
                return Err(format!("{}: store has {} but replay gives {}", c.id, c.state, replayed));
            }
        }
        if states.len() != self.len() {
            return Err("history mentions unknown commitments".into());
        }
        Ok(())
    }
}

/// A commitment suggested from natural language, awaiting confirmation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Proposal {
    pub debtor: String,
    pub creditor: String,
    pub antecedent: Literal,
    pub consequent: Literal,
    pub deadline_hours: Option<u64>,
}

impl Proposal {
    pub fn deadline_cycles(&self, cycles_per_hour: u64) -> Option<u64> {
        self.deadline_hours.map(|h| h * cycles_per_hour)
    }

    /// The sentence echoed back for confirmation.
    pub fn describe(&self) -> String {
        let mut s = format!(
            "{} commits to {} that once {} holds, {} will be brought about",
            self.debtor, self.creditor, self.antecedent, self.consequent
        );
        if let Some(h) = self.deadline_hours {
            s.push_str(&format!(" within {h} hours"));
        }
        s.push('.');
        s
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawProposal {
    debtor: String,
    creditor: String,
    antecedent: String,
    consequent: String,
    #[serde(default)]
    deadline_hours: Option<u64>,
}

fn valid_party(name: &str) -> bool {
    !name.is_empty() && name.chars().all(|c| c.is_alphanumeric() || c == '_')
}

/// Decode the oracle's structured reply. Anything malformed is rejected.
pub fn parse_translation_reply(raw: &str) -> Result<Proposal, String> {
    let p: RawProposal = serde_json::from_str(raw.trim()).map_err(|e| e.to_string())?;
    if !valid_party(&p.debtor) || !valid_party(&p.creditor) {
        return Err("debtor and creditor must be plain names".into());
    }
    if p.debtor == p.creditor {
        return Err("debtor and creditor are the same".into());
    }
    let lit = |t: &str| -> Result<Literal, String> {
        let l = parse_literal(t).map_err(|e| format!("`{t}`: {e}"))?;
        if l.negated {
            return Err(format!("`{t}` must be positive"));
        }
        Ok(l)
    };
    Ok(Proposal {
        antecedent: lit(&p.antecedent)?,
        consequent: lit(&p.consequent)?,
        debtor: p.debtor,
        creditor: p.creditor,
        deadline_hours: p.deadline_hours,
    })
}

pub fn translation_prompt(utterance: &str, speaker: &str, addressee: &str) -> String {
    format!("Translate into a commitment. Speaker: {speaker}. Addressee: {addressee}. Instruction: {utterance}")
}

/// Ask the oracle to turn an instruction into a commitment proposal.
pub fn translate_instruction(
    utterance: &str,
    speaker: &str,
    addressee: &str,
    oracle: &mut dyn Oracle,
    cycle: u64,
) -> Result<Proposal, CommitmentError> {
    let reject = |reason: String, raw: String| CommitmentError::TranslationRejected { reason, raw };
    if utterance.trim().is_empty() {
        return Err(reject("empty instruction".into(), String::new()));
    }
    let request = OracleRequest::new(
        OracleKind::Translate,
        translation_prompt(utterance.trim(), speaker, addressee),
        speaker,
        cycle,
    );
    let raw = match oracle.call(&request) {
        Ok(r) => r.into_text(),
        Err(e @ (OracleError::Refusal { .. } | OracleError::CassetteMiss { .. } | OracleError::Unavailable(_))) => {
            return Err(reject(e.to_string(), String::new()))
        }
        Err(e) => return Err(reject(e.to_string(), String::new())),
    };
    parse_translation_reply(&raw).map_err(|reason| reject(reason, raw))
}

/// How a creditor establishes an antecedent.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AntecedentVocab {
    /// The literal shape the template variables refer to, e.g. `pr_submitted(T)`.
    pub pattern: String,
    /// Belief whose addition starts the creditor's side.
    pub trigger: String,
    /// Steps that bring the antecedent about.
    #[serde(default)]
    pub steps: String,
}

/// How a debtor brings a consequent about and reports it.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConsequentVocab {
    pub pattern: String,
    /// Goal the creditor asks the debtor to achieve.
    pub request: String,
    pub steps: String,
    /// Belief the debtor adds once the work is done.
    pub done: String,
    #[serde(default)]
    pub report_context: Option<String>,
    /// Literal told back to the creditor.
    pub report: String,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProtocolVocabulary {
    #[serde(default)]
    pub antecedents: IndexMap<String, AntecedentVocab>,
    #[serde(default)]
    pub consequents: IndexMap<String, ConsequentVocab>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Protocol {
    pub debtor_plans: AgentProgram,
    pub creditor_plans: AgentProgram,
    /// Goals to post on the creditor when the antecedent is `true`.
    pub creditor_goals: Vec<Literal>,
}

fn party_term(name: &str) -> String {
    Term::atom(name).to_string()
}

/// A step template; blank means no steps.
fn template_steps(text: &str) -> Result<Vec<PlanStep>, ParseError> {
    if text.trim().is_empty() {
        Ok(Vec::new())
    } else {
        parse_body(text)
    }
}

fn instantiate(template: &str, s: &Substitution) -> Result<String, ParseError> {
    let steps = template_steps(template)?;
    Ok(steps
        .iter()
        .map(|st| apply_step(st, s).to_string())
        .collect::<Vec<_>>()
        .join("; "))
}

fn apply_step(step: &PlanStep, s: &Substitution) -> PlanStep {
    let l = |x: &Literal| s.apply_literal(x);
    match step {
        PlanStep::ExternalAction(x) => PlanStep::ExternalAction(l(x)),
        PlanStep::InternalAction { name, args } => PlanStep::InternalAction {
            name: name.clone(),
            args: args.iter().map(|a| s.apply(a)).collect(),
        },
        PlanStep::AddBelief(x) => PlanStep::AddBelief(l(x)),
        PlanStep::RemoveBelief(x) => PlanStep::RemoveBelief(l(x)),
        PlanStep::ReplaceBelief(x) => PlanStep::ReplaceBelief(l(x)),
        PlanStep::SubGoal(x) => PlanStep::SubGoal(l(x)),
        PlanStep::TestGoal(x) => PlanStep::TestGoal(l(x)),
        PlanStep::SendMessage {
            recipient,
            performative,
            content,
        } => PlanStep::SendMessage {
            recipient: s.apply(recipient),
            performative: *performative,
            content: l(content),
        },
        PlanStep::QueryLlm(p) => PlanStep::QueryLlm(crate::lang::PromptExpr::new(
            p.parts.iter().map(|t| s.apply(t)).collect(),
        )),
        PlanStep::AskLlm { prompt, result } => PlanStep::AskLlm {
            prompt: crate::lang::PromptExpr::new(prompt.parts.iter().map(|t| s.apply(t)).collect()),
            result: result.clone(),
        },
    }
}

fn literal_with(text: &str, s: &Substitution) -> Result<Literal, ParseError> {
    Ok(s.apply_literal(&parse_literal(text)?))
}

fn external_actions(steps: &str) -> Vec<(String, usize)> {
    template_steps(steps)
        .map(|b| {
            b.iter()
                .filter_map(|s| match s {
                    PlanStep::ExternalAction(l) => Some((l.predicate.clone(), l.arity())),
                    _ => None,
                })
                .collect()
        })
        .unwrap_or_default()
}

/// Instantiate the fixed coordination templates for `c`.
///
/// The creditor gets `+trigger <- steps; .send(debtor, achieve, request).`
/// (or a `request_commitment(id)` goal plan when the antecedent is
/// `true`). The debtor gets `+!request <- steps; +done.` and
/// `+done : report_context <- .send(creditor, tell, report).`
pub fn generate_protocol(
    c: &Commitment,
    vocab: &ProtocolVocabulary,
    actions: &[(String, usize)],
) -> Result<Protocol, CommitmentError> {
    let mut missing: Vec<String> = Vec::new();
    let ante = if c.antecedent.is_true() {
        None
    } else {
        match vocab.antecedents.get(&c.antecedent.predicate) {
            Some(v) => Some(v),
            None => {
                missing.push(c.antecedent.predicate.clone());
                None
            }
        }
    };
    let cons = vocab.consequents.get(&c.consequent.predicate);
    if cons.is_none() {
        missing.push(c.consequent.predicate.clone());
    }
    let mut used: Vec<(String, usize)> = Vec::new();
    if let Some(a) = ante {
        used.extend(external_actions(&a.steps));
    }
    if let Some(k) = cons {
        used.extend(external_actions(&k.steps));
    }
    for (name, arity) in used {
        if !actions.iter().any(|(n, a)| *n == name && *a == arity) && !missing.contains(&name) {
            missing.push(name);
        }
    }
    if !missing.is_empty() {
        return Err(CommitmentError::UnknownVocabulary(missing));
    }
    let cons = cons.expect("checked");
    let gen = CommitmentError::Generation;
    let mut s = Substitution::new();
    if let Some(a) = ante {
        let pat = parse_literal(&a.pattern).map_err(gen)?;
        s = unify_literals(&pat, &c.antecedent, &s).unwrap_or(s);
    }
    let pat = parse_literal(&cons.pattern).map_err(gen)?;
    s = unify_literals(&pat, &c.consequent, &s).unwrap_or(s);

    let request = literal_with(&cons.request, &s).map_err(gen)?;
    let send_request = format!(".send({}, achieve, {request})", party_term(&c.debtor));
    let (creditor_src, creditor_goals) = match ante {
        Some(a) => {
            let trigger = literal_with(&a.trigger, &s).map_err(gen)?;
            let steps = instantiate(&a.steps, &s).map_err(gen)?;
            let body = if steps.is_empty() {
                send_request
            } else {
                format!("{steps}; {send_request}")
            };
            (format!("+{trigger} <-\n    {body}.\n"), Vec::new())
        }
        None => {
            let goal = Literal::new("request_commitment", vec![Term::string(c.id.clone())]);
            (format!("+!{goal} <-\n    {send_request}.\n"), vec![goal])
        }
    };
    let done = literal_with(&cons.done, &s).map_err(gen)?;
    let steps = instantiate(&cons.steps, &s).map_err(gen)?;
    let report = literal_with(&cons.report, &s).map_err(gen)?;
    let context = match &cons.report_context {
        Some(ctx) => format!(" : {}", instantiate_conj(ctx, &s).map_err(gen)?),
        None => String::new(),
    };
    let work = if steps.is_empty() {
        format!("+{done}")
    } else {
        format!("{steps}; +{done}")
    };
    let debtor_src = format!(
        "+!{request} <-\n    {work}.\n\n+{done}{context} <-\n    .send({}, tell, {report}).\n",
        party_term(&c.creditor)
    );
    Ok(Protocol {
        debtor_plans: parse_agent_source(&debtor_src).map_err(gen)?,
        creditor_plans: parse_agent_source(&creditor_src).map_err(gen)?,
        creditor_goals,
    })
}

fn instantiate_conj(text: &str, s: &Substitution) -> Result<String, ParseError> {
    let lits = crate::lang::parse_conjunction(text)?;
    if lits.is_empty() {
        return Ok("true".into());
    }
    Ok(lits
        .iter()
        .map(|l| s.apply_literal(l).to_string())
        .collect::<Vec<_>>()
        .join(" & "))
}

/// A secondary-commitment template from the commitment file. Omitted
/// fields copy the violated commitment.
#[derive(Debug, Clone, PartialEq)]
pub struct SecondaryPolicy {
    /// A commitment id, a consequent predicate, or `*`.
    pub applies_to: String,
    pub debtor: Option<String>,
    pub creditor: Option<String>,
    pub antecedent: Option<Literal>,
    pub consequent: Option<Literal>,
    /// Clock hours in files, cycles once installed. Defaults to the
    /// violated commitment's deadline.
    pub deadline: Option<u64>,
}

impl SecondaryPolicy {
    pub fn matches(&self, c: &Commitment) -> bool {
        self.applies_to == "*" || self.applies_to == c.id || self.applies_to == c.consequent.predicate
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ViolationOutcome {
    Secondary(String),
    Escalate { role: String, message: Literal },
}

pub fn escalation_message(c: &Commitment) -> Literal {
    Literal::new(
        "commitment_violated",
        vec![Term::string(c.id.clone()), Term::string(c.debtor.clone())],
    )
}

/// Tracks which violated commitments have been handled.
#[derive(Debug, Clone, Default)]
pub struct ViolationHandler {
    handled: HashSet<String>,
}

impl ViolationHandler {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn handled(&self) -> usize {
        self.handled.len()
    }

    /// Remedy a violated commitment exactly once: instantiate the first
    /// matching secondary template, or escalate to `human_role`.
    /// Secondary commitments never spawn further secondaries.
    pub fn handle_violation(
        &mut self,
        store: &mut CommitmentStore,
        id: &str,
        policy: &[SecondaryPolicy],
        human_role: &str,
        cycle: u64,
    ) -> Option<ViolationOutcome> {
        let c = store.get(id)?.clone();
        if c.state != CState::Violated || !self.handled.insert(id.to_string()) {
            return None;
        }
        let escalate = ViolationOutcome::Escalate {
            role: human_role.to_string(),
            message: escalation_message(&c),
        };
        if c.secondary_of.is_some() {
            return Some(escalate);
        }
        let Some(p) = policy.iter().find(|p| p.matches(&c)) else {
            return Some(escalate);
        };
        let debtor = p.debtor.clone().unwrap_or_else(|| c.debtor.clone());
        let creditor = p.creditor.clone().unwrap_or_else(|| c.creditor.clone());
        let created = store.create(
            Some(&format!("{}_secondary", c.id)),
            &debtor,
            &creditor,
            p.antecedent.clone().unwrap_or_else(|| c.antecedent.clone()),
            p.consequent.clone().unwrap_or_else(|| c.consequent.clone()),
            p.deadline.or(c.deadline),
            cycle,
        );
        match created {
            Ok(new_id) => {
                store.mark_secondary(&new_id, &c.id);
                Some(ViolationOutcome::Secondary(new_id))
            }
            Err(_) => Some(escalate),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CommitmentSpec {
    pub id: Option<String>,
    pub debtor: String,
    pub creditor: String,
    pub antecedent: Literal,
    pub consequent: Literal,
    /// Clock hours; converted with the scenario's cycles-per-hour.
    pub deadline: Option<u64>,
    /// Install generated coordination plans in both parties.
    pub generate_protocol: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Instruction {
    pub speaker: String,
    pub addressee: String,
    pub utterance: String,
    /// Pre-confirmed for non-interactive runs.
    pub confirmed: bool,
}

/// The scenario's commitment file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CommitmentFile {
    pub commitments: Vec<CommitmentSpec>,
    pub secondary: Vec<SecondaryPolicy>,
    pub protocols: ProtocolVocabulary,
    pub instructions: Vec<Instruction>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSpec {
    #[serde(default)]
    id: Option<String>,
    debtor: String,
    creditor: String,
    #[serde(default)]
    antecedent: Option<String>,
    consequent: String,
    #[serde(default)]
    deadline: Option<u64>,
    #[serde(default)]
    generate_protocol: bool,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSecondary {
    #[serde(rename = "for", default = "star")]
    applies_to: String,
    #[serde(default)]
    debtor: Option<String>,
    #[serde(default)]
    creditor: Option<String>,
    #[serde(default)]
    antecedent: Option<String>,
    #[serde(default)]
    consequent: Option<String>,
    #[serde(default)]
    deadline: Option<u64>,
}

fn star() -> String {
    "*".into()
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawInstruction {
    speaker: String,
    addressee: String,
    utterance: String,
    #[serde(default)]
    confirmed: bool,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFile {
    #[serde(default)]
    commitments: Vec<RawSpec>,
    #[serde(default)]
    secondary: Vec<RawSecondary>,
    #[serde(default)]
    protocols: ProtocolVocabulary,
    #[serde(default)]
    instructions: Vec<RawInstruction>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{0}")]
pub struct CommitmentFileError(pub String);

fn positive(text: &str, what: &str) -> Result<Literal, CommitmentFileError> {
    let l = parse_literal(text).map_err(|e| CommitmentFileError(format!("{what} `{text}`: {e}")))?;
    if l.negated {
        return Err(CommitmentFileError(format!("{what} `{text}` must be positive")));
    }
    Ok(l)
}

impl CommitmentFile {
    pub fn from_json(text: &str) -> Result<Self, CommitmentFileError> {
        let value: serde_json::Value = serde_json::from_str(text).map_err(|e| CommitmentFileError(e.to_string()))?;
        if !value.is_object() {
            return Err(CommitmentFileError("commitment file must be a JSON object".into()));
        }
        let raw: RawFile = serde_json::from_value(value).map_err(|e| CommitmentFileError(e.to_string()))?;
        let mut out = CommitmentFile {
            protocols: raw.protocols,
            ..Default::default()
        };
        for (i, c) in raw.commitments.into_iter().enumerate() {
            if c.debtor == c.creditor {
                return Err(CommitmentFileError(format!(
                    "commitment {i}: {} cannot commit to itself",
                    c.debtor
                )));
            }
            out.commitments.push(CommitmentSpec {
                antecedent: positive(
                    c.antecedent.as_deref().unwrap_or("true"),
                    &format!("commitment {i} antecedent"),
                )?,
                consequent: positive(&c.consequent, &format!("commitment {i} consequent"))?,
                id: c.id,
                debtor: c.debtor,
                creditor: c.creditor,
                deadline: c.deadline,
                generate_protocol: c.generate_protocol,
            });
        }
        for (i, s) in raw.secondary.into_iter().enumerate() {
            let opt = |t: &Option<String>, what: &str| -> Result<Option<Literal>, CommitmentFileError> {
                t.as_deref()
                    .map(|t| positive(t, &format!("secondary {i} {what}")))
                    .transpose()
            };
            out.secondary.push(SecondaryPolicy {
                antecedent: opt(&s.antecedent, "antecedent")?,
                consequent: opt(&s.consequent, "consequent")?,
                applies_to: s.applies_to,
                debtor: s.debtor,
                creditor: s.creditor,
                deadline: s.deadline,
            });
        }
        for (name, v) in &out.protocols.antecedents {
            Self::check_pattern(name, &v.pattern)?;
            positive(&v.trigger, &format!("protocol {name} trigger"))?;
            template_steps(&v.steps).map_err(|e| CommitmentFileError(format!("protocol {name} steps: {e}")))?;
        }
        for (name, v) in &out.protocols.consequents {
            Self::check_pattern(name, &v.pattern)?;
            positive(&v.request, &format!("protocol {name} request"))?;
            positive(&v.done, &format!("protocol {name} done"))?;
            positive(&v.report, &format!("protocol {name} report"))?;
            template_steps(&v.steps).map_err(|e| CommitmentFileError(format!("protocol {name} steps: {e}")))?;
            if let Some(ctx) = &v.report_context {
                crate::lang::parse_conjunction(ctx)
                    .map_err(|e| CommitmentFileError(format!("protocol {name} report_context: {e}")))?;
            }
        }
        out.instructions = raw
            .instructions
            .into_iter()
            .map(|r| Instruction {
                speaker: r.speaker,
                addressee: r.addressee,
                utterance: r.utterance,
                confirmed: r.confirmed,
            })
            .collect();
        Ok(out)
    }

    fn check_pattern(name: &str, pattern: &str) -> Result<(), CommitmentFileError> {
        let p = positive(pattern, &format!("protocol {name} pattern"))?;
        if p.predicate != name {
            return Err(CommitmentFileError(format!(
                "protocol pattern `{pattern}` does not use predicate {name}"
            )));
        }
        Ok(())
    }
}

//! The multi-agent system: registry, message bus and the global cycle.
//!
//! One `step_system` call:
//! 1. deliver last cycle's messages,
//! 2. run one deliberation cycle per agent in registration order,
//! 3. advance commitments and handle the ones that were violated,
//! 4. remedy norm violations found during the cycle,
//! 5. increment the cycle counter.

use std::collections::VecDeque;

use indexmap::IndexMap;
use serde::Serialize;
use serde_json::json;

use crate::agent::{AgentState, Message, Source, World};
use crate::commitment::{
    generate_protocol, translate_instruction, translation_prompt, CState, CommitmentError, CommitmentFile,
    CommitmentStore, Proposal, SecondaryPolicy, ViolationHandler, ViolationOutcome,
};
use crate::env::SimEnv;
use crate::lang::{AgentProgram, Literal, Performative, Term};
use crate::logic::BeliefBase;
use crate::norms::{NormSet, ObligationMonitor, Party, Remedy, RemedyError, RemedyLedger, Violation};
use crate::oracle::{Oracle, OracleError, OracleRequest, OracleResponse};
use crate::trace::{Trace, TraceKind};

/// Name used in the trace for work done by the scheduler itself.
pub const SYSTEM: &str = "system";

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RuntimeError {
    #[error("an agent named {0} is already registered")]
    DuplicateName(String),
    #[error("no agent or role named {0}")]
    UnknownParty(String),
    #[error(transparent)]
    Commitment(#[from] CommitmentError),
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct Counters {
    /// Violations that happened (action stage and lapsed obligations).
    pub violations: u64,
    pub remedies: u64,
    pub unremedied: u64,
}

/// Sees every oracle call so the runtime can trace calls it makes itself.
struct Logged<'a> {
    inner: &'a mut dyn Oracle,
    calls: Vec<(OracleRequest, Result<OracleResponse, OracleError>)>,
}

impl Oracle for Logged<'_> {
    fn call(&mut self, request: &OracleRequest) -> Result<OracleResponse, OracleError> {
        let r = self.inner.call(request);
        self.calls.push((request.clone(), r.clone()));
        r
    }
}

pub struct SystemState {
    agents: IndexMap<String, AgentState>,
    roster: Vec<(String, Vec<String>)>,
    mailboxes: IndexMap<String, VecDeque<Message>>,
    pub commitments: CommitmentStore,
    pub norms: NormSet,
    pub env: SimEnv,
    oracle: Box<dyn Oracle>,
    obligations: ObligationMonitor,
    remedies: RemedyLedger,
    handler: ViolationHandler,
    secondary: Vec<SecondaryPolicy>,
    pending: Vec<Violation>,
    instructions: Vec<crate::commitment::Instruction>,
    traced_history: usize,
    pub cycle: u64,
    pub trace: Trace,
    pub counters: Counters,
    pub cycles_per_hour: u64,
    pub human_role: String,
}

impl SystemState {
    pub fn new(env: SimEnv, norms: NormSet, oracle: Box<dyn Oracle>) -> Self {
        SystemState {
            agents: IndexMap::new(),
            roster: Vec::new(),
            mailboxes: IndexMap::new(),
            commitments: CommitmentStore::new(),
            norms,
            env,
            oracle,
            obligations: ObligationMonitor::new(),
            remedies: RemedyLedger::new(),
            handler: ViolationHandler::new(),
            secondary: Vec::new(),
            pending: Vec::new(),
            instructions: Vec::new(),
            traced_history: 0,
            cycle: 0,
            trace: Trace::new(),
            counters: Counters::default(),
            cycles_per_hour: 1,
            human_role: "human".into(),
        }
    }

    pub fn agent(&self, name: &str) -> Option<&AgentState> {
        self.agents.get(name)
    }

    pub fn agents(&self) -> impl Iterator<Item = &AgentState> {
        self.agents.values()
    }

    pub fn roster(&self) -> &[(String, Vec<String>)] {
        &self.roster
    }

    /// The agent of that name, else the first member of that role.
    pub fn resolve_party(&self, who: &str) -> Option<&AgentState> {
        self.agents
            .get(who)
            .or_else(|| self.agents.values().find(|a| a.roles.iter().any(|r| r == who)))
    }

    fn knows(&self, who: &str) -> bool {
        self.resolve_party(who).is_some()
    }

    pub fn register_agent(
        &mut self,
        name: &str,
        roles: Vec<String>,
        program: AgentProgram,
    ) -> Result<(), RuntimeError> {
        if self.agents.contains_key(name) {
            return Err(RuntimeError::DuplicateName(name.to_string()));
        }
        let mut program = program;
        program.name = name.to_string();
        self.roster.push((name.to_string(), roles.clone()));
        self.mailboxes.insert(name.to_string(), VecDeque::new());
        self.agents
            .insert(name.to_string(), AgentState::new(name, roles, program));
        Ok(())
    }

    /// Create the file's commitments, install generated protocols and
    /// queue its instructions for the first cycle.
    pub fn install_commitments(&mut self, file: &CommitmentFile) -> Result<(), RuntimeError> {
        self.secondary = file.secondary.clone();
        for p in &mut self.secondary {
            p.deadline = p.deadline.map(|h| h * self.cycles_per_hour);
        }
        for spec in &file.commitments {
            for party in [&spec.debtor, &spec.creditor] {
                if !self.knows(party) {
                    return Err(RuntimeError::UnknownParty(party.clone()));
                }
            }
            let id = self.commitments.create(
                spec.id.as_deref(),
                &spec.debtor,
                &spec.creditor,
                spec.antecedent.clone(),
                spec.consequent.clone(),
                spec.deadline.map(|h| h * self.cycles_per_hour),
                self.cycle,
            )?;
            if spec.generate_protocol {
                let c = self.commitments.get(&id).expect("just created").clone();
                let protocol = generate_protocol(&c, &file.protocols, &self.env.vocabulary())?;
                let debtor = self.resolve_party(&c.debtor).map(|a| a.name.clone()).expect("checked");
                let creditor = self
                    .resolve_party(&c.creditor)
                    .map(|a| a.name.clone())
                    .expect("checked");
                self.agents[&debtor].add_plans(protocol.debtor_plans);
                let cred = &mut self.agents[&creditor];
                cred.add_plans(protocol.creditor_plans);
                for g in protocol.creditor_goals {
                    cred.post_urgent_goal(g, Source::Own);
                }
            }
        }
        self.instructions = file.instructions.clone();
        Ok(())
    }

    /// Agents idle, nothing in flight, no running deadlines.
    pub fn is_quiescent(&self) -> bool {
        self.agents.values().all(AgentState::is_quiescent)
            && self.mailboxes.values().all(VecDeque::is_empty)
            && self.commitments.live_deadlines() == 0
            && self.instructions.is_empty()
            && self.pending.is_empty()
    }

    /// Queue a message from `sender` (usually a human proxy) for delivery
    /// at the start of the next cycle.
    pub fn send(
        &mut self,
        sender: &str,
        to: &str,
        performative: Performative,
        content: Literal,
    ) -> Result<(), RuntimeError> {
        let targets = crate::agent::resolve(to, sender, &self.roster);
        if targets.is_empty() {
            return Err(RuntimeError::UnknownParty(to.to_string()));
        }
        for target in targets {
            self.trace.push(
                self.cycle,
                sender,
                TraceKind::Message,
                json!({"to": target, "performative": performative.as_str(), "content": content.to_string()}),
            );
            self.mailboxes[&target].push_back(Message {
                sender: sender.to_string(),
                receiver: target,
                performative,
                content: content.clone(),
                sent_at: self.cycle,
            });
        }
        Ok(())
    }

    /// Translate an utterance, tracing the oracle call.
    pub fn translate(&mut self, speaker: &str, addressee: &str, utterance: &str) -> Result<Proposal, CommitmentError> {
        let mut logged = Logged {
            inner: self.oracle.as_mut(),
            calls: Vec::new(),
        };
        let result = translate_instruction(utterance, speaker, addressee, &mut logged, self.cycle);
        let calls = std::mem::take(&mut logged.calls);
        for (req, resp) in calls {
            let payload = match resp {
                Ok(r) => json!({"kind": req.kind.as_str(), "prompt": req.prompt, "response": r.into_text()}),
                Err(e) => json!({"kind": req.kind.as_str(), "prompt": req.prompt, "error": e.to_string()}),
            };
            self.trace.push(self.cycle, speaker, TraceKind::LlmCall, payload);
        }
        if result.is_err() && utterance.trim().is_empty() {
            // No oracle call happened; still leave a record.
            self.trace.push(
                self.cycle,
                speaker,
                TraceKind::LlmCall,
                json!({"kind": "translate", "prompt": translation_prompt("", speaker, addressee), "error": "empty instruction"}),
            );
        }
        result
    }

    /// Accept or decline a proposal on behalf of `speaker`.
    pub fn decide(&mut self, speaker: &str, proposal: &Proposal, accept: bool) -> Result<Option<String>, RuntimeError> {
        let payload =
            json!({"proposal": proposal.describe(), "decision": if accept { "confirmed" } else { "rejected" }});
        self.trace
            .push(self.cycle, speaker, TraceKind::CommitmentTransition, payload);
        if !accept {
            return Ok(None);
        }
        let id = self.commitments.create(
            None,
            &proposal.debtor,
            &proposal.creditor,
            proposal.antecedent.clone(),
            proposal.consequent.clone(),
            proposal.deadline_cycles(self.cycles_per_hour),
            self.cycle,
        )?;
        self.flush_commitments();
        Ok(Some(id))
    }

    fn run_instructions(&mut self) {
        for ins in std::mem::take(&mut self.instructions) {
            match self.translate(&ins.speaker, &ins.addressee, &ins.utterance) {
                Ok(p) => {
                    if let Err(e) = self.decide(&ins.speaker, &p, ins.confirmed) {
                        self.system_note(json!({"instruction": ins.utterance, "error": e.to_string()}));
                    }
                }
                Err(e) => self.trace.push(
                    self.cycle,
                    &ins.speaker,
                    TraceKind::CommitmentTransition,
                    json!({"instruction": ins.utterance, "decision": "rejected", "error": e.to_string()}),
                ),
            }
        }
    }

    fn system_note(&mut self, payload: serde_json::Value) {
        self.trace.push(self.cycle, SYSTEM, TraceKind::Remedy, payload);
    }

    fn flush_commitments(&mut self) {
        let history = &self.commitments.history()[self.traced_history..];
        for h in history {
            let c = self.commitments.get(&h.id).expect("history names stored commitments");
            let mut payload = json!({
                "id": h.id,
                "from": h.from.as_str(),
                "to": h.to.as_str(),
                "debtor": c.debtor,
                "creditor": c.creditor,
                "antecedent": c.antecedent.to_string(),
                "consequent": c.consequent.to_string(),
            });
            if let Some(d) = c.deadline {
                payload["deadline"] = json!(d);
            }
            if let Some(of) = &c.secondary_of {
                payload["secondary_of"] = json!(of);
            }
            self.trace
                .push(self.cycle, SYSTEM, TraceKind::CommitmentTransition, payload);
        }
        self.traced_history = self.commitments.history().len();
    }

    pub fn step_system(&mut self) {
        if self.cycle == 0 {
            self.run_instructions();
        }
        let cycle = self.cycle;
        let mut outbox = Vec::new();
        {
            let SystemState {
                agents,
                roster,
                mailboxes,
                norms,
                env,
                oracle,
                obligations,
                trace,
                pending,
                ..
            } = self;
            let mut world = World {
                cycle,
                env,
                oracle: oracle.as_mut(),
                norms,
                obligations,
                roster,
                outbox: &mut outbox,
                trace,
                violations: pending,
            };
            for (name, agent) in agents.iter_mut() {
                let inbox: Vec<Message> = mailboxes[name].drain(..).collect();
                for m in inbox {
                    agent.receive(m, &mut world);
                }
            }
            for agent in agents.values_mut() {
                agent.deliberation_cycle(&mut world);
            }
        }
        for m in outbox {
            if let Some(q) = self.mailboxes.get_mut(&m.receiver) {
                q.push_back(m);
            }
        }
        self.commitment_phase();
        self.remediation_phase();
        self.flush_commitments();
        self.cycle += 1;
    }

    fn commitment_phase(&mut self) {
        let changes = {
            let agents = &self.agents;
            let beliefs = |who: &str| -> Option<&BeliefBase> {
                agents
                    .get(who)
                    .or_else(|| agents.values().find(|a| a.roles.iter().any(|r| r == who)))
                    .map(|a| &a.beliefs)
            };
            self.commitments.advance_lifecycle(beliefs, self.cycle)
        };
        self.flush_commitments();
        for ch in changes.iter().filter(|c| c.to == CState::Violated) {
            self.handle_commitment_violation(&ch.id);
        }
    }

    /// Tell the debtor of a commitment created at run time what it owes:
    /// `commitment_assigned(Id, Creditor, Consequent)`.
    fn notify_debtor(&mut self, id: &str) {
        let Some(c) = self.commitments.get(id) else { return };
        if !self.agents.contains_key(&c.debtor) {
            return;
        }
        let (debtor, content) = (
            c.debtor.clone(),
            Literal::new(
                "commitment_assigned",
                vec![
                    Term::string(id),
                    Term::string(c.creditor.clone()),
                    c.consequent.to_term(),
                ],
            ),
        );
        let _ = self.send(SYSTEM, &debtor, Performative::Tell, content);
    }

    fn handle_commitment_violation(&mut self, id: &str) {
        let human = self.human_role.clone();
        let outcome = self
            .handler
            .handle_violation(&mut self.commitments, id, &self.secondary, &human, self.cycle);
        match outcome {
            Some(ViolationOutcome::Secondary(new_id)) => {
                self.counters.remedies += 1;
                self.system_note(json!({"commitment": id, "remedy": "secondary", "created": new_id}));
                self.flush_commitments();
                self.notify_debtor(&new_id);
            }
            Some(ViolationOutcome::Escalate { role, message }) => {
                match self.send(SYSTEM, &role, Performative::Tell, message.clone()) {
                    Ok(()) => {
                        self.counters.remedies += 1;
                        self.system_note(json!({"commitment": id, "remedy": "escalate", "role": role, "message": message.to_string()}));
                    }
                    Err(e) => {
                        self.counters.unremedied += 1;
                        self.system_note(
                            json!({"commitment": id, "remedy": "escalate", "role": role, "error": e.to_string()}),
                        );
                    }
                }
            }
            None => {}
        }
    }

    fn remediation_phase(&mut self) {
        // Action violations were traced by the acting agent already.
        let mut found = std::mem::take(&mut self.pending);
        for (name, agent) in &self.agents {
            let party = Party::new(name, &agent.roles);
            for v in self
                .obligations
                .check(party, &self.norms, &agent.beliefs, &self.roster, self.cycle)
            {
                let payload = json!({
                    "norm": v.norm, "violator": v.violator, "instance": v.instance.to_string(),
                    "stage": "obligation", "prevented": false,
                });
                self.trace
                    .push(self.cycle, &v.violator, TraceKind::NormViolation, payload);
                found.push(v);
            }
        }
        for v in found {
            self.counters.violations += 1;
            self.remedy(&v);
        }
    }

    fn remedy(&mut self, v: &Violation) {
        let result = {
            let agents = &self.agents;
            let known =
                |who: &str| agents.contains_key(who) || agents.values().any(|a| a.roles.iter().any(|r| r == who));
            self.remedies.trigger_remedy(v, &self.norms, known)
        };
        let remedies = match result {
            Ok(r) if r.is_empty() => {
                self.counters.unremedied += 1;
                self.system_note(json!({"norm": v.norm, "violator": v.violator, "remedy": "none"}));
                return;
            }
            Ok(r) => r,
            Err(RemedyError::UnknownRole(role)) => {
                self.counters.unremedied += 1;
                self.system_note(json!({"norm": v.norm, "violator": v.violator, "remedy": "escalate", "error": format!("unknown role {role}")}));
                return;
            }
        };
        for r in remedies {
            match r {
                Remedy::Goal { agent, goal } => {
                    if self.env.knows_action(&goal.predicate, goal.arity()) {
                        let outcome = self.env.perform(&agent, &goal);
                        let ok = matches!(&outcome, Ok(res) if res.success);
                        let mut payload = json!({"norm": v.norm, "violator": agent, "remedy": "compensate", "action": goal.to_string(), "executed": ok});
                        if let Err(e) = outcome {
                            payload["error"] = json!(e.to_string());
                        }
                        self.trace.push(self.cycle, SYSTEM, TraceKind::Remedy, payload);
                        if ok {
                            self.counters.remedies += 1;
                        } else {
                            self.counters.unremedied += 1;
                        }
                    } else if let Some(a) = self.agents.get_mut(&agent) {
                        a.post_urgent_goal(goal.clone(), Source::Own);
                        self.counters.remedies += 1;
                        self.system_note(json!({"norm": v.norm, "violator": agent, "remedy": "compensate", "goal": goal.to_string()}));
                    } else {
                        self.counters.unremedied += 1;
                    }
                }
                Remedy::Commitment(t) => {
                    let created = self.commitments.create(
                        None,
                        &t.debtor,
                        &t.creditor,
                        t.antecedent.clone(),
                        t.consequent.clone(),
                        t.deadline.map(|h| h * self.cycles_per_hour),
                        self.cycle,
                    );
                    match created {
                        Ok(id) => {
                            self.counters.remedies += 1;
                            self.system_note(
                                json!({"norm": v.norm, "violator": v.violator, "remedy": "secondary", "created": id}),
                            );
                            self.flush_commitments();
                            self.notify_debtor(&id);
                        }
                        Err(e) => {
                            self.counters.unremedied += 1;
                            self.system_note(json!({"norm": v.norm, "violator": v.violator, "remedy": "secondary", "error": e.to_string()}));
                        }
                    }
                }
                Remedy::Escalate { role, message } => {
                    if self.send(SYSTEM, &role, Performative::Tell, message.clone()).is_ok() {
                        self.counters.remedies += 1;
                        self.system_note(json!({"norm": v.norm, "violator": v.violator, "remedy": "escalate", "role": role, "message": message.to_string()}));
                    } else {
                        self.counters.unremedied += 1;
                    }
                }
            }
        }
    }

    /// Prevented attempts, counted from the trace.
    pub fn prevented(&self) -> u64 {
        self.trace
            .of_kind(TraceKind::NormViolation)
            .filter(|e| e.payload["prevented"] == json!(true))
            .count() as u64
    }

    pub fn goals(&self) -> (u64, u64) {
        self.agents
            .values()
            .fold((0, 0), |(a, f), s| (a + s.goals_achieved, f + s.goals_failed))
    }
}

/// Step until quiescent or `max_cycles` steps have run. At least one step
/// runs whenever `max_cycles > 0`.
pub fn run(system: &mut SystemState, max_cycles: u64) {
    for i in 0..max_cycles {
        if i > 0 && system.is_quiescent() {
            break;
        }
        system.step_system();
    }
}

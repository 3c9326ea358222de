//! The BDI interpreter: events, intentions and the deliberation cycle.
//!
//! One cycle of an agent:
//! 1. diff the environment's percepts into belief events,
//! 2. take at most one event and form or extend an intention,
//! 3. run one step of one intention, round-robin by intention id.
//!
//! Norms are consulted when a goal is adopted, when plans are chosen and
//! around every external action and LLM generation.

use std::collections::{BTreeSet, VecDeque};

use indexmap::IndexSet;
use serde_json::{json, Value};

use crate::env::SimEnv;
use crate::lang::{AgentProgram, ContextCond, Literal, Performative, Plan, PlanStep, PromptExpr, Term};
use crate::logic::{rename_literal, unify, unify_literals, BeliefBase, Substitution};
use crate::norms::{
    check_llm_output, close, filter_plans, monitor_action, prohibited, screen_goal, NormSet, ObligationMonitor, Party,
    Stage, Violation,
};
use crate::oracle::{generate, query_boolean, Oracle, OracleError, OracleKind, OracleRequest};
use crate::trace::{Trace, TraceKind};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Message {
    pub sender: String,
    pub receiver: String,
    pub performative: Performative,
    pub content: Literal,
    pub sent_at: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Source {
    Own,
    Percept,
    Message(String),
}

impl Source {
    fn as_text(&self) -> String {
        match self {
            Source::Own => "self".into(),
            Source::Percept => "percept".into(),
            Source::Message(from) => format!("message:{from}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum EventKind {
    GoalAdded(Literal),
    GoalFailed(Literal),
    BeliefAdded(Literal),
    BeliefRemoved(Literal),
    MessageReceived(Message),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Event {
    pub kind: EventKind,
    pub source: Source,
    /// For subgoals: the suspended intention waiting on this goal.
    pub intention: Option<usize>,
}

impl Event {
    pub fn goal(goal: Literal, source: Source) -> Self {
        Event {
            kind: EventKind::GoalAdded(goal),
            source,
            intention: None,
        }
    }

    fn belief(kind: EventKind, source: Source) -> Self {
        Event {
            kind,
            source,
            intention: None,
        }
    }

    pub fn describe(&self) -> String {
        match &self.kind {
            EventKind::GoalAdded(g) => format!("+!{g}"),
            EventKind::GoalFailed(g) => format!("-!{g}"),
            EventKind::BeliefAdded(b) => format!("+{b}"),
            EventKind::BeliefRemoved(b) => format!("-{b}"),
            EventKind::MessageReceived(m) => format!("{}({}, {})", m.performative, m.sender, m.content),
        }
    }
}

/// One plan instance on an intention stack.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub plan: Plan,
    pub subst: Substitution,
    pub pc: usize,
    /// The literal that triggered this frame, in the caller's variables.
    pub event: Literal,
    pub goal: bool,
    /// Declaration indices already tried for this goal occurrence.
    pub attempted: BTreeSet<usize>,
    tag: String,
}

impl Frame {
    fn exhausted(&self) -> bool {
        self.pc >= self.plan.body.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IntentionStatus {
    Active,
    Suspended,
    Done,
    Failed,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Intention {
    pub id: usize,
    pub stack: Vec<Frame>,
    pub status: IntentionStatus,
}

/// Everything outside the agent that one cycle may touch.
pub struct World<'a> {
    pub cycle: u64,
    pub env: &'a mut SimEnv,
    pub oracle: &'a mut dyn Oracle,
    pub norms: &'a NormSet,
    pub obligations: &'a mut ObligationMonitor,
    /// Every registered agent with its roles, in registration order.
    pub roster: &'a [(String, Vec<String>)],
    pub outbox: &'a mut Vec<Message>,
    pub trace: &'a mut Trace,
    /// Action-stage violations awaiting the remediation phase.
    pub violations: &'a mut Vec<Violation>,
}

impl World<'_> {
    fn emit(&mut self, agent: &str, kind: TraceKind, payload: Value) {
        self.trace.push(self.cycle, agent, kind, payload);
    }

    fn knows(&self, who: &str) -> bool {
        self.roster
            .iter()
            .any(|(n, roles)| n == who || roles.iter().any(|r| r == who))
    }

    fn oracle_call(&mut self, agent: &str, kind: OracleKind, prompt: String) -> Result<String, OracleError> {
        let req = OracleRequest::new(kind, prompt, agent, self.cycle);
        let result = match kind {
            OracleKind::BooleanQuery => query_boolean(self.oracle, &req).map(|b| b.to_string()),
            _ => generate(self.oracle, &req),
        };
        let outcome = match &result {
            Ok(text) => json!({"kind": kind.as_str(), "prompt": req.prompt, "response": text}),
            Err(e) => json!({"kind": kind.as_str(), "prompt": req.prompt, "error": e.to_string()}),
        };
        self.emit(agent, TraceKind::LlmCall, outcome);
        result
    }
}

fn violation_payload(v: &Violation, prevented: bool) -> Value {
    json!({
        "norm": v.norm,
        "violator": v.violator,
        "instance": v.instance.to_string(),
        "stage": v.stage.as_str(),
        "prevented": prevented,
    })
}

/// Plans whose trigger unifies with the event, in declaration order, each
/// with the trigger unifier.
pub fn relevant_plans(event: &Literal, goal: bool, library: &[Plan]) -> Vec<(Plan, Substitution)> {
    library
        .iter()
        .filter(|p| p.trigger.is_goal() == goal)
        .filter_map(|p| unify_literals(p.trigger.literal(), event, &Substitution::new()).map(|s| (p.clone(), s)))
        .collect()
}

/// Render a prompt; `None` when a part is still unbound.
pub fn render_prompt(prompt: &PromptExpr, s: &Substitution) -> Option<String> {
    let mut out = String::new();
    for part in &prompt.parts {
        let t = s.apply(part);
        if !fully_ground(&t) {
            return None;
        }
        out.push_str(&t.as_text());
    }
    Some(out)
}

fn fully_ground(t: &Term) -> bool {
    match t {
        Term::Var(_) | Term::Wildcard => false,
        Term::Compound(_, args) => args.iter().all(fully_ground),
        _ => true,
    }
}

/// Plans whose context holds, each with its first context solution.
/// Symbolic conjuncts are solved first; `query_LLM` conjuncts are then
/// asked in order with those bindings applied. Solutions that leave a
/// prompt unbound are skipped. A refusal fails the conjunct; an
/// unavailable oracle is an error.
pub fn applicable_plans(
    relevant: Vec<(Plan, Substitution)>,
    beliefs: &BeliefBase,
    ask: &mut dyn FnMut(&str) -> Result<bool, OracleError>,
) -> Result<Vec<(Plan, Substitution)>, OracleError> {
    let mut out = Vec::new();
    for (plan, s) in relevant {
        let symbolic: Vec<Literal> = plan
            .context
            .iter()
            .filter_map(|c| match c {
                ContextCond::Lit(l) => Some(l.clone()),
                ContextCond::QueryLlm(_) => None,
            })
            .collect();
        let prompts: Vec<&PromptExpr> = plan
            .context
            .iter()
            .filter_map(|c| match c {
                ContextCond::QueryLlm(p) => Some(p),
                ContextCond::Lit(_) => None,
            })
            .collect();
        let mut chosen = None;
        'solutions: for answer in beliefs.query_with(&symbolic, &s) {
            let Ok(sol) = answer else { break };
            let sol = s.merge(&sol).unwrap_or(sol);
            for p in &prompts {
                let Some(text) = render_prompt(p, &sol) else {
                    continue 'solutions;
                };
                match ask(&text) {
                    Ok(true) => {}
                    Ok(false) | Err(OracleError::Refusal { .. }) | Err(OracleError::EmptyPrompt) => continue 'solutions,
                    Err(e) => return Err(e),
                }
            }
            chosen = Some(sol);
            break;
        }
        if let Some(sol) = chosen {
            out.push((plan, sol));
        }
    }
    Ok(out)
}

/// The lowest-index applicable plan not yet attempted.
pub fn select_plan(applicable: Vec<(Plan, Substitution)>, attempted: &BTreeSet<usize>) -> Option<(Plan, Substitution)> {
    applicable
        .into_iter()
        .filter(|(p, _)| !attempted.contains(&p.index))
        .min_by_key(|(p, _)| p.index)
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentState {
    pub name: String,
    pub roles: Vec<String>,
    pub program: AgentProgram,
    pub beliefs: BeliefBase,
    pub events: VecDeque<Event>,
    pub intentions: Vec<Intention>,
    pub goals_achieved: u64,
    pub goals_failed: u64,
    next_intention: usize,
    last_run: Option<usize>,
    percepts: IndexSet<Literal>,
}

enum StepOutcome {
    Advance(Substitution),
    Suspend,
    Fail(String),
}

impl AgentState {
    /// Load a program: initial beliefs and rules form the belief base,
    /// initial goals are queued as events.
    pub fn new(name: &str, roles: Vec<String>, program: AgentProgram) -> Self {
        let mut beliefs = BeliefBase::with_rules(program.rules.clone());
        for b in &program.beliefs {
            // Parsed beliefs are positive.
            let _ = beliefs.assert(b.clone());
        }
        let events = program
            .goals
            .iter()
            .map(|g| Event::goal(g.clone(), Source::Own))
            .collect();
        AgentState {
            name: name.to_string(),
            roles,
            program,
            beliefs,
            events,
            intentions: Vec::new(),
            goals_achieved: 0,
            goals_failed: 0,
            next_intention: 0,
            last_run: None,
            percepts: IndexSet::new(),
        }
    }

    pub fn party(&self) -> Party<'_> {
        Party::new(&self.name, &self.roles)
    }

    /// Nothing queued and no live intentions.
    pub fn is_quiescent(&self) -> bool {
        self.events.is_empty() && self.intentions.is_empty()
    }

    /// Install extra plans after the existing ones.
    pub fn add_plans(&mut self, plans: AgentProgram) {
        for r in &plans.rules {
            self.beliefs.add_rule(r.clone());
        }
        for b in &plans.beliefs {
            let _ = self.beliefs.assert(b.clone());
        }
        for g in &plans.goals {
            self.events.push_back(Event::goal(g.clone(), Source::Own));
        }
        self.program.extend(plans);
    }

    /// Queue a goal ahead of everything else.
    pub fn post_urgent_goal(&mut self, goal: Literal, source: Source) {
        self.events.push_front(Event::goal(goal, source));
    }

    /// Accept a delivered message.
    pub fn receive(&mut self, msg: Message, world: &mut World) {
        let source = Source::Message(msg.sender.clone());
        match msg.performative {
            Performative::Achieve => self.events.push_back(Event::goal(msg.content, source)),
            Performative::Tell => {
                let b = close(&msg.content);
                self.add_belief(b, source, world);
            }
            Performative::Ask => self.events.push_back(Event {
                kind: EventKind::MessageReceived(msg),
                source,
                intention: None,
            }),
        }
    }

    fn add_belief(&mut self, b: Literal, source: Source, world: &mut World) {
        let fresh = self.beliefs.assert(b.clone()).unwrap_or(false);
        world.emit(
            &self.name,
            TraceKind::BeliefChange,
            json!({"op": "add", "belief": b.to_string(), "source": source.as_text(), "new": fresh}),
        );
        self.events.push_back(Event::belief(EventKind::BeliefAdded(b), source));
    }

    fn remove_beliefs(&mut self, removed: Vec<Literal>, source: Source, world: &mut World) {
        for b in removed {
            world.emit(
                &self.name,
                TraceKind::BeliefChange,
                json!({"op": "remove", "belief": b.to_string(), "source": source.as_text()}),
            );
            self.events
                .push_back(Event::belief(EventKind::BeliefRemoved(b), source.clone()));
        }
    }

    /// One deliberation cycle. Never fails; problems become trace entries.
    pub fn deliberation_cycle(&mut self, world: &mut World) {
        self.ingest_percepts(world);
        if let Some(event) = self.events.pop_front() {
            self.handle_event(event, world);
        }
        if let Some(idx) = self.next_runnable() {
            self.execute_step(idx, world);
        }
    }

    fn ingest_percepts(&mut self, world: &mut World) {
        let now: IndexSet<Literal> = world.env.percepts(&self.name).into_iter().collect();
        let gone: Vec<Literal> = self.percepts.iter().filter(|p| !now.contains(*p)).cloned().collect();
        let new: Vec<Literal> = now.iter().filter(|p| !self.percepts.contains(*p)).cloned().collect();
        for p in gone {
            world.emit(
                &self.name,
                TraceKind::Percept,
                json!({"op": "remove", "percept": p.to_string()}),
            );
            let removed: Vec<Literal> = if self.beliefs.contains(&p) {
                self.beliefs.retract(&p).into_iter().filter(|b| *b == p).collect()
            } else {
                Vec::new()
            };
            self.remove_beliefs(removed, Source::Percept, world);
        }
        for p in new {
            world.emit(
                &self.name,
                TraceKind::Percept,
                json!({"op": "add", "percept": p.to_string()}),
            );
            self.add_belief(p, Source::Percept, world);
        }
        self.percepts = now;
    }

    fn handle_event(&mut self, event: Event, world: &mut World) {
        world.emit(
            &self.name,
            TraceKind::Event,
            json!({"event": event.describe(), "source": event.source.as_text()}),
        );
        match event.kind {
            EventKind::GoalAdded(goal) => self.adopt_goal(goal, event.intention, world),
            EventKind::BeliefAdded(b) => {
                let relevant = relevant_plans(&rename_literal(&b, "e0"), false, &self.program.plans);
                if relevant.is_empty() {
                    return;
                }
                if let Some((plan, s, attempted)) = self.choose(&b, relevant, &BTreeSet::new(), world) {
                    let id = self.new_intention();
                    self.push_frame(id, plan, s, b, false, attempted, world);
                }
            }
            EventKind::MessageReceived(msg) => self.answer(msg, world),
            EventKind::GoalFailed(_) | EventKind::BeliefRemoved(_) => {}
        }
    }

    fn answer(&mut self, msg: Message, world: &mut World) {
        let reply = match self
            .beliefs
            .first(std::slice::from_ref(&msg.content), &Substitution::new())
        {
            Ok(Some(s)) => close(&s.apply_literal(&msg.content)),
            _ => close(&Literal::new("unknown", vec![msg.content.to_term()])),
        };
        self.send(&msg.sender, Performative::Tell, reply, world);
    }

    fn send(&mut self, to: &str, performative: Performative, content: Literal, world: &mut World) {
        world.emit(
            &self.name,
            TraceKind::Message,
            json!({"to": to, "performative": performative.as_str(), "content": content.to_string()}),
        );
        world.outbox.push(Message {
            sender: self.name.clone(),
            receiver: to.to_string(),
            performative,
            content,
            sent_at: world.cycle,
        });
    }

    fn new_intention(&mut self) -> usize {
        let id = self.next_intention;
        self.next_intention += 1;
        self.intentions.push(Intention {
            id,
            stack: Vec::new(),
            status: IntentionStatus::Active,
        });
        id
    }

    fn intention_pos(&self, id: usize) -> Option<usize> {
        self.intentions.iter().position(|i| i.id == id)
    }

    fn adopt_goal(&mut self, goal: Literal, parent: Option<usize>, world: &mut World) {
        let party_roles = self.roles.clone();
        let party = Party::new(&self.name, &party_roles);
        if let Err(vs) = screen_goal(
            &goal,
            party,
            world.norms,
            &self.beliefs,
            &self.program.plans,
            world.cycle,
        ) {
            for v in &vs {
                world.emit(&self.name, TraceKind::NormViolation, violation_payload(v, true));
            }
            self.goal_failed(goal, parent, "rejected by norms", world);
            return;
        }
        world.obligations.note_activity(&self.name, &goal, world.cycle);
        let depth = parent
            .and_then(|id| self.intention_pos(id))
            .map(|p| self.intentions[p].stack.len())
            .unwrap_or(0);
        let relevant = relevant_plans(&rename_literal(&goal, &format!("e{depth}")), true, &self.program.plans);
        match self.choose(&goal, relevant, &BTreeSet::new(), world) {
            Some((plan, s, attempted)) => {
                let id = match parent {
                    Some(id) if self.intention_pos(id).is_some() => id,
                    _ => self.new_intention(),
                };
                if let Some(p) = self.intention_pos(id) {
                    self.intentions[p].status = IntentionStatus::Active;
                }
                self.push_frame(id, plan, s, goal, true, attempted, world);
            }
            None => self.goal_failed(goal, parent, "no applicable plan", world),
        }
    }

    /// Applicable, norm-compliant, untried plan for an event.
    fn choose(
        &mut self,
        event: &Literal,
        relevant: Vec<(Plan, Substitution)>,
        attempted: &BTreeSet<usize>,
        world: &mut World,
    ) -> Option<(Plan, Substitution, BTreeSet<usize>)> {
        let name = self.name.clone();
        let applicable = {
            let mut ask = |prompt: &str| {
                world
                    .oracle_call(&name, OracleKind::BooleanQuery, prompt.to_string())
                    .map(|r| r == "true")
            };
            match applicable_plans(relevant, &self.beliefs, &mut ask) {
                Ok(a) => a,
                Err(e) => {
                    world.emit(
                        &name,
                        TraceKind::Step,
                        json!({"outcome": "context-error", "event": event.to_string(), "error": e.to_string()}),
                    );
                    return None;
                }
            }
        };
        let untried: Vec<_> = applicable
            .into_iter()
            .filter(|(p, _)| !attempted.contains(&p.index))
            .collect();
        let party_roles = self.roles.clone();
        let party = Party::new(&name, &party_roles);
        let (kept, dropped) = filter_plans(untried, party, world.norms, &self.beliefs, world.cycle);
        for (index, v) in &dropped {
            let mut payload = violation_payload(v, true);
            payload["plan"] = json!(index);
            world.emit(&name, TraceKind::NormViolation, payload);
        }
        let mut attempted = attempted.clone();
        // Filtered plans count as tried so a retry cannot pick them.
        attempted.extend(dropped.iter().map(|(i, _)| *i));
        let (plan, s) = select_plan(kept, &attempted)?;
        attempted.insert(plan.index);
        Some((plan, s, attempted))
    }

    #[allow(clippy::too_many_arguments)]
    fn push_frame(
        &mut self,
        id: usize,
        plan: Plan,
        subst: Substitution,
        event: Literal,
        goal: bool,
        attempted: BTreeSet<usize>,
        world: &mut World,
    ) {
        let Some(p) = self.intention_pos(id) else { return };
        let depth = self.intentions[p].stack.len();
        world.emit(
            &self.name,
            TraceKind::PlanSelected,
            json!({
                "intention": id,
                "plan": plan.index,
                "trigger": if goal { format!("+!{event}") } else { format!("+{event}") },
                "bindings": subst.to_string(),
            }),
        );
        self.intentions[p].stack.push(Frame {
            plan,
            subst,
            pc: 0,
            event,
            goal,
            attempted,
            tag: format!("e{depth}"),
        });
        self.pop_finished(id, world);
    }

    fn goal_failed(&mut self, goal: Literal, parent: Option<usize>, reason: &str, world: &mut World) {
        match parent.and_then(|id| self.intention_pos(id).map(|_| id)) {
            Some(id) => {
                world.emit(
                    &self.name,
                    TraceKind::Step,
                    json!({"intention": id, "outcome": "subgoal-failed", "goal": goal.to_string(), "reason": reason}),
                );
                if let Some(p) = self.intention_pos(id) {
                    self.intentions[p].status = IntentionStatus::Active;
                }
                self.handle_failure(id, world);
            }
            None => self.root_goal_failed(goal, reason, world),
        }
    }

    fn root_goal_failed(&mut self, goal: Literal, reason: &str, world: &mut World) {
        self.goals_failed += 1;
        world.emit(
            &self.name,
            TraceKind::Step,
            json!({"outcome": "goal-failed", "goal": goal.to_string(), "reason": reason}),
        );
        self.events
            .push_back(Event::belief(EventKind::GoalFailed(goal), Source::Own));
    }

    fn next_runnable(&self) -> Option<usize> {
        let active = |i: &&Intention| i.status == IntentionStatus::Active && !i.stack.is_empty();
        let after = self
            .intentions
            .iter()
            .filter(active)
            .find(|i| self.last_run.is_none_or(|last| i.id > last));
        after.or_else(|| self.intentions.iter().find(active)).map(|i| i.id)
    }

    /// Run the next step of intention `id`.
    pub fn execute_step(&mut self, id: usize, world: &mut World) {
        self.last_run = Some(id);
        let Some(p) = self.intention_pos(id) else { return };
        let Some(frame) = self.intentions[p].stack.last() else {
            return;
        };
        if frame.exhausted() {
            self.pop_finished(id, world);
            return;
        }
        let step = frame.plan.body[frame.pc].clone();
        let subst = frame.subst.clone();
        let pc = frame.pc;
        let plan_index = frame.plan.index;
        let outcome = self.run_step(id, &step, &subst, world);
        let Some(p) = self.intention_pos(id) else { return };
        match outcome {
            StepOutcome::Advance(s) => {
                let mut payload =
                    json!({"intention": id, "plan": plan_index, "pc": pc, "step": step.to_string(), "outcome": "ok"});
                if let PlanStep::ExternalAction(l) = &step {
                    payload["performed"] = json!(s.apply_literal(l).to_string());
                }
                world.emit(&self.name, TraceKind::Step, payload);
                let frame = self.intentions[p].stack.last_mut().expect("frame present");
                frame.subst = s;
                frame.pc += 1;
                self.pop_finished(id, world);
            }
            StepOutcome::Suspend => {
                world.emit(
                    &self.name,
                    TraceKind::Step,
                    json!({"intention": id, "plan": plan_index, "pc": pc, "step": step.to_string(), "outcome": "suspended"}),
                );
                self.intentions[p].status = IntentionStatus::Suspended;
            }
            StepOutcome::Fail(reason) => {
                world.emit(
                    &self.name,
                    TraceKind::Step,
                    json!({"intention": id, "plan": plan_index, "pc": pc, "step": step.to_string(), "outcome": "failed", "reason": reason}),
                );
                self.handle_failure(id, world);
            }
        }
    }

    /// Pop exhausted frames, resuming callers, and retire the intention
    /// once its stack is empty.
    fn pop_finished(&mut self, id: usize, world: &mut World) {
        loop {
            let Some(p) = self.intention_pos(id) else { return };
            let intention = &mut self.intentions[p];
            let Some(top) = intention.stack.last() else { break };
            if !top.exhausted() {
                return;
            }
            let done = intention.stack.pop().expect("non-empty");
            if let Some(parent) = intention.stack.last_mut() {
                let result = done.subst.apply_literal(&rename_literal(&done.event, &done.tag));
                if let Some(s) = unify_literals(&done.event, &result, &Substitution::new()) {
                    for (var, value) in s.iter() {
                        if value.is_ground() {
                            parent.subst.bind(var, value);
                        }
                    }
                }
                parent.pc += 1;
            } else {
                let root = done.event.clone();
                world.emit(
                    &self.name,
                    TraceKind::Step,
                    json!({"intention": id, "outcome": "intention-completed", "trigger": root.to_string()}),
                );
                if done.goal {
                    self.goals_achieved += 1;
                }
                break;
            }
        }
        if let Some(p) = self.intention_pos(id) {
            if self.intentions[p].stack.is_empty() {
                self.intentions[p].status = IntentionStatus::Done;
                self.intentions.remove(p);
            }
        }
    }

    /// The top frame of `id` failed: retry the goal with the next untried
    /// applicable plan against current beliefs, or pop and fail the caller.
    pub fn handle_failure(&mut self, id: usize, world: &mut World) {
        let Some(p) = self.intention_pos(id) else { return };
        let Some(frame) = self.intentions[p].stack.pop() else {
            return;
        };
        let relevant = relevant_plans(
            &rename_literal(&frame.event, &frame.tag),
            frame.goal,
            &self.program.plans,
        );
        let next = if frame.goal {
            self.choose(&frame.event, relevant, &frame.attempted, world)
        } else {
            None
        };
        let Some(p) = self.intention_pos(id) else { return };
        if let Some((plan, s, attempted)) = next {
            self.intentions[p].status = IntentionStatus::Active;
            self.push_frame(id, plan, s, frame.event, true, attempted, world);
            return;
        }
        if self.intentions[p].stack.is_empty() {
            self.intentions[p].status = IntentionStatus::Failed;
            self.intentions.remove(p);
            if frame.goal {
                self.root_goal_failed(frame.event, "all applicable plans failed", world);
            } else {
                world.emit(
                    &self.name,
                    TraceKind::Step,
                    json!({"intention": id, "outcome": "intention-failed", "trigger": frame.event.to_string()}),
                );
            }
            return;
        }
        world.emit(
            &self.name,
            TraceKind::Step,
            json!({"intention": id, "outcome": "subgoal-failed", "goal": frame.event.to_string(), "reason": "all applicable plans failed"}),
        );
        self.handle_failure(id, world);
    }

    fn run_step(&mut self, id: usize, step: &PlanStep, s: &Substitution, world: &mut World) -> StepOutcome {
        let name = self.name.clone();
        let roles = self.roles.clone();
        let party = Party::new(&name, &roles);
        match step {
            PlanStep::ExternalAction(l) => {
                let action = s.apply_literal(l);
                if let Some(n) = prohibited(&action, party, world.norms, &self.beliefs) {
                    let v = Violation {
                        norm: n.id.clone(),
                        violator: name.clone(),
                        instant: world.cycle,
                        instance: close(&action),
                        stage: Stage::Action,
                    };
                    world.emit(&name, TraceKind::NormViolation, violation_payload(&v, true));
                    return StepOutcome::Fail(format!("prohibited by {}", n.id));
                }
                let result = match world.env.perform(&name, &action) {
                    Ok(r) => r,
                    Err(e) => return StepOutcome::Fail(e.to_string()),
                };
                world.obligations.note_activity(&name, &action, world.cycle);
                let done = result.bindings.apply_literal(&action);
                for v in monitor_action(&done, &result.effects, party, world.norms, &self.beliefs, world.cycle) {
                    world.emit(&name, TraceKind::NormViolation, violation_payload(&v, false));
                    world.violations.push(v);
                }
                if !result.success {
                    return StepOutcome::Fail(format!("{done} did not succeed"));
                }
                match s.merge(&result.bindings) {
                    Some(s) => StepOutcome::Advance(s),
                    None => StepOutcome::Fail("inconsistent action bindings".into()),
                }
            }
            PlanStep::InternalAction { name: action, args } => self.internal(action, args, s, world),
            PlanStep::AddBelief(l) => {
                self.add_belief(close(&s.apply_literal(l)), Source::Own, world);
                StepOutcome::Advance(s.clone())
            }
            PlanStep::RemoveBelief(l) => {
                let removed = self.beliefs.retract(&s.apply_literal(l));
                self.remove_beliefs(removed, Source::Own, world);
                StepOutcome::Advance(s.clone())
            }
            PlanStep::ReplaceBelief(l) => {
                let b = close(&s.apply_literal(l));
                let removed = self.beliefs.retract_signature(&b.predicate, b.arity());
                self.remove_beliefs(removed, Source::Own, world);
                self.add_belief(b, Source::Own, world);
                StepOutcome::Advance(s.clone())
            }
            PlanStep::SubGoal(l) => {
                let goal = s.apply_literal(l);
                self.events.push_back(Event {
                    kind: EventKind::GoalAdded(goal),
                    source: Source::Own,
                    intention: Some(id),
                });
                StepOutcome::Suspend
            }
            PlanStep::TestGoal(l) => match self.beliefs.first(std::slice::from_ref(l), s) {
                Ok(Some(ans)) => StepOutcome::Advance(s.merge(&ans).unwrap_or(ans)),
                Ok(None) => StepOutcome::Fail(format!("?{} has no answer", s.apply_literal(l))),
                Err(e) => StepOutcome::Fail(e.to_string()),
            },
            PlanStep::SendMessage {
                recipient,
                performative,
                content,
            } => {
                let to = match s.apply(recipient) {
                    Term::Atom(n) | Term::Str(n) | Term::Var(n) => n,
                    other => return StepOutcome::Fail(format!("bad recipient {other}")),
                };
                if !world.knows(&to) {
                    return StepOutcome::Fail(format!("unknown recipient {to}"));
                }
                let content = close(&s.apply_literal(content));
                world.obligations.note_activity(&name, &content, world.cycle);
                for target in resolve(&to, &name, world.roster) {
                    self.send(&target, *performative, content.clone(), world);
                }
                StepOutcome::Advance(s.clone())
            }
            PlanStep::QueryLlm(p) => {
                let Some(prompt) = render_prompt(p, s) else {
                    return StepOutcome::Fail("prompt is not ground".into());
                };
                match world.oracle_call(&name, OracleKind::BooleanQuery, prompt) {
                    Ok(r) if r == "true" => StepOutcome::Advance(s.clone()),
                    Ok(_) => StepOutcome::Fail("query_LLM answered false".into()),
                    Err(e) => StepOutcome::Fail(e.to_string()),
                }
            }
            PlanStep::AskLlm { prompt, result } => {
                let Some(text) = render_prompt(prompt, s) else {
                    return StepOutcome::Fail("prompt is not ground".into());
                };
                let output = match world.oracle_call(&name, OracleKind::Generate, text) {
                    Ok(o) => o,
                    Err(e) => return StepOutcome::Fail(e.to_string()),
                };
                if let Err(vs) = check_llm_output(&output, party, world.norms, &self.beliefs, world.cycle) {
                    for v in &vs {
                        world.emit(&name, TraceKind::NormViolation, violation_payload(v, true));
                    }
                    return StepOutcome::Fail("LLM output flagged".into());
                }
                match unify(&Term::var(result.clone()), &Term::string(output), s) {
                    Some(s) => StepOutcome::Advance(s),
                    None => StepOutcome::Fail(format!("{result} is already bound")),
                }
            }
        }
    }

    fn internal(&mut self, action: &str, args: &[Term], s: &Substitution, world: &mut World) -> StepOutcome {
        let vals: Vec<Term> = args.iter().map(|a| s.apply(a)).collect();
        match action {
            "concat" => {
                let Some((out, parts)) = vals.split_last() else {
                    return StepOutcome::Fail(".concat needs an output".into());
                };
                if parts.iter().any(|p| !fully_ground(p)) {
                    return StepOutcome::Fail(".concat of unbound parts".into());
                }
                let text: String = parts.iter().map(Term::as_text).collect();
                match unify(out, &Term::string(text), s) {
                    Some(s) => StepOutcome::Advance(s),
                    None => StepOutcome::Fail(".concat output mismatch".into()),
                }
            }
            "print" => {
                let text: String = vals.iter().map(Term::as_text).collect();
                world.emit(&self.name, TraceKind::Step, json!({"print": text}));
                StepOutcome::Advance(s.clone())
            }
            "eq" | "neq" | "lt" | "le" | "gt" | "ge" => {
                let [a, b] = vals.as_slice() else {
                    return StepOutcome::Fail(format!(".{action} takes two arguments"));
                };
                let ok = match action {
                    "eq" => return unify(a, b, s).map_or(StepOutcome::Fail("not equal".into()), StepOutcome::Advance),
                    "neq" => unify(a, b, s).is_none(),
                    _ => match (a, b) {
                        (Term::Num(x), Term::Num(y)) => {
                            let (x, y) = (x.value(), y.value());
                            match action {
                                "lt" => x < y,
                                "le" => x <= y,
                                "gt" => x > y,
                                _ => x >= y,
                            }
                        }
                        _ => return StepOutcome::Fail(format!(".{action} compares numbers")),
                    },
                };
                if ok {
                    StepOutcome::Advance(s.clone())
                } else {
                    StepOutcome::Fail(format!(".{action} is false"))
                }
            }
            other => StepOutcome::Fail(format!("unknown internal action .{other}")),
        }
    }
}

/// Recipients named by `to`: the agent of that name, or every other member
/// of that role.
pub fn resolve(to: &str, sender: &str, roster: &[(String, Vec<String>)]) -> Vec<String> {
    if roster.iter().any(|(n, _)| n == to) {
        return vec![to.to_string()];
    }
    roster
        .iter()
        .filter(|(n, roles)| n != sender && roles.iter().any(|r| r == to))
        .map(|(n, _)| n.clone())
        .collect()
}

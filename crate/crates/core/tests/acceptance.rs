//! End-to-end acceptance checks, one test per criterion. Each test prints a
//! `PASS`/`FAIL` line with the evidence it looked at.

use std::collections::{BTreeMap, BTreeSet};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use nmas::commitment::{
    is_legal, parse_translation_reply, CState, CommitmentFile, CommitmentStore, SecondaryPolicy, ViolationHandler,
    ViolationOutcome,
};
use nmas::conformance::{engine_answers, ground_query_oracle};
use nmas::env::EnvFixture;
use nmas::lang::{
    parse_agent_source, parse_body, parse_conjunction, parse_literal, parse_term, pretty_print, Literal, Term,
};
use nmas::logic::BeliefBase;
use nmas::norms::NormSet;
use nmas::oracle::{Cassette, OracleScript};
use nmas::repl::{run_session, Repl};
use nmas::runtime::SystemState;
use nmas::scenario::{run_scenario, Scenario};
use nmas::trace::{Trace, TraceEntry, TraceKind};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

fn root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

fn bundles() -> Vec<PathBuf> {
    let mut dirs: Vec<PathBuf> = std::fs::read_dir(root())
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.join("scenario.json").is_file())
        .collect();
    dirs.sort();
    dirs
}

fn load(name: &str) -> Scenario {
    Scenario::load(&root().join(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

fn run(s: &Scenario) -> SystemState {
    run_scenario(s, s.constants.max_cycles, Box::new(s.scripted_oracle())).unwrap()
}

/// Print the verdict line, then fail the test if any check failed.
fn verdict(criterion: &str, failures: &[String], evidence: &str) {
    if failures.is_empty() {
        println!("PASS {criterion}: {evidence}");
    } else {
        println!("FAIL {criterion}: {}", failures.join("; "));
        panic!("{criterion} failed: {}", failures.join("; "));
    }
}

fn field<'e>(e: &'e TraceEntry, key: &str) -> &'e str {
    e.str_field(key).unwrap_or("")
}

/// Index of the first entry at or after `from` satisfying `pred`.
fn find_from(trace: &[TraceEntry], from: usize, pred: impl Fn(&TraceEntry) -> bool) -> Option<usize> {
    trace
        .iter()
        .enumerate()
        .skip(from)
        .find(|(_, e)| pred(e))
        .map(|(i, _)| i)
}

fn belief_added(e: &TraceEntry, agent: &str, belief: &str) -> bool {
    e.kind == TraceKind::BeliefChange && e.agent == agent && field(e, "op") == "add" && field(e, "belief") == belief
}

fn performed(e: &TraceEntry, agent: &str, action: &str) -> bool {
    e.kind == TraceKind::Step
        && e.agent == agent
        && field(e, "outcome") == "ok"
        && field(e, "performed").starts_with(action)
}

#[test]
fn fig2_reproduction() {
    let started = Instant::now();
    let s = load("fig2_single_agent");
    let system = run(&s);
    let elapsed = started.elapsed();
    let trace = system.trace.entries();
    let agent = "CodingAgent";
    let mut failures = Vec::new();

    let clone = find_from(trace, 0, |e| performed(e, agent, "clone_repo("));
    let pick = clone.and_then(|i| find_from(trace, i, |e| performed(e, agent, "get_backlog_item(")));
    // The task bound by get_backlog_item must be ground and is then tracked by name.
    let task = pick
        .map(|i| parse_literal(field(&trace[i], "performed")).unwrap())
        .and_then(|l| l.args.first().cloned())
        .filter(|t| t.is_ground());
    let task_name = task.as_ref().map(|t| t.to_string()).unwrap_or_default();
    let adopted = pick.and_then(|i| {
        find_from(trace, i, |e| {
            belief_added(e, agent, &format!("task_status({task_name}, adopted)"))
        })
    });
    let feasible = adopted.and_then(|i| {
        find_from(trace, i, |e| {
            e.kind == TraceKind::LlmCall && field(e, "kind") == "boolean-query"
        })
    });
    let generate = feasible.and_then(|i| {
        find_from(trace, i, |e| {
            e.kind == TraceKind::LlmCall && field(e, "kind") == "generate"
        })
    });
    let save = generate.and_then(|i| find_from(trace, i, |e| performed(e, agent, "save_code_to_file(")));
    let implemented = save.and_then(|i| {
        find_from(trace, i, |e| {
            belief_added(e, agent, &format!("task_status({task_name}, implemented)"))
        })
    });
    let steps = [
        ("clone_repo", clone),
        ("get_backlog_item binding a task", pick.filter(|_| task.is_some())),
        ("task_status adopted", adopted),
        ("feasibility boolean query", feasible),
        ("ask_LLM generation", generate),
        ("save_code_to_file", save),
        ("task_status implemented", implemented),
    ];
    for (what, at) in &steps {
        if at.is_none() {
            failures.push(format!("no {what} in order"));
        }
    }
    if system.cycle > 200 {
        failures.push(format!("{} cycles > 200", system.cycle));
    }
    if elapsed > Duration::from_secs(5) {
        failures.push(format!("{elapsed:?} > 5s"));
    }
    verdict(
        "fig2_reproduction",
        &failures,
        &format!(
            "evidence at trace rows {:?}, task {task_name}, {} cycles, {elapsed:?}",
            steps.map(|(_, i)| i.unwrap_or(0)),
            system.cycle
        ),
    );
}

#[test]
fn fig3_reproduction() {
    let s = load("figs23_end_to_end");
    let system = run(&s);
    let trace = system.trace.entries();
    let mut failures = Vec::new();

    let request = find_from(trace, 0, |e| {
        e.kind == TraceKind::Message
            && e.agent == "CodingAgent"
            && field(e, "to") == "TestingAgent"
            && field(e, "performative") == "achieve"
            && field(e, "content").starts_with("test(")
    });
    let test_plan = request.and_then(|i| {
        find_from(trace, i, |e| {
            e.kind == TraceKind::PlanSelected && e.agent == "TestingAgent" && field(e, "trigger").starts_with("+!test(")
        })
    });
    if request.is_none() {
        failures.push("no achieve test(..) from CodingAgent to TestingAgent".into());
    }
    if test_plan.is_none() {
        failures.push("TestingAgent never selected a +!test plan after the request".into());
    }
    let coder = system.agent("CodingAgent").unwrap();
    let passed = coder
        .beliefs
        .facts()
        .any(|f| f.predicate == "test_result" && f.args.len() == 2 && f.args[1] == Term::atom("pass"));
    if !passed {
        failures.push("CodingAgent lacks test_result(t, pass)".into());
    }
    let c = system.commitments.iter().find(|c| {
        c.debtor == "TestingAgent"
            && c.creditor == "CodingAgent"
            && c.antecedent.predicate == "pr_submitted"
            && c.consequent.predicate == "test_results_available"
    });
    match c {
        Some(c) if c.state == CState::Satisfied => {}
        Some(c) => failures.push(format!("{} ended {}", c.id, c.state)),
        None => failures.push("no C(TestingAgent, CodingAgent, pr_submitted, test_results_available)".into()),
    }
    let frozen = s.expected.as_ref().and_then(|e| e.digest.clone()).unwrap_or_default();
    let digest = system.trace.digest();
    if digest != frozen {
        failures.push(format!("digest {digest} differs from frozen {frozen}"));
    }
    verdict(
        "fig3_reproduction",
        &failures,
        &format!("commitment satisfied, digest {digest}"),
    );
}

fn final_beliefs(system: &SystemState) -> BTreeMap<String, BTreeSet<String>> {
    system
        .agents()
        .map(|a| (a.name.clone(), a.beliefs.facts().map(|f| f.to_string()).collect()))
        .collect()
}

fn commitment_states(system: &SystemState) -> BTreeMap<String, CState> {
    system.commitments.iter().map(|c| (c.id.clone(), c.state)).collect()
}

#[test]
fn protocol_generation_equivalence() {
    let hand = run(&load("figs23_end_to_end"));
    let generated_scenario = load("protocol_generation");
    let generated = run(&generated_scenario);
    let mut failures = Vec::new();
    let tester = generated_scenario
        .agents
        .iter()
        .find(|a| a.name == "TestingAgent")
        .unwrap();
    if !tester.program().plans.is_empty() {
        failures.push("TestingAgent is not plan-free before generation".into());
    }
    let (a, b) = (final_beliefs(&hand), final_beliefs(&generated));
    for agent in a.keys().chain(b.keys()).collect::<BTreeSet<_>>() {
        let (x, y) = (
            a.get(agent).cloned().unwrap_or_default(),
            b.get(agent).cloned().unwrap_or_default(),
        );
        if x != y {
            let only_hand: Vec<_> = x.difference(&y).collect();
            let only_gen: Vec<_> = y.difference(&x).collect();
            failures.push(format!(
                "{agent}: hand-written only {only_hand:?}, generated only {only_gen:?}"
            ));
        }
    }
    if commitment_states(&hand) != commitment_states(&generated) {
        failures.push(format!(
            "commitments {:?} vs {:?}",
            commitment_states(&hand),
            commitment_states(&generated)
        ));
    }
    let total: usize = a.values().map(BTreeSet::len).sum();
    verdict(
        "protocol_generation_equivalence",
        &failures,
        &format!(
            "{total} final beliefs equal, commitments {:?}",
            commitment_states(&generated)
        ),
    );
}

#[test]
fn three_stage_compliance() {
    let mut failures = Vec::new();

    // Desire stage.
    let goal = run(&load("goal_rejection_store_user_inputs"));
    let rejected = goal.trace.of_kind(TraceKind::NormViolation).any(|e| {
        field(e, "stage") == "desire"
            && e.payload["prevented"] == true
            && field(e, "instance").starts_with("persist_user_inputs(")
    });
    let goal_failed = goal
        .trace
        .of_kind(TraceKind::Step)
        .any(|e| field(e, "outcome") == "goal-failed" && field(e, "goal") == "store_user_inputs(signup_form)");
    let related = goal
        .trace
        .entries()
        .iter()
        .filter(|e| match e.kind {
            TraceKind::Step => {
                let step = field(e, "step");
                step.contains("persist_user_inputs") || step.contains("capture_inputs")
            }
            TraceKind::PlanSelected => field(e, "trigger").contains("store_user_inputs"),
            _ => false,
        })
        .count();
    let env_actions = goal
        .env
        .log()
        .iter()
        .filter(|l| l.contains("persist_user_inputs") || l.contains("capture_inputs"))
        .count();
    if !(rejected && goal_failed) {
        failures.push("store_user_inputs not rejected at the desire stage".into());
    }
    if related + env_actions != 0 {
        failures.push(format!(
            "{related} related trace entries, {env_actions} related environment actions"
        ));
    }

    // Plan stage.
    let plan = run(&load("plan_filtering_api_key"));
    let auth_plans: Vec<&str> = plan
        .trace
        .of_kind(TraceKind::PlanSelected)
        .filter(|e| field(e, "trigger") == "+!implement_authentication")
        .map(|e| if e.payload["plan"] == 0 { "hard-coded" } else { "vault" })
        .collect();
    let hard_coded_steps = plan
        .trace
        .of_kind(TraceKind::Step)
        .filter(|e| field(e, "step").contains("hard_code_api_key"))
        .count();
    let completed = plan
        .trace
        .of_kind(TraceKind::Step)
        .any(|e| field(e, "outcome") == "intention-completed" && field(e, "trigger") == "implement_authentication");
    let implemented = plan
        .agent("CodingAgent")
        .unwrap()
        .beliefs
        .contains(&parse_literal("authentication(implemented)").unwrap());
    if auth_plans.contains(&"hard-coded") || hard_coded_steps != 0 {
        failures.push("hard-coded key plan was selected".into());
    }
    if auth_plans.is_empty() || !completed || !implemented {
        failures.push("compliant plan did not complete implement_authentication".into());
    }

    // Action stage.
    let ip = run(&load("privacy_ip_logging"));
    let violations: Vec<&TraceEntry> = ip
        .trace
        .of_kind(TraceKind::NormViolation)
        .filter(|e| e.payload["prevented"] == false)
        .collect();
    let remedies: Vec<&TraceEntry> = ip
        .trace
        .of_kind(TraceKind::Remedy)
        .filter(|e| e.payload["executed"] == true)
        .collect();
    let injected = violations.iter().all(|v| {
        parse_literal(field(v, "instance"))
            .map(|l| {
                l.predicate == "logged"
                    && matches!(&l.args[..], [Term::Compound(f, a)] if f == "ip_address" && a.len() == 1)
            })
            .unwrap_or(false)
    });
    if violations.len() != 1 || remedies.len() != 1 || !injected {
        failures.push(format!(
            "{} logged(ip_address(_)) violations, {} executed remedies",
            violations.len(),
            remedies.len()
        ));
    } else {
        let (v, r) = (violations[0], remedies[0]);
        let redacts = field(r, "action").contains(field(v, "instance"));
        if v.cycle != r.cycle || r.seq <= v.seq || r.agent != "system" || !redacts {
            failures.push(format!(
                "remedy `{}` at {}.{} does not follow violation at {}.{} in the same remediation phase",
                field(r, "action"),
                r.cycle,
                r.seq,
                v.cycle,
                v.seq
            ));
        }
    }
    if ip.counters.violations != 1 || ip.counters.remedies != 1 || ip.counters.unremedied != 0 {
        failures.push(format!("counters {:?}", ip.counters));
    }
    verdict(
        "three_stage_compliance",
        &failures,
        &format!(
            "desire rejection with 0 related actions; plans chosen {auth_plans:?}; violation and remedy in cycle {}",
            violations.first().map(|v| v.cycle).unwrap_or(0)
        ),
    );
}

/// Hand-written transition semantics the store is checked against.
#[derive(Debug, Clone)]
struct Model {
    id: String,
    debtor: String,
    antecedent: Option<Literal>,
    consequent: Literal,
    deadline: u64,
    state: CState,
    detached_at: u64,
}

const CREDITOR: &str = "y";

fn model_advance(m: &mut Model, bb: &BeliefBase, cycle: u64) -> bool {
    if m.state == CState::Active && m.antecedent.as_ref().is_none_or(|r| bb.contains(r)) {
        m.state = CState::Detached;
        m.detached_at = cycle;
    }
    if m.state == CState::Detached {
        if bb.contains(&m.consequent) {
            m.state = CState::Satisfied;
        } else if cycle - m.detached_at > m.deadline {
            m.state = CState::Violated;
            return true;
        }
    }
    false
}

fn model_cancel(m: &Model, by: &str) -> Option<CState> {
    match (m.state, by == m.debtor) {
        (CState::Active, true) => Some(CState::Cancelled),
        (CState::Detached, true) => Some(CState::Violated),
        (CState::Active, false) => Some(CState::Expired),
        _ => None,
    }
}

/// One randomized sequence. Returns (lapses, remedies) or a description of
/// the first disagreement.
fn lifecycle_sequence(rng: &mut StdRng) -> Result<(usize, usize), String> {
    let mut store = CommitmentStore::new();
    let mut handler = ViolationHandler::new();
    let mut bb = BeliefBase::new();
    let mut models: Vec<Model> = Vec::new();
    let policy: Vec<SecondaryPolicy> = if rng.gen_bool(0.5) {
        vec![SecondaryPolicy {
            applies_to: "*".into(),
            debtor: Some("z".into()),
            creditor: None,
            antecedent: None,
            consequent: None,
            deadline: Some(rng.gen_range(0..=30)),
        }]
    } else {
        Vec::new()
    };
    let n = rng.gen_range(1..=3);
    for k in 0..n {
        let antecedent = if rng.gen_ratio(1, 8) {
            None
        } else {
            Some(parse_literal(&format!("r{k}")).unwrap())
        };
        let consequent = parse_literal(&format!("u{k}")).unwrap();
        let deadline = rng.gen_range(0..=30);
        let id = store
            .create(
                None,
                "x",
                CREDITOR,
                antecedent.clone().unwrap_or_else(|| parse_literal("true").unwrap()),
                consequent.clone(),
                Some(deadline),
                0,
            )
            .map_err(|e| e.to_string())?;
        models.push(Model {
            id,
            debtor: "x".into(),
            antecedent,
            consequent,
            deadline,
            state: CState::Active,
            detached_at: 0,
        });
    }
    let mut lapses = 0;
    let mut remedied: BTreeMap<String, usize> = BTreeMap::new();
    let cycles = rng.gen_range(20..=80);
    for cycle in 0..cycles {
        for k in 0..n {
            for (name, p_assert, p_retract) in [(format!("r{k}"), 0.15, 0.1), (format!("u{k}"), 0.08, 0.1)] {
                let lit = parse_literal(&name).unwrap();
                if rng.gen_bool(p_assert) {
                    bb.assert(lit.clone()).unwrap();
                }
                if rng.gen_bool(p_retract) {
                    bb.retract(&lit);
                }
            }
        }
        if rng.gen_ratio(1, 40) {
            let i = rng.gen_range(0..models.len());
            let by = if rng.gen_bool(0.5) {
                models[i].debtor.clone()
            } else {
                CREDITOR.to_string()
            };
            let expected = model_cancel(&models[i], &by);
            match (store.cancel(&models[i].id, &by, cycle), expected) {
                (Ok(ch), Some(to)) if ch.to == to => models[i].state = to,
                (Err(_), None) => {}
                (got, want) => {
                    return Err(format!(
                        "cancel of {} by {by}: store {got:?}, model {want:?}",
                        models[i].id
                    ))
                }
            }
        }
        store.advance_lifecycle(|name| (name == CREDITOR).then_some(&bb), cycle);
        for m in models.iter_mut() {
            if model_advance(m, &bb, cycle) {
                lapses += 1;
            }
            let got = store.get(&m.id).map(|c| c.state);
            if got != Some(m.state) {
                return Err(format!("cycle {cycle}: {} is {got:?}, model says {}", m.id, m.state));
            }
        }
        // The runtime offers every violated commitment to the handler each cycle.
        let violated: Vec<Model> = models.iter().filter(|m| m.state == CState::Violated).cloned().collect();
        for m in violated {
            if let Some(outcome) = handler.handle_violation(&mut store, &m.id, &policy, "human", cycle) {
                *remedied.entry(m.id.clone()).or_default() += 1;
                if let ViolationOutcome::Secondary(new_id) = outcome {
                    let c = store.get(&new_id).unwrap();
                    models.push(Model {
                        id: new_id.clone(),
                        debtor: c.debtor.clone(),
                        antecedent: m.antecedent.clone(),
                        consequent: m.consequent.clone(),
                        deadline: c.deadline.unwrap(),
                        state: CState::Active,
                        detached_at: 0,
                    });
                }
            }
        }
    }
    store.validate_history()?;
    for h in store.history() {
        if !is_legal(h.from, h.to) || h.from.is_terminal() {
            return Err(format!("illegal {} -> {} for {}", h.from, h.to, h.id));
        }
    }
    for m in models.iter().filter(|m| m.state == CState::Violated) {
        let times = remedied.get(&m.id).copied().unwrap_or(0);
        if times != 1 {
            return Err(format!("{} remedied {times} times", m.id));
        }
    }
    Ok((lapses, remedied.values().sum()))
}

#[test]
fn commitment_lifecycle() {
    let mut rng = StdRng::seed_from_u64(0x5eed_c0de);
    let mut failures = Vec::new();
    let (mut lapses, mut remedies) = (0, 0);
    for i in 0..1000 {
        match lifecycle_sequence(&mut rng) {
            Ok((l, r)) => {
                lapses += l;
                remedies += r;
            }
            Err(e) => failures.push(format!("sequence {i}: {e}")),
        }
    }
    if lapses == 0 {
        failures.push("no deadline ever lapsed; the generator is too weak".into());
    }
    failures.truncate(5);
    verdict(
        "commitment_lifecycle",
        &failures,
        &format!(
            "1000 sequences, 0 illegal transitions, {lapses} lapsed deadlines, {remedies} remedies each fired once"
        ),
    );
}

const CONSTANTS: [&str; 3] = ["a", "b", "c"];
const VARS: [&str; 3] = ["X", "Y", "Z"];

fn atom(pred: usize, args: &[String]) -> String {
    if args.is_empty() {
        format!("p{pred}")
    } else {
        format!("p{pred}({})", args.join(", "))
    }
}

fn pick<'a>(rng: &mut StdRng, from: &[&'a str]) -> &'a str {
    from[rng.gen_range(0..from.len())]
}

/// Arguments drawn from `vars` and the constants, plus the odd wildcard.
fn args(rng: &mut StdRng, arity: usize, vars: &[&str], consts: &[&str], wildcards: bool) -> Vec<String> {
    (0..arity)
        .map(|_| {
            if wildcards && rng.gen_ratio(1, 10) {
                "_".to_string()
            } else if !vars.is_empty() && rng.gen_bool(0.6) {
                pick(rng, vars).to_string()
            } else {
                pick(rng, consts).to_string()
            }
        })
        .collect()
}

fn vars_of(args: &[String]) -> Vec<&'static str> {
    VARS.iter().copied().filter(|v| args.iter().any(|a| a == v)).collect()
}

/// A stratified, non-recursive program: rules for `p{i}` only mention `p{j}`
/// with `j < i`. Rules are range restricted and negation is safe.
fn random_program(rng: &mut StdRng) -> (String, String) {
    let preds = rng.gen_range(1..=5);
    let arity: Vec<usize> = (0..preds).map(|_| rng.gen_range(0..=2)).collect();
    let consts = &CONSTANTS[..rng.gen_range(1..=3)];
    let mut src = String::new();
    for (p, &n) in arity.iter().enumerate() {
        for _ in 0..rng.gen_range(0..=4) {
            src += &format!("{}.\n", atom(p, &args(rng, n, &[], consts, false)));
        }
    }
    if preds > 1 {
        for _ in 0..rng.gen_range(0..=4) {
            let head = rng.gen_range(1..preds);
            let mut body = Vec::new();
            let mut bound: Vec<&str> = Vec::new();
            for _ in 0..rng.gen_range(1..=2) {
                let q = rng.gen_range(0..head);
                let a = args(rng, arity[q], &VARS, consts, true);
                for v in vars_of(&a) {
                    if !bound.contains(&v) {
                        bound.push(v);
                    }
                }
                body.push(atom(q, &a));
            }
            if rng.gen_bool(0.4) {
                let q = rng.gen_range(0..head);
                body.push(format!("not {}", atom(q, &args(rng, arity[q], &bound, consts, true))));
            }
            let h = args(rng, arity[head], &bound, consts, false);
            src += &format!("{} :- {}.\n", atom(head, &h), body.join(" & "));
        }
    }
    let q = rng.gen_range(0..preds);
    let first = args(rng, arity[q], &VARS[..2], consts, true);
    let mut goal = atom(q, &first);
    if rng.gen_bool(0.4) {
        let r = rng.gen_range(0..preds);
        let bound = vars_of(&first);
        let negate = rng.gen_bool(0.5);
        let vars: &[&str] = if negate { &bound } else { &VARS[..2] };
        let lit = atom(r, &args(rng, arity[r], vars, consts, true));
        goal = format!("{goal} & {}{lit}", if negate { "not " } else { "" });
    }
    (src, goal)
}

#[test]
fn logic_core_oracle_equivalence() {
    let mut rng = StdRng::seed_from_u64(0x10_9c);
    let universe: Vec<Term> = CONSTANTS.iter().map(|c| Term::atom(*c)).collect();
    let mut failures = Vec::new();
    let (mut answers, mut with_rules, mut with_negation, mut nonempty) = (0, 0, 0, 0);
    for i in 0..500 {
        let (src, goal_src) = random_program(&mut rng);
        let program =
            parse_agent_source(&src).unwrap_or_else(|e| panic!("generated program {i} does not parse: {e}\n{src}"));
        let goal = parse_conjunction(&goal_src).unwrap();
        let mut bb = BeliefBase::with_rules(program.rules.clone());
        for f in &program.beliefs {
            bb.assert(f.clone()).unwrap();
        }
        let want = ground_query_oracle(&program.beliefs, &program.rules, &goal, &universe).unwrap();
        with_rules += usize::from(!program.rules.is_empty());
        with_negation += usize::from(src.contains("not ") || goal_src.contains("not "));
        nonempty += usize::from(!want.is_empty());
        match engine_answers(&bb, &goal) {
            Ok(got) if got == want => answers += got.len(),
            Ok(got) => failures.push(format!(
                "program {i}: `{goal_src}` engine {got:?}, oracle {want:?}\n{src}"
            )),
            Err(e) => failures.push(format!("program {i}: `{goal_src}` errored: {e}\n{src}")),
        }
    }
    failures.truncate(3);
    verdict(
        "logic_core_oracle_equivalence",
        &failures,
        &format!(
            "500/500 programs agree ({with_rules} with rules, {with_negation} with negation, {nonempty} with answers), {answers} answers in total"
        ),
    );
}

#[test]
fn determinism() {
    let dir = tempfile::tempdir().unwrap();
    let mut failures = Vec::new();
    let all = bundles();
    for b in &all {
        let s = Scenario::load(b).unwrap();
        let mut files = Vec::new();
        for round in 0..2 {
            let path = dir.path().join(format!("{}-{round}.ndjson", s.name));
            std::fs::write(&path, run(&s).trace.to_ndjson()).unwrap();
            files.push(std::fs::read(&path).unwrap());
        }
        if files[0] != files[1] || files[0].is_empty() {
            failures.push(format!("{}: trace files differ", s.name));
        }
    }
    verdict(
        "determinism",
        &failures,
        &format!("{} fixtures, identical trace files", all.len()),
    );
}

fn agent_sources() -> Vec<PathBuf> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(root().join("agents"))
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "asl"))
        .collect();
    files.sort();
    files
}

/// Every text the shipped fixtures feed to a parser.
fn seeds() -> Vec<Vec<u8>> {
    let mut out: Vec<Vec<u8>> = agent_sources().iter().map(|p| std::fs::read(p).unwrap()).collect();
    for b in bundles() {
        let mut files: Vec<PathBuf> = std::fs::read_dir(&b).unwrap().map(|e| e.unwrap().path()).collect();
        files.sort();
        out.extend(files.iter().map(|p| std::fs::read(p).unwrap()));
        out.push(run(&Scenario::load(&b).unwrap()).trace.to_ndjson().into_bytes());
    }
    out
}

const TOKENS: &[&str] = &[
    "(",
    ")",
    "[",
    "]",
    "{",
    "}",
    "\"",
    "'",
    "<-",
    ":-",
    "!",
    "?",
    "+!",
    "-!",
    "+",
    "-",
    "&",
    ";",
    "|",
    ".",
    ",",
    ":",
    "_",
    "not ",
    ".send",
    "tell",
    "achieve",
    "true",
    "X",
    "\\",
    "\n",
    "0",
    "-9999999999999999999999",
    "1e999",
    "\u{7f}",
    "é",
    "\0",
];

fn mutate(rng: &mut StdRng, seeds: &[Vec<u8>]) -> Vec<u8> {
    const LIMIT: usize = 64 * 1024;
    let mut buf = match rng.gen_range(0..10) {
        0 => (0..rng.gen_range(0..512)).map(|_| rng.gen()).collect(),
        1 => {
            let open = ["(", "[", "{", "f("][rng.gen_range(0..4)];
            open.repeat(rng.gen_range(1..LIMIT / open.len())).into_bytes()
        }
        _ => seeds[rng.gen_range(0..seeds.len())].clone(),
    };
    for _ in 0..rng.gen_range(1..=8) {
        let len = buf.len();
        match rng.gen_range(0..6) {
            0 if len > 0 => {
                let i = rng.gen_range(0..len);
                buf[i] ^= 1 << rng.gen_range(0..8);
            }
            1 => {
                let i = rng.gen_range(0..=len);
                buf.insert(i, rng.gen());
            }
            2 if len > 0 => {
                let i = rng.gen_range(0..len);
                let j = rng.gen_range(i..=len.min(i + 64));
                buf.drain(i..j);
            }
            3 if len > 0 => {
                let i = rng.gen_range(0..len);
                let j = rng.gen_range(i..=len.min(i + 256));
                let chunk = buf[i..j].to_vec();
                let at = rng.gen_range(0..=buf.len());
                buf.splice(at..at, chunk);
            }
            4 => {
                let i = rng.gen_range(0..=len);
                let t = TOKENS[rng.gen_range(0..TOKENS.len())].as_bytes();
                buf.splice(i..i, t.iter().copied());
            }
            _ => {
                let other = &seeds[rng.gen_range(0..seeds.len())];
                let cut = rng.gen_range(0..=buf.len());
                let from = rng.gen_range(0..=other.len());
                buf.truncate(cut);
                buf.extend_from_slice(&other[from..]);
            }
        }
    }
    buf.truncate(LIMIT);
    buf
}

/// Feed one input to every parser and decoder. Only the absence of panics
/// matters; errors are the expected outcome for most inputs.
fn parse_everything(text: &str) {
    let _ = parse_agent_source(text);
    let _ = parse_literal(text);
    let _ = parse_term(text);
    let _ = parse_conjunction(text);
    let _ = parse_body(text);
    let _ = NormSet::from_json(text);
    let _ = CommitmentFile::from_json(text);
    let _ = EnvFixture::from_json(text);
    let _ = OracleScript::from_json(text);
    let _ = parse_translation_reply(text);
    let _ = Cassette::parse(text);
    let _ = Trace::parse(text);
    for line in text.lines().take(64) {
        let _ = TraceEntry::parse_line(line);
    }
}

#[test]
fn parser_robustness() {
    let mut failures = Vec::new();
    let sources = agent_sources();
    for path in &sources {
        let text = std::fs::read_to_string(path).unwrap();
        let name = path.file_name().unwrap().to_string_lossy();
        let first = match parse_agent_source(&text) {
            Ok(p) => p,
            Err(e) => {
                failures.push(format!("{name}: {e}"));
                continue;
            }
        };
        let printed = pretty_print(&first);
        match parse_agent_source(&printed) {
            Ok(second) if second == first && pretty_print(&second) == printed => {}
            Ok(_) => failures.push(format!("{name}: round trip changed the program")),
            Err(e) => failures.push(format!("{name}: printed form does not parse: {e}")),
        }
    }

    let seeds = seeds();
    let mut rng = StdRng::seed_from_u64(0xf022);
    let mut panics = 0;
    let mut largest = 0;
    let hook = std::panic::take_hook();
    std::panic::set_hook(Box::new(|_| {}));
    for _ in 0..10_000 {
        let input = mutate(&mut rng, &seeds);
        largest = largest.max(input.len());
        let text = String::from_utf8_lossy(&input).into_owned();
        if catch_unwind(AssertUnwindSafe(|| parse_everything(&text))).is_err() {
            panics += 1;
            if panics <= 3 {
                failures.push(format!(
                    "panic on input starting {:?}",
                    text.chars().take(80).collect::<String>()
                ));
            }
        }
    }
    std::panic::set_hook(hook);
    if panics > 0 {
        failures.push(format!("{panics} of 10000 fuzzed inputs panicked"));
    }
    verdict(
        "parser_robustness",
        &failures,
        &format!(
            "{} agent sources round-trip, 10000 fuzzed inputs (largest {largest} bytes) without a panic",
            sources.len()
        ),
    );
}

#[test]
fn nl_translation_fixture() {
    const UTTERANCE: &str = "I'll review the pull request in the next 24 hours.";
    let s = load("review_commitment_nl");
    let transcript = s.read_transcript().unwrap().expect("bundle ships a transcript");
    let mut failures = Vec::new();
    if !transcript.contains(UTTERANCE) {
        failures.push("transcript does not say the review utterance".into());
    }
    let mut system = s.build(Box::new(s.scripted_oracle())).unwrap();
    let mut out = Vec::new();
    {
        let mut repl = Repl::new(&mut system, &s.human_role).unwrap();
        run_session(&mut repl, transcript.as_bytes(), &mut out).unwrap();
    }
    let out = String::from_utf8(out).unwrap();
    let cph = s.constants.cycles_per_hour;
    let translated = system
        .trace
        .of_kind(TraceKind::LlmCall)
        .any(|e| field(e, "kind") == "translate" && e.agent == "TeamLead");
    if !translated {
        failures.push("no translation oracle call by TeamLead".into());
    }
    let confirmed = system
        .trace
        .entries()
        .iter()
        .any(|e| field(e, "decision") == "confirmed");
    match system.commitments.iter().next() {
        Some(c) => {
            if (c.debtor.as_str(), c.creditor.as_str()) != ("TeamLead", "CodingAgent") {
                failures.push(format!("parties {} -> {}", c.debtor, c.creditor));
            }
            if c.deadline != Some(24 * cph) {
                failures.push(format!("deadline {:?}, want {}", c.deadline, 24 * cph));
            }
            if c.antecedent.predicate != "pr_submitted" {
                failures.push(format!("antecedent {}", c.antecedent));
            }
            if !out.contains(&format!("commitment {} created", c.id)) || !confirmed {
                failures.push("commitment was not confirmed through the session".into());
            }
        }
        None => failures.push(format!("no commitment after the session:\n{out}")),
    }
    verdict(
        "nl_translation_fixture",
        &failures,
        &format!(
            "C(TeamLead, CodingAgent) with deadline 24 h = {} cycles at {cph} cycles/hour",
            24 * cph
        ),
    );
}

use super::*;

const CODING_AGENT: &str = include_str!("../../../../scenarios/agents/coding_agent.asl");
const TESTING_AGENT: &str = include_str!("../../../../scenarios/agents/testing_agent.asl");

fn lit(s: &str) -> Literal {
    parse_literal(s).unwrap()
}

#[test]
fn single_belief_with_string() {
    let p = parse_agent_source(r#"project_url("https://github.com/codebase.git")."#).unwrap();
    assert_eq!(p.beliefs.len(), 1);
    assert_eq!(p.beliefs[0].predicate, "project_url");
    assert_eq!(p.beliefs[0].args, vec![Term::string("https://github.com/codebase.git")]);
    assert!(p.rules.is_empty() && p.plans.is_empty() && p.goals.is_empty());
}

#[test]
fn empty_source_gives_empty_program() {
    let p = parse_agent_source("").unwrap();
    assert!(p.is_empty());
    assert_eq!(pretty_print(&p), "");
    assert!(parse_agent_source("  // just a comment\n").unwrap().is_empty());
}

#[test]
fn prepare_project_plan_structure() {
    let src = "+!prepare_project : project_repo(URL) <-
        clone_repo(URL);
        get_backlog_item(T);
        +current_task(T);
        +task_status(T, adopted).";
    let p = parse_agent_source(src).unwrap();
    let plan = &p.plans[0];
    assert_eq!(plan.trigger, Trigger::GoalAddition(Literal::atom("prepare_project")));
    assert_eq!(plan.context, vec![ContextCond::Lit(lit("project_repo(URL)"))]);
    assert_eq!(plan.body.len(), 4);
    assert_eq!(plan.body[0], PlanStep::ExternalAction(lit("clone_repo(URL)")));
    assert_eq!(plan.body[3], PlanStep::AddBelief(lit("task_status(T, adopted)")));
}

#[test]
fn unterminated_plan_errors_at_end() {
    let src = "+!g : c <- a1;";
    let err = parse_agent_source(src).unwrap_err();
    match err {
        ParseError::Syntax {
            line, column, found, ..
        } => {
            assert_eq!((line, column), (1, src.len() + 1));
            assert_eq!(found, "end of input");
        }
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn coding_agent_source_parses() {
    let p = parse_agent_source(CODING_AGENT).unwrap();
    assert_eq!(p.beliefs.len(), 3);
    assert_eq!(p.beliefs[1], Literal::new("current_task", vec![Term::Wildcard]));
    assert_eq!(p.rules.len(), 2);
    assert_eq!(p.goals, vec![Literal::atom("complete_project")]);
    assert_eq!(p.plans.len(), 3);
    assert_eq!(p.plans.iter().map(|p| p.index).collect::<Vec<_>>(), vec![0, 1, 2]);
    let p3 = &p.plans[2];
    assert_eq!(
        p3.context[2],
        ContextCond::QueryLlm(PromptExpr::new(vec![
            Term::string("Is "),
            Term::var("T"),
            Term::string(" feasible?"),
        ]))
    );
    assert!(matches!(&p3.body[1], PlanStep::AskLlm { result, .. } if result == "GeneratedCode"));
    let p1 = &p.plans[0];
    assert_eq!(p1.context, vec![ContextCond::Lit(Literal::atom("true"))]);
    assert_eq!(p1.body.len(), 4);
}

#[test]
fn testing_agent_source_parses() {
    let p = parse_agent_source(TESTING_AGENT).unwrap();
    assert_eq!(p.plans.len(), 2);
    assert!(
        matches!(&p.plans[0].body[0], PlanStep::InternalAction { name, args } if name == "concat" && args.len() == 4)
    );
    assert_eq!(
        p.plans[1].body[0],
        PlanStep::SendMessage {
            recipient: Term::var("CodingAgent"),
            performative: Performative::Tell,
            content: lit("test_result(T, Result)"),
        }
    );
}

#[test]
fn rule_rendering_and_round_trip() {
    let p = parse_agent_source("h(X) :- a(X) & not b(X).").unwrap();
    let text = pretty_print(&p);
    assert!(text.contains("h(X) :- a(X) & not b(X)."), "{text}");
    assert_eq!(parse_agent_source(&text).unwrap(), p);
}

#[test]
fn shipped_sources_round_trip() {
    for src in [CODING_AGENT, TESTING_AGENT] {
        let p = parse_agent_source(src).unwrap();
        let again = parse_agent_source(&pretty_print(&p)).unwrap();
        assert_eq!(again, p);
    }
}

#[test]
fn range_restriction_is_enforced() {
    let err = parse_agent_source("h(X, Y) :- a(X).").unwrap_err();
    assert!(matches!(err, ParseError::RangeRestriction { ref variable, .. } if variable == "Y"));
    // A variable that only appears under negation does not count.
    let err = parse_agent_source("h(X) :- not a(X).").unwrap_err();
    assert!(matches!(err, ParseError::RangeRestriction { .. }));
}

#[test]
fn ask_result_must_be_fresh() {
    let err = parse_agent_source("+!g(X) <- ask_LLM(\"p\", X).").unwrap_err();
    assert!(matches!(err, ParseError::AskResultBound { ref variable, .. } if variable == "X"));
    let err = parse_agent_source("+!g <- ?a(Y); ask_LLM(\"p\", Y).").unwrap_err();
    assert!(matches!(err, ParseError::AskResultBound { .. }));
}

#[test]
fn negated_beliefs_are_rejected() {
    assert!(matches!(
        parse_agent_source("not p(a)."),
        Err(ParseError::Invalid { .. })
    ));
    assert!(matches!(
        parse_agent_source("+!g <- +not p."),
        Err(ParseError::Invalid { .. })
    ));
}

#[test]
fn unknown_internal_action_is_rejected() {
    assert!(matches!(
        parse_agent_source("+!g <- .frobnicate(1)."),
        Err(ParseError::Invalid { .. })
    ));
}

#[test]
fn reserved_and_quoted_names_survive_printing() {
    let p = parse_agent_source("'query_LLM'(x). 'Foo bar'(\"q\\\"uote\"). p('not', -2.5, 'A').").unwrap();
    let text = pretty_print(&p);
    assert_eq!(parse_agent_source(&text).unwrap(), p, "{text}");
}

#[test]
fn deep_nesting_is_a_structured_error() {
    let depth = 10_000;
    let src = format!("p({}a{}).", "f(".repeat(depth), ")".repeat(depth));
    assert!(matches!(parse_agent_source(&src), Err(ParseError::Invalid { .. })));
}

#[test]
fn replace_and_test_steps() {
    let p = parse_agent_source("+b(X) : true <- -+status(X, done); ?known(X); -old(X); !next.").unwrap();
    let body = &p.plans[0].body;
    assert_eq!(body[0], PlanStep::ReplaceBelief(lit("status(X, done)")));
    assert_eq!(body[1], PlanStep::TestGoal(lit("known(X)")));
    assert_eq!(body[2], PlanStep::RemoveBelief(lit("old(X)")));
    assert_eq!(body[3], PlanStep::SubGoal(Literal::atom("next")));
}

#[test]
fn conjunction_and_body_helpers() {
    assert!(parse_conjunction("true").unwrap().is_empty());
    assert_eq!(parse_conjunction("a(X) & b").unwrap().len(), 2);
    let body = parse_body(".concat(\"a\", T, P); ask_LLM(P, Out); +done(Out)").unwrap();
    assert_eq!(body.len(), 3);
}

#[test]
fn numbers_round_trip() {
    let p = parse_agent_source("n(0, 24, 1.5, -3, 0.30000000000000004).").unwrap();
    assert_eq!(parse_agent_source(&pretty_print(&p)).unwrap(), p);
    assert!(parse_agent_source(&format!("n({}).", "9".repeat(400))).is_err());
}

mod props {
    use super::*;
    use proptest::prelude::*;

    fn ident() -> impl Strategy<Value = String> {
        "[a-z][a-zA-Z0-9_]{0,5}"
    }

    fn var() -> impl Strategy<Value = String> {
        "[A-Z][a-zA-Z0-9_]{0,4}"
    }

    fn term() -> impl Strategy<Value = Term> {
        let leaf = prop_oneof![
            var().prop_map(Term::Var),
            ident().prop_map(Term::Atom),
            "[ -~]{0,8}".prop_map(Term::Str),
            (-1000i32..1000).prop_map(|n| Term::number(n as f64 / 4.0)),
            Just(Term::Wildcard),
        ];
        leaf.prop_recursive(3, 16, 3, |inner| {
            (ident(), prop::collection::vec(inner, 1..3)).prop_map(|(f, args)| Term::Compound(f, args))
        })
    }

    fn literal() -> impl Strategy<Value = Literal> {
        (ident(), prop::collection::vec(term(), 0..3)).prop_map(|(p, args)| Literal::new(p, args))
    }

    fn step() -> impl Strategy<Value = PlanStep> {
        prop_oneof![
            literal().prop_map(PlanStep::ExternalAction),
            literal().prop_map(PlanStep::AddBelief),
            literal().prop_map(PlanStep::RemoveBelief),
            literal().prop_map(PlanStep::SubGoal),
            literal().prop_map(PlanStep::TestGoal),
            (prop::collection::vec(term(), 0..3)).prop_map(|args| PlanStep::InternalAction {
                name: "print".into(),
                args
            }),
            (var(), literal()).prop_map(|(r, c)| PlanStep::SendMessage {
                recipient: Term::Var(r),
                performative: Performative::Tell,
                content: c,
            }),
            prop::collection::vec(term(), 1..3).prop_map(|parts| PlanStep::QueryLlm(PromptExpr::new(parts))),
        ]
    }

    fn plan() -> impl Strategy<Value = Plan> {
        (
            any::<bool>(),
            literal(),
            prop::collection::vec(literal().prop_map(ContextCond::Lit), 0..3),
            prop::collection::vec(step(), 0..4),
        )
            .prop_map(|(goal, l, context, body)| Plan {
                trigger: if goal {
                    Trigger::GoalAddition(l)
                } else {
                    Trigger::BeliefAddition(l)
                },
                context,
                body,
                index: 0,
            })
    }

    fn program() -> impl Strategy<Value = AgentProgram> {
        (
            prop::collection::vec(literal(), 0..4),
            prop::collection::vec(literal(), 0..2),
            prop::collection::vec(plan(), 0..4),
        )
            .prop_map(|(beliefs, goals, plans)| {
                let mut p = AgentProgram {
                    beliefs,
                    goals,
                    ..Default::default()
                };
                plans.into_iter().for_each(|pl| p.push_plan(pl));
                p
            })
    }

    proptest! {
        #[test]
        fn pretty_then_parse_is_identity(p in program()) {
            let text = pretty_print(&p);
            let back = parse_agent_source(&text);
            prop_assert_eq!(back, Ok(p), "{}", text);
        }

        #[test]
        fn parser_is_total(s in "\\PC{0,200}") {
            let _ = parse_agent_source(&s);
        }

        #[test]
        fn parser_is_total_on_token_soup(toks in prop::collection::vec(prop::sample::select(vec![
            "+", "!", "?", "-", ".", ";", ":", ":-", "<-", "&", "(", ")", ",", "p", "X", "_", "\"s\"", "1", ".send", "query_LLM", "ask_LLM", "not", " ", "\n",
        ]), 0..60)) {
            let _ = parse_agent_source(&toks.concat());
        }
    }
}

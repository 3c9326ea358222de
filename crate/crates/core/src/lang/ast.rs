//! Abstract syntax of the agent language.

use std::fmt;
use std::hash::{Hash, Hasher};

/// A numeric constant. Equality and hashing are by bit pattern so that
/// terms can live in hashed sets; `-0.0` and `0.0` are normalised on
/// construction and NaN is rejected by the parser.
#[derive(Debug, Clone, Copy)]
pub struct Number(f64);

impl Number {
    pub fn new(value: f64) -> Self {
        if value == 0.0 {
            Number(0.0)
        } else {
            Number(value)
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl PartialEq for Number {
    fn eq(&self, other: &Self) -> bool {
        self.0.to_bits() == other.0.to_bits()
    }
}

impl Eq for Number {}

impl Hash for Number {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.0.to_bits().hash(state);
    }
}

impl fmt::Display for Number {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// First-order term.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Term {
    Var(String),
    Atom(String),
    Str(String),
    Num(Number),
    Compound(String, Vec<Term>),
    Wildcard,
}

impl Term {
    pub fn var(name: impl Into<String>) -> Self {
        Term::Var(name.into())
    }

    pub fn atom(name: impl Into<String>) -> Self {
        Term::Atom(name.into())
    }

    pub fn string(value: impl Into<String>) -> Self {
        Term::Str(value.into())
    }

    pub fn number(value: f64) -> Self {
        Term::Num(Number::new(value))
    }

    /// Compound term; collapses to an atom when `args` is empty so the
    /// arity-0 case has a single representation.
    pub fn compound(functor: impl Into<String>, args: Vec<Term>) -> Self {
        if args.is_empty() {
            Term::Atom(functor.into())
        } else {
            Term::Compound(functor.into(), args)
        }
    }

    /// No named variables; wildcards count as ground since they never bind.
    pub fn is_ground(&self) -> bool {
        match self {
            Term::Var(_) => false,
            Term::Compound(_, args) => args.iter().all(Term::is_ground),
            _ => true,
        }
    }

    pub fn has_wildcard(&self) -> bool {
        match self {
            Term::Wildcard => true,
            Term::Compound(_, args) => args.iter().any(Term::has_wildcard),
            _ => false,
        }
    }

    pub fn collect_vars<'a>(&'a self, out: &mut Vec<&'a str>) {
        match self {
            Term::Var(name) => {
                if !out.contains(&name.as_str()) {
                    out.push(name);
                }
            }
            Term::Compound(_, args) => args.iter().for_each(|a| a.collect_vars(out)),
            _ => {}
        }
    }

    pub fn occurs(&self, var: &str) -> bool {
        match self {
            Term::Var(name) => name == var,
            Term::Compound(_, args) => args.iter().any(|a| a.occurs(var)),
            _ => false,
        }
    }

    /// Textual value used when a term is spliced into a prompt or
    /// concatenated: strings contribute their contents, everything else
    /// its surface syntax.
    pub fn as_text(&self) -> String {
        match self {
            Term::Str(s) => s.clone(),
            other => other.to_string(),
        }
    }
}

/// A predicate applied to terms, optionally under negation-as-failure.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Literal {
    pub negated: bool,
    pub predicate: String,
    pub args: Vec<Term>,
}

impl Literal {
    pub fn new(predicate: impl Into<String>, args: Vec<Term>) -> Self {
        Literal {
            negated: false,
            predicate: predicate.into(),
            args,
        }
    }

    pub fn atom(predicate: impl Into<String>) -> Self {
        Literal::new(predicate, Vec::new())
    }

    pub fn negate(mut self) -> Self {
        self.negated = !self.negated;
        self
    }

    pub fn arity(&self) -> usize {
        self.args.len()
    }

    pub fn is_true(&self) -> bool {
        !self.negated && self.predicate == "true" && self.args.is_empty()
    }

    pub fn is_ground(&self) -> bool {
        self.args.iter().all(Term::is_ground)
    }

    pub fn has_wildcard(&self) -> bool {
        self.args.iter().any(Term::has_wildcard)
    }

    pub fn vars(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.args.iter().for_each(|a| a.collect_vars(&mut out));
        out
    }

    /// View as a term (the positive form).
    pub fn to_term(&self) -> Term {
        Term::compound(self.predicate.clone(), self.args.clone())
    }

    /// Reinterpret a term as a positive literal. Fails on variables,
    /// strings, numbers and wildcards.
    pub fn from_term(term: &Term) -> Option<Literal> {
        match term {
            Term::Atom(name) => Some(Literal::atom(name.clone())),
            Term::Compound(f, args) => Some(Literal::new(f.clone(), args.clone())),
            _ => None,
        }
    }

    pub fn signature(&self) -> (&str, usize) {
        (&self.predicate, self.args.len())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Rule {
    pub head: Literal,
    pub body: Vec<Literal>,
}

/// Concatenation of terms forming an LLM prompt, written `a + b + c`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PromptExpr {
    pub parts: Vec<Term>,
}

impl PromptExpr {
    pub fn new(parts: Vec<Term>) -> Self {
        PromptExpr { parts }
    }

    pub fn text(value: impl Into<String>) -> Self {
        PromptExpr::new(vec![Term::string(value)])
    }
}

/// One conjunct of a plan context condition.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum ContextCond {
    Lit(Literal),
    QueryLlm(PromptExpr),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Performative {
    Achieve,
    Tell,
    Ask,
}

impl Performative {
    pub fn as_str(self) -> &'static str {
        match self {
            Performative::Achieve => "achieve",
            Performative::Tell => "tell",
            Performative::Ask => "ask",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "achieve" => Some(Performative::Achieve),
            "tell" => Some(Performative::Tell),
            "ask" => Some(Performative::Ask),
            _ => None,
        }
    }
}

impl fmt::Display for Performative {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Internal actions understood by the interpreter.
pub const INTERNAL_ACTIONS: &[&str] = &["concat", "print", "eq", "neq", "lt", "le", "gt", "ge"];

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum PlanStep {
    ExternalAction(Literal),
    InternalAction {
        name: String,
        args: Vec<Term>,
    },
    AddBelief(Literal),
    RemoveBelief(Literal),
    /// `-+b`: remove every belief with b's signature, then add b.
    ReplaceBelief(Literal),
    SubGoal(Literal),
    TestGoal(Literal),
    SendMessage {
        recipient: Term,
        performative: Performative,
        content: Literal,
    },
    QueryLlm(PromptExpr),
    AskLlm {
        prompt: PromptExpr,
        result: String,
    },
}

impl PlanStep {
    /// The literal this step would bring about in the world or the belief
    /// base, used when matching steps against norm consequents.
    pub fn normative_literal(&self) -> Option<&Literal> {
        match self {
            PlanStep::ExternalAction(l)
            | PlanStep::AddBelief(l)
            | PlanStep::ReplaceBelief(l)
            | PlanStep::SubGoal(l) => Some(l),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Trigger {
    GoalAddition(Literal),
    BeliefAddition(Literal),
}

impl Trigger {
    pub fn literal(&self) -> &Literal {
        match self {
            Trigger::GoalAddition(l) | Trigger::BeliefAddition(l) => l,
        }
    }

    pub fn is_goal(&self) -> bool {
        matches!(self, Trigger::GoalAddition(_))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Plan {
    pub trigger: Trigger,
    pub context: Vec<ContextCond>,
    pub body: Vec<PlanStep>,
    /// Position in the plan library; assigned in source order.
    pub index: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AgentProgram {
    /// Set by whoever loads the program; not part of the surface syntax.
    pub name: String,
    pub beliefs: Vec<Literal>,
    pub rules: Vec<Rule>,
    pub plans: Vec<Plan>,
    pub goals: Vec<Literal>,
}

impl AgentProgram {
    pub fn is_empty(&self) -> bool {
        self.beliefs.is_empty() && self.rules.is_empty() && self.plans.is_empty() && self.goals.is_empty()
    }

    /// Append another program's clauses, renumbering its plans after ours.
    pub fn extend(&mut self, other: AgentProgram) {
        self.beliefs.extend(other.beliefs);
        self.rules.extend(other.rules);
        self.goals.extend(other.goals);
        for plan in other.plans {
            self.push_plan(plan);
        }
    }

    pub fn push_plan(&mut self, mut plan: Plan) {
        plan.index = self.plans.len();
        self.plans.push(plan);
    }
}

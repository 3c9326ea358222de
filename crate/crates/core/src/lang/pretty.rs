//! Surface-syntax rendering. Every `Display` here produces text the parser
//! reads back to an equal value.

use std::fmt::{self, Display, Formatter, Write};

use super::ast::*;

const RESERVED: &[&str] = &["not", "query_LLM", "ask_LLM"];

fn plain_ident(name: &str) -> bool {
    let mut chars = name.chars();
    matches!(chars.next(), Some('a'..='z')) && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

fn write_escaped(f: &mut Formatter<'_>, s: &str, delim: char) -> fmt::Result {
    f.write_char(delim)?;
    for c in s.chars() {
        match c {
            '\\' => f.write_str("\\\\")?,
            '\n' => f.write_str("\\n")?,
            '\t' => f.write_str("\\t")?,
            '\r' => f.write_str("\\r")?,
            c if c == delim => {
                f.write_char('\\')?;
                f.write_char(c)?;
            }
            c => f.write_char(c)?,
        }
    }
    f.write_char(delim)
}

struct Name<'a>(&'a str);

impl Display for Name<'_> {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        if plain_ident(self.0) && !RESERVED.contains(&self.0) {
            f.write_str(self.0)
        } else {
            write_escaped(f, self.0, '\'')
        }
    }
}

struct Args<'a>(&'a [Term]);

impl Display for Args<'_> {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return Ok(());
        }
        f.write_char('(')?;
        for (i, a) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{a}")?;
        }
        f.write_char(')')
    }
}

impl Display for Term {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        match self {
            Term::Var(v) => f.write_str(v),
            Term::Atom(a) => write!(f, "{}", Name(a)),
            Term::Str(s) => write_escaped(f, s, '"'),
            Term::Num(n) => write!(f, "{n}"),
            Term::Compound(functor, args) => write!(f, "{}{}", Name(functor), Args(args)),
            Term::Wildcard => f.write_char('_'),
        }
    }
}

impl Display for Literal {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        if self.negated {
            f.write_str("not ")?;
        }
        write!(f, "{}{}", Name(&self.predicate), Args(&self.args))
    }
}

fn conjunction<T: Display>(f: &mut Formatter<'_>, items: &[T]) -> fmt::Result {
    for (i, item) in items.iter().enumerate() {
        if i > 0 {
            f.write_str(" & ")?;
        }
        write!(f, "{item}")?;
    }
    Ok(())
}

impl Display for Rule {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        write!(f, "{} :- ", self.head)?;
        conjunction(f, &self.body)?;
        f.write_char('.')
    }
}

impl Display for PromptExpr {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        for (i, part) in self.parts.iter().enumerate() {
            if i > 0 {
                f.write_str(" + ")?;
            }
            write!(f, "{part}")?;
        }
        Ok(())
    }
}

impl Display for ContextCond {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        match self {
            ContextCond::Lit(l) => write!(f, "{l}"),
            ContextCond::QueryLlm(p) => write!(f, "query_LLM({p})"),
        }
    }
}

impl Display for PlanStep {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        match self {
            PlanStep::ExternalAction(l) => write!(f, "{l}"),
            PlanStep::InternalAction { name, args } => write!(f, ".{name}{}", Args(args)),
            PlanStep::AddBelief(l) => write!(f, "+{l}"),
            PlanStep::RemoveBelief(l) => write!(f, "-{l}"),
            PlanStep::ReplaceBelief(l) => write!(f, "-+{l}"),
            PlanStep::SubGoal(l) => write!(f, "!{l}"),
            PlanStep::TestGoal(l) => write!(f, "?{l}"),
            PlanStep::SendMessage {
                recipient,
                performative,
                content,
            } => write!(f, ".send({recipient}, {performative}, {content})"),
            PlanStep::QueryLlm(p) => write!(f, "query_LLM({p})"),
            PlanStep::AskLlm { prompt, result } => write!(f, "ask_LLM({prompt}, {result})"),
        }
    }
}

impl Display for Trigger {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        match self {
            Trigger::GoalAddition(l) => write!(f, "+!{l}"),
            Trigger::BeliefAddition(l) => write!(f, "+{l}"),
        }
    }
}

impl Display for Plan {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.trigger)?;
        if !self.context.is_empty() {
            f.write_str(" : ")?;
            conjunction(f, &self.context)?;
        }
        if !self.body.is_empty() {
            f.write_str(" <-")?;
            for (i, step) in self.body.iter().enumerate() {
                f.write_str(if i == 0 { "\n    " } else { ";\n    " })?;
                write!(f, "{step}")?;
            }
        }
        f.write_char('.')
    }
}

impl Display for AgentProgram {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        let mut first_section = true;
        let mut section = |f: &mut Formatter<'_>, lines: Vec<String>| -> fmt::Result {
            if lines.is_empty() {
                return Ok(());
            }
            if !first_section {
                f.write_char('\n')?;
            }
            first_section = false;
            for line in lines {
                writeln!(f, "{line}")?;
            }
            Ok(())
        };
        section(f, self.beliefs.iter().map(|b| format!("{b}.")).collect())?;
        section(f, self.rules.iter().map(|r| r.to_string()).collect())?;
        section(f, self.goals.iter().map(|g| format!("!{g}.")).collect())?;
        section(f, self.plans.iter().map(|p| format!("{p}\n")).collect())
    }
}

/// Render a program in the agent language.
pub fn pretty_print(program: &AgentProgram) -> String {
    program.to_string()
}

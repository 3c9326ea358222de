use super::ast::*;
use super::lexer::{tokenize, Spanned, Tok};
use super::ParseError;

/// Maximum nesting of compound terms. Deeper input is rejected rather than
/// risking the parser's stack.
pub const MAX_TERM_DEPTH: usize = 128;

const QUERY_LLM: &str = "query_LLM";
const ASK_LLM: &str = "ask_LLM";

pub(crate) struct Parser {
    toks: Vec<Spanned>,
    pos: usize,
    depth: usize,
}

/// Parse an agent source file.
pub fn parse_agent_source(source: &str) -> Result<AgentProgram, ParseError> {
    let mut p = Parser::new(source)?;
    let mut program = AgentProgram::default();
    while !p.at(&Tok::Eof) {
        p.item(&mut program)?;
    }
    Ok(program)
}

/// Parse a single literal such as `task_status(T, implemented)`.
pub fn parse_literal(source: &str) -> Result<Literal, ParseError> {
    let mut p = Parser::new(source)?;
    let lit = p.literal()?;
    p.finish()?;
    Ok(lit)
}

/// Parse a single term.
pub fn parse_term(source: &str) -> Result<Term, ParseError> {
    let mut p = Parser::new(source)?;
    let t = p.term()?;
    p.finish()?;
    Ok(t)
}

/// Parse a `&`-separated conjunction of literals. `true` yields an empty
/// conjunction.
pub fn parse_conjunction(source: &str) -> Result<Vec<Literal>, ParseError> {
    let mut p = Parser::new(source)?;
    let mut lits = vec![p.literal()?];
    while p.eat(&Tok::Amp) {
        lits.push(p.literal()?);
    }
    p.finish()?;
    lits.retain(|l| !l.is_true());
    Ok(lits)
}

/// Parse a `;`-separated plan body (no trailing `.`).
pub fn parse_body(source: &str) -> Result<Vec<PlanStep>, ParseError> {
    let mut p = Parser {
        toks: tokenize(source, true)?,
        pos: 0,
        depth: 0,
    };
    let body = p.body()?;
    p.finish()?;
    Ok(body)
}

impl Parser {
    pub(crate) fn new(source: &str) -> Result<Self, ParseError> {
        Ok(Parser {
            toks: tokenize(source, false)?,
            pos: 0,
            depth: 0,
        })
    }

    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek_at(&self, offset: usize) -> &Tok {
        let i = (self.pos + offset).min(self.toks.len() - 1);
        &self.toks[i].tok
    }

    fn here(&self) -> (usize, usize) {
        let s = &self.toks[self.pos];
        (s.line, s.column)
    }

    fn at(&self, tok: &Tok) -> bool {
        self.peek() == tok
    }

    fn advance(&mut self) -> Tok {
        let t = self.toks[self.pos].tok.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn eat(&mut self, tok: &Tok) -> bool {
        if self.at(tok) {
            self.advance();
            true
        } else {
            false
        }
    }

    fn error(&self, expected: &[&str]) -> ParseError {
        let (line, column) = self.here();
        ParseError::Syntax {
            line,
            column,
            expected: expected.iter().map(|s| s.to_string()).collect(),
            found: self.peek().describe(),
        }
    }

    fn invalid(&self, line: usize, column: usize, message: impl Into<String>) -> ParseError {
        ParseError::Invalid {
            line,
            column,
            message: message.into(),
        }
    }

    fn expect(&mut self, tok: Tok, what: &str) -> Result<(), ParseError> {
        if self.eat(&tok) {
            Ok(())
        } else {
            Err(self.error(&[what]))
        }
    }

    fn finish(&mut self) -> Result<(), ParseError> {
        if self.at(&Tok::Eof) {
            Ok(())
        } else {
            Err(self.error(&["end of input"]))
        }
    }

    fn item(&mut self, program: &mut AgentProgram) -> Result<(), ParseError> {
        let (line, column) = self.here();
        match self.peek() {
            Tok::Plus => {
                let plan = self.plan()?;
                program.push_plan(plan);
            }
            Tok::Bang => {
                self.advance();
                let goal = self.literal()?;
                if goal.negated {
                    return Err(self.invalid(line, column, "initial goals must be positive"));
                }
                self.expect(Tok::Dot, "`.`")?;
                program.goals.push(goal);
            }
            Tok::Ident(_) | Tok::Quoted(_) => {
                let head = self.literal()?;
                if head.negated {
                    return Err(self.invalid(line, column, "negated literals cannot be stored as beliefs"));
                }
                if self.eat(&Tok::ColonDash) {
                    let mut body = vec![self.literal()?];
                    while self.eat(&Tok::Amp) {
                        body.push(self.literal()?);
                    }
                    self.expect(Tok::Dot, "`.`")?;
                    check_range_restriction(&head, &body, line, column)?;
                    program.rules.push(Rule { head, body });
                } else if self.eat(&Tok::Dot) {
                    program.beliefs.push(head);
                } else {
                    return Err(self.error(&["`.`", "`:-`"]));
                }
            }
            _ => return Err(self.error(&["belief", "rule", "plan", "initial goal"])),
        }
        Ok(())
    }

    fn plan(&mut self) -> Result<Plan, ParseError> {
        self.expect(Tok::Plus, "`+`")?;
        let (line, column) = self.here();
        let goal = self.eat(&Tok::Bang);
        let lit = self.literal()?;
        if lit.negated {
            return Err(self.invalid(line, column, "plan triggers must be positive"));
        }
        let trigger = if goal {
            Trigger::GoalAddition(lit)
        } else {
            Trigger::BeliefAddition(lit)
        };
        let mut context = Vec::new();
        if self.eat(&Tok::Colon) {
            context.push(self.context_cond()?);
            while self.eat(&Tok::Amp) {
                context.push(self.context_cond()?);
            }
        }
        let mut body = Vec::new();
        if self.eat(&Tok::Arrow) {
            body = self.body()?;
        }
        if !self.eat(&Tok::Dot) {
            return Err(if !body.is_empty() {
                self.error(&["`;`", "`.`"])
            } else if !context.is_empty() {
                self.error(&["`&`", "`<-`", "`.`"])
            } else {
                self.error(&["`:`", "`<-`", "`.`"])
            });
        }
        let plan = Plan {
            trigger,
            context,
            body,
            index: 0,
        };
        check_ask_results(&plan, line, column)?;
        Ok(plan)
    }

    fn context_cond(&mut self) -> Result<ContextCond, ParseError> {
        if matches!(self.peek(), Tok::Ident(s) if s == QUERY_LLM) {
            self.advance();
            self.expect(Tok::LParen, "`(`")?;
            let prompt = self.prompt()?;
            self.expect(Tok::RParen, "`)`")?;
            return Ok(ContextCond::QueryLlm(prompt));
        }
        Ok(ContextCond::Lit(self.literal()?))
    }

    fn prompt(&mut self) -> Result<PromptExpr, ParseError> {
        let mut parts = vec![self.term()?];
        while self.eat(&Tok::Plus) {
            parts.push(self.term()?);
        }
        Ok(PromptExpr::new(parts))
    }

    fn body(&mut self) -> Result<Vec<PlanStep>, ParseError> {
        let mut steps = vec![self.step()?];
        while self.eat(&Tok::Semi) {
            steps.push(self.step()?);
        }
        Ok(steps)
    }

    fn positive_literal(&mut self, what: &str) -> Result<Literal, ParseError> {
        let (line, column) = self.here();
        let lit = self.literal()?;
        if lit.negated {
            return Err(self.invalid(line, column, format!("{what} requires a positive literal")));
        }
        Ok(lit)
    }

    fn step(&mut self) -> Result<PlanStep, ParseError> {
        let (line, column) = self.here();
        match self.peek().clone() {
            Tok::Plus => {
                self.advance();
                Ok(PlanStep::AddBelief(self.positive_literal("belief addition")?))
            }
            Tok::Minus => {
                self.advance();
                if self.eat(&Tok::Plus) {
                    Ok(PlanStep::ReplaceBelief(self.positive_literal("belief replacement")?))
                } else {
                    Ok(PlanStep::RemoveBelief(self.positive_literal("belief removal")?))
                }
            }
            Tok::Bang => {
                self.advance();
                Ok(PlanStep::SubGoal(self.positive_literal("a subgoal")?))
            }
            Tok::Question => {
                self.advance();
                Ok(PlanStep::TestGoal(self.literal()?))
            }
            Tok::Internal(name) => {
                self.advance();
                let args = if self.at(&Tok::LParen) {
                    self.args()?
                } else {
                    Vec::new()
                };
                if name == "send" {
                    return self.send(args, line, column);
                }
                if !INTERNAL_ACTIONS.contains(&name.as_str()) {
                    return Err(self.invalid(line, column, format!("unknown internal action `.{name}`")));
                }
                Ok(PlanStep::InternalAction { name, args })
            }
            Tok::Ident(name) if name == QUERY_LLM => {
                self.advance();
                self.expect(Tok::LParen, "`(`")?;
                let prompt = self.prompt()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(PlanStep::QueryLlm(prompt))
            }
            Tok::Ident(name) if name == ASK_LLM => {
                self.advance();
                self.expect(Tok::LParen, "`(`")?;
                let prompt = self.prompt()?;
                self.expect(Tok::Comma, "`,` or `+`")?;
                let result = match self.advance() {
                    Tok::Var(v) => v,
                    _ => {
                        self.pos -= 1;
                        return Err(self.error(&["result variable"]));
                    }
                };
                self.expect(Tok::RParen, "`)`")?;
                Ok(PlanStep::AskLlm { prompt, result })
            }
            Tok::Ident(_) | Tok::Quoted(_) => Ok(PlanStep::ExternalAction(self.positive_literal("an action")?)),
            _ => Err(self.error(&["plan step"])),
        }
    }

    fn send(&mut self, mut args: Vec<Term>, line: usize, column: usize) -> Result<PlanStep, ParseError> {
        if args.len() != 3 {
            return Err(self.invalid(line, column, "`.send` takes (recipient, performative, content)"));
        }
        let content = args.pop().expect("three args");
        let performative = args.pop().expect("three args");
        let recipient = args.pop().expect("three args");
        let performative = match &performative {
            Term::Atom(p) => Performative::parse(p),
            _ => None,
        }
        .ok_or_else(|| self.invalid(line, column, "performative must be achieve, tell or ask"))?;
        let content = Literal::from_term(&content)
            .ok_or_else(|| self.invalid(line, column, "message content must be a literal"))?;
        if matches!(
            recipient,
            Term::Str(_) | Term::Num(_) | Term::Wildcard | Term::Compound(..)
        ) {
            return Err(self.invalid(line, column, "recipient must be an agent name"));
        }
        Ok(PlanStep::SendMessage {
            recipient,
            performative,
            content,
        })
    }

    pub(crate) fn literal(&mut self) -> Result<Literal, ParseError> {
        let negated = matches!(self.peek(), Tok::Ident(s) if s == "not")
            && matches!(self.peek_at(1), Tok::Ident(_) | Tok::Quoted(_));
        if negated {
            self.advance();
        }
        let predicate = match self.peek().clone() {
            Tok::Ident(s) | Tok::Quoted(s) => {
                self.advance();
                s
            }
            _ => return Err(self.error(&["predicate"])),
        };
        let args = if self.at(&Tok::LParen) {
            self.args()?
        } else {
            Vec::new()
        };
        Ok(Literal {
            negated,
            predicate,
            args,
        })
    }

    fn args(&mut self) -> Result<Vec<Term>, ParseError> {
        self.expect(Tok::LParen, "`(`")?;
        self.depth += 1;
        if self.depth > MAX_TERM_DEPTH {
            let (line, column) = self.here();
            return Err(self.invalid(line, column, format!("terms nested deeper than {MAX_TERM_DEPTH}")));
        }
        let mut args = vec![self.term()?];
        while self.eat(&Tok::Comma) {
            args.push(self.term()?);
        }
        self.expect(Tok::RParen, "`,` or `)`")?;
        self.depth -= 1;
        Ok(args)
    }

    pub(crate) fn term(&mut self) -> Result<Term, ParseError> {
        match self.peek().clone() {
            Tok::Var(v) => {
                self.advance();
                Ok(Term::Var(v))
            }
            Tok::Wildcard => {
                self.advance();
                Ok(Term::Wildcard)
            }
            Tok::Str(s) => {
                self.advance();
                Ok(Term::Str(s))
            }
            Tok::Num(n) => {
                self.advance();
                Ok(Term::number(n))
            }
            Tok::Minus if matches!(self.peek_at(1), Tok::Num(_)) => {
                self.advance();
                match self.advance() {
                    Tok::Num(n) => Ok(Term::number(-n)),
                    _ => unreachable!(),
                }
            }
            Tok::Ident(name) | Tok::Quoted(name) => {
                self.advance();
                if self.at(&Tok::LParen) {
                    let args = self.args()?;
                    Ok(Term::Compound(name, args))
                } else {
                    Ok(Term::Atom(name))
                }
            }
            _ => Err(self.error(&["term"])),
        }
    }
}

fn check_range_restriction(head: &Literal, body: &[Literal], line: usize, column: usize) -> Result<(), ParseError> {
    let mut bound = Vec::new();
    for lit in body.iter().filter(|l| !l.negated) {
        lit.args.iter().for_each(|a| a.collect_vars(&mut bound));
    }
    for v in head.vars() {
        if !bound.contains(&v) {
            return Err(ParseError::RangeRestriction {
                line,
                column,
                variable: v.to_string(),
                head: head.to_string(),
            });
        }
    }
    Ok(())
}

fn check_ask_results(plan: &Plan, line: usize, column: usize) -> Result<(), ParseError> {
    let mut seen: Vec<&str> = plan.trigger.literal().vars();
    for c in &plan.context {
        match c {
            ContextCond::Lit(l) => l.args.iter().for_each(|a| a.collect_vars(&mut seen)),
            ContextCond::QueryLlm(p) => p.parts.iter().for_each(|a| a.collect_vars(&mut seen)),
        }
    }
    for step in &plan.body {
        if let PlanStep::AskLlm { prompt, result } = step {
            prompt.parts.iter().for_each(|a| a.collect_vars(&mut seen));
            if seen.contains(&result.as_str()) {
                return Err(ParseError::AskResultBound {
                    line,
                    column,
                    variable: result.clone(),
                });
            }
        }
        step_vars(step, &mut seen);
    }
    Ok(())
}

pub(crate) fn step_vars<'a>(step: &'a PlanStep, out: &mut Vec<&'a str>) {
    let terms: Box<dyn Iterator<Item = &Term>> = match step {
        PlanStep::ExternalAction(l)
        | PlanStep::AddBelief(l)
        | PlanStep::RemoveBelief(l)
        | PlanStep::ReplaceBelief(l)
        | PlanStep::SubGoal(l)
        | PlanStep::TestGoal(l) => Box::new(l.args.iter()),
        PlanStep::InternalAction { args, .. } => Box::new(args.iter()),
        PlanStep::SendMessage { recipient, content, .. } => {
            Box::new(std::iter::once(recipient).chain(content.args.iter()))
        }
        PlanStep::QueryLlm(p) => Box::new(p.parts.iter()),
        PlanStep::AskLlm { prompt, result } => {
            prompt.parts.iter().for_each(|a| a.collect_vars(out));
            if !out.contains(&result.as_str()) {
                out.push(result);
            }
            return;
        }
    };
    terms.for_each(|t| t.collect_vars(out));
}

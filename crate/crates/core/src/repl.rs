//! Human-proxy command loop. Reads one command per line, from a terminal or
//! from a transcript file; both go through [`Repl::execute`].
//!
//! ```text
//! say CodingAgent I'll review the pull request in the next 24 hours.
//! confirm
//! step 3
//! commitments
//! ```

use std::io::{self, BufRead, Write};

use crate::commitment::{CommitmentError, Proposal};
use crate::lang::{parse_literal, Performative};
use crate::runtime::SystemState;

pub const HELP: &str = "\
commands:
  beliefs <agent>              list an agent's beliefs
  intentions <agent>           list an agent's intentions
  tell <to> <literal>          send a tell message as the human proxy
  achieve <to> <literal>       send an achieve message as the human proxy
  say <addressee> <utterance>  translate an instruction into a commitment proposal
  confirm | reject             decide the pending proposal
  step [n]                     advance n cycles (default 1)
  commitments                  list the commitment store
  help                         show this text
  quit                         leave the session";

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ReplError {
    #[error("no registered agent has role `{0}`")]
    NoHumanProxy(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Flow {
    Continue,
    Quit,
}

pub struct Repl<'s> {
    system: &'s mut SystemState,
    human: String,
    pending: Option<Proposal>,
}

impl<'s> Repl<'s> {
    /// Attach to the agent holding `human_role`.
    pub fn new(system: &'s mut SystemState, human_role: &str) -> Result<Self, ReplError> {
        let human = system
            .roster()
            .iter()
            .find(|(name, roles)| name == human_role || roles.iter().any(|r| r == human_role))
            .map(|(name, _)| name.clone())
            .ok_or_else(|| ReplError::NoHumanProxy(human_role.to_string()))?;
        Ok(Repl {
            system,
            human,
            pending: None,
        })
    }

    pub fn human(&self) -> &str {
        &self.human
    }

    pub fn pending(&self) -> Option<&Proposal> {
        self.pending.as_ref()
    }

    pub fn system(&self) -> &SystemState {
        self.system
    }

    pub fn execute(&mut self, line: &str, out: &mut dyn Write) -> io::Result<Flow> {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            return Ok(Flow::Continue);
        }
        let (cmd, rest) = match line.split_once(char::is_whitespace) {
            Some((c, r)) => (c, r.trim()),
            None => (line, ""),
        };
        match cmd {
            "quit" | "exit" => return Ok(Flow::Quit),
            "help" => writeln!(out, "{HELP}")?,
            "beliefs" => match self.system.resolve_party(rest) {
                Some(a) => {
                    for f in a.beliefs.facts() {
                        writeln!(out, "{f}")?;
                    }
                }
                None => writeln!(out, "unknown agent `{rest}`")?,
            },
            "intentions" => match self.system.resolve_party(rest) {
                Some(a) => {
                    if a.intentions.is_empty() {
                        writeln!(out, "no intentions")?;
                    }
                    for i in &a.intentions {
                        let stack: Vec<String> = i.stack.iter().map(|f| f.event.to_string()).collect();
                        writeln!(out, "#{} {:?}: {}", i.id, i.status, stack.join(" > "))?;
                    }
                }
                None => writeln!(out, "unknown agent `{rest}`")?,
            },
            "tell" | "achieve" => self.message(cmd, rest, out)?,
            "say" => self.say(rest, out)?,
            "confirm" | "reject" => self.decide(cmd == "confirm", out)?,
            "step" => {
                let n = if rest.is_empty() { Ok(1) } else { rest.parse::<u64>() };
                match n {
                    Ok(n) => {
                        for _ in 0..n {
                            self.system.step_system();
                        }
                        writeln!(out, "cycle {}", self.system.cycle)?;
                    }
                    Err(_) => writeln!(out, "step takes a cycle count\n{HELP}")?,
                }
            }
            "commitments" => {
                if self.system.commitments.is_empty() {
                    writeln!(out, "no commitments")?;
                }
                for c in self.system.commitments.iter() {
                    let deadline = c.deadline.map(|d| format!(" deadline {d}")).unwrap_or_default();
                    writeln!(
                        out,
                        "{} C({}, {}, {}, {}) {}{deadline}",
                        c.id, c.debtor, c.creditor, c.antecedent, c.consequent, c.state
                    )?;
                }
            }
            _ => writeln!(out, "unknown command `{cmd}`\n{HELP}")?,
        }
        Ok(Flow::Continue)
    }

    fn message(&mut self, cmd: &str, rest: &str, out: &mut dyn Write) -> io::Result<()> {
        let Some((to, text)) = rest.split_once(char::is_whitespace) else {
            return writeln!(out, "usage: {cmd} <to> <literal>");
        };
        let content = match parse_literal(text.trim()) {
            Ok(l) => l,
            Err(e) => return writeln!(out, "bad literal: {e}"),
        };
        let perf = Performative::parse(cmd).expect("tell and achieve are performatives");
        let human = self.human.clone();
        match self.system.send(&human, to, perf, content) {
            Ok(()) => writeln!(out, "sent"),
            Err(e) => writeln!(out, "{e}"),
        }
    }

    fn say(&mut self, rest: &str, out: &mut dyn Write) -> io::Result<()> {
        let (addressee, utterance) = rest.split_once(char::is_whitespace).unwrap_or((rest, ""));
        if addressee.is_empty() {
            return writeln!(out, "usage: say <addressee> <utterance>");
        }
        let human = self.human.clone();
        match self.system.translate(&human, addressee, utterance) {
            Ok(p) => {
                writeln!(out, "proposal: {}", p.describe())?;
                writeln!(out, "confirm or reject?")?;
                self.pending = Some(p);
                Ok(())
            }
            Err(e @ CommitmentError::TranslationRejected { .. }) => {
                self.pending = None;
                writeln!(out, "{e}")
            }
            Err(e) => writeln!(out, "{e}"),
        }
    }

    fn decide(&mut self, accept: bool, out: &mut dyn Write) -> io::Result<()> {
        let Some(p) = self.pending.take() else {
            return writeln!(out, "nothing to confirm");
        };
        let human = self.human.clone();
        match self.system.decide(&human, &p, accept) {
            Ok(Some(id)) => writeln!(out, "commitment {id} created"),
            Ok(None) => writeln!(out, "proposal rejected"),
            Err(e) => writeln!(out, "{e}"),
        }
    }
}

/// Feed every line of `input` to a session until `quit` or end of input.
pub fn run_session(repl: &mut Repl, input: impl BufRead, out: &mut dyn Write) -> io::Result<()> {
    for line in input.lines() {
        if repl.execute(&line?, out)? == Flow::Quit {
            break;
        }
    }
    Ok(())
}

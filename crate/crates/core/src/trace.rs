//! Run traces: one JSON object per line, fields in a fixed order.
//!
//! ```text
//! {"cycle":3,"seq":0,"agent":"CodingAgent","kind":"step","payload":{...}}
//! ```
//!
//! Payload objects have their keys sorted, so identical runs serialize to
//! identical bytes and can be compared by digest.

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TraceKind {
    Percept,
    Event,
    PlanSelected,
    Step,
    BeliefChange,
    Message,
    NormViolation,
    Remedy,
    CommitmentTransition,
    LlmCall,
}

impl TraceKind {
    pub const ALL: [TraceKind; 10] = [
        TraceKind::Percept,
        TraceKind::Event,
        TraceKind::PlanSelected,
        TraceKind::Step,
        TraceKind::BeliefChange,
        TraceKind::Message,
        TraceKind::NormViolation,
        TraceKind::Remedy,
        TraceKind::CommitmentTransition,
        TraceKind::LlmCall,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TraceKind::Percept => "percept",
            TraceKind::Event => "event",
            TraceKind::PlanSelected => "plan-selected",
            TraceKind::Step => "step",
            TraceKind::BeliefChange => "belief-change",
            TraceKind::Message => "message",
            TraceKind::NormViolation => "norm-violation",
            TraceKind::Remedy => "remedy",
            TraceKind::CommitmentTransition => "commitment-transition",
            TraceKind::LlmCall => "llm-call",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.as_str() == s)
    }
}

impl std::fmt::Display for TraceKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceEntry {
    pub cycle: u64,
    /// Position within the cycle.
    pub seq: u64,
    pub agent: String,
    pub kind: TraceKind,
    pub payload: Value,
}

impl TraceEntry {
    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("trace entries always serialize")
    }

    pub fn parse_line(line: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(line)
    }

    pub fn str_field(&self, key: &str) -> Option<&str> {
        self.payload.get(key).and_then(Value::as_str)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trace {
    entries: Vec<TraceEntry>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("trace line {line}: {message}")]
pub struct TraceError {
    pub line: usize,
    pub message: String,
}

impl Trace {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn entries(&self) -> &[TraceEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn push(&mut self, cycle: u64, agent: &str, kind: TraceKind, payload: Value) {
        let seq = match self.entries.last() {
            Some(last) if last.cycle == cycle => last.seq + 1,
            _ => 0,
        };
        self.entries.push(TraceEntry {
            cycle,
            seq,
            agent: agent.to_string(),
            kind,
            payload,
        });
    }

    pub fn of_kind(&self, kind: TraceKind) -> impl Iterator<Item = &TraceEntry> {
        self.entries.iter().filter(move |e| e.kind == kind)
    }

    pub fn to_ndjson(&self) -> String {
        let mut out = String::new();
        for e in &self.entries {
            out.push_str(&e.to_line());
            out.push('\n');
        }
        out
    }

    /// Hex sha256 of the NDJSON serialization.
    pub fn digest(&self) -> String {
        digest_text(&self.to_ndjson())
    }

    pub fn parse(text: &str) -> Result<Self, TraceError> {
        let mut entries = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let e = TraceEntry::parse_line(line).map_err(|e| TraceError {
                line: i + 1,
                message: e.to_string(),
            })?;
            entries.push(e);
        }
        Ok(Trace { entries })
    }
}

pub fn digest_text(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn seq_restarts_each_cycle() {
        let mut t = Trace::new();
        t.push(0, "a", TraceKind::Event, json!({}));
        t.push(0, "a", TraceKind::Step, json!({}));
        t.push(1, "b", TraceKind::Step, json!({}));
        let seqs: Vec<_> = t.entries().iter().map(|e| (e.cycle, e.seq)).collect();
        assert_eq!(seqs, vec![(0, 0), (0, 1), (1, 0)]);
    }

    #[test]
    fn line_layout_and_round_trip() {
        let mut t = Trace::new();
        t.push(
            2,
            "CodingAgent",
            TraceKind::LlmCall,
            json!({"prompt": "Is t1 feasible?", "kind": "boolean-query"}),
        );
        let text = t.to_ndjson();
        assert_eq!(
            text,
            "{\"cycle\":2,\"seq\":0,\"agent\":\"CodingAgent\",\"kind\":\"llm-call\",\"payload\":{\"kind\":\"boolean-query\",\"prompt\":\"Is t1 feasible?\"}}\n"
        );
        assert_eq!(Trace::parse(&text).unwrap(), t);
        assert_eq!(t.digest().len(), 64);
    }

    #[test]
    fn digest_of_empty_trace() {
        assert_eq!(
            Trace::new().digest(),
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
        );
    }

    #[test]
    fn kinds_round_trip() {
        for k in TraceKind::ALL {
            assert_eq!(TraceKind::parse(k.as_str()), Some(k));
            assert_eq!(serde_json::to_value(k).unwrap(), json!(k.as_str()));
        }
    }

    #[test]
    fn malformed_lines_are_located() {
        let err = Trace::parse("{\"cycle\":0,\"seq\":0,\"agent\":\"a\",\"kind\":\"step\",\"payload\":{}}\nnope\n")
            .unwrap_err();
        assert_eq!(err.line, 2);
    }
}

use std::collections::{HashMap, VecDeque};
use std::fs::File;
use std::io::{self, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Oracle, OracleError, OracleKind, OracleRequest, OracleResponse};

/// One recorded call. A `null` response records a refusal.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CassetteEntry {
    pub kind: OracleKind,
    pub prompt: String,
    pub issuer: String,
    pub cycle: u64,
    pub response: Option<OracleResponse>,
}

/// Request/response pairs, stored as one JSON object per line.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Cassette {
    pub entries: Vec<CassetteEntry>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("cassette line {line}: {message}")]
pub struct CassetteError {
    pub line: usize,
    pub message: String,
}

impl Cassette {
    pub fn parse(text: &str) -> Result<Self, CassetteError> {
        let mut entries = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let entry = serde_json::from_str(line).map_err(|e| CassetteError {
                line: i + 1,
                message: e.to_string(),
            })?;
            entries.push(entry);
        }
        Ok(Cassette { entries })
    }

    pub fn load(path: &Path) -> io::Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Cassette::parse(&text).map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))
    }

    pub fn to_ndjson(&self) -> String {
        self.entries.iter().map(|e| entry_line(e) + "\n").collect()
    }
}

fn entry_line(entry: &CassetteEntry) -> String {
    serde_json::to_string(entry).expect("cassette entries always serialize")
}

/// Wraps another oracle and logs every call, appending each line to the
/// cassette file as it happens.
pub struct Recorder<O> {
    inner: O,
    cassette: Cassette,
    sink: Option<File>,
}

impl<O: Oracle> Recorder<O> {
    pub fn in_memory(inner: O) -> Self {
        Recorder {
            inner,
            cassette: Cassette::default(),
            sink: None,
        }
    }

    pub fn to_file(inner: O, path: &Path) -> io::Result<Self> {
        Ok(Recorder {
            inner,
            cassette: Cassette::default(),
            sink: Some(File::create(path)?),
        })
    }

    pub fn cassette(&self) -> &Cassette {
        &self.cassette
    }
}

impl<O: Oracle> Oracle for Recorder<O> {
    fn call(&mut self, request: &OracleRequest) -> Result<OracleResponse, OracleError> {
        let result = self.inner.call(request);
        let response = match &result {
            Ok(r) => Some(r.clone()),
            Err(OracleError::Refusal { .. }) => None,
            // Empty prompts and transport failures are not part of the
            // model's behavior, so they are not recorded.
            Err(_) => return result,
        };
        let entry = CassetteEntry {
            kind: request.kind,
            prompt: request.prompt.clone(),
            issuer: request.issuer.clone(),
            cycle: request.cycle,
            response,
        };
        if let Some(sink) = &mut self.sink {
            writeln!(sink, "{}", entry_line(&entry))
                .and_then(|_| sink.flush())
                .map_err(|e| OracleError::Unavailable(format!("cassette write failed: {e}")))?;
        }
        self.cassette.entries.push(entry);
        result
    }
}

/// Serves recorded responses by (kind, prompt). Repeated identical
/// requests are answered in recording order.
#[derive(Debug, Clone)]
pub struct Replay {
    queues: HashMap<(OracleKind, String), VecDeque<Option<OracleResponse>>>,
}

impl Replay {
    pub fn new(cassette: Cassette) -> Self {
        let mut queues: HashMap<_, VecDeque<_>> = HashMap::new();
        for e in cassette.entries {
            queues.entry((e.kind, e.prompt)).or_default().push_back(e.response);
        }
        Replay { queues }
    }
}

impl Oracle for Replay {
    fn call(&mut self, request: &OracleRequest) -> Result<OracleResponse, OracleError> {
        if request.prompt.is_empty() {
            return Err(OracleError::EmptyPrompt);
        }
        let miss = || OracleError::CassetteMiss {
            kind: request.kind.as_str(),
            prompt: request.prompt.clone(),
        };
        let queue = self
            .queues
            .get_mut(&(request.kind, request.prompt.clone()))
            .ok_or_else(miss)?;
        match queue.pop_front().ok_or_else(miss)? {
            Some(r) => Ok(r),
            None => Err(OracleError::Refusal {
                prompt: request.prompt.clone(),
            }),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{OracleScript, ScriptedOracle};

    fn script() -> ScriptedOracle {
        ScriptedOracle::new(
            OracleScript::refuse_all()
                .with_exact(None, "Is t1 feasible?", OracleResponse::Bool(true))
                .with_exact(None, "Write code", OracleResponse::Text("fn f() {}".into())),
        )
    }

    #[test]
    fn record_then_replay_gives_same_answers() {
        let mut rec = Recorder::in_memory(script());
        let reqs = [
            OracleRequest::new(OracleKind::BooleanQuery, "Is t1 feasible?", "a", 1),
            OracleRequest::new(OracleKind::Generate, "Write code", "a", 2),
            OracleRequest::new(OracleKind::Generate, "unknown", "a", 3),
        ];
        let live: Vec<_> = reqs.iter().map(|r| rec.call(r)).collect();
        let text = rec.cassette().to_ndjson();
        let mut replay = Replay::new(Cassette::parse(&text).unwrap());
        let again: Vec<_> = reqs.iter().map(|r| replay.call(r)).collect();
        assert_eq!(live, again);
    }

    #[test]
    fn mutated_prompt_misses() {
        let mut rec = Recorder::in_memory(script());
        rec.call(&OracleRequest::new(OracleKind::BooleanQuery, "Is t1 feasible?", "a", 1))
            .unwrap();
        let mut replay = Replay::new(rec.cassette().clone());
        let err = replay
            .call(&OracleRequest::new(OracleKind::BooleanQuery, "Is t2 feasible?", "a", 1))
            .unwrap_err();
        assert!(matches!(err, OracleError::CassetteMiss { .. }));
    }

    #[test]
    fn no_calls_records_empty_cassette() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.ndjson");
        let rec = Recorder::to_file(script(), &path).unwrap();
        assert!(rec.cassette().entries.is_empty());
        drop(rec);
        assert_eq!(std::fs::read_to_string(&path).unwrap(), "");
        assert!(Cassette::load(&path).unwrap().entries.is_empty());
    }

    #[test]
    fn file_recording_appends_lines() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.ndjson");
        let mut rec = Recorder::to_file(script(), &path).unwrap();
        rec.call(&OracleRequest::new(OracleKind::Generate, "Write code", "a", 2))
            .unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(
            text,
            "{\"kind\":\"generate\",\"prompt\":\"Write code\",\"issuer\":\"a\",\"cycle\":2,\"response\":\"fn f() {}\"}\n"
        );
    }

    #[test]
    fn bad_lines_report_position() {
        let err = Cassette::parse("\n{}\n").unwrap_err();
        assert_eq!(err.line, 2);
    }
}

use regex::Regex;
use serde::Deserialize;

use super::{Oracle, OracleError, OracleKind, OracleRequest, OracleResponse};

#[derive(Debug, Clone)]
pub enum Matcher {
    Exact(String),
    Pattern(Regex),
}

impl Matcher {
    pub fn matches(&self, prompt: &str) -> bool {
        match self {
            Matcher::Exact(s) => s == prompt,
            Matcher::Pattern(re) => re.is_match(prompt),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ScriptEntry {
    /// Restricts the entry to one request kind; `None` matches any kind.
    pub kind: Option<OracleKind>,
    pub matcher: Matcher,
    pub response: OracleResponse,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum OracleDefault {
    Refuse,
    Fixed(OracleResponse),
}

/// Ordered matcher/response table; the first matching entry answers.
#[derive(Debug, Clone)]
pub struct OracleScript {
    pub entries: Vec<ScriptEntry>,
    pub default: OracleDefault,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEntry {
    #[serde(default)]
    kind: Option<OracleKind>,
    #[serde(default)]
    exact: Option<String>,
    #[serde(default)]
    pattern: Option<String>,
    response: OracleResponse,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum RawDefault {
    Word(String),
    Fixed { fixed: OracleResponse },
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScript {
    #[serde(default)]
    entries: Vec<RawEntry>,
    #[serde(default)]
    default: Option<RawDefault>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{0}")]
pub struct ScriptError(pub String);

impl OracleScript {
    pub fn refuse_all() -> Self {
        OracleScript {
            entries: Vec::new(),
            default: OracleDefault::Refuse,
        }
    }

    pub fn fixed(response: OracleResponse) -> Self {
        OracleScript {
            entries: Vec::new(),
            default: OracleDefault::Fixed(response),
        }
    }

    pub fn with_exact(mut self, kind: Option<OracleKind>, prompt: &str, response: OracleResponse) -> Self {
        self.entries.push(ScriptEntry {
            kind,
            matcher: Matcher::Exact(prompt.to_string()),
            response,
        });
        self
    }

    /// Parse an oracle script document:
    ///
    /// ```json
    /// {"entries": [{"kind": "boolean-query", "exact": "Is t1 feasible?", "response": true},
    ///              {"pattern": "^Write code", "response": "fn main() {}"}],
    ///  "default": "refuse"}
    /// ```
    pub fn from_json(text: &str) -> Result<Self, ScriptError> {
        let raw: RawScript = serde_json::from_str(text).map_err(|e| ScriptError(e.to_string()))?;
        let mut entries = Vec::with_capacity(raw.entries.len());
        for (i, e) in raw.entries.into_iter().enumerate() {
            let matcher = match (e.exact, e.pattern) {
                (Some(s), None) => Matcher::Exact(s),
                (None, Some(p)) => Matcher::Pattern(
                    Regex::new(&p).map_err(|err| ScriptError(format!("entry {i}: bad pattern: {err}")))?,
                ),
                _ => {
                    return Err(ScriptError(format!(
                        "entry {i}: exactly one of `exact` or `pattern` is required"
                    )))
                }
            };
            entries.push(ScriptEntry {
                kind: e.kind,
                matcher,
                response: e.response,
            });
        }
        let default = match raw.default {
            None => OracleDefault::Refuse,
            Some(RawDefault::Word(w)) if w == "refuse" => OracleDefault::Refuse,
            Some(RawDefault::Word(w)) => return Err(ScriptError(format!("unknown default `{w}`"))),
            Some(RawDefault::Fixed { fixed }) => OracleDefault::Fixed(fixed),
        };
        Ok(OracleScript { entries, default })
    }

    pub fn lookup(&self, kind: OracleKind, prompt: &str) -> Option<&OracleResponse> {
        self.entries
            .iter()
            .find(|e| e.kind.is_none_or(|k| k == kind) && e.matcher.matches(prompt))
            .map(|e| &e.response)
            .or(match &self.default {
                OracleDefault::Fixed(r) => Some(r),
                OracleDefault::Refuse => None,
            })
    }
}

#[derive(Debug, Clone)]
pub struct ScriptedOracle {
    script: OracleScript,
}

impl ScriptedOracle {
    pub fn new(script: OracleScript) -> Self {
        ScriptedOracle { script }
    }
}

impl Oracle for ScriptedOracle {
    fn call(&mut self, request: &OracleRequest) -> Result<OracleResponse, OracleError> {
        if request.prompt.is_empty() {
            return Err(OracleError::EmptyPrompt);
        }
        self.script
            .lookup(request.kind, &request.prompt)
            .cloned()
            .ok_or_else(|| OracleError::Refusal {
                prompt: request.prompt.clone(),
            })
    }
}

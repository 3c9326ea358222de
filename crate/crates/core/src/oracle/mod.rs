//! The LLM boundary. Agents reach a language model only through
//! [`Oracle::call`]; tests use [`ScriptedOracle`] or a replayed cassette.

mod cassette;
#[cfg(feature = "live")]
mod live;
mod script;

pub use cassette::{Cassette, CassetteEntry, Recorder, Replay};
#[cfg(feature = "live")]
pub use live::{LiveConfig, LiveOracle};
pub use script::{Matcher, OracleDefault, OracleScript, ScriptEntry, ScriptedOracle};

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum OracleKind {
    #[serde(rename = "boolean-query")]
    BooleanQuery,
    #[serde(rename = "generate")]
    Generate,
    #[serde(rename = "translate")]
    Translate,
}

impl OracleKind {
    pub fn as_str(self) -> &'static str {
        match self {
            OracleKind::BooleanQuery => "boolean-query",
            OracleKind::Generate => "generate",
            OracleKind::Translate => "translate",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OracleRequest {
    pub kind: OracleKind,
    pub prompt: String,
    pub issuer: String,
    pub cycle: u64,
}

impl OracleRequest {
    pub fn new(kind: OracleKind, prompt: impl Into<String>, issuer: impl Into<String>, cycle: u64) -> Self {
        OracleRequest {
            kind,
            prompt: prompt.into(),
            issuer: issuer.into(),
            cycle,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OracleResponse {
    Bool(bool),
    Text(String),
}

impl OracleResponse {
    /// Read the response as a boolean. Text goes through [`extract_yes_no`].
    pub fn as_bool(&self) -> Option<bool> {
        match self {
            OracleResponse::Bool(b) => Some(*b),
            OracleResponse::Text(t) => extract_yes_no(t),
        }
    }

    pub fn into_text(self) -> String {
        match self {
            OracleResponse::Bool(b) => b.to_string(),
            OracleResponse::Text(t) => t,
        }
    }
}

impl std::fmt::Display for OracleResponse {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            OracleResponse::Bool(b) => write!(f, "{b}"),
            OracleResponse::Text(t) => f.write_str(t),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum OracleError {
    #[error("oracle refused prompt {prompt:?}")]
    Refusal { prompt: String },
    #[error("oracle prompt is empty")]
    EmptyPrompt,
    #[error("no cassette entry for {kind} prompt {prompt:?}")]
    CassetteMiss { kind: &'static str, prompt: String },
    #[error("oracle unavailable: {0}")]
    Unavailable(String),
}

pub trait Oracle {
    fn call(&mut self, request: &OracleRequest) -> Result<OracleResponse, OracleError>;
}

impl<O: Oracle + ?Sized> Oracle for Box<O> {
    fn call(&mut self, request: &OracleRequest) -> Result<OracleResponse, OracleError> {
        (**self).call(request)
    }
}

/// Ask a yes/no question. Unreadable answers are refusals.
pub fn query_boolean(oracle: &mut dyn Oracle, request: &OracleRequest) -> Result<bool, OracleError> {
    if request.prompt.is_empty() {
        return Err(OracleError::EmptyPrompt);
    }
    oracle.call(request)?.as_bool().ok_or_else(|| OracleError::Refusal {
        prompt: request.prompt.clone(),
    })
}

pub fn generate(oracle: &mut dyn Oracle, request: &OracleRequest) -> Result<String, OracleError> {
    if request.prompt.is_empty() {
        return Err(OracleError::EmptyPrompt);
    }
    Ok(oracle.call(request)?.into_text())
}

/// A reply counts as yes/no only if its first word, ignoring leading
/// whitespace and case, is `yes` or `no`.
pub fn extract_yes_no(reply: &str) -> Option<bool> {
    let word: String = reply
        .trim_start()
        .chars()
        .take_while(|c| c.is_alphabetic())
        .collect::<String>()
        .to_lowercase();
    match word.as_str() {
        "yes" => Some(true),
        "no" => Some(false),
        _ => None,
    }
}

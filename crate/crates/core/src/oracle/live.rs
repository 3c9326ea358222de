use serde_json::{json, Value};

use super::{Oracle, OracleError, OracleKind, OracleRequest, OracleResponse};

/// Connection settings for an OpenAI-compatible chat completions endpoint.
#[derive(Debug, Clone)]
pub struct LiveConfig {
    pub endpoint: String,
    pub api_key: Option<String>,
    pub model: String,
    pub seed: Option<u64>,
}

impl LiveConfig {
    /// Reads `NMAS_LLM_ENDPOINT`, `NMAS_LLM_API_KEY` and `NMAS_LLM_MODEL`.
    pub fn from_env(seed: Option<u64>) -> Result<Self, OracleError> {
        let endpoint = std::env::var("NMAS_LLM_ENDPOINT")
            .map_err(|_| OracleError::Unavailable("NMAS_LLM_ENDPOINT is not set".into()))?;
        Ok(LiveConfig {
            endpoint,
            api_key: std::env::var("NMAS_LLM_API_KEY").ok(),
            model: std::env::var("NMAS_LLM_MODEL").unwrap_or_else(|_| "gpt-4o-mini".into()),
            seed,
        })
    }
}

pub struct LiveOracle {
    config: LiveConfig,
}

impl LiveOracle {
    pub fn new(config: LiveConfig) -> Self {
        LiveOracle { config }
    }

    fn system_prompt(kind: OracleKind) -> &'static str {
        match kind {
            OracleKind::BooleanQuery => "Answer with yes or no as the first word.",
            OracleKind::Generate => "You are a software engineering assistant. Reply with the requested artifact only.",
            OracleKind::Translate => {
                "Translate the instruction into a commitment. Reply with one JSON object with keys \
                 debtor, creditor, antecedent, consequent, deadline_hours. Antecedent and consequent \
                 are literals such as pr_submitted(T). Use null for deadline_hours when none is given."
            }
        }
    }
}

impl Oracle for LiveOracle {
    fn call(&mut self, request: &OracleRequest) -> Result<OracleResponse, OracleError> {
        if request.prompt.is_empty() {
            return Err(OracleError::EmptyPrompt);
        }
        let mut body = json!({
            "model": self.config.model,
            "messages": [
                {"role": "system", "content": Self::system_prompt(request.kind)},
                {"role": "user", "content": request.prompt},
            ],
        });
        if let Some(seed) = self.config.seed {
            body["seed"] = json!(seed);
        }
        let mut call = ureq::post(&self.config.endpoint);
        if let Some(key) = &self.config.api_key {
            call = call.header("Authorization", &format!("Bearer {key}"));
        }
        let reply: Value = call
            .send_json(&body)
            .map_err(|e| OracleError::Unavailable(e.to_string()))?
            .body_mut()
            .read_json()
            .map_err(|e| OracleError::Unavailable(e.to_string()))?;
        let text = reply["choices"][0]["message"]["content"]
            .as_str()
            .ok_or_else(|| OracleError::Unavailable("reply has no message content".into()))?
            .to_string();
        Ok(OracleResponse::Text(text))
    }
}

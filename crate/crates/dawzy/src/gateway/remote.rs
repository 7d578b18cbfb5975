//! A planner backed by any OpenAI-style `/chat/completions` endpoint.

use std::time::Duration;

use dawzy_core::engine::ProjectStateDoc;
use dawzy_core::planner::{OutcomeKind, PlannerOutcome};
use dawzy_core::script::{parse, Statement};
use dawzy_core::units::UnitRegistry;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::planner::{PlanError, Planner};

const GRAMMAR: &str = include_str!("../../../../docs/edit-script.ebnf");

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Message {
    pub role: String,
    pub content: String,
}

impl Message {
    fn new(role: &str, content: impl Into<String>) -> Self {
        Message { role: role.into(), content: content.into() }
    }
}

/// One chat-completion round trip.
pub trait Completion: Send + Sync {
    fn complete(&self, messages: &[Message]) -> Result<String, String>;
}

#[derive(Debug, Clone)]
pub struct RemoteConfig {
    pub base_url: String,
    pub model: String,
    pub api_key: Option<String>,
    pub timeout: Duration,
}

pub struct HttpCompletion {
    config: RemoteConfig,
    agent: ureq::Agent,
}

impl HttpCompletion {
    pub fn new(config: RemoteConfig) -> Self {
        let agent = ureq::Agent::config_builder().timeout_global(Some(config.timeout)).build().into();
        HttpCompletion { config, agent }
    }
}

impl Completion for HttpCompletion {
    fn complete(&self, messages: &[Message]) -> Result<String, String> {
        let url = format!("{}/chat/completions", self.config.base_url.trim_end_matches('/'));
        let body = json!({ "model": self.config.model, "messages": messages, "temperature": 0 });
        let mut request = self.agent.post(&url);
        if let Some(key) = &self.config.api_key {
            request = request.header("Authorization", &format!("Bearer {key}"));
        }
        let mut response = request.send_json(&body).map_err(|e| e.to_string())?;
        let reply: Value = response.body_mut().read_json().map_err(|e| e.to_string())?;
        reply["choices"][0]["message"]["content"]
            .as_str()
            .map(str::to_owned)
            .ok_or_else(|| format!("response has no message content: {reply}"))
    }
}

pub struct RemotePlanner {
    completion: Box<dyn Completion>,
}

impl RemotePlanner {
    pub fn new(completion: Box<dyn Completion>) -> Self {
        RemotePlanner { completion }
    }

    pub fn http(config: RemoteConfig) -> Self {
        RemotePlanner::new(Box::new(HttpCompletion::new(config)))
    }
}

pub fn system_prompt(doc: &ProjectStateDoc) -> String {
    format!(
        "You control a digital audio workstation session by writing edit scripts.\n\
         To change the session, reply with exactly one fenced code block containing the script, \
         optionally preceded by one sentence explaining the change. To answer a question, reply \
         in plain prose with no code block.\n\
         Track selectors are '#' plus a 0-based index, or a quoted track name. Always give units.\n\n\
         Grammar:\n{GRAMMAR}\n\
         Current session state:\n{}\n",
        doc.to_json()
    )
}

/// A reply split into its first fenced block and the prose around it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Reply {
    pub script: Option<String>,
    pub prose: String,
}

pub fn split_reply(text: &str) -> Reply {
    let Some(open) = text.find("```") else {
        return Reply { script: None, prose: text.trim().to_owned() };
    };
    let after = &text[open + 3..];
    // skip an info string such as ```dzy
    let body_start = after.find('\n').map_or(after.len(), |i| i + 1);
    let body = &after[body_start..];
    let (script, rest) = match body.find("```") {
        Some(close) => (&body[..close], &body[close + 3..]),
        None => (body, ""),
    };
    let prose = format!("{} {}", text[..open].trim(), rest.trim());
    Reply { script: Some(script.trim().to_owned() + "\n"), prose: prose.trim().to_owned() }
}

impl Planner for RemotePlanner {
    fn name(&self) -> &str {
        "remote"
    }

    fn plan(&self, text: &str, doc: &ProjectStateDoc, _: &UnitRegistry) -> Result<PlannerOutcome, PlanError> {
        let mut messages = vec![Message::new("system", system_prompt(doc)), Message::new("user", text)];
        let mut errors = Vec::new();
        for _ in 0..2 {
            let raw = self.completion.complete(&messages).map_err(PlanError::Unavailable)?;
            let reply = split_reply(&raw);
            let Some(script) = reply.script else {
                if errors.is_empty() {
                    return Ok(PlannerOutcome::answer(reply.prose));
                }
                errors.push("reply contained no script block".to_owned());
                break;
            };
            match parse(&script) {
                Ok(parsed) => {
                    let only_hints =
                        !parsed.is_empty() && parsed.statements.iter().all(|s| matches!(s, Statement::UiHint { .. }));
                    return Ok(PlannerOutcome {
                        kind: if only_hints { OutcomeKind::UiHint } else { OutcomeKind::Edit },
                        explanation: reply.prose,
                        script_text: Some(script),
                    });
                }
                Err(e) => {
                    errors.push(e.to_string());
                    messages.push(Message::new("assistant", raw));
                    messages.push(Message::new(
                        "user",
                        format!("That script does not parse: {e}. Reply with one corrected script block."),
                    ));
                }
            }
        }
        Err(PlanError::ScriptRejected { errors })
    }
}

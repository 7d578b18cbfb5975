//! JSON-RPC 2.0 request handling, independent of how bytes arrive.

use std::sync::Arc;

use serde_json::{json, Map, Value};

use super::tools::{descriptors, ToolBackend};

pub const PARSE_ERROR: i64 = -32700;
pub const INVALID_REQUEST: i64 = -32600;
pub const METHOD_NOT_FOUND: i64 = -32601;
pub const INVALID_PARAMS: i64 = -32602;

pub const PROTOCOL_VERSION: &str = "2025-06-18";

pub struct Server {
    tools: Arc<dyn ToolBackend>,
}

fn error(id: Value, code: i64, message: impl Into<String>) -> Value {
    json!({ "jsonrpc": "2.0", "id": id, "error": { "code": code, "message": message.into() } })
}

fn result(id: Value, result: Value) -> Value {
    json!({ "jsonrpc": "2.0", "id": id, "result": result })
}

impl Server {
    pub fn new(tools: Arc<dyn ToolBackend>) -> Self {
        Server { tools }
    }

    /// Handles one message (a request, a notification or a batch) and
    /// returns the serialized reply, if there is one.
    pub fn handle_text(&self, text: &str) -> Option<String> {
        let message: Value = match serde_json::from_str(text) {
            Ok(v) => v,
            Err(e) => return Some(error(Value::Null, PARSE_ERROR, format!("parse error: {e}")).to_string()),
        };
        let reply = match message {
            Value::Array(batch) if batch.is_empty() => Some(error(Value::Null, INVALID_REQUEST, "empty batch")),
            Value::Array(batch) => {
                let replies: Vec<Value> = batch.into_iter().filter_map(|m| self.handle(m)).collect();
                (!replies.is_empty()).then_some(Value::Array(replies))
            }
            single => self.handle(single),
        };
        reply.map(|v| v.to_string())
    }

    /// Handles one request object; `None` for notifications.
    pub fn handle(&self, message: Value) -> Option<Value> {
        let Value::Object(mut obj) = message else {
            return Some(error(Value::Null, INVALID_REQUEST, "request must be an object"));
        };
        let id = match obj.remove("id") {
            None => None,
            Some(id @ (Value::Null | Value::Number(_) | Value::String(_))) => Some(id),
            Some(_) => return Some(error(Value::Null, INVALID_REQUEST, "id must be a string, number or null")),
        };
        let reply_id = id.clone().unwrap_or(Value::Null);
        if obj.get("jsonrpc").and_then(Value::as_str) != Some("2.0") {
            return Some(error(reply_id, INVALID_REQUEST, "jsonrpc must be \"2.0\""));
        }
        let Some(Value::String(method)) = obj.remove("method") else {
            return Some(error(reply_id, INVALID_REQUEST, "method must be a string"));
        };
        let params = match obj.remove("params") {
            None => Value::Object(Map::new()),
            Some(p @ (Value::Object(_) | Value::Array(_))) => p,
            Some(_) => return Some(error(reply_id, INVALID_REQUEST, "params must be an object or array")),
        };
        let outcome = self.dispatch(&method, params);
        // notifications never get a reply, not even an error
        let id = id?;
        Some(match outcome {
            Ok(value) => result(id, value),
            Err((code, message)) => error(id, code, message),
        })
    }

    fn dispatch(&self, method: &str, params: Value) -> Result<Value, (i64, String)> {
        match method {
            "initialize" => Ok(json!({
                "protocolVersion": PROTOCOL_VERSION,
                "serverInfo": { "name": "dawzy", "version": env!("CARGO_PKG_VERSION") },
                "capabilities": { "tools": { "listChanged": false } },
            })),
            "ping" => Ok(json!({})),
            m if m.starts_with("notifications/") => Ok(Value::Null),
            "tools/list" => Ok(json!({
                "tools": descriptors()
                    .into_iter()
                    .map(|d| json!({ "name": d.name, "description": d.description, "inputSchema": d.input_schema }))
                    .collect::<Vec<_>>(),
            })),
            "tools/call" => {
                let Value::Object(mut p) = params else {
                    return Err((INVALID_PARAMS, "params must be an object".into()));
                };
                let Some(Value::String(name)) = p.remove("name") else {
                    return Err((INVALID_PARAMS, "params.name must be a string".into()));
                };
                let args = match p.remove("arguments") {
                    None => Value::Object(Map::new()),
                    Some(a @ Value::Object(_)) => a,
                    Some(_) => return Err((INVALID_PARAMS, "params.arguments must be an object".into())),
                };
                self.tools.call(&name, args).map(|r| r.to_wire()).map_err(|e| (INVALID_PARAMS, e.to_string()))
            }
            other => Err((METHOD_NOT_FOUND, format!("method not found: {other}"))),
        }
    }
}

//! Session server for the dawzy edit engine: the shared host, the JSON-RPC
//! tool server, the planner gateway with its HTTP API, and the task battery.

pub mod eval;
pub mod gateway;
pub mod host;
pub mod http;
pub mod mcp;

use std::sync::Arc;

pub use gateway::Gateway;
pub use host::Host;
pub use mcp::Tools;

/// Host, tools, and a gateway over them, wired together.
pub fn stack(
    host: Arc<Host>,
    planner: Box<dyn gateway::Planner>,
    transcripts: Option<gateway::transcript::TranscriptLog>,
) -> (Arc<Tools>, Arc<Gateway>) {
    let tools = Arc::new(Tools::new(Arc::clone(&host)));
    let mut gateway = Gateway::new(tools.clone(), host, planner);
    if let Some(log) = transcripts {
        gateway = gateway.with_transcripts(log);
    }
    (tools, Arc::new(gateway))
}

/// Everything the HTTP router needs, from a host and a planner.
pub fn app_state(
    host: Arc<Host>,
    planner: Box<dyn gateway::Planner>,
    transcripts: Option<gateway::transcript::TranscriptLog>,
) -> http::AppState {
    let (tools, gateway) = stack(Arc::clone(&host), planner, transcripts);
    http::AppState { gateway, tools, host }
}

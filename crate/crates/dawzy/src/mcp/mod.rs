//! The tool server: a registry of six tools behind JSON-RPC 2.0.

pub mod protocol;
pub mod tools;
pub mod transport;

pub use protocol::Server;
pub use tools::{descriptors, InvalidParams, ToolBackend, ToolDescriptor, ToolResult, Tools};

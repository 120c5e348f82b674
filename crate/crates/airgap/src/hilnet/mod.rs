//! Remote inference over TCP: the simulator sends observations, a server on
//! the target compute answers with greedy actions and its compute time.

pub mod client;
pub mod protocol;
pub mod server;

pub use client::{Client, RemoteInference};
pub use protocol::{Message, ProtocolError, WireAction};
pub use server::{infer_local, Server};

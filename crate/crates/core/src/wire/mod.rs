//! Attaching out-of-process scorers over a line-delimited JSON protocol.
//!
//! Tensors travel as base64 of raw little-endian `f32` and scores as JSON
//! numbers printed with round-trip precision, so a scorer served over the
//! wire returns bit-identical values to the same scorer in process.

mod client;
mod protocol;
mod server;

pub use client::{connect_external_oracle, Transport, WireOracle, DEFAULT_TIMEOUT};
pub use protocol::{Handshake, OracleRequest, OracleResponse, PROTOCOL};
pub use server::{serve_connection, serve_stdio, serve_tcp, spawn_tcp_server};

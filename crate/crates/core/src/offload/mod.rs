//! Latency models, placement, wire protocol, client and local-cloud server.

mod client;
mod endpoint;
mod estimate;
mod placement;
pub mod protocol;
mod server;
mod service;

use thiserror::Error;

pub use client::{offload_call, OffloadClient, OffloadResponse};
pub use endpoint::{Endpoint, EndpointKind, LatencyModel, LatencyTolerances, Transport};
pub use estimate::{compare_energy, estimate_policy, EnergyComparison, PolicyEstimate};
pub use placement::{decide_placement, decide_placement_for, Candidate, Placement, PlacementPlan, OFFLOADABLE};
pub use protocol::{decode_message, encode_message, ProtocolError, WireLabel, WireMessage};
pub use server::{serve_connection, serve_offload, OffloadServer};
pub use service::{handle_request, image_tensor, OffloadModels, SHAPE_NET_FILE, SPEECH_MODEL_FILE};

use crate::runtime::RuntimeError;

#[derive(Debug, Error)]
pub enum OffloadError {
    #[error("invalid offload configuration: {0}")]
    Config(String),
    #[error("model loading failed: {0}")]
    Models(String),
    #[error("transport error: {0}")]
    Transport(String),
    #[error("protocol error: {0}")]
    Protocol(#[from] ProtocolError),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("bind failed: {0}")]
    Bind(String),
    #[error(transparent)]
    Runtime(#[from] RuntimeError),
}

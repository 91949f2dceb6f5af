pub mod config;
pub mod geometry;
pub mod offload;
pub mod par;
pub mod rng;
pub mod runtime;
pub mod sensors;
pub mod slam;
pub mod speech;
pub mod vision;

//! Virtual-time integration of the three services on modeled CPU/GPU lanes.

mod control;
mod deadlines;
mod resources;
mod scenario;
mod scheduler;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use control::{
    navigation_step, react_to_labels, Action, ActionRecord, ChassisCommand, Controller, NavParams, ReactionRule,
};
pub use deadlines::{check_deadlines, latency_summary, DeadlineSpec, LatencySummary, Violation, ViolationKind};
pub use resources::{
    battery_life_hours, combined_utilization, power_draw, Contention, DeviceModel, PowerBreakdown, PowerSplit,
    ProfileTable, ResourceProfile, Utilization,
};
pub use scenario::{
    run_scenario, run_scenario_with, write_chassis_log, write_trace_csv, CommandRecord, LabelRecord, LaneReport,
    RunOptions, RunOutcome, RunReport, ServiceReport, SlamReport, StageReport, StreamCounts, TRACE_HEADER,
};
pub use scheduler::{LaneConfig, PushOutcome, Scheduler, StageId, WorkItem};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ServiceId {
    Slam,
    Vision,
    Speech,
}

impl ServiceId {
    pub const ALL: [ServiceId; 3] = [ServiceId::Slam, ServiceId::Vision, ServiceId::Speech];

    pub fn name(self) -> &'static str {
        match self {
            ServiceId::Slam => "slam",
            ServiceId::Vision => "vision",
            ServiceId::Speech => "speech",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LaneKind {
    Cpu,
    Gpu,
    /// In-flight offload requests. Never occupies CPU or GPU slots.
    Net,
}

impl LaneKind {
    pub fn name(self) -> &'static str {
        match self {
            LaneKind::Cpu => "cpu",
            LaneKind::Gpu => "gpu",
            LaneKind::Net => "net",
        }
    }

    fn index(self) -> usize {
        self as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DropPolicy {
    /// FIFO; arrivals beyond the capacity are dropped.
    Queue,
    /// Holds only the newest waiting item.
    LatestOnly,
}

fn default_capacity() -> usize {
    256
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StageSpec {
    pub service: ServiceId,
    pub name: String,
    pub lane: LaneKind,
    pub cost_ms: f64,
    pub drop_policy: DropPolicy,
    #[serde(default = "default_capacity")]
    pub queue_capacity: usize,
}

impl StageSpec {
    pub fn new(service: ServiceId, name: &str, lane: LaneKind, cost_ms: f64, drop_policy: DropPolicy) -> Self {
        Self { service, name: name.into(), lane, cost_ms, drop_policy, queue_capacity: default_capacity() }
    }

    pub fn cost_ns(&self) -> u64 {
        ms_to_ns(self.cost_ms)
    }

    pub fn validate(&self) -> Result<(), RuntimeError> {
        let what = format!("stages.{}.{}", self.service.name(), self.name);
        if !(self.cost_ms > 0.0 && self.cost_ms.is_finite()) {
            return Err(RuntimeError::Config(format!("{what}.cost_ms must be positive, got {}", self.cost_ms)));
        }
        if self.queue_capacity == 0 {
            return Err(RuntimeError::Config(format!("{what}.queue_capacity must be at least 1")));
        }
        Ok(())
    }
}

pub(crate) fn ms_to_ns(ms: f64) -> u64 {
    (ms * 1e6).round() as u64
}

/// One executed stage invocation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskRecord {
    pub service: ServiceId,
    pub stage: String,
    pub seq: u64,
    pub lane: LaneKind,
    /// Sensor emission time of the item this task belongs to.
    pub origin_ns: u64,
    pub enqueue_ns: u64,
    pub start_ns: u64,
    pub end_ns: u64,
    /// Last stage of its service chain; end − origin is the end-to-end latency.
    pub terminal: bool,
}

impl TaskRecord {
    pub fn latency_ns(&self) -> u64 {
        self.end_ns - self.origin_ns
    }
}

#[derive(Debug, Error)]
pub enum RuntimeError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("unknown service: {0}")]
    UnknownService(String),
    #[error("model loading failed: {0}")]
    Model(String),
    #[error("sensor setup failed: {0}")]
    Sensor(String),
    #[error("slam failure: {0}")]
    Slam(String),
}

use serde::{Deserialize, Serialize};

use super::{RuntimeError, ServiceId, TaskRecord};

/// Latency and throughput requirement for one service. Without `stage`
/// the service's terminal stage is checked.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeadlineSpec {
    pub service: ServiceId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stage: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_latency_ms: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_rate_hz: Option<f64>,
}

impl DeadlineSpec {
    pub fn validate(&self) -> Result<(), RuntimeError> {
        let what = format!("deadlines.{}", self.service.name());
        if self.max_latency_ms.is_none() && self.min_rate_hz.is_none() {
            return Err(RuntimeError::Config(format!("{what} sets neither max_latency_ms nor min_rate_hz")));
        }
        for (n, v) in [("max_latency_ms", self.max_latency_ms), ("min_rate_hz", self.min_rate_hz)] {
            if let Some(v) = v {
                if !(v > 0.0 && v.is_finite()) {
                    return Err(RuntimeError::Config(format!("{what}.{n} must be positive, got {v}")));
                }
            }
        }
        Ok(())
    }

    fn covers(&self, r: &TaskRecord) -> bool {
        r.service == self.service
            && match &self.stage {
                Some(s) => r.stage == *s,
                None => r.terminal,
            }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ViolationKind {
    Latency { seq: u64, latency_ms: f64, limit_ms: f64 },
    Throughput { achieved_hz: f64, required_hz: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub service: ServiceId,
    pub stage: String,
    #[serde(flatten)]
    pub kind: ViolationKind,
}

/// Items finishing within the window, per second.
pub(crate) fn achieved_rate(records: &[&TaskRecord], duration_ns: u64) -> f64 {
    if duration_ns == 0 {
        return 0.0;
    }
    records.iter().filter(|r| r.end_ns <= duration_ns).count() as f64 / (duration_ns as f64 * 1e-9)
}

/// One violation per late item and one per unmet throughput requirement.
pub fn check_deadlines(records: &[TaskRecord], specs: &[DeadlineSpec], duration_ns: u64) -> Vec<Violation> {
    let mut out = Vec::new();
    for spec in specs {
        let mine: Vec<&TaskRecord> = records.iter().filter(|r| spec.covers(r)).collect();
        let stage_name = |fallback: Option<&&TaskRecord>| {
            spec.stage.clone().or_else(|| fallback.map(|r| r.stage.clone())).unwrap_or_default()
        };
        if let Some(limit) = spec.max_latency_ms {
            for r in &mine {
                let latency_ms = r.latency_ns() as f64 / 1e6;
                if latency_ms > limit {
                    out.push(Violation {
                        service: spec.service,
                        stage: r.stage.clone(),
                        kind: ViolationKind::Latency { seq: r.seq, latency_ms, limit_ms: limit },
                    });
                }
            }
        }
        if let Some(req) = spec.min_rate_hz {
            let achieved = achieved_rate(&mine, duration_ns);
            if achieved < req {
                out.push(Violation {
                    service: spec.service,
                    stage: stage_name(mine.first()),
                    kind: ViolationKind::Throughput { achieved_hz: achieved, required_hz: req },
                });
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LatencySummary {
    pub count: usize,
    pub p50_ms: f64,
    pub p95_ms: f64,
    pub max_ms: f64,
}

/// Nearest-rank percentiles of end-to-end latency.
pub fn latency_summary<'a>(records: impl IntoIterator<Item = &'a TaskRecord>) -> LatencySummary {
    let mut l: Vec<u64> = records.into_iter().map(|r| r.latency_ns()).collect();
    if l.is_empty() {
        return LatencySummary::default();
    }
    l.sort_unstable();
    let rank = |q: f64| l[((q * l.len() as f64).ceil() as usize).clamp(1, l.len()) - 1] as f64 / 1e6;
    LatencySummary { count: l.len(), p50_ms: rank(0.5), p95_ms: rank(0.95), max_ms: *l.last().unwrap() as f64 / 1e6 }
}

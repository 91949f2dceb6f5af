use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::OffloadError;
use crate::rng::XorShift64Star;
use crate::runtime::ServiceId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EndpointKind {
    Local,
    LanCloud,
    WanCloud,
}

impl EndpointKind {
    pub fn name(self) -> &'static str {
        match self {
            EndpointKind::Local => "Local",
            EndpointKind::LanCloud => "LanCloud",
            EndpointKind::WanCloud => "WanCloud",
        }
    }

    pub fn is_cloud(self) -> bool {
        self != EndpointKind::Local
    }
}

/// Round trip = fixed + processing ± uniform jitter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatencyModel {
    pub fixed_ms: f64,
    pub processing_ms: f64,
    #[serde(default)]
    pub jitter_ms: f64,
}

impl LatencyModel {
    pub fn worst_case_ms(&self) -> f64 {
        self.fixed_ms + self.processing_ms + self.jitter_ms
    }

    pub fn best_case_ms(&self) -> f64 {
        (self.fixed_ms + self.processing_ms - self.jitter_ms).max(0.0)
    }

    pub fn sample_ms(&self, rng: &mut XorShift64Star) -> f64 {
        let j = if self.jitter_ms > 0.0 { rng.uniform(-self.jitter_ms, self.jitter_ms) } else { 0.0 };
        (self.fixed_ms + self.processing_ms + j).max(0.0)
    }

    pub fn validate(&self) -> Result<(), String> {
        if [self.fixed_ms, self.processing_ms, self.jitter_ms].iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err("latencies must be finite and non-negative".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Transport {
    #[default]
    Simulated,
    Socket,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Endpoint {
    pub name: String,
    pub kind: EndpointKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub address: Option<String>,
    #[serde(default)]
    pub transport: Transport,
    #[serde(default)]
    pub services: BTreeMap<ServiceId, LatencyModel>,
    #[serde(default)]
    pub seed: u64,
}

impl Endpoint {
    pub fn local() -> Self {
        Self {
            name: "local".into(),
            kind: EndpointKind::Local,
            address: None,
            transport: Transport::Simulated,
            services: BTreeMap::new(),
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<(), OffloadError> {
        let bad = |m: String| Err(OffloadError::Config(format!("endpoint {}: {m}", self.name)));
        if self.name.is_empty() {
            return bad("empty name".into());
        }
        match (self.kind, &self.address, self.transport) {
            (EndpointKind::Local, Some(_), _) => return bad("local endpoint takes no address".into()),
            (k, None, Transport::Socket) if k.is_cloud() => return bad("socket transport needs an address".into()),
            _ => {}
        }
        for (s, m) in &self.services {
            if let Err(e) = m.validate() {
                return bad(format!("{}: {e}", s.name()));
            }
        }
        Ok(())
    }
}

/// Largest acceptable end-to-end latency per service.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LatencyTolerances {
    pub slam_ms: f64,
    pub vision_ms: f64,
    pub speech_ms: f64,
}

impl Default for LatencyTolerances {
    fn default() -> Self {
        Self { slam_ms: 5.0, vision_ms: 100.0, speech_ms: 500.0 }
    }
}

impl LatencyTolerances {
    pub fn get(&self, s: ServiceId) -> f64 {
        match s {
            ServiceId::Slam => self.slam_ms,
            ServiceId::Vision => self.vision_ms,
            ServiceId::Speech => self.speech_ms,
        }
    }

    pub fn set(&mut self, s: ServiceId, v: f64) {
        match s {
            ServiceId::Slam => self.slam_ms = v,
            ServiceId::Vision => self.vision_ms = v,
            ServiceId::Speech => self.speech_ms = v,
        }
    }

    pub fn validate(&self) -> Result<(), OffloadError> {
        for s in ServiceId::ALL {
            if !(self.get(s) > 0.0) {
                return Err(OffloadError::Config(format!("tolerance for {} must be positive", s.name())));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lan_vision_is_exactly_100ms() {
        let m = LatencyModel { fixed_ms: 20.0, processing_ms: 80.0, jitter_ms: 0.0 };
        let mut rng = XorShift64Star::new(1);
        assert_eq!(m.sample_ms(&mut rng), 100.0);
        assert_eq!(m.worst_case_ms(), 100.0);
    }

    #[test]
    fn wan_within_two_to_five_seconds() {
        let m = LatencyModel { fixed_ms: 2000.0, processing_ms: 1500.0, jitter_ms: 1500.0 };
        let mut rng = XorShift64Star::new(9);
        for _ in 0..1000 {
            let v = m.sample_ms(&mut rng);
            assert!((2000.0..=5000.0).contains(&v));
        }
    }
}

//! Per-service endpoint choice under latency tolerances.

use serde::{Deserialize, Serialize};

use super::{Endpoint, EndpointKind, LatencyTolerances};
use crate::runtime::ServiceId;

/// One (service, endpoint) evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub service: ServiceId,
    pub endpoint: String,
    pub kind: EndpointKind,
    pub worst_case_ms: f64,
    pub tolerance_ms: f64,
    pub passes: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Placement {
    pub service: ServiceId,
    pub endpoint: String,
    pub kind: EndpointKind,
    pub rationale: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlacementPlan {
    pub placements: Vec<Placement>,
    pub candidates: Vec<Candidate>,
}

impl PlacementPlan {
    pub fn get(&self, s: ServiceId) -> Option<&Placement> {
        self.placements.iter().find(|p| p.service == s)
    }

    pub fn kind(&self, s: ServiceId) -> EndpointKind {
        self.get(s).map_or(EndpointKind::Local, |p| p.kind)
    }

    pub fn is_offloaded(&self, s: ServiceId) -> bool {
        self.kind(s).is_cloud()
    }

    /// Every service placed locally.
    pub fn all_local(services: &[ServiceId]) -> Self {
        Self {
            placements: services
                .iter()
                .map(|&s| Placement {
                    service: s,
                    endpoint: "local".into(),
                    kind: EndpointKind::Local,
                    rationale: "forced local".into(),
                })
                .collect(),
            candidates: Vec::new(),
        }
    }
}

/// Services with a remote implementation. Offloading them always saves
/// local energy.
pub const OFFLOADABLE: [ServiceId; 2] = [ServiceId::Vision, ServiceId::Speech];

/// Chooses, per service, a cloud endpoint whose worst-case latency meets
/// the tolerance, otherwise Local. Among qualifying clouds the lowest
/// worst-case latency wins, then list order. Services outside
/// [`OFFLOADABLE`] are evaluated for the table but always stay Local.
pub fn decide_placement(tolerances: &LatencyTolerances, endpoints: &[Endpoint]) -> PlacementPlan {
    decide_placement_for(&ServiceId::ALL, tolerances, endpoints)
}

pub fn decide_placement_for(
    services: &[ServiceId],
    tolerances: &LatencyTolerances,
    endpoints: &[Endpoint],
) -> PlacementPlan {
    let mut placements = Vec::new();
    let mut candidates = Vec::new();
    let local_name = endpoints
        .iter()
        .find(|e| e.kind == EndpointKind::Local)
        .map_or_else(|| "local".to_string(), |e| e.name.clone());
    for &s in services {
        let tol = tolerances.get(s);
        let mut best: Option<(&Endpoint, f64)> = None;
        for e in endpoints.iter().filter(|e| e.kind.is_cloud()) {
            let Some(m) = e.services.get(&s) else { continue };
            let wc = m.worst_case_ms();
            let passes = wc <= tol;
            candidates.push(Candidate {
                service: s,
                endpoint: e.name.clone(),
                kind: e.kind,
                worst_case_ms: wc,
                tolerance_ms: tol,
                passes,
            });
            if passes && OFFLOADABLE.contains(&s) && best.map_or(true, |(_, b)| wc < b) {
                best = Some((e, wc));
            }
        }
        placements.push(match best {
            Some((e, wc)) => Placement {
                service: s,
                endpoint: e.name.clone(),
                kind: e.kind,
                rationale: format!("worst case {wc} ms within {tol} ms; remote execution saves local energy"),
            },
            None => Placement {
                service: s,
                endpoint: local_name.clone(),
                kind: EndpointKind::Local,
                rationale: if !OFFLOADABLE.contains(&s) {
                    "no remote implementation".into()
                } else if candidates.iter().any(|c| c.service == s) {
                    format!("no remote endpoint meets {tol} ms")
                } else {
                    "no remote endpoint offers this service".into()
                },
            },
        });
    }
    PlacementPlan { placements, candidates }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::offload::LatencyModel;
    use std::collections::BTreeMap;

    fn cloud(name: &str, kind: EndpointKind, models: &[(ServiceId, f64, f64, f64)]) -> Endpoint {
        Endpoint {
            name: name.into(),
            kind,
            address: None,
            transport: Default::default(),
            services: models
                .iter()
                .map(|&(s, f, p, j)| (s, LatencyModel { fixed_ms: f, processing_ms: p, jitter_ms: j }))
                .collect::<BTreeMap<_, _>>(),
            seed: 0,
        }
    }

    #[test]
    fn slam_stays_local_vision_goes_lan() {
        let lan = cloud(
            "lan",
            EndpointKind::LanCloud,
            &[(ServiceId::Slam, 20.0, 80.0, 0.0), (ServiceId::Vision, 20.0, 80.0, 0.0), (ServiceId::Speech, 20.0, 180.0, 0.0)],
        );
        let wan = cloud("wan", EndpointKind::WanCloud, &[(ServiceId::Vision, 2000.0, 1500.0, 1500.0)]);
        let p = decide_placement(&LatencyTolerances::default(), &[Endpoint::local(), lan, wan]);
        assert_eq!(p.kind(ServiceId::Slam), EndpointKind::Local);
        assert_eq!(p.kind(ServiceId::Vision), EndpointKind::LanCloud);
        assert_eq!(p.kind(ServiceId::Speech), EndpointKind::LanCloud);
    }

    #[test]
    fn slam_never_leaves_the_device() {
        let fast = cloud("fast", EndpointKind::LanCloud, &[(ServiceId::Slam, 0.5, 0.5, 0.0)]);
        let p = decide_placement(&LatencyTolerances::default(), &[Endpoint::local(), fast]);
        assert_eq!(p.kind(ServiceId::Slam), EndpointKind::Local);
        assert!(p.candidates[0].passes);
    }

    #[test]
    fn wan_only_keeps_everything_local() {
        let wan = cloud(
            "wan",
            EndpointKind::WanCloud,
            &[(ServiceId::Vision, 2000.0, 1500.0, 1500.0), (ServiceId::Speech, 2000.0, 1500.0, 1500.0)],
        );
        let p = decide_placement(&LatencyTolerances::default(), &[Endpoint::local(), wan]);
        assert!(ServiceId::ALL.iter().all(|&s| p.kind(s) == EndpointKind::Local));
    }
}

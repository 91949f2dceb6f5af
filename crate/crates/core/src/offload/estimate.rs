use serde::{Deserialize, Serialize};

use super::{OffloadError, PlacementPlan};
use crate::runtime::{battery_life_hours, DeviceModel, PowerBreakdown, ServiceId, Utilization};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolicyEstimate {
    pub power_w: f64,
    pub cpu_pct: f64,
    pub gpu_pct: f64,
    pub mem_pct: f64,
    pub battery_hours: f64,
    pub power: PowerBreakdown,
}

/// Power, utilization and battery life of a placement, using client-side
/// profiles for offloaded services.
pub fn estimate_policy(plan: &PlacementPlan, device: &DeviceModel, battery_wh: f64) -> Result<PolicyEstimate, OffloadError> {
    let active: Vec<(ServiceId, bool)> = plan.placements.iter().map(|p| (p.service, p.kind.is_cloud())).collect();
    let (u, power): (Utilization, PowerBreakdown) = device.evaluate(&active)?;
    Ok(PolicyEstimate {
        power_w: power.total_w,
        cpu_pct: u.cpu_pct,
        gpu_pct: u.gpu_pct,
        mem_pct: u.mem_pct,
        battery_hours: battery_life_hours(power.total_w, battery_wh)?,
        power,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyComparison {
    pub all_local: PolicyEstimate,
    pub plan: PolicyEstimate,
    pub battery_ratio: f64,
}

/// The plan against running the same services locally.
pub fn compare_energy(plan: &PlacementPlan, device: &DeviceModel, battery_wh: f64) -> Result<EnergyComparison, OffloadError> {
    let services: Vec<ServiceId> = plan.placements.iter().map(|p| p.service).collect();
    let all_local = estimate_policy(&PlacementPlan::all_local(&services), device, battery_wh)?;
    let planned = estimate_policy(plan, device, battery_wh)?;
    Ok(EnergyComparison { all_local, plan: planned, battery_ratio: planned.battery_hours / all_local.battery_hours })
}

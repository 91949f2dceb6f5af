//! Utilization, power and battery models over per-service profiles.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{RuntimeError, ServiceId};

/// Power contribution of one service, split by component.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PowerSplit {
    pub cpu_w: f64,
    pub gpu_w: f64,
    pub other_w: f64,
}

impl PowerSplit {
    pub fn total(&self) -> f64 {
        self.cpu_w + self.gpu_w + self.other_w
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResourceProfile {
    pub cpu_pct: f64,
    pub gpu_pct: f64,
    pub mem_pct: f64,
    pub power: PowerSplit,
}

impl ResourceProfile {
    pub fn validate(&self, what: &str) -> Result<(), RuntimeError> {
        for (name, v) in [("cpu_pct", self.cpu_pct), ("gpu_pct", self.gpu_pct), ("mem_pct", self.mem_pct)] {
            if !(0.0..=100.0).contains(&v) {
                return Err(RuntimeError::Config(format!("{what}.{name} = {v} is outside [0, 100]")));
            }
        }
        let p = self.power;
        if [p.cpu_w, p.gpu_w, p.other_w].iter().any(|w| !(*w >= 0.0)) {
            return Err(RuntimeError::Config(format!("{what}.power has a negative or invalid entry")));
        }
        Ok(())
    }
}

/// Local and client-side (offloaded) profiles per service.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileTable {
    pub local: BTreeMap<ServiceId, ResourceProfile>,
    #[serde(default)]
    pub offloaded: BTreeMap<ServiceId, ResourceProfile>,
}

impl ProfileTable {
    pub fn validate(&self) -> Result<(), RuntimeError> {
        for (s, p) in &self.local {
            p.validate(&format!("profiles.local.{}", s.name()))?;
        }
        for (s, p) in &self.offloaded {
            p.validate(&format!("profiles.offloaded.{}", s.name()))?;
        }
        Ok(())
    }

    /// Profile in effect for a service under its placement.
    pub fn get(&self, service: ServiceId, offloaded: bool) -> Result<&ResourceProfile, RuntimeError> {
        let table = if offloaded { &self.offloaded } else { &self.local };
        table.get(&service).ok_or_else(|| {
            RuntimeError::UnknownService(format!(
                "no {} profile for {}",
                if offloaded { "offloaded" } else { "local" },
                service.name()
            ))
        })
    }
}

/// Per-resource contention discount applied when several services share
/// the device.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Contention {
    pub cpu: f64,
    pub gpu: f64,
    pub mem: f64,
}

impl Default for Contention {
    fn default() -> Self {
        Self { cpu: 60.0 / 74.0, gpu: 1.0, mem: 1.0 }
    }
}

/// Everything needed to turn a set of active services into utilization and
/// power figures.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeviceModel {
    pub profiles: ProfileTable,
    #[serde(default)]
    pub contention: Contention,
    pub idle_power_w: f64,
}

impl DeviceModel {
    pub fn validate(&self) -> Result<(), RuntimeError> {
        self.profiles.validate()?;
        if !(self.idle_power_w >= 0.0) {
            return Err(RuntimeError::Config(format!("idle_power_w = {} must be non-negative", self.idle_power_w)));
        }
        for (n, g) in [("cpu", self.contention.cpu), ("gpu", self.contention.gpu), ("mem", self.contention.mem)] {
            if !(g > 0.0) {
                return Err(RuntimeError::Config(format!("contention.{n} = {g} must be positive")));
            }
        }
        Ok(())
    }

    /// Utilization and power for services given as (service, offloaded).
    pub fn evaluate(&self, active: &[(ServiceId, bool)]) -> Result<(Utilization, PowerBreakdown), RuntimeError> {
        let profiles = active
            .iter()
            .map(|&(s, off)| self.profiles.get(s, off).copied())
            .collect::<Result<Vec<_>, _>>()?;
        Ok((
            combined_utilization(&profiles, &self.contention),
            power_draw(active, &self.profiles, self.idle_power_w)?,
        ))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Utilization {
    pub cpu_pct: f64,
    pub gpu_pct: f64,
    pub mem_pct: f64,
}

/// Sum of active profiles, discounted by γ when two or more are active,
/// clamped to 100.
pub fn combined_utilization(active: &[ResourceProfile], gamma: &Contention) -> Utilization {
    let g = if active.len() >= 2 { *gamma } else { Contention { cpu: 1.0, gpu: 1.0, mem: 1.0 } };
    let sum = |f: fn(&ResourceProfile) -> f64| active.iter().map(f).sum::<f64>();
    Utilization {
        cpu_pct: (sum(|p| p.cpu_pct) * g.cpu).min(100.0),
        gpu_pct: (sum(|p| p.gpu_pct) * g.gpu).min(100.0),
        mem_pct: (sum(|p| p.mem_pct) * g.mem).min(100.0),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerBreakdown {
    pub total_w: f64,
    pub idle_w: f64,
    pub cpu_w: f64,
    pub gpu_w: f64,
    pub other_w: f64,
}

/// Idle draw plus each active service's contribution under its placement.
pub fn power_draw(
    active: &[(ServiceId, bool)],
    profiles: &ProfileTable,
    idle_w: f64,
) -> Result<PowerBreakdown, RuntimeError> {
    let mut b = PowerBreakdown { total_w: idle_w, idle_w, cpu_w: 0.0, gpu_w: 0.0, other_w: 0.0 };
    for &(s, off) in active {
        let p = profiles.get(s, off)?.power;
        b.cpu_w += p.cpu_w;
        b.gpu_w += p.gpu_w;
        b.other_w += p.other_w;
        b.total_w += p.total();
    }
    Ok(b)
}

pub fn battery_life_hours(power_w: f64, battery_wh: f64) -> Result<f64, RuntimeError> {
    if !(power_w > 0.0) {
        return Err(RuntimeError::Config(format!("power must be positive, got {power_w} W")));
    }
    Ok(battery_wh / power_w)
}

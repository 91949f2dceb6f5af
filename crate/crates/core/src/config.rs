//! Scenario files: one JSON document per run, `"schema": 1`, unknown keys
//! rejected.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::offload::{Endpoint, EndpointKind, LatencyTolerances, Transport};
use crate::runtime::{DeadlineSpec, DeviceModel, LaneConfig, LaneKind, NavParams, ReactionRule, ServiceId, StageSpec};
use crate::sensors::{AudioParams, CameraModel, ImuErrorModel, LandmarkSpec, Motion, ScriptedWord, TrajectorySpec};
use crate::slam::SlamParams;
use crate::vision::shapes::ShapeKind;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
    #[error("{0}")]
    Parse(String),
    #[error("{field}: {message}")]
    Invalid { field: String, message: String },
}

fn invalid<T>(field: impl Into<String>, message: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError::Invalid { field: field.into(), message: message.into() })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrajectoryConfig {
    pub motion: Motion,
    #[serde(default = "one")]
    pub speed_limit: f64,
    #[serde(default)]
    pub landmarks: LandmarkSpec,
}

fn one() -> f64 {
    1.0
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SensorToggles {
    pub imu: bool,
    pub camera: bool,
    pub microphone: bool,
}

impl Default for SensorToggles {
    fn default() -> Self {
        Self { imu: true, camera: true, microphone: true }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SlamServiceConfig {
    pub enabled: bool,
    pub params: SlamParams,
}

/// An object in view of the camera over `[from_s, to_s)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneObject {
    pub from_s: f64,
    pub to_s: f64,
    pub object: ShapeKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VisionServiceConfig {
    pub enabled: bool,
    pub scene: Vec<SceneObject>,
    /// Top-label score needed for a detection to be logged.
    pub report_threshold: f64,
}

impl Default for VisionServiceConfig {
    fn default() -> Self {
        Self { enabled: false, scene: Vec::new(), report_threshold: 0.9 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpeechServiceConfig {
    pub enabled: bool,
    pub script: Vec<ScriptedWord>,
    pub audio: AudioParams,
    /// Chunk RMS above which audio counts as voiced.
    pub vad_rms: f64,
}

impl Default for SpeechServiceConfig {
    fn default() -> Self {
        Self { enabled: false, script: Vec::new(), audio: AudioParams::default(), vad_rms: 1500.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServicesConfig {
    pub slam: SlamServiceConfig,
    pub vision: VisionServiceConfig,
    pub speech: SpeechServiceConfig,
}

impl ServicesConfig {
    pub fn enabled(&self, s: ServiceId) -> bool {
        match s {
            ServiceId::Slam => self.slam.enabled,
            ServiceId::Vision => self.vision.enabled,
            ServiceId::Speech => self.speech.enabled,
        }
    }

    pub fn enabled_list(&self) -> Vec<ServiceId> {
        ServiceId::ALL.into_iter().filter(|&s| self.enabled(s)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NavigationConfig {
    pub goal: Option<[f64; 2]>,
    pub params: NavParams,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputPaths {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub report: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trace: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub chassis_log: Option<String>,
}

fn default_battery() -> f64 {
    24.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub schema: u32,
    #[serde(default)]
    pub description: String,
    pub seed: u64,
    pub duration_s: f64,
    pub trajectory: TrajectoryConfig,
    #[serde(default)]
    pub imu: ImuErrorModel,
    #[serde(default)]
    pub camera: CameraModel,
    #[serde(default)]
    pub sensors: SensorToggles,
    #[serde(default)]
    pub services: ServicesConfig,
    #[serde(default)]
    pub lanes: LaneConfig,
    #[serde(default)]
    pub stages: Vec<StageSpec>,
    pub device: DeviceModel,
    #[serde(default)]
    pub tolerances: LatencyTolerances,
    #[serde(default)]
    pub deadlines: Vec<DeadlineSpec>,
    #[serde(default)]
    pub endpoints: Vec<Endpoint>,
    /// Explicit service → endpoint choices; absent means automatic placement.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub placement: Option<BTreeMap<ServiceId, String>>,
    #[serde(default)]
    pub navigation: NavigationConfig,
    #[serde(default)]
    pub reactions: Vec<ReactionRule>,
    #[serde(default = "default_battery")]
    pub battery_wh: f64,
    /// When false only timing is simulated: no rendering, inference or decoding.
    #[serde(default = "yes")]
    pub execute_models: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub models_dir: Option<String>,
    #[serde(default)]
    pub outputs: OutputPaths,
    /// Directory relative paths are resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

/// Stage names each locally placed service must define.
pub fn required_stages(s: ServiceId) -> &'static [&'static str] {
    match s {
        ServiceId::Slam => &["propagate", "frontend", "backend"],
        ServiceId::Vision => &["preprocess", "cnn"],
        ServiceId::Speech => &["recognize"],
    }
}

impl ScenarioConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let cfg: ScenarioConfig = serde_json::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::Io { path: path.display().to_string(), message: e.to_string() })?;
        let mut cfg = Self::from_json(&text)?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn duration_ns(&self) -> u64 {
        (self.duration_s * 1e9).round() as u64
    }

    pub fn trajectory_spec(&self) -> TrajectorySpec {
        TrajectorySpec {
            motion: self.trajectory.motion.clone(),
            duration_s: self.duration_s,
            seed: self.seed,
            speed_limit: self.trajectory.speed_limit,
            landmarks: self.trajectory.landmarks.clone(),
        }
    }

    pub fn resolve(&self, p: &str) -> PathBuf {
        let p = Path::new(p);
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn models_path(&self) -> Option<PathBuf> {
        self.models_dir.as_deref().map(|d| self.resolve(d))
    }

    pub fn endpoint(&self, name: &str) -> Option<&Endpoint> {
        self.endpoints.iter().find(|e| e.name == name)
    }

    pub fn stage(&self, s: ServiceId, name: &str) -> Option<&StageSpec> {
        self.stages.iter().find(|st| st.service == s && st.name == name)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.schema != SCHEMA_VERSION {
            return invalid("schema", format!("expected {SCHEMA_VERSION}, got {}", self.schema));
        }
        if !(self.duration_s > 0.0 && self.duration_s.is_finite()) {
            return invalid("duration_s", format!("must be positive, got {}", self.duration_s));
        }
        if !(self.battery_wh > 0.0 && self.battery_wh.is_finite()) {
            return invalid("battery_wh", format!("must be positive, got {}", self.battery_wh));
        }
        self.trajectory_spec().validate().or_else(|e| invalid("trajectory", e.to_string()))?;
        self.imu.validate().or_else(|e| invalid("imu", e.to_string()))?;
        if self.camera.width == 0 || self.camera.height == 0 || !(self.camera.focal_px > 0.0) || !(self.camera.baseline_m > 0.0) {
            return invalid("camera", "width, height, focal_px and baseline_m must be positive");
        }
        self.services.slam.params.validate().or_else(|e| invalid("services.slam.params", e.to_string()))?;
        if !(0.0..=1.0).contains(&self.services.vision.report_threshold) {
            return invalid("services.vision.report_threshold", "must be in [0, 1]");
        }
        for (i, o) in self.services.vision.scene.iter().enumerate() {
            if !(o.from_s >= 0.0 && o.to_s > o.from_s) {
                return invalid(format!("services.vision.scene[{i}]"), "needs 0 <= from_s < to_s");
            }
        }
        let sp = &self.services.speech;
        for (i, w) in sp.script.iter().enumerate() {
            if !crate::speech::is_word(&w.word) {
                return invalid(format!("services.speech.script[{i}].word"), format!("unknown word {:?}", w.word));
            }
            if !(w.at_s >= 0.0 && w.at_s < self.duration_s) {
                return invalid(format!("services.speech.script[{i}].at_s"), "must lie within the scenario");
            }
        }
        if !(sp.vad_rms > 0.0) {
            return invalid("services.speech.vad_rms", "must be positive");
        }
        if self.lanes.cpu_slots == 0 || self.lanes.gpu_slots == 0 {
            return invalid("lanes", "slot counts must be at least 1");
        }
        let mut seen = BTreeSet::new();
        for st in &self.stages {
            let field = format!("stages.{}.{}", st.service.name(), st.name);
            if !seen.insert((st.service, st.name.clone())) {
                return invalid(field, "defined twice");
            }
            if !required_stages(st.service).contains(&st.name.as_str()) {
                return invalid(field, format!("unknown stage; expected one of {:?}", required_stages(st.service)));
            }
            if st.lane == LaneKind::Net {
                return invalid(format!("{field}.lane"), "net is reserved for offloaded services");
            }
            st.validate().or_else(|e| invalid(field, e.to_string()))?;
        }
        self.device.validate().or_else(|e| invalid("device", e.to_string()))?;
        self.tolerances.validate().or_else(|e| invalid("tolerances", e.to_string()))?;
        for d in &self.deadlines {
            d.validate().or_else(|e| invalid("deadlines", e.to_string()))?;
        }
        let mut names = BTreeSet::new();
        for (i, e) in self.endpoints.iter().enumerate() {
            if !names.insert(e.name.as_str()) {
                return invalid(format!("endpoints[{i}].name"), format!("duplicate endpoint {:?}", e.name));
            }
            e.validate().or_else(|err| invalid(format!("endpoints[{i}]"), err.to_string()))?;
            if e.transport == Transport::Socket && !self.execute_models {
                return invalid(format!("endpoints[{i}].transport"), "socket endpoints need execute_models");
            }
        }
        if let Some(p) = &self.placement {
            for (s, name) in p {
                let field = format!("placement.{}", s.name());
                if name == "local" {
                    continue;
                }
                match self.endpoint(name) {
                    None => return invalid(field, format!("no endpoint named {name:?}")),
                    Some(e) if e.kind == EndpointKind::Local => {}
                    Some(e) if !e.services.contains_key(s) => {
                        return invalid(field, format!("endpoint {name:?} does not offer {}", s.name()))
                    }
                    Some(_) if !crate::offload::OFFLOADABLE.contains(s) => {
                        return invalid(field, format!("{} cannot be offloaded", s.name()))
                    }
                    Some(_) => {}
                }
            }
        }
        if self.navigation.goal.is_some() && !self.services.slam.enabled {
            return invalid("navigation.goal", "navigation needs services.slam enabled");
        }
        for s in self.services.enabled_list() {
            if self.device.profiles.local.get(&s).is_none() {
                return invalid(format!("device.profiles.local.{}", s.name()), "missing profile for an enabled service");
            }
        }
        if self.execute_models
            && (self.services.vision.enabled || self.services.speech.enabled)
            && self.models_dir.is_none()
        {
            return invalid("models_dir", "required when vision or speech models are executed");
        }
        Ok(())
    }
}

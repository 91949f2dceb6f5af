//! Visual-inertial odometry: IMU dead reckoning corrected by stereo corner
//! landmarks registered against a persistent map.

mod features;
mod map;
mod pipeline;
mod propagate;
mod registration;
mod stereo;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::geometry::{normalize_angle, Pose2};

pub use features::{extract_features, extract_features_with, harris_response, patch_descriptor, HarrisParams};
pub use map::{extend_map, has_counterpart, match_features, Match, MatchParams, MapPoint, WorldMap};
pub use pipeline::{run_offline, write_map_json, FrameFeatures, OfflineRun, write_pose_csv, FrameReport, PoseRecord, SlamParams, SlamPipeline};
pub use propagate::propagate;
pub use registration::{update_pose, PoseUpdate};
pub use stereo::{stereo_observations, triangulate_stereo, StereoParams};

pub const DESCRIPTOR_SIDE: usize = 8;
pub const DESCRIPTOR_LEN: usize = DESCRIPTOR_SIDE * DESCRIPTOR_SIDE;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SlamError {
    #[error("propagation interval must be positive, got {0} s")]
    InvalidInterval(f64),
    #[error("imu sample at {imu_t_ns} ns is newer than state at {state_t_ns} ns")]
    ImuFromFuture { imu_t_ns: u64, state_t_ns: u64 },
    #[error("disparity {disparity} px not above minimum {min} px")]
    DisparityTooSmall { disparity: f64, min: f64 },
    #[error("invalid slam parameter: {0}")]
    InvalidParams(String),
}

/// Planar pose and velocity at a virtual timestamp.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgentState {
    pub t_ns: u64,
    pub position: [f64; 2],
    pub velocity: [f64; 2],
    pub heading: f64,
}

impl AgentState {
    pub fn at_rest(t_ns: u64, position: [f64; 2], heading: f64) -> Self {
        Self {
            t_ns,
            position,
            velocity: [0.0, 0.0],
            heading: normalize_angle(heading),
        }
    }

    pub fn pose(&self) -> Pose2 {
        Pose2::new(self.position[0], self.position[1], self.heading)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PoseFlag {
    Corrected,
    TranslationOnly,
    PropagationOnly,
}

impl PoseFlag {
    pub fn as_str(self) -> &'static str {
        match self {
            PoseFlag::Corrected => "corrected",
            PoseFlag::TranslationOnly => "translation-only",
            PoseFlag::PropagationOnly => "propagation-only",
        }
    }
}

/// Unit-norm 8×8 intensity patch.
#[derive(Debug, Clone, PartialEq)]
pub struct Descriptor(pub [f32; DESCRIPTOR_LEN]);

impl Descriptor {
    /// Scales a raw patch to unit Euclidean norm; `None` for an all-zero patch.
    pub fn normalized(mut d: [f32; DESCRIPTOR_LEN]) -> Option<Self> {
        let n = d.iter().map(|x| (*x as f64) * (*x as f64)).sum::<f64>().sqrt();
        if !(n > 0.0) {
            return None;
        }
        for x in &mut d {
            *x = (*x as f64 / n) as f32;
        }
        Some(Self(d))
    }

    pub fn distance(&self, other: &Descriptor) -> f32 {
        self.0
            .iter()
            .zip(other.0.iter())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f32>()
            .sqrt()
    }
}

impl Serialize for Descriptor {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.0.as_slice().serialize(s)
    }
}

impl<'de> Deserialize<'de> for Descriptor {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let v = Vec::<f32>::deserialize(d)?;
        let arr: [f32; DESCRIPTOR_LEN] = v
            .try_into()
            .map_err(|v: Vec<f32>| serde::de::Error::invalid_length(v.len(), &"64 values"))?;
        Ok(Self(arr))
    }
}

/// Detected corner with sub-pixel location.
#[derive(Debug, Clone, PartialEq)]
pub struct FeaturePoint {
    pub u: f64,
    pub v: f64,
    pub pixel: (u32, u32),
    pub score: f64,
    pub descriptor: Descriptor,
}

/// A stereo-triangulated feature. `body` is (forward, left, height) in the
/// robot frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub feature: FeaturePoint,
    pub camera_point: [f64; 3],
    pub body: [f64; 3],
}

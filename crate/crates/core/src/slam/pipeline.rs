//! Stateful propagation/update loop.
//!
//! The pipeline emits one state per IMU sample. Frames are split into a
//! frontend (corner extraction on both images) and a backend (stereo
//! association, map matching, registration and map growth) so a scheduler can
//! run them as separate stages. A frame can be corrected after newer IMU
//! samples have already been integrated; the correction is applied at the
//! frame's timestamp and the stored IMU history is replayed on top of it.

use std::collections::{HashSet, VecDeque};
use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use super::{
    extend_map, extract_features_with, has_counterpart, match_features, propagate, stereo_observations,
    update_pose, AgentState, FeaturePoint, HarrisParams, Match, MatchParams, PoseFlag, SlamError,
    StereoParams, WorldMap,
};
use crate::par::Exec;
use crate::sensors::{
    frame_count, frame_time_ns, render_stereo_frame, CameraModel, GroundTruth, ImuSample, StereoFrame,
};

/// Length of IMU history kept for delayed corrections.
const HISTORY_NS: u64 = 3_000_000_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SlamParams {
    pub harris: HarrisParams,
    pub stereo: StereoParams,
    pub matching: MatchParams,
    pub merge_radius: f64,
    pub index_cell: f64,
    /// Registration residual (m) above which a match is discarded.
    pub max_residual: f64,
    pub updates_enabled: bool,
}

impl Default for SlamParams {
    fn default() -> Self {
        Self {
            harris: HarrisParams::default(),
            stereo: StereoParams::default(),
            matching: MatchParams::default(),
            merge_radius: 0.05,
            index_cell: 0.5,
            max_residual: 0.1,
            updates_enabled: true,
        }
    }
}

impl SlamParams {
    pub fn validate(&self) -> Result<(), SlamError> {
        let bad = |m: &str| Err(SlamError::InvalidParams(m.to_string()));
        if !(self.merge_radius > 0.0) {
            return bad("merge_radius must be positive");
        }
        if !(self.matching.gating_radius > 0.0) {
            return bad("gating_radius must be positive");
        }
        if !(self.matching.ratio > 0.0 && self.matching.ratio <= 1.0) {
            return bad("ratio must be in (0, 1]");
        }
        if !(self.max_residual > 0.0) {
            return bad("max_residual must be positive");
        }
        Ok(())
    }
}

/// Corners from both images of one stereo frame.
#[derive(Debug, Clone)]
pub struct FrameFeatures {
    pub t_ns: u64,
    pub left: Vec<FeaturePoint>,
    pub right: Vec<FeaturePoint>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrameReport {
    pub t_ns: u64,
    pub flag: PoseFlag,
    pub observations: usize,
    pub matches: usize,
    pub inliers: usize,
    pub map_size: usize,
    pub state: AgentState,
}

/// One emitted state, as exported to the pose CSV.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoseRecord {
    pub t_ns: u64,
    pub x: f64,
    pub y: f64,
    pub heading: f64,
    pub flag: PoseFlag,
}

#[derive(Debug, Clone)]
pub struct SlamPipeline {
    params: SlamParams,
    camera: CameraModel,
    map: WorldMap,
    initial: AgentState,
    /// (state at t_k, IMU sample received at t_k), oldest first.
    history: VecDeque<(AgentState, ImuSample)>,
    current: AgentState,
    last_corrected: Option<AgentState>,
    flag: PoseFlag,
    poses: Vec<PoseRecord>,
}

impl SlamPipeline {
    pub fn new(initial: AgentState, camera: CameraModel, params: SlamParams) -> Result<Self, SlamError> {
        params.validate()?;
        Ok(Self {
            map: WorldMap::new(params.merge_radius, params.index_cell),
            params,
            camera,
            initial,
            history: VecDeque::new(),
            current: initial,
            last_corrected: None,
            flag: PoseFlag::PropagationOnly,
            poses: Vec::new(),
        })
    }

    pub fn params(&self) -> &SlamParams {
        &self.params
    }

    pub fn map(&self) -> &WorldMap {
        &self.map
    }

    pub fn current(&self) -> AgentState {
        self.current
    }

    pub fn poses(&self) -> &[PoseRecord] {
        &self.poses
    }

    /// Integrates the previous sample up to this one's timestamp and emits
    /// the resulting state.
    pub fn on_imu(&mut self, imu: &ImuSample) -> Result<AgentState, SlamError> {
        let state = match self.history.back() {
            None if imu.t_ns <= self.initial.t_ns => AgentState { t_ns: imu.t_ns, ..self.initial },
            None => {
                let s = self.current;
                let frozen = ImuSample { t_ns: s.t_ns, accel_body: [0.0; 2], gyro_z: 0.0 };
                propagate(&s, &frozen, (imu.t_ns - s.t_ns) as f64 * 1e-9)?
            }
            Some((_, prev)) => {
                let s = self.current;
                if imu.t_ns <= s.t_ns {
                    return Err(SlamError::InvalidInterval((imu.t_ns as f64 - s.t_ns as f64) * 1e-9));
                }
                propagate(&s, prev, (imu.t_ns - s.t_ns) as f64 * 1e-9)?
            }
        };
        self.current = state;
        self.history.push_back((state, imu.clone()));
        while self
            .history
            .front()
            .is_some_and(|(s, _)| s.t_ns + HISTORY_NS < state.t_ns)
        {
            self.history.pop_front();
        }
        self.poses.push(PoseRecord {
            t_ns: state.t_ns,
            x: state.position[0],
            y: state.position[1],
            heading: state.heading,
            flag: self.flag,
        });
        Ok(state)
    }

    /// Dead-reckoned estimate at `t_ns` from the stored history.
    pub fn predict_at(&self, t_ns: u64) -> AgentState {
        let idx = self.history.partition_point(|(s, _)| s.t_ns <= t_ns);
        if idx == 0 {
            return AgentState { t_ns, ..self.history.front().map_or(self.initial, |(s, _)| *s) };
        }
        let (s, imu) = &self.history[idx - 1];
        let base = if idx == self.history.len() { self.current } else { *s };
        if t_ns <= base.t_ns {
            return base;
        }
        propagate(&base, imu, (t_ns - base.t_ns) as f64 * 1e-9).unwrap_or(base)
    }

    pub fn frontend(frame: &StereoFrame, harris: &HarrisParams, exec: Exec) -> FrameFeatures {
        let (left, right) = crate::par::join(
            exec,
            || extract_features_with(&frame.left, harris, exec),
            || extract_features_with(&frame.right, harris, exec),
        );
        FrameFeatures { t_ns: frame.t_ns, left, right }
    }

    pub fn backend(&mut self, f: &FrameFeatures) -> FrameReport {
        let obs = stereo_observations(&f.left, &f.right, &self.camera, &self.params.stereo);
        let predicted = self.predict_at(f.t_ns);
        let report = |flag, matches, inliers, map: &WorldMap, state| FrameReport {
            t_ns: f.t_ns,
            flag,
            observations: obs.len(),
            matches,
            inliers,
            map_size: map.len(),
            state,
        };

        if self.map.is_empty() {
            extend_map(&mut self.map, &obs, &[], &predicted);
            return report(PoseFlag::PropagationOnly, 0, 0, &self.map, predicted);
        }
        if !self.params.updates_enabled {
            return report(PoseFlag::PropagationOnly, 0, 0, &self.map, predicted);
        }

        let matches = match_features(&obs, &self.map, &predicted, &self.params.matching);
        let (inliers, update) = self.robust_update(&predicted, &matches);
        if update.flag == PoseFlag::PropagationOnly {
            self.flag = PoseFlag::PropagationOnly;
            return report(update.flag, matches.len(), 0, &self.map, predicted);
        }
        let mut corrected = update.state;
        if let Some(prev) = self.last_corrected {
            if corrected.t_ns > prev.t_ns {
                let dt = (corrected.t_ns - prev.t_ns) as f64 * 1e-9;
                corrected.velocity = [
                    (corrected.position[0] - prev.position[0]) / dt,
                    (corrected.position[1] - prev.position[1]) / dt,
                ];
            }
        }
        self.last_corrected = Some(corrected);
        self.flag = update.flag;

        // Observations that proposed any match are not new landmarks, even
        // when rejected as outliers; neither are ambiguous re-observations.
        let proposed: HashSet<usize> = matches.iter().map(|m| m.observation_index).collect();
        let fresh: Vec<_> = obs
            .iter()
            .enumerate()
            .filter(|(i, o)| !proposed.contains(i) && !has_counterpart(o, &self.map, &corrected, &self.params.matching))
            .map(|(_, o)| o.clone())
            .collect();
        extend_map(&mut self.map, &fresh, &[], &corrected);
        for m in &inliers {
            self.map.note_observed(m.map_id);
        }
        self.replay_from(corrected);
        report(update.flag, matches.len(), inliers.len(), &self.map, corrected)
    }

    pub fn process_frame(&mut self, frame: &StereoFrame, exec: Exec) -> FrameReport {
        let f = Self::frontend(frame, &self.params.harris, exec);
        self.backend(&f)
    }

    fn robust_update(&self, predicted: &AgentState, matches: &[Match]) -> (Vec<Match>, super::PoseUpdate) {
        let mut kept: Vec<Match> = matches.to_vec();
        loop {
            let u = update_pose(predicted, &kept);
            if u.flag == PoseFlag::PropagationOnly {
                return (kept, u);
            }
            let pose = u.state.pose();
            let residual = |m: &Match| {
                let w = pose.transform(m.observed);
                ((w[0] - m.map_position[0]).powi(2) + (w[1] - m.map_position[1]).powi(2)).sqrt()
            };
            let worst = kept
                .iter()
                .enumerate()
                .map(|(i, m)| (i, residual(m)))
                .max_by(|a, b| a.1.total_cmp(&b.1));
            match worst {
                Some((i, r)) if r > self.params.max_residual => {
                    kept.remove(i);
                }
                _ => return (kept, u),
            }
        }
    }

    fn replay_from(&mut self, corrected: AgentState) {
        let idx = self.history.partition_point(|(s, _)| s.t_ns <= corrected.t_ns);
        if idx == 0 {
            self.current = corrected;
            return;
        }
        let mut s = corrected;
        let mut imu = self.history[idx - 1].1.clone();
        if self.history[idx - 1].0.t_ns == corrected.t_ns {
            self.history[idx - 1].0 = corrected;
        }
        for k in idx..self.history.len() {
            let t = self.history[k].0.t_ns;
            s = propagate(&s, &imu, (t - s.t_ns) as f64 * 1e-9).unwrap_or(s);
            self.history[k].0 = s;
            imu = self.history[k].1.clone();
        }
        self.current = s;
    }
}

/// Result of driving the pipeline directly from recorded streams.
#[derive(Debug, Clone)]
pub struct OfflineRun {
    pub final_state: AgentState,
    pub states_emitted: usize,
    pub frames: Vec<FrameReport>,
    pub map_size: usize,
}

/// Feeds every IMU sample and every `frame_stride`-th rendered frame, in
/// timestamp order, with no processing delay.
pub fn run_offline(
    gt: &GroundTruth,
    imu: &[ImuSample],
    camera: &CameraModel,
    params: SlamParams,
    frame_stride: u64,
    render_seed: u64,
    exec: Exec,
) -> Result<OfflineRun, SlamError> {
    let p0 = gt.poses[0];
    let initial = AgentState {
        t_ns: p0.t_ns,
        position: [p0.x, p0.y],
        velocity: [p0.vx, p0.vy],
        heading: p0.heading,
    };
    let mut pipe = SlamPipeline::new(initial, camera.clone(), params)?;
    let stride = frame_stride.max(1);
    let mut frames = Vec::new();
    let mut next_imu = 0;
    let n_frames = frame_count(gt.duration_ns);
    for k in (0..n_frames).step_by(stride as usize) {
        let t_f = frame_time_ns(k);
        while next_imu < imu.len() && imu[next_imu].t_ns <= t_f {
            pipe.on_imu(&imu[next_imu])?;
            next_imu += 1;
        }
        if !pipe.params.updates_enabled && !pipe.map.is_empty() {
            continue;
        }
        let frame = render_stereo_frame(gt, camera, k, render_seed);
        frames.push(pipe.process_frame(&frame, exec));
    }
    for s in &imu[next_imu..] {
        pipe.on_imu(s)?;
    }
    Ok(OfflineRun {
        final_state: pipe.current(),
        states_emitted: pipe.poses.len(),
        map_size: pipe.map.len(),
        frames,
    })
}

pub fn write_pose_csv<W: Write>(mut w: W, poses: &[PoseRecord]) -> io::Result<()> {
    writeln!(w, "t_ns,x,y,heading,flag")?;
    for p in poses {
        writeln!(w, "{},{},{},{},{}", p.t_ns, p.x, p.y, p.heading, p.flag.as_str())?;
    }
    Ok(())
}

#[derive(Serialize)]
struct MapPointJson {
    id: u64,
    x: f64,
    y: f64,
    height: f64,
    observation_count: u32,
}

pub fn write_map_json<W: Write>(w: W, map: &WorldMap) -> io::Result<()> {
    let mut pts: Vec<MapPointJson> = map
        .points()
        .iter()
        .map(|p| MapPointJson {
            id: p.id,
            x: p.position[0],
            y: p.position[1],
            height: p.height,
            observation_count: p.observation_count,
        })
        .collect();
    pts.sort_by_key(|p| p.id);
    serde_json::to_writer_pretty(w, &pts).map_err(io::Error::other)
}

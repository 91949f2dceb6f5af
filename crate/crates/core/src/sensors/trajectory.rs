//! Ground-truth planar trajectories and the landmark field around them.

use serde::{Deserialize, Serialize};

use super::SensorError;
use crate::geometry::{dist2, normalize_angle};
use crate::rng::{derive_seed, XorShift64Star};

/// Ground truth is sampled every millisecond.
pub const GT_STEP_NS: u64 = 1_000_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Motion {
    /// Parked at the origin facing +x.
    Stationary,
    /// Constant speed along +x from the origin.
    StraightLine { speed: f64 },
    /// Counter-clockwise circle starting at the origin facing +x; the centre
    /// sits at `(0, radius)`.
    Circle { radius: f64, speed: f64 },
    /// Constant-speed unicycle touring the waypoints in order, cyclically.
    WaypointPath { speed: f64, waypoints: Vec<[f64; 2]> },
}

/// Parameters of the landmark field scattered around the path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LandmarkSpec {
    pub count: usize,
    /// Landmarks keep at least this ground distance from every path point.
    pub min_range_m: f64,
    /// ...and at most this distance from the closest path point.
    pub max_range_m: f64,
    pub min_spacing_m: f64,
    pub height_min_m: f64,
    pub height_max_m: f64,
}

impl Default for LandmarkSpec {
    fn default() -> Self {
        Self {
            count: 150,
            min_range_m: 1.0,
            max_range_m: 6.0,
            min_spacing_m: 0.8,
            height_min_m: 0.1,
            height_max_m: 0.9,
        }
    }
}

fn default_speed_limit() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrajectorySpec {
    pub motion: Motion,
    pub duration_s: f64,
    pub seed: u64,
    #[serde(default = "default_speed_limit")]
    pub speed_limit: f64,
    #[serde(default)]
    pub landmarks: LandmarkSpec,
}

impl TrajectorySpec {
    pub fn new(motion: Motion, duration_s: f64, seed: u64) -> Self {
        Self {
            motion,
            duration_s,
            seed,
            speed_limit: default_speed_limit(),
            landmarks: LandmarkSpec::default(),
        }
    }

    pub fn validate(&self) -> Result<(), SensorError> {
        let invalid = |m: String| Err(SensorError::InvalidSpec(m));
        if !(self.duration_s.is_finite() && self.duration_s > 0.0) {
            return invalid(format!("duration_s must be > 0, got {}", self.duration_s));
        }
        if !(self.speed_limit.is_finite() && self.speed_limit > 0.0) {
            return invalid(format!("speed_limit must be > 0, got {}", self.speed_limit));
        }
        let check_speed = |speed: f64| -> Result<(), SensorError> {
            if !(speed.is_finite() && speed > 0.0 && speed <= self.speed_limit) {
                return Err(SensorError::InvalidSpec(format!(
                    "speed must be in (0, {}], got {speed}",
                    self.speed_limit
                )));
            }
            Ok(())
        };
        match &self.motion {
            Motion::Stationary => {}
            Motion::StraightLine { speed } => check_speed(*speed)?,
            Motion::Circle { radius, speed } => {
                check_speed(*speed)?;
                if !(radius.is_finite() && *radius > 0.0) {
                    return invalid(format!("radius must be > 0, got {radius}"));
                }
            }
            Motion::WaypointPath { speed, waypoints } => {
                check_speed(*speed)?;
                if waypoints.is_empty() {
                    return invalid("waypoint list is empty".into());
                }
                if waypoints.iter().flatten().any(|c| !c.is_finite()) {
                    return invalid("waypoint coordinates must be finite".into());
                }
            }
        }
        let l = &self.landmarks;
        if !(l.min_range_m >= 0.0 && l.max_range_m > l.min_range_m && l.min_spacing_m >= 0.0)
            || !(l.height_max_m >= l.height_min_m)
        {
            return invalid("landmark ranges are inconsistent".into());
        }
        Ok(())
    }

    pub fn duration_ns(&self) -> u64 {
        (self.duration_s * 1e9).round() as u64
    }
}

/// One dense ground-truth sample. `angular_rate` and `accel_body` hold over
/// the interval that starts at `t_ns` (motion is piecewise constant-curvature).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoseSample {
    pub t_ns: u64,
    pub x: f64,
    pub y: f64,
    pub heading: f64,
    pub vx: f64,
    pub vy: f64,
    pub angular_rate: f64,
    /// Body-frame acceleration (forward, left), m/s².
    pub accel_body: [f64; 2],
}

impl PoseSample {
    pub fn speed(&self) -> f64 {
        self.vx.hypot(self.vy)
    }

    /// Constant-speed, constant-turn-rate motion over `dt_s` seconds.
    pub fn advance(&self, dt_s: f64) -> PoseSample {
        let v = self.speed();
        let w = self.angular_rate;
        let h0 = self.heading;
        let h1 = h0 + w * dt_s;
        let (x, y) = if w.abs() > 1e-12 {
            (
                self.x + v / w * (h1.sin() - h0.sin()),
                self.y - v / w * (h1.cos() - h0.cos()),
            )
        } else {
            (self.x + v * dt_s * h0.cos(), self.y + v * dt_s * h0.sin())
        };
        PoseSample {
            t_ns: self.t_ns + (dt_s * 1e9).round() as u64,
            x,
            y,
            heading: normalize_angle(h1),
            vx: v * h1.cos(),
            vy: v * h1.sin(),
            angular_rate: w,
            accel_body: self.accel_body,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Landmark {
    pub id: u32,
    /// World position (x, y, height above ground), metres.
    pub position: [f64; 3],
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub poses: Vec<PoseSample>,
    pub landmarks: Vec<Landmark>,
    pub duration_ns: u64,
}

impl GroundTruth {
    /// Exact pose at an arbitrary time (clamped to the trajectory span).
    pub fn pose_at(&self, t_ns: u64) -> PoseSample {
        let t = t_ns.min(self.duration_ns);
        let i = ((t / GT_STEP_NS) as usize).min(self.poses.len() - 1);
        let base = &self.poses[i];
        if base.t_ns == t {
            return *base;
        }
        let mut p = base.advance((t - base.t_ns) as f64 * 1e-9);
        p.t_ns = t;
        p
    }

    pub fn final_pose(&self) -> PoseSample {
        *self.poses.last().expect("ground truth is never empty")
    }
}

pub fn generate_trajectory(spec: &TrajectorySpec) -> Result<GroundTruth, SensorError> {
    spec.validate()?;
    let duration_ns = spec.duration_ns();
    let n = (duration_ns / GT_STEP_NS) as usize + 1;
    let mut poses = Vec::with_capacity(n);
    match &spec.motion {
        Motion::Stationary => {
            for k in 0..n {
                poses.push(PoseSample {
                    t_ns: k as u64 * GT_STEP_NS,
                    x: 0.0,
                    y: 0.0,
                    heading: 0.0,
                    vx: 0.0,
                    vy: 0.0,
                    angular_rate: 0.0,
                    accel_body: [0.0, 0.0],
                });
            }
        }
        Motion::StraightLine { speed } => {
            for k in 0..n {
                let t = k as f64 * 1e-3;
                poses.push(PoseSample {
                    t_ns: k as u64 * GT_STEP_NS,
                    x: speed * t,
                    y: 0.0,
                    heading: 0.0,
                    vx: *speed,
                    vy: 0.0,
                    angular_rate: 0.0,
                    accel_body: [0.0, 0.0],
                });
            }
        }
        Motion::Circle { radius, speed } => {
            let w = speed / radius;
            for k in 0..n {
                let t = k as f64 * 1e-3;
                let th = w * t;
                poses.push(PoseSample {
                    t_ns: k as u64 * GT_STEP_NS,
                    x: radius * th.sin(),
                    y: radius * (1.0 - th.cos()),
                    heading: normalize_angle(th),
                    vx: speed * th.cos(),
                    vy: speed * th.sin(),
                    angular_rate: w,
                    accel_body: [0.0, speed * speed / radius],
                });
            }
        }
        Motion::WaypointPath { speed, waypoints } => {
            waypoint_tour(*speed, waypoints, n, &mut poses);
        }
    }
    let landmarks = scatter_landmarks(&poses, &spec.landmarks, derive_seed(spec.seed, 0x4c4d));
    Ok(GroundTruth {
        poses,
        landmarks,
        duration_ns,
    })
}

const MIN_TURN_RADIUS_M: f64 = 0.25;
const HEADING_GAIN: f64 = 4.0;
const CAPTURE_RADIUS_M: f64 = 0.6;

fn waypoint_tour(speed: f64, waypoints: &[[f64; 2]], n: usize, out: &mut Vec<PoseSample>) {
    let start = waypoints[0];
    let single = waypoints.len() == 1;
    let heading0 = if single {
        0.0
    } else {
        let w = waypoints[1];
        (w[1] - start[1]).atan2(w[0] - start[0])
    };
    let v = if single { 0.0 } else { speed };
    let max_rate = v / MIN_TURN_RADIUS_M;
    let mut target = 1 % waypoints.len();
    let mut cur = PoseSample {
        t_ns: 0,
        x: start[0],
        y: start[1],
        heading: normalize_angle(heading0),
        vx: v * heading0.cos(),
        vy: v * heading0.sin(),
        angular_rate: 0.0,
        accel_body: [0.0, 0.0],
    };
    for k in 0..n {
        if !single {
            let goal = waypoints[target];
            if dist2([cur.x, cur.y], goal) < CAPTURE_RADIUS_M * CAPTURE_RADIUS_M {
                target = (target + 1) % waypoints.len();
            }
            let goal = waypoints[target];
            let bearing = (goal[1] - cur.y).atan2(goal[0] - cur.x);
            let err = normalize_angle(bearing - cur.heading);
            cur.angular_rate = (HEADING_GAIN * err).clamp(-max_rate, max_rate);
            cur.accel_body = [0.0, v * cur.angular_rate];
        }
        cur.t_ns = k as u64 * GT_STEP_NS;
        out.push(cur);
        cur = cur.advance(1e-3);
    }
}

fn scatter_landmarks(poses: &[PoseSample], spec: &LandmarkSpec, seed: u64) -> Vec<Landmark> {
    let path: Vec<[f64; 2]> = poses.iter().step_by(50).map(|p| [p.x, p.y]).collect();
    let (mut lo, mut hi) = ([f64::MAX; 2], [f64::MIN; 2]);
    for p in &path {
        for a in 0..2 {
            lo[a] = lo[a].min(p[a]);
            hi[a] = hi[a].max(p[a]);
        }
    }
    let pad = spec.max_range_m;
    let mut rng = XorShift64Star::new(seed);
    let mut out: Vec<Landmark> = Vec::with_capacity(spec.count);
    let min_r2 = spec.min_range_m * spec.min_range_m;
    let max_r2 = spec.max_range_m * spec.max_range_m;
    let spacing2 = spec.min_spacing_m * spec.min_spacing_m;
    let attempts = spec.count.saturating_mul(200);
    for _ in 0..attempts {
        if out.len() >= spec.count {
            break;
        }
        let c = [
            rng.uniform(lo[0] - pad, hi[0] + pad),
            rng.uniform(lo[1] - pad, hi[1] + pad),
        ];
        let h = rng.uniform(spec.height_min_m, spec.height_max_m);
        let nearest = path
            .iter()
            .map(|p| dist2(*p, c))
            .fold(f64::INFINITY, f64::min);
        if nearest < min_r2 || nearest > max_r2 {
            continue;
        }
        if out
            .iter()
            .any(|l| dist2([l.position[0], l.position[1]], c) < spacing2)
        {
            continue;
        }
        out.push(Landmark {
            id: out.len() as u32,
            position: [c[0], c[1], h],
        });
    }
    out
}

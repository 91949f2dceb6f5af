use super::{AgentState, SlamError};
use crate::geometry::{normalize_angle, rotate};
use crate::sensors::ImuSample;

/// Dead-reckons `state` forward by `dt_s` with a piecewise-constant IMU
/// reading. Acceleration is rotated into the world with the heading at the
/// start of the interval.
pub fn propagate(state: &AgentState, imu: &ImuSample, dt_s: f64) -> Result<AgentState, SlamError> {
    if !(dt_s.is_finite() && dt_s > 0.0) {
        return Err(SlamError::InvalidInterval(dt_s));
    }
    if imu.t_ns > state.t_ns {
        return Err(SlamError::ImuFromFuture {
            imu_t_ns: imu.t_ns,
            state_t_ns: state.t_ns,
        });
    }
    let a = rotate(state.heading, imu.accel_body);
    let [x, y] = state.position;
    let [vx, vy] = state.velocity;
    let half_dt2 = 0.5 * dt_s * dt_s;
    Ok(AgentState {
        t_ns: state.t_ns + (dt_s * 1e9).round() as u64,
        position: [x + vx * dt_s + a[0] * half_dt2, y + vy * dt_s + a[1] * half_dt2],
        velocity: [vx + a[0] * dt_s, vy + a[1] * dt_s],
        heading: normalize_angle(state.heading + imu.gyro_z * dt_s),
    })
}

use serde::{Deserialize, Serialize};

use super::trajectory::GroundTruth;
use super::SensorError;
use crate::rng::XorShift64Star;

pub const IMU_RATE_HZ: u64 = 200;
pub const IMU_PERIOD_NS: u64 = 1_000_000_000 / IMU_RATE_HZ;

/// Planar IMU reading: body-frame acceleration (forward, left) and yaw rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImuSample {
    pub t_ns: u64,
    pub accel_body: [f64; 2],
    pub gyro_z: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ImuErrorModel {
    pub accel_bias: [f64; 2],
    pub gyro_bias: f64,
    pub accel_noise_std: f64,
    pub gyro_noise_std: f64,
}

impl ImuErrorModel {
    pub fn validate(&self) -> Result<(), SensorError> {
        let vals = [
            self.accel_bias[0],
            self.accel_bias[1],
            self.gyro_bias,
            self.accel_noise_std,
            self.gyro_noise_std,
        ];
        if vals.iter().any(|v| !v.is_finite()) {
            return Err(SensorError::InvalidSpec("imu error model must be finite".into()));
        }
        if self.accel_noise_std < 0.0 || self.gyro_noise_std < 0.0 {
            return Err(SensorError::InvalidSpec(
                "imu noise standard deviations must be >= 0".into(),
            ));
        }
        Ok(())
    }
}

/// IMU stream at exactly 200 Hz over `[0, duration)`.
pub fn sample_imu(
    gt: &GroundTruth,
    err: &ImuErrorModel,
    seed: u64,
) -> Result<Vec<ImuSample>, SensorError> {
    if gt.poses.is_empty() {
        return Err(SensorError::InvalidSpec("ground truth is empty".into()));
    }
    err.validate()?;
    let n = gt.duration_ns.div_ceil(IMU_PERIOD_NS) as usize;
    let mut rng = XorShift64Star::new(seed);
    let mut out = Vec::with_capacity(n);
    for k in 0..n {
        let t = k as u64 * IMU_PERIOD_NS;
        let p = gt.pose_at(t);
        let ax = p.accel_body[0] + err.accel_bias[0] + rng.gaussian(0.0, err.accel_noise_std);
        let ay = p.accel_body[1] + err.accel_bias[1] + rng.gaussian(0.0, err.accel_noise_std);
        let gz = p.angular_rate + err.gyro_bias + rng.gaussian(0.0, err.gyro_noise_std);
        out.push(ImuSample {
            t_ns: t,
            accel_body: [ax, ay],
            gyro_z: gz,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sensors::trajectory::{generate_trajectory, Motion, TrajectorySpec};

    fn gt(motion: Motion, secs: f64) -> GroundTruth {
        generate_trajectory(&TrajectorySpec::new(motion, secs, 1)).unwrap()
    }

    #[test]
    fn rate_is_exactly_200_hz() {
        let s = sample_imu(&gt(Motion::Stationary, 10.0), &ImuErrorModel::default(), 1).unwrap();
        assert_eq!(s.len(), 2000);
        assert!(s.windows(2).all(|w| w[1].t_ns - w[0].t_ns == IMU_PERIOD_NS));
    }

    #[test]
    fn stationary_zero_error_reads_zero() {
        let s = sample_imu(&gt(Motion::Stationary, 1.0), &ImuErrorModel::default(), 1).unwrap();
        assert!(s.iter().all(|x| x.accel_body == [0.0, 0.0] && x.gyro_z == 0.0));
    }

    #[test]
    fn circle_centripetal() {
        let s = sample_imu(
            &gt(Motion::Circle { radius: 2.0, speed: 1.0 }, 2.0),
            &ImuErrorModel::default(),
            1,
        )
        .unwrap();
        for x in &s {
            let mag = x.accel_body[0].hypot(x.accel_body[1]);
            assert!((mag - 0.5).abs() < 1e-12);
            assert!((x.gyro_z - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn bias_is_additive() {
        let err = ImuErrorModel {
            accel_bias: [0.01, 0.0],
            ..Default::default()
        };
        let s = sample_imu(&gt(Motion::StraightLine { speed: 1.0 }, 1.0), &err, 1).unwrap();
        assert!(s.iter().all(|x| x.accel_body[0] == 0.01));
    }

    #[test]
    fn seeded_noise_is_reproducible() {
        let err = ImuErrorModel {
            accel_noise_std: 0.1,
            gyro_noise_std: 0.01,
            ..Default::default()
        };
        let g = gt(Motion::Circle { radius: 2.0, speed: 1.0 }, 1.0);
        assert_eq!(sample_imu(&g, &err, 5).unwrap(), sample_imu(&g, &err, 5).unwrap());
        assert_ne!(sample_imu(&g, &err, 5).unwrap(), sample_imu(&g, &err, 6).unwrap());
    }

    #[test]
    fn negative_noise_rejected() {
        let err = ImuErrorModel {
            gyro_noise_std: -1.0,
            ..Default::default()
        };
        assert!(sample_imu(&gt(Motion::Stationary, 1.0), &err, 1).is_err());
    }
}

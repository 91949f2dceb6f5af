//! Ground truth and deterministic synthetic sensor streams: 200 Hz planar
//! IMU, 60 FPS stereo frames, and 8 kHz audio.

pub mod audio;
pub mod camera;
pub mod imu;
pub mod trajectory;

use std::io::{self, Write};

use thiserror::Error;

pub use audio::{
    chunk_samples, concat_chunks, synthesize_audio, synthesize_script, AudioChunk, AudioParams,
    ScriptedWord, CHUNK_NS, CHUNK_SAMPLES,
};
pub use camera::{
    fiducial_intensity, frame_count, frame_time_ns, render_frames_batch, render_stereo_frame,
    render_stereo_frames, render_view, CameraModel, GrayImage, Projection, StereoFrame,
    StereoFrames, CAMERA_FPS, FIDUCIAL_PX,
};
pub use imu::{sample_imu, ImuErrorModel, ImuSample, IMU_PERIOD_NS, IMU_RATE_HZ};
pub use trajectory::{
    generate_trajectory, GroundTruth, Landmark, LandmarkSpec, Motion, PoseSample, TrajectorySpec,
    GT_STEP_NS,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SensorError {
    #[error("invalid sensor specification: {0}")]
    InvalidSpec(String),
    #[error("unknown vocabulary word {0:?}")]
    UnknownWord(String),
}

/// Columns: `t_ns,x,y,heading,vx,vy,angular_rate,accel_fwd,accel_left`.
pub fn write_ground_truth_csv<W: Write>(mut w: W, gt: &GroundTruth) -> io::Result<()> {
    writeln!(w, "t_ns,x,y,heading,vx,vy,angular_rate,accel_fwd,accel_left")?;
    for p in &gt.poses {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{}",
            p.t_ns, p.x, p.y, p.heading, p.vx, p.vy, p.angular_rate, p.accel_body[0], p.accel_body[1]
        )?;
    }
    Ok(())
}

/// Columns: `t_ns,accel_fwd,accel_left,gyro_z`.
pub fn write_imu_csv<W: Write>(mut w: W, samples: &[ImuSample]) -> io::Result<()> {
    writeln!(w, "t_ns,accel_fwd,accel_left,gyro_z")?;
    for s in samples {
        writeln!(w, "{},{},{},{}", s.t_ns, s.accel_body[0], s.accel_body[1], s.gyro_z)?;
    }
    Ok(())
}

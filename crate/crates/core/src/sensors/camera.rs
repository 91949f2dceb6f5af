//! Pinhole stereo camera and the fiducial-landmark renderer.
//!
//! Frames: left camera at the robot origin looking along the robot's +x
//! axis, right camera `baseline_m` to the right. Camera axes are X right,
//! Y down, Z forward. Pixel centres sit on integer coordinates, so pixel
//! `(i, j)` covers `[i - 0.5, i + 0.5) x [j - 0.5, j + 0.5)`.
//!
//! Every landmark is drawn as an 8x8-pixel square of its own intensity,
//! centred on the landmark's projection and area-antialiased, regardless of
//! depth. Nearer squares are painted over farther ones.

use serde::{Deserialize, Serialize};

use super::trajectory::{GroundTruth, Landmark, PoseSample};
use crate::geometry::Pose2;
use crate::par::{self, Exec};
use crate::rng::{derive_seed, splitmix64, XorShift64Star};

pub const CAMERA_FPS: u64 = 60;
pub const FIDUCIAL_PX: f64 = 8.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CameraModel {
    pub width: u32,
    pub height: u32,
    pub focal_px: f64,
    pub cx: f64,
    pub cy: f64,
    pub baseline_m: f64,
    pub mount_height_m: f64,
    pub near_m: f64,
    pub background: u8,
    pub pixel_noise_std: f64,
}

impl Default for CameraModel {
    fn default() -> Self {
        Self {
            width: 640,
            height: 480,
            focal_px: 400.0,
            cx: 319.5,
            cy: 239.5,
            baseline_m: 0.2,
            mount_height_m: 0.5,
            near_m: 0.3,
            background: 40,
            pixel_noise_std: 0.0,
        }
    }
}

/// Where a landmark lands in both images.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Projection {
    pub u_left: f64,
    pub u_right: f64,
    pub v: f64,
    pub depth: f64,
}

impl Projection {
    pub fn disparity(&self) -> f64 {
        self.u_left - self.u_right
    }
}

impl CameraModel {
    /// Camera-frame coordinates (X right, Y down, Z forward) of a world point
    /// seen from `pose`.
    pub fn to_camera(&self, pose: &Pose2, world: [f64; 3]) -> [f64; 3] {
        let body = pose.inverse_transform([world[0], world[1]]);
        [-body[1], self.mount_height_m - world[2], body[0]]
    }

    /// Inverse of [`to_camera`](Self::to_camera) restricted to the body frame:
    /// returns (forward, left, height).
    pub fn camera_to_body(&self, cam: [f64; 3]) -> [f64; 3] {
        [cam[2], -cam[0], self.mount_height_m - cam[1]]
    }

    pub fn project_point(&self, pose: &Pose2, world: [f64; 3]) -> Option<Projection> {
        let [x, y, z] = self.to_camera(pose, world);
        if z < self.near_m {
            return None;
        }
        Some(Projection {
            u_left: self.cx + self.focal_px * x / z,
            u_right: self.cx + self.focal_px * (x - self.baseline_m) / z,
            v: self.cy + self.focal_px * y / z,
            depth: z,
        })
    }

    /// Whether a fiducial centred at `(u, v)` lies entirely inside the image.
    pub fn fully_inside(&self, u: f64, v: f64) -> bool {
        let h = FIDUCIAL_PX / 2.0;
        u - h >= -0.5
            && v - h >= -0.5
            && u + h <= self.width as f64 - 0.5
            && v + h <= self.height as f64 - 0.5
    }
}

/// 8-bit grayscale image, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    pub width: usize,
    pub height: usize,
    pub data: Vec<u8>,
}

impl GrayImage {
    pub fn filled(width: usize, height: usize, value: u8) -> Self {
        Self {
            width,
            height,
            data: vec![value; width * height],
        }
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: u8) {
        self.data[y * self.width + x] = v;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StereoFrame {
    pub index: u64,
    pub t_ns: u64,
    pub left: GrayImage,
    pub right: GrayImage,
    pub camera: CameraModel,
}

pub fn frame_time_ns(index: u64) -> u64 {
    index * 1_000_000_000 / CAMERA_FPS
}

pub fn frame_count(duration_ns: u64) -> u64 {
    // Number of k with k * 1e9 / 60 < duration.
    (duration_ns * CAMERA_FPS).div_ceil(1_000_000_000)
}

/// Intensity of a landmark's fiducial patch.
pub fn fiducial_intensity(id: u32) -> u8 {
    (110 + splitmix64(id as u64) % 146) as u8
}

fn coverage(center: f64, pixel: f64) -> f64 {
    let h = FIDUCIAL_PX / 2.0;
    let lo = (center - h).max(pixel - 0.5);
    let hi = (center + h).min(pixel + 0.5);
    (hi - lo).max(0.0)
}

fn paint(buf: &mut [f32], width: usize, height: usize, u: f64, v: f64, value: f32) {
    let h = FIDUCIAL_PX / 2.0;
    let x0 = (u - h - 0.5).floor().max(0.0) as i64;
    let x1 = ((u + h + 0.5).ceil() as i64).min(width as i64 - 1);
    let y0 = (v - h - 0.5).floor().max(0.0) as i64;
    let y1 = ((v + h + 0.5).ceil() as i64).min(height as i64 - 1);
    for y in y0..=y1 {
        let cy = coverage(v, y as f64);
        if cy <= 0.0 {
            continue;
        }
        for x in x0..=x1 {
            let c = (coverage(u, x as f64) * cy) as f32;
            if c > 0.0 {
                let p = &mut buf[y as usize * width + x as usize];
                *p = *p * (1.0 - c) + value * c;
            }
        }
    }
}

fn quantize(buf: &[f32], width: usize, height: usize, noise: f64, seed: u64) -> GrayImage {
    let mut rng = XorShift64Star::new(seed);
    let data = buf
        .iter()
        .map(|&v| {
            let n = if noise > 0.0 { rng.gaussian(0.0, noise) } else { 0.0 };
            (v as f64 + n).round().clamp(0.0, 255.0) as u8
        })
        .collect();
    GrayImage {
        width,
        height,
        data,
    }
}

/// Renders the stereo pair seen from `pose`.
pub fn render_view(
    camera: &CameraModel,
    pose: &Pose2,
    landmarks: &[Landmark],
    noise_seed: u64,
) -> (GrayImage, GrayImage) {
    let (w, h) = (camera.width as usize, camera.height as usize);
    let mut visible: Vec<(Projection, f32)> = landmarks
        .iter()
        .filter_map(|l| {
            camera
                .project_point(pose, l.position)
                .map(|p| (p, fiducial_intensity(l.id) as f32))
        })
        .collect();
    // Far to near; ties keep landmark order.
    visible.sort_by(|a, b| b.0.depth.total_cmp(&a.0.depth));
    let bg = camera.background as f32;
    let mut left = vec![bg; w * h];
    let mut right = vec![bg; w * h];
    for (p, val) in &visible {
        paint(&mut left, w, h, p.u_left, p.v, *val);
        paint(&mut right, w, h, p.u_right, p.v, *val);
    }
    let noise = camera.pixel_noise_std;
    (
        quantize(&left, w, h, noise, derive_seed(noise_seed, 1)),
        quantize(&right, w, h, noise, derive_seed(noise_seed, 2)),
    )
}

fn pose2(p: &PoseSample) -> Pose2 {
    Pose2::new(p.x, p.y, p.heading)
}

pub fn render_stereo_frame(
    gt: &GroundTruth,
    camera: &CameraModel,
    index: u64,
    seed: u64,
) -> StereoFrame {
    let t = frame_time_ns(index);
    let pose = pose2(&gt.pose_at(t));
    let (left, right) = render_view(camera, &pose, &gt.landmarks, derive_seed(seed, index));
    StereoFrame {
        index,
        t_ns: t,
        left,
        right,
        camera: camera.clone(),
    }
}

/// Lazily rendered 60 FPS stereo stream.
pub struct StereoFrames<'a> {
    gt: &'a GroundTruth,
    camera: CameraModel,
    seed: u64,
    next: u64,
    count: u64,
}

impl Iterator for StereoFrames<'_> {
    type Item = StereoFrame;

    fn next(&mut self) -> Option<StereoFrame> {
        if self.next >= self.count {
            return None;
        }
        let f = render_stereo_frame(self.gt, &self.camera, self.next, self.seed);
        self.next += 1;
        Some(f)
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let r = (self.count - self.next) as usize;
        (r, Some(r))
    }
}

impl ExactSizeIterator for StereoFrames<'_> {}

pub fn render_stereo_frames<'a>(
    gt: &'a GroundTruth,
    camera: &CameraModel,
    seed: u64,
) -> StereoFrames<'a> {
    StereoFrames {
        gt,
        camera: camera.clone(),
        seed,
        next: 0,
        count: frame_count(gt.duration_ns),
    }
}

/// Renders a batch of frame indices, in parallel when requested.
pub fn render_frames_batch(
    exec: Exec,
    gt: &GroundTruth,
    camera: &CameraModel,
    indices: &[u64],
    seed: u64,
) -> Vec<StereoFrame> {
    par::map(exec, indices, |&i| render_stereo_frame(gt, camera, i, seed))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sensors::trajectory::{generate_trajectory, Motion, TrajectorySpec};

    fn one_landmark(at: [f64; 3]) -> Vec<Landmark> {
        vec![Landmark { id: 3, position: at }]
    }

    #[test]
    fn empty_view_is_uniform() {
        let cam = CameraModel::default();
        let (l, r) = render_view(&cam, &Pose2::new(0.0, 0.0, 0.0), &[], 1);
        assert!(l.data.iter().all(|&p| p == cam.background));
        assert_eq!(l, r);
    }

    #[test]
    fn disparity_follows_focal_baseline_over_depth() {
        let cam = CameraModel {
            focal_px: 400.0,
            baseline_m: 0.1,
            ..Default::default()
        };
        let p = cam
            .project_point(&Pose2::new(0.0, 0.0, 0.0), [2.0, 0.3, 0.5])
            .unwrap();
        assert!((p.depth - 2.0).abs() < 1e-12);
        assert!((p.disparity() - 20.0).abs() < 1e-12);
    }

    fn centroid_u(img: &GrayImage, bg: u8) -> f64 {
        let mut s = 0.0;
        let mut m = 0.0;
        for y in 0..img.height {
            for x in 0..img.width {
                let w = img.get(x, y) as f64 - bg as f64;
                s += w * x as f64;
                m += w;
            }
        }
        s / m
    }

    #[test]
    fn rendered_disparity_within_one_pixel() {
        let cam = CameraModel::default();
        let pose = Pose2::new(0.0, 0.0, 0.0);
        let lm = one_landmark([3.0, 0.4, 0.3]);
        let (l, r) = render_view(&cam, &pose, &lm, 1);
        let p = cam.project_point(&pose, lm[0].position).unwrap();
        let d = centroid_u(&l, cam.background) - centroid_u(&r, cam.background);
        assert!((d - p.disparity()).abs() < 1.0, "{d} vs {}", p.disparity());
    }

    #[test]
    fn behind_camera_not_drawn() {
        let cam = CameraModel::default();
        let (l, _) = render_view(
            &cam,
            &Pose2::new(0.0, 0.0, 0.0),
            &one_landmark([-3.0, 0.0, 0.5]),
            1,
        );
        assert!(l.data.iter().all(|&p| p == cam.background));
    }

    #[test]
    fn ten_seconds_is_600_frames() {
        let gt = generate_trajectory(&TrajectorySpec::new(Motion::Stationary, 10.0, 1)).unwrap();
        let frames = render_stereo_frames(&gt, &CameraModel::default(), 1);
        assert_eq!(frames.len(), 600);
        assert_eq!(frame_time_ns(599), 9_983_333_333);
    }

    #[test]
    fn rendering_is_deterministic_with_noise() {
        let gt = generate_trajectory(&TrajectorySpec::new(
            Motion::Circle { radius: 2.0, speed: 1.0 },
            1.0,
            4,
        ))
        .unwrap();
        let cam = CameraModel {
            pixel_noise_std: 2.0,
            ..Default::default()
        };
        let a = render_stereo_frame(&gt, &cam, 10, 77);
        let b = render_stereo_frame(&gt, &cam, 10, 77);
        assert_eq!(a, b);
        let batch = render_frames_batch(Exec::Parallel, &gt, &cam, &[10], 77);
        assert_eq!(batch[0], a);
    }
}

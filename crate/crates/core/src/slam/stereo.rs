//! Left/right feature association and depth from disparity.

use serde::{Deserialize, Serialize};

use super::{FeaturePoint, Observation, SlamError};
use crate::sensors::CameraModel;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StereoParams {
    /// Largest allowed row difference between left and right features, px.
    pub max_row_diff: f64,
    pub min_disparity: f64,
    pub max_disparity: f64,
    pub max_descriptor_distance: f32,
    pub ratio: f32,
}

impl Default for StereoParams {
    fn default() -> Self {
        Self {
            max_row_diff: 1.0,
            min_disparity: 0.5,
            max_disparity: 160.0,
            max_descriptor_distance: 0.25,
            ratio: 0.8,
        }
    }
}

/// Camera-frame point (X right, Y down, Z forward) from a stereo pair.
pub fn triangulate_stereo(
    left: &FeaturePoint,
    right: &FeaturePoint,
    camera: &CameraModel,
    min_disparity: f64,
) -> Result<[f64; 3], SlamError> {
    let d = left.u - right.u;
    if !(d > min_disparity) {
        return Err(SlamError::DisparityTooSmall {
            disparity: d,
            min: min_disparity,
        });
    }
    let z = camera.focal_px * camera.baseline_m / d;
    Ok([
        (left.u - camera.cx) * z / camera.focal_px,
        (left.v - camera.cy) * z / camera.focal_px,
        z,
    ])
}

fn best_two<'a, I>(cands: I) -> Option<(usize, f32, f32)>
where
    I: Iterator<Item = (usize, f32)> + 'a,
{
    let mut best: Option<(usize, f32)> = None;
    let mut second = f32::INFINITY;
    for (i, d) in cands {
        match best {
            Some((_, bd)) if d >= bd => second = second.min(d),
            Some((_, bd)) => {
                second = bd;
                best = Some((i, d));
            }
            None => best = Some((i, d)),
        }
    }
    best.map(|(i, d)| (i, d, second))
}

/// Mutually-best, ratio-tested stereo matches, triangulated into robot-frame
/// observations.
pub fn stereo_observations(
    left: &[FeaturePoint],
    right: &[FeaturePoint],
    camera: &CameraModel,
    p: &StereoParams,
) -> Vec<Observation> {
    let compatible = |l: &FeaturePoint, r: &FeaturePoint| {
        let d = l.u - r.u;
        (l.v - r.v).abs() <= p.max_row_diff && d > p.min_disparity && d <= p.max_disparity
    };
    // Right features sorted by row for windowed lookup.
    let mut by_row: Vec<usize> = (0..right.len()).collect();
    by_row.sort_by(|&a, &b| right[a].v.total_cmp(&right[b].v).then(a.cmp(&b)));
    let rows: Vec<f64> = by_row.iter().map(|&i| right[i].v).collect();
    let window = |v: f64| {
        let lo = rows.partition_point(|&r| r < v - p.max_row_diff);
        let hi = rows.partition_point(|&r| r <= v + p.max_row_diff);
        &by_row[lo..hi]
    };

    let mut out = Vec::new();
    for (li, l) in left.iter().enumerate() {
        let cands = window(l.v)
            .iter()
            .filter(|&&ri| compatible(l, &right[ri]))
            .map(|&ri| (ri, l.descriptor.distance(&right[ri].descriptor)));
        let Some((ri, d, second)) = best_two(cands) else {
            continue;
        };
        if d > p.max_descriptor_distance || (second.is_finite() && d >= p.ratio * second) {
            continue;
        }
        // Mutual check: no other left feature is closer to this right one.
        let r = &right[ri];
        let back = left
            .iter()
            .enumerate()
            .filter(|(_, l2)| compatible(l2, r))
            .map(|(i, l2)| (i, l2.descriptor.distance(&r.descriptor)));
        if best_two(back).map(|(i, _, _)| i) != Some(li) {
            continue;
        }
        if let Ok(cam) = triangulate_stereo(l, r, camera, p.min_disparity) {
            out.push(Observation {
                feature: l.clone(),
                camera_point: cam,
                body: camera.camera_to_body(cam),
            });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Pose2;
    use crate::slam::Descriptor;

    fn feat(u: f64, v: f64) -> FeaturePoint {
        let mut d = [0f32; 64];
        d[0] = 1.0;
        FeaturePoint {
            u,
            v,
            pixel: (u as u32, v as u32),
            score: 1.0,
            descriptor: Descriptor(d),
        }
    }

    #[test]
    fn depth_from_disparity() {
        let cam = CameraModel {
            focal_px: 400.0,
            baseline_m: 0.1,
            ..Default::default()
        };
        let p = triangulate_stereo(&feat(340.0, 240.0), &feat(320.0, 240.0), &cam, 0.5).unwrap();
        assert!((p[2] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn tiny_disparity_rejected() {
        let cam = CameraModel::default();
        let e = triangulate_stereo(&feat(320.1, 240.0), &feat(320.0, 240.0), &cam, 0.5);
        assert!(matches!(e, Err(SlamError::DisparityTooSmall { .. })));
    }

    #[test]
    fn projection_roundtrip() {
        let cam = CameraModel::default();
        let pose = Pose2::new(0.4, -0.3, 0.7);
        let world = [2.5, 1.9, 0.8];
        let pr = cam.project_point(&pose, world).unwrap();
        let l = feat(pr.u_left, pr.v);
        let r = feat(pr.u_right, pr.v);
        let c = triangulate_stereo(&l, &r, &cam, 0.5).unwrap();
        let body = cam.camera_to_body(c);
        let w = pose.transform([body[0], body[1]]);
        assert!((w[0] - world[0]).abs() < 1e-6);
        assert!((w[1] - world[1]).abs() < 1e-6);
        assert!((body[2] - world[2]).abs() < 1e-6);
    }
}

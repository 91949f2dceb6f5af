use deskbot_core::geometry::Pose2;
use deskbot_core::par::Exec;
use deskbot_core::rng::XorShift64Star;
use deskbot_core::sensors::*;
use deskbot_core::slam::*;

fn circle(radius: f64, duration_s: f64, seed: u64) -> GroundTruth {
    generate_trajectory(&TrajectorySpec::new(Motion::Circle { radius, speed: 1.0 }, duration_s, seed)).unwrap()
}

fn truth_state(gt: &GroundTruth, t_ns: u64) -> AgentState {
    let p = gt.pose_at(t_ns);
    AgentState { t_ns, position: [p.x, p.y], velocity: [p.vx, p.vy], heading: p.heading }
}

/// Corners of every fiducial that projects into the left image.
fn projected_corners(gt: &GroundTruth, cam: &CameraModel, t_ns: u64) -> (Vec<(f64, f64)>, usize) {
    let p = gt.pose_at(t_ns);
    let pose = Pose2::new(p.x, p.y, p.heading);
    let h = FIDUCIAL_PX / 2.0;
    let mut corners = Vec::new();
    let mut inside = 0;
    for l in &gt.landmarks {
        if let Some(pr) = cam.project_point(&pose, l.position) {
            if cam.fully_inside(pr.u_left, pr.v) {
                inside += 1;
            }
            for (du, dv) in [(-h, -h), (h, -h), (-h, h), (h, h)] {
                // Corner pixels sit half a pixel inside the patch edge.
                corners.push((pr.u_left + du - du.signum() * 0.5, pr.v + dv - dv.signum() * 0.5));
            }
        }
    }
    (corners, inside)
}

#[test]
fn detected_features_lie_on_projected_fiducials() {
    let gt = circle(4.0, 2.0, 7);
    let cam = CameraModel::default();
    let harris = HarrisParams::default();
    for index in [0, 30, 90] {
        let frame = render_stereo_frame(&gt, &cam, index, 1);
        let feats = extract_features(&frame.left, &harris);
        let (corners, visible) = projected_corners(&gt, &cam, frame.t_ns);
        assert!(visible > 0);
        assert!(feats.len() >= visible, "frame {index}: {} features for {visible} fiducials", feats.len());
        for f in &feats {
            let near = corners.iter().map(|&(u, v)| (f.u - u).hypot(f.v - v)).fold(f64::INFINITY, f64::min);
            assert!(near <= 2.0, "frame {index}: feature at ({}, {}) is {near} px from any corner", f.u, f.v);
        }
    }
}

fn observations_at(gt: &GroundTruth, cam: &CameraModel, index: u64) -> Vec<Observation> {
    let params = SlamParams::default();
    let frame = render_stereo_frame(gt, cam, index, 1);
    let l = extract_features(&frame.left, &params.harris);
    let r = extract_features(&frame.right, &params.harris);
    stereo_observations(&l, &r, cam, &params.stereo)
}

#[test]
fn exact_reobservation_matches_every_point() {
    let gt = circle(4.0, 1.0, 7);
    let cam = CameraModel::default();
    let obs = observations_at(&gt, &cam, 12);
    assert!(obs.len() >= 10);
    let state = truth_state(&gt, frame_time_ns(12));
    let mut map = WorldMap::new(0.05, 0.5);
    extend_map(&mut map, &obs, &[], &state);
    let matches = match_features(&obs, &map, &state, &MatchParams::default());
    assert_eq!(matches.len(), map.len());
}

#[test]
fn random_descriptors_never_match() {
    let gt = circle(4.0, 1.0, 7);
    let cam = CameraModel::default();
    let obs = observations_at(&gt, &cam, 12);
    let state = truth_state(&gt, frame_time_ns(12));
    let mut map = WorldMap::new(0.05, 0.5);
    extend_map(&mut map, &obs, &[], &state);

    let mut rng = XorShift64Star::new(3);
    let mut total = 0;
    for _ in 0..50 {
        let scrambled: Vec<Observation> = obs
            .iter()
            .map(|o| {
                let mut o = o.clone();
                let raw: [f32; DESCRIPTOR_LEN] = std::array::from_fn(|_| rng.gaussian(0.0, 1.0) as f32);
                o.feature.descriptor = Descriptor::normalized(raw).unwrap();
                o
            })
            .collect();
        total += match_features(&scrambled, &map, &state, &MatchParams::default()).len();
    }
    assert_eq!(total, 0);
}

#[test]
fn second_lap_adds_no_points() {
    // A whole number of frame strides per lap, so lap two repeats lap one's views.
    let lap_s = 6.0;
    let radius = lap_s / (2.0 * std::f64::consts::PI);
    let mut spec = TrajectorySpec::new(Motion::Circle { radius, speed: 1.0 }, 2.0 * lap_s, 5);
    // Nearer than 2.5 m, neighbouring fiducial corners fall inside the merge
    // radius and fuse in an order-dependent way.
    spec.landmarks.min_range_m = 2.6;
    spec.landmarks.max_range_m = 7.0;
    let gt = generate_trajectory(&spec).unwrap();
    let cam = CameraModel::default();
    let imu = sample_imu(&gt, &ImuErrorModel::default(), 1).unwrap();
    let mut pipe = SlamPipeline::new(truth_state(&gt, 0), cam.clone(), SlamParams::default()).unwrap();
    let lap_ns = (lap_s * 1e9) as u64;
    let mut after_first = None;
    let mut next_imu = 0;
    for k in (0..frame_count(gt.duration_ns)).step_by(6) {
        let t = frame_time_ns(k);
        if after_first.is_none() && t >= lap_ns {
            after_first = Some(pipe.map().len());
        }
        while next_imu < imu.len() && imu[next_imu].t_ns <= t {
            pipe.on_imu(&imu[next_imu]).unwrap();
            next_imu += 1;
        }
        pipe.process_frame(&render_stereo_frame(&gt, &cam, k, 1), Exec::default());
    }
    let after_first = after_first.unwrap();
    assert!(after_first > 20);
    assert_eq!(pipe.map().len(), after_first);
    let min = pipe.map().min_pair_distance().unwrap();
    assert!(min >= pipe.map().merge_radius(), "{min}");
}

#[test]
fn two_hundred_states_per_second() {
    let gt = circle(4.0, 3.0, 7);
    let imu = sample_imu(&gt, &ImuErrorModel::default(), 1).unwrap();
    let run = run_offline(&gt, &imu, &CameraModel::default(), SlamParams::default(), 12, 1, Exec::default()).unwrap();
    assert_eq!(run.states_emitted, 600);
    assert_eq!(run.final_state.t_ns, imu.last().unwrap().t_ns);
}

//! Runs every acceptance criterion and prints one PASS/FAIL line each.

use std::io::Write;
use std::net::TcpStream;
use std::sync::Arc;
use std::time::Instant;

use deskbot_core::geometry::{normalize_angle, Pose2};
use deskbot_core::offload::protocol::{codes, read_message, write_message};
use deskbot_core::offload::*;
use deskbot_core::par::Exec;
use deskbot_core::rng::XorShift64Star;
use deskbot_core::runtime::*;
use deskbot_core::sensors::*;
use deskbot_core::slam::{run_offline, update_pose, AgentState, Match, SlamParams};
use deskbot_core::speech::{viterbi, GmmComponent, GmmModel, SpeechError};
use deskbot_core::vision::shapes::{canonical_shape, shape_dataset, shape_tensor, ShapeKind, SHAPE_SIDE};
use deskbot_core::vision::*;

mod common;
use common::*;

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn slam_drift() -> Outcome {
    let started = Instant::now();
    let spec = TrajectorySpec::new(Motion::Circle { radius: 4.0, speed: 1.0 }, 10.0, 7);
    let gt = generate_trajectory(&spec).map_err(|e| e.to_string())?;
    let err = ImuErrorModel { accel_bias: [0.05, 0.0], ..Default::default() };
    let imu = sample_imu(&gt, &err, 11).map_err(|e| e.to_string())?;
    let cam = CameraModel::default();
    let end = gt.final_pose();
    let final_error = |updates: bool| -> Result<f64, String> {
        let params = SlamParams { updates_enabled: updates, ..Default::default() };
        let run = run_offline(&gt, &imu, &cam, params, 6, 3, Exec::default()).map_err(|e| e.to_string())?;
        let p = run.final_state.position;
        Ok((p[0] - end.x).hypot(p[1] - end.y))
    };
    let open = final_error(false)?;
    let closed = final_error(true)?;
    let secs = started.elapsed().as_secs_f64();
    check(
        open >= 1.5 && closed <= 0.1 * open && secs < 10.0,
        format!("propagation-only {open:.3} m, full pipeline {closed:.3} m, {secs:.1} s"),
    )
}

fn pose_update_exactness() -> Outcome {
    let mut rng = XorShift64Star::new(77);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let truth = Pose2::new(rng.uniform(-20.0, 20.0), rng.uniform(-20.0, 20.0), rng.uniform(-3.1, 3.1));
        let n = 2 + rng.below(19) as usize;
        let mut world: Vec<[f64; 2]> = Vec::new();
        while world.len() < n {
            let w = [rng.uniform(-10.0, 10.0), rng.uniform(-10.0, 10.0)];
            if world.iter().all(|p| (p[0] - w[0]).hypot(p[1] - w[1]) > 0.1) {
                world.push(w);
            }
        }
        let matches: Vec<Match> = world
            .iter()
            .enumerate()
            .map(|(i, &w)| Match {
                map_id: i as u64,
                map_position: w,
                observed: truth.inverse_transform(w),
                observation_index: i,
                descriptor_distance: 0.0,
            })
            .collect();
        let guess = AgentState::at_rest(0, [rng.uniform(-5.0, 5.0), rng.uniform(-5.0, 5.0)], rng.uniform(-3.0, 3.0));
        let s = update_pose(&guess, &matches).state;
        worst = worst
            .max((s.position[0] - truth.x).abs())
            .max((s.position[1] - truth.y).abs())
            .max(normalize_angle(s.heading - truth.heading).abs());
    }
    check(worst <= 1e-9, format!("max error {worst:.2e} over 1000 instances"))
}

fn slam_throughput() -> Outcome {
    let run = |lane, ms| run_scenario(&slam_only(lane, ms, 10.0)).map_err(|e| e.to_string()).map(|o| o.report.slam.unwrap());
    let cpu = run(LaneKind::Cpu, 100.0)?;
    let gpu = run(LaneKind::Gpu, 1.11)?;
    check(
        (cpu.fps - 10.0).abs() <= 0.5 && (gpu.fps - 18.0).abs() <= 0.9 && !cpu.stable_localization && gpu.stable_localization,
        format!(
            "cpu-only {:.2} FPS (stable {}), gpu frontend {:.2} FPS (stable {})",
            cpu.fps, cpu.stable_localization, gpu.fps, gpu.stable_localization
        ),
    )
}

fn cnn_oracles() -> Outcome {
    let mut rng = XorShift64Star::new(500);
    let mut fails = 0;
    for _ in 0..500 {
        // Input sizes are derived from output sizes so every window tiles.
        let cin = 1 + rng.below(3) as usize;
        let k = 1 + rng.below(4) as usize;
        let stride = 1 + rng.below(2) as usize;
        let (oh, ow) = (1 + rng.below(8) as usize, 1 + rng.below(8) as usize);
        let mut pad = rng.below(k as u64) as usize;
        if (oh.min(ow) - 1) * stride + k <= 2 * pad {
            pad = 0;
        }
        let h = (oh - 1) * stride + k - 2 * pad;
        let w = (ow - 1) * stride + k - 2 * pad;
        let x = random_tensor(&mut rng, vec![cin, h, w]);
        let filters = 1 + rng.below(4) as usize;
        let c = random_conv(&mut rng, cin, filters, k, stride, pad);
        let conv_ok = conv_forward(&x, &c).map_or(false, |y| close_rel(y.data(), &naive_conv(&x, &c), 1e-12));
        let win = 1 + rng.below(3) as usize;
        let dims = vec![cin, win * (1 + rng.below(6) as usize), win * (1 + rng.below(6) as usize)];
        let p = random_tensor(&mut rng, dims);
        let pool_ok = pool_forward(&p, &Pool { kind: PoolKind::Max, window: win, stride: win })
            .map_or(false, |y| y.data() == naive_pool(&p, win, win).as_slice());
        let (inputs, outputs) = (1 + rng.below(40) as usize, 1 + rng.below(10) as usize);
        let f = FullyConnected {
            inputs,
            outputs,
            weights: (0..inputs * outputs).map(|_| rng.uniform(-1.0, 1.0)).collect(),
            bias: (0..outputs).map(|_| rng.uniform(-1.0, 1.0)).collect(),
        };
        let v = random_tensor(&mut rng, vec![inputs]);
        let fc_ok = fc_forward(&v, &f).map_or(false, |y| close_rel(y.data(), &naive_fc(v.data(), &f), 1e-12));
        fails += [conv_ok, pool_ok, fc_ok].iter().filter(|ok| !**ok).count();
    }

    let net = load_network(SHAPE_NET).map_err(|e| e.to_string())?;
    let mut composition_ok = true;
    let mut worst_sum: f64 = 0.0;
    for (_, px) in shape_dataset(31, 20) {
        let img = shape_tensor(&px);
        let mut x = img.clone();
        for l in &net.layers {
            x = match l {
                LayerSpec::Conv(c) => conv_forward(&x, c).unwrap(),
                LayerSpec::Activation(k) => apply_activation(&x, *k),
                LayerSpec::Pool(p) => pool_forward(&x, p).unwrap(),
                LayerSpec::FullyConnected(f) => fc_forward(&x, f).unwrap(),
                LayerSpec::Softmax => softmax(&x),
            };
        }
        worst_sum = worst_sum.max((x.data().iter().sum::<f64>() - 1.0).abs());
        for l in infer(&net, &img).map_err(|e| e.to_string())? {
            let i = net.labels.iter().position(|n| *n == l.name).unwrap();
            composition_ok &= l.score == x.data()[i];
        }
    }
    for _ in 0..200 {
        let v = (0..1 + rng.below(20)).map(|_| rng.uniform(-700.0, 700.0)).collect();
        worst_sum = worst_sum.max((softmax(&Tensor::vector(v)).data().iter().sum::<f64>() - 1.0).abs());
    }
    check(
        fails == 0 && composition_ok && worst_sum <= 1e-9,
        format!("{fails} layer mismatches over 500 shapes, composition exact {composition_ok}, softmax error {worst_sum:.1e}"),
    )
}

fn fixture_classifier() -> Outcome {
    let net = load_network(SHAPE_NET).map_err(|e| e.to_string())?;
    let set = shape_dataset(2024, 200);
    let imgs: Vec<Tensor> = set.iter().map(|(_, p)| shape_tensor(p)).collect();
    let out = infer_many(&net, &imgs, Exec::default());
    let correct = set
        .iter()
        .zip(&out)
        .filter(|((k, _), l)| l.as_ref().map_or(false, |l| l[0].name == k.name()))
        .count();
    let started = Instant::now();
    infer(&net, &imgs[0]).map_err(|e| e.to_string())?;
    let ms = started.elapsed().as_secs_f64() * 1e3;
    check(correct >= 190 && ms < 100.0, format!("{correct}/200 top-1, single inference {ms:.2} ms"))
}

fn viterbi_and_gmm() -> Outcome {
    let mut rng = XorShift64Star::new(606);
    let mut bad = 0;
    for _ in 0..1000 {
        let n = 1 + rng.below(4) as usize;
        let t = 1 + rng.below(6) as usize;
        let init = random_log_dist(&mut rng, n);
        let trans: Vec<Vec<f64>> = (0..n).map(|_| random_log_dist(&mut rng, n)).collect();
        let emit: Vec<Vec<f64>> = (0..t).map(|_| (0..n).map(|_| rng.uniform(-5.0, 2.0)).collect()).collect();
        let best = brute_force(&init, &trans, &emit);
        let ok = match viterbi(&init, &trans, &emit) {
            Ok((path, score)) => score == best && oracle_path_score(&init, &trans, &emit, &path) == best,
            Err(SpeechError::DecodeFailure) => best == f64::NEG_INFINITY,
            Err(_) => false,
        };
        bad += !ok as usize;
    }
    let mut gmm_err: f64 = 0.0;
    for _ in 0..1000 {
        let k = 1 + rng.below(4) as usize;
        let d = 1 + rng.below(12) as usize;
        let g = random_gmm(&mut rng, k, d);
        let x: Vec<f64> = (0..d).map(|_| rng.uniform(-1.5, 1.5)).collect();
        let v = g.log_likelihood(&x).map_err(|e| e.to_string())?;
        gmm_err = gmm_err.max((v - linear_gmm(&g, &x)).abs());
    }
    let unit = GmmModel { components: vec![GmmComponent { weight: 1.0, mean: vec![0.0], var: vec![1.0] }] };
    let at_zero = unit.log_likelihood(&[0.0]).map_err(|e| e.to_string())?;
    check(
        bad == 0 && gmm_err <= 1e-9 && (at_zero + 0.918939).abs() <= 1e-6,
        format!("{bad}/1000 viterbi mismatches, gmm error {gmm_err:.1e}, N(0;0,1) log density {at_zero:.6}"),
    )
}

fn command_path() -> Outcome {
    let mut cfg = bundled("paper-local");
    cfg.duration_s = 5.0;
    cfg.services.vision.enabled = false;
    cfg.deadlines.retain(|d| d.service != ServiceId::Vision);
    cfg.services.speech.script = vec![ScriptedWord { at_s: 2.0, word: "stop".into() }];
    let out = run_scenario(&cfg).map_err(|e| e.to_string())?;
    let halt = out
        .report
        .actions
        .iter()
        .find(|a| a.action == Action::Halt && a.trigger == "stop")
        .ok_or("no stop action dispatched")?;
    let moving_before = out.chassis.iter().any(|(t, c)| *t < halt.t_ns && !c.is_zero());
    let after: Vec<_> = out.chassis.iter().filter(|(t, _)| *t >= halt.t_ns).collect();
    let zero_after = !after.is_empty() && after.iter().all(|(_, c)| c.is_zero());
    check(
        moving_before && zero_after,
        format!(
            "halt at {:.3} s, moving before {moving_before}, {} later commands all zero {zero_after}",
            halt.t_ns as f64 * 1e-9,
            after.len()
        ),
    )
}

fn utilization_and_power() -> Outcome {
    let mut cfg = bundled("paper-local");
    cfg.execute_models = false;
    let r = run_scenario(&cfg).map_err(|e| e.to_string())?.report;
    let u = r.utilization;
    let exact = u.cpu_pct == 60.0 && u.gpu_pct == 72.0 && u.mem_pct == 28.0;
    let headroom = u.cpu_pct < 100.0 && u.gpu_pct < 100.0 && u.mem_pct < 100.0;
    check(
        exact && headroom && (r.power_w - 11.0).abs() < 1e-9,
        format!("cpu {}% gpu {}% mem {}%, {} W", u.cpu_pct, u.gpu_pct, u.mem_pct, r.power_w),
    )
}

fn offload_decisions() -> Outcome {
    let cfg = bundled("paper-offload");
    let plan = decide_placement(&cfg.tolerances, &cfg.endpoints);
    let verdict = |kind: EndpointKind, s: ServiceId| {
        plan.candidates.iter().find(|c| c.kind == kind && c.service == s).map(|c| c.passes)
    };
    let wan_fails = [ServiceId::Vision, ServiceId::Speech].iter().all(|&s| verdict(EndpointKind::WanCloud, s) == Some(false));
    let lan_passes = [ServiceId::Vision, ServiceId::Speech].iter().all(|&s| verdict(EndpointKind::LanCloud, s) == Some(true));
    let mut slam_local = ["paper-local", "paper-offload", "paper-wan"].iter().all(|name| {
        let c = bundled(name);
        !decide_placement(&c.tolerances, &c.endpoints).is_offloaded(ServiceId::Slam)
    });

    let mut rng = XorShift64Star::new(909);
    let mut violations = 0;
    for _ in 0..1000 {
        let endpoints = random_endpoints(&mut rng);
        let tight = random_tolerances(&mut rng);
        let mut loose = tight;
        let extra = rng.uniform(0.0, 500.0);
        for s in ServiceId::ALL {
            loose.set(s, tight.get(s) + extra);
        }
        let a = decide_placement(&tight, &endpoints);
        let b = decide_placement(&loose, &endpoints);
        violations += ServiceId::ALL.iter().filter(|&&s| a.is_offloaded(s) && !b.is_offloaded(s)).count();
        slam_local &= !a.is_offloaded(ServiceId::Slam) && !b.is_offloaded(ServiceId::Slam);
    }
    check(
        wan_fails && lan_passes && slam_local && violations == 0,
        format!("wan fails {wan_fails}, lan passes {lan_passes}, slam local {slam_local}, {violations} monotonicity violations"),
    )
}

fn energy() -> Outcome {
    let cfg = bundled("paper-offload");
    let plan = decide_placement(&cfg.tolerances, &cfg.endpoints);
    let c = compare_energy(&plan, &cfg.device, 24.0).map_err(|e| e.to_string())?;
    let within = |h: f64, target: f64| (h - target).abs() <= 0.15 * target;
    check(
        (c.plan.power_w - 5.0).abs() < 1e-9
            && c.battery_ratio >= 2.0
            && within(c.all_local.battery_hours, 2.0)
            && within(c.plan.battery_hours, 5.0),
        format!(
            "plan {} W, all-local {} W, {:.2} h vs {:.2} h, ratio {:.2}",
            c.plan.power_w, c.all_local.power_w, c.plan.battery_hours, c.all_local.battery_hours, c.battery_ratio
        ),
    )
}

fn wire_protocol() -> Outcome {
    let mut rng = XorShift64Star::new(1111);
    let mut bad = 0;
    for _ in 0..10_000 {
        let m = random_message(&mut rng);
        let ok = encode_message(&m).map_or(false, |b| b == oracle_frame(&m) && decode_message(&b).as_ref() == Ok(&m));
        bad += !ok as usize;
    }

    let models = Arc::new(OffloadModels::load(MODELS_DIR).map_err(|e| e.to_string())?);
    let server = OffloadServer::bind("127.0.0.1:0", models).map_err(|e| e.to_string())?;
    let addr = server.local_addr();
    server.spawn();
    let io = |e: std::io::Error| e.to_string();
    let frame = |e: protocol::FrameIoError| e.to_string();
    let mut s = TcpStream::connect(addr).map_err(io)?;
    let side = SHAPE_SIDE as u16;
    let square = WireMessage::ObjRequest { width: side, height: side, channels: 1, pixels: canonical_shape(ShapeKind::Square) };
    let audio = concat_chunks(&synthesize_audio(&["stop"], &AudioParams::default(), 5).map_err(|e| e.to_string())?);
    let stop = WireMessage::AsrRequest { sample_rate: 8000, samples: audio };

    write_message(&mut s, &square).map_err(frame)?;
    let label = match read_message(&mut s).map_err(frame)? {
        WireMessage::ObjResponse { labels } => labels.first().map(|l| l.name.clone()).unwrap_or_default(),
        other => format!("{other:?}"),
    };
    write_message(&mut s, &stop).map_err(frame)?;
    let text = match read_message(&mut s).map_err(frame)? {
        WireMessage::AsrResponse { text, .. } => text,
        other => format!("{other:?}"),
    };

    s.write_all(b"\x00\x01garbage\xff").map_err(io)?;
    write_message(&mut s, &square).map_err(frame)?;
    let error_first = matches!(read_message(&mut s).map_err(frame)?, WireMessage::Error { code: codes::BAD_MAGIC, .. });
    let continues = matches!(read_message(&mut s).map_err(frame)?, WireMessage::ObjResponse { labels } if labels[0].name == "square");

    check(
        bad == 0 && label == "square" && text == "stop" && error_first && continues,
        format!(
            "{bad}/10000 roundtrip failures, loopback '{label}' / '{text}', malformed frame answered {error_first}, continued {continues}"
        ),
    )
}

fn determinism() -> Outcome {
    let mut summary = Vec::new();
    for name in ["paper-local", "paper-offload", "paper-wan"] {
        let cfg = bundled(name);
        let run = || -> Result<(String, Vec<u8>), String> {
            let out = run_scenario(&cfg).map_err(|e| e.to_string())?;
            let mut trace = Vec::new();
            write_trace_csv(&mut trace, &out.records).map_err(|e| e.to_string())?;
            Ok((out.report.to_json(), trace))
        };
        let (a, b) = (run()?, run()?);
        if a != b {
            return Err(format!("{name} differs between runs"));
        }
        summary.push(format!("{name} {} report bytes {} trace bytes", a.0.len(), a.1.len()));
    }
    Ok(summary.join(", "))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 12] = [
        ("slam drift correction", slam_drift),
        ("pose update exactness", pose_update_exactness),
        ("slam throughput fixtures", slam_throughput),
        ("cnn oracle equivalence", cnn_oracles),
        ("fixture classifier", fixture_classifier),
        ("viterbi optimality and gmm", viterbi_and_gmm),
        ("end-to-end command path", command_path),
        ("utilization and power fixtures", utilization_and_power),
        ("offload decision table", offload_decisions),
        ("energy conclusion", energy),
        ("wire protocol", wire_protocol),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let started = Instant::now();
        let result = std::panic::catch_unwind(f).unwrap_or_else(|_| Err("panicked".into()));
        let secs = started.elapsed().as_secs_f64();
        match result {
            Ok(d) => println!("criterion {:>2} {name}: PASS ({d}) [{secs:.1} s]", i + 1),
            Err(d) => {
                failed += 1;
                println!("criterion {:>2} {name}: FAIL ({d}) [{secs:.1} s]", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}

//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

use std::collections::BTreeMap;

use deskbot_core::config::ScenarioConfig;
use deskbot_core::offload::{Endpoint, EndpointKind, LatencyModel, LatencyTolerances, Transport, WireLabel, WireMessage};
use deskbot_core::rng::XorShift64Star;
use deskbot_core::runtime::{LaneKind, ServiceId};
use deskbot_core::speech::{GmmComponent, GmmModel};
use deskbot_core::vision::{Conv, FullyConnected, Tensor};

pub const SHAPE_NET: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/../../models/shape_net.json");
pub const SPEECH_MODEL: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/../../models/speech_model.json");
pub const MODELS_DIR: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/../../models");
pub const SCENARIOS_DIR: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/../../scenarios");

pub fn random_tensor(rng: &mut XorShift64Star, dims: Vec<usize>) -> Tensor {
    let n = dims.iter().product();
    Tensor::new(dims, (0..n).map(|_| rng.uniform(-1.0, 1.0)).collect()).unwrap()
}

pub fn naive_conv(x: &Tensor, c: &Conv) -> Vec<f64> {
    let [cin, h, w] = x.dims() else { panic!() };
    let (kh, kw) = c.kernel;
    let oh = (h + 2 * c.pad - kh) / c.stride + 1;
    let ow = (w + 2 * c.pad - kw) / c.stride + 1;
    let wd = c.weights.data();
    let mut out = Vec::new();
    for f in 0..c.num_filters {
        for oy in 0..oh {
            for ox in 0..ow {
                let mut s = c.bias[f];
                for ch in 0..*cin {
                    for ky in 0..kh {
                        for kx in 0..kw {
                            let iy = (oy * c.stride + ky) as i64 - c.pad as i64;
                            let ix = (ox * c.stride + kx) as i64 - c.pad as i64;
                            if iy >= 0 && ix >= 0 && (iy as usize) < *h && (ix as usize) < *w {
                                s += x.at(ch, iy as usize, ix as usize) * wd[((f * cin + ch) * kh + ky) * kw + kx];
                            }
                        }
                    }
                }
                out.push(s);
            }
        }
    }
    out
}

pub fn naive_pool(x: &Tensor, window: usize, stride: usize) -> Vec<f64> {
    let [c, h, w] = x.dims() else { panic!() };
    let mut out = Vec::new();
    for ch in 0..*c {
        for oy in 0..(h - window) / stride + 1 {
            for ox in 0..(w - window) / stride + 1 {
                let mut m = f64::MIN;
                for ky in 0..window {
                    for kx in 0..window {
                        m = m.max(x.at(ch, oy * stride + ky, ox * stride + kx));
                    }
                }
                out.push(m);
            }
        }
    }
    out
}

pub fn close_rel(a: &[f64], b: &[f64], tol: f64) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol * x.abs().max(y.abs()).max(1.0))
}

pub fn random_conv(rng: &mut XorShift64Star, cin: usize, filters: usize, k: usize, stride: usize, pad: usize) -> Conv {
    Conv {
        num_filters: filters,
        in_channels: cin,
        kernel: (k, k),
        stride,
        pad,
        weights: random_tensor(rng, vec![filters, cin, k, k]),
        bias: (0..filters).map(|_| rng.uniform(-1.0, 1.0)).collect(),
    }
}

pub fn naive_fc(x: &[f64], f: &FullyConnected) -> Vec<f64> {
    (0..f.outputs)
        .map(|o| f.bias[o] + (0..f.inputs).map(|i| f.weights[o * f.inputs + i] * x[i]).sum::<f64>())
        .collect()
}

pub fn linear_gmm(g: &GmmModel, x: &[f64]) -> f64 {
    g.components
        .iter()
        .map(|c| {
            let mut p = c.weight;
            for i in 0..x.len() {
                let d = x[i] - c.mean[i];
                p *= (-0.5 * d * d / c.var[i]).exp() / (2.0 * std::f64::consts::PI * c.var[i]).sqrt();
            }
            p
        })
        .sum::<f64>()
        .ln()
}

pub fn random_gmm(rng: &mut XorShift64Star, k: usize, d: usize) -> GmmModel {
    let w: Vec<f64> = (0..k).map(|_| rng.uniform(0.1, 1.0)).collect();
    let s: f64 = w.iter().sum();
    GmmModel {
        components: w
            .iter()
            .map(|wi| GmmComponent {
                weight: wi / s,
                mean: (0..d).map(|_| rng.uniform(-1.0, 1.0)).collect(),
                var: (0..d).map(|_| rng.uniform(0.5, 2.0)).collect(),
            })
            .collect(),
    }
}

pub fn oracle_path_score(init: &[f64], trans: &[Vec<f64>], emit: &[Vec<f64>], path: &[usize]) -> f64 {
    let mut s = init[path[0]] + emit[0][path[0]];
    for t in 1..path.len() {
        s = s + trans[path[t - 1]][path[t]] + emit[t][path[t]];
    }
    s
}

pub fn brute_force(init: &[f64], trans: &[Vec<f64>], emit: &[Vec<f64>]) -> f64 {
    let n = init.len();
    let t = emit.len();
    let mut best = f64::NEG_INFINITY;
    let mut path = vec![0usize; t];
    for code in 0..n.pow(t as u32) {
        let mut c = code;
        for p in path.iter_mut() {
            *p = c % n;
            c /= n;
        }
        best = best.max(oracle_path_score(init, trans, emit, &path));
    }
    best
}

pub fn random_log_dist(rng: &mut XorShift64Star, n: usize) -> Vec<f64> {
    let mut p: Vec<f64> = (0..n).map(|_| if rng.bool(0.25) { 0.0 } else { rng.uniform(0.05, 1.0) }).collect();
    if p.iter().all(|&x| x == 0.0) {
        p[rng.below(n as u64) as usize] = 1.0;
    }
    let s: f64 = p.iter().sum();
    p.iter().map(|x| (x / s).ln()).collect()
}

fn random_string(rng: &mut XorShift64Star, max: u64) -> String {
    (0..rng.below(max + 1)).map(|_| char::from(b'a' + rng.below(26) as u8)).collect()
}

/// Any well-formed message, sized to keep frames small.
pub fn random_message(rng: &mut XorShift64Star) -> WireMessage {
    match rng.below(5) {
        0 => {
            let (w, h, c) = (rng.below(9) as u16, rng.below(9) as u16, 1 + rng.below(3) as u8);
            let pixels = (0..w as usize * h as usize * c as usize).map(|_| rng.below(256) as u8).collect();
            WireMessage::ObjRequest { width: w, height: h, channels: c, pixels }
        }
        1 => WireMessage::ObjResponse {
            labels: (0..rng.below(5))
                .map(|_| WireLabel { name: random_string(rng, 12), score: rng.uniform(0.0, 1.0) as f32 })
                .collect(),
        },
        2 => WireMessage::AsrRequest {
            sample_rate: rng.below(48_001) as u32,
            samples: (0..rng.below(200)).map(|_| rng.next_u64() as i16).collect(),
        },
        3 => WireMessage::AsrResponse { text: random_string(rng, 40), server_processing_ns: rng.next_u64() },
        _ => WireMessage::Error { code: rng.below(65_536) as u16, message: random_string(rng, 30) },
    }
}

/// Byte layout written out field by field, without the library encoder.
pub fn oracle_frame(msg: &WireMessage) -> Vec<u8> {
    let mut p = Vec::new();
    let t = match msg {
        WireMessage::ObjRequest { width, height, channels, pixels } => {
            p.extend(width.to_be_bytes());
            p.extend(height.to_be_bytes());
            p.push(*channels);
            p.extend(pixels);
            1
        }
        WireMessage::ObjResponse { labels } => {
            p.push(labels.len() as u8);
            for l in labels {
                p.push(l.name.len() as u8);
                p.extend(l.name.bytes());
                p.extend(l.score.to_be_bytes());
            }
            2
        }
        WireMessage::AsrRequest { sample_rate, samples } => {
            p.extend(sample_rate.to_be_bytes());
            p.extend((samples.len() as u32).to_be_bytes());
            samples.iter().for_each(|s| p.extend(s.to_be_bytes()));
            3
        }
        WireMessage::AsrResponse { text, server_processing_ns } => {
            p.extend((text.len() as u16).to_be_bytes());
            p.extend(text.bytes());
            p.extend(server_processing_ns.to_be_bytes());
            4
        }
        WireMessage::Error { code, message } => {
            p.extend(code.to_be_bytes());
            p.extend(message.bytes());
            255
        }
    };
    let mut f = b"ROBO".to_vec();
    f.push(1);
    f.push(t);
    f.extend((p.len() as u32).to_be_bytes());
    f.extend(p);
    f
}

pub fn bundled(name: &str) -> ScenarioConfig {
    ScenarioConfig::load(format!("{SCENARIOS_DIR}/{name}.json")).unwrap()
}

/// SLAM alone, timing only, with the frontend on `lane` at `frontend_ms`.
pub fn slam_only(lane: LaneKind, frontend_ms: f64, duration_s: f64) -> ScenarioConfig {
    let mut cfg = bundled("paper-local");
    cfg.duration_s = duration_s;
    cfg.execute_models = false;
    cfg.services.vision.enabled = false;
    cfg.services.speech.enabled = false;
    cfg.services.speech.script.clear();
    cfg.services.vision.scene.clear();
    cfg.deadlines.retain(|d| d.service == ServiceId::Slam);
    let fe = cfg.stages.iter_mut().find(|s| s.name == "frontend").unwrap();
    fe.lane = lane;
    fe.cost_ms = frontend_ms;
    cfg.validate().unwrap();
    cfg
}

/// Local plus one to three clouds, each offering a random subset of services.
pub fn random_endpoints(rng: &mut XorShift64Star) -> Vec<Endpoint> {
    let mut v = vec![Endpoint::local()];
    for k in 0..1 + rng.below(3) {
        let mut services = BTreeMap::new();
        for s in ServiceId::ALL {
            if rng.bool(0.8) {
                let m = LatencyModel {
                    fixed_ms: rng.uniform(0.0, 400.0),
                    processing_ms: rng.uniform(0.0, 400.0),
                    jitter_ms: rng.uniform(0.0, 100.0),
                };
                services.insert(s, m);
            }
        }
        let kind = if rng.bool(0.5) { EndpointKind::LanCloud } else { EndpointKind::WanCloud };
        v.push(Endpoint { name: format!("cloud-{k}"), kind, address: None, transport: Transport::Simulated, services, seed: k });
    }
    v
}

pub fn random_tolerances(rng: &mut XorShift64Star) -> LatencyTolerances {
    let mut t = LatencyTolerances::default();
    for s in ServiceId::ALL {
        t.set(s, rng.uniform(0.0, 1000.0));
    }
    t
}

//! Scenario execution: sensor sources, service stage graphs, offload
//! clients and the run report.

use std::collections::BTreeMap;
use std::io::{self, Write};
use std::sync::Arc;
use std::time::{Duration, Instant};

use serde::Serialize;

use super::deadlines::achieved_rate;
use super::{
    battery_life_hours, check_deadlines, latency_summary, ms_to_ns, ActionRecord, ChassisCommand, Controller,
    DropPolicy, LaneKind, LatencySummary, PowerBreakdown, RuntimeError, Scheduler, ServiceId, StageId, StageSpec,
    TaskRecord, Utilization, Violation, WorkItem,
};
use crate::config::{required_stages, ScenarioConfig};
use crate::geometry::Pose2;
use crate::offload::{
    decide_placement_for, EndpointKind, OffloadClient, OffloadModels, OffloadResponse, Placement, PlacementPlan,
    WireMessage,
};
use crate::par::Exec;
use crate::rng::{derive_seed, XorShift64Star};
use crate::sensors::{
    chunk_samples, frame_count, frame_time_ns, generate_trajectory, render_stereo_frame, sample_imu,
    synthesize_script, AudioChunk, GroundTruth, ImuSample, CHUNK_NS, CHUNK_SAMPLES,
};
use crate::slam::{AgentState, SlamPipeline};
use crate::speech::{match_command, Command, Transcript};
use crate::vision::shapes::{image_contrast, render_empty, render_shape, shape_tensor, SHAPE_SIDE};
use crate::vision::{infer_with, Label};

pub const REPORT_SCHEMA: u32 = 1;
/// Frame rate above which localization is considered stable.
pub const STABLE_FPS: f64 = 15.0;
pub const TRACE_HEADER: &str = "service,stage,seq,lane,origin_ns,enqueue_ns,start_ns,end_ns,terminal";

const VAD_HANGOVER: u32 = 2;
/// Frames whose contrast falls below this hold no object; their
/// classifications are discarded.
pub const MIN_OBJECT_CONTRAST: u8 = 60;

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Replaces the scenario's seed.
    pub seed: Option<u64>,
    pub exec: Exec,
    /// Wall-clock pacing: virtual seconds per real second.
    pub pace: Option<f64>,
    /// Preloaded models; otherwise loaded from the scenario's models_dir.
    pub models: Option<Arc<OffloadModels>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ServiceReport {
    pub service: ServiceId,
    pub enabled: bool,
    pub placement: EndpointKind,
    pub endpoint: String,
    pub terminal_stage: String,
    pub items: u64,
    pub rate_hz: f64,
    pub latency: LatencySummary,
    pub offload_failures: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SlamReport {
    pub pose_updates: u64,
    pub pose_rate_hz: f64,
    pub pose_latency: LatencySummary,
    pub frames_processed: u64,
    pub fps: f64,
    pub stable_localization: bool,
    pub pose_rmse_m: f64,
    pub final_position_error_m: f64,
    pub map_size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StageReport {
    pub service: ServiceId,
    pub stage: String,
    pub lane: LaneKind,
    pub cost_ms: f64,
    pub drop_policy: DropPolicy,
    pub arrived: u64,
    pub completed: u64,
    pub dropped: u64,
    pub rate_hz: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LaneReport {
    pub lane: LaneKind,
    pub slots: Option<usize>,
    pub busy_ms: f64,
    /// Busy time within the scenario window over window × slots.
    pub utilization: Option<f64>,
    pub peak_occupancy: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct StreamCounts {
    pub imu: u64,
    pub camera: u64,
    pub audio: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LabelRecord {
    pub t_ns: u64,
    pub label: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CommandRecord {
    pub t_ns: u64,
    pub text: String,
    pub command: Option<Command>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub schema: u32,
    pub description: String,
    pub seed: u64,
    pub duration_s: f64,
    pub execute_models: bool,
    pub placements: Vec<Placement>,
    pub services: Vec<ServiceReport>,
    pub slam: Option<SlamReport>,
    pub stages: Vec<StageReport>,
    pub lanes: Vec<LaneReport>,
    pub streams: StreamCounts,
    pub violation_count: usize,
    pub deadline_violations: Vec<Violation>,
    pub utilization: Utilization,
    pub power_w: f64,
    pub power: PowerBreakdown,
    pub battery_wh: f64,
    pub battery_hours: f64,
    pub labels: Vec<LabelRecord>,
    pub commands: Vec<CommandRecord>,
    pub actions: Vec<ActionRecord>,
    pub chassis_commands: usize,
}

impl RunReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub report: RunReport,
    pub records: Vec<TaskRecord>,
    pub chassis: Vec<(u64, ChassisCommand)>,
}

pub fn write_trace_csv<W: Write>(mut w: W, records: &[TaskRecord]) -> io::Result<()> {
    writeln!(w, "{TRACE_HEADER}")?;
    for r in records {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{}",
            r.service.name(),
            r.stage,
            r.seq,
            r.lane.name(),
            r.origin_ns,
            r.enqueue_ns,
            r.start_ns,
            r.end_ns,
            r.terminal as u8
        )?;
    }
    Ok(())
}

/// `t_ns,linear,angular` per line.
pub fn write_chassis_log<W: Write>(mut w: W, log: &[(u64, ChassisCommand)]) -> io::Result<()> {
    for (t, c) in log {
        writeln!(w, "{t},{},{}", c.linear, c.angular)?;
    }
    Ok(())
}

#[derive(Debug)]
enum Payload {
    Imu(usize),
    Frame(u64),
    Chunk(usize),
    Remote(Option<Result<OffloadResponse, String>>),
    Utterance(Vec<usize>, Option<Result<OffloadResponse, String>>),
}

/// Groups voiced chunks into utterances, with one chunk of lead-in and a
/// closing run of silent chunks.
#[derive(Debug)]
struct Vad {
    threshold: f64,
    lead: Option<usize>,
    current: Vec<usize>,
    silent_run: u32,
}

impl Vad {
    fn new(threshold: f64) -> Self {
        Self { threshold, lead: None, current: Vec::new(), silent_run: 0 }
    }

    fn push(&mut self, i: usize, rms: f64) -> Option<Vec<usize>> {
        let voiced = rms >= self.threshold;
        if self.current.is_empty() {
            if voiced {
                self.current.extend(self.lead.take());
                self.current.push(i);
                self.silent_run = 0;
            } else {
                self.lead = Some(i);
            }
            return None;
        }
        self.current.push(i);
        if voiced {
            self.silent_run = 0;
            return None;
        }
        self.silent_run += 1;
        if self.silent_run < VAD_HANGOVER {
            return None;
        }
        self.lead = Some(i);
        Some(std::mem::take(&mut self.current))
    }

    fn flush(&mut self) -> Option<Vec<usize>> {
        (!self.current.is_empty()).then(|| std::mem::take(&mut self.current))
    }
}

fn rms(samples: &[i16]) -> f64 {
    (samples.iter().map(|&s| (s as f64).powi(2)).sum::<f64>() / samples.len().max(1) as f64).sqrt()
}

#[derive(Debug, Clone, Copy, Default)]
struct Ids {
    propagate: Option<StageId>,
    frontend: Option<StageId>,
    backend: Option<StageId>,
    preprocess: Option<StageId>,
    cnn: Option<StageId>,
    vision_remote: Option<StageId>,
    recognize: Option<StageId>,
    speech_remote: Option<StageId>,
}

struct World<'a> {
    cfg: &'a ScenarioConfig,
    exec: Exec,
    gt: GroundTruth,
    imu: Vec<ImuSample>,
    audio: Vec<AudioChunk>,
    render_seed: u64,
    scene_seed: u64,
    models: Option<Arc<OffloadModels>>,
    pipe: Option<SlamPipeline>,
    pose_updates: u64,
    frames_processed: u64,
    controller: Controller,
    vad: Vad,
    utterances: u64,
    clients: BTreeMap<ServiceId, OffloadClient>,
    ids: Ids,
    labels: Vec<LabelRecord>,
    last_confident: Option<String>,
    commands: Vec<CommandRecord>,
    failures: BTreeMap<ServiceId, u64>,
}

impl World<'_> {
    fn pose_now(&self, t_ns: u64) -> Pose2 {
        match &self.pipe {
            Some(p) => p.current().pose(),
            None => {
                let g = self.gt.pose_at(t_ns);
                Pose2::new(g.x, g.y, g.heading)
            }
        }
    }

    fn scene_pixels(&self, frame: u64) -> Vec<u8> {
        let t_s = frame_time_ns(frame) as f64 * 1e-9;
        let mut rng = XorShift64Star::new(derive_seed(self.scene_seed, frame));
        match self.cfg.services.vision.scene.iter().find(|o| o.from_s <= t_s && t_s < o.to_s) {
            Some(o) => render_shape(o.object, &mut rng),
            None => render_empty(&mut rng),
        }
    }

    fn utterance_chunks(&self, idx: &[usize]) -> Vec<AudioChunk> {
        idx.iter().map(|&i| self.audio[i].clone()).collect()
    }

    /// Processing time of an item about to start. Offloaded items make
    /// their request here, so dropped items are never sent.
    fn cost(&mut self, id: StageId, spec: &StageSpec, item: &mut WorkItem<Payload>) -> u64 {
        let service = spec.service;
        let request = match &item.payload {
            Payload::Remote(_) if self.cfg.execute_models => Some(WireMessage::ObjRequest {
                width: SHAPE_SIDE as u16,
                height: SHAPE_SIDE as u16,
                channels: 1,
                pixels: self.scene_pixels(item.seq),
            }),
            Payload::Utterance(idx, _) if self.cfg.execute_models => {
                let chunks = self.utterance_chunks(idx);
                Some(WireMessage::AsrRequest {
                    sample_rate: chunks[0].sample_rate,
                    samples: chunks.iter().flat_map(|c| c.samples.iter().copied()).collect(),
                })
            }
            Payload::Remote(_) | Payload::Utterance(..) => None,
            _ => return spec.cost_ns(),
        };
        debug_assert!(Some(id) == self.ids.vision_remote || Some(id) == self.ids.speech_remote);
        let client = self.clients.get_mut(&service).expect("client for offloaded service");
        let reply = match request {
            Some(req) => client.call(service, &req).map_err(|e| e.to_string()),
            None => client
                .modeled_latency_ms(service)
                .map(|latency_ms| OffloadResponse { message: WireMessage::error(0, ""), latency_ms })
                .map_err(|e| e.to_string()),
        };
        let ns = match &reply {
            Ok(r) => ms_to_ns(r.latency_ms),
            Err(_) => spec.cost_ns(),
        };
        match &mut item.payload {
            Payload::Remote(slot) | Payload::Utterance(_, slot) => *slot = Some(reply),
            _ => unreachable!(),
        }
        ns
    }

    fn on_labels(&mut self, t_ns: u64, labels: Vec<Label>) {
        let Some(top) = labels.iter().max_by(|a, b| a.score.total_cmp(&b.score)).cloned() else {
            self.last_confident = None;
            return;
        };
        let confident = top.score >= self.cfg.services.vision.report_threshold;
        if confident && self.last_confident.as_deref() != Some(top.name.as_str()) {
            self.labels.push(LabelRecord { t_ns, label: top.name.clone(), score: top.score });
            if let Some(action) = super::react_to_labels(&labels, &self.cfg.reactions) {
                let pose = self.pose_now(t_ns);
                self.controller.apply(t_ns, "vision", &top.name, action, &pose);
            }
        }
        self.last_confident = confident.then_some(top.name);
    }

    fn on_text(&mut self, t_ns: u64, text: String) {
        let words: Vec<&str> = text.split_whitespace().collect();
        let command = match_command(&Transcript::from_words(&words), &Command::ALL);
        if let Some(c) = command {
            let pose = self.pose_now(t_ns);
            self.controller.handle_command(t_ns, c, &pose);
        }
        self.commands.push(CommandRecord { t_ns, text, command });
    }

    fn decode_local(&mut self, t_ns: u64, idx: Vec<usize>) -> Result<(), RuntimeError> {
        self.utterances += 1;
        if !self.cfg.execute_models {
            return Ok(());
        }
        let chunks = self.utterance_chunks(&idx);
        let models = self.models.as_ref().expect("models loaded");
        let t = models.speech.recognize(&chunks).map_err(|e| RuntimeError::Model(e.to_string()))?;
        self.on_text(t_ns, t.word_list().join(" "));
        Ok(())
    }

    fn take_reply(&mut self, service: ServiceId, reply: Option<Result<OffloadResponse, String>>) -> Option<WireMessage> {
        match reply {
            Some(Ok(r)) if !matches!(r.message, WireMessage::Error { .. }) => Some(r.message),
            Some(Ok(_)) if !self.cfg.execute_models => None,
            _ => {
                *self.failures.entry(service).or_default() += 1;
                None
            }
        }
    }

    fn emit(&mut self, sched: &mut Scheduler<Payload>, src: Source, t_ns: u64) {
        match src {
            Source::Imu(i) => {
                if let Some(id) = self.ids.propagate {
                    sched.push(id, i as u64, t_ns, Payload::Imu(i));
                }
            }
            Source::Camera(k) => {
                if let Some(id) = self.ids.frontend {
                    sched.push(id, k, t_ns, Payload::Frame(k));
                }
                if let Some(id) = self.ids.preprocess {
                    sched.push(id, k, t_ns, Payload::Frame(k));
                }
                if let Some(id) = self.ids.vision_remote {
                    sched.push(id, k, t_ns, Payload::Remote(None));
                }
            }
            Source::Audio(i) => {
                if let Some(id) = self.ids.recognize {
                    sched.push(id, i as u64, t_ns, Payload::Chunk(i));
                }
                if let Some(id) = self.ids.speech_remote {
                    let voiced = self.vad.push(i, rms(&self.audio[i].samples));
                    let done = voiced.or_else(|| (i + 1 == self.audio.len()).then(|| self.vad.flush()).flatten());
                    if let Some(idx) = done {
                        sched.push(id, self.utterances, t_ns, Payload::Utterance(idx, None));
                        self.utterances += 1;
                    }
                }
            }
        }
    }

    fn complete(&mut self, sched: &mut Scheduler<Payload>, id: StageId, rec: &TaskRecord, payload: Payload) -> Result<(), RuntimeError> {
        let now = rec.end_ns;
        let ids = self.ids;
        if Some(id) == ids.propagate {
            let Payload::Imu(i) = payload else { unreachable!() };
            let pipe = self.pipe.as_mut().expect("slam pipeline");
            pipe.on_imu(&self.imu[i]).map_err(|e| RuntimeError::Slam(e.to_string()))?;
            self.pose_updates += 1;
            let every = self.controller.params().every_n_poses.max(1) as u64;
            if self.pose_updates % every == 0 {
                let pose = pipe.current().pose();
                self.controller.step(now, &pose);
            }
        } else if Some(id) == ids.frontend {
            sched.push(ids.backend.expect("backend"), rec.seq, rec.origin_ns, payload);
        } else if Some(id) == ids.backend {
            let Payload::Frame(k) = payload else { unreachable!() };
            self.frames_processed += 1;
            let pipe = self.pipe.as_mut().expect("slam pipeline");
            let skip = !pipe.params().updates_enabled && !pipe.map().is_empty();
            if self.cfg.execute_models && !skip {
                let frame = render_stereo_frame(&self.gt, &self.cfg.camera, k, self.render_seed);
                let f = SlamPipeline::frontend(&frame, &pipe.params().harris, self.exec);
                pipe.backend(&f);
            }
        } else if Some(id) == ids.preprocess {
            sched.push(ids.cnn.expect("cnn"), rec.seq, rec.origin_ns, payload);
        } else if Some(id) == ids.cnn {
            if self.cfg.execute_models {
                let px = self.scene_pixels(rec.seq);
                let net = &self.models.as_ref().expect("models loaded").network;
                let labels = infer_with(net, &shape_tensor(&px), self.exec).map_err(|e| RuntimeError::Model(e.to_string()))?;
                let in_view = image_contrast(&px) >= MIN_OBJECT_CONTRAST;
                self.on_labels(now, if in_view { labels } else { Vec::new() });
            }
        } else if Some(id) == ids.vision_remote {
            let Payload::Remote(reply) = payload else { unreachable!() };
            if let Some(WireMessage::ObjResponse { labels }) = self.take_reply(ServiceId::Vision, reply) {
                let in_view = image_contrast(&self.scene_pixels(rec.seq)) >= MIN_OBJECT_CONTRAST;
                let labels = labels.into_iter().map(|l| Label { name: l.name, score: l.score as f64 }).collect();
                self.on_labels(now, if in_view { labels } else { Vec::new() });
            }
        } else if Some(id) == ids.recognize {
            let Payload::Chunk(i) = payload else { unreachable!() };
            let done = self.vad.push(i, rms(&self.audio[i].samples));
            let done = done.or_else(|| (i + 1 == self.audio.len()).then(|| self.vad.flush()).flatten());
            if let Some(idx) = done {
                self.decode_local(now, idx)?;
            }
        } else if Some(id) == ids.speech_remote {
            let Payload::Utterance(_, reply) = payload else { unreachable!() };
            if let Some(WireMessage::AsrResponse { text, .. }) = self.take_reply(ServiceId::Speech, reply) {
                self.on_text(now, text);
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Source {
    Imu(usize),
    Camera(u64),
    Audio(usize),
}

fn plan_for(cfg: &ScenarioConfig, services: &[ServiceId]) -> PlacementPlan {
    match &cfg.placement {
        None => decide_placement_for(services, &cfg.tolerances, &cfg.endpoints),
        Some(map) => {
            let mut plan = decide_placement_for(services, &cfg.tolerances, &cfg.endpoints);
            for p in &mut plan.placements {
                let chosen = map.get(&p.service).and_then(|n| cfg.endpoint(n));
                *p = match chosen {
                    Some(e) => Placement {
                        service: p.service,
                        endpoint: e.name.clone(),
                        kind: e.kind,
                        rationale: "configured".into(),
                    },
                    None => Placement {
                        service: p.service,
                        endpoint: "local".into(),
                        kind: EndpointKind::Local,
                        rationale: "configured".into(),
                    },
                };
            }
            plan
        }
    }
}

pub fn run_scenario(cfg: &ScenarioConfig) -> Result<RunOutcome, RuntimeError> {
    run_scenario_with(cfg, &RunOptions::default())
}

pub fn run_scenario_with(cfg: &ScenarioConfig, opts: &RunOptions) -> Result<RunOutcome, RuntimeError> {
    cfg.validate().map_err(|e| RuntimeError::Config(e.to_string()))?;
    let seed = opts.seed.unwrap_or(cfg.seed);
    let duration_ns = cfg.duration_ns();
    let services = cfg.services.enabled_list();
    let plan = plan_for(cfg, &services);
    let active: Vec<(ServiceId, bool)> = plan.placements.iter().map(|p| (p.service, p.kind.is_cloud())).collect();
    let (utilization, power) = cfg.device.evaluate(&active)?;
    let battery_hours = battery_life_hours(power.total_w, cfg.battery_wh)?;

    let needs_models = cfg.execute_models && (cfg.services.vision.enabled || cfg.services.speech.enabled);
    let models = match (&opts.models, needs_models) {
        (_, false) => opts.models.clone(),
        (Some(m), true) => Some(Arc::clone(m)),
        (None, true) => {
            let dir = cfg.models_path().ok_or_else(|| RuntimeError::Config("models_dir: missing".into()))?;
            Some(Arc::new(OffloadModels::load(&dir).map_err(|e| RuntimeError::Model(e.to_string()))?))
        }
    };

    let mut traj = cfg.trajectory_spec();
    traj.seed = seed;
    let gt = generate_trajectory(&traj).map_err(|e| RuntimeError::Sensor(e.to_string()))?;
    let imu = if cfg.sensors.imu {
        sample_imu(&gt, &cfg.imu, derive_seed(seed, 1)).map_err(|e| RuntimeError::Sensor(e.to_string()))?
    } else {
        Vec::new()
    };
    let audio = if cfg.sensors.microphone && cfg.services.speech.enabled {
        let total = (duration_ns.div_ceil(CHUNK_NS)) as usize * CHUNK_SAMPLES;
        let sp = &cfg.services.speech;
        let samples = synthesize_script(&sp.script, total, &sp.audio, derive_seed(seed, 3))
            .map_err(|e| RuntimeError::Sensor(e.to_string()))?;
        chunk_samples(&samples, 0)
    } else {
        Vec::new()
    };

    let mut sched: Scheduler<Payload> = Scheduler::new(cfg.lanes);
    let mut ids = Ids::default();
    let mut clients = BTreeMap::new();
    for p in &plan.placements {
        let s = p.service;
        let deadline = ms_to_ns(cfg.tolerances.get(s));
        if p.kind.is_cloud() {
            let ep = cfg.endpoint(&p.endpoint).expect("placed on a configured endpoint");
            let model = ep.services.get(&s).ok_or_else(|| {
                RuntimeError::Config(format!("endpoints.{}: does not offer {}", ep.name, s.name()))
            })?;
            let policy = if s == ServiceId::Speech { DropPolicy::Queue } else { DropPolicy::LatestOnly };
            let spec = StageSpec::new(s, "offload", LaneKind::Net, model.worst_case_ms().max(1e-6), policy);
            let id = sched.add_stage(spec, deadline, true)?;
            match s {
                ServiceId::Vision => ids.vision_remote = Some(id),
                ServiceId::Speech => ids.speech_remote = Some(id),
                ServiceId::Slam => unreachable!("slam is never offloaded"),
            }
            let mut ep = ep.clone();
            ep.seed = derive_seed(seed, ep.seed);
            clients.insert(s, OffloadClient::new(ep, models.clone()));
            continue;
        }
        let names = required_stages(s);
        for (i, name) in names.iter().enumerate() {
            let spec = cfg
                .stage(s, name)
                .ok_or_else(|| RuntimeError::Config(format!("stages.{}.{name}: missing for a local service", s.name())))?
                .clone();
            let id = sched.add_stage(spec, deadline, i + 1 == names.len() && *name != "propagate")?;
            let slot = match (s, *name) {
                (ServiceId::Slam, "propagate") => &mut ids.propagate,
                (ServiceId::Slam, "frontend") => &mut ids.frontend,
                (ServiceId::Slam, "backend") => &mut ids.backend,
                (ServiceId::Vision, "preprocess") => &mut ids.preprocess,
                (ServiceId::Vision, "cnn") => &mut ids.cnn,
                (ServiceId::Speech, "recognize") => &mut ids.recognize,
                _ => unreachable!("validated stage names"),
            };
            *slot = Some(id);
        }
    }

    let pipe = if cfg.services.slam.enabled {
        let p0 = gt.poses[0];
        let initial = AgentState { t_ns: p0.t_ns, position: [p0.x, p0.y], velocity: [p0.vx, p0.vy], heading: p0.heading };
        Some(
            SlamPipeline::new(initial, cfg.camera.clone(), cfg.services.slam.params.clone())
                .map_err(|e| RuntimeError::Slam(e.to_string()))?,
        )
    } else {
        None
    };

    let mut sources: Vec<(u64, Source)> = Vec::new();
    sources.extend(imu.iter().enumerate().map(|(i, s)| (s.t_ns, Source::Imu(i))));
    if cfg.sensors.camera {
        sources.extend((0..frame_count(duration_ns)).map(|k| (frame_time_ns(k), Source::Camera(k))));
    }
    sources.extend(audio.iter().enumerate().map(|(i, c)| (c.t_ns + CHUNK_NS, Source::Audio(i))));
    sources.sort();
    let streams = StreamCounts {
        imu: imu.len() as u64,
        camera: sources.iter().filter(|s| matches!(s.1, Source::Camera(_))).count() as u64,
        audio: audio.len() as u64,
    };

    let mut world = World {
        cfg,
        exec: opts.exec,
        gt,
        imu,
        audio,
        render_seed: derive_seed(seed, 2),
        scene_seed: derive_seed(seed, 4),
        models,
        pipe,
        pose_updates: 0,
        frames_processed: 0,
        controller: Controller::new(cfg.navigation.goal, cfg.navigation.params),
        vad: Vad::new(cfg.services.speech.vad_rms),
        utterances: 0,
        clients,
        ids,
        labels: Vec::new(),
        last_confident: None,
        commands: Vec::new(),
        failures: BTreeMap::new(),
    };

    let wall = Instant::now();
    let mut next = 0;
    loop {
        let t_src = sources.get(next).map(|s| s.0);
        let t = match (t_src, sched.next_completion_ns()) {
            (None, None) => break,
            (a, b) => a.unwrap_or(u64::MAX).min(b.unwrap_or(u64::MAX)),
        };
        if let Some(speed) = opts.pace.filter(|s| *s > 0.0) {
            let due = Duration::from_secs_f64(t as f64 * 1e-9 / speed);
            if let Some(wait) = due.checked_sub(wall.elapsed()) {
                std::thread::sleep(wait);
            }
        }
        sched.advance_to(t);
        while let Some((id, rec, payload)) = sched.pop_completion() {
            world.complete(&mut sched, id, &rec, payload)?;
        }
        while next < sources.len() && sources[next].0 == t {
            world.emit(&mut sched, sources[next].1, t);
            next += 1;
        }
        sched.dispatch(|id, spec, item| world.cost(id, spec, item));
    }
    debug_assert!(sched.is_idle());

    let records: Vec<TaskRecord> = sched.records().to_vec();
    let violations = check_deadlines(&records, &cfg.deadlines, duration_ns);
    let window_s = duration_ns as f64 * 1e-9;

    let stages: Vec<StageReport> = (0..sched.stage_count())
        .map(|id| {
            let spec = sched.spec(id);
            let c = sched.counters(id);
            let mine: Vec<&TaskRecord> =
                records.iter().filter(|r| r.service == spec.service && r.stage == spec.name).collect();
            StageReport {
                service: spec.service,
                stage: spec.name.clone(),
                lane: spec.lane,
                cost_ms: spec.cost_ms,
                drop_policy: spec.drop_policy,
                arrived: c.arrived,
                completed: c.completed,
                dropped: c.dropped,
                rate_hz: achieved_rate(&mine, duration_ns),
            }
        })
        .collect();

    let lanes = [LaneKind::Cpu, LaneKind::Gpu, LaneKind::Net]
        .into_iter()
        .map(|lane| {
            let busy: u64 = records
                .iter()
                .filter(|r| r.lane == lane)
                .map(|r| r.end_ns.min(duration_ns) - r.start_ns.min(duration_ns))
                .sum();
            let slots = (lane != LaneKind::Net).then(|| cfg.lanes.slots(lane));
            LaneReport {
                lane,
                slots,
                busy_ms: busy as f64 / 1e6,
                utilization: slots.map(|n| busy as f64 / (duration_ns as f64 * n as f64)),
                peak_occupancy: sched.peak_occupancy(lane),
            }
        })
        .collect();

    let service_reports = ServiceId::ALL
        .into_iter()
        .map(|s| {
            let placed = plan.get(s);
            let terminal: Vec<&TaskRecord> = records.iter().filter(|r| r.service == s && r.terminal).collect();
            ServiceReport {
                service: s,
                enabled: placed.is_some(),
                placement: placed.map_or(EndpointKind::Local, |p| p.kind),
                endpoint: placed.map_or_else(String::new, |p| p.endpoint.clone()),
                terminal_stage: terminal.first().map_or_else(String::new, |r| r.stage.clone()),
                items: terminal.len() as u64,
                rate_hz: achieved_rate(&terminal, duration_ns),
                latency: latency_summary(terminal.iter().copied()),
                offload_failures: world.failures.get(&s).copied().unwrap_or(0),
            }
        })
        .collect();

    let slam = world.pipe.as_ref().map(|pipe| {
        let poses = pipe.poses();
        let sq: f64 = poses
            .iter()
            .map(|p| {
                let g = world.gt.pose_at(p.t_ns);
                (p.x - g.x).powi(2) + (p.y - g.y).powi(2)
            })
            .sum();
        let cur = pipe.current();
        let g = world.gt.pose_at(cur.t_ns);
        let prop: Vec<&TaskRecord> = records.iter().filter(|r| r.service == ServiceId::Slam && r.stage == "propagate").collect();
        let fps = records
            .iter()
            .filter(|r| r.service == ServiceId::Slam && r.terminal && r.end_ns <= duration_ns)
            .count() as f64
            / window_s;
        SlamReport {
            pose_updates: world.pose_updates,
            pose_rate_hz: achieved_rate(&prop, duration_ns),
            pose_latency: latency_summary(prop.iter().copied()),
            frames_processed: world.frames_processed,
            fps,
            stable_localization: fps >= STABLE_FPS,
            pose_rmse_m: if poses.is_empty() { 0.0 } else { (sq / poses.len() as f64).sqrt() },
            final_position_error_m: (cur.position[0] - g.x).hypot(cur.position[1] - g.y),
            map_size: pipe.map().len(),
        }
    });

    let (actions, chassis) = world.controller.into_logs();
    let report = RunReport {
        schema: REPORT_SCHEMA,
        description: cfg.description.clone(),
        seed,
        duration_s: cfg.duration_s,
        execute_models: cfg.execute_models,
        placements: plan.placements.clone(),
        services: service_reports,
        slam,
        stages,
        lanes,
        streams,
        violation_count: violations.len(),
        deadline_violations: violations,
        utilization,
        power_w: power.total_w,
        power,
        battery_wh: cfg.battery_wh,
        battery_hours,
        labels: world.labels,
        commands: world.commands,
        actions,
        chassis_commands: chassis.len(),
    };
    Ok(RunOutcome { report, records, chassis })
}

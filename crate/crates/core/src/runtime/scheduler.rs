//! Deterministic discrete-event core: bounded stage queues feeding lanes
//! with a fixed number of slots, earliest-deadline-first dispatch and
//! non-preemptive execution.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::{DropPolicy, LaneKind, RuntimeError, StageSpec, TaskRecord};

pub type StageId = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LaneConfig {
    pub cpu_slots: usize,
    pub gpu_slots: usize,
}

impl Default for LaneConfig {
    fn default() -> Self {
        Self { cpu_slots: 4, gpu_slots: 1 }
    }
}

impl LaneConfig {
    pub fn slots(&self, lane: LaneKind) -> usize {
        match lane {
            LaneKind::Cpu => self.cpu_slots,
            LaneKind::Gpu => self.gpu_slots,
            LaneKind::Net => usize::MAX,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WorkItem<P> {
    pub seq: u64,
    pub origin_ns: u64,
    pub enqueue_ns: u64,
    pub payload: P,
}

#[derive(Debug, Clone, PartialEq)]
pub enum PushOutcome<P> {
    Accepted,
    /// Accepted; the older waiting item was discarded.
    Replaced(WorkItem<P>),
    /// Queue full; the arrival was discarded.
    Rejected(WorkItem<P>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct StageCounters {
    pub arrived: u64,
    pub dropped: u64,
    pub completed: u64,
}

#[derive(Debug)]
struct StageState<P> {
    spec: StageSpec,
    deadline_ns: u64,
    terminal: bool,
    queue: VecDeque<WorkItem<P>>,
    busy: bool,
    counters: StageCounters,
}

#[derive(Debug)]
struct Running<P> {
    end_ns: u64,
    order: u64,
    stage: StageId,
    start_ns: u64,
    item: WorkItem<P>,
}

#[derive(Debug)]
pub struct Scheduler<P> {
    lanes: LaneConfig,
    stages: Vec<StageState<P>>,
    in_use: [usize; 3],
    peak: [usize; 3],
    now_ns: u64,
    started: u64,
    running: Vec<Running<P>>,
    records: Vec<TaskRecord>,
}

impl<P> Scheduler<P> {
    pub fn new(lanes: LaneConfig) -> Self {
        Self {
            lanes,
            stages: Vec::new(),
            in_use: [0; 3],
            peak: [0; 3],
            now_ns: 0,
            started: 0,
            running: Vec::new(),
            records: Vec::new(),
        }
    }

    /// Registers a stage. `deadline_ns` is added to an item's origin to get
    /// its dispatch priority; earlier-registered stages win ties.
    pub fn add_stage(&mut self, spec: StageSpec, deadline_ns: u64, terminal: bool) -> Result<StageId, RuntimeError> {
        if spec.lane != LaneKind::Net {
            spec.validate()?;
            if self.lanes.slots(spec.lane) == 0 {
                return Err(RuntimeError::Config(format!("lane {} has no slots", spec.lane.name())));
            }
        }
        self.stages.push(StageState {
            spec,
            deadline_ns,
            terminal,
            queue: VecDeque::new(),
            busy: false,
            counters: StageCounters::default(),
        });
        Ok(self.stages.len() - 1)
    }

    pub fn now_ns(&self) -> u64 {
        self.now_ns
    }

    pub fn spec(&self, id: StageId) -> &StageSpec {
        &self.stages[id].spec
    }

    pub fn stage_count(&self) -> usize {
        self.stages.len()
    }

    pub fn counters(&self, id: StageId) -> StageCounters {
        self.stages[id].counters
    }

    pub fn records(&self) -> &[TaskRecord] {
        &self.records
    }

    pub fn into_records(self) -> Vec<TaskRecord> {
        self.records
    }

    /// Highest simultaneous occupancy seen on a lane.
    pub fn peak_occupancy(&self, lane: LaneKind) -> usize {
        self.peak[lane.index()]
    }

    pub fn push(&mut self, id: StageId, seq: u64, origin_ns: u64, payload: P) -> PushOutcome<P> {
        let item = WorkItem { seq, origin_ns, enqueue_ns: self.now_ns, payload };
        let st = &mut self.stages[id];
        st.counters.arrived += 1;
        match st.spec.drop_policy {
            DropPolicy::LatestOnly => {
                let old = st.queue.pop_front();
                st.queue.push_back(item);
                match old {
                    Some(o) => {
                        st.counters.dropped += 1;
                        PushOutcome::Replaced(o)
                    }
                    None => PushOutcome::Accepted,
                }
            }
            DropPolicy::Queue => {
                if st.queue.len() >= st.spec.queue_capacity {
                    st.counters.dropped += 1;
                    PushOutcome::Rejected(item)
                } else {
                    st.queue.push_back(item);
                    PushOutcome::Accepted
                }
            }
        }
    }

    /// Starts waiting items, earliest deadline first, while their stage is
    /// idle and their lane has a free slot. `cost` gives each started item's
    /// processing time in ns.
    pub fn dispatch(&mut self, mut cost: impl FnMut(StageId, &StageSpec, &mut WorkItem<P>) -> u64) {
        loop {
            let mut best: Option<(u64, StageId)> = None;
            for (id, st) in self.stages.iter().enumerate() {
                let lane = st.spec.lane.index();
                if st.busy || self.in_use[lane] >= self.lanes.slots(st.spec.lane) {
                    continue;
                }
                if let Some(head) = st.queue.front() {
                    let key = head.origin_ns.saturating_add(st.deadline_ns);
                    if best.map_or(true, |(k, _)| key < k) {
                        best = Some((key, id));
                    }
                }
            }
            let Some((_, id)) = best else { return };
            let st = &mut self.stages[id];
            let mut item = st.queue.pop_front().expect("non-empty");
            st.busy = true;
            let lane = st.spec.lane.index();
            let dur = cost(id, &st.spec, &mut item);
            self.in_use[lane] += 1;
            self.peak[lane] = self.peak[lane].max(self.in_use[lane]);
            self.running.push(Running {
                end_ns: self.now_ns + dur,
                order: self.started,
                stage: id,
                start_ns: self.now_ns,
                item,
            });
            self.started += 1;
        }
    }

    pub fn next_completion_ns(&self) -> Option<u64> {
        self.running.iter().map(|r| r.end_ns).min()
    }

    pub fn advance_to(&mut self, t_ns: u64) {
        debug_assert!(t_ns >= self.now_ns);
        debug_assert!(self.next_completion_ns().map_or(true, |e| t_ns <= e));
        self.now_ns = t_ns;
    }

    /// Retires one task ending now, in start order.
    pub fn pop_completion(&mut self) -> Option<(StageId, TaskRecord, P)> {
        let idx = self
            .running
            .iter()
            .enumerate()
            .filter(|(_, r)| r.end_ns == self.now_ns)
            .min_by_key(|(_, r)| r.order)
            .map(|(i, _)| i)?;
        let r = self.running.swap_remove(idx);
        let st = &mut self.stages[r.stage];
        st.busy = false;
        st.counters.completed += 1;
        self.in_use[st.spec.lane.index()] -= 1;
        let rec = TaskRecord {
            service: st.spec.service,
            stage: st.spec.name.clone(),
            seq: r.item.seq,
            lane: st.spec.lane,
            origin_ns: r.item.origin_ns,
            enqueue_ns: r.item.enqueue_ns,
            start_ns: r.start_ns,
            end_ns: r.end_ns,
            terminal: st.terminal,
        };
        self.records.push(rec.clone());
        Some((r.stage, rec, r.item.payload))
    }

    /// Nothing queued and nothing running.
    pub fn is_idle(&self) -> bool {
        self.running.is_empty() && self.stages.iter().all(|s| s.queue.is_empty())
    }
}

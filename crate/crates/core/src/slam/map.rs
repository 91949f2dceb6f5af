//! Landmark map with a uniform-grid spatial index.
//!
//! Points live on the ground plane with their height kept alongside; all
//! proximity tests (merging, gating) use the full 3-D distance so corners
//! stacked vertically on one fiducial stay distinct.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::{AgentState, Descriptor, Observation};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapPoint {
    pub id: u64,
    pub position: [f64; 2],
    pub height: f64,
    pub descriptor: Descriptor,
    pub observation_count: u32,
}

impl MapPoint {
    fn dist2(&self, p: [f64; 3]) -> f64 {
        let dx = self.position[0] - p[0];
        let dy = self.position[1] - p[1];
        let dz = self.height - p[2];
        dx * dx + dy * dy + dz * dz
    }
}

#[derive(Debug, Clone)]
pub struct WorldMap {
    points: Vec<MapPoint>,
    grid: HashMap<(i64, i64), Vec<usize>>,
    cell: f64,
    merge_radius: f64,
    next_id: u64,
}

/// A map point paired with the robot-frame ground position it was seen at.
#[derive(Debug, Clone, PartialEq)]
pub struct Match {
    pub map_id: u64,
    pub map_position: [f64; 2],
    pub observed: [f64; 2],
    pub observation_index: usize,
    pub descriptor_distance: f32,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MatchParams {
    pub max_descriptor_distance: f32,
    pub ratio: f32,
    pub gating_radius: f64,
}

impl Default for MatchParams {
    fn default() -> Self {
        Self {
            max_descriptor_distance: 0.5,
            ratio: 0.8,
            gating_radius: 0.5,
        }
    }
}

impl WorldMap {
    pub fn new(merge_radius: f64, index_cell: f64) -> Self {
        Self {
            points: Vec::new(),
            grid: HashMap::new(),
            cell: index_cell.max(merge_radius).max(1e-3),
            merge_radius,
            next_id: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[MapPoint] {
        &self.points
    }

    pub fn merge_radius(&self) -> f64 {
        self.merge_radius
    }

    fn key(&self, p: [f64; 2]) -> (i64, i64) {
        ((p[0] / self.cell).floor() as i64, (p[1] / self.cell).floor() as i64)
    }

    /// Indices of points within `radius` (3-D) of `p`, ascending.
    pub fn within(&self, p: [f64; 3], radius: f64) -> Vec<usize> {
        let reach = (radius / self.cell).ceil() as i64;
        let (cx, cy) = self.key([p[0], p[1]]);
        let r2 = radius * radius;
        let mut out = Vec::new();
        for gx in cx - reach..=cx + reach {
            for gy in cy - reach..=cy + reach {
                if let Some(ids) = self.grid.get(&(gx, gy)) {
                    out.extend(ids.iter().copied().filter(|&i| self.points[i].dist2(p) <= r2));
                }
            }
        }
        out.sort_unstable();
        out
    }

    fn index_insert(&mut self, i: usize) {
        let k = self.key(self.points[i].position);
        self.grid.entry(k).or_default().push(i);
    }

    fn index_remove(&mut self, i: usize) {
        let k = self.key(self.points[i].position);
        if let Some(v) = self.grid.get_mut(&k) {
            v.retain(|&j| j != i);
            if v.is_empty() {
                self.grid.remove(&k);
            }
        }
    }

    fn nearest_within(&self, p: [f64; 3], radius: f64, skip: Option<usize>) -> Option<usize> {
        self.within(p, radius)
            .into_iter()
            .filter(|&i| Some(i) != skip)
            .min_by(|&a, &b| self.points[a].dist2(p).total_cmp(&self.points[b].dist2(p)))
    }

    /// Inserts a world point, merging into the nearest point within the merge
    /// radius (running-mean position, count incremented). Merges cascade so
    /// no two points ever end up closer than the merge radius.
    pub fn insert(&mut self, world: [f64; 3], descriptor: Descriptor) -> u64 {
        let Some(mut target) = self.nearest_within(world, self.merge_radius, None) else {
            let id = self.next_id;
            self.next_id += 1;
            self.points.push(MapPoint {
                id,
                position: [world[0], world[1]],
                height: world[2],
                descriptor,
                observation_count: 1,
            });
            self.index_insert(self.points.len() - 1);
            return id;
        };
        let mut incoming = (world, 1u32);
        loop {
            self.index_remove(target);
            let t = &mut self.points[target];
            let n = t.observation_count as f64;
            let m = incoming.1 as f64;
            let w = [
                (t.position[0] * n + incoming.0[0] * m) / (n + m),
                (t.position[1] * n + incoming.0[1] * m) / (n + m),
                (t.height * n + incoming.0[2] * m) / (n + m),
            ];
            t.position = [w[0], w[1]];
            t.height = w[2];
            t.observation_count += incoming.1;
            self.index_insert(target);
            // A moved point may now crowd a neighbour: fold it in too.
            let Some(other) = self.nearest_within(w, self.merge_radius, Some(target)) else {
                return self.points[target].id;
            };
            let (keep, gone) = if other < target { (other, target) } else { (target, other) };
            let g = self.remove_at(gone);
            incoming = ([g.position[0], g.position[1], g.height], g.observation_count);
            target = if keep > gone { keep - 1 } else { keep };
        }
    }

    fn remove_at(&mut self, i: usize) -> MapPoint {
        self.index_remove(i);
        let last = self.points.len() - 1;
        if i != last {
            self.index_remove(last);
        }
        let p = self.points.swap_remove(i);
        if i != last {
            self.index_insert(i);
        }
        // swap_remove moved `last` into `i`; ordering of ids is not preserved,
        // but indices stay dense.
        p
    }

    pub fn note_observed(&mut self, id: u64) {
        if let Some(p) = self.points.iter_mut().find(|p| p.id == id) {
            p.observation_count += 1;
        }
    }

    /// Closest pair distance (3-D); `None` with fewer than two points.
    pub fn min_pair_distance(&self) -> Option<f64> {
        let mut best: Option<f64> = None;
        for (i, p) in self.points.iter().enumerate() {
            let q = [p.position[0], p.position[1], p.height];
            for j in self.within(q, self.merge_radius * 4.0) {
                if j != i {
                    let d = self.points[j].dist2(q).sqrt();
                    best = Some(best.map_or(d, |b: f64| b.min(d)));
                }
            }
        }
        if best.is_none() && self.points.len() >= 2 {
            return Some(f64::INFINITY);
        }
        best
    }
}

fn world_of(state: &AgentState, obs: &Observation) -> [f64; 3] {
    let w = state.pose().transform([obs.body[0], obs.body[1]]);
    [w[0], w[1], obs.body[2]]
}

/// Descriptor- and gate-based association of observations with map points.
/// One map point is claimed by at most one observation (lowest distance wins).
pub fn match_features(
    observations: &[Observation],
    map: &WorldMap,
    predicted: &AgentState,
    params: &MatchParams,
) -> Vec<Match> {
    let mut proposals: Vec<Match> = Vec::new();
    for (oi, obs) in observations.iter().enumerate() {
        let predicted_world = world_of(predicted, obs);
        let mut best: Option<(usize, f32)> = None;
        let mut second = f32::INFINITY;
        for mi in map.within(predicted_world, params.gating_radius) {
            let d = obs.feature.descriptor.distance(&map.points[mi].descriptor);
            match best {
                Some((_, bd)) if d >= bd => second = second.min(d),
                Some((_, bd)) => {
                    second = bd;
                    best = Some((mi, d));
                }
                None => best = Some((mi, d)),
            }
        }
        let Some((mi, d)) = best else { continue };
        if d >= params.max_descriptor_distance || (second.is_finite() && d >= params.ratio * second)
        {
            continue;
        }
        let mp = &map.points[mi];
        proposals.push(Match {
            map_id: mp.id,
            map_position: mp.position,
            observed: [obs.body[0], obs.body[1]],
            observation_index: oi,
            descriptor_distance: d,
        });
    }
    proposals.sort_by(|a, b| {
        a.descriptor_distance
            .total_cmp(&b.descriptor_distance)
            .then(a.observation_index.cmp(&b.observation_index))
    });
    let mut claimed = std::collections::HashSet::new();
    proposals.retain(|m| claimed.insert(m.map_id));
    proposals.sort_by_key(|m| m.observation_index);
    proposals
}

/// Whether a map point inside the gate resembles `obs` closely enough to be
/// the same landmark, even when the ratio test left it unmatched.
pub fn has_counterpart(obs: &Observation, map: &WorldMap, state: &AgentState, params: &MatchParams) -> bool {
    map.within(world_of(state, obs), params.gating_radius)
        .into_iter()
        .any(|mi| obs.feature.descriptor.distance(&map.points[mi].descriptor) < params.max_descriptor_distance)
}

/// Adds the observations not used by `matches` to the map, in world frame.
pub fn extend_map(
    map: &mut WorldMap,
    observations: &[Observation],
    matches: &[Match],
    state: &AgentState,
) {
    let used: std::collections::HashSet<usize> =
        matches.iter().map(|m| m.observation_index).collect();
    for m in matches {
        map.note_observed(m.map_id);
    }
    for (i, obs) in observations.iter().enumerate() {
        if !used.contains(&i) {
            map.insert(world_of(state, obs), obs.feature.descriptor.clone());
        }
    }
}

//! Closed-form planar rigid registration.

use super::{AgentState, Match, PoseFlag};
use crate::geometry::{normalize_angle, rotate};

/// Observed spread (m²) below which rotation is considered unobservable.
const DEGENERATE_SPREAD: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoseUpdate {
    pub state: AgentState,
    pub flag: PoseFlag,
}

/// Solves for the pose that maps robot-frame observations onto their map
/// positions and substitutes it into `state`. Velocity is left untouched.
pub fn update_pose(state: &AgentState, matches: &[Match]) -> PoseUpdate {
    if matches.len() < 2 {
        return PoseUpdate {
            state: *state,
            flag: PoseFlag::PropagationOnly,
        };
    }
    let n = matches.len() as f64;
    let mut co = [0.0; 2];
    let mut cm = [0.0; 2];
    for m in matches {
        co[0] += m.observed[0];
        co[1] += m.observed[1];
        cm[0] += m.map_position[0];
        cm[1] += m.map_position[1];
    }
    co = [co[0] / n, co[1] / n];
    cm = [cm[0] / n, cm[1] / n];

    let (mut sin, mut cos, mut spread) = (0.0, 0.0, 0.0);
    for m in matches {
        let o = [m.observed[0] - co[0], m.observed[1] - co[1]];
        let w = [m.map_position[0] - cm[0], m.map_position[1] - cm[1]];
        sin += o[0] * w[1] - o[1] * w[0];
        cos += o[0] * w[0] + o[1] * w[1];
        spread += o[0] * o[0] + o[1] * o[1];
    }
    let (heading, flag) = if spread / n > DEGENERATE_SPREAD {
        (normalize_angle(sin.atan2(cos)), PoseFlag::Corrected)
    } else {
        (state.heading, PoseFlag::TranslationOnly)
    };
    let r = rotate(heading, co);
    PoseUpdate {
        state: AgentState {
            position: [cm[0] - r[0], cm[1] - r[1]],
            heading,
            ..*state
        },
        flag,
    }
}

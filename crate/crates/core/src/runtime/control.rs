//! Navigation, reaction and command units.

use serde::{Deserialize, Serialize};

use crate::geometry::{normalize_angle, rotate, Pose2};
use crate::speech::Command;
use crate::vision::Label;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ChassisCommand {
    pub linear: f64,
    pub angular: f64,
}

impl ChassisCommand {
    pub const ZERO: ChassisCommand = ChassisCommand { linear: 0.0, angular: 0.0 };

    pub fn is_zero(&self) -> bool {
        self.linear == 0.0 && self.angular == 0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NavParams {
    pub k_linear: f64,
    pub k_angular: f64,
    pub max_linear: f64,
    pub max_angular: f64,
    pub goal_tolerance_m: f64,
    /// Navigation runs once every this many pose updates.
    pub every_n_poses: u32,
}

impl Default for NavParams {
    fn default() -> Self {
        Self {
            k_linear: 0.8,
            k_angular: 1.5,
            max_linear: 1.0,
            max_angular: 1.5,
            goal_tolerance_m: 0.05,
            every_n_poses: 10,
        }
    }
}

/// Proportional go-to-goal law. Forward speed fades with the cosine of the
/// heading error and is zero while the goal is behind.
pub fn navigation_step(pose: &Pose2, goal: [f64; 2], params: &NavParams) -> ChassisCommand {
    let dx = goal[0] - pose.x;
    let dy = goal[1] - pose.y;
    let dist = dx.hypot(dy);
    if dist <= params.goal_tolerance_m {
        return ChassisCommand::ZERO;
    }
    let err = normalize_angle(dy.atan2(dx) - pose.heading);
    let linear = (params.k_linear * dist * err.cos().max(0.0)).min(params.max_linear.min(1.0));
    let angular = (params.k_angular * err).clamp(-params.max_angular, params.max_angular);
    ChassisCommand { linear, angular }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Action {
    Greet,
    Halt,
    Resume,
    TurnLeft,
    TurnRight,
}

impl From<Command> for Action {
    fn from(c: Command) -> Self {
        match c {
            Command::Stop => Action::Halt,
            Command::Go => Action::Resume,
            Command::Left => Action::TurnLeft,
            Command::Right => Action::TurnRight,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReactionRule {
    pub label: String,
    pub min_score: f64,
    pub action: Action,
}

/// First rule naming the top label, if its score clears the rule's threshold.
pub fn react_to_labels(labels: &[Label], rules: &[ReactionRule]) -> Option<Action> {
    let top = labels.iter().max_by(|a, b| a.score.total_cmp(&b.score))?;
    rules
        .iter()
        .find(|r| r.label == top.name && top.score >= r.min_score)
        .map(|r| r.action)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionRecord {
    pub t_ns: u64,
    pub source: String,
    pub trigger: String,
    pub action: Action,
    pub effect: String,
}

#[derive(Debug, Clone)]
pub struct Controller {
    goal: Option<[f64; 2]>,
    active: bool,
    params: NavParams,
    actions: Vec<ActionRecord>,
    chassis: Vec<(u64, ChassisCommand)>,
}

impl Controller {
    pub fn new(goal: Option<[f64; 2]>, params: NavParams) -> Self {
        Self { goal, active: goal.is_some(), params, actions: Vec::new(), chassis: Vec::new() }
    }

    pub fn is_active(&self) -> bool {
        self.active
    }

    pub fn goal(&self) -> Option<[f64; 2]> {
        self.goal
    }

    pub fn params(&self) -> &NavParams {
        &self.params
    }

    pub fn actions(&self) -> &[ActionRecord] {
        &self.actions
    }

    pub fn chassis_log(&self) -> &[(u64, ChassisCommand)] {
        &self.chassis
    }

    pub fn into_logs(self) -> (Vec<ActionRecord>, Vec<(u64, ChassisCommand)>) {
        (self.actions, self.chassis)
    }

    /// Applies an action and records its effect.
    pub fn apply(&mut self, t_ns: u64, source: &str, trigger: &str, action: Action, pose: &Pose2) {
        let effect = match action {
            Action::Greet => "greeting".to_string(),
            Action::Halt if self.active => {
                self.active = false;
                "navigation cancelled, chassis zeroed".into()
            }
            Action::Halt => "no-op: already idle".into(),
            Action::Resume => match (self.goal, self.active) {
                (None, _) => "no-op: no goal".into(),
                (Some(_), true) => "no-op: already navigating".into(),
                (Some(_), false) => {
                    self.active = true;
                    "navigation resumed".into()
                }
            },
            Action::TurnLeft | Action::TurnRight => {
                let quarter = if action == Action::TurnLeft { 1.0 } else { -1.0 } * std::f64::consts::FRAC_PI_2;
                let rel = match self.goal {
                    Some(g) => [g[0] - pose.x, g[1] - pose.y],
                    None => rotate(pose.heading, [1.0, 0.0]),
                };
                let r = rotate(quarter, rel);
                let g = [pose.x + r[0], pose.y + r[1]];
                self.goal = Some(g);
                format!("goal moved to ({:.3}, {:.3})", g[0], g[1])
            }
        };
        self.actions.push(ActionRecord {
            t_ns,
            source: source.into(),
            trigger: trigger.into(),
            action,
            effect,
        });
    }

    pub fn handle_command(&mut self, t_ns: u64, command: Command, pose: &Pose2) {
        self.apply(t_ns, "speech", command.word(), command.into(), pose);
    }

    /// Emits and logs the chassis command for this pose.
    pub fn step(&mut self, t_ns: u64, pose: &Pose2) -> ChassisCommand {
        let cmd = match (self.active, self.goal) {
            (true, Some(g)) => navigation_step(pose, g, &self.params),
            _ => ChassisCommand::ZERO,
        };
        self.chassis.push((t_ns, cmd));
        cmd
    }
}

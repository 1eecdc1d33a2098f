//! Kinematic simulator that executes action sequences against a single-DOF
//! object.
//!
//! There are no forces. A grasped gripper drags the contact along its joint
//! manifold: every commanded segment is sub-sampled, each sample projected
//! onto the manifold, and a sample farther than `eps_dev` from it counts as
//! the arm getting stuck against the joint constraint. Ungrasped moves only
//! matter for push tasks, where the contact follows a gripper pressing along
//! the joint axis.

use serde::{Deserialize, Serialize};

use crate::action_dsl::{Action, ActionSequence};
use crate::kinematic_model::{
    axis_distance, contact_position_unchecked, project_onto_manifold, ArticulatedObject,
    ContactPoint, JointType, KinematicJoint, Vec3, DEGENERATE_RADIUS, TWIST_RADIUS,
};
use crate::oracle_planner::{ManipulationTask, TWIST_STEP};

/// Where the gripper starts each trial.
pub const GRIPPER_HOME: [f64; 3] = [0.0, 0.0, 0.6];
/// How far a joint may overshoot its limits before the trial fails.
pub const LIMIT_TOLERANCE: f64 = 1e-6;
const PUSH_CONTACT_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    /// Largest tolerated distance between a grasped gripper and the manifold.
    pub eps_dev: f64,
    /// Largest gripper-to-contact distance at which a grasp closes.
    pub eps_grasp: f64,
    /// Sub-step length along a commanded segment.
    pub segment_resolution: f64,
    /// Fraction of the commanded displacement that counts as success.
    pub success_fraction: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            eps_dev: 0.02,
            eps_grasp: 0.01,
            segment_resolution: 0.01,
            success_fraction: 0.9,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), String> {
        for (name, v) in [
            ("eps_dev", self.eps_dev),
            ("eps_grasp", self.eps_grasp),
            ("segment_resolution", self.segment_resolution),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(format!("{name} must be positive, got {v}"));
            }
        }
        if !(self.success_fraction > 0.0 && self.success_fraction <= 1.0) {
            return Err(format!(
                "success_fraction must be in (0, 1], got {}",
                self.success_fraction
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TrialStatus {
    Success,
    StuckFailure,
    GraspMissFailure,
    UnderShootFailure,
    WrongDirectionFailure,
    MalformedPlanFailure,
    LimitViolationFailure,
}

impl TrialStatus {
    pub fn is_success(self) -> bool {
        self == TrialStatus::Success
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialOutcome {
    pub status: TrialStatus,
    /// Final minus initial joint state.
    pub achieved_delta: f64,
    pub steps_executed: usize,
    /// Largest manifold deviation seen on any grasped segment.
    pub max_deviation: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GripperState {
    pub position: Vec3,
    pub grasped: bool,
    /// Net count of 30° rotations, counter-clockwise positive.
    pub roll_steps: i32,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SimEvent {
    Moved { joint_state: f64 },
    Grasped,
    Released,
    Rotated { roll_steps: i32, joint_state: f64 },
    Failed(TrialStatus),
}

impl SimEvent {
    pub fn label(&self) -> String {
        match self {
            SimEvent::Moved { .. } => "moved".into(),
            SimEvent::Grasped => "grasped".into(),
            SimEvent::Released => "released".into(),
            SimEvent::Rotated { .. } => "rotated".into(),
            SimEvent::Failed(status) => format!("failed:{status:?}"),
        }
    }
}

/// One line of the optional per-trial trajectory dump.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub step: usize,
    pub gripper: [f64; 3],
    pub joint_state: f64,
    pub event: String,
}

#[derive(Debug, Clone)]
pub struct Simulator {
    joint: KinematicJoint,
    contact: ContactPoint,
    initial_state: f64,
    gripper: GripperState,
    config: SimConfig,
    push_direction: f64,
    twist_geometry: bool,
    failed: Option<TrialStatus>,
    steps: usize,
    max_deviation: f64,
}

impl Simulator {
    /// `push` enables push semantics for prismatic joints.
    pub fn new(object: &ArticulatedObject, push: bool, config: SimConfig) -> Self {
        let joint = object.joint;
        let contact = object.contact.clone();
        let push_direction = if push && joint.joint_type == JointType::Prismatic {
            // Pressing into the contact moves the gripper along -approach.
            let s = joint.axis.dot(&-contact.approach);
            if s.abs() > 1e-12 {
                s.signum()
            } else {
                0.0
            }
        } else {
            0.0
        };
        let twist_geometry = joint.joint_type == JointType::Revolute
            && axis_distance(&joint, &contact.position) < TWIST_RADIUS;
        Self {
            initial_state: joint.state,
            joint,
            contact,
            gripper: GripperState {
                position: Vec3::from(GRIPPER_HOME),
                grasped: false,
                roll_steps: 0,
            },
            config,
            push_direction,
            twist_geometry,
            failed: None,
            steps: 0,
            max_deviation: 0.0,
        }
    }

    pub fn gripper(&self) -> &GripperState {
        &self.gripper
    }

    pub fn joint_state(&self) -> f64 {
        self.joint.state
    }

    pub fn contact_position(&self) -> Vec3 {
        self.contact.position
    }

    pub fn failure(&self) -> Option<TrialStatus> {
        self.failed
    }

    pub fn steps_executed(&self) -> usize {
        self.steps
    }

    pub fn achieved_delta(&self) -> f64 {
        self.joint.state - self.initial_state
    }

    pub fn max_deviation(&self) -> f64 {
        self.max_deviation
    }

    /// Distance from the gripper to the manifold of the current contact.
    pub fn gripper_deviation(&self) -> f64 {
        match self.project(&self.joint, &self.contact, &self.gripper.position) {
            Some((_, _, d)) => d,
            None => (self.gripper.position - self.contact.position).norm(),
        }
    }

    /// Executes one action. After a failure every further call returns the
    /// same failure without changing state.
    pub fn step(&mut self, action: &Action) -> SimEvent {
        if let Some(status) = self.failed {
            return SimEvent::Failed(status);
        }
        self.steps += 1;
        let event = match action {
            Action::Move(target) => {
                if self.gripper.grasped {
                    self.dragged_move(target)
                } else {
                    self.free_move(target)
                }
            }
            Action::Grasp => {
                if self.gripper.grasped {
                    SimEvent::Failed(TrialStatus::MalformedPlanFailure)
                } else if (self.gripper.position - self.contact.position).norm()
                    <= self.config.eps_grasp
                {
                    self.gripper.grasped = true;
                    self.gripper.position = self.contact.position;
                    SimEvent::Grasped
                } else {
                    SimEvent::Failed(TrialStatus::GraspMissFailure)
                }
            }
            Action::Release => {
                if self.gripper.grasped {
                    self.gripper.grasped = false;
                    SimEvent::Released
                } else {
                    SimEvent::Failed(TrialStatus::MalformedPlanFailure)
                }
            }
            Action::RotateCw | Action::RotateCcw => {
                let sign = if matches!(action, Action::RotateCcw) { 1 } else { -1 };
                self.rotate(sign)
            }
        };
        if let SimEvent::Failed(status) = event {
            self.failed = Some(status);
        }
        event
    }

    fn within_limits(&self, param: f64) -> bool {
        self.joint.limits.contains(param, LIMIT_TOLERANCE)
    }

    /// `(param, projected, deviation)` against a joint/contact pair, or
    /// `None` when the contact sits on a revolute axis.
    fn project(
        &self,
        joint: &KinematicJoint,
        contact: &ContactPoint,
        p: &Vec3,
    ) -> Option<(f64, Vec3, f64)> {
        if joint.joint_type == JointType::Revolute
            && axis_distance(joint, &contact.position) <= DEGENERATE_RADIUS
        {
            return None;
        }
        project_onto_manifold(joint, contact, p)
            .ok()
            .map(|pr| (pr.param, pr.projected, pr.deviation))
    }

    fn samples(&self, target: &Vec3) -> Vec<Vec3> {
        let start = self.gripper.position;
        let length = (target - start).norm();
        let n = ((length / self.config.segment_resolution).ceil() as usize).max(1);
        (1..=n)
            .map(|i| {
                if i == n {
                    *target
                } else {
                    start + (target - start) * (i as f64 / n as f64)
                }
            })
            .collect()
    }

    fn dragged_move(&mut self, target: &Vec3) -> SimEvent {
        if self.joint.joint_type == JointType::Fixed {
            return SimEvent::Failed(TrialStatus::StuckFailure);
        }
        let mut joint = self.joint;
        let mut contact = self.contact.clone();
        let mut failure = None;
        let mut segment_peak: f64 = 0.0;
        for sample in self.samples(target) {
            let (param, projected, deviation) = match self.project(&joint, &contact, &sample) {
                Some(p) => p,
                None => (joint.state, contact.position, (sample - contact.position).norm()),
            };
            segment_peak = segment_peak.max(deviation);
            if failure.is_some() {
                continue;
            }
            if deviation > self.config.eps_dev {
                failure = Some(TrialStatus::StuckFailure);
            } else if !self.within_limits(param) {
                failure = Some(TrialStatus::LimitViolationFailure);
            } else {
                joint.state = param;
                contact.position = projected;
            }
        }
        self.max_deviation = self.max_deviation.max(segment_peak);
        if let Some(status) = failure {
            return SimEvent::Failed(status);
        }
        self.joint = joint;
        self.contact = contact;
        self.gripper.position = self.contact.position;
        SimEvent::Moved {
            joint_state: self.joint.state,
        }
    }

    fn free_move(&mut self, target: &Vec3) -> SimEvent {
        if self.push_direction == 0.0 {
            self.gripper.position = *target;
            return SimEvent::Moved {
                joint_state: self.joint.state,
            };
        }
        let s = self.push_direction;
        let mut prev_progress = self
            .project(&self.joint, &self.contact, &self.gripper.position)
            .map_or(f64::NEG_INFINITY, |(param, _, _)| s * (param - self.joint.state));
        for sample in self.samples(target) {
            let Some((param, projected, deviation)) = self.project(&self.joint, &self.contact, &sample)
            else {
                continue;
            };
            let progress = s * (param - self.joint.state);
            if deviation <= self.config.eps_dev
                && progress > PUSH_CONTACT_TOLERANCE
                && prev_progress <= PUSH_CONTACT_TOLERANCE
            {
                if !self.within_limits(param) {
                    return SimEvent::Failed(TrialStatus::LimitViolationFailure);
                }
                self.joint.state = param;
                self.contact.position = projected;
                prev_progress = 0.0;
            } else {
                prev_progress = progress;
            }
        }
        self.gripper.position = *target;
        SimEvent::Moved {
            joint_state: self.joint.state,
        }
    }

    fn rotate(&mut self, sign: i32) -> SimEvent {
        if !self.gripper.grasped {
            return SimEvent::Failed(TrialStatus::MalformedPlanFailure);
        }
        self.gripper.roll_steps += sign;
        if self.twist_geometry {
            let param = self.joint.state + sign as f64 * TWIST_STEP;
            if !self.within_limits(param) {
                return SimEvent::Failed(TrialStatus::LimitViolationFailure);
            }
            self.contact.position = contact_position_unchecked(&self.joint, &self.contact, param);
            self.joint.state = param;
            self.gripper.position = self.contact.position;
        }
        SimEvent::Rotated {
            roll_steps: self.gripper.roll_steps,
            joint_state: self.joint.state,
        }
    }

    fn trace_record(&self, event: &str) -> TraceRecord {
        let p = self.gripper.position;
        TraceRecord {
            step: self.steps,
            gripper: [p.x, p.y, p.z],
            joint_state: self.joint.state,
            event: event.to_string(),
        }
    }
}

pub fn judge_outcome(task: &ManipulationTask, achieved_delta: f64, config: &SimConfig) -> TrialStatus {
    let same_sign = achieved_delta != 0.0 && achieved_delta.signum() == task.delta.signum();
    if achieved_delta != 0.0 && !same_sign {
        TrialStatus::WrongDirectionFailure
    } else if !same_sign || achieved_delta.abs() < config.success_fraction * task.delta.abs() {
        TrialStatus::UnderShootFailure
    } else {
        TrialStatus::Success
    }
}

pub fn judge_success(task: &ManipulationTask, achieved_delta: f64, config: &SimConfig) -> bool {
    judge_outcome(task, achieved_delta, config).is_success()
}

pub fn execute(
    object: &ArticulatedObject,
    seq: &ActionSequence,
    task: &ManipulationTask,
    config: &SimConfig,
) -> TrialOutcome {
    execute_inner(object, seq, task, config, None)
}

/// Like [`execute`], also returning one trace record per step (plus the
/// starting pose).
pub fn execute_traced(
    object: &ArticulatedObject,
    seq: &ActionSequence,
    task: &ManipulationTask,
    config: &SimConfig,
) -> (TrialOutcome, Vec<TraceRecord>) {
    let mut trace = Vec::new();
    let outcome = execute_inner(object, seq, task, config, Some(&mut trace));
    (outcome, trace)
}

fn execute_inner(
    object: &ArticulatedObject,
    seq: &ActionSequence,
    task: &ManipulationTask,
    config: &SimConfig,
    mut trace: Option<&mut Vec<TraceRecord>>,
) -> TrialOutcome {
    let malformed = TrialOutcome {
        status: TrialStatus::MalformedPlanFailure,
        achieved_delta: 0.0,
        steps_executed: 0,
        max_deviation: 0.0,
    };
    if object.validate().is_err() || seq.validate().is_err() || config.validate().is_err() {
        return malformed;
    }
    let mut sim = Simulator::new(object, task.push, *config);
    if let Some(t) = trace.as_deref_mut() {
        t.push(sim.trace_record("start"));
    }
    for action in seq.actions() {
        let event = sim.step(action);
        if let Some(t) = trace.as_deref_mut() {
            t.push(sim.trace_record(&event.label()));
        }
        if matches!(event, SimEvent::Failed(_)) {
            break;
        }
    }
    let achieved_delta = sim.achieved_delta();
    let status = sim
        .failure()
        .unwrap_or_else(|| judge_outcome(task, achieved_delta, config));
    TrialOutcome {
        status,
        achieved_delta,
        steps_executed: sim.steps_executed(),
        max_deviation: sim.max_deviation(),
    }
}

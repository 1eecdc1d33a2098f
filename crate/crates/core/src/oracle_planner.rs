//! Analytic planner: turns joint structure plus a commanded joint
//! displacement into an [`ActionSequence`].
//!
//! Prismatic joints get straight-line waypoints, revolute joints with an
//! off-axis contact get waypoints on the contact's circle, and on-axis
//! contacts (knobs, caps) are turned with 30° gripper rotations. The same
//! planner generates demonstrations, backs the mock LLM client and serves as
//! ground truth in tests.

use std::f64::consts::PI;

use thiserror::Error;

use crate::action_dsl::{Action, ActionSequence};
use crate::kinematic_model::{
    axis_distance, classify_manipulation_mode, contact_position_at, ArticulatedObject,
    ContactPoint, JointType, KinematicError, KinematicJoint, ManipulationMode, Vec3,
    LIMIT_SLACK, TWIST_RADIUS,
};

/// Angle turned by one `rotate_cw`/`rotate_ccw` action.
pub const TWIST_STEP: f64 = PI / 6.0;

/// Fraction of a step ignored when counting segments, so a four-decimal
/// delta such as 1.5708 (≈ 90°) does not produce a sliver extra segment.
const COUNT_SLACK: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PlanError {
    #[error(transparent)]
    Kinematic(#[from] KinematicError),
    #[error("step must be positive, got {step}")]
    BadStep { step: f64 },
    #[error("{operation} needs a {expected} joint, found {found}")]
    JointTypeMismatch {
        operation: &'static str,
        expected: &'static str,
        found: &'static str,
    },
    #[error("target joint state {target} outside limits [{lower}, {upper}]")]
    InfeasibleTask { target: f64, lower: f64, upper: f64 },
    #[error("invalid task: {0}")]
    InvalidTask(String),
    #[error("invalid planner config: {0}")]
    InvalidConfig(String),
}

pub type Result<T> = std::result::Result<T, PlanError>;

/// An instruction plus the joint displacement it commands.
#[derive(Debug, Clone, PartialEq)]
pub struct ManipulationTask {
    pub instruction: String,
    /// Signed joint displacement; radians or meters.
    pub delta: f64,
    /// Push the contact instead of grasping it.
    pub push: bool,
}

impl ManipulationTask {
    pub fn new(instruction: impl Into<String>, delta: f64, push: bool) -> Self {
        Self {
            instruction: instruction.into(),
            delta,
            push,
        }
    }

    /// Checks the task against the object it will be executed on.
    pub fn validate_for(&self, object: &ArticulatedObject) -> Result<()> {
        if !self.delta.is_finite() || self.delta == 0.0 {
            return Err(PlanError::InvalidTask(format!(
                "delta must be finite and non-zero, got {}",
                self.delta
            )));
        }
        let joint = &object.joint;
        if joint.joint_type == JointType::Revolute && self.delta.abs() > PI + LIMIT_SLACK {
            return Err(PlanError::InvalidTask(format!(
                "revolute delta {} exceeds π",
                self.delta
            )));
        }
        let target = joint.state + self.delta;
        if !joint.limits.contains(target, LIMIT_SLACK) {
            return Err(PlanError::InfeasibleTask {
                target,
                lower: joint.limits.lower,
                upper: joint.limits.upper,
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlannerConfig {
    /// Angular spacing of arc waypoints (radians).
    pub arc_step: f64,
    /// Spacing of straight-line waypoints (meters).
    pub linear_step: f64,
    /// Distance of the pre-grasp waypoint from the contact along `approach`.
    pub approach_offset: f64,
    /// Fixed by the DSL.
    pub twist_step: f64,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        Self {
            arc_step: 15f64.to_radians(),
            linear_step: 0.05,
            approach_offset: 0.05,
            twist_step: TWIST_STEP,
        }
    }
}

impl PlannerConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("arc_step", self.arc_step),
            ("linear_step", self.linear_step),
            ("approach_offset", self.approach_offset),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(PlanError::InvalidConfig(format!("{name} must be positive, got {v}")));
            }
        }
        if self.twist_step != TWIST_STEP {
            return Err(PlanError::InvalidConfig(format!(
                "twist_step is fixed at 30°, got {}°",
                self.twist_step.to_degrees()
            )));
        }
        Ok(())
    }
}

/// `ceil(total / step)`, at least 1.
fn segment_count(total: f64, step: f64) -> usize {
    ((total / step - COUNT_SLACK).ceil() as usize).max(1)
}

/// Joint parameters `state + i·delta/N` for `i = 1..=N`; the last is exactly
/// `state + delta`.
fn params(state: f64, delta: f64, n: usize) -> impl Iterator<Item = f64> {
    (1..=n).map(move |i| {
        if i == n {
            state + delta
        } else {
            state + delta * i as f64 / n as f64
        }
    })
}

fn check_step(step: f64) -> Result<()> {
    if step > 0.0 && step.is_finite() {
        Ok(())
    } else {
        Err(PlanError::BadStep { step })
    }
}

pub fn arc_waypoints(
    joint: &KinematicJoint,
    contact: &ContactPoint,
    delta: f64,
    step: f64,
) -> Result<Vec<Vec3>> {
    if joint.joint_type != JointType::Revolute {
        return Err(PlanError::JointTypeMismatch {
            operation: "arc_waypoints",
            expected: "revolute",
            found: joint.joint_type.as_str(),
        });
    }
    check_step(step)?;
    let radius = axis_distance(joint, &contact.position);
    if radius <= TWIST_RADIUS {
        return Err(KinematicError::DegenerateRadius { radius }.into());
    }
    let n = segment_count(delta.abs(), step);
    params(joint.state, delta, n)
        .map(|q| contact_position_at(joint, contact, q).map_err(PlanError::from))
        .collect()
}

pub fn linear_waypoints(
    joint: &KinematicJoint,
    contact: &ContactPoint,
    delta: f64,
    step: f64,
) -> Result<Vec<Vec3>> {
    if joint.joint_type != JointType::Prismatic {
        return Err(PlanError::JointTypeMismatch {
            operation: "linear_waypoints",
            expected: "prismatic",
            found: joint.joint_type.as_str(),
        });
    }
    check_step(step)?;
    let n = segment_count(delta.abs(), step);
    params(joint.state, delta, n)
        .map(|q| contact_position_at(joint, contact, q).map_err(PlanError::from))
        .collect()
}

/// Rotations realizing `delta` about the joint axis; counter-clockwise is
/// positive (right-hand rule about +axis).
pub fn twist_actions(delta: f64) -> Vec<Action> {
    if delta == 0.0 {
        return Vec::new();
    }
    let action = if delta > 0.0 {
        Action::RotateCcw
    } else {
        Action::RotateCw
    };
    vec![action; segment_count(delta.abs(), TWIST_STEP)]
}

pub fn plan(
    object: &ArticulatedObject,
    task: &ManipulationTask,
    config: &PlannerConfig,
) -> Result<ActionSequence> {
    object.validate()?;
    config.validate()?;
    task.validate_for(object)?;
    let mode = classify_manipulation_mode(object, task.push)?;
    let contact = &object.contact;
    let joint = &object.joint;

    let mut actions = vec![
        Action::Move(contact.position + contact.approach * config.approach_offset),
        Action::Move(contact.position),
    ];
    match mode {
        ManipulationMode::LinearPush => {
            let path = linear_waypoints(joint, contact, task.delta, config.linear_step)?;
            actions.extend(path.into_iter().map(Action::Move));
        }
        ManipulationMode::LinearGrasp | ManipulationMode::ArcGrasp => {
            let path = if mode == ManipulationMode::LinearGrasp {
                linear_waypoints(joint, contact, task.delta, config.linear_step)?
            } else {
                arc_waypoints(joint, contact, task.delta, config.arc_step)?
            };
            actions.push(Action::Grasp);
            actions.extend(path.into_iter().map(Action::Move));
            actions.push(Action::Release);
        }
        ManipulationMode::TwistGrasp => {
            actions.push(Action::Grasp);
            actions.extend(twist_actions(task.delta));
            actions.push(Action::Release);
        }
    }
    ActionSequence::new(actions).map_err(|e| PlanError::InvalidTask(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::action_dsl::waypoints_of;
    use crate::kinematic_model::{project_onto_manifold, JointLimits, Part};
    use nalgebra::{Rotation3, Unit};
    use proptest::prelude::*;
    use std::f64::consts::FRAC_PI_2;

    fn door() -> ArticulatedObject {
        ArticulatedObject {
            name: "door".into(),
            parts: [
                Part { id: 0, name: "frame".into() },
                Part { id: 1, name: "door".into() },
            ],
            joint: KinematicJoint {
                joint_type: JointType::Revolute,
                axis: Vec3::z(),
                origin: Vec3::zeros(),
                limits: JointLimits::new(-PI, PI),
                state: 0.0,
            },
            contact: ContactPoint {
                name: "handle".into(),
                position: Vec3::new(0.5, 0.0, 0.4),
                approach: Vec3::x(),
            },
        }
    }

    fn drawer() -> ArticulatedObject {
        ArticulatedObject {
            name: "drawer".into(),
            parts: [
                Part { id: 0, name: "base".into() },
                Part { id: 1, name: "drawer".into() },
            ],
            joint: KinematicJoint {
                joint_type: JointType::Prismatic,
                axis: Vec3::x(),
                origin: Vec3::zeros(),
                limits: JointLimits::new(0.0, 0.4),
                state: 0.0,
            },
            contact: ContactPoint {
                name: "handle".into(),
                position: Vec3::new(0.2, 0.1, 0.3),
                approach: Vec3::x(),
            },
        }
    }

    fn rotated(p: Vec3, angle_deg: f64) -> Vec3 {
        Rotation3::from_axis_angle(&Unit::new_normalize(Vec3::z()), angle_deg.to_radians()) * p
    }

    #[test]
    fn quarter_arc_in_thirty_degree_steps() {
        let o = door();
        let pts = arc_waypoints(&o.joint, &o.contact, FRAC_PI_2, 30f64.to_radians()).unwrap();
        let c = o.contact.position;
        let expected = [rotated(c, 30.0), rotated(c, 60.0), rotated(c, 90.0)];
        assert_eq!(pts.len(), 3);
        for (p, e) in pts.iter().zip(&expected) {
            assert!((p - e).norm() < 1e-12);
        }
        assert!((pts[0] - Vec3::new(0.4330, 0.25, 0.4)).norm() < 1e-4);
        assert!((pts[1] - Vec3::new(0.25, 0.4330, 0.4)).norm() < 1e-4);
        assert!((pts[2] - Vec3::new(0.0, 0.5, 0.4)).norm() < 1e-12);
    }

    #[test]
    fn single_step_arc() {
        let o = door();
        let step = 30f64.to_radians();
        assert_eq!(arc_waypoints(&o.joint, &o.contact, step, step).unwrap().len(), 1);
    }

    #[test]
    fn negative_arc_mirrors() {
        let o = door();
        let pts = arc_waypoints(&o.joint, &o.contact, -FRAC_PI_2, 30f64.to_radians()).unwrap();
        assert!((pts[0] - rotated(o.contact.position, -30.0)).norm() < 1e-12);
        assert!((pts[0] - Vec3::new(0.4330, -0.25, 0.4)).norm() < 1e-4);
    }

    #[test]
    fn arc_errors() {
        let o = door();
        assert_eq!(
            arc_waypoints(&o.joint, &o.contact, 1.0, 0.0),
            Err(PlanError::BadStep { step: 0.0 })
        );
        let mut knob = o.contact.clone();
        knob.position = Vec3::new(0.01, 0.0, 0.4);
        assert!(matches!(
            arc_waypoints(&o.joint, &knob, 1.0, 0.1),
            Err(PlanError::Kinematic(KinematicError::DegenerateRadius { .. }))
        ));
        let d = drawer();
        assert!(matches!(
            arc_waypoints(&d.joint, &d.contact, 0.1, 0.1),
            Err(PlanError::JointTypeMismatch { .. })
        ));
    }

    #[test]
    fn linear_progression() {
        let d = drawer();
        let pts = linear_waypoints(&d.joint, &d.contact, 0.3, 0.1).unwrap();
        let expected = [
            Vec3::new(0.3, 0.1, 0.3),
            Vec3::new(0.4, 0.1, 0.3),
            Vec3::new(0.5, 0.1, 0.3),
        ];
        assert_eq!(pts.len(), 3);
        for (p, e) in pts.iter().zip(&expected) {
            assert!((p - e).norm() < 1e-12);
        }
        let short = linear_waypoints(&d.joint, &d.contact, 0.05, 0.1).unwrap();
        assert_eq!(short.len(), 1);
        assert!((short[0] - Vec3::new(0.25, 0.1, 0.3)).norm() < 1e-12);

        let mut back = d.clone();
        back.joint.state = 0.3;
        let pts = linear_waypoints(&back.joint, &back.contact, -0.2, 0.1).unwrap();
        assert_eq!(pts.len(), 2);
        assert!((pts[0] - Vec3::new(0.1, 0.1, 0.3)).norm() < 1e-12);
        assert!((pts[1] - Vec3::new(0.0, 0.1, 0.3)).norm() < 1e-12);
        assert_eq!(
            linear_waypoints(&d.joint, &d.contact, 0.3, -1.0),
            Err(PlanError::BadStep { step: -1.0 })
        );
    }

    #[test]
    #[allow(clippy::approx_constant)] // the four-decimal task text
    fn twist_counts() {
        assert_eq!(twist_actions(FRAC_PI_2), vec![Action::RotateCcw; 3]);
        assert_eq!(twist_actions(1.5708), vec![Action::RotateCcw; 3]);
        assert_eq!(twist_actions(-45f64.to_radians()), vec![Action::RotateCw; 2]);
        assert!(twist_actions(0.0).is_empty());
    }

    #[test]
    fn drawer_plan_shape() {
        let task = ManipulationTask::new("open the drawer", 0.3, false);
        let cfg = PlannerConfig {
            linear_step: 0.1,
            ..PlannerConfig::default()
        };
        let seq = plan(&drawer(), &task, &cfg).unwrap();
        let expected_moves = linear_waypoints(&drawer().joint, &drawer().contact, 0.3, 0.1)
            .unwrap()
            .len();
        assert_eq!(seq.len(), 2 + 1 + expected_moves + 1);
        assert_eq!(seq.len(), 7);
        assert_eq!(seq.actions()[2], Action::Grasp);
        assert_eq!(*seq.actions().last().unwrap(), Action::Release);
        assert_eq!(waypoints_of(&seq).len(), 5);
        assert_eq!(
            seq.actions()[0],
            Action::Move(drawer().contact.position + Vec3::x() * 0.05)
        );
    }

    #[test]
    fn button_plan_has_no_grasp() {
        let mut button = drawer();
        button.joint.limits = JointLimits::new(0.0, 0.03);
        let task = ManipulationTask::new("turn on the button", 0.02, true);
        let seq = plan(&button, &task, &PlannerConfig::default()).unwrap();
        assert_eq!(seq.len(), 3);
        assert!(seq.actions().iter().all(|a| matches!(a, Action::Move(_))));
    }

    #[test]
    fn bottle_plan_twists() {
        let mut bottle = door();
        bottle.contact.position = Vec3::new(0.005, 0.0, 0.3);
        let task = ManipulationTask::new("turn on the bottle", FRAC_PI_2, false);
        let seq = plan(&bottle, &task, &PlannerConfig::default()).unwrap();
        assert_eq!(
            &seq.actions()[2..],
            &[
                Action::Grasp,
                Action::RotateCcw,
                Action::RotateCcw,
                Action::RotateCcw,
                Action::Release
            ]
        );
    }

    #[test]
    fn infeasible_and_invalid_tasks() {
        let task = ManipulationTask::new("open the drawer", 0.5, false);
        assert!(matches!(
            plan(&drawer(), &task, &PlannerConfig::default()),
            Err(PlanError::InfeasibleTask { .. })
        ));
        let task = ManipulationTask::new("open the drawer", 0.0, false);
        assert!(matches!(
            plan(&drawer(), &task, &PlannerConfig::default()),
            Err(PlanError::InvalidTask(_))
        ));
        let cfg = PlannerConfig {
            twist_step: 0.1,
            ..PlannerConfig::default()
        };
        let task = ManipulationTask::new("open the drawer", 0.1, false);
        assert!(matches!(
            plan(&drawer(), &task, &cfg),
            Err(PlanError::InvalidConfig(_))
        ));
    }

    fn random_door() -> impl Strategy<Value = (ArticulatedObject, f64)> {
        (
            (-1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0)
                .prop_filter("axis", |(x, y, z)| x * x + y * y + z * z > 0.05),
            (0.05f64..1.0),
            (-1.0f64..1.0),
            (0.05f64..1.0),
            any::<bool>(),
        )
            .prop_map(|((x, y, z), radius, state, frac, negative)| {
                let axis = Vec3::new(x, y, z).normalize();
                let perp = axis.cross(&Vec3::new(0.3, -0.7, 0.2)).normalize();
                let mut o = door();
                o.joint.axis = axis;
                o.joint.origin = Vec3::new(0.5, -0.2, 0.3);
                o.joint.state = state;
                o.joint.limits = JointLimits::new(state - PI, state + PI);
                o.contact.position = o.joint.origin + axis * 0.1 + perp * radius;
                let delta = if negative { -frac * PI } else { frac * PI };
                (o, delta)
            })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(500))]

        #[test]
        fn arc_points_keep_radius_and_end_exactly((o, delta) in random_door(), step_deg in 1.0f64..90.0) {
            let r = o.contact_radius();
            let pts = arc_waypoints(&o.joint, &o.contact, delta, step_deg.to_radians()).unwrap();
            for p in &pts {
                prop_assert!((axis_distance(&o.joint, p) - r).abs() < 1e-9);
            }
            let last = project_onto_manifold(&o.joint, &o.contact, pts.last().unwrap()).unwrap();
            prop_assert!((last.param - (o.joint.state + delta)).abs() < 1e-9);
            prop_assert!(last.deviation < 1e-9);

            // Progress is strictly monotone toward the target.
            let mut prev = o.joint.state;
            let mut joint = o.joint;
            let mut contact = o.contact.clone();
            for p in &pts {
                let proj = project_onto_manifold(&joint, &contact, p).unwrap();
                prop_assert!((proj.param - prev) * delta.signum() > 0.0);
                prev = proj.param;
                joint.state = proj.param;
                contact.position = proj.projected;
            }
        }

        #[test]
        fn plans_validate((o, delta) in random_door(), push in any::<bool>()) {
            let task = ManipulationTask::new("move it", delta, push);
            let seq = plan(&o, &task, &PlannerConfig::default()).unwrap();
            prop_assert!(seq.validate().is_ok());
        }
    }
}

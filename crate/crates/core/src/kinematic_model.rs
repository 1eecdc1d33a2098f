//! Geometric types for single-DOF articulated objects and the joint-manifold
//! math shared by the planner and the simulator.
//!
//! Everything lives in the world frame. A joint is an axis line (direction +
//! a point on it) with limits and a current parameter; the contact point is
//! the actionable spot on the movable part, given at the current parameter.
//! Moving the joint sweeps the contact along a line (prismatic) or a circle
//! about the axis line (revolute). That curve is the "manifold" a grasped
//! gripper is confined to.

use nalgebra::Vector3;
use thiserror::Error;

pub type Vec3 = Vector3<f64>;

/// Tolerance on `‖axis‖ = 1` and `‖approach‖ = 1`.
pub const UNIT_TOLERANCE: f64 = 1e-9;
/// Below this norm a vector has no direction.
pub const ZERO_VECTOR_EPS: f64 = 1e-12;
/// Below this contact radius a revolute projection is undefined.
pub const DEGENERATE_RADIUS: f64 = 1e-9;
/// Contacts closer than this to a revolute axis are twisted, not swung.
pub const TWIST_RADIUS: f64 = 0.02;
/// Slack used when checking a parameter against joint limits.
pub const LIMIT_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum KinematicError {
    #[error("cannot normalize a zero-length vector")]
    ZeroVector,
    #[error("joint parameter {param} outside limits [{lower}, {upper}]")]
    OutOfLimits { param: f64, lower: f64, upper: f64 },
    #[error("contact lies on the revolute axis (radius {radius:e})")]
    DegenerateRadius { radius: f64 },
    #[error("operation requires a revolute or prismatic joint, found a fixed joint")]
    FixedJoint,
    #[error("invariant violated: {0}")]
    InvariantViolation(String),
}

pub type Result<T> = std::result::Result<T, KinematicError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum JointType {
    Revolute,
    Prismatic,
    Fixed,
}

impl JointType {
    pub fn as_str(self) -> &'static str {
        match self {
            JointType::Revolute => "revolute",
            JointType::Prismatic => "prismatic",
            JointType::Fixed => "fixed",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "revolute" => Some(JointType::Revolute),
            "prismatic" => Some(JointType::Prismatic),
            "fixed" => Some(JointType::Fixed),
            _ => None,
        }
    }
}

/// Joint range; radians for revolute joints, meters for prismatic ones.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JointLimits {
    pub lower: f64,
    pub upper: f64,
}

impl JointLimits {
    pub fn new(lower: f64, upper: f64) -> Self {
        Self { lower, upper }
    }

    pub fn contains(&self, value: f64, slack: f64) -> bool {
        value >= self.lower - slack && value <= self.upper + slack
    }

    pub fn range(&self) -> f64 {
        self.upper - self.lower
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KinematicJoint {
    pub joint_type: JointType,
    /// Unit direction of the joint axis.
    pub axis: Vec3,
    /// A point the axis line passes through.
    pub origin: Vec3,
    pub limits: JointLimits,
    /// Current joint parameter.
    pub state: f64,
}

impl KinematicJoint {
    pub fn validate(&self) -> Result<()> {
        if !is_finite(&self.axis) || !is_finite(&self.origin) {
            return Err(invariant("joint axis and origin must be finite"));
        }
        if ![self.limits.lower, self.limits.upper, self.state]
            .iter()
            .all(|v| v.is_finite())
        {
            return Err(invariant("joint limits and state must be finite"));
        }
        if self.joint_type == JointType::Fixed {
            if self.limits.lower != 0.0 || self.limits.upper != 0.0 || self.state != 0.0 {
                return Err(invariant("fixed joints must have lower = upper = state = 0"));
            }
            return Ok(());
        }
        if (self.axis.norm() - 1.0).abs() > UNIT_TOLERANCE {
            return Err(invariant(format!(
                "joint axis must be unit length (norm {})",
                self.axis.norm()
            )));
        }
        if self.limits.lower > self.limits.upper {
            return Err(invariant(format!(
                "joint limits inverted: lower {} > upper {}",
                self.limits.lower, self.limits.upper
            )));
        }
        if !self.limits.contains(self.state, 0.0) {
            return Err(invariant(format!(
                "joint state {} outside limits [{}, {}]",
                self.state, self.limits.lower, self.limits.upper
            )));
        }
        Ok(())
    }

    /// Copy of this joint with a different current parameter.
    pub fn with_state(&self, state: f64) -> Self {
        Self { state, ..*self }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContactPoint {
    pub name: String,
    /// World position at the joint's current state.
    pub position: Vec3,
    /// Unit direction the gripper approaches from.
    pub approach: Vec3,
}

impl ContactPoint {
    pub fn validate(&self) -> Result<()> {
        if !is_finite(&self.position) || !is_finite(&self.approach) {
            return Err(invariant("contact position and approach must be finite"));
        }
        if (self.approach.norm() - 1.0).abs() > UNIT_TOLERANCE {
            return Err(invariant(format!(
                "contact approach must be unit length (norm {})",
                self.approach.norm()
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Part {
    pub id: u32,
    pub name: String,
}

/// A base part and a movable part connected by one actuated joint, with the
/// contact attached to the movable part.
#[derive(Debug, Clone, PartialEq)]
pub struct ArticulatedObject {
    pub name: String,
    /// `parts[0]` is the base, `parts[1]` the movable part.
    pub parts: [Part; 2],
    pub joint: KinematicJoint,
    pub contact: ContactPoint,
}

impl ArticulatedObject {
    pub fn validate(&self) -> Result<()> {
        if self.parts[0].id == self.parts[1].id {
            return Err(invariant("base and movable parts must have distinct ids"));
        }
        self.joint.validate()?;
        if self.joint.joint_type == JointType::Fixed {
            return Err(invariant(
                "object must have exactly one revolute or prismatic joint",
            ));
        }
        self.contact.validate()
    }

    /// Copy of the object moved to another joint parameter; the contact is
    /// carried along by forward kinematics.
    pub fn at_state(&self, state: f64) -> Result<Self> {
        let position = contact_position_at(&self.joint, &self.contact, state)?;
        let mut moved = self.clone();
        moved.joint.state = state;
        moved.contact.position = position;
        Ok(moved)
    }

    /// Perpendicular distance from the contact to the joint axis line.
    pub fn contact_radius(&self) -> f64 {
        axis_distance(&self.joint, &self.contact.position)
    }

    pub fn movable_part(&self) -> &Part {
        &self.parts[1]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ManipulationMode {
    LinearGrasp,
    LinearPush,
    ArcGrasp,
    TwistGrasp,
}

impl ManipulationMode {
    pub fn as_str(self) -> &'static str {
        match self {
            ManipulationMode::LinearGrasp => "linear_grasp",
            ManipulationMode::LinearPush => "linear_push",
            ManipulationMode::ArcGrasp => "arc_grasp",
            ManipulationMode::TwistGrasp => "twist_grasp",
        }
    }
}

/// Result of projecting a point onto a joint manifold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Projection {
    /// Joint parameter (not clamped to limits).
    pub param: f64,
    pub projected: Vec3,
    pub deviation: f64,
}

fn invariant(msg: impl Into<String>) -> KinematicError {
    KinematicError::InvariantViolation(msg.into())
}

pub fn is_finite(v: &Vec3) -> bool {
    v.iter().all(|c| c.is_finite())
}

pub fn normalize(v: &Vec3) -> Result<Vec3> {
    let n = v.norm();
    if !n.is_finite() || n <= ZERO_VECTOR_EPS {
        return Err(KinematicError::ZeroVector);
    }
    Ok(v / n)
}

/// Rotates `v` about the unit direction `k` by `angle` (Rodrigues' formula).
pub fn rotate_about(v: &Vec3, k: &Vec3, angle: f64) -> Vec3 {
    let (s, c) = angle.sin_cos();
    v * c + k.cross(v) * s + k * (k.dot(v) * (1.0 - c))
}

/// Splits `p - origin` into the component along the axis and the remainder.
fn split_axial(joint: &KinematicJoint, p: &Vec3) -> (Vec3, Vec3) {
    let rel = p - joint.origin;
    let along = joint.axis * joint.axis.dot(&rel);
    (along, rel - along)
}

/// Perpendicular distance of `p` to the joint's axis line.
pub fn axis_distance(joint: &KinematicJoint, p: &Vec3) -> f64 {
    split_axial(joint, p).1.norm()
}

/// Forward kinematics of the contact without the limit check.
pub(crate) fn contact_position_unchecked(
    joint: &KinematicJoint,
    contact: &ContactPoint,
    param: f64,
) -> Vec3 {
    let offset = param - joint.state;
    match joint.joint_type {
        JointType::Prismatic => contact.position + joint.axis * offset,
        JointType::Revolute => {
            let rel = contact.position - joint.origin;
            joint.origin + rotate_about(&rel, &joint.axis, offset)
        }
        JointType::Fixed => contact.position,
    }
}

/// World position of the contact when the joint sits at `param`.
pub fn contact_position_at(
    joint: &KinematicJoint,
    contact: &ContactPoint,
    param: f64,
) -> Result<Vec3> {
    if !param.is_finite() || !joint.limits.contains(param, LIMIT_SLACK) {
        return Err(KinematicError::OutOfLimits {
            param,
            lower: joint.limits.lower,
            upper: joint.limits.upper,
        });
    }
    Ok(contact_position_unchecked(joint, contact, param))
}

/// Nearest point to `p` on the curve the contact sweeps, with the joint
/// parameter that reaches it.
///
/// Revolute angles are measured from the contact's current direction and
/// land in `(-π, π]` around `joint.state`.
pub fn project_onto_manifold(
    joint: &KinematicJoint,
    contact: &ContactPoint,
    p: &Vec3,
) -> Result<Projection> {
    match joint.joint_type {
        JointType::Fixed => Err(KinematicError::FixedJoint),
        JointType::Prismatic => {
            let along = joint.axis.dot(&(p - contact.position));
            let projected = contact.position + joint.axis * along;
            Ok(Projection {
                param: joint.state + along,
                projected,
                deviation: (p - projected).norm(),
            })
        }
        JointType::Revolute => {
            let (c_along, c_perp) = split_axial(joint, &contact.position);
            let radius = c_perp.norm();
            if radius <= DEGENERATE_RADIUS {
                return Err(KinematicError::DegenerateRadius { radius });
            }
            let (_, p_perp) = split_axial(joint, p);
            let sin = joint.axis.dot(&c_perp.cross(&p_perp));
            let cos = c_perp.dot(&p_perp);
            let angle = sin.atan2(cos);
            let projected = joint.origin + c_along + rotate_about(&c_perp, &joint.axis, angle);
            Ok(Projection {
                param: joint.state + angle,
                projected,
                deviation: (p - projected).norm(),
            })
        }
    }
}

pub fn classify_manipulation_mode(
    object: &ArticulatedObject,
    push: bool,
) -> Result<ManipulationMode> {
    match object.joint.joint_type {
        JointType::Fixed => Err(KinematicError::FixedJoint),
        JointType::Prismatic if push => Ok(ManipulationMode::LinearPush),
        JointType::Prismatic => Ok(ManipulationMode::LinearGrasp),
        JointType::Revolute if object.contact_radius() < TWIST_RADIUS => {
            Ok(ManipulationMode::TwistGrasp)
        }
        JointType::Revolute => Ok(ManipulationMode::ArcGrasp),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{Rotation3, Unit};
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

    fn revolute_z() -> (KinematicJoint, ContactPoint) {
        (
            KinematicJoint {
                joint_type: JointType::Revolute,
                axis: Vec3::z(),
                origin: Vec3::zeros(),
                limits: JointLimits::new(-PI, PI),
                state: 0.0,
            },
            ContactPoint {
                name: "handle".into(),
                position: Vec3::new(0.5, 0.0, 0.4),
                approach: Vec3::x(),
            },
        )
    }

    fn prismatic_x(contact: Vec3) -> (KinematicJoint, ContactPoint) {
        (
            KinematicJoint {
                joint_type: JointType::Prismatic,
                axis: Vec3::x(),
                origin: Vec3::zeros(),
                limits: JointLimits::new(0.0, 0.5),
                state: 0.0,
            },
            ContactPoint {
                name: "handle".into(),
                position: contact,
                approach: -Vec3::x(),
            },
        )
    }

    // Oracle: rotation matrix built by nalgebra from the axis-angle pair.
    fn matrix_rotate(p: &Vec3, origin: &Vec3, axis: &Vec3, angle: f64) -> Vec3 {
        let rot = Rotation3::from_axis_angle(&Unit::new_normalize(*axis), angle);
        origin + rot * (p - origin)
    }

    #[test]
    fn normalize_examples() {
        assert_eq!(normalize(&Vec3::new(0.0, 0.0, 2.0)).unwrap(), Vec3::z());
        let expected = 1.0 / 2f64.sqrt();
        let n = normalize(&Vec3::new(1.0, 1.0, 0.0)).unwrap();
        assert!((n.x - expected).abs() < 1e-12 && (n.y - expected).abs() < 1e-12);
        assert_eq!(n.z, 0.0);
        assert_eq!(normalize(&Vec3::zeros()), Err(KinematicError::ZeroVector));
        assert_eq!(
            normalize(&Vec3::new(1e-13, 0.0, 0.0)),
            Err(KinematicError::ZeroVector)
        );
    }

    #[test]
    fn revolute_quarter_turn() {
        let (joint, contact) = revolute_z();
        let p = contact_position_at(&joint, &contact, FRAC_PI_2).unwrap();
        let oracle = matrix_rotate(&contact.position, &joint.origin, &joint.axis, FRAC_PI_2);
        assert!((p - oracle).norm() < 1e-12);
        assert!((p - Vec3::new(0.0, 0.5, 0.4)).norm() < 1e-12);
    }

    #[test]
    fn prismatic_translation() {
        let (joint, contact) = prismatic_x(Vec3::new(0.2, 0.1, 0.3));
        let p = contact_position_at(&joint, &contact, 0.3).unwrap();
        assert!((p - Vec3::new(0.5, 0.1, 0.3)).norm() < 1e-12);
    }

    #[test]
    fn identity_at_current_state() {
        let (joint, contact) = revolute_z();
        let joint = joint.with_state(0.7);
        assert_eq!(contact_position_at(&joint, &contact, 0.7).unwrap(), contact.position);
        let (joint, contact) = prismatic_x(Vec3::new(0.2, 0.1, 0.3));
        let joint = joint.with_state(0.25);
        assert_eq!(contact_position_at(&joint, &contact, 0.25).unwrap(), contact.position);
    }

    #[test]
    fn out_of_limits_rejected() {
        let (joint, contact) = prismatic_x(Vec3::zeros());
        assert!(matches!(
            contact_position_at(&joint, &contact, 0.6),
            Err(KinematicError::OutOfLimits { .. })
        ));
        assert!(contact_position_at(&joint, &contact, -0.1).is_err());
    }

    #[test]
    fn projection_of_member_point_has_zero_deviation() {
        let (joint, contact) = revolute_z();
        let p = contact_position_at(&joint, &contact, 1.1).unwrap();
        let proj = project_onto_manifold(&joint, &contact, &p).unwrap();
        assert!(proj.deviation < 1e-9);
        assert!((proj.param - 1.1).abs() < 1e-9);
    }

    #[test]
    fn projection_of_chord_midpoint() {
        let (joint, contact) = revolute_z();
        let p = Vec3::new(0.25, 0.25, 0.4);
        let proj = project_onto_manifold(&joint, &contact, &p).unwrap();
        // Independent: radial distance in the axis-normal plane minus r.
        let expected = 0.5 - (0.25f64.powi(2) * 2.0).sqrt();
        assert!((proj.deviation - expected).abs() < 1e-12);
        assert!((proj.deviation - 0.5 * (1.0 - FRAC_PI_4.cos())).abs() < 1e-12);
        assert!((proj.deviation - 0.1464).abs() < 1e-4);
        assert!((proj.param - FRAC_PI_4).abs() < 1e-12);
    }

    #[test]
    fn prismatic_projection_decomposes() {
        let (joint, contact) = prismatic_x(Vec3::zeros());
        let proj = project_onto_manifold(&joint, &contact, &Vec3::new(0.2, 0.05, 0.0)).unwrap();
        assert!((proj.param - 0.2).abs() < 1e-12);
        assert!((proj.projected - Vec3::new(0.2, 0.0, 0.0)).norm() < 1e-12);
        assert!((proj.deviation - 0.05).abs() < 1e-12);
    }

    #[test]
    fn projection_errors() {
        let (mut joint, mut contact) = revolute_z();
        contact.position = Vec3::new(0.0, 0.0, 0.3);
        assert!(matches!(
            project_onto_manifold(&joint, &contact, &Vec3::x()),
            Err(KinematicError::DegenerateRadius { .. })
        ));
        joint.joint_type = JointType::Fixed;
        assert_eq!(
            project_onto_manifold(&joint, &contact, &Vec3::x()),
            Err(KinematicError::FixedJoint)
        );
    }

    #[test]
    fn projection_unwraps_near_state() {
        let (joint, contact) = revolute_z();
        let joint = joint.with_state(3.0);
        let joint = KinematicJoint {
            limits: JointLimits::new(0.0, 10.0),
            ..joint
        };
        let target = contact_position_unchecked(&joint, &contact, 3.0 + 2.5);
        let proj = project_onto_manifold(&joint, &contact, &target).unwrap();
        assert!((proj.param - 5.5).abs() < 1e-9);
    }

    fn object(joint: KinematicJoint, contact: ContactPoint) -> ArticulatedObject {
        ArticulatedObject {
            name: "test".into(),
            parts: [
                Part { id: 0, name: "base".into() },
                Part { id: 1, name: "door".into() },
            ],
            joint,
            contact,
        }
    }

    #[test]
    fn classification_table() {
        let (joint, contact) = prismatic_x(Vec3::new(0.3, 0.0, 0.5));
        let drawer = object(joint, contact);
        assert_eq!(
            classify_manipulation_mode(&drawer, false).unwrap(),
            ManipulationMode::LinearGrasp
        );
        assert_eq!(
            classify_manipulation_mode(&drawer, true).unwrap(),
            ManipulationMode::LinearPush
        );
        let (joint, mut contact) = revolute_z();
        let door = object(joint, contact.clone());
        assert_eq!(
            classify_manipulation_mode(&door, false).unwrap(),
            ManipulationMode::ArcGrasp
        );
        contact.position = Vec3::new(0.005, 0.0, 0.4);
        let faucet = object(joint, contact.clone());
        assert_eq!(
            classify_manipulation_mode(&faucet, false).unwrap(),
            ManipulationMode::TwistGrasp
        );
        let mut fixed = faucet.clone();
        fixed.joint.joint_type = JointType::Fixed;
        assert_eq!(
            classify_manipulation_mode(&fixed, false),
            Err(KinematicError::FixedJoint)
        );
    }

    #[test]
    fn object_validation() {
        let (joint, contact) = revolute_z();
        let mut o = object(joint, contact);
        assert!(o.validate().is_ok());
        o.joint.axis = Vec3::new(1.0, 1.0, 0.0);
        assert!(o.validate().is_err());
        o.joint.axis = Vec3::z();
        o.joint.state = 4.0;
        assert!(o.validate().is_err());
        o.joint.state = 0.0;
        o.contact.approach = Vec3::new(0.0, 0.0, 0.5);
        assert!(o.validate().is_err());
        o.contact.approach = Vec3::z();
        o.joint = KinematicJoint {
            joint_type: JointType::Fixed,
            limits: JointLimits::new(0.0, 0.0),
            ..o.joint
        };
        assert!(o.joint.validate().is_ok());
        assert!(o.validate().is_err());
    }

    fn unit_vec() -> impl Strategy<Value = Vec3> {
        (-1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0)
            .prop_filter("non-degenerate", |(x, y, z)| x * x + y * y + z * z > 0.01)
            .prop_map(|(x, y, z)| normalize(&Vec3::new(x, y, z)).unwrap())
    }

    fn point() -> impl Strategy<Value = Vec3> {
        (-2.0f64..2.0, -2.0f64..2.0, -2.0f64..2.0).prop_map(|(x, y, z)| Vec3::new(x, y, z))
    }

    fn random_revolute() -> impl Strategy<Value = (KinematicJoint, ContactPoint)> {
        (unit_vec(), point(), point(), -1.0f64..1.0)
            .prop_filter("off-axis contact", |(axis, origin, c, _)| {
                let rel = c - origin;
                (rel - axis * axis.dot(&rel)).norm() > 1e-3
            })
            .prop_map(|(axis, origin, c, state)| {
                (
                    KinematicJoint {
                        joint_type: JointType::Revolute,
                        axis,
                        origin,
                        limits: JointLimits::new(state - PI, state + PI),
                        state,
                    },
                    ContactPoint {
                        name: "c".into(),
                        position: c,
                        approach: Vec3::z(),
                    },
                )
            })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(10_000))]

        #[test]
        fn rotation_preserves_radius((joint, contact) in random_revolute(), frac in -1.0f64..1.0) {
            let r0 = axis_distance(&joint, &contact.position);
            let param = joint.state + frac * PI;
            let p = contact_position_at(&joint, &contact, param).unwrap();
            prop_assert!((axis_distance(&joint, &p) - r0).abs() < 1e-9);
            let oracle = matrix_rotate(&contact.position, &joint.origin, &joint.axis, param - joint.state);
            prop_assert!((p - oracle).norm() < 1e-9);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(2_000))]

        #[test]
        fn projection_is_a_retraction((joint, contact) in random_revolute(), frac in -0.999f64..0.999) {
            let param = joint.state + frac * PI;
            let p = contact_position_at(&joint, &contact, param).unwrap();
            let proj = project_onto_manifold(&joint, &contact, &p).unwrap();
            prop_assert!((proj.param - param).abs() < 1e-9);
            prop_assert!(proj.deviation < 1e-9);
        }

        #[test]
        fn prismatic_projection_is_a_retraction(axis in unit_vec(), c in point(), offset in -1.0f64..1.0) {
            let joint = KinematicJoint {
                joint_type: JointType::Prismatic,
                axis,
                origin: Vec3::zeros(),
                limits: JointLimits::new(-1.0, 1.0),
                state: 0.0,
            };
            let contact = ContactPoint { name: "c".into(), position: c, approach: Vec3::z() };
            let p = contact_position_at(&joint, &contact, offset).unwrap();
            let proj = project_onto_manifold(&joint, &contact, &p).unwrap();
            prop_assert!((proj.param - offset).abs() < 1e-9);
            prop_assert!(proj.deviation < 1e-9);
        }

        #[test]
        fn projection_is_minimal(
            (joint, contact) in random_revolute(),
            p in point(),
            qs in proptest::collection::vec(-0.999f64..0.999, 100),
        ) {
            let proj = project_onto_manifold(&joint, &contact, &p).unwrap();
            for frac in qs {
                let q = contact_position_at(&joint, &contact, joint.state + frac * PI).unwrap();
                prop_assert!(proj.deviation <= (p - q).norm() + 1e-9);
            }
        }

        #[test]
        fn normalize_is_idempotent(v in point().prop_filter("nonzero", |v| v.norm() > 1e-6)) {
            let once = normalize(&v).unwrap();
            let twice = normalize(&once).unwrap();
            prop_assert!((once - twice).norm() < 1e-12);
            prop_assert!((once.norm() - 1.0).abs() < 1e-12);
        }
    }
}

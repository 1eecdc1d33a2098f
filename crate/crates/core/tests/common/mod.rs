#![allow(dead_code)]

use std::f64::consts::PI;
use std::path::PathBuf;

use kinoplan::{ArticulatedObject, ContactPoint, JointLimits, JointType, KinematicJoint, Part, Vec3};
use proptest::prelude::*;

pub fn manifest_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
}

pub fn unit_vector() -> impl Strategy<Value = Vec3> {
    (-1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0)
        .prop_map(|(x, y, z)| Vec3::new(x, y, z))
        .prop_filter("away from zero", |v| v.norm() > 0.2)
        .prop_map(|v| v.normalize())
}

pub fn point(extent: f64) -> impl Strategy<Value = Vec3> {
    (-extent..extent, -extent..extent, -extent..extent).prop_map(|(x, y, z)| Vec3::new(x, y, z))
}

/// Any perpendicular of `axis`, unit length.
pub fn perpendicular(axis: &Vec3, hint: &Vec3) -> Vec3 {
    let mut p = hint - axis * axis.dot(hint);
    if p.norm() < 1e-6 {
        let alt = if axis.x.abs() < 0.9 { Vec3::x() } else { Vec3::y() };
        p = alt - axis * axis.dot(&alt);
    }
    p.normalize()
}

/// Revolute joint with a contact `radius` off the axis, plus a feasible
/// signed delta (|delta| < 0.95π) inside the limits.
pub fn revolute_case(min_radius: f64) -> impl Strategy<Value = (ArticulatedObject, f64)> {
    (
        unit_vector(),
        point(1.0),
        unit_vector(),
        min_radius..1.2,
        -0.5f64..0.5,
        -PI..PI,
        0.05f64..0.95,
        any::<bool>(),
    )
        .prop_map(move |(axis, origin, hint, radius, along, state, frac, negative)| {
            let perp = perpendicular(&axis, &hint);
            let position = origin + perp * radius + axis * along;
            let delta = frac * PI * if negative { -1.0 } else { 1.0 };
            let object = ArticulatedObject {
                name: "hinged".into(),
                parts: [Part { id: 0, name: "base".into() }, Part { id: 1, name: "leaf".into() }],
                joint: KinematicJoint {
                    joint_type: JointType::Revolute,
                    axis,
                    origin,
                    limits: JointLimits::new(state.min(state + delta) - 0.1, state.max(state + delta) + 0.1),
                    state,
                },
                contact: ContactPoint { name: "handle".into(), position, approach: perp },
            };
            (object, delta)
        })
}

pub fn prismatic_case() -> impl Strategy<Value = (ArticulatedObject, f64)> {
    (unit_vector(), point(1.0), point(1.0), -0.5f64..0.5, 0.02f64..0.6, any::<bool>(), unit_vector()).prop_map(
        |(axis, origin, position, state, travel, negative, approach)| {
            let delta = if negative { -travel } else { travel };
            let object = ArticulatedObject {
                name: "slider".into(),
                parts: [Part { id: 0, name: "body".into() }, Part { id: 1, name: "slide".into() }],
                joint: KinematicJoint {
                    joint_type: JointType::Prismatic,
                    axis,
                    origin,
                    limits: JointLimits::new(state.min(state + delta) - 0.05, state.max(state + delta) + 0.05),
                    state,
                },
                contact: ContactPoint { name: "grip".into(), position, approach },
            };
            (object, delta)
        },
    )
}

/// Any valid object, either joint type, for serialization tests.
pub fn any_object() -> impl Strategy<Value = ArticulatedObject> {
    prop_oneof![revolute_case(0.03).prop_map(|(o, _)| o), prismatic_case().prop_map(|(o, _)| o)]
}

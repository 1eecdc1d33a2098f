//! The 16 benchmark categories and the seeded instance generator.
//!
//! Geometry is sampled in a local frame where the robot looks along +x
//! (objects face -x), then yawed about z by up to 45° and placed with the
//! joint origin inside the workspace cube [`WORKSPACE_MIN`]..[`WORKSPACE_MAX`].
//!
//! | category | mode | instructions | geometry |
//! |---|---|---|---|
//! | drawer | linear grasp | open / close | travel 0.20–0.50 m |
//! | oven | arc grasp | open / close | bottom hinge, r 0.30–0.50 m, 80–95° |
//! | safe | arc grasp | open / close | side hinge, r 0.25–0.45 m, 90–120° |
//! | strap | arc grasp | lift / lay down | handle pivot, r 0.10–0.20 m, 80–100° |
//! | refrigerator | arc grasp | open / close | side hinge, r 0.40–0.70 m, 90–120° |
//! | button | linear push | turn on | travel 0.01–0.03 m |
//! | faucet | twist | turn on / turn off | limits 0–120°, ±90° |
//! | bottle | twist | turn on | limits 0–180°, +120° or +150° |
//! | dishwasher | arc grasp | open / close | bottom hinge, r 0.40–0.60 m, 80–95° |
//! | cabinet | arc grasp | open / close | side hinge, r 0.20–0.45 m, 90–120° |
//! | door | arc grasp | open / close | side hinge, r 0.40–1.00 m, 95–120° |
//! | bucket | arc grasp | lift / lay down | handle pivot, r 0.12–0.25 m, 80–100° |
//! | window | arc grasp | open / close | side hinge, r 0.30–0.60 m, 60–90° |
//! | trashcan | arc grasp | open / close | lid hinge, r 0.20–0.35 m, 70–100° |
//! | laptop | arc grasp | open / close | lid hinge, r 0.20–0.30 m, 90–120° |
//! | stapler | arc grasp | press | lid hinge, r 0.10–0.18 m, 15–25°, starts raised |
//!
//! Open-type tasks start at the lower limit, close-type tasks at the upper
//! limit. Non-twist deltas cover 60–95% of the limit range.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::fixed::quantize4;
use crate::kinematic_model::{
    classify_manipulation_mode, rotate_about, ArticulatedObject, ContactPoint, JointLimits,
    JointType, KinematicJoint, ManipulationMode, Part, Vec3,
};
use crate::knowledge_parser::{parse_description, serialize_description};
use crate::oracle_planner::{ManipulationTask, TWIST_STEP};

pub const WORKSPACE_MIN: [f64; 3] = [0.2, -0.4, 0.0];
pub const WORKSPACE_MAX: [f64; 3] = [1.0, 0.4, 0.8];
const MAX_YAW: f64 = PI / 4.0;
const DELTA_FRACTION: (f64, f64) = (0.6, 0.95);
const MAX_ATTEMPTS: usize = 64;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum GenerateError {
    #[error("unknown category {0:?}")]
    UnknownCategory(String),
    #[error("could not generate a canonical {category} instance for seed {seed}")]
    Exhausted { category: String, seed: u64 },
}

/// Which end of the limit range an instruction starts from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    /// Start at the lower limit, move up.
    Forward,
    /// Start at the upper limit, move down.
    Backward,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Geometry {
    /// Translating part. The contact sits on the joint origin.
    Slide {
        travel: (f64, f64),
        axis: [f64; 3],
        approach: [f64; 3],
        push: bool,
    },
    /// Rotating part with the contact `r` away from the hinge along
    /// `offset` and up to `lateral` along the axis.
    Hinge {
        radius: (f64, f64),
        upper_deg: (f64, f64),
        axis: [f64; 3],
        offset: [f64; 3],
        lateral: f64,
        approach: [f64; 3],
    },
    /// Knob or cap turned about its own axis.
    Twist {
        offset: f64,
        upper_deg: f64,
        deltas_deg: &'static [f64],
        axis: [f64; 3],
        approach: [f64; 3],
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CategorySpec {
    pub name: &'static str,
    pub seen: bool,
    pub mode: ManipulationMode,
    pub instructions: &'static [(&'static str, Direction)],
    pub parts: [&'static str; 2],
    pub contact: &'static str,
    pub geometry: Geometry,
}

impl CategorySpec {
    pub fn instruction_labels(&self) -> Vec<&'static str> {
        self.instructions.iter().map(|(label, _)| *label).collect()
    }
}

const OPEN_CLOSE: &[(&str, Direction)] =
    &[("open", Direction::Forward), ("close", Direction::Backward)];
const LIFT_LAY: &[(&str, Direction)] =
    &[("lift", Direction::Forward), ("lay down", Direction::Backward)];
const ON_OFF: &[(&str, Direction)] =
    &[("turn on", Direction::Forward), ("turn off", Direction::Backward)];
const ON: &[(&str, Direction)] = &[("turn on", Direction::Forward)];
const PRESS: &[(&str, Direction)] = &[("press", Direction::Backward)];

const FACING: [f64; 3] = [-1.0, 0.0, 0.0];
const ABOVE: [f64; 3] = [0.0, 0.0, 1.0];
const SIDE_HINGE: [f64; 3] = [0.0, 0.0, -1.0];
const SIDE_OFFSET: [f64; 3] = [0.0, -1.0, 0.0];
const BOTTOM_HINGE: [f64; 3] = [0.0, -1.0, 0.0];
const LID_HINGE: [f64; 3] = [0.0, 1.0, 0.0];
const FRONT: [f64; 3] = [-1.0, 0.0, 0.0];

const fn side(radius: (f64, f64), upper_deg: (f64, f64)) -> Geometry {
    Geometry::Hinge {
        radius,
        upper_deg,
        axis: SIDE_HINGE,
        offset: SIDE_OFFSET,
        lateral: 0.3,
        approach: FACING,
    }
}

const fn bottom(radius: (f64, f64)) -> Geometry {
    Geometry::Hinge {
        radius,
        upper_deg: (80.0, 95.0),
        axis: BOTTOM_HINGE,
        offset: ABOVE,
        lateral: 0.2,
        approach: FACING,
    }
}

const fn lid(radius: (f64, f64), upper_deg: (f64, f64)) -> Geometry {
    Geometry::Hinge {
        radius,
        upper_deg,
        axis: LID_HINGE,
        offset: FRONT,
        lateral: 0.1,
        approach: ABOVE,
    }
}

const fn spec(
    name: &'static str,
    seen: bool,
    mode: ManipulationMode,
    instructions: &'static [(&'static str, Direction)],
    parts: [&'static str; 2],
    contact: &'static str,
    geometry: Geometry,
) -> CategorySpec {
    CategorySpec { name, seen, mode, instructions, parts, contact, geometry }
}

use ManipulationMode::{ArcGrasp, LinearGrasp, LinearPush, TwistGrasp};

/// Seen categories first, each block in report column order.
pub const CATEGORIES: [CategorySpec; 16] = [
    spec(
        "drawer",
        true,
        LinearGrasp,
        OPEN_CLOSE,
        ["cabinet_body", "drawer"],
        "handle",
        Geometry::Slide { travel: (0.2, 0.5), axis: FACING, approach: FACING, push: false },
    ),
    spec("oven", true, ArcGrasp, OPEN_CLOSE, ["oven_body", "oven_door"], "handle", bottom((0.3, 0.5))),
    spec("safe", true, ArcGrasp, OPEN_CLOSE, ["safe_body", "safe_door"], "handle", side((0.25, 0.45), (90.0, 120.0))),
    spec("strap", true, ArcGrasp, LIFT_LAY, ["bag", "strap"], "strap_grip", lid((0.1, 0.2), (80.0, 100.0))),
    spec(
        "refrigerator",
        true,
        ArcGrasp,
        OPEN_CLOSE,
        ["fridge_body", "fridge_door"],
        "handle",
        side((0.4, 0.7), (90.0, 120.0)),
    ),
    spec(
        "button",
        true,
        LinearPush,
        ON,
        ["panel", "button"],
        "button_face",
        Geometry::Slide { travel: (0.01, 0.03), axis: [1.0, 0.0, 0.0], approach: FACING, push: true },
    ),
    spec(
        "faucet",
        true,
        TwistGrasp,
        ON_OFF,
        ["spout", "faucet_knob"],
        "knob",
        Geometry::Twist {
            offset: 0.01,
            upper_deg: 120.0,
            deltas_deg: &[90.0],
            axis: [0.0, 0.0, 1.0],
            approach: ABOVE,
        },
    ),
    spec(
        "bottle",
        true,
        TwistGrasp,
        ON,
        ["bottle_body", "cap"],
        "cap",
        Geometry::Twist {
            offset: 0.005,
            upper_deg: 180.0,
            deltas_deg: &[120.0, 150.0],
            axis: [0.0, 0.0, 1.0],
            approach: ABOVE,
        },
    ),
    spec(
        "dishwasher",
        false,
        ArcGrasp,
        OPEN_CLOSE,
        ["dishwasher_body", "dishwasher_door"],
        "handle",
        bottom((0.4, 0.6)),
    ),
    spec(
        "cabinet",
        false,
        ArcGrasp,
        OPEN_CLOSE,
        ["cabinet_body", "cabinet_door"],
        "handle",
        side((0.2, 0.45), (90.0, 120.0)),
    ),
    spec("door", false, ArcGrasp, OPEN_CLOSE, ["frame", "door"], "handle", side((0.4, 1.0), (95.0, 120.0))),
    spec("bucket", false, ArcGrasp, LIFT_LAY, ["pail", "bucket_handle"], "handle_grip", lid((0.12, 0.25), (80.0, 100.0))),
    spec("window", false, ArcGrasp, OPEN_CLOSE, ["window_frame", "sash"], "handle", side((0.3, 0.6), (60.0, 90.0))),
    spec("trashcan", false, ArcGrasp, OPEN_CLOSE, ["bin", "lid"], "lid_edge", lid((0.2, 0.35), (70.0, 100.0))),
    spec("laptop", false, ArcGrasp, OPEN_CLOSE, ["base", "screen"], "screen_edge", lid((0.2, 0.3), (90.0, 120.0))),
    spec("stapler", false, ArcGrasp, PRESS, ["stapler_base", "stapler_arm"], "arm_top", lid((0.1, 0.18), (15.0, 25.0))),
];

pub fn category(name: &str) -> Result<&'static CategorySpec, GenerateError> {
    CATEGORIES
        .iter()
        .find(|c| c.name == name)
        .ok_or_else(|| GenerateError::UnknownCategory(name.to_string()))
}

pub fn seen_categories() -> impl Iterator<Item = &'static CategorySpec> {
    CATEGORIES.iter().filter(|c| c.seen)
}

/// One instruction on one generated instance. `object` is already posed at
/// the task's starting joint state.
#[derive(Debug, Clone, PartialEq)]
pub struct InstanceTask {
    pub label: &'static str,
    pub object: ArticulatedObject,
    pub task: ManipulationTask,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkInstance {
    pub category: &'static str,
    pub seed: u64,
    pub tasks: Vec<InstanceTask>,
}

impl BenchmarkInstance {
    /// The object at the first instruction's starting pose.
    pub fn object(&self) -> &ArticulatedObject {
        &self.tasks[0].object
    }
}

/// Full instruction text for a category label, e.g. "lay down the strap".
pub fn instruction_text(category: &str, label: &str) -> String {
    format!("{label} the {category}")
}

fn stream_seed(name: &str, seed: u64) -> u64 {
    // FNV-1a over the name, then mixed with the seed.
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in name.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h ^ seed.wrapping_mul(0x9e37_79b9_7f4a_7c15)
}

fn v(a: [f64; 3]) -> Vec3 {
    Vec3::new(a[0], a[1], a[2])
}

/// Generates the instance for `category` and `seed`. Every object is in
/// canonical form: it equals `parse(serialize(object))` and serializes to
/// the same bytes again, so planning from its text description reproduces
/// planning from the object exactly.
pub fn generate_instance(spec: &'static CategorySpec, seed: u64) -> Result<BenchmarkInstance, GenerateError> {
    let mut rng = ChaCha8Rng::seed_from_u64(stream_seed(spec.name, seed));
    for _ in 0..MAX_ATTEMPTS {
        if let Some(tasks) = sample(spec, &mut rng) {
            return Ok(BenchmarkInstance { category: spec.name, seed, tasks });
        }
    }
    Err(GenerateError::Exhausted { category: spec.name.to_string(), seed })
}

pub fn generate_named(name: &str, seed: u64) -> Result<BenchmarkInstance, GenerateError> {
    generate_instance(category(name)?, seed)
}

struct Raw {
    joint_type: JointType,
    axis: Vec3,
    origin: Vec3,
    limits: JointLimits,
    contact_zero: Vec3,
    approach_zero: Vec3,
    push: bool,
    deltas: Vec<f64>,
}

fn sample(spec: &CategorySpec, rng: &mut ChaCha8Rng) -> Option<Vec<InstanceTask>> {
    let yaw = rng.gen_range(-MAX_YAW..=MAX_YAW);
    let turn = |a: [f64; 3]| rotate_about(&v(a), &Vec3::z(), yaw);
    let origin = Vec3::from_fn(|i, _| rng.gen_range(WORKSPACE_MIN[i]..=WORKSPACE_MAX[i]));
    let fraction = |rng: &mut ChaCha8Rng| rng.gen_range(DELTA_FRACTION.0..=DELTA_FRACTION.1);

    let raw = match spec.geometry {
        Geometry::Slide { travel, axis, approach, push } => {
            let upper = quantize4(rng.gen_range(travel.0..=travel.1));
            let deltas = spec.instructions.iter().map(|_| quantize4(fraction(rng) * upper)).collect();
            Raw {
                joint_type: JointType::Prismatic,
                axis: turn(axis),
                origin,
                limits: JointLimits::new(0.0, upper),
                contact_zero: origin,
                approach_zero: turn(approach),
                push,
                deltas,
            }
        }
        Geometry::Hinge { radius, upper_deg, axis, offset, lateral, approach } => {
            let r = rng.gen_range(radius.0..=radius.1);
            let upper = quantize4(rng.gen_range(upper_deg.0..=upper_deg.1).to_radians());
            let along = rng.gen_range(-lateral..=lateral);
            let axis_w = turn(axis);
            let deltas = spec.instructions.iter().map(|_| quantize4(fraction(rng) * upper)).collect();
            Raw {
                joint_type: JointType::Revolute,
                axis: axis_w,
                origin,
                limits: JointLimits::new(0.0, upper),
                contact_zero: origin + turn(offset) * r + axis_w * along,
                approach_zero: turn(approach),
                push: false,
                deltas,
            }
        }
        Geometry::Twist { offset, upper_deg, deltas_deg, axis, approach } => {
            let off = rng.gen_range(0.0..=offset);
            let phase = rng.gen_range(0.0..2.0 * PI);
            let radial = Vec3::new(phase.cos(), phase.sin(), 0.0) * off;
            let height = rng.gen_range(0.02..=0.1);
            let axis_w = turn(axis);
            let deltas = spec
                .instructions
                .iter()
                .map(|_| {
                    let d = deltas_deg[rng.gen_range(0..deltas_deg.len())];
                    let steps = (d.to_radians() / TWIST_STEP).round();
                    quantize4(steps * TWIST_STEP)
                })
                .collect();
            Raw {
                joint_type: JointType::Revolute,
                axis: axis_w,
                origin,
                limits: JointLimits::new(0.0, quantize4(upper_deg.to_radians())),
                contact_zero: origin + turn([radial.x, radial.y, 0.0]) + axis_w * height,
                approach_zero: turn(approach),
                push: false,
                deltas,
            }
        }
    };

    let mut tasks = Vec::with_capacity(spec.instructions.len());
    for (&(label, direction), &magnitude) in spec.instructions.iter().zip(&raw.deltas) {
        let (state, delta) = match direction {
            Direction::Forward => (raw.limits.lower, magnitude),
            Direction::Backward => (raw.limits.upper, -magnitude),
        };
        let object = canonical_object(spec, &raw, state)?;
        let task = ManipulationTask::new(instruction_text(spec.name, label), delta, raw.push);
        if task.validate_for(&object).is_err()
            || classify_manipulation_mode(&object, raw.push).ok() != Some(spec.mode)
        {
            return None;
        }
        tasks.push(InstanceTask { label, object, task });
    }
    Some(tasks)
}

/// Poses the raw geometry at `state` and rounds it through the description
/// format. `None` if the rounded object is not a fixed point of the format.
fn canonical_object(spec: &CategorySpec, raw: &Raw, state: f64) -> Option<ArticulatedObject> {
    let (position, approach) = match raw.joint_type {
        JointType::Revolute => (
            raw.origin + rotate_about(&(raw.contact_zero - raw.origin), &raw.axis, state),
            rotate_about(&raw.approach_zero, &raw.axis, state),
        ),
        _ => (raw.contact_zero + raw.axis * state, raw.approach_zero),
    };
    let object = ArticulatedObject {
        name: spec.name.to_string(),
        parts: [
            Part { id: 0, name: spec.parts[0].to_string() },
            Part { id: 1, name: spec.parts[1].to_string() },
        ],
        joint: KinematicJoint {
            joint_type: raw.joint_type,
            axis: raw.axis,
            origin: raw.origin,
            limits: raw.limits,
            state,
        },
        contact: ContactPoint { name: spec.contact.to_string(), position, approach },
    };
    let text = serialize_description(&object).ok()?;
    let canonical = parse_description(text.as_str()).ok()?;
    let again = serialize_description(&canonical).ok()?;
    (again == text && canonical.validate().is_ok()).then_some(canonical)
}

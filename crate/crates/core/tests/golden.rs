//! Byte-level golden files for descriptions and prompts.
//!
//! Set `KINOPLAN_BLESS=1` to rewrite the files after an intended change.

// 1.5708 here is the four-decimal text of a right angle, not an approximation of π/2.
#![allow(clippy::approx_constant)]

mod common;

use std::path::Path;

use kinoplan::knowledge_parser::{parse_description, serialize_description};
use kinoplan::oracle_planner::PlannerConfig;
use kinoplan::prompt_pipeline::demos::{demos_only, DEFAULT_DEMO_SEED};
use kinoplan::prompt_pipeline::{
    build_stage1_prompt, build_stage2_prompt, generate_demo_store, render_instruction, LlmClient,
    MockOracleClient,
};
use kinoplan::{
    ArticulatedObject, ContactPoint, JointLimits, JointType, KinematicJoint, ManipulationTask, Part, Vec3,
};

fn check(name: &str, actual: &str) {
    let path = common::manifest_dir().join("tests/golden").join(name);
    if std::env::var_os("KINOPLAN_BLESS").is_some() {
        std::fs::write(&path, actual).unwrap();
        return;
    }
    let expected = std::fs::read_to_string(&path)
        .unwrap_or_else(|e| panic!("{}: {e} (run with KINOPLAN_BLESS=1 to create)", path.display()));
    assert!(expected == actual, "{} differs from the golden copy", Path::new(name).display());
}

fn object(
    name: &str,
    parts: [&str; 2],
    joint_type: JointType,
    axis: [f64; 3],
    origin: [f64; 3],
    upper: f64,
    contact: (&str, [f64; 3], [f64; 3]),
) -> ArticulatedObject {
    let v = |a: [f64; 3]| Vec3::new(a[0], a[1], a[2]);
    ArticulatedObject {
        name: name.into(),
        parts: [Part { id: 0, name: parts[0].into() }, Part { id: 1, name: parts[1].into() }],
        joint: KinematicJoint {
            joint_type,
            axis: v(axis),
            origin: v(origin),
            limits: JointLimits::new(0.0, upper),
            state: 0.0,
        },
        contact: ContactPoint { name: contact.0.into(), position: v(contact.1), approach: v(contact.2) },
    }
}

pub fn drawer() -> ArticulatedObject {
    object(
        "drawer",
        ["base", "drawer"],
        JointType::Prismatic,
        [1.0, 0.0, 0.0],
        [0.0; 3],
        0.4,
        ("handle", [0.3, 0.0, 0.5], [1.0, 0.0, 0.0]),
    )
}

pub fn door() -> ArticulatedObject {
    object(
        "door",
        ["frame", "door"],
        JointType::Revolute,
        [0.0, 0.0, -1.0],
        [0.6, 0.2, 0.0],
        2.0944,
        ("handle", [0.6, -0.3, 1.0], [-1.0, 0.0, 0.0]),
    )
}

pub fn faucet() -> ArticulatedObject {
    object(
        "faucet",
        ["spout", "faucet_knob"],
        JointType::Revolute,
        [0.0, 0.0, 1.0],
        [0.5, 0.0, 0.3],
        2.0944,
        ("knob", [0.5, 0.005, 0.35], [0.0, 0.0, 1.0]),
    )
}

#[test]
fn descriptions_match_golden_files() {
    for (file, o) in [("drawer.kin.xml", drawer()), ("door.kin.xml", door()), ("faucet.kin.xml", faucet())] {
        let k = serialize_description(&o).unwrap();
        check(file, k.as_str());
        assert_eq!(parse_description(k.as_str()).unwrap(), o);
    }
}

#[test]
fn prompts_match_golden_files() {
    let o = door();
    let k = serialize_description(&o).unwrap();
    let task = ManipulationTask::new("open the door", 1.5708, false);
    let instruction = render_instruction(&task, o.joint.joint_type);
    let stage1 = build_stage1_prompt(&instruction, &k).unwrap();
    check("door_open.stage1.txt", &stage1);

    let mock = MockOracleClient::default();
    let plan = mock.complete(&stage1).unwrap();
    check("door_open.sequence.txt", &format!("{plan}\n"));

    let demos = demos_only(generate_demo_store(&[], DEFAULT_DEMO_SEED, &PlannerConfig::default()).unwrap());
    let stage2 = build_stage2_prompt(&plan, &demos, &k, &instruction).unwrap();
    assert_eq!(stage2.matches("\n## Demonstration ").count(), 17);
    check("door_open.stage2.txt", &stage2);
}

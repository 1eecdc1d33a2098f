//! Prompt text for the two planning stages.
//!
//! Both builders are pure string functions; their exact bytes are pinned by
//! golden files under `tests/golden/`.

use std::sync::OnceLock;

use regex::Regex;

use super::{Demonstration, PipelineError};
use crate::action_dsl::emit_actions;
use crate::fixed::fmt4;
use crate::kinematic_model::JointType;
use crate::knowledge_parser::KinematicDescription;
use crate::oracle_planner::ManipulationTask;

pub const STAGE1_MARKER: &str = "Stage 1 of 2: manipulation sequence planning";
pub const STAGE2_MARKER: &str = "Stage 2 of 2: manipulation waypoint generation";
pub const CURRENT_TASK_HEADING: &str = "## Current task";

const STAGE1_PREAMBLE: &str = "\
You plan robot manipulation of articulated objects.
Stage 1 of 2: manipulation sequence planning.

The kinematic description below lists the object's parts, the joint that
moves them and the contact point the gripper acts on. Work out which
kinematic components the instruction refers to: the contact to touch and the
joint whose motion carries out the instruction. Then write the manipulation
sequence as a numbered list, one gripper operation per step.

Whenever a step uses a property of a referred kinematic component (a
position, a direction, an axis, an origin or a joint limit) copy the
property from the description exactly as written there, with all four
decimals. Write vectors as (x, y, z). Do not invent or round any value.
";

const STAGE2_PREAMBLE: &str = "\
You plan robot manipulation of articulated objects.
Stage 2 of 2: manipulation waypoint generation.

Turn the manipulation sequence into gripper actions. Exactly five actions
exist, written one per line:

move(x, y, z)   move the gripper to the target position
grasp()         close the gripper
release()       open the gripper
rotate_cw()     rotate the gripper clockwise by 30 degrees
rotate_ccw()    rotate the gripper anti-clockwise by 30 degrees

Each demonstration below shows a kinematic description, an instruction, its
manipulation sequence and the resulting actions.
";

const STAGE2_REQUEST: &str = "\
Answer with the actions for the current task only, one per line, using the
five actions above and nothing else.
";

/// Instruction text handed to the model. The commanded joint displacement
/// and contact style are spelled out so the plan is fully determined.
pub fn render_instruction(task: &ManipulationTask, joint_type: JointType) -> String {
    let unit = match joint_type {
        JointType::Prismatic => "m",
        _ => "rad",
    };
    let contact = if task.push { "push" } else { "grasp" };
    format!(
        "{} (joint displacement {} {unit}, {contact} contact)",
        task.instruction,
        fmt4(task.delta)
    )
}

fn rendered_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r"^(.*\S)\s+\(joint displacement\s+([-+]?[0-9]*\.?[0-9]+)\s*(m|rad),\s*(push|grasp) contact\)\s*$")
            .unwrap()
    })
}

/// Inverse of [`render_instruction`].
pub fn parse_rendered_instruction(text: &str) -> Option<ManipulationTask> {
    let caps = rendered_re().captures(text.trim())?;
    let delta: f64 = caps[2].parse().ok()?;
    Some(ManipulationTask::new(&caps[1], delta, &caps[4] == "push"))
}

fn check_instruction(instruction: &str) -> Result<(), PipelineError> {
    if instruction.trim().is_empty() {
        return Err(PipelineError::Prompt("instruction is empty".into()));
    }
    if instruction.contains('\n') {
        return Err(PipelineError::Prompt("instruction must be a single line".into()));
    }
    Ok(())
}

fn push_description(out: &mut String, k: &KinematicDescription) {
    out.push_str("Kinematic description:\n");
    out.push_str(k.as_str());
    if !k.as_str().ends_with('\n') {
        out.push('\n');
    }
}

pub fn build_stage1_prompt(instruction: &str, k: &KinematicDescription) -> Result<String, PipelineError> {
    check_instruction(instruction)?;
    let mut out = String::from(STAGE1_PREAMBLE);
    out.push('\n');
    out.push_str(&format!("Instruction: {instruction}\n"));
    push_description(&mut out, k);
    out.push_str("Manipulation sequence:\n");
    Ok(out)
}

pub fn build_stage2_prompt(
    stage1_output: &str,
    demos: &[Demonstration],
    k: &KinematicDescription,
    instruction: &str,
) -> Result<String, PipelineError> {
    check_instruction(instruction)?;
    if demos.is_empty() {
        return Err(PipelineError::Prompt("no demonstrations loaded".into()));
    }
    let mut out = String::from(STAGE2_PREAMBLE);
    for (i, demo) in demos.iter().enumerate() {
        out.push_str(&format!("\n## Demonstration {}\n", i + 1));
        out.push_str(&format!("Instruction: {}\n", demo.instruction));
        push_description(&mut out, &demo.description);
        out.push_str("Manipulation sequence:\n");
        push_block(&mut out, &demo.sequence_plan);
        out.push_str("Actions:\n");
        push_block(&mut out, &emit_actions(&demo.actions));
    }
    out.push('\n');
    out.push_str(STAGE2_REQUEST);
    out.push_str(&format!("\n{CURRENT_TASK_HEADING}\n"));
    out.push_str(&format!("Instruction: {instruction}\n"));
    push_description(&mut out, k);
    out.push_str("Manipulation sequence:\n");
    push_block(&mut out, stage1_output);
    out.push_str("Actions:\n");
    Ok(out)
}

fn push_block(out: &mut String, text: &str) {
    let text = text.trim_end();
    out.push_str(text);
    out.push('\n');
}

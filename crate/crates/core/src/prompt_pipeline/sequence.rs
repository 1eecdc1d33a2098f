//! Stage-1 manipulation sequences: template rendering and the alignment
//! gate that checks every copied property against the description.

use std::sync::OnceLock;

use regex::Regex;

use super::PipelineError;
use crate::fixed::fmt4;
use crate::kinematic_model::{classify_manipulation_mode, ArticulatedObject, ManipulationMode};
use crate::knowledge_parser::KinematicDescription;
use crate::oracle_planner::{twist_actions, ManipulationTask, PlannerConfig};
use crate::action_dsl::Action;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlanStep {
    pub text: String,
    /// `(property path, value)` pairs, e.g. `("contact.position.x", "0.3000")`.
    pub cited_properties: Vec<(String, String)>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManipulationSequence {
    pub steps: Vec<PlanStep>,
}

impl ManipulationSequence {
    pub fn cited(&self) -> impl Iterator<Item = &(String, String)> {
        self.steps.iter().flat_map(|s| s.cited_properties.iter())
    }
}

const NUM: &str = r"[-+]?(?:[0-9]+\.?[0-9]*|\.[0-9]+)";

fn triplet_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(&format!(r"\(\s*({NUM})\s*,\s*({NUM})\s*,\s*({NUM})\s*\)")).unwrap())
}

fn number_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(&format!(r"(^|[^\w.])({NUM})")).unwrap())
}

fn marker_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^\s*(?:[0-9]+[.):]|[-*•]|Step\s+[0-9]+[.):]?)\s+(.*)$").unwrap())
}

/// Four-decimal form of a numeric token; `None` if it is not a finite number.
fn normalize(token: &str) -> Option<String> {
    token.parse::<f64>().ok().filter(|v| v.is_finite()).map(fmt4)
}

fn split_steps(text: &str) -> Vec<String> {
    let lines: Vec<&str> = text.lines().collect();
    let marked = lines.iter().any(|l| marker_re().is_match(l));
    if !marked {
        return lines
            .iter()
            .map(|l| l.trim())
            .filter(|l| !l.is_empty())
            .map(str::to_string)
            .collect();
    }
    let mut steps: Vec<String> = Vec::new();
    for line in lines {
        if let Some(caps) = marker_re().captures(line) {
            steps.push(caps[1].trim().to_string());
        } else if let Some(last) = steps.last_mut() {
            let cont = line.trim();
            if !cont.is_empty() {
                last.push(' ');
                last.push_str(cont);
            }
        }
        // Prose before the first marked step is ignored.
    }
    steps
}

/// Splits a stage-1 response into steps and checks its copied properties.
///
/// Every `(x, y, z)` triplet must equal, component for component at four
/// decimals, a vector written in `k`; otherwise the plan is rejected. Other
/// numbers are recorded as cited when their four-decimal form is an
/// attribute value of `k` and are otherwise left alone (step counts,
/// radii, angles in degrees).
pub fn parse_sequence_plan(text: &str, k: &KinematicDescription) -> Result<ManipulationSequence, PipelineError> {
    let vectors = k.vector_properties();
    let scalars = k.scalar_properties();
    let steps = split_steps(text);
    if steps.is_empty() {
        return Err(PipelineError::EmptyPlan);
    }
    let mut out = Vec::with_capacity(steps.len());
    for (idx, step) in steps.into_iter().enumerate() {
        let mut cited = Vec::new();
        let mut rest = String::with_capacity(step.len());
        let mut last = 0;
        for caps in triplet_re().captures_iter(&step) {
            let whole = caps.get(0).unwrap();
            let comps: Option<Vec<String>> = (1..=3).map(|i| normalize(&caps[i])).collect();
            let found = comps.as_ref().and_then(|c| vectors.iter().find(|(_, v)| v[..] == c[..]));
            let Some((path, values)) = found else {
                return Err(PipelineError::Alignment {
                    step: idx + 1,
                    value: whole.as_str().to_string(),
                });
            };
            for (axis, value) in ["x", "y", "z"].iter().zip(values) {
                cited.push((format!("{path}.{axis}"), value.clone()));
            }
            rest.push_str(&step[last..whole.start()]);
            rest.push(' ');
            last = whole.end();
        }
        rest.push_str(&step[last..]);
        for caps in number_re().captures_iter(&rest) {
            if let Some(norm) = normalize(&caps[2]) {
                if let Some((name, value)) = scalars.iter().find(|(_, v)| *v == norm) {
                    cited.push((name.clone(), value.clone()));
                }
            }
        }
        out.push(PlanStep { text: step, cited_properties: cited });
    }
    Ok(ManipulationSequence { steps: out })
}

fn vector(k: &KinematicDescription, path: &str) -> Result<String, PipelineError> {
    k.vector_properties()
        .into_iter()
        .find(|(p, _)| p == path)
        .map(|(_, [x, y, z])| format!("({x}, {y}, {z})"))
        .ok_or_else(|| PipelineError::Prompt(format!("description has no {path}")))
}

fn scalar(k: &KinematicDescription, path: &str) -> Result<String, PipelineError> {
    k.scalar_properties()
        .into_iter()
        .find(|(p, _)| p == path)
        .map(|(_, v)| v)
        .ok_or_else(|| PipelineError::Prompt(format!("description has no {path}")))
}

/// Template stage-1 plan for `object`, copying every property from `k`.
/// The object must be the parse of `k`.
pub fn render_sequence_plan(
    object: &ArticulatedObject,
    k: &KinematicDescription,
    task: &ManipulationTask,
    config: &PlannerConfig,
) -> Result<String, PipelineError> {
    let mode = classify_manipulation_mode(object, task.push)
        .map_err(|e| PipelineError::Prompt(e.to_string()))?;
    let contact = &object.contact.name;
    let part = &object.movable_part().name;
    let position = vector(k, "contact.position")?;
    let approach = vector(k, "contact.approach")?;
    let axis = vector(k, "joint.axis")?;
    let origin = vector(k, "joint.origin")?;
    let lower = scalar(k, "joint.limit.lower")?;
    let upper = scalar(k, "joint.limit.upper")?;
    let delta = fmt4(task.delta);

    let mut steps = vec![
        format!(
            "Move the gripper {} m in front of the {contact} at {position}, approaching along {approach}.",
            fmt4(config.approach_offset)
        ),
        format!("Move the gripper onto the {contact} at {position}."),
    ];
    match mode {
        ManipulationMode::LinearPush => steps.push(format!(
            "Push the {contact} so the {part} slides along the prismatic joint axis {axis} by {delta} m, staying within the limits [{lower}, {upper}]."
        )),
        ManipulationMode::LinearGrasp => {
            steps.push(format!("Grasp the {contact}."));
            steps.push(format!(
                "Pull the {part} along the prismatic joint axis {axis} by {delta} m, staying within the limits [{lower}, {upper}]."
            ));
            steps.push(format!("Release the {contact}."));
        }
        ManipulationMode::ArcGrasp => {
            steps.push(format!("Grasp the {contact}."));
            steps.push(format!(
                "Rotate the {part} about the revolute joint axis {axis} through the origin {origin} by {delta} rad, keeping the {contact} on its arc of radius {} m, within the limits [{lower}, {upper}].",
                fmt4(object.contact_radius())
            ));
            steps.push(format!("Release the {contact}."));
        }
        ManipulationMode::TwistGrasp => {
            let turns = twist_actions(task.delta);
            let sense = match turns.first() {
                Some(Action::RotateCcw) => "anti-clockwise",
                _ => "clockwise",
            };
            steps.push(format!("Grasp the {contact}."));
            steps.push(format!(
                "Twist the {contact} about the revolute joint axis {axis} through the origin {origin} by {delta} rad, as {} {sense} rotations of 30 degrees.",
                turns.len()
            ));
            steps.push(format!("Release the {contact}."));
        }
    }
    Ok(steps
        .iter()
        .enumerate()
        .map(|(i, s)| format!("{}. {s}", i + 1))
        .collect::<Vec<_>>()
        .join("\n"))
}

//! Two-stage LLM planning.
//!
//! Stage 1 turns the instruction and kinematic description into a numbered
//! manipulation sequence whose copied properties are checked against the
//! description. Stage 2 turns that sequence into DSL actions by in-context
//! learning from the demonstration store.

use std::fmt;

use thiserror::Error;

use crate::action_dsl::{parse_action_line, parse_actions, ActionSequence, DslError};
use crate::kinematic_model::ArticulatedObject;
use crate::knowledge_parser::{serialize_description, DescriptionError};
use crate::oracle_planner::ManipulationTask;

pub mod clients;
pub mod demos;
pub mod prompts;
pub mod sequence;

pub use clients::{
    prompt_hash, HttpClient, HttpConfig, LlmClient, LlmError, MockOracleClient, RecordingClient,
    ReplayClient, TranscriptEntry,
};
pub use demos::{generate_demo_store, load_demo_store, write_demo_store, Demonstration, NamedDemo};
pub use prompts::{build_stage1_prompt, build_stage2_prompt, render_instruction};
pub use sequence::{parse_sequence_plan, render_sequence_plan, ManipulationSequence, PlanStep};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    SequencePlanning,
    WaypointGeneration,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::SequencePlanning => "sequence planning",
            Stage::WaypointGeneration => "waypoint generation",
        })
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PipelineError {
    #[error("prompt: {0}")]
    Prompt(String),
    #[error("step {step} cites {value}, which does not occur in the kinematic description")]
    Alignment { step: usize, value: String },
    #[error("manipulation sequence is empty")]
    EmptyPlan,
    #[error("response contains no actions")]
    NoActionsFound,
    #[error(transparent)]
    Dsl(#[from] DslError),
    #[error(transparent)]
    Description(#[from] DescriptionError),
    #[error(transparent)]
    Llm(#[from] LlmError),
    #[error("demonstrations: {0}")]
    Demo(String),
    #[error("io: {0}")]
    Io(String),
    #[error("{stage}: {source}")]
    Stage {
        stage: Stage,
        #[source]
        source: Box<PipelineError>,
    },
}

impl PipelineError {
    /// The error with stage wrapping removed.
    pub fn root(&self) -> &PipelineError {
        match self {
            PipelineError::Stage { source, .. } => source.root(),
            other => other,
        }
    }

    /// True when the failure came from the client rather than the response.
    pub fn is_client_failure(&self) -> bool {
        matches!(self.root(), PipelineError::Llm(_))
    }
}

/// Extracts DSL lines from a free-form response: fences, prose and list
/// markers are dropped, the remaining action lines are parsed as a sequence.
pub fn parse_waypoint_response(text: &str) -> Result<ActionSequence, PipelineError> {
    let mut kept = Vec::new();
    for line in text.lines() {
        let trimmed = line.trim();
        if trimmed.starts_with("```") {
            continue;
        }
        let body = strip_list_marker(trimmed);
        if let Ok(Some(_)) = parse_action_line(body) {
            kept.push(body);
        }
    }
    if kept.is_empty() {
        return Err(PipelineError::NoActionsFound);
    }
    Ok(parse_actions(&kept.join("\n"))?)
}

fn strip_list_marker(line: &str) -> &str {
    let digits = line.bytes().take_while(u8::is_ascii_digit).count();
    if digits > 0 {
        if let Some(rest) = line[digits..].strip_prefix(['.', ')']) {
            return rest.trim_start();
        }
    }
    line.strip_prefix(['-', '*'])
        .map(str::trim_start)
        .unwrap_or(line)
}

fn wrap(stage: Stage) -> impl Fn(PipelineError) -> PipelineError {
    move |e| PipelineError::Stage { stage, source: Box::new(e) }
}

/// Calls the client, retrying once when the response fails to parse.
/// Client errors are not retried.
fn complete_parsed<T>(
    client: &dyn LlmClient,
    prompt: &str,
    parse: impl Fn(&str) -> Result<T, PipelineError>,
) -> Result<T, PipelineError> {
    let mut last = None;
    for _ in 0..2 {
        let response = client.complete(prompt)?;
        match parse(&response) {
            Ok(v) => return Ok(v),
            Err(e) => last = Some(e),
        }
    }
    Err(last.unwrap())
}

/// Full two-stage plan for one task.
pub fn plan_with_llm(
    client: &dyn LlmClient,
    object: &ArticulatedObject,
    task: &ManipulationTask,
    demos: &[Demonstration],
) -> Result<ActionSequence, PipelineError> {
    let k = serialize_description(object)?;
    let instruction = render_instruction(task, object.joint.joint_type);

    let stage = wrap(Stage::SequencePlanning);
    let prompt1 = build_stage1_prompt(&instruction, &k).map_err(&stage)?;
    let stage1 = complete_parsed(client, &prompt1, |r| {
        parse_sequence_plan(r, &k).map(|_| r.to_string())
    })
    .map_err(&stage)?;

    let stage = wrap(Stage::WaypointGeneration);
    let prompt2 = build_stage2_prompt(&stage1, demos, &k, &instruction).map_err(&stage)?;
    complete_parsed(client, &prompt2, parse_waypoint_response).map_err(&stage)
}

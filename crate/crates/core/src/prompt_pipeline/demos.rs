//! The in-context demonstration store.
//!
//! Fourteen base demonstrations cover every instruction of the eight seen
//! categories; three more repeat oven/open, refrigerator/close and
//! faucet/turn on on differently posed instances, for seventeen in total.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::prompts::render_instruction;
use super::sequence::{parse_sequence_plan, render_sequence_plan};
use super::PipelineError;
use crate::action_dsl::{emit_actions, parse_actions, ActionSequence};
use crate::eval_harness::categories::{category, generate_instance, seen_categories, CATEGORIES};
use crate::knowledge_parser::{parse_description, serialize_description, KinematicDescription};
use crate::oracle_planner::{plan, PlannerConfig};

/// Pose-varied repeats added after the base demonstrations.
pub const EXTRA_DEMOS: [(&str, &str); 3] = [("oven", "open"), ("refrigerator", "close"), ("faucet", "turn on")];
pub const DEFAULT_DEMO_SEED: u64 = 7;
/// Demo instances draw from seeds far above those used for evaluation.
const DEMO_SEED_BASE: u64 = 10_000;

#[derive(Debug, Clone, PartialEq)]
pub struct Demonstration {
    pub description: KinematicDescription,
    pub instruction: String,
    pub sequence_plan: String,
    pub actions: ActionSequence,
}

#[derive(Debug, Serialize, Deserialize)]
struct DemoFile {
    description: String,
    instruction: String,
    sequence_plan: String,
    actions: String,
}

impl Demonstration {
    /// Checks the demo invariants: valid actions and a sequence plan whose
    /// every copied property occurs in the description.
    pub fn validate(&self) -> Result<(), PipelineError> {
        self.actions.validate()?;
        parse_description(self.description.as_str())?;
        let seq = parse_sequence_plan(&self.sequence_plan, &self.description)?;
        for (name, value) in seq.cited() {
            if !self.description.as_str().contains(&format!("\"{value}\"")) {
                return Err(PipelineError::Demo(format!("cited {name}={value} is not in the description")));
            }
        }
        Ok(())
    }

    /// Category name, read from the description's object name.
    pub fn category(&self) -> Option<String> {
        parse_description(self.description.as_str()).ok().map(|o| o.name)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NamedDemo {
    pub file_name: String,
    pub demo: Demonstration,
}

fn slug(label: &str) -> String {
    label.replace(' ', "_")
}

/// Builds the store for the given seen categories (all eight when empty),
/// ordered by file name.
pub fn generate_demo_store(
    categories: &[&str],
    seed: u64,
    config: &PlannerConfig,
) -> Result<Vec<NamedDemo>, PipelineError> {
    for name in categories {
        let spec = category(name).map_err(|e| PipelineError::Demo(e.to_string()))?;
        if !spec.seen {
            return Err(PipelineError::Demo(format!("{name} is not a seen category")));
        }
    }
    let wanted = |name: &str| categories.is_empty() || categories.contains(&name);
    let mut picks: Vec<(&str, &str, u64)> = Vec::new();
    for spec in seen_categories().filter(|s| wanted(s.name)) {
        for label in spec.instruction_labels() {
            picks.push((spec.name, label, 0));
        }
    }
    for (name, label) in EXTRA_DEMOS.iter().filter(|(n, _)| wanted(n)) {
        picks.push((name, label, 1));
    }

    let mut out = Vec::with_capacity(picks.len());
    for (name, label, n) in picks {
        let index = CATEGORIES.iter().position(|c| c.name == name).unwrap() as u64;
        let instance_seed = DEMO_SEED_BASE + seed * 1_000 + index * 10 + n;
        let spec = category(name).unwrap();
        let instance = generate_instance(spec, instance_seed).map_err(|e| PipelineError::Demo(e.to_string()))?;
        let t = instance.tasks.iter().find(|t| t.label == label).unwrap();
        let description = serialize_description(&t.object)?;
        let sequence_plan = render_sequence_plan(&t.object, &description, &t.task, config)?;
        let planned = plan(&t.object, &t.task, config).map_err(|e| PipelineError::Demo(e.to_string()))?;
        // Keep the actions exactly as they read back from the file.
        let actions = parse_actions(&emit_actions(&planned))?;
        let demo = Demonstration {
            description,
            instruction: render_instruction(&t.task, t.object.joint.joint_type),
            sequence_plan,
            actions,
        };
        demo.validate()?;
        out.push(NamedDemo { file_name: format!("{name}_{}_{n}.demo.json", slug(label)), demo });
    }
    out.sort_by(|a, b| a.file_name.cmp(&b.file_name));
    Ok(out)
}

fn io_error(path: &Path, e: impl std::fmt::Display) -> PipelineError {
    PipelineError::Io(format!("{}: {e}", path.display()))
}

/// Writes each demo as pretty JSON with a trailing newline.
pub fn write_demo_store(dir: &Path, demos: &[NamedDemo]) -> Result<Vec<PathBuf>, PipelineError> {
    std::fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
    let mut paths = Vec::with_capacity(demos.len());
    for d in demos {
        let file = DemoFile {
            description: d.demo.description.as_str().to_string(),
            instruction: d.demo.instruction.clone(),
            sequence_plan: d.demo.sequence_plan.clone(),
            actions: emit_actions(&d.demo.actions),
        };
        let path = dir.join(&d.file_name);
        let mut text = serde_json::to_string_pretty(&file).expect("demo serializes");
        text.push('\n');
        std::fs::write(&path, text).map_err(|e| io_error(&path, e))?;
        paths.push(path);
    }
    Ok(paths)
}

/// Loads every `*.demo.json` in `dir`, in file-name order, validating each.
pub fn load_demo_store(dir: &Path) -> Result<Vec<NamedDemo>, PipelineError> {
    let mut names: Vec<String> = std::fs::read_dir(dir)
        .map_err(|e| io_error(dir, e))?
        .filter_map(|entry| entry.ok()?.file_name().into_string().ok())
        .filter(|n| n.ends_with(".demo.json"))
        .collect();
    names.sort();
    let mut out = Vec::with_capacity(names.len());
    for file_name in names {
        let path = dir.join(&file_name);
        let text = std::fs::read_to_string(&path).map_err(|e| io_error(&path, e))?;
        let file: DemoFile = serde_json::from_str(&text).map_err(|e| io_error(&path, e))?;
        let demo = Demonstration {
            description: KinematicDescription::from_text(file.description),
            instruction: file.instruction,
            sequence_plan: file.sequence_plan,
            actions: parse_actions(&file.actions)?,
        };
        demo.validate().map_err(|e| io_error(&path, e))?;
        out.push(NamedDemo { file_name, demo });
    }
    if out.is_empty() {
        return Err(PipelineError::Demo(format!("no demonstrations in {}", dir.display())));
    }
    Ok(out)
}

pub fn demos_only(store: Vec<NamedDemo>) -> Vec<Demonstration> {
    store.into_iter().map(|d| d.demo).collect()
}

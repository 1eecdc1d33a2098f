//! Benchmark generation, trial execution and success-rate reports.

use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::action_dsl::{emit_actions, parse_actions};
use crate::kin_sim::{execute, SimConfig, TrialOutcome, TrialStatus};
use crate::kinematic_model::classify_manipulation_mode;
use crate::knowledge_parser::serialize_description;
use crate::oracle_planner::{plan, PlannerConfig};
use crate::prompt_pipeline::demos::{demos_only, DEFAULT_DEMO_SEED};
use crate::prompt_pipeline::{
    generate_demo_store, load_demo_store, plan_with_llm, Demonstration, HttpClient, HttpConfig,
    LlmClient, LlmError, MockOracleClient, PipelineError, RecordingClient, ReplayClient,
    TranscriptEntry,
};

pub mod categories;
pub mod report;

pub use categories::{
    category, generate_instance, generate_named, BenchmarkInstance, CategorySpec, GenerateError,
    InstanceTask, CATEGORIES,
};
pub use report::{format_asr, render_markdown, AsrReport};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config: {0}")]
    Config(String),
    #[error("io: {0}")]
    Io(String),
    #[error(transparent)]
    Generate(#[from] GenerateError),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error(transparent)]
    Llm(#[from] LlmError),
}

pub fn io_error(path: &Path, e: impl std::fmt::Display) -> HarnessError {
    HarnessError::Io(format!("{}: {e}", path.display()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PlannerKind {
    Oracle,
    MockLlm,
    Replay,
    Live,
}

impl PlannerKind {
    pub fn as_str(self) -> &'static str {
        match self {
            PlannerKind::Oracle => "oracle",
            PlannerKind::MockLlm => "mock-llm",
            PlannerKind::Replay => "replay",
            PlannerKind::Live => "live",
        }
    }
}

impl FromStr for PlannerKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "oracle" => Ok(PlannerKind::Oracle),
            "mock-llm" => Ok(PlannerKind::MockLlm),
            "replay" => Ok(PlannerKind::Replay),
            "live" => Ok(PlannerKind::Live),
            other => Err(format!("unknown planner {other:?} (oracle, mock-llm, replay, live)")),
        }
    }
}

/// Planner step sizes as written in config files (angles in degrees).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlannerSettings {
    pub arc_step_deg: f64,
    pub linear_step: f64,
    pub approach_offset: f64,
}

impl Default for PlannerSettings {
    fn default() -> Self {
        let c = PlannerConfig::default();
        Self {
            arc_step_deg: c.arc_step.to_degrees(),
            linear_step: c.linear_step,
            approach_offset: c.approach_offset,
        }
    }
}

impl PlannerSettings {
    pub fn to_config(self) -> PlannerConfig {
        PlannerConfig {
            arc_step: self.arc_step_deg.to_radians(),
            linear_step: self.linear_step,
            approach_offset: self.approach_offset,
            ..PlannerConfig::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SuiteConfig {
    pub planner: PlannerKind,
    /// Empty means all sixteen.
    pub categories: Vec<String>,
    pub trials_per_category: usize,
    pub seed: u64,
    /// Worker threads; 0 uses one per core.
    pub workers: usize,
    pub demo_seed: u64,
    /// Load demonstrations from here instead of generating them.
    pub demos_dir: Option<PathBuf>,
    /// Replay transcript for the replay planner.
    pub transcript: Option<PathBuf>,
    #[serde(rename = "planner_steps")]
    pub steps: PlannerSettings,
    pub sim: SimConfig,
    pub llm: HttpConfig,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self {
            planner: PlannerKind::Oracle,
            categories: Vec::new(),
            trials_per_category: 3,
            seed: 0,
            workers: 0,
            demo_seed: DEFAULT_DEMO_SEED,
            demos_dir: None,
            transcript: None,
            steps: PlannerSettings::default(),
            sim: SimConfig::default(),
            llm: HttpConfig::default(),
        }
    }
}

impl SuiteConfig {
    pub fn from_toml(text: &str) -> Result<Self, HarnessError> {
        let config: SuiteConfig = toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|e| io_error(path, e))?;
        let mut config = Self::from_toml(&text)?;
        // Relative paths in the file are relative to the file.
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [&mut config.demos_dir, &mut config.transcript].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        for name in &self.categories {
            category(name)?;
        }
        if self.trials_per_category == 0 {
            return Err(HarnessError::Config("trials_per_category must be at least 1".into()));
        }
        self.sim.validate().map_err(HarnessError::Config)?;
        self.steps
            .to_config()
            .validate()
            .map_err(|e| HarnessError::Config(e.to_string()))?;
        Ok(())
    }

    pub fn selected(&self) -> Vec<&'static CategorySpec> {
        CATEGORIES
            .iter()
            .filter(|c| self.categories.is_empty() || self.categories.iter().any(|n| n == c.name))
            .collect()
    }
}

/// A ready-to-use planner. LLM planners record every exchange so runs can be
/// turned into replay transcripts.
pub enum Planner {
    Oracle(PlannerConfig),
    Llm {
        kind: PlannerKind,
        client: Arc<RecordingClient<Box<dyn LlmClient>>>,
        demos: Arc<Vec<Demonstration>>,
    },
}

impl Planner {
    pub fn id(&self) -> &'static str {
        match self {
            Planner::Oracle(_) => PlannerKind::Oracle.as_str(),
            Planner::Llm { kind, .. } => kind.as_str(),
        }
    }

    pub fn llm(kind: PlannerKind, client: Box<dyn LlmClient>, demos: Vec<Demonstration>) -> Self {
        Planner::Llm {
            kind,
            client: Arc::new(RecordingClient::new(client)),
            demos: Arc::new(demos),
        }
    }

    pub fn from_config(config: &SuiteConfig) -> Result<Self, HarnessError> {
        let steps = config.steps.to_config();
        let client: Box<dyn LlmClient> = match config.planner {
            PlannerKind::Oracle => return Ok(Planner::Oracle(steps)),
            PlannerKind::MockLlm => Box::new(MockOracleClient::new(steps)),
            PlannerKind::Replay => {
                let path = config
                    .transcript
                    .as_ref()
                    .ok_or_else(|| HarnessError::Config("replay planner needs a transcript".into()))?;
                Box::new(ReplayClient::from_path(path)?)
            }
            PlannerKind::Live => Box::new(HttpClient::from_env(config.llm.clone())?),
        };
        let demos = match &config.demos_dir {
            Some(dir) => demos_only(load_demo_store(dir)?),
            None => demos_only(generate_demo_store(&[], config.demo_seed, &steps)?),
        };
        Ok(Planner::llm(config.planner, client, demos))
    }

    /// Plans a task, returning the canonical DSL text.
    pub fn plan_text(&self, task: &InstanceTask) -> Result<String, PipelineError> {
        let seq = match self {
            Planner::Oracle(config) => {
                plan(&task.object, &task.task, config).map_err(|e| PipelineError::Prompt(e.to_string()))?
            }
            Planner::Llm { client, demos, .. } => plan_with_llm(client.as_ref(), &task.object, &task.task, demos)?,
        };
        Ok(emit_actions(&seq))
    }

    /// Recorded exchanges as a replay transcript; empty for the oracle.
    pub fn transcript(&self) -> Vec<TranscriptEntry> {
        match self {
            Planner::Oracle(_) => Vec::new(),
            Planner::Llm { client, .. } => client.transcript(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub category: String,
    pub instruction: String,
    pub instance: usize,
    pub instance_seed: u64,
    pub planner_id: String,
    pub outcome: TrialOutcome,
    /// Planner error, when planning failed.
    pub error: Option<String>,
    /// The planner failed because its backend did, not because of its output.
    pub client_failure: bool,
}

/// Plans and simulates one task. Planner errors become
/// `MalformedPlanFailure` outcomes.
pub fn run_trial(
    planner: &Planner,
    instance: usize,
    instance_seed: u64,
    task: &InstanceTask,
    sim: &SimConfig,
) -> TrialResult {
    let category = task.object.name.clone();
    let planned = planner
        .plan_text(task)
        .and_then(|text| parse_actions(&text).map_err(PipelineError::from));
    let (outcome, error, client_failure) = match planned {
        Ok(seq) => (execute(&task.object, &seq, &task.task, sim), None, false),
        Err(e) => (
            TrialOutcome {
                status: TrialStatus::MalformedPlanFailure,
                achieved_delta: 0.0,
                steps_executed: 0,
                max_deviation: 0.0,
            },
            Some(e.to_string()),
            e.is_client_failure(),
        ),
    };
    TrialResult {
        category,
        instruction: task.label.to_string(),
        instance,
        instance_seed,
        planner_id: planner.id().to_string(),
        outcome,
        error,
        client_failure,
    }
}

/// Seed of the `index`-th instance of every category.
pub fn instance_seed(base: u64, index: usize) -> u64 {
    base.wrapping_add(index as u64)
}

#[derive(Debug, Clone)]
pub struct SuiteRun {
    pub report: AsrReport,
    pub trials: Vec<TrialResult>,
}

impl SuiteRun {
    pub fn client_failures(&self) -> usize {
        self.trials.iter().filter(|t| t.client_failure).count()
    }
}

pub fn run_suite(config: &SuiteConfig, planner: &Planner) -> Result<SuiteRun, HarnessError> {
    config.validate()?;
    let mut jobs = Vec::new();
    for spec in config.selected() {
        for index in 0..config.trials_per_category {
            let seed = instance_seed(config.seed, index);
            let inst = generate_instance(spec, seed)?;
            for task in inst.tasks {
                jobs.push((index, seed, task));
            }
        }
    }
    let run = || -> Vec<TrialResult> {
        jobs.par_iter()
            .map(|(index, seed, task)| run_trial(planner, *index, *seed, task, &config.sim))
            .collect()
    };
    let mut trials = if config.workers == 0 {
        run()
    } else {
        rayon::ThreadPoolBuilder::new()
            .num_threads(config.workers)
            .build()
            .map_err(|e| HarnessError::Config(e.to_string()))?
            .install(run)
    };
    let order = |r: &TrialResult| {
        let spec = CATEGORIES.iter().position(|c| c.name == r.category).unwrap_or(usize::MAX);
        let label = CATEGORIES
            .get(spec)
            .and_then(|c| c.instruction_labels().iter().position(|l| *l == r.instruction))
            .unwrap_or(usize::MAX);
        (spec, r.instance, label)
    };
    trials.sort_by_key(order);
    Ok(SuiteRun { report: AsrReport::aggregate(&trials), trials })
}

/// Writes `report.json`, `report.md`, `trials.json` and, for LLM planners,
/// `transcript.json` into `dir`.
pub fn write_suite_outputs(dir: &Path, run: &SuiteRun, planner: &Planner) -> Result<Vec<PathBuf>, HarnessError> {
    std::fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
    let mut files = vec![
        ("report.json", run.report.to_json()),
        ("report.md", render_markdown(&run.report, planner.id())),
        ("trials.json", pretty(&run.trials)),
    ];
    if matches!(planner, Planner::Llm { .. }) {
        files.push(("transcript.json", pretty(&planner.transcript())));
    }
    let mut written = Vec::new();
    for (name, text) in files {
        let path = dir.join(name);
        std::fs::write(&path, text).map_err(|e| io_error(&path, e))?;
        written.push(path);
    }
    Ok(written)
}

pub fn pretty<T: Serialize + ?Sized>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("value serializes");
    s.push('\n');
    s
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub category: String,
    pub seen: bool,
    pub instance: usize,
    pub instance_seed: u64,
    pub instruction: String,
    pub task: String,
    pub delta: f64,
    pub push: bool,
    pub mode: String,
    pub object_file: String,
}

/// Writes every benchmark object as `<category>_<instance>_<instruction>.kin.xml`
/// plus `manifest.json` describing the tasks.
pub fn write_dataset(dir: &Path, seed: u64, trials_per_category: usize) -> Result<Vec<ManifestEntry>, HarnessError> {
    std::fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
    let mut manifest = Vec::new();
    for spec in &CATEGORIES {
        for index in 0..trials_per_category {
            let s = instance_seed(seed, index);
            for t in generate_instance(spec, s)?.tasks {
                let file = format!("{}_{index}_{}.kin.xml", spec.name, t.label.replace(' ', "_"));
                let text = serialize_description(&t.object).map_err(PipelineError::from)?;
                let path = dir.join(&file);
                std::fs::write(&path, text.as_str()).map_err(|e| io_error(&path, e))?;
                let mode = classify_manipulation_mode(&t.object, t.task.push)
                    .map_err(|e| HarnessError::Config(e.to_string()))?;
                manifest.push(ManifestEntry {
                    category: spec.name.to_string(),
                    seen: spec.seen,
                    instance: index,
                    instance_seed: s,
                    instruction: t.label.to_string(),
                    task: t.task.instruction.clone(),
                    delta: t.task.delta,
                    push: t.task.push,
                    mode: mode.as_str().to_string(),
                    object_file: file,
                });
            }
        }
    }
    let path = dir.join("manifest.json");
    std::fs::write(&path, pretty(&manifest)).map_err(|e| io_error(&path, e))?;
    Ok(manifest)
}

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use kinoplan::action_dsl::parse_actions;
use kinoplan::eval_harness::{
    io_error, pretty, run_suite, write_dataset, write_suite_outputs, HarnessError, InstanceTask,
    Planner, PlannerKind, PlannerSettings, SuiteConfig,
};
use kinoplan::kin_sim::{execute_traced, SimConfig};
use kinoplan::knowledge_parser::parse_description;
use kinoplan::oracle_planner::ManipulationTask;
use kinoplan::prompt_pipeline::demos::{demos_only, DEFAULT_DEMO_SEED};
use kinoplan::prompt_pipeline::prompts::parse_rendered_instruction;
use kinoplan::prompt_pipeline::{
    generate_demo_store, load_demo_store, write_demo_store, HttpClient, HttpConfig, LlmClient,
    MockOracleClient, ReplayClient,
};

#[derive(Parser)]
#[command(name = "kinoplan", version, about = "Kinematic-aware manipulation planning for articulated objects")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write the benchmark objects and a task manifest.
    GenDataset {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 3)]
        trials_per_category: usize,
    },
    /// Manage the demonstration store.
    Demos {
        #[command(subcommand)]
        action: DemosCommand,
    },
    /// Plan one task and print the actions.
    Plan(PlanArgs),
    /// Execute a plan in the simulator and print the outcome as JSON.
    Simulate(SimulateArgs),
    /// Run the benchmark suite.
    Eval {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the planner named in the config.
        #[arg(long)]
        planner: Option<PlannerKind>,
        #[arg(long)]
        seed: Option<u64>,
    },
}

#[derive(Subcommand)]
enum DemosCommand {
    /// Generate the seventeen demonstrations.
    Generate {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = DEFAULT_DEMO_SEED)]
        seed: u64,
        /// Restrict to these seen categories.
        #[arg(long, value_delimiter = ',')]
        categories: Vec<String>,
    },
}

#[derive(Args)]
struct TaskArgs {
    /// Instruction text. May carry the displacement, as in
    /// "open the drawer (joint displacement 0.3000 m, grasp contact)".
    #[arg(long)]
    instruction: String,
    /// Joint displacement in radians or meters.
    #[arg(long, allow_hyphen_values = true)]
    delta: Option<f64>,
    /// Push the contact instead of grasping it.
    #[arg(long)]
    push: bool,
}

#[derive(Args)]
struct PlanArgs {
    #[arg(long)]
    object: PathBuf,
    #[command(flatten)]
    task: TaskArgs,
    #[arg(long, default_value = "oracle")]
    planner: PlannerKind,
    /// Demonstration directory; generated in memory when absent.
    #[arg(long)]
    demos: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_DEMO_SEED)]
    demo_seed: u64,
    /// Transcript to replay from.
    #[arg(long)]
    transcript: Option<PathBuf>,
    /// Write a replay transcript of this run.
    #[arg(long)]
    record: Option<PathBuf>,
    /// TOML file with endpoint, model and rate settings for the live planner.
    #[arg(long)]
    llm_config: Option<PathBuf>,
    /// Write every prompt and response into this directory.
    #[arg(long)]
    dump_prompts: Option<PathBuf>,
    #[arg(long, default_value_t = 15.0)]
    arc_step_deg: f64,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    object: PathBuf,
    #[arg(long)]
    plan: PathBuf,
    #[arg(long, default_value = "")]
    instruction: String,
    #[arg(long, allow_hyphen_values = true)]
    delta: Option<f64>,
    #[arg(long)]
    push: bool,
    /// Write a JSON-lines trajectory here.
    #[arg(long)]
    trace: Option<PathBuf>,
    #[arg(long, default_value_t = SimConfig::default().eps_dev)]
    eps_dev: f64,
    #[arg(long, default_value_t = SimConfig::default().eps_grasp)]
    eps_grasp: f64,
}

enum Failure {
    Usage(String),
    Runtime(String),
}

impl From<HarnessError> for Failure {
    fn from(e: HarnessError) -> Self {
        match e {
            HarnessError::Config(m) => Failure::Usage(m),
            other => Failure::Runtime(other.to_string()),
        }
    }
}

fn runtime(e: impl std::fmt::Display) -> Failure {
    Failure::Runtime(e.to_string())
}

fn read(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| runtime(io_error(path, e)))
}

fn write(path: &Path, text: &str) -> Result<(), Failure> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| runtime(io_error(dir, e)))?;
    }
    std::fs::write(path, text).map_err(|e| runtime(io_error(path, e)))
}

fn task_from(args: &TaskArgs) -> Result<ManipulationTask, Failure> {
    match (args.delta, parse_rendered_instruction(&args.instruction)) {
        (Some(delta), _) => Ok(ManipulationTask::new(args.instruction.trim(), delta, args.push)),
        (None, Some(task)) => Ok(ManipulationTask { push: task.push || args.push, ..task }),
        (None, None) => Err(Failure::Usage(
            "--delta is required unless the instruction states its joint displacement".into(),
        )),
    }
}

fn cmd_plan(args: PlanArgs) -> Result<(), Failure> {
    let object = parse_description(&read(&args.object)?).map_err(runtime)?;
    let task = task_from(&args.task)?;
    let settings = PlannerSettings { arc_step_deg: args.arc_step_deg, ..PlannerSettings::default() };
    let steps = settings.to_config();
    steps.validate().map_err(|e| Failure::Usage(e.to_string()))?;

    let client: Option<Box<dyn LlmClient>> = match args.planner {
        PlannerKind::Oracle => None,
        PlannerKind::MockLlm => Some(Box::new(MockOracleClient::new(steps))),
        PlannerKind::Replay => {
            let path = args
                .transcript
                .as_ref()
                .ok_or_else(|| Failure::Usage("--planner replay needs --transcript".into()))?;
            Some(Box::new(ReplayClient::from_path(path).map_err(runtime)?))
        }
        PlannerKind::Live => {
            let config = match &args.llm_config {
                Some(p) => toml::from_str::<HttpConfig>(&read(p)?).map_err(|e| Failure::Usage(e.to_string()))?,
                None => HttpConfig::default(),
            };
            Some(Box::new(HttpClient::from_env(config).map_err(runtime)?))
        }
    };
    let planner = match client {
        None => Planner::Oracle(steps),
        Some(client) => {
            let demos = match &args.demos {
                Some(dir) => load_demo_store(dir).map_err(runtime)?,
                None => generate_demo_store(&[], args.demo_seed, &steps).map_err(runtime)?,
            };
            Planner::llm(args.planner, client, demos_only(demos))
        }
    };

    let label = task.instruction.clone();
    let result = planner.plan_text(&InstanceTask { label: "task", object, task });
    if let Planner::Llm { client, .. } = &planner {
        if let Some(dir) = &args.dump_prompts {
            for (i, ex) in client.exchanges().iter().enumerate() {
                write(&dir.join(format!("{:02}_prompt.txt", i + 1)), &ex.prompt)?;
                let response = match &ex.response {
                    Ok(r) => r.clone(),
                    Err(e) => format!("error: {e}"),
                };
                write(&dir.join(format!("{:02}_response.txt", i + 1)), &response)?;
            }
        }
        if let Some(path) = &args.record {
            write(path, &pretty(&planner.transcript()))?;
        }
    }
    let text = result.map_err(|e| runtime(format!("planning {label:?} failed: {e}")))?;
    println!("{text}");
    Ok(())
}

fn cmd_simulate(args: SimulateArgs) -> Result<(), Failure> {
    let object = parse_description(&read(&args.object)?).map_err(runtime)?;
    let delta = match args.delta {
        Some(d) => d,
        None => parse_rendered_instruction(&args.instruction)
            .map(|t| t.delta)
            .ok_or_else(|| Failure::Usage("--delta is required".into()))?,
    };
    let task = ManipulationTask::new(args.instruction.trim(), delta, args.push);
    let config = SimConfig { eps_dev: args.eps_dev, eps_grasp: args.eps_grasp, ..SimConfig::default() };
    config.validate().map_err(Failure::Usage)?;
    let seq = parse_actions(&read(&args.plan)?).map_err(runtime)?;
    let (outcome, trace) = execute_traced(&object, &seq, &task, &config);
    if let Some(path) = &args.trace {
        let mut lines = String::new();
        for record in &trace {
            lines.push_str(&serde_json::to_string(record).map_err(runtime)?);
            lines.push('\n');
        }
        write(path, &lines)?;
    }
    print!("{}", pretty(&outcome));
    Ok(())
}

fn cmd_eval(config: Option<PathBuf>, out: PathBuf, planner: Option<PlannerKind>, seed: Option<u64>) -> Result<(), Failure> {
    let mut config = match &config {
        Some(path) => SuiteConfig::load(path)?,
        None => SuiteConfig::default(),
    };
    if let Some(p) = planner {
        config.planner = p;
    }
    if let Some(s) = seed {
        config.seed = s;
    }
    let planner = Planner::from_config(&config)?;
    let run = run_suite(&config, &planner)?;
    write_suite_outputs(&out, &run, &planner)?;
    let mut stdout = std::io::stdout().lock();
    let _ = writeln!(
        stdout,
        "{}: {}/{} trials succeeded, reports in {}",
        planner.id(),
        run.report.total_successes,
        run.report.total_trials,
        out.display()
    );
    match run.client_failures() {
        0 => Ok(()),
        n => Err(Failure::Runtime(format!("{n} trials failed on the LLM backend"))),
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::GenDataset { out, seed, trials_per_category } => {
            if trials_per_category == 0 {
                return Err(Failure::Usage("--trials-per-category must be at least 1".into()));
            }
            let manifest = write_dataset(&out, seed, trials_per_category)?;
            println!("wrote {} tasks to {}", manifest.len(), out.display());
            Ok(())
        }
        Command::Demos { action: DemosCommand::Generate { out, seed, categories } } => {
            let names: Vec<&str> = categories.iter().map(String::as_str).collect();
            let store = generate_demo_store(&names, seed, &PlannerSettings::default().to_config())
                .map_err(|e| Failure::Usage(e.to_string()))?;
            let paths = write_demo_store(&out, &store).map_err(runtime)?;
            println!("wrote {} demonstrations to {}", paths.len(), out.display());
            Ok(())
        }
        Command::Plan(args) => cmd_plan(args),
        Command::Simulate(args) => cmd_simulate(args),
        Command::Eval { config, out, planner, seed } => cmd_eval(config, out, planner, seed),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
    }
}

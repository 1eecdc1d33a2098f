//! Kinematic-aware manipulation planning for single-DOF articulated objects.
//!
//! The crate is organised as a pipeline:
//!
//! - [`kinematic_model`]: joints, contacts and the joint-manifold math.
//! - [`knowledge_parser`]: the canonical XML kinematic description and its parser.
//! - [`action_dsl`]: the five-verb action language plans are written in.
//! - [`oracle_planner`]: analytic waypoint planning from joint structure.
//! - [`prompt_pipeline`]: two-stage LLM prompting, demonstrations and clients.
//! - [`kin_sim`]: kinematic simulator that executes and judges plans.
//! - [`eval_harness`]: synthetic benchmark, trial runner and ASR reports.

pub mod action_dsl;
pub mod eval_harness;
pub mod fixed;
pub mod kin_sim;
pub mod kinematic_model;
pub mod knowledge_parser;
pub mod oracle_planner;
pub mod prompt_pipeline;

pub use action_dsl::{Action, ActionSequence, Waypoint};
pub use kin_sim::{SimConfig, TrialOutcome, TrialStatus};
pub use knowledge_parser::KinematicDescription;
pub use oracle_planner::{ManipulationTask, PlannerConfig};
pub use kinematic_model::{
    ArticulatedObject, ContactPoint, JointLimits, JointType, KinematicJoint, ManipulationMode,
    Part, Vec3,
};



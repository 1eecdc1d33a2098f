//! The five-verb action language plans are written in.
//!
//! ```text
//! move(<real>, <real>, <real>)
//! grasp()
//! release()
//! rotate_cw()
//! rotate_ccw()
//! ```
//!
//! One action per line; `#` starts a comment; whitespace inside the
//! parentheses is ignored. A rotation always turns the gripper by 30°.

use std::fmt;

use thiserror::Error;

use crate::fixed::fmt4;
use crate::kinematic_model::Vec3;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DslError {
    #[error("line {line}: {message}")]
    Grammar { line: usize, message: String },
    #[error("line {line}: {message}")]
    Sequence { line: usize, message: String },
}

pub type Result<T> = std::result::Result<T, DslError>;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Action {
    Move(Vec3),
    Grasp,
    Release,
    RotateCw,
    RotateCcw,
}

impl Action {
    pub fn verb(&self) -> &'static str {
        match self {
            Action::Move(_) => "move",
            Action::Grasp => "grasp",
            Action::Release => "release",
            Action::RotateCw => "rotate_cw",
            Action::RotateCcw => "rotate_ccw",
        }
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Action::Move(p) => write!(f, "move({}, {}, {})", fmt4(p.x), fmt4(p.y), fmt4(p.z)),
            other => write!(f, "{}()", other.verb()),
        }
    }
}

/// A 3D position the end-effector must reach.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Waypoint {
    pub position: Vec3,
}

/// An ordered list of actions satisfying the grasp/release alternation rules.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ActionSequence {
    actions: Vec<Action>,
}

impl ActionSequence {
    /// Validates `actions`; errors carry the 1-based action index as line.
    pub fn new(actions: Vec<Action>) -> Result<Self> {
        let lines: Vec<usize> = (1..=actions.len()).collect();
        validate_sequence(&actions, &lines)?;
        Ok(Self { actions })
    }

    /// Builds a sequence without checking alternation. Used to feed
    /// deliberately malformed plans to the simulator.
    pub fn new_unchecked(actions: Vec<Action>) -> Self {
        Self { actions }
    }

    pub fn validate(&self) -> Result<()> {
        let lines: Vec<usize> = (1..=self.actions.len()).collect();
        validate_sequence(&self.actions, &lines)
    }

    pub fn actions(&self) -> &[Action] {
        &self.actions
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn into_actions(self) -> Vec<Action> {
        self.actions
    }
}

fn validate_sequence(actions: &[Action], lines: &[usize]) -> Result<()> {
    let mut grasped = false;
    let mut moved = false;
    for (action, &line) in actions.iter().zip(lines) {
        let fail = |message: &str| {
            Err(DslError::Sequence {
                line,
                message: message.to_string(),
            })
        };
        match action {
            Action::Move(p) => {
                if !p.iter().all(|c| c.is_finite()) {
                    return fail("move target must be finite");
                }
                moved = true;
            }
            Action::Grasp if grasped => return fail("grasp while already grasping"),
            Action::Grasp if !moved => return fail("grasp before any move"),
            Action::Grasp => grasped = true,
            Action::Release if !grasped => return fail("release without a grasp"),
            Action::Release => grasped = false,
            Action::RotateCw | Action::RotateCcw if !grasped => {
                return fail("rotate requires an active grasp")
            }
            Action::RotateCw | Action::RotateCcw => {}
        }
    }
    Ok(())
}

/// Parses one line. `Ok(None)` for blank and comment-only lines.
pub fn parse_action_line(raw: &str) -> std::result::Result<Option<Action>, String> {
    let line = match raw.find('#') {
        Some(i) => &raw[..i],
        None => raw,
    }
    .trim();
    if line.is_empty() {
        return Ok(None);
    }
    let open = line
        .find('(')
        .ok_or_else(|| format!("expected `verb(...)`, found {line:?}"))?;
    if !line.ends_with(')') {
        return Err(format!("missing closing parenthesis in {line:?}"));
    }
    let verb = line[..open].trim();
    let inner = line[open + 1..line.len() - 1].trim();
    if inner.contains('(') || inner.contains(')') {
        return Err(format!("unbalanced parentheses in {line:?}"));
    }
    let nullary = |action: Action| {
        if inner.is_empty() {
            Ok(Some(action))
        } else {
            Err(format!("{verb}() takes no arguments"))
        }
    };
    match verb {
        "move" => {
            let args: Vec<&str> = inner.split(',').map(str::trim).collect();
            if args.len() != 3 {
                return Err(format!("move takes 3 coordinates, found {}", args.len()));
            }
            let mut xyz = [0.0; 3];
            for (slot, arg) in xyz.iter_mut().zip(&args) {
                *slot = parse_real(arg).ok_or_else(|| format!("invalid coordinate {arg:?}"))?;
            }
            Ok(Some(Action::Move(Vec3::new(xyz[0], xyz[1], xyz[2]))))
        }
        "grasp" => nullary(Action::Grasp),
        "release" => nullary(Action::Release),
        "rotate_cw" => nullary(Action::RotateCw),
        "rotate_ccw" => nullary(Action::RotateCcw),
        other => Err(format!("unknown action {other:?}")),
    }
}

/// Decimal literal: optional sign, digits, optional fraction and exponent.
/// Rejects `inf`/`nan` spellings that `f64::from_str` would accept.
fn parse_real(s: &str) -> Option<f64> {
    let body = s.strip_prefix(['-', '+']).unwrap_or(s);
    let starts_ok = body.starts_with(|c: char| c.is_ascii_digit() || c == '.');
    let chars_ok = body
        .chars()
        .all(|c| c.is_ascii_digit() || matches!(c, '.' | 'e' | 'E' | '-' | '+'));
    if !starts_ok || !chars_ok {
        return None;
    }
    s.parse::<f64>().ok().filter(|v| v.is_finite())
}

pub fn parse_actions(text: &str) -> Result<ActionSequence> {
    let mut actions = Vec::new();
    let mut lines = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        match parse_action_line(raw) {
            Ok(Some(action)) => {
                actions.push(action);
                lines.push(line);
            }
            Ok(None) => {}
            Err(message) => return Err(DslError::Grammar { line, message }),
        }
    }
    validate_sequence(&actions, &lines)?;
    Ok(ActionSequence { actions })
}

/// Canonical text: one action per line, no trailing newline.
pub fn emit_actions(seq: &ActionSequence) -> String {
    seq.actions
        .iter()
        .map(Action::to_string)
        .collect::<Vec<_>>()
        .join("\n")
}

pub fn waypoints_of(seq: &ActionSequence) -> Vec<Waypoint> {
    seq.actions
        .iter()
        .filter_map(|a| match a {
            Action::Move(p) => Some(Waypoint { position: *p }),
            _ => None,
        })
        .collect()
}

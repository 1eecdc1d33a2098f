//! Canonical XML kinematic description of an articulated object.
//!
//! ```text
//! <object name="drawer">
//!   <part id="0" name="base"/>
//!   <part id="1" name="drawer"/>
//!   <joint type="prismatic" parent="0" child="1">
//!     <axis x="1.0000" y="0.0000" z="0.0000"/>
//!     <origin x="0.0000" y="0.0000" z="0.0000"/>
//!     <limit lower="0.0000" upper="0.4000"/>
//!     <state value="0.0000"/>
//!   </joint>
//!   <contact name="handle">
//!     <position x="0.3000" y="0.0000" z="0.5000"/>
//!     <approach x="1.0000" y="0.0000" z="0.0000"/>
//!   </contact>
//! </object>
//! ```
//!
//! Serialization is canonical: fixed element and attribute order, two-space
//! indentation, LF line endings and every real printed with four decimals.
//! The parser is lenient about attribute order, whitespace and number
//! formatting, and renormalizes non-unit directions with a warning.
//!
//! XML tokenizing is delegated to `roxmltree`; schema checks are done here so
//! that every violation can be reported with its line.

use std::fmt;

use roxmltree::{Document, Node};
use thiserror::Error;

use crate::fixed::{fmt4, quantize4};
use crate::kinematic_model::{
    ArticulatedObject, ContactPoint, JointLimits, JointType, KinematicJoint, Part, Vec3,
    ZERO_VECTOR_EPS,
};

/// Directions whose norm is within this of 1 are treated as unit vectors
/// that merely carry four-decimal rounding.
pub const UNIT_WARN_TOLERANCE: f64 = 5e-4;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DescriptionError {
    #[error("malformed XML at line {line}: {message}")]
    Parse { line: u32, message: String },
    #[error("schema error at line {line}: {message}")]
    Schema { line: u32, message: String },
    #[error("object violates its invariants: {0}")]
    InvariantViolation(String),
}

pub type Result<T> = std::result::Result<T, DescriptionError>;

/// The textual kinematic description of one object.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct KinematicDescription {
    text: String,
}

impl KinematicDescription {
    /// Wraps text without checking it; use [`parse_description`] to validate.
    pub fn from_text(text: impl Into<String>) -> Self {
        Self { text: text.into() }
    }

    pub fn as_str(&self) -> &str {
        &self.text
    }

    pub fn into_string(self) -> String {
        self.text
    }

    /// Every numeric attribute in document order, named by element path,
    /// e.g. `("joint.limit.upper", "0.4000")`. Values are verbatim.
    pub fn scalar_properties(&self) -> Vec<(String, String)> {
        let Ok(doc) = Document::parse(&self.text) else {
            return Vec::new();
        };
        let mut out = Vec::new();
        for node in doc.root_element().descendants().filter(|n| n.is_element()) {
            let path = element_path(node);
            for attr in node.attributes() {
                if attr.value().trim().parse::<f64>().is_ok() && !matches!(attr.name(), "id" | "parent" | "child") {
                    let name = if path.is_empty() {
                        attr.name().to_string()
                    } else {
                        format!("{path}.{}", attr.name())
                    };
                    out.push((name, attr.value().to_string()));
                }
            }
        }
        out
    }

    /// Every element carrying `x`, `y`, `z` attributes, e.g.
    /// `("joint.axis", ["1.0000", "0.0000", "0.0000"])`.
    pub fn vector_properties(&self) -> Vec<(String, [String; 3])> {
        let Ok(doc) = Document::parse(&self.text) else {
            return Vec::new();
        };
        doc.root_element()
            .descendants()
            .filter(|n| n.is_element())
            .filter_map(|node| {
                let x = node.attribute("x")?;
                let y = node.attribute("y")?;
                let z = node.attribute("z")?;
                Some((element_path(node), [x.to_string(), y.to_string(), z.to_string()]))
            })
            .collect()
    }
}

impl fmt::Display for KinematicDescription {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.text)
    }
}

fn element_path(node: Node) -> String {
    let mut names: Vec<&str> = node
        .ancestors()
        .filter(|n| n.is_element())
        .map(|n| n.tag_name().name())
        .collect();
    names.pop(); // root <object>
    names.reverse();
    names.join(".")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub severity: Severity,
    pub line: u32,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Diagnostics(pub Vec<Diagnostic>);

impl Diagnostics {
    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn has_errors(&self) -> bool {
        self.errors().next().is_some()
    }

    pub fn errors(&self) -> impl Iterator<Item = &Diagnostic> {
        self.0.iter().filter(|d| d.severity == Severity::Error)
    }

    pub fn warnings(&self) -> impl Iterator<Item = &Diagnostic> {
        self.0.iter().filter(|d| d.severity == Severity::Warning)
    }

    fn error(&mut self, line: u32, message: impl Into<String>) {
        self.0.push(Diagnostic {
            severity: Severity::Error,
            line,
            message: message.into(),
        });
    }

    fn warning(&mut self, line: u32, message: impl Into<String>) {
        self.0.push(Diagnostic {
            severity: Severity::Warning,
            line,
            message: message.into(),
        });
    }
}

fn escape_attr(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            '\n' => out.push_str("&#10;"),
            '\r' => out.push_str("&#13;"),
            '\t' => out.push_str("&#9;"),
            c => out.push(c),
        }
    }
    out
}

fn xyz(v: &Vec3) -> String {
    format!(r#"x="{}" y="{}" z="{}""#, fmt4(v.x), fmt4(v.y), fmt4(v.z))
}

pub fn serialize_description(object: &ArticulatedObject) -> Result<KinematicDescription> {
    object
        .validate()
        .map_err(|e| DescriptionError::InvariantViolation(e.to_string()))?;
    let [base, movable] = &object.parts;
    let joint = &object.joint;
    let contact = &object.contact;
    let mut s = String::with_capacity(640);
    s.push_str(&format!("<object name=\"{}\">\n", escape_attr(&object.name)));
    for part in [base, movable] {
        s.push_str(&format!(
            "  <part id=\"{}\" name=\"{}\"/>\n",
            part.id,
            escape_attr(&part.name)
        ));
    }
    s.push_str(&format!(
        "  <joint type=\"{}\" parent=\"{}\" child=\"{}\">\n",
        joint.joint_type.as_str(),
        base.id,
        movable.id
    ));
    s.push_str(&format!("    <axis {}/>\n", xyz(&joint.axis)));
    s.push_str(&format!("    <origin {}/>\n", xyz(&joint.origin)));
    s.push_str(&format!(
        "    <limit lower=\"{}\" upper=\"{}\"/>\n",
        fmt4(joint.limits.lower),
        fmt4(joint.limits.upper)
    ));
    s.push_str(&format!("    <state value=\"{}\"/>\n", fmt4(joint.state)));
    s.push_str("  </joint>\n");
    s.push_str(&format!("  <contact name=\"{}\">\n", escape_attr(&contact.name)));
    s.push_str(&format!("    <position {}/>\n", xyz(&contact.position)));
    s.push_str(&format!("    <approach {}/>\n", xyz(&contact.approach)));
    s.push_str("  </contact>\n");
    s.push_str("</object>\n");
    Ok(KinematicDescription { text: s })
}

pub fn parse_description(text: &str) -> Result<ArticulatedObject> {
    let analysis = analyze(text);
    if let Some(err) = analysis.xml_error {
        return Err(err);
    }
    if let Some(first) = analysis.diagnostics.errors().next() {
        return Err(DescriptionError::Schema {
            line: first.line,
            message: first.message.clone(),
        });
    }
    analysis.object.ok_or_else(|| DescriptionError::Schema {
        line: 1,
        message: "document does not describe an object".into(),
    })
}

/// Reports every problem in the document instead of stopping at the first.
/// Malformed XML yields a single error diagnostic.
pub fn validate_description(text: &str) -> Diagnostics {
    let analysis = analyze(text);
    match analysis.xml_error {
        Some(DescriptionError::Parse { line, message }) => {
            let mut d = Diagnostics::default();
            d.error(line, message);
            d
        }
        _ => analysis.diagnostics,
    }
}

struct Analysis {
    object: Option<ArticulatedObject>,
    diagnostics: Diagnostics,
    xml_error: Option<DescriptionError>,
}

struct Walker<'a, 'input> {
    doc: &'a Document<'input>,
    diags: Diagnostics,
}

fn analyze(text: &str) -> Analysis {
    let doc = match Document::parse(text) {
        Ok(doc) => doc,
        Err(e) => {
            return Analysis {
                object: None,
                diagnostics: Diagnostics::default(),
                xml_error: Some(DescriptionError::Parse {
                    line: e.pos().row,
                    message: e.to_string(),
                }),
            }
        }
    };
    let mut walker = Walker {
        doc: &doc,
        diags: Diagnostics::default(),
    };
    let object = walker.object(doc.root_element());
    let diagnostics = walker.diags;
    let object = if diagnostics.has_errors() { None } else { object };
    Analysis {
        object,
        diagnostics,
        xml_error: None,
    }
}

impl<'a, 'input> Walker<'a, 'input> {
    fn line(&self, node: Node) -> u32 {
        self.doc.text_pos_at(node.range().start).row
    }

    fn object(&mut self, root: Node<'a, 'input>) -> Option<ArticulatedObject> {
        let line = self.line(root);
        if root.tag_name().name() != "object" {
            self.diags.error(
                line,
                format!("root element must be <object>, found <{}>", root.tag_name().name()),
            );
            return None;
        }
        let name = self.required_attr(root, "name");
        self.reject_text(root);

        let mut parts = Vec::new();
        let mut joints = Vec::new();
        let mut contacts = Vec::new();
        for child in root.children().filter(|n| n.is_element()) {
            match child.tag_name().name() {
                "part" => parts.push(child),
                "joint" => joints.push(child),
                "contact" => contacts.push(child),
                other => self
                    .diags
                    .warning(self.line(child), format!("unknown element <{other}> ignored")),
            }
        }

        let parts: Vec<Part> = {
            if parts.len() != 2 {
                let at = parts.get(2).map_or(line, |n| self.line(*n));
                self.diags.error(
                    at,
                    format!("expected exactly 2 <part> elements, found {}", parts.len()),
                );
            }
            parts.iter().filter_map(|p| self.part(*p)).collect()
        };
        let joint = self.single(root, &joints, "joint").and_then(|j| self.joint(j, &parts));
        let contact = self
            .single(root, &contacts, "contact")
            .and_then(|c| self.contact(c));

        let name = name?;
        let (joint, parent, child) = joint?;
        let contact = contact?;
        let base = parts.iter().find(|p| p.id == parent)?.clone();
        let movable = parts.iter().find(|p| p.id == child)?.clone();
        let object = ArticulatedObject {
            name,
            parts: [base, movable],
            joint,
            contact,
        };
        if let Err(e) = object.validate() {
            self.diags.error(line, e.to_string());
        }
        Some(object)
    }

    /// Picks the one element of a required singleton, reporting absence and
    /// duplicates.
    fn single(
        &mut self,
        parent: Node<'a, 'input>,
        found: &[Node<'a, 'input>],
        tag: &str,
    ) -> Option<Node<'a, 'input>> {
        match found {
            [] => {
                let line = self.line(parent);
                self.diags
                    .error(line, format!("missing required element <{tag}>"));
                None
            }
            [one] => Some(*one),
            [first, rest @ ..] => {
                for dup in rest {
                    let line = self.line(*dup);
                    self.diags.error(line, format!("duplicate {tag}"));
                }
                Some(*first)
            }
        }
    }

    fn children_by_tag(&mut self, node: Node<'a, 'input>, known: &[&str]) -> Vec<Node<'a, 'input>> {
        let mut out = Vec::new();
        for child in node.children().filter(|n| n.is_element()) {
            if known.contains(&child.tag_name().name()) {
                out.push(child);
            } else {
                let line = self.line(child);
                self.diags.warning(
                    line,
                    format!(
                        "unknown element <{}> in <{}> ignored",
                        child.tag_name().name(),
                        node.tag_name().name()
                    ),
                );
            }
        }
        self.reject_text(node);
        out
    }

    fn reject_text(&mut self, node: Node) {
        for child in node.children().filter(|n| n.is_text()) {
            if child.text().is_some_and(|t| !t.trim().is_empty()) {
                let line = self.line(child);
                self.diags.warning(
                    line,
                    format!("text content in <{}> ignored", node.tag_name().name()),
                );
            }
        }
    }

    fn singleton_child(&mut self, node: Node<'a, 'input>, children: &[Node<'a, 'input>], tag: &str) -> Option<Node<'a, 'input>> {
        let found: Vec<_> = children
            .iter()
            .copied()
            .filter(|c| c.tag_name().name() == tag)
            .collect();
        match found.as_slice() {
            [] => {
                let line = self.line(node);
                self.diags.error(
                    line,
                    format!(
                        "missing required element <{tag}> in <{}>",
                        node.tag_name().name()
                    ),
                );
                None
            }
            [one] => Some(*one),
            [first, rest @ ..] => {
                for dup in rest {
                    let line = self.line(*dup);
                    self.diags.error(line, format!("duplicate <{tag}>"));
                }
                Some(*first)
            }
        }
    }

    fn required_attr(&mut self, node: Node, name: &str) -> Option<String> {
        match node.attribute(name) {
            Some(v) => Some(v.to_string()),
            None => {
                let line = self.line(node);
                self.diags.error(
                    line,
                    format!(
                        "<{}> is missing attribute '{name}'",
                        node.tag_name().name()
                    ),
                );
                None
            }
        }
    }

    fn number(&mut self, node: Node, name: &str) -> Option<f64> {
        let raw = self.required_attr(node, name)?;
        match raw.trim().parse::<f64>() {
            Ok(v) if v.is_finite() => Some(v),
            _ => {
                let line = self.line(node);
                self.diags.error(
                    line,
                    format!(
                        "<{}> attribute '{name}' is not a finite number: {raw:?}",
                        node.tag_name().name()
                    ),
                );
                None
            }
        }
    }

    fn integer(&mut self, node: Node, name: &str) -> Option<u32> {
        let raw = self.required_attr(node, name)?;
        match raw.trim().parse::<u32>() {
            Ok(v) => Some(v),
            Err(_) => {
                let line = self.line(node);
                self.diags.error(
                    line,
                    format!(
                        "<{}> attribute '{name}' is not a part id: {raw:?}",
                        node.tag_name().name()
                    ),
                );
                None
            }
        }
    }

    fn vector(&mut self, node: Node) -> Option<Vec3> {
        let x = self.number(node, "x");
        let y = self.number(node, "y");
        let z = self.number(node, "z");
        Some(Vec3::new(x?, y?, z?))
    }

    fn direction(&mut self, node: Node) -> Option<Vec3> {
        let raw = self.vector(node)?;
        let norm = raw.norm();
        let line = self.line(node);
        if norm <= ZERO_VECTOR_EPS {
            self.diags.error(
                line,
                format!("<{}> must be a non-zero direction", node.tag_name().name()),
            );
            return None;
        }
        if (norm - 1.0).abs() > UNIT_WARN_TOLERANCE {
            self.diags.warning(
                line,
                format!(
                    "<{}> is not unit length (norm {norm:.6}); normalized",
                    node.tag_name().name()
                ),
            );
        }
        Some(unit_preserving_text(&raw))
    }

    fn part(&mut self, node: Node<'a, 'input>) -> Option<Part> {
        self.children_by_tag(node, &[]);
        let id = self.integer(node, "id");
        let name = self.required_attr(node, "name");
        Some(Part { id: id?, name: name? })
    }

    fn joint(&mut self, node: Node<'a, 'input>, parts: &[Part]) -> Option<(KinematicJoint, u32, u32)> {
        let line = self.line(node);
        let joint_type = match self.required_attr(node, "type") {
            Some(t) => match JointType::parse(&t) {
                Some(jt) => Some(jt),
                None => {
                    self.diags.error(line, format!("unknown joint type {t:?}"));
                    None
                }
            },
            None => None,
        };
        let parent = self.integer(node, "parent");
        let child = self.integer(node, "child");
        for (role, id) in [("parent", parent), ("child", child)] {
            if let Some(id) = id {
                if parts.len() == 2 && !parts.iter().any(|p| p.id == id) {
                    self.diags
                        .error(line, format!("joint {role} {id} names no <part>"));
                }
            }
        }
        if parent.is_some() && parent == child {
            self.diags.error(line, "joint parent and child must differ");
        }

        let children = self.children_by_tag(node, &["axis", "origin", "limit", "state"]);
        let axis = self
            .singleton_child(node, &children, "axis")
            .and_then(|n| self.direction(n));
        let origin = self
            .singleton_child(node, &children, "origin")
            .and_then(|n| self.vector(n));
        let limits = self.singleton_child(node, &children, "limit").and_then(|n| {
            let lower = self.number(n, "lower");
            let upper = self.number(n, "upper");
            let (lower, upper) = (lower?, upper?);
            if lower > upper {
                let l = self.line(n);
                self.diags
                    .error(l, format!("limits inverted: lower {lower} > upper {upper}"));
                return None;
            }
            Some(JointLimits::new(lower, upper))
        });
        let state_node = self.singleton_child(node, &children, "state");
        let state = state_node.and_then(|n| self.number(n, "value"));

        if let (Some(limits), Some(state), Some(n)) = (limits, state, state_node) {
            if !limits.contains(state, 0.0) {
                let l = self.line(n);
                self.diags.error(
                    l,
                    format!(
                        "state {state} outside limits [{}, {}]",
                        limits.lower, limits.upper
                    ),
                );
            }
        }
        if joint_type == Some(JointType::Fixed) {
            self.diags
                .error(line, "object needs a revolute or prismatic joint, found fixed");
        }
        Some((
            KinematicJoint {
                joint_type: joint_type?,
                axis: axis?,
                origin: origin?,
                limits: limits?,
                state: state?,
            },
            parent?,
            child?,
        ))
    }

    fn contact(&mut self, node: Node<'a, 'input>) -> Option<ContactPoint> {
        let name = self.required_attr(node, "name");
        let children = self.children_by_tag(node, &["position", "approach"]);
        let position = self
            .singleton_child(node, &children, "position")
            .and_then(|n| self.vector(n));
        let approach = self
            .singleton_child(node, &children, "approach")
            .and_then(|n| self.direction(n));
        Some(ContactPoint {
            name: name?,
            position: position?,
            approach: approach?,
        })
    }
}

/// Unit vector whose four-decimal rendering matches that of `raw`, when one
/// exists near `raw / ‖raw‖`.
///
/// Plain normalization of a rounded unit vector can move a component across
/// a rounding boundary, which would break byte-stable re-serialization. The
/// search alternates between clamping into the rounding box of `raw` and
/// renormalizing; it falls back to plain normalization.
fn unit_preserving_text(raw: &Vec3) -> Vec3 {
    const HALF_BOX: f64 = 4.9e-5;
    let plain = raw / raw.norm();
    let target = raw.map(quantize4);
    let matches = |u: &Vec3| (0..3).all(|i| fmt4(u[i]) == fmt4(target[i]));
    if matches(&plain) {
        return plain;
    }
    let mut u = plain;
    for _ in 0..64 {
        for i in 0..3 {
            u[i] = u[i].clamp(target[i] - HALF_BOX, target[i] + HALF_BOX);
        }
        u /= u.norm();
        if matches(&u) {
            return u;
        }
    }
    plain
}

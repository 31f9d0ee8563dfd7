//! Write-access policies: capabilities, atomic updates, the four
//! default/conflict modes, static enforcement and fairness.

mod cover;
mod enforce;
mod fairness;

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::analysis::{fresh_from, AnalysisError};
use crate::nodeset::NodeSet;
use crate::pattern::PatternError;
use crate::tree::{Label, ModelError, NodeId, Tree};
use crate::xpath::{
    fragment_of, labels, parse_node_test, parse_path, test_matches, Evaluator, Feature, FragmentId,
    NodeTest, PathExpr, XPathError,
};

pub use cover::find_covering_capability;
pub use enforce::{check_static, statically_allowed, BlockReason, Blocker, StaticReport};
pub use fairness::{
    check_fairness, check_fairness_exhaustive, Counterexample, FairReason, FairnessReport,
    FairnessVerdict, Shortcut,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PolicyError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("invalid capability `{text}`: {message}")]
    Capability { text: String, message: String },
    #[error("invalid update: {0}")]
    InvalidUpdate(String),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error(transparent)]
    Pattern(#[from] PatternError),
    #[error("{0}")]
    Unsupported(String),
    #[error("fairness is only decided for XP(/) and XP(/,[]), not {0}")]
    UnsupportedFragment(FragmentId),
    #[error("search budget exceeded after {explored} candidates (bound B = {bound}): {limit}")]
    SearchBudget {
        bound: usize,
        explored: usize,
        limit: String,
    },
    #[error("the update is not dynamically allowed")]
    NotAllowed,
}

impl From<XPathError> for PolicyError {
    fn from(e: XPathError) -> Self {
        PolicyError::Unsupported(e.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum OpKind {
    Insert,
    Update,
    Delete,
}

impl OpKind {
    pub const ALL: [OpKind; 3] = [OpKind::Insert, OpKind::Update, OpKind::Delete];

    pub fn name(self) -> &'static str {
        match self {
            OpKind::Insert => "insert",
            OpKind::Update => "update",
            OpKind::Delete => "delete",
        }
    }

    pub fn has_payload(self) -> bool {
        self != OpKind::Delete
    }
}

impl fmt::Display for OpKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for OpKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        OpKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| format!("unknown operation `{s}`"))
    }
}

/// `+` allows, `-` denies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Sign {
    Allow,
    Deny,
}

impl Sign {
    pub fn symbol(self) -> char {
        match self {
            Sign::Allow => '+',
            Sign::Deny => '-',
        }
    }

    pub fn word(self) -> &'static str {
        match self {
            Sign::Allow => "allow",
            Sign::Deny => "deny",
        }
    }
}

/// A path and, for insert and update, a test on the payload's root label.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct UpdateCapability {
    pub kind: OpKind,
    pub path: PathExpr,
    pub test: Option<NodeTest>,
}

impl UpdateCapability {
    pub fn new(kind: OpKind, path: PathExpr, test: Option<NodeTest>) -> Result<Self, String> {
        match (&test, kind.has_payload()) {
            (None, true) => Err(format!("{kind} needs a node test")),
            (Some(_), false) => Err("delete takes no node test".into()),
            (Some(NodeTest::AttributeName(_)), _) => Err("payload tests are NAME, * or text()".into()),
            _ => Ok(UpdateCapability { kind, path, test }),
        }
    }

    pub fn delete(path: PathExpr) -> Self {
        UpdateCapability {
            kind: OpKind::Delete,
            path,
            test: None,
        }
    }

    /// Whether a payload rooted at `root` passes the node test.
    pub fn admits(&self, root: Option<&Label>) -> bool {
        match (&self.test, root) {
            (None, _) => true,
            (Some(t), Some(l)) => test_matches(t, l),
            (Some(_), None) => false,
        }
    }

    /// Parses `delete PATH` or `insert|update PATH :: TEST`.
    pub fn parse(text: &str) -> Result<Self, PolicyError> {
        let err = |message: String| PolicyError::Capability {
            text: text.to_string(),
            message,
        };
        let text = text.trim();
        let (kind, rest) = text
            .split_once(char::is_whitespace)
            .ok_or_else(|| err("expected `KIND PATH`".into()))?;
        let kind: OpKind = kind.parse().map_err(err)?;
        let (path, test) = split_test(rest.trim());
        let path = parse_path(path).map_err(|e| err(e.to_string()))?;
        let test = test
            .map(|t| parse_node_test(t).map_err(|e| err(e.to_string())))
            .transpose()?;
        UpdateCapability::new(kind, path, test).map_err(err)
    }

    pub(crate) fn path_features(&self) -> FragmentId {
        fragment_of(&self.path)
    }
}

/// Splits `PATH :: TEST` at a `::` preceded by whitespace, so axis syntax
/// such as `child::a` inside the path is left alone.
fn split_test(s: &str) -> (&str, Option<&str>) {
    let found = s
        .match_indices("::")
        .filter(|(i, _)| s[..*i].ends_with(char::is_whitespace))
        .last();
    match found {
        Some((i, _)) => (s[..i].trim_end(), Some(s[i + 2..].trim())),
        None => (s, None),
    }
}

impl fmt::Display for UpdateCapability {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", self.kind, self.path)?;
        if let Some(t) = &self.test {
            write!(f, " :: {t}")?;
        }
        Ok(())
    }
}

impl FromStr for UpdateCapability {
    type Err = PolicyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        UpdateCapability::parse(s)
    }
}

/// A concrete operation at a node: deletion, or insertion/replacement with a
/// payload tree.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct AtomicUpdate {
    pub kind: OpKind,
    pub target: NodeId,
    pub payload: Option<Tree>,
}

impl AtomicUpdate {
    pub fn delete(target: NodeId) -> Self {
        AtomicUpdate {
            kind: OpKind::Delete,
            target,
            payload: None,
        }
    }

    pub fn insert(target: NodeId, payload: Tree) -> Self {
        AtomicUpdate {
            kind: OpKind::Insert,
            target,
            payload: Some(payload),
        }
    }

    pub fn update(target: NodeId, payload: Tree) -> Self {
        AtomicUpdate {
            kind: OpKind::Update,
            target,
            payload: Some(payload),
        }
    }

    pub fn payload_root(&self) -> Option<&Label> {
        self.payload.as_ref().map(|p| p.label(p.root()))
    }

    pub fn validate(&self, t: &Tree) -> Result<(), PolicyError> {
        if !t.contains_node(self.target) {
            return Err(PolicyError::InvalidUpdate(format!(
                "target node {} does not exist",
                self.target.index()
            )));
        }
        if self.payload.is_some() != self.kind.has_payload() {
            return Err(PolicyError::InvalidUpdate(format!(
                "{} {} a payload",
                self.kind,
                if self.kind.has_payload() { "needs" } else { "takes no" }
            )));
        }
        Ok(())
    }

    /// Parses `delete NODE-PATH` or `insert|update NODE-PATH :: PAYLOAD`,
    /// where the payload is a tree term or `text()`.
    pub fn parse(text: &str, t: &Tree) -> Result<Self, PolicyError> {
        let bad = |m: String| PolicyError::InvalidUpdate(format!("`{}`: {m}", text.trim()));
        let (kind, rest) = text
            .trim()
            .split_once(char::is_whitespace)
            .ok_or_else(|| bad("expected `KIND NODE-PATH`".into()))?;
        let kind: OpKind = kind.parse().map_err(bad)?;
        let (node, payload) = split_test(rest.trim());
        let target = t
            .resolve_node_path(node)
            .ok_or_else(|| bad(format!("no node at {node}")))?;
        let payload = match payload {
            None => None,
            Some("text()") => Some(Tree::leaf(Label::text(""))),
            Some(term) => Some(Tree::parse(term).map_err(|e: ModelError| bad(e.to_string()))?),
        };
        let u = AtomicUpdate {
            kind,
            target,
            payload,
        };
        u.validate(t)?;
        Ok(u)
    }

    /// `delete /a/b[1]` or `insert /a :: c`, naming only the payload root.
    pub fn describe(&self, t: &Tree) -> String {
        describe_update(self.kind, t.node_path(self.target), self.payload_root())
    }
}

fn describe_update(kind: OpKind, node: String, root: Option<&Label>) -> String {
    match root {
        None => format!("{kind} {node}"),
        Some(Label::Text(_)) => format!("{kind} {node} :: text()"),
        Some(l) => format!("{kind} {node} :: {l}"),
    }
}

/// An allowed update with the payload reduced to its root label, the only
/// part of a payload that rules can observe.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct UpdateKey {
    pub kind: OpKind,
    pub target: NodeId,
    pub root: Option<Label>,
}

impl UpdateKey {
    pub fn describe(&self, t: &Tree) -> String {
        describe_update(self.kind, t.node_path(self.target), self.root.as_ref())
    }

    pub fn to_update(&self) -> AtomicUpdate {
        AtomicUpdate {
            kind: self.kind,
            target: self.target,
            payload: self.root.clone().map(Tree::leaf),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Rule {
    pub sign: Sign,
    pub capability: UpdateCapability,
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", self.sign.symbol(), self.capability)
    }
}

/// `(default, conflict, allowed, denied)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Policy {
    pub default: Sign,
    pub conflict: Sign,
    pub allowed: Vec<UpdateCapability>,
    pub denied: Vec<UpdateCapability>,
}

impl Policy {
    pub fn new(default: Sign, conflict: Sign) -> Self {
        Policy {
            default,
            conflict,
            allowed: Vec::new(),
            denied: Vec::new(),
        }
    }

    pub fn allow(mut self, c: UpdateCapability) -> Self {
        self.allowed.push(c);
        self
    }

    pub fn deny(mut self, c: UpdateCapability) -> Self {
        self.denied.push(c);
        self
    }

    pub fn rules(&self) -> impl Iterator<Item = Rule> + '_ {
        let a = self.allowed.iter().map(|c| Rule {
            sign: Sign::Allow,
            capability: c.clone(),
        });
        let d = self.denied.iter().map(|c| Rule {
            sign: Sign::Deny,
            capability: c.clone(),
        });
        a.chain(d)
    }

    fn capabilities(&self) -> impl Iterator<Item = &UpdateCapability> {
        self.allowed.iter().chain(&self.denied)
    }

    /// Element names in rule paths and payload tests.
    pub fn labels(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        for c in self.capabilities() {
            out.extend(labels(&c.path));
            if let Some(NodeTest::ElementName(n)) = &c.test {
                out.insert(n.clone());
            }
        }
        out
    }

    pub fn fresh_label(&self) -> String {
        fresh_from(&self.labels())
    }

    pub fn parse(text: &str) -> Result<Self, PolicyError> {
        let mut default = None;
        let mut conflict = None;
        let mut policy = Policy::new(Sign::Deny, Sign::Deny);
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let err = |message: String| PolicyError::Parse { line, message };
            let s = raw.trim();
            if s.is_empty() || s.starts_with('#') {
                continue;
            }
            if let Some((key, value)) = s.split_once(':').filter(|(k, _)| !k.contains(' ')) {
                let slot = match key {
                    "default" => &mut default,
                    "conflict" => &mut conflict,
                    other => return Err(err(format!("unknown header `{other}`"))),
                };
                if slot.is_some() {
                    return Err(err(format!("duplicate `{key}` header")));
                }
                *slot = Some(match value.trim() {
                    "allow" => Sign::Allow,
                    "deny" => Sign::Deny,
                    v => return Err(err(format!("expected allow or deny, found `{v}`"))),
                });
                continue;
            }
            let sign = match s.chars().next() {
                Some('+') => Sign::Allow,
                Some('-') => Sign::Deny,
                _ => return Err(err("expected a header or a rule starting with + or -".into())),
            };
            let body = &s[1..];
            if !body.starts_with(' ') {
                return Err(err("expected a space after the sign".into()));
            }
            let cap = UpdateCapability::parse(body).map_err(|e| err(e.to_string()))?;
            match sign {
                Sign::Allow => policy.allowed.push(cap),
                Sign::Deny => policy.denied.push(cap),
            }
        }
        policy.default = default.ok_or(PolicyError::Parse {
            line: 0,
            message: "missing `default:` header".into(),
        })?;
        policy.conflict = conflict.ok_or(PolicyError::Parse {
            line: 0,
            message: "missing `conflict:` header".into(),
        })?;
        Ok(policy)
    }

    /// Combines rule membership according to the mode.
    pub fn decide(&self, in_allowed: bool, in_denied: bool) -> bool {
        match (self.default, self.conflict) {
            (Sign::Allow, Sign::Allow) => !in_denied || in_allowed,
            (Sign::Deny, Sign::Allow) => in_allowed,
            (Sign::Allow, Sign::Deny) => !in_denied,
            (Sign::Deny, Sign::Deny) => in_allowed && !in_denied,
        }
    }

    /// Rejects rules outside the analyzable fragment, naming `purpose` in
    /// the diagnostic.
    pub(crate) fn check_analyzable(&self, purpose: &str) -> Result<(), PolicyError> {
        for c in self.capabilities() {
            check_path_analyzable(&c.path, purpose)?;
        }
        Ok(())
    }

    pub(crate) fn filter_free(caps: &[UpdateCapability]) -> bool {
        caps.iter().all(|c| !c.path_features().contains(Feature::Filter))
    }
}

pub(crate) fn check_path_analyzable(p: &PathExpr, purpose: &str) -> Result<(), PolicyError> {
    let frag = fragment_of(p);
    if frag.contains(Feature::AttributeAxis) || frag.contains(Feature::AttrEq) {
        return Err(PolicyError::Unsupported(format!(
            "attribute rules unsupported for {purpose}: {p}"
        )));
    }
    if !frag.is_subset(&FragmentId::patterns()) {
        return Err(PolicyError::Unsupported(format!(
            "{p} is outside {} and unsupported for {purpose}",
            FragmentId::patterns()
        )));
    }
    Ok(())
}

impl fmt::Display for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "default: {}", self.default.word())?;
        writeln!(f, "conflict: {}", self.conflict.word())?;
        for r in self.rules() {
            writeln!(f, "{r}")?;
        }
        Ok(())
    }
}

impl FromStr for Policy {
    type Err = PolicyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Policy::parse(s)
    }
}

/// The instances of a capability on one tree. The payload dimension is kept
/// symbolic: any payload whose root passes `test` is an instance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CapabilityInstances {
    pub kind: OpKind,
    pub targets: NodeSet,
    pub test: Option<NodeTest>,
}

impl CapabilityInstances {
    pub fn contains(&self, u: &AtomicUpdate) -> bool {
        u.kind == self.kind
            && self.targets.contains(u.target)
            && match (&self.test, u.payload_root()) {
                (None, None) => true,
                (Some(t), Some(l)) => test_matches(t, l),
                _ => false,
            }
    }

    /// The concrete deletions; empty for insert and update.
    pub fn deletions(&self) -> Vec<AtomicUpdate> {
        if self.kind != OpKind::Delete {
            return Vec::new();
        }
        self.targets.iter().map(AtomicUpdate::delete).collect()
    }
}

pub fn capability_instances(u: &UpdateCapability, t: &Tree) -> CapabilityInstances {
    CapabilityInstances {
        kind: u.kind,
        targets: Evaluator::new(t).eval(&u.path),
        test: u.test.clone(),
    }
}

/// Whether any capability of `caps` has `u` among its instances on `ev`'s tree.
fn covered(caps: &[UpdateCapability], u: &AtomicUpdate, ev: &Evaluator<'_>) -> bool {
    caps.iter().any(|c| {
        c.kind == u.kind && c.admits(u.payload_root()) && ev.eval(&c.path).contains(u.target)
    })
}

pub fn dynamically_allowed(p: &Policy, u: &AtomicUpdate, t: &Tree) -> Result<bool, PolicyError> {
    u.validate(t)?;
    let ev = Evaluator::new(t);
    Ok(p.decide(covered(&p.allowed, u, &ev), covered(&p.denied, u, &ev)))
}

/// The rules relevant to one kind of operation with one payload root label:
/// the policy seen as a deletion-only policy.
#[derive(Debug, Clone)]
pub(crate) struct Slice {
    pub kind: OpKind,
    pub class: Option<Label>,
    pub allowed: Vec<UpdateCapability>,
    pub denied: Vec<UpdateCapability>,
}

impl Slice {
    pub fn of(p: &Policy, kind: OpKind, class: Option<Label>) -> Self {
        let pick = |caps: &[UpdateCapability]| {
            caps.iter()
                .filter(|c| c.kind == kind && c.admits(class.as_ref()))
                .cloned()
                .collect()
        };
        Slice {
            kind,
            class: class.clone(),
            allowed: pick(&p.allowed),
            denied: pick(&p.denied),
        }
    }

    /// Whether the marked node may receive this slice's update.
    pub fn allows(&self, p: &Policy, t: &Tree, n: NodeId) -> bool {
        let ev = Evaluator::new(t);
        let hit = |caps: &[UpdateCapability]| caps.iter().any(|c| ev.eval(&c.path).contains(n));
        p.decide(hit(&self.allowed), hit(&self.denied))
    }
}

/// Payload root labels that rules of `kind` can tell apart: each name used
/// in a test, one name used by none, and text. Deletion has one class.
pub(crate) fn classes(p: &Policy, kind: OpKind) -> Vec<Option<Label>> {
    if kind == OpKind::Delete {
        return vec![None];
    }
    let names: BTreeSet<String> = p
        .capabilities()
        .filter(|c| c.kind == kind)
        .filter_map(|c| match &c.test {
            Some(NodeTest::ElementName(n)) => Some(n.clone()),
            _ => None,
        })
        .collect();
    let fresh = fresh_from(&p.labels());
    names
        .into_iter()
        .chain(std::iter::once(fresh))
        .map(|n| Some(Label::Element(n)))
        .chain(std::iter::once(Some(Label::text(""))))
        .collect()
}

/// Classes of `kind` that a payload test admits.
pub(crate) fn classes_admitted(p: &Policy, kind: OpKind, test: Option<&NodeTest>) -> Vec<Option<Label>> {
    match test {
        None => vec![None],
        Some(NodeTest::ElementName(n)) => vec![Some(Label::element(n.clone()))],
        Some(t) => classes(p, kind)
            .into_iter()
            .filter(|c| c.as_ref().is_some_and(|l| test_matches(t, l)))
            .collect(),
    }
}

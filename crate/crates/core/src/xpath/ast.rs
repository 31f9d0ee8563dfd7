use std::fmt;

use crate::tree::term_quote;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Axis {
    SelfAxis,
    Child,
    Descendant,
    Attribute,
}

impl Axis {
    pub fn name(self) -> &'static str {
        match self {
            Axis::SelfAxis => "self",
            Axis::Child => "child",
            Axis::Descendant => "descendant",
            Axis::Attribute => "attribute",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum NodeTest {
    ElementName(String),
    Wildcard,
    AttributeName(String),
    Text,
}

impl NodeTest {
    pub fn element(name: impl Into<String>) -> Self {
        NodeTest::ElementName(name.into())
    }
}

impl fmt::Display for NodeTest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NodeTest::ElementName(n) | NodeTest::AttributeName(n) => f.write_str(n),
            NodeTest::Wildcard => f.write_str("*"),
            NodeTest::Text => f.write_str("text()"),
        }
    }
}

/// Right-hand side of an attribute equality test. Parameters such as `$wn`
/// are opaque constants: they equal an attribute value spelled `$wn`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum AttrValue {
    Literal(String),
    Param(String),
}

impl AttrValue {
    pub fn matches(&self, value: &str) -> bool {
        match self {
            AttrValue::Literal(s) => s == value,
            AttrValue::Param(name) => value.strip_prefix('$') == Some(name.as_str()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PathExpr {
    Step { axis: Axis, test: NodeTest },
    Seq(Box<PathExpr>, Box<PathExpr>),
    Filtered(Box<PathExpr>, Box<FilterExpr>),
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum FilterExpr {
    Exists(PathExpr),
    And(Box<FilterExpr>, Box<FilterExpr>),
    AttrEq { name: String, value: AttrValue },
    True,
}

/// One location step together with the filters attached to it.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Step {
    pub axis: Axis,
    pub test: NodeTest,
    pub filters: Vec<FilterExpr>,
}

impl Step {
    pub fn new(axis: Axis, test: NodeTest) -> Self {
        Step {
            axis,
            test,
            filters: Vec::new(),
        }
    }

    pub fn to_path(&self) -> PathExpr {
        self.filters.iter().fold(
            PathExpr::Step {
                axis: self.axis,
                test: self.test.clone(),
            },
            |p, q| PathExpr::Filtered(Box::new(p), Box::new(q.clone())),
        )
    }
}

impl PathExpr {
    pub fn step(axis: Axis, test: NodeTest) -> Self {
        PathExpr::Step { axis, test }
    }

    pub fn child(name: &str) -> Self {
        PathExpr::step(Axis::Child, NodeTest::element(name))
    }

    pub fn descendant(name: &str) -> Self {
        PathExpr::step(Axis::Descendant, NodeTest::element(name))
    }

    pub fn then(self, tail: PathExpr) -> Self {
        PathExpr::Seq(Box::new(self), Box::new(tail)).normalize()
    }

    pub fn filter(self, cond: FilterExpr) -> Self {
        PathExpr::Filtered(Box::new(self), Box::new(cond)).normalize()
    }

    /// The location steps of the path, each with its own filters, in order.
    pub fn spine(&self) -> Vec<Step> {
        let mut out = Vec::new();
        self.collect_spine(&mut out);
        out
    }

    fn collect_spine(&self, out: &mut Vec<Step>) {
        match self {
            PathExpr::Step { axis, test } => out.push(Step::new(*axis, test.clone())),
            PathExpr::Seq(a, b) => {
                a.collect_spine(out);
                b.collect_spine(out);
            }
            PathExpr::Filtered(p, q) => {
                p.collect_spine(out);
                out.last_mut()
                    .expect("paths have at least one step")
                    .filters
                    .push((**q).clone());
            }
        }
    }

    /// Rebuilds a normalized path from steps; `None` when `steps` is empty.
    pub fn from_steps(steps: &[Step]) -> Option<PathExpr> {
        let (last, init) = steps.split_last()?;
        Some(init.iter().rev().fold(last.to_path(), |tail, s| {
            PathExpr::Seq(Box::new(s.to_path()), Box::new(tail))
        }))
    }

    /// Canonical AST shape: right-associated sequences, filters attached to
    /// the step they follow, right-associated conjunctions.
    pub fn normalize(&self) -> PathExpr {
        let steps: Vec<Step> = self
            .spine()
            .into_iter()
            .map(|s| Step {
                filters: s.filters.iter().map(FilterExpr::normalize).collect(),
                ..s
            })
            .collect();
        PathExpr::from_steps(&steps).expect("paths have at least one step")
    }

    pub fn step_count(&self) -> usize {
        self.spine()
            .iter()
            .map(|s| 1 + s.filters.iter().map(FilterExpr::step_count).sum::<usize>())
            .sum()
    }
}

impl FilterExpr {
    pub fn exists(p: PathExpr) -> Self {
        FilterExpr::Exists(p)
    }

    pub fn and(self, other: FilterExpr) -> Self {
        FilterExpr::And(Box::new(self), Box::new(other)).normalize()
    }

    /// The conjuncts, flattened left to right.
    pub fn conjuncts(&self) -> Vec<&FilterExpr> {
        match self {
            FilterExpr::And(a, b) => {
                let mut v = a.conjuncts();
                v.extend(b.conjuncts());
                v
            }
            other => vec![other],
        }
    }

    pub fn normalize(&self) -> FilterExpr {
        let parts: Vec<FilterExpr> = self
            .conjuncts()
            .into_iter()
            .map(|q| match q {
                FilterExpr::Exists(p) => FilterExpr::Exists(p.normalize()),
                other => other.clone(),
            })
            .collect();
        FilterExpr::conjoin(parts).expect("nonempty conjunction")
    }

    /// Right-associated conjunction; `None` for no parts.
    pub fn conjoin(parts: Vec<FilterExpr>) -> Option<FilterExpr> {
        parts
            .into_iter()
            .rev()
            .reduce(|acc, q| FilterExpr::And(Box::new(q), Box::new(acc)))
    }

    pub fn step_count(&self) -> usize {
        match self {
            FilterExpr::Exists(p) => p.step_count(),
            FilterExpr::And(a, b) => a.step_count() + b.step_count(),
            FilterExpr::AttrEq { .. } | FilterExpr::True => 0,
        }
    }
}

fn write_step(f: &mut fmt::Formatter<'_>, step: &Step, first_in_filter: bool) -> fmt::Result {
    match (step.axis, &step.test) {
        (Axis::Child, t) if first_in_filter => write!(f, "{t}")?,
        (Axis::Child, t) => write!(f, "/{t}")?,
        (Axis::Descendant, t) => write!(f, "//{t}")?,
        (Axis::Attribute, t) => {
            if !first_in_filter {
                f.write_str("/")?;
            }
            write!(f, "@{t}")?
        }
        (Axis::SelfAxis, t) => {
            if !first_in_filter {
                f.write_str("/")?;
            }
            write!(f, "self::{t}")?
        }
    }
    for q in &step.filters {
        write!(f, "[{q}]")?;
    }
    Ok(())
}

fn write_path(f: &mut fmt::Formatter<'_>, p: &PathExpr, relative: bool) -> fmt::Result {
    for (i, step) in p.spine().iter().enumerate() {
        write_step(f, step, relative && i == 0)?;
    }
    Ok(())
}

impl fmt::Display for PathExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_path(f, self, false)
    }
}

impl fmt::Display for FilterExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FilterExpr::Exists(p) => write_path(f, p, true),
            FilterExpr::And(a, b) => write!(f, "{a} and {b}"),
            FilterExpr::AttrEq { name, value } => {
                write!(f, "@{name}=")?;
                match value {
                    AttrValue::Literal(s) => f.write_str(&term_quote(s)),
                    AttrValue::Param(p) => write!(f, "${p}"),
                }
            }
            FilterExpr::True => f.write_str("true()"),
        }
    }
}

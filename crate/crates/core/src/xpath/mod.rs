//! Downward XPath: syntax, evaluation and syntactic measures.

mod ast;
mod eval;
mod parser;

use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

pub use ast::{AttrValue, Axis, FilterExpr, NodeTest, PathExpr, Step};
pub use eval::{eval, eval_pairs, test_matches, Evaluator};
pub(crate) use parser::parse_node_test;
pub use parser::{parse_filter, parse_path};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum XPathError {
    #[error("syntax error at position {pos}: {message}")]
    Syntax { pos: usize, message: String },
    #[error("unknown axis `{name}` at position {pos}")]
    UnknownAxis { pos: usize, name: String },
    #[error("empty path")]
    Empty,
}

impl std::str::FromStr for PathExpr {
    type Err = XPathError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_path(s)
    }
}

/// Element names occurring in node tests, filters included.
pub fn labels(p: &PathExpr) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    collect_labels(p, &mut out);
    out
}

fn collect_labels(p: &PathExpr, out: &mut BTreeSet<String>) {
    for step in p.spine() {
        if let NodeTest::ElementName(n) = &step.test {
            out.insert(n.clone());
        }
        for q in &step.filters {
            for c in q.conjuncts() {
                if let FilterExpr::Exists(inner) = c {
                    collect_labels(inner, out);
                }
            }
        }
    }
}

fn filter_paths(step: &Step) -> impl Iterator<Item = &PathExpr> {
    step.filters.iter().flat_map(|q| {
        q.conjuncts().into_iter().filter_map(|c| match c {
            FilterExpr::Exists(p) => Some(p),
            _ => None,
        })
    })
}

/// Longest run of consecutive `child::*` steps along the spine or within
/// any one filter path.
pub fn star_length(p: &PathExpr) -> usize {
    let mut best = 0;
    let mut run = 0;
    for step in p.spine() {
        if step.axis == Axis::Child && step.test == NodeTest::Wildcard {
            run += 1;
            best = best.max(run);
        } else {
            run = 0;
        }
        for inner in filter_paths(&step) {
            best = best.max(star_length(inner));
        }
    }
    best
}

/// Number of descendant steps, filters included.
pub fn descendant_count(p: &PathExpr) -> usize {
    p.spine()
        .iter()
        .map(|s| {
            usize::from(s.axis == Axis::Descendant)
                + filter_paths(s).map(descendant_count).sum::<usize>()
        })
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Feature {
    Child,
    Descendant,
    Wildcard,
    Filter,
    AttrEq,
    AttributeAxis,
    SelfAxis,
    TextTest,
}

impl Feature {
    fn symbol(self) -> &'static str {
        match self {
            Feature::Child => "/",
            Feature::Descendant => "//",
            Feature::Wildcard => "*",
            Feature::Filter => "[]",
            Feature::AttrEq => "=",
            Feature::AttributeAxis => "@",
            Feature::SelfAxis => "self",
            Feature::TextTest => "text()",
        }
    }
}

/// A fragment of downward XPath, named by its feature set.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct FragmentId {
    features: BTreeSet<Feature>,
}

impl FragmentId {
    pub fn new(features: impl IntoIterator<Item = Feature>) -> Self {
        FragmentId {
            features: features.into_iter().collect(),
        }
    }

    /// Linear paths: child steps with element names.
    pub fn linear() -> Self {
        FragmentId::new([Feature::Child])
    }

    /// Filter paths: child steps with element names and filters.
    pub fn filter_paths() -> Self {
        FragmentId::new([Feature::Child, Feature::Filter])
    }

    /// Child, descendant, wildcard and filters: the analyzable fragment.
    pub fn patterns() -> Self {
        FragmentId::new([
            Feature::Child,
            Feature::Descendant,
            Feature::Wildcard,
            Feature::Filter,
        ])
    }

    pub fn contains(&self, f: Feature) -> bool {
        self.features.contains(&f)
    }

    pub fn is_subset(&self, other: &FragmentId) -> bool {
        self.features.is_subset(&other.features)
    }

    pub fn union(&self, other: &FragmentId) -> FragmentId {
        FragmentId::new(self.features.union(&other.features).copied())
    }

    pub fn features(&self) -> impl Iterator<Item = Feature> + '_ {
        self.features.iter().copied()
    }
}

impl fmt::Display for FragmentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<&str> = self.features.iter().map(|x| x.symbol()).collect();
        write!(f, "XP({})", parts.join(","))
    }
}

/// Smallest fragment containing `p`.
pub fn fragment_of(p: &PathExpr) -> FragmentId {
    let mut out = BTreeSet::new();
    collect_features(p, &mut out);
    FragmentId { features: out }
}

fn collect_features(p: &PathExpr, out: &mut BTreeSet<Feature>) {
    for step in p.spine() {
        out.insert(match step.axis {
            Axis::SelfAxis => Feature::SelfAxis,
            Axis::Child => Feature::Child,
            Axis::Descendant => Feature::Descendant,
            Axis::Attribute => Feature::AttributeAxis,
        });
        match step.test {
            NodeTest::Wildcard => {
                out.insert(Feature::Wildcard);
            }
            NodeTest::Text => {
                out.insert(Feature::TextTest);
            }
            NodeTest::AttributeName(_) => {
                out.insert(Feature::AttributeAxis);
            }
            NodeTest::ElementName(_) => {}
        }
        if !step.filters.is_empty() {
            out.insert(Feature::Filter);
        }
        for q in &step.filters {
            for c in q.conjuncts() {
                match c {
                    FilterExpr::Exists(inner) => collect_features(inner, out),
                    FilterExpr::AttrEq { .. } => {
                        out.insert(Feature::AttrEq);
                        out.insert(Feature::AttributeAxis);
                    }
                    FilterExpr::True | FilterExpr::And(..) => {}
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(s: &str) -> PathExpr {
        parse_path(s).unwrap()
    }

    fn names(v: &[&str]) -> BTreeSet<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn label_sets() {
        assert_eq!(labels(&p("/a//*/b[c]")), names(&["a", "b", "c"]));
        assert!(labels(&p("//*")).is_empty());
        assert_eq!(labels(&p(r#"a[b and @f="x"]"#)), names(&["a", "b"]));
    }

    #[test]
    fn star_lengths() {
        assert_eq!(star_length(&p("/a/*/*/b")), 2);
        assert_eq!(star_length(&p("/a/b")), 0);
        assert_eq!(star_length(&p("/*/a/*[*/*]")), 2);
        assert_eq!(star_length(&p("/a//*/*")), 1);
    }

    #[test]
    fn descendant_counts() {
        assert_eq!(descendant_count(&p("/a//b")), 1);
        assert_eq!(descendant_count(&p("/a/b")), 0);
        assert_eq!(descendant_count(&p("//a[//b]//c")), 3);
    }

    #[test]
    fn fragments() {
        use Feature::*;
        assert_eq!(fragment_of(&p("/a/b")), FragmentId::new([Child]));
        assert_eq!(
            fragment_of(&p("/a//b[*]")),
            FragmentId::new([Child, Descendant, Wildcard, Filter])
        );
        assert_eq!(
            fragment_of(&p(r#"/a/b[@c="foo"]"#)),
            FragmentId::new([Child, Filter, AttrEq, AttributeAxis])
        );
        assert!(FragmentId::linear().is_subset(&FragmentId::filter_paths()));
        assert_eq!(FragmentId::patterns().to_string(), "XP(/,//,*,[])");
    }
}

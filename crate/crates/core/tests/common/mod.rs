//! Shared generators for the integration tests.
#![allow(dead_code)]

use std::collections::BTreeSet;

use proptest::prelude::*;
use xguard_core::policy::{OpKind, Policy, Sign, UpdateCapability};
use xguard_core::tree::{Label, MarkedTree, NodeId, Tree};
use xguard_core::xpath::{Axis, FilterExpr, NodeTest, PathExpr, Step};

pub fn alphabet(names: &[&str]) -> BTreeSet<String> {
    names.iter().map(|s| s.to_string()).collect()
}

pub fn path(s: &str) -> PathExpr {
    xguard_core::xpath::parse_path(s).unwrap()
}

pub fn tree(s: &str) -> Tree {
    Tree::parse(s).unwrap()
}

/// Random element trees: each node after the first hangs under an earlier
/// one.
pub fn arb_tree(max_nodes: usize, names: &'static [&'static str]) -> impl Strategy<Value = Tree> {
    (1..=max_nodes).prop_flat_map(move |n| {
        let parents: Vec<std::ops::Range<usize>> = (1..n).map(|i| 0..i).collect();
        (prop::collection::vec(0..names.len(), n), parents).prop_map(move |(ls, ps)| {
            let labels = ls.iter().map(|&i| Label::element(names[i])).collect();
            let parents = std::iter::once(None).chain(ps.into_iter().map(Some)).collect();
            Tree::from_parents(labels, parents).unwrap()
        })
    })
}

pub fn arb_marked(max_nodes: usize, names: &'static [&'static str]) -> impl Strategy<Value = MarkedTree> {
    arb_tree(max_nodes, names).prop_flat_map(|t| {
        let n = t.len();
        (Just(t), 0..n).prop_map(|(tree, m)| MarkedTree {
            tree,
            mark: NodeId::new(m),
        })
    })
}

fn arb_test(names: &'static [&'static str], star: bool) -> BoxedStrategy<NodeTest> {
    let named = prop::sample::select(names.to_vec()).prop_map(NodeTest::element);
    if star {
        prop_oneof![3 => named, 1 => Just(NodeTest::Wildcard)].boxed()
    } else {
        named.boxed()
    }
}

fn arb_axis(descendant: bool) -> BoxedStrategy<Axis> {
    if descendant {
        prop_oneof![2 => Just(Axis::Child), 1 => Just(Axis::Descendant)].boxed()
    } else {
        Just(Axis::Child).boxed()
    }
}

/// Features to draw from when generating paths.
#[derive(Debug, Clone, Copy)]
pub struct Shape {
    pub steps: usize,
    pub descendant: bool,
    pub star: bool,
    pub filters: bool,
    /// Only the main spine is restricted to child steps.
    pub filter_descendant: bool,
}

impl Shape {
    pub const FULL: Shape = Shape {
        steps: 3,
        descendant: true,
        star: true,
        filters: true,
        filter_descendant: true,
    };
    pub const FILTER_FREE: Shape = Shape {
        filters: false,
        ..Shape::FULL
    };
    /// Child steps and filters over names only.
    pub const FILTER_PATHS: Shape = Shape {
        descendant: false,
        star: false,
        filter_descendant: false,
        ..Shape::FULL
    };
}

fn arb_plain_steps(n: std::ops::RangeInclusive<usize>, descendant: bool, star: bool, names: &'static [&'static str]) -> BoxedStrategy<Vec<Step>> {
    prop::collection::vec((arb_axis(descendant), arb_test(names, star)), n)
        .prop_map(|v| v.into_iter().map(|(a, t)| Step::new(a, t)).collect())
        .boxed()
}

pub fn arb_path(shape: Shape, names: &'static [&'static str]) -> BoxedStrategy<PathExpr> {
    let filter = arb_plain_steps(1..=2, shape.filter_descendant, shape.star, names)
        .prop_map(|s| FilterExpr::exists(PathExpr::from_steps(&s).unwrap()));
    let filters = if shape.filters {
        prop::collection::vec(filter, 0..=2).boxed()
    } else {
        Just(Vec::new()).boxed()
    };
    let step = (arb_axis(shape.descendant), arb_test(names, shape.star), prop::option::weighted(0.4, filters))
        .prop_map(|(a, t, f)| {
            let mut s = Step::new(a, t);
            s.filters.extend(f.and_then(FilterExpr::conjoin));
            s
        });
    prop::collection::vec(step, 1..=shape.steps)
        .prop_map(|s| PathExpr::from_steps(&s).unwrap())
        .boxed()
}

pub fn arb_sign() -> impl Strategy<Value = Sign> {
    prop_oneof![Just(Sign::Allow), Just(Sign::Deny)]
}

/// Delete policies with up to `max_rules` rules of the given shape.
pub fn arb_delete_policy(shape: Shape, max_rules: usize) -> impl Strategy<Value = Policy> {
    (
        arb_sign(),
        arb_sign(),
        prop::collection::vec((arb_sign(), arb_path(shape, &["a", "b"])), 0..=max_rules),
    )
        .prop_map(|(ds, cr, rules)| build(ds, cr, rules.into_iter().map(|(s, p)| (s, UpdateCapability::delete(p)))))
}

/// Policies mixing delete and insert rules with node tests.
pub fn arb_mixed_policy(max_rules: usize) -> impl Strategy<Value = Policy> {
    let test = prop_oneof![
        Just(NodeTest::element("a")),
        Just(NodeTest::element("b")),
        Just(NodeTest::Wildcard),
        Just(NodeTest::Text),
    ];
    let cap = (any::<bool>(), arb_path(Shape::FULL, &["a", "b"]), test).prop_map(|(del, p, t)| {
        if del {
            UpdateCapability::delete(p)
        } else {
            UpdateCapability::new(OpKind::Insert, p, Some(t)).unwrap()
        }
    });
    (arb_sign(), arb_sign(), prop::collection::vec((arb_sign(), cap), 0..=max_rules))
        .prop_map(|(ds, cr, rules)| build(ds, cr, rules))
}

pub fn build(default: Sign, conflict: Sign, rules: impl IntoIterator<Item = (Sign, UpdateCapability)>) -> Policy {
    rules.into_iter().fold(Policy::new(default, conflict), |p, (s, c)| match s {
        Sign::Allow => p.allow(c),
        Sign::Deny => p.deny(c),
    })
}

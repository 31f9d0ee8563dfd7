//! Set-at-a-time evaluation. Paths start at a virtual document node whose
//! only child is the root element, so `/a` selects a root labeled `a`.

use std::collections::BTreeSet;

use super::ast::{Axis, FilterExpr, NodeTest, PathExpr};
use crate::nodeset::NodeSet;
use crate::tree::{Label, NodeId, Tree};

/// Evaluation context for one tree; reusable across many paths.
pub struct Evaluator<'t> {
    tree: &'t Tree,
    /// Index of the virtual document node (one past the last real node).
    doc: usize,
    parent: Vec<Option<usize>>,
    /// Document node first, then the tree in preorder.
    order: Vec<usize>,
}

impl<'t> Evaluator<'t> {
    pub fn new(tree: &'t Tree) -> Self {
        let doc = tree.len();
        let mut parent: Vec<Option<usize>> =
            tree.nodes().map(|v| tree.parent(v).map(NodeId::index)).collect();
        parent[tree.root().index()] = Some(doc);
        parent.push(None);
        let mut order = Vec::with_capacity(doc + 1);
        order.push(doc);
        order.extend(tree.preorder().iter().map(|v| v.index()));
        Evaluator {
            tree,
            doc,
            parent,
            order,
        }
    }

    fn universe(&self) -> usize {
        self.doc + 1
    }

    fn doc_set(&self) -> NodeSet {
        NodeSet::singleton(self.universe(), NodeId::new(self.doc))
    }

    fn real(&self, mut s: NodeSet) -> NodeSet {
        s.remove(NodeId::new(self.doc));
        let mut out = NodeSet::empty(self.doc);
        for v in s.iter() {
            out.insert(v);
        }
        out
    }

    fn test_set(&self, test: &NodeTest) -> NodeSet {
        let mut out = NodeSet::empty(self.universe());
        for v in self.tree.nodes() {
            if test_matches(test, self.tree.label(v)) {
                out.insert(v);
            }
        }
        out
    }

    fn children_of(&self, s: &NodeSet) -> NodeSet {
        let mut out = NodeSet::empty(self.universe());
        for v in 0..self.doc {
            if self.parent[v].is_some_and(|p| s.contains(NodeId::new(p))) {
                out.insert(NodeId::new(v));
            }
        }
        out
    }

    fn parents_of(&self, s: &NodeSet) -> NodeSet {
        let mut out = NodeSet::empty(self.universe());
        for v in s.iter() {
            if let Some(p) = self.parent[v.index()] {
                out.insert(NodeId::new(p));
            }
        }
        out
    }

    fn descendants_of(&self, s: &NodeSet) -> NodeSet {
        let mut out = NodeSet::empty(self.universe());
        for &v in &self.order[1..] {
            let p = NodeId::new(self.parent[v].expect("non-document nodes have parents"));
            if s.contains(p) || out.contains(p) {
                out.insert(NodeId::new(v));
            }
        }
        out
    }

    fn ancestors_of(&self, s: &NodeSet) -> NodeSet {
        let mut out = NodeSet::empty(self.universe());
        for &v in self.order[1..].iter().rev() {
            let id = NodeId::new(v);
            if s.contains(id) || out.contains(id) {
                out.insert(NodeId::new(self.parent[v].expect("has parent")));
            }
        }
        out
    }

    /// Image of a context set under the path relation.
    fn forward(&self, p: &PathExpr, ctx: &NodeSet) -> NodeSet {
        match p {
            PathExpr::Step { axis, test } => {
                let mut out = match axis {
                    Axis::SelfAxis => ctx.clone(),
                    Axis::Child | Axis::Attribute => self.children_of(ctx),
                    Axis::Descendant => self.descendants_of(ctx),
                };
                out.intersect_with(&self.test_set(test));
                out
            }
            PathExpr::Seq(a, b) => self.forward(b, &self.forward(a, ctx)),
            PathExpr::Filtered(a, q) => {
                let mut out = self.forward(a, ctx);
                out.intersect_with(&self.filter_set(q));
                out
            }
        }
    }

    /// Pre-image: nodes with some path successor in `target`.
    fn backward(&self, p: &PathExpr, target: &NodeSet) -> NodeSet {
        match p {
            PathExpr::Step { axis, test } => {
                let mut hit = target.clone();
                hit.intersect_with(&self.test_set(test));
                match axis {
                    Axis::SelfAxis => hit,
                    Axis::Child | Axis::Attribute => self.parents_of(&hit),
                    Axis::Descendant => self.ancestors_of(&hit),
                }
            }
            PathExpr::Seq(a, b) => self.backward(a, &self.backward(b, target)),
            PathExpr::Filtered(a, q) => {
                let mut t = target.clone();
                t.intersect_with(&self.filter_set(q));
                self.backward(a, &t)
            }
        }
    }

    /// Nodes (real or document) at which the filter holds.
    fn filter_set(&self, q: &FilterExpr) -> NodeSet {
        match q {
            FilterExpr::True => NodeSet::full(self.universe()),
            FilterExpr::Exists(p) => self.backward(p, &NodeSet::full(self.universe())),
            FilterExpr::And(a, b) => {
                let mut s = self.filter_set(a);
                s.intersect_with(&self.filter_set(b));
                s
            }
            FilterExpr::AttrEq { name, value } => {
                let mut out = NodeSet::empty(self.universe());
                for v in self.tree.nodes() {
                    if let Label::Attribute { name: n, value: d } = self.tree.label(v) {
                        if n == name && value.matches(d) {
                            out.insert(NodeId::new(self.parent[v.index()].expect("attribute")));
                        }
                    }
                }
                out
            }
        }
    }

    pub fn eval(&self, p: &PathExpr) -> NodeSet {
        self.real(self.forward(p, &self.doc_set()))
    }

    /// Nodes reached from the real node `v`.
    pub fn select_from(&self, p: &PathExpr, v: NodeId) -> NodeSet {
        self.real(self.forward(p, &NodeSet::singleton(self.universe(), v)))
    }

    pub fn satisfies(&self, q: &FilterExpr, v: NodeId) -> bool {
        self.filter_set(q).contains(v)
    }
}

pub fn test_matches(test: &NodeTest, label: &Label) -> bool {
    match (test, label) {
        (NodeTest::ElementName(n), Label::Element(m)) => n == m,
        (NodeTest::Wildcard, Label::Element(_)) => true,
        (NodeTest::AttributeName(n), Label::Attribute { name, .. }) => n == name,
        (NodeTest::Text, Label::Text(_)) => true,
        _ => false,
    }
}

/// Nodes selected by `p` on `t`.
pub fn eval(p: &PathExpr, t: &Tree) -> NodeSet {
    Evaluator::new(t).eval(p)
}

/// The path relation restricted to real nodes of `t`.
pub fn eval_pairs(p: &PathExpr, t: &Tree) -> BTreeSet<(NodeId, NodeId)> {
    let ev = Evaluator::new(t);
    t.nodes()
        .flat_map(|v| ev.select_from(p, v).iter().map(move |w| (v, w)).collect::<Vec<_>>())
        .collect()
}

//! Tree patterns with child and descendant edges, their embeddings into
//! marked trees, extensions and canonical instances.

mod enumerate;
mod joint;

use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

use crate::nodeset::NodeSet;
use crate::tree::{has_marked_homomorphism, Label, MarkedTree, NodeId, Tree};
use crate::xpath::{Axis, FilterExpr, NodeTest, PathExpr, Step};

pub use enumerate::{fp_enumerate, lp_enumerate};
pub use joint::{
    for_each_joint_instance, joint_instances, run_instance, spine_product, JointInstance, JointSpec, Move,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PatternError {
    #[error("unsupported fragment: {0}")]
    Unsupported(String),
    #[error("fresh label `{0}` occurs in the pattern")]
    FreshCollision(String),
    #[error("extension has {found} lengths but the pattern has {expected} descendant edges")]
    ArityMismatch { expected: usize, found: usize },
    #[error("pattern cannot be written as a path: {0}")]
    NotAPath(String),
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PatternLabel {
    /// The virtual document node above the root element.
    Doc,
    Name(String),
    Star,
}

impl PatternLabel {
    fn accepts(&self, label: Option<&Label>) -> bool {
        match (self, label) {
            (PatternLabel::Doc, None) => true,
            (PatternLabel::Name(n), Some(Label::Element(m))) => n == m,
            (PatternLabel::Star, Some(Label::Element(_))) => true,
            _ => false,
        }
    }

    /// Label of an instance node, with `*` replaced by the fresh name.
    pub fn instantiate(&self, fresh: &str) -> String {
        match self {
            PatternLabel::Name(n) => n.clone(),
            PatternLabel::Star => fresh.to_string(),
            PatternLabel::Doc => unreachable!("the document node is never instantiated"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Edge {
    Child,
    Descendant,
}

/// A tree pattern. Node 0 is the document node; node ids follow preorder.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TreePattern {
    labels: Vec<PatternLabel>,
    parents: Vec<Option<(usize, Edge)>>,
    children: Vec<Vec<usize>>,
    mark: usize,
}

/// Incremental preorder construction.
#[derive(Default)]
struct Builder {
    labels: Vec<PatternLabel>,
    parents: Vec<Option<(usize, Edge)>>,
    children: Vec<Vec<usize>>,
}

impl Builder {
    fn new() -> Self {
        let mut b = Builder::default();
        b.labels.push(PatternLabel::Doc);
        b.parents.push(None);
        b.children.push(Vec::new());
        b
    }

    fn add(&mut self, parent: usize, edge: Edge, label: PatternLabel) -> usize {
        let id = self.labels.len();
        self.labels.push(label);
        self.parents.push(Some((parent, edge)));
        self.children.push(Vec::new());
        self.children[parent].push(id);
        id
    }

    fn finish(self, mark: usize) -> TreePattern {
        TreePattern {
            labels: self.labels,
            parents: self.parents,
            children: self.children,
            mark,
        }
    }
}

fn step_parts(step: &Step) -> Result<(Edge, PatternLabel), PatternError> {
    let edge = match step.axis {
        Axis::Child => Edge::Child,
        Axis::Descendant => Edge::Descendant,
        Axis::SelfAxis => return Err(PatternError::Unsupported("self axis".into())),
        Axis::Attribute => return Err(PatternError::Unsupported("attribute axis".into())),
    };
    let label = match &step.test {
        NodeTest::ElementName(n) => PatternLabel::Name(n.clone()),
        NodeTest::Wildcard => PatternLabel::Star,
        NodeTest::AttributeName(_) => {
            return Err(PatternError::Unsupported("attribute test".into()))
        }
        NodeTest::Text => return Err(PatternError::Unsupported("text() test".into())),
    };
    Ok((edge, label))
}

fn add_steps(b: &mut Builder, mut at: usize, steps: &[Step]) -> Result<usize, PatternError> {
    for step in steps {
        let (edge, label) = step_parts(step)?;
        let node = b.add(at, edge, label);
        for q in &step.filters {
            add_filter(b, node, q)?;
        }
        at = node;
    }
    Ok(at)
}

fn add_filter(b: &mut Builder, at: usize, q: &FilterExpr) -> Result<(), PatternError> {
    for c in q.conjuncts() {
        match c {
            FilterExpr::Exists(p) => {
                add_steps(b, at, &p.spine())?;
            }
            FilterExpr::True => {}
            FilterExpr::AttrEq { .. } => {
                return Err(PatternError::Unsupported("attribute equality".into()))
            }
            FilterExpr::And(..) => unreachable!("conjuncts are flattened"),
        }
    }
    Ok(())
}

impl TreePattern {
    /// The pattern of a path in the child/descendant/wildcard/filter fragment.
    pub fn from_path(p: &PathExpr) -> Result<Self, PatternError> {
        let mut b = Builder::new();
        let mark = add_steps(&mut b, 0, &p.spine())?;
        Ok(b.finish(mark))
    }

    /// The pattern whose only instance is the element part of `t`, all edges
    /// child edges. Attribute and text nodes are dropped; the mark must be an
    /// element.
    pub fn from_marked_tree(t: &MarkedTree) -> Result<Self, PatternError> {
        let tree = &t.tree;
        if !tree.label(t.mark).is_element() {
            return Err(PatternError::Unsupported("mark on a non-element node".into()));
        }
        let mut b = Builder::new();
        let mut mark = 0;
        let mut stack = vec![(tree.root(), 0usize)];
        while let Some((v, parent)) = stack.pop() {
            let Label::Element(name) = tree.label(v) else {
                continue;
            };
            let id = b.add(parent, Edge::Child, PatternLabel::Name(name.clone()));
            if v == t.mark {
                mark = id;
            }
            for c in tree.children(v).iter().rev() {
                stack.push((*c, id));
            }
        }
        Ok(b.finish(mark))
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Number of nodes other than the document node.
    pub fn size(&self) -> usize {
        self.labels.len() - 1
    }

    pub fn mark(&self) -> usize {
        self.mark
    }

    pub fn label(&self, v: usize) -> &PatternLabel {
        &self.labels[v]
    }

    pub fn parent(&self, v: usize) -> Option<(usize, Edge)> {
        self.parents[v]
    }

    pub fn children(&self, v: usize) -> &[usize] {
        &self.children[v]
    }

    /// Document node, then every spine node down to the mark.
    pub fn spine(&self) -> Vec<usize> {
        let mut out = vec![self.mark];
        let mut cur = self.mark;
        while let Some((p, _)) = self.parents[cur] {
            out.push(p);
            cur = p;
        }
        out.reverse();
        out
    }

    /// Nodes whose incoming edge is a descendant edge, in preorder.
    pub fn descendant_edges(&self) -> Vec<usize> {
        (1..self.len())
            .filter(|v| matches!(self.parents[*v], Some((_, Edge::Descendant))))
            .collect()
    }

    pub fn names(&self) -> BTreeSet<String> {
        self.labels
            .iter()
            .filter_map(|l| match l {
                PatternLabel::Name(n) => Some(n.clone()),
                _ => None,
            })
            .collect()
    }

    /// Longest chain of `*` nodes joined by child edges.
    pub fn star_length(&self) -> usize {
        let mut run = vec![0usize; self.len()];
        for v in 1..self.len() {
            if self.labels[v] != PatternLabel::Star {
                continue;
            }
            run[v] = 1 + match self.parents[v] {
                Some((p, Edge::Child)) if self.labels[p] == PatternLabel::Star => run[p],
                _ => 0,
            };
        }
        run.into_iter().max().unwrap_or(0)
    }

    /// Replaces the i-th descendant edge by `u[i]` intermediate `*` nodes
    /// joined with child edges; zero collapses it to a child edge.
    pub fn extend(&self, u: &[usize]) -> Result<TreePattern, PatternError> {
        let desc = self.descendant_edges();
        if desc.len() != u.len() {
            return Err(PatternError::ArityMismatch {
                expected: desc.len(),
                found: u.len(),
            });
        }
        let mut length = vec![0usize; self.len()];
        for (v, k) in desc.iter().zip(u) {
            length[*v] = *k;
        }
        let mut b = Builder::new();
        let mut image = vec![0usize; self.len()];
        for v in 1..self.len() {
            let (p, _) = self.parents[v].expect("non-document nodes have parents");
            let mut at = image[p];
            for _ in 0..length[v] {
                at = b.add(at, Edge::Child, PatternLabel::Star);
            }
            image[v] = b.add(at, Edge::Child, self.labels[v].clone());
        }
        // Preorder ids survive because children are visited in id order and
        // fillers are allocated just before the node they lead to.
        Ok(b.finish(image[self.mark]))
    }

    /// The marked tree obtained by reading `*` as `fresh`; the pattern must be
    /// free of descendant edges and have a single root element.
    pub fn instance(&self, fresh: &str) -> Result<MarkedTree, PatternError> {
        if !self.descendant_edges().is_empty() {
            return Err(PatternError::NotAPath("descendant edges remain".into()));
        }
        if self.children[0].len() != 1 {
            return Err(PatternError::NotAPath("expected a single root element".into()));
        }
        if self.names().contains(fresh) {
            return Err(PatternError::FreshCollision(fresh.to_string()));
        }
        let labels = (1..self.len())
            .map(|v| Label::Element(self.labels[v].instantiate(fresh)))
            .collect();
        let parents = (1..self.len())
            .map(|v| match self.parents[v] {
                Some((0, _)) => None,
                Some((p, _)) => Some(p - 1),
                None => unreachable!(),
            })
            .collect();
        let tree = Tree::from_parents(labels, parents).expect("patterns are trees");
        Ok(MarkedTree {
            tree,
            mark: NodeId::new(self.mark - 1),
        })
    }

    /// Every instance with extension lengths at most `k`, in odometer order.
    pub fn instances(&self, k: usize, fresh: &str) -> Result<Vec<MarkedTree>, PatternError> {
        let d = self.descendant_edges().len();
        let mut out = Vec::new();
        for u in Odometer::new(d, k) {
            out.push(self.extend(&u)?.instance(fresh)?);
        }
        Ok(out)
    }

    /// Whether an embedding maps the pattern into `t` with the mark on `t.mark`.
    pub fn matches(&self, t: &MarkedTree) -> bool {
        let host = Host::new(&t.tree);
        self.embeds_at(&host, Some(t.mark.index()))
    }

    /// Nodes of `t` onto which some embedding maps the mark.
    pub fn select(&self, t: &Tree) -> NodeSet {
        let host = Host::new(t);
        let mut out = NodeSet::empty(t.len());
        for v in t.nodes() {
            if self.embeds_at(&host, Some(v.index())) {
                out.insert(v);
            }
        }
        out
    }

    fn embeds_at(&self, host: &Host<'_>, mark: Option<usize>) -> bool {
        let mut can: Vec<NodeSet> = vec![NodeSet::empty(host.len()); self.len()];
        for v in (0..self.len()).rev() {
            let mut set = host.accepting(&self.labels[v]);
            if let Some(m) = mark.filter(|_| v == self.mark) {
                set.intersect_with(&NodeSet::singleton(host.len(), NodeId::new(m)));
            }
            for &c in &self.children[v] {
                if set.is_empty() {
                    break;
                }
                let reach = match self.parents[c] {
                    Some((_, Edge::Child)) => host.parents_of(&can[c]),
                    _ => host.ancestors_of(&can[c]),
                };
                set.intersect_with(&reach);
            }
            can[v] = set;
        }
        can[0].contains(NodeId::new(host.doc))
    }

    /// Inverse of [`TreePattern::from_path`]: the spine becomes the path and
    /// side branches become filters.
    pub fn to_path(&self) -> Result<PathExpr, PatternError> {
        if self.children[0].len() != 1 {
            return Err(PatternError::NotAPath("expected a single root element".into()));
        }
        let spine = self.spine();
        let steps: Vec<Step> = spine[1..]
            .iter()
            .map(|&v| {
                let next = spine.iter().position(|x| *x == v).and_then(|i| spine.get(i + 1));
                let sides: Vec<FilterExpr> = self.children[v]
                    .iter()
                    .filter(|c| Some(*c) != next)
                    .map(|c| FilterExpr::Exists(self.branch_path(*c)))
                    .collect();
                self.step_at(v, sides)
            })
            .collect();
        Ok(PathExpr::from_steps(&steps).expect("spine is nonempty"))
    }

    fn step_at(&self, v: usize, filters: Vec<FilterExpr>) -> Step {
        let axis = match self.parents[v] {
            Some((_, Edge::Descendant)) => Axis::Descendant,
            _ => Axis::Child,
        };
        let test = match &self.labels[v] {
            PatternLabel::Name(n) => NodeTest::ElementName(n.clone()),
            _ => NodeTest::Wildcard,
        };
        let mut step = Step::new(axis, test);
        step.filters.extend(FilterExpr::conjoin(filters));
        step
    }

    /// A side branch as a relative path: a single child continues the path,
    /// several children become one conjunctive filter.
    fn branch_path(&self, v: usize) -> PathExpr {
        let mut steps = Vec::new();
        let mut cur = v;
        loop {
            let kids = &self.children[cur];
            if kids.len() == 1 {
                steps.push(self.step_at(cur, Vec::new()));
                cur = kids[0];
                continue;
            }
            let filters = kids
                .iter()
                .map(|c| FilterExpr::Exists(self.branch_path(*c)))
                .collect();
            steps.push(self.step_at(cur, filters));
            break;
        }
        PathExpr::from_steps(&steps).expect("nonempty")
    }
}

impl fmt::Display for TreePattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.to_path() {
            Ok(p) => write!(f, "{p}"),
            Err(_) => write!(f, "{self:?}"),
        }
    }
}

/// Converts a path to its pattern.
pub fn path_to_pattern(p: &PathExpr) -> Result<TreePattern, PatternError> {
    TreePattern::from_path(p)
}

pub fn pattern_to_path(p: &TreePattern) -> Result<PathExpr, PatternError> {
    p.to_path()
}

pub fn pattern_matches(p: &TreePattern, t: &MarkedTree) -> bool {
    p.matches(t)
}

pub fn extend(p: &TreePattern, u: &[usize]) -> Result<TreePattern, PatternError> {
    p.extend(u)
}

/// All canonical instances of `p` with extension lengths at most `k`.
pub fn canonical_instances(
    p: &PathExpr,
    k: usize,
    fresh: &str,
) -> Result<Vec<MarkedTree>, PatternError> {
    if crate::xpath::labels(p).contains(fresh) {
        return Err(PatternError::FreshCollision(fresh.to_string()));
    }
    TreePattern::from_path(p)?.instances(k, fresh)
}

/// The marked tree whose homomorphic images are exactly the common images
/// of `t1` and `t2`, or `None` when no tree is an image of both.
pub fn intersect_marked(t1: &MarkedTree, t2: &MarkedTree) -> Option<MarkedTree> {
    let s1 = t1.tree.ancestors_or_self(t1.mark);
    let s2 = t2.tree.ancestors_or_self(t2.mark);
    if s1.len() != s2.len()
        || s1
            .iter()
            .zip(&s2)
            .any(|(a, b)| t1.tree.label(*a) != t2.tree.label(*b))
    {
        return None;
    }
    let mut labels: Vec<Label> = s1.iter().map(|v| t1.tree.label(*v).clone()).collect();
    let mut parents: Vec<Option<usize>> = (0..s1.len()).map(|i| i.checked_sub(1)).collect();
    for (t, spine) in [(&t1.tree, &s1), (&t2.tree, &s2)] {
        for (depth, v) in spine.iter().enumerate() {
            let next = spine.get(depth + 1);
            for c in t.children(*v) {
                if Some(c) != next {
                    graft(t, *c, depth, &mut labels, &mut parents);
                }
            }
        }
    }
    let tree = Tree::from_parents(labels, parents).ok()?;
    let marked = MarkedTree {
        tree,
        mark: NodeId::new(s1.len() - 1),
    };
    Some(core(&marked))
}

/// The smallest marked tree with the same homomorphic images: side
/// subtrees are dropped while the original still maps into what remains.
pub fn core(t: &MarkedTree) -> MarkedTree {
    let mut cur = t.canonicalize();
    'shrink: loop {
        let spine = cur.tree.ancestors_or_self(cur.mark);
        for v in cur.tree.nodes() {
            if spine.contains(&v) {
                continue;
            }
            let mut keep = cur.tree.all_nodes();
            let mut stack = vec![v];
            while let Some(x) = stack.pop() {
                keep.remove(x);
                stack.extend(cur.tree.children(x));
            }
            let (smaller, old) = cur.tree.restrict(&keep).expect("closed under parents");
            let mark = NodeId::new(old.iter().position(|o| *o == cur.mark).expect("mark kept"));
            let candidate = MarkedTree { tree: smaller, mark };
            if has_marked_homomorphism(&cur, &candidate) {
                cur = candidate.canonicalize();
                continue 'shrink;
            }
        }
        return cur;
    }
}

/// Copies the subtree of `t` at `v` under `parent`.
pub(crate) fn graft(
    t: &Tree,
    v: NodeId,
    parent: usize,
    labels: &mut Vec<Label>,
    parents: &mut Vec<Option<usize>>,
) {
    let id = labels.len();
    labels.push(t.label(v).clone());
    parents.push(Some(parent));
    for c in t.children(v) {
        graft(t, *c, id, labels, parents);
    }
}

/// All vectors below per-coordinate bounds (inclusive), last coordinate
/// fastest.
pub struct Odometer {
    bounds: Vec<usize>,
    current: Option<Vec<usize>>,
}

impl Odometer {
    /// All vectors in `[0, k]^d`.
    pub fn new(d: usize, k: usize) -> Self {
        Odometer::with_bounds(vec![k; d])
    }

    pub fn with_bounds(bounds: Vec<usize>) -> Self {
        let current = Some(vec![0; bounds.len()]);
        Odometer { bounds, current }
    }
}

impl Iterator for Odometer {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        let out = self.current.clone()?;
        let cur = self.current.as_mut().expect("checked above");
        let mut i = cur.len();
        loop {
            if i == 0 {
                self.current = None;
                break;
            }
            i -= 1;
            if cur[i] < self.bounds[i] {
                cur[i] += 1;
                break;
            }
            cur[i] = 0;
        }
        Some(out)
    }
}

/// A tree seen from its virtual document node, which gets the last index.
pub(crate) struct Host<'t> {
    tree: &'t Tree,
    doc: usize,
    parent: Vec<Option<usize>>,
}

impl<'t> Host<'t> {
    pub(crate) fn new(tree: &'t Tree) -> Self {
        let doc = tree.len();
        let mut parent: Vec<Option<usize>> =
            tree.nodes().map(|v| tree.parent(v).map(NodeId::index)).collect();
        parent[tree.root().index()] = Some(doc);
        parent.push(None);
        Host { tree, doc, parent }
    }

    fn len(&self) -> usize {
        self.doc + 1
    }

    fn accepting(&self, label: &PatternLabel) -> NodeSet {
        let mut out = NodeSet::empty(self.len());
        if *label == PatternLabel::Doc {
            out.insert(NodeId::new(self.doc));
            return out;
        }
        for v in self.tree.nodes() {
            if label.accepts(Some(self.tree.label(v))) {
                out.insert(v);
            }
        }
        out
    }

    fn parents_of(&self, s: &NodeSet) -> NodeSet {
        let mut out = NodeSet::empty(self.len());
        for v in s.iter() {
            if let Some(p) = self.parent[v.index()] {
                out.insert(NodeId::new(p));
            }
        }
        out
    }

    fn ancestors_of(&self, s: &NodeSet) -> NodeSet {
        let mut out = NodeSet::empty(self.len());
        for v in s.iter() {
            let mut cur = self.parent[v.index()];
            while let Some(p) = cur {
                let id = NodeId::new(p);
                if out.contains(id) {
                    break;
                }
                out.insert(id);
                cur = self.parent[p];
            }
        }
        out
    }
}

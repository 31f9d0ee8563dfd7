//! The XML document model: unordered labeled trees with element, attribute
//! and text nodes, marked trees, homomorphisms and relabelings.

mod canonical;
mod hom;
mod term;

use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

use crate::nodeset::NodeSet;

pub use term::term_quote;
pub(crate) use term::scan_name;
pub use hom::{
    compose, has_marked_homomorphism, is_homomorphism, marked_homomorphisms, NodeMapping,
    Relabeling,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("syntax error at position {pos}: {message}")]
    Syntax { pos: usize, message: String },
    #[error("tree has no root")]
    NoRoot,
    #[error("tree has more than one root")]
    MultipleRoots,
    #[error("node {0} has more than one parent")]
    MultipleParents(usize),
    #[error("node {0} is not reachable from the root (cycle)")]
    Unreachable(usize),
    #[error("node {0} does not exist")]
    DanglingNode(usize),
    #[error("{kind} node {node} cannot have children")]
    NonLeaf { node: usize, kind: &'static str },
    #[error("element has two attributes named `{0}`")]
    DuplicateAttribute(String),
    #[error("node mapping is not total: expected {expected} entries, found {found}")]
    MappingNotTotal { expected: usize, found: usize },
    #[error("nodes {0} and {1} are not mergeable siblings")]
    NotMergeable(usize, usize),
}

/// Opaque node identifier, valid for the tree that produced it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(u32);

impl NodeId {
    pub fn new(index: usize) -> Self {
        NodeId(index as u32)
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Label {
    Element(String),
    Attribute { name: String, value: String },
    Text(String),
}

impl Label {
    pub fn element(name: impl Into<String>) -> Self {
        Label::Element(name.into())
    }

    pub fn attribute(name: impl Into<String>, value: impl Into<String>) -> Self {
        Label::Attribute {
            name: name.into(),
            value: value.into(),
        }
    }

    pub fn text(value: impl Into<String>) -> Self {
        Label::Text(value.into())
    }

    pub fn element_name(&self) -> Option<&str> {
        match self {
            Label::Element(name) => Some(name),
            _ => None,
        }
    }

    pub fn is_element(&self) -> bool {
        matches!(self, Label::Element(_))
    }

    fn kind_name(&self) -> &'static str {
        match self {
            Label::Element(_) => "element",
            Label::Attribute { .. } => "attribute",
            Label::Text(_) => "text",
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Label::Element(name) => f.write_str(name),
            Label::Attribute { name, value } => {
                write!(f, "@{name}=")?;
                term::write_quoted(f, value)
            }
            Label::Text(value) => term::write_quoted(f, value),
        }
    }
}

/// A rooted, unordered, labeled tree.
///
/// The stored child order is an artifact of construction; equality up to
/// reordering is decided through [`Tree::canonicalize`].
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Tree {
    labels: Vec<Label>,
    parents: Vec<Option<NodeId>>,
    children: Vec<Vec<NodeId>>,
    root: NodeId,
    /// Parents precede children.
    preorder: Vec<NodeId>,
}

impl Tree {
    pub fn leaf(label: Label) -> Self {
        Tree {
            labels: vec![label],
            parents: vec![None],
            children: vec![Vec::new()],
            root: NodeId(0),
            preorder: vec![NodeId(0)],
        }
    }

    /// Builds an element node over the given subtrees.
    pub fn element(name: impl Into<String>, children: Vec<Tree>) -> Result<Self, ModelError> {
        Tree::with_children(Label::Element(name.into()), children)
    }

    pub fn with_children(label: Label, subtrees: Vec<Tree>) -> Result<Self, ModelError> {
        let mut labels = vec![label];
        let mut parents = vec![None];
        for sub in subtrees {
            let offset = labels.len();
            for (i, l) in sub.labels.into_iter().enumerate() {
                labels.push(l);
                parents.push(match sub.parents[i] {
                    Some(p) => Some(p.index() + offset),
                    None => Some(0),
                });
            }
        }
        Tree::from_parents(labels, parents)
    }

    /// Builds a tree from a parent vector; exactly one entry must be `None`.
    pub fn from_parents(
        labels: Vec<Label>,
        parents: Vec<Option<usize>>,
    ) -> Result<Self, ModelError> {
        assert_eq!(labels.len(), parents.len(), "labels and parents differ in length");
        let n = labels.len();
        let mut root = None;
        let mut children = vec![Vec::new(); n];
        for (v, p) in parents.iter().enumerate() {
            match p {
                None if root.is_some() => return Err(ModelError::MultipleRoots),
                None => root = Some(NodeId::new(v)),
                Some(p) if *p >= n => return Err(ModelError::DanglingNode(*p)),
                Some(p) => children[*p].push(NodeId::new(v)),
            }
        }
        let root = root.ok_or(ModelError::NoRoot)?;
        let mut preorder = Vec::with_capacity(n);
        let mut stack = vec![root];
        while let Some(v) = stack.pop() {
            preorder.push(v);
            stack.extend(children[v.index()].iter().rev());
        }
        if preorder.len() != n {
            let reached: BTreeSet<NodeId> = preorder.iter().copied().collect();
            let missing = (0..n).find(|i| !reached.contains(&NodeId::new(*i))).unwrap_or(0);
            return Err(ModelError::Unreachable(missing));
        }
        for (v, kids) in children.iter().enumerate() {
            if !labels[v].is_element() && !kids.is_empty() {
                return Err(ModelError::NonLeaf {
                    node: v,
                    kind: labels[v].kind_name(),
                });
            }
            let mut seen = BTreeSet::new();
            for c in kids {
                if let Label::Attribute { name, .. } = &labels[c.index()] {
                    if !seen.insert(name.as_str()) {
                        return Err(ModelError::DuplicateAttribute(name.clone()));
                    }
                }
            }
        }
        Ok(Tree {
            labels,
            parents: parents.into_iter().map(|p| p.map(NodeId::new)).collect(),
            children,
            root,
            preorder,
        })
    }

    /// Builds a tree from an explicit edge list, rejecting multi-parent nodes
    /// and cycles.
    pub fn from_edges(
        labels: Vec<Label>,
        edges: &[(usize, usize)],
        root: usize,
    ) -> Result<Self, ModelError> {
        let n = labels.len();
        if root >= n {
            return Err(ModelError::DanglingNode(root));
        }
        let mut parents: Vec<Option<usize>> = vec![None; n];
        for &(p, c) in edges {
            if p >= n || c >= n {
                return Err(ModelError::DanglingNode(p.max(c)));
            }
            if parents[c].is_some() || c == root {
                return Err(ModelError::MultipleParents(c));
            }
            parents[c] = Some(p);
        }
        if let Some(orphan) = (0..n).find(|&v| v != root && parents[v].is_none()) {
            return Err(ModelError::Unreachable(orphan));
        }
        Tree::from_parents(labels, parents)
    }

    /// Parses the term syntax, e.g. `hospital(patients(patient(@wardNo="3")))`.
    pub fn parse(text: &str) -> Result<Self, ModelError> {
        term::parse_tree(text)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn root(&self) -> NodeId {
        self.root
    }

    pub fn label(&self, v: NodeId) -> &Label {
        &self.labels[v.index()]
    }

    pub fn parent(&self, v: NodeId) -> Option<NodeId> {
        self.parents[v.index()]
    }

    pub fn children(&self, v: NodeId) -> &[NodeId] {
        &self.children[v.index()]
    }

    pub fn contains_node(&self, v: NodeId) -> bool {
        v.index() < self.len()
    }

    /// Node ids in an order where every parent precedes its children.
    pub fn preorder(&self) -> &[NodeId] {
        &self.preorder
    }

    pub fn nodes(&self) -> impl Iterator<Item = NodeId> {
        (0..self.len()).map(NodeId::new)
    }

    pub fn all_nodes(&self) -> NodeSet {
        NodeSet::full(self.len())
    }

    pub fn depth(&self, v: NodeId) -> usize {
        let mut d = 0;
        let mut cur = v;
        while let Some(p) = self.parent(cur) {
            d += 1;
            cur = p;
        }
        d
    }

    pub fn height(&self) -> usize {
        self.nodes().map(|v| self.depth(v)).max().unwrap_or(0)
    }

    /// Nodes from the root down to `v`, inclusive.
    pub fn ancestors_or_self(&self, v: NodeId) -> Vec<NodeId> {
        let mut chain = vec![v];
        let mut cur = v;
        while let Some(p) = self.parent(cur) {
            chain.push(p);
            cur = p;
        }
        chain.reverse();
        chain
    }

    pub fn element_labels(&self) -> BTreeSet<String> {
        self.labels
            .iter()
            .filter_map(|l| l.element_name().map(str::to_owned))
            .collect()
    }

    pub fn leaves(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.nodes().filter(|v| self.children(*v).is_empty())
    }

    /// Returns a copy with a new leaf under `parent`; existing ids are kept.
    pub fn add_leaf(&self, parent: NodeId, label: Label) -> Result<(Tree, NodeId), ModelError> {
        if !self.contains_node(parent) {
            return Err(ModelError::DanglingNode(parent.index()));
        }
        let mut labels = self.labels.clone();
        let mut parents: Vec<Option<usize>> =
            self.parents.iter().map(|p| p.map(NodeId::index)).collect();
        labels.push(label);
        parents.push(Some(parent.index()));
        let leaf = NodeId::new(labels.len() - 1);
        Ok((Tree::from_parents(labels, parents)?, leaf))
    }

    /// Keeps exactly the nodes in `keep`, which must be closed under parents.
    /// Returns the new tree and, for each new node, the old id it came from.
    pub fn restrict(&self, keep: &NodeSet) -> Result<(Tree, Vec<NodeId>), ModelError> {
        let old_of_new: Vec<NodeId> = self.nodes().filter(|v| keep.contains(*v)).collect();
        let mut new_of_old = vec![None; self.len()];
        for (new, old) in old_of_new.iter().enumerate() {
            new_of_old[old.index()] = Some(new);
        }
        let mut labels = Vec::with_capacity(old_of_new.len());
        let mut parents = Vec::with_capacity(old_of_new.len());
        for &old in &old_of_new {
            labels.push(self.label(old).clone());
            let parent = match self.parent(old) {
                None => None,
                Some(p) => Some(new_of_old[p.index()].ok_or(ModelError::Unreachable(old.index()))?),
            };
            parents.push(parent);
        }
        Ok((Tree::from_parents(labels, parents)?, old_of_new))
    }

    /// Merges sibling `absorbed` into sibling `kept` (same label), moving the
    /// children of `absorbed` under `kept`. The returned mapping sends every
    /// old node to its image; it is a homomorphism from `self` to the result.
    pub fn merge_siblings(
        &self,
        kept: NodeId,
        absorbed: NodeId,
    ) -> Result<(Tree, NodeMapping), ModelError> {
        let mergeable = kept != absorbed
            && self.contains_node(kept)
            && self.contains_node(absorbed)
            && self.parent(kept).is_some()
            && self.parent(kept) == self.parent(absorbed)
            && self.label(kept) == self.label(absorbed);
        if !mergeable {
            return Err(ModelError::NotMergeable(kept.index(), absorbed.index()));
        }
        let mut new_of_old = vec![0usize; self.len()];
        let mut next = 0;
        for v in self.nodes() {
            if v != absorbed {
                new_of_old[v.index()] = next;
                next += 1;
            }
        }
        new_of_old[absorbed.index()] = new_of_old[kept.index()];
        let mut labels = Vec::with_capacity(next);
        let mut parents = Vec::with_capacity(next);
        for v in self.nodes().filter(|v| *v != absorbed) {
            labels.push(self.label(v).clone());
            parents.push(self.parent(v).map(|p| new_of_old[p.index()]));
        }
        let tree = Tree::from_parents(labels, parents)?;
        let map = NodeMapping::new(new_of_old.into_iter().map(NodeId::new).collect());
        Ok((tree, map))
    }

    /// A root-to-node address such as `/a/b[2]/@id`; sibling indices are
    /// 1-based among same-labeled siblings in stored order, so canonical trees
    /// yield canonical addresses.
    pub fn node_path(&self, v: NodeId) -> String {
        let mut out = String::new();
        for node in self.ancestors_or_self(v) {
            out.push('/');
            let label = self.label(node);
            match label {
                Label::Element(name) => out.push_str(name),
                Label::Attribute { name, .. } => {
                    out.push('@');
                    out.push_str(name);
                    continue;
                }
                Label::Text(_) => out.push_str("text()"),
            }
            if let Some(p) = self.parent(node) {
                let same = |c: &&NodeId| match (self.label(**c), label) {
                    (Label::Text(_), Label::Text(_)) => true,
                    (a, b) => a == b,
                };
                let index = self
                    .children(p)
                    .iter()
                    .filter(same)
                    .position(|c| *c == node)
                    .map_or(1, |i| i + 1);
                out.push_str(&format!("[{index}]"));
            }
        }
        out
    }

    /// Resolves an address produced by [`Tree::node_path`].
    pub fn resolve_node_path(&self, path: &str) -> Option<NodeId> {
        let mut segments = path.strip_prefix('/')?.split('/');
        let first = segments.next()?;
        if self.label(self.root).element_name() != Some(first) {
            return None;
        }
        let mut cur = self.root;
        for seg in segments {
            cur = self
                .children(cur)
                .iter()
                .copied()
                .find(|c| self.node_path(*c).rsplit('/').next() == Some(seg))?;
        }
        Some(cur)
    }
}

impl fmt::Display for Tree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn go(t: &Tree, v: NodeId, f: &mut fmt::Formatter<'_>) -> fmt::Result {
            write!(f, "{}", t.label(v))?;
            let kids = t.children(v);
            if !kids.is_empty() {
                f.write_str("(")?;
                for (i, c) in kids.iter().enumerate() {
                    if i > 0 {
                        f.write_str(",")?;
                    }
                    go(t, *c, f)?;
                }
                f.write_str(")")?;
            }
            Ok(())
        }
        go(self, self.root, f)
    }
}

/// A tree with one distinguished node.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MarkedTree {
    pub tree: Tree,
    pub mark: NodeId,
}

impl MarkedTree {
    pub fn new(tree: Tree, mark: NodeId) -> Result<Self, ModelError> {
        if !tree.contains_node(mark) {
            return Err(ModelError::DanglingNode(mark.index()));
        }
        Ok(MarkedTree { tree, mark })
    }

    pub fn at_root(tree: Tree) -> Self {
        let mark = tree.root();
        MarkedTree { tree, mark }
    }

    pub fn canonicalize(&self) -> MarkedTree {
        let (tree, map) = self.tree.canonicalize_with_map();
        MarkedTree {
            tree,
            mark: map.apply(self.mark),
        }
    }

    pub fn mark_path(&self) -> String {
        self.tree.node_path(self.mark)
    }
}

impl fmt::Display for MarkedTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} @ {}", self.tree, self.mark_path())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn from_edges_rejects_malformed_input() {
        let labels = || vec![Label::element("a"), Label::element("b"), Label::element("c")];
        assert_eq!(
            Tree::from_edges(labels(), &[(0, 1), (0, 2), (1, 2)], 0),
            Err(ModelError::MultipleParents(2))
        );
        assert_eq!(
            Tree::from_edges(labels(), &[(1, 2), (2, 1)], 0),
            Err(ModelError::Unreachable(1))
        );
        assert!(matches!(
            Tree::from_edges(labels(), &[(0, 1)], 0),
            Err(ModelError::Unreachable(2))
        ));
        assert!(Tree::from_edges(labels(), &[(0, 1), (1, 2)], 0).is_ok());
    }

    #[test]
    fn cycle_detached_from_root_is_unreachable() {
        let labels = vec![Label::element("a"), Label::element("b"), Label::element("c")];
        let err = Tree::from_parents(labels, vec![None, Some(2), Some(1)]).unwrap_err();
        assert_eq!(err, ModelError::Unreachable(1));
    }

    #[test]
    fn attribute_and_text_nodes_are_leaves() {
        let attr = Tree::leaf(Label::attribute("id", "1"));
        let bad = Tree::with_children(Label::attribute("x", "y"), vec![attr]);
        assert!(matches!(bad, Err(ModelError::NonLeaf { kind: "attribute", .. })));
        assert!(Tree::parse("a(\"t\"(b))").is_err());
    }

    #[test]
    fn duplicate_attribute_names_rejected() {
        assert_eq!(
            Tree::parse(r#"a(@id="1",@id="2")"#),
            Err(ModelError::DuplicateAttribute("id".into()))
        );
        assert!(Tree::parse(r#"a(@id="1",b(@id="2"))"#).is_ok());
    }

    #[test]
    fn node_paths_round_trip() {
        let t = Tree::parse(r#"a(b,b(c),@k="v","hello")"#).unwrap().canonicalize();
        for v in t.nodes() {
            let path = t.node_path(v);
            assert_eq!(t.resolve_node_path(&path), Some(v), "{path}");
        }
        let paths: Vec<String> = t.nodes().map(|v| t.node_path(v)).collect();
        assert!(paths.contains(&"/a/b[2]/c[1]".to_string()), "{paths:?}");
        assert!(paths.contains(&"/a/@k".to_string()));
        assert!(paths.contains(&"/a/text()[1]".to_string()));
    }

    #[test]
    fn merge_and_restrict() {
        let t = Tree::parse("a(b(c),b(d))").unwrap();
        let b1 = t.children(t.root())[0];
        let b2 = t.children(t.root())[1];
        let (merged, map) = t.merge_siblings(b1, b2).unwrap();
        assert_eq!(merged.canonicalize().to_string(), "a(b(c,d))");
        assert!(is_homomorphism(&t, &merged, &map).unwrap());

        let mut keep = NodeSet::empty(t.len());
        keep.insert(t.root());
        keep.insert(b1);
        let (small, back) = t.restrict(&keep).unwrap();
        assert_eq!(small.to_string(), "a(b)");
        assert_eq!(back, vec![t.root(), b1]);
    }
}

use std::collections::{BTreeMap, BTreeSet};

use super::{Label, MarkedTree, ModelError, NodeId, Tree};

/// A total map from the nodes of one tree to the nodes of another.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct NodeMapping {
    map: Vec<NodeId>,
}

impl NodeMapping {
    pub fn new(map: Vec<NodeId>) -> Self {
        NodeMapping { map }
    }

    pub fn identity(len: usize) -> Self {
        NodeMapping::new((0..len).map(NodeId::new).collect())
    }

    pub fn apply(&self, v: NodeId) -> NodeId {
        self.map[v.index()]
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn pairs(&self) -> impl Iterator<Item = (NodeId, NodeId)> + '_ {
        self.map
            .iter()
            .enumerate()
            .map(|(i, w)| (NodeId::new(i), *w))
    }
}

/// Checks the root, edge and label conditions of a tree homomorphism.
pub fn is_homomorphism(src: &Tree, dst: &Tree, h: &NodeMapping) -> Result<bool, ModelError> {
    if h.len() != src.len() {
        return Err(ModelError::MappingNotTotal {
            expected: src.len(),
            found: h.len(),
        });
    }
    if h.map.iter().any(|w| !dst.contains_node(*w)) {
        return Ok(false);
    }
    if h.apply(src.root()) != dst.root() {
        return Ok(false);
    }
    let ok = src.nodes().all(|v| {
        let w = h.apply(v);
        src.label(v) == dst.label(w)
            && src
                .parent(v)
                .map_or(true, |p| dst.parent(w) == Some(h.apply(p)))
    });
    Ok(ok)
}

/// Ancestor of `m` at every depth, indexed by depth.
fn spine(t: &Tree, m: NodeId) -> Vec<NodeId> {
    t.ancestors_or_self(m)
}

/// All homomorphisms `src -> dst` sending mark to mark, in lexicographic
/// order of their image vectors (over source preorder).
pub fn marked_homomorphisms(src: &MarkedTree, dst: &MarkedTree) -> Vec<NodeMapping> {
    let (s, d) = (&src.tree, &dst.tree);
    let src_spine = spine(s, src.mark);
    let dst_spine = spine(d, dst.mark);
    if src_spine.len() != dst_spine.len() {
        return Vec::new();
    }
    let mut forced: Vec<Option<NodeId>> = vec![None; s.len()];
    for (a, b) in src_spine.iter().zip(&dst_spine) {
        forced[a.index()] = Some(*b);
    }
    let order = s.preorder().to_vec();
    let mut current = vec![NodeId::new(0); s.len()];
    let mut out = Vec::new();
    fn go(
        i: usize,
        order: &[NodeId],
        s: &Tree,
        d: &Tree,
        forced: &[Option<NodeId>],
        current: &mut Vec<NodeId>,
        out: &mut Vec<NodeMapping>,
    ) {
        if i == order.len() {
            out.push(NodeMapping::new(current.clone()));
            return;
        }
        let v = order[i];
        let candidates: Vec<NodeId> = match s.parent(v) {
            None => vec![d.root()],
            Some(p) => d.children(current[p.index()]).to_vec(),
        };
        for w in candidates {
            if forced[v.index()].is_some_and(|f| f != w) || s.label(v) != d.label(w) {
                continue;
            }
            current[v.index()] = w;
            go(i + 1, order, s, d, forced, current, out);
        }
    }
    go(0, &order, s, d, &forced, &mut current, &mut out);
    out
}

/// Decides `dst ∈ ⟨src⟩` without enumerating mappings.
pub fn has_marked_homomorphism(src: &MarkedTree, dst: &MarkedTree) -> bool {
    let (s, d) = (&src.tree, &dst.tree);
    let src_spine = spine(s, src.mark);
    let dst_spine = spine(d, dst.mark);
    if src_spine.len() != dst_spine.len() {
        return false;
    }
    let mut forced: Vec<Option<NodeId>> = vec![None; s.len()];
    for (a, b) in src_spine.iter().zip(&dst_spine) {
        forced[a.index()] = Some(*b);
    }
    // can[v][w]: subtree at v maps into subtree at w with v -> w.
    let mut can = vec![vec![false; d.len()]; s.len()];
    for v in s.preorder().iter().rev() {
        for w in d.nodes() {
            if forced[v.index()].is_some_and(|f| f != w) || s.label(*v) != d.label(w) {
                continue;
            }
            can[v.index()][w.index()] = s
                .children(*v)
                .iter()
                .all(|c| d.children(w).iter().any(|x| can[c.index()][x.index()]));
        }
    }
    can[s.root().index()][d.root().index()]
}

/// `compose(h2, h1)` is `v -> h2(h1(v))`.
pub fn compose(h2: &NodeMapping, h1: &NodeMapping) -> NodeMapping {
    NodeMapping::new(h1.map.iter().map(|w| h2.apply(*w)).collect())
}

/// A map on element names, identity outside its table.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Relabeling {
    table: BTreeMap<String, String>,
}

impl Relabeling {
    pub fn identity() -> Self {
        Relabeling::default()
    }

    pub fn from_pairs<I, A, B>(pairs: I) -> Self
    where
        I: IntoIterator<Item = (A, B)>,
        A: Into<String>,
        B: Into<String>,
    {
        Relabeling {
            table: pairs
                .into_iter()
                .map(|(a, b)| (a.into(), b.into()))
                .collect(),
        }
    }

    pub fn map_name<'a>(&'a self, name: &'a str) -> &'a str {
        self.table.get(name).map_or(name, String::as_str)
    }

    pub fn fixes(&self, names: &BTreeSet<String>) -> bool {
        names.iter().all(|n| self.map_name(n) == n)
    }

    pub fn apply(&self, t: &Tree) -> Tree {
        let labels = t
            .nodes()
            .map(|v| match t.label(v) {
                Label::Element(name) => Label::Element(self.map_name(name).to_string()),
                other => other.clone(),
            })
            .collect();
        let parents = t.nodes().map(|v| t.parent(v).map(NodeId::index)).collect();
        Tree::from_parents(labels, parents).expect("relabeling preserves shape")
    }
}

use std::cmp::Ordering;

use super::{Label, NodeId, NodeMapping, Tree};

impl Tree {
    /// Reorders children by (label, canonical subtree term). Two trees are
    /// isomorphic as unordered trees iff their canonical forms are equal.
    pub fn canonicalize(&self) -> Tree {
        self.canonicalize_with_map().0
    }

    /// Like [`Tree::canonicalize`], also returning the old-to-new node map.
    pub fn canonicalize_with_map(&self) -> (Tree, NodeMapping) {
        let keys = self.subtree_terms();
        let mut sorted_children: Vec<Vec<NodeId>> = Vec::with_capacity(self.len());
        for v in self.nodes() {
            let mut kids = self.children(v).to_vec();
            kids.sort_by(|x, y| compare(self, &keys, *x, *y));
            sorted_children.push(kids);
        }
        let mut labels = Vec::with_capacity(self.len());
        let mut parents = Vec::with_capacity(self.len());
        let mut new_of_old = vec![NodeId::new(0); self.len()];
        let mut stack = vec![(self.root(), None)];
        while let Some((v, parent)) = stack.pop() {
            let id = labels.len();
            new_of_old[v.index()] = NodeId::new(id);
            labels.push(self.label(v).clone());
            parents.push(parent);
            for c in sorted_children[v.index()].iter().rev() {
                stack.push((*c, Some(id)));
            }
        }
        let tree = Tree::from_parents(labels, parents).expect("reordering preserves shape");
        (tree, NodeMapping::new(new_of_old))
    }

    pub fn is_canonical(&self) -> bool {
        let keys = self.subtree_terms();
        let ids_in_preorder = self
            .preorder()
            .iter()
            .enumerate()
            .all(|(i, v)| v.index() == i);
        ids_in_preorder
            && self.nodes().all(|v| {
                self.children(v)
                    .windows(2)
                    .all(|w| compare(self, &keys, w[0], w[1]) != Ordering::Greater)
            })
    }

    /// Canonical term of every subtree, indexed by node.
    fn subtree_terms(&self) -> Vec<String> {
        let mut terms = vec![String::new(); self.len()];
        for v in self.preorder().iter().rev() {
            let mut kids: Vec<NodeId> = self.children(*v).to_vec();
            kids.sort_by(|x, y| compare(self, &terms, *x, *y));
            let mut term = self.label(*v).to_string();
            if !kids.is_empty() {
                term.push('(');
                for (i, c) in kids.iter().enumerate() {
                    if i > 0 {
                        term.push(',');
                    }
                    term.push_str(&terms[c.index()]);
                }
                term.push(')');
            }
            terms[v.index()] = term;
        }
        terms
    }
}

fn compare(t: &Tree, terms: &[String], x: NodeId, y: NodeId) -> Ordering {
    let lx: &Label = t.label(x);
    lx.cmp(t.label(y))
        .then_with(|| terms[x.index()].cmp(&terms[y.index()]))
}

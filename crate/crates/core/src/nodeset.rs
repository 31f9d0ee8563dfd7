//! Dense bitsets over the nodes of a single tree.

use smallvec::SmallVec;
use std::fmt;

use crate::tree::NodeId;

/// A set of node ids drawn from `0..universe`.
///
/// All binary operations require both operands to share the same universe.
#[derive(Clone, PartialEq, Eq, Hash, Default)]
pub struct NodeSet {
    universe: usize,
    words: SmallVec<[u64; 2]>,
}

impl NodeSet {
    pub fn empty(universe: usize) -> Self {
        let words = SmallVec::from_elem(0, universe.div_ceil(64));
        NodeSet { universe, words }
    }

    pub fn full(universe: usize) -> Self {
        let mut set = NodeSet::empty(universe);
        for (i, word) in set.words.iter_mut().enumerate() {
            let remaining = universe - i * 64;
            *word = if remaining >= 64 {
                u64::MAX
            } else {
                (1u64 << remaining) - 1
            };
        }
        set
    }

    pub fn singleton(universe: usize, node: NodeId) -> Self {
        let mut set = NodeSet::empty(universe);
        set.insert(node);
        set
    }

    pub fn universe(&self) -> usize {
        self.universe
    }

    pub fn insert(&mut self, node: NodeId) {
        let i = node.index();
        debug_assert!(i < self.universe);
        self.words[i / 64] |= 1 << (i % 64);
    }

    pub fn remove(&mut self, node: NodeId) {
        let i = node.index();
        self.words[i / 64] &= !(1 << (i % 64));
    }

    pub fn contains(&self, node: NodeId) -> bool {
        let i = node.index();
        i < self.universe && self.words[i / 64] & (1 << (i % 64)) != 0
    }

    pub fn is_empty(&self) -> bool {
        self.words.iter().all(|w| *w == 0)
    }

    pub fn len(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn union_with(&mut self, other: &NodeSet) {
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a |= *b;
        }
    }

    pub fn intersect_with(&mut self, other: &NodeSet) {
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a &= *b;
        }
    }

    pub fn difference_with(&mut self, other: &NodeSet) {
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a &= !*b;
        }
    }

    pub fn is_subset(&self, other: &NodeSet) -> bool {
        self.words
            .iter()
            .zip(&other.words)
            .all(|(a, b)| a & !b == 0)
    }

    pub fn intersects(&self, other: &NodeSet) -> bool {
        self.words.iter().zip(&other.words).any(|(a, b)| a & b != 0)
    }

    pub fn iter(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.words.iter().enumerate().flat_map(|(i, &word)| {
            let mut w = word;
            std::iter::from_fn(move || {
                if w == 0 {
                    return None;
                }
                let bit = w.trailing_zeros() as usize;
                w &= w - 1;
                Some(NodeId::new(i * 64 + bit))
            })
        })
    }

    /// The low 64 members as a bitmask; used by table-driven oracles on small trees.
    pub fn low_word(&self) -> u64 {
        self.words.first().copied().unwrap_or(0)
    }
}

impl fmt::Debug for NodeSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter().map(|n| n.index())).finish()
    }
}

impl FromIterator<NodeId> for NodeSet {
    /// Collects into a set whose universe is one past the largest member.
    fn from_iter<I: IntoIterator<Item = NodeId>>(iter: I) -> Self {
        let nodes: Vec<NodeId> = iter.into_iter().collect();
        let universe = nodes.iter().map(|n| n.index() + 1).max().unwrap_or(0);
        let mut set = NodeSet::empty(universe);
        for n in nodes {
            set.insert(n);
        }
        set
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_respects_universe() {
        for n in [0, 1, 5, 63, 64, 65, 130] {
            let set = NodeSet::full(n);
            assert_eq!(set.len(), n);
            assert!(!set.contains(NodeId::new(n)));
        }
    }

    #[test]
    fn set_algebra() {
        let mut a = NodeSet::empty(70);
        a.insert(NodeId::new(1));
        a.insert(NodeId::new(66));
        let mut b = NodeSet::singleton(70, NodeId::new(66));
        assert!(b.is_subset(&a));
        assert!(a.intersects(&b));
        b.union_with(&a);
        assert_eq!(b.iter().map(|n| n.index()).collect::<Vec<_>>(), vec![1, 66]);
        b.difference_with(&NodeSet::singleton(70, NodeId::new(1)));
        assert_eq!(b.len(), 1);
        b.remove(NodeId::new(66));
        assert!(b.is_empty());
    }
}

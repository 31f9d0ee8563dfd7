//! Brute-force ground truth over all small trees: enumeration, containment
//! by exhaustion, materialized allowed sets, and homomorphism closure.
//!
//! Nothing here uses patterns, canonical instances or the fairness search;
//! everything is evaluation on concrete trees.

use std::collections::{BTreeSet, HashMap};

use crate::policy::{OpKind, Policy, Sign, UpdateCapability, UpdateKey};
use crate::tree::{Label, MarkedTree, NodeId, NodeMapping, Tree};
use crate::xpath::{eval, test_matches, Axis, Evaluator, FilterExpr, NodeTest, PathExpr, Step as XStep};

/// Bounds for enumeration. `max_depth` counts edges from the root.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EnumSpec {
    pub alphabet: BTreeSet<String>,
    pub max_nodes: usize,
    pub max_depth: Option<usize>,
}

impl EnumSpec {
    pub fn new<I, S>(alphabet: I, max_nodes: usize) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        EnumSpec {
            alphabet: alphabet.into_iter().map(Into::into).collect(),
            max_nodes,
            max_depth: None,
        }
    }
}

/// Every canonical element tree within the bounds, once each, by ascending
/// node count and then by rendering.
pub fn enumerate_trees(spec: &EnumSpec) -> impl Iterator<Item = Tree> {
    generate(spec).into_iter().map(|e| e.tree)
}

struct Entry {
    tree: Tree,
    size: usize,
    height: usize,
}

fn generate(spec: &EnumSpec) -> Vec<Entry> {
    let mut all: Vec<Entry> = Vec::new();
    let labels: Vec<&String> = spec.alphabet.iter().collect();
    for n in 1..=spec.max_nodes {
        let mut level: Vec<Entry> = Vec::new();
        // Subtrees may have height at most max_depth - 1.
        let usable: Vec<usize> = (0..all.len())
            .filter(|&i| spec.max_depth.map_or(true, |d| all[i].height < d))
            .collect();
        let mut forests = Vec::new();
        multisets(&all, &usable, n - 1, 0, &mut Vec::new(), &mut forests);
        for forest in &forests {
            let height = forest.iter().map(|&i| all[i].height + 1).max().unwrap_or(0);
            for l in &labels {
                let kids: Vec<Tree> = forest.iter().map(|&i| all[i].tree.clone()).collect();
                let tree = Tree::with_children(Label::element((*l).clone()), kids)
                    .expect("element children")
                    .canonicalize();
                level.push(Entry {
                    tree,
                    size: n,
                    height,
                });
            }
        }
        level.sort_by_cached_key(|e| e.tree.to_string());
        all.extend(level);
    }
    all
}

/// Multisets of entries (as nondecreasing positions into `usable`) whose
/// sizes sum to `remaining`.
fn multisets(
    all: &[Entry],
    usable: &[usize],
    remaining: usize,
    from: usize,
    cur: &mut Vec<usize>,
    out: &mut Vec<Vec<usize>>,
) {
    if remaining == 0 {
        out.push(cur.clone());
        return;
    }
    for k in from..usable.len() {
        let i = usable[k];
        if all[i].size > remaining {
            break;
        }
        cur.push(i);
        multisets(all, usable, remaining - all[i].size, k, cur, out);
        cur.pop();
    }
}

/// Every path over `alphabet` in the child/descendant/wildcard/filter
/// fragment with at most `max_steps` steps in total, filters included.
/// Each step carries at most one filter, a conjunction of relative paths in
/// nondecreasing order, so equivalent spellings are produced once. Sorted by
/// step count, then by rendering.
pub fn enumerate_paths(alphabet: &BTreeSet<String>, max_steps: usize) -> Vec<PathExpr> {
    let mut tests: Vec<NodeTest> = alphabet.iter().map(|a| NodeTest::element(a.clone())).collect();
    tests.push(NodeTest::Wildcard);
    let seqs = sequences(&tests, max_steps);
    let mut out: Vec<(usize, String, PathExpr)> = seqs
        .into_iter()
        .map(|(n, steps)| {
            let p = PathExpr::from_steps(&steps).expect("nonempty");
            (n, p.to_string(), p)
        })
        .collect();
    out.sort_by(|a, b| (a.0, &a.1).cmp(&(b.0, &b.1)));
    out.dedup_by(|a, b| a.1 == b.1);
    out.into_iter().map(|(_, _, p)| p).collect()
}

/// Nonempty step sequences of total size at most `max`, with sizes.
fn sequences(tests: &[NodeTest], max: usize) -> Vec<(usize, Vec<XStep>)> {
    let mut out = Vec::new();
    for (n, step) in single_steps(tests, max) {
        out.push((n, vec![step.clone()]));
        for (m, rest) in sequences(tests, max - n) {
            let mut v = vec![step.clone()];
            v.extend(rest);
            out.push((n + m, v));
        }
    }
    out
}

fn single_steps(tests: &[NodeTest], max: usize) -> Vec<(usize, XStep)> {
    if max == 0 {
        return Vec::new();
    }
    let mut out = Vec::new();
    let relative = sequences(tests, max - 1);
    let mut conjunctions: Vec<(usize, Vec<usize>)> = Vec::new();
    conjunction_sets(&relative, max - 1, 0, &mut Vec::new(), 0, &mut conjunctions);
    for axis in [Axis::Child, Axis::Descendant] {
        for test in tests {
            let bare = XStep::new(axis, test.clone());
            out.push((1, bare.clone()));
            for (size, parts) in &conjunctions {
                let conj = parts
                    .iter()
                    .map(|&i| {
                        FilterExpr::Exists(PathExpr::from_steps(&relative[i].1).expect("nonempty"))
                    })
                    .collect();
                let mut s = bare.clone();
                s.filters.extend(FilterExpr::conjoin(conj));
                out.push((1 + size, s));
            }
        }
    }
    out
}

fn conjunction_sets(
    relative: &[(usize, Vec<XStep>)],
    budget: usize,
    from: usize,
    cur: &mut Vec<usize>,
    size: usize,
    out: &mut Vec<(usize, Vec<usize>)>,
) {
    for i in from..relative.len() {
        let n = relative[i].0;
        if size + n > budget {
            continue;
        }
        cur.push(i);
        out.push((size + n, cur.clone()));
        conjunction_sets(relative, budget, i, cur, size + n, out);
        cur.pop();
    }
}

/// Bounded containment: no node of any tree within `spec` is selected by
/// `p` and not by `q`.
pub fn oracle_contains(p: &PathExpr, q: &PathExpr, spec: &EnumSpec) -> bool {
    oracle_containment_witness(p, q, spec).is_none()
}

pub fn oracle_containment_witness(p: &PathExpr, q: &PathExpr, spec: &EnumSpec) -> Option<MarkedTree> {
    enumerate_trees(spec).find_map(|t| {
        let mut diff = eval(p, &t);
        diff.difference_with(&eval(q, &t));
        let n = diff.iter().next()?;
        Some(MarkedTree { tree: t, mark: n })
    })
}

/// Selections of many paths over one fixed set of trees, as bitsets over
/// all (tree, node) pairs, for fast bulk comparison.
pub struct EvalTable {
    trees: Vec<Tree>,
    offsets: Vec<usize>,
    bits: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Selection(Vec<u64>);

impl Selection {
    pub fn is_subset(&self, other: &Selection) -> bool {
        self.0.iter().zip(&other.0).all(|(a, b)| a & !b == 0)
    }

    pub fn union(&self, other: &Selection) -> Selection {
        Selection(self.0.iter().zip(&other.0).map(|(a, b)| a | b).collect())
    }

    pub fn intersect(&self, other: &Selection) -> Selection {
        Selection(self.0.iter().zip(&other.0).map(|(a, b)| a & b).collect())
    }

    pub fn difference(&self, other: &Selection) -> Selection {
        Selection(self.0.iter().zip(&other.0).map(|(a, b)| a & !b).collect())
    }

    pub fn count(&self) -> usize {
        self.0.iter().map(|w| w.count_ones() as usize).sum()
    }
}

impl EvalTable {
    pub fn new(spec: &EnumSpec) -> Self {
        let trees: Vec<Tree> = enumerate_trees(spec).collect();
        let mut offsets = Vec::with_capacity(trees.len());
        let mut bits = 0;
        for t in &trees {
            offsets.push(bits);
            bits += t.len();
        }
        EvalTable {
            trees,
            offsets,
            bits,
        }
    }

    pub fn trees(&self) -> &[Tree] {
        &self.trees
    }

    /// Every (tree, node) pair.
    pub fn full(&self) -> Selection {
        let mut words = vec![u64::MAX; self.bits.div_ceil(64)];
        if self.bits % 64 != 0 {
            *words.last_mut().expect("nonempty") = (1u64 << (self.bits % 64)) - 1;
        }
        Selection(words)
    }

    pub fn empty(&self) -> Selection {
        Selection(vec![0; self.bits.div_ceil(64)])
    }

    pub fn select(&self, p: &PathExpr) -> Selection {
        let mut words = vec![0u64; self.bits.div_ceil(64)];
        for (t, off) in self.trees.iter().zip(&self.offsets) {
            for n in eval(p, t).iter() {
                let bit = off + n.index();
                words[bit / 64] |= 1 << (bit % 64);
            }
        }
        Selection(words)
    }

    /// The first (tree, node) in `a` but not in `b`.
    pub fn difference_witness(&self, a: &Selection, b: &Selection) -> Option<MarkedTree> {
        let (w, word) = a
            .0
            .iter()
            .zip(&b.0)
            .map(|(x, y)| x & !y)
            .enumerate()
            .find(|(_, d)| *d != 0)?;
        let bit = w * 64 + word.trailing_zeros() as usize;
        let i = self.offsets.partition_point(|o| *o <= bit) - 1;
        Some(MarkedTree {
            tree: self.trees[i].clone(),
            mark: NodeId::new(bit - self.offsets[i]),
        })
    }
}

/// Every allowed update on `t`, with payloads reduced to root labels drawn
/// from the policy's and the tree's element names plus text. Computed by
/// set algebra over the materialized rule instances.
pub fn oracle_allowed_set(p: &Policy, t: &Tree) -> BTreeSet<UpdateKey> {
    let mut names = p.labels();
    names.extend(t.element_labels());
    let roots: Vec<Label> = names
        .into_iter()
        .map(Label::Element)
        .chain(std::iter::once(Label::text("")))
        .collect();
    let mut universe = BTreeSet::new();
    for kind in OpKind::ALL {
        for n in t.nodes() {
            if kind.has_payload() {
                for r in &roots {
                    universe.insert(UpdateKey {
                        kind,
                        target: n,
                        root: Some(r.clone()),
                    });
                }
            } else {
                universe.insert(UpdateKey {
                    kind,
                    target: n,
                    root: None,
                });
            }
        }
    }
    let instances = |caps: &[UpdateCapability]| -> BTreeSet<UpdateKey> {
        universe
            .iter()
            .filter(|k| {
                caps.iter().any(|c| {
                    c.kind == k.kind
                        && eval(&c.path, t).contains(k.target)
                        && match (&c.test, &k.root) {
                            (None, _) => true,
                            (Some(test), Some(r)) => test_matches(test, r),
                            (Some(_), None) => false,
                        }
                })
            })
            .cloned()
            .collect()
    };
    let a = instances(&p.allowed);
    let d = instances(&p.denied);
    match (p.default, p.conflict) {
        (Sign::Allow, Sign::Allow) => {
            let d_minus_a: BTreeSet<_> = d.difference(&a).cloned().collect();
            universe.difference(&d_minus_a).cloned().collect()
        }
        (Sign::Deny, Sign::Allow) => a,
        (Sign::Allow, Sign::Deny) => universe.difference(&d).cloned().collect(),
        (Sign::Deny, Sign::Deny) => a.difference(&d).cloned().collect(),
    }
}

/// An elementary homomorphism that revokes permission: the update at
/// `from`'s mark is allowed, at `to`'s mark it is not.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClosureViolation {
    pub kind: OpKind,
    pub class: Option<Label>,
    pub from: MarkedTree,
    pub to: MarkedTree,
    pub mapping: NodeMapping,
}

struct Step {
    from: u32,
    to: u32,
    /// Offset into the flattened node maps; one entry per node of `from`.
    map: usize,
}

/// All trees within a spec together with every elementary homomorphism
/// between them: adding one leaf, or merging two same-labeled siblings.
/// Every marked homomorphism is a composite of such steps through trees no
/// larger than its endpoints, so a set is closed under homomorphic images
/// within the spec exactly when no elementary step leaves it.
pub struct ClosureTable {
    spec: EnumSpec,
    trees: Vec<Tree>,
    steps: Vec<Step>,
    maps: Vec<u32>,
}

impl ClosureTable {
    pub fn new(spec: &EnumSpec) -> Self {
        let entries = generate(spec);
        let index: HashMap<Tree, u32> = entries
            .iter()
            .enumerate()
            .map(|(i, e)| (e.tree.clone(), i as u32))
            .collect();
        let mut steps = Vec::new();
        let mut maps = Vec::new();
        let mut push = |from: usize, image: &Tree, h: &NodeMapping, maps: &mut Vec<u32>| {
            let (canon, m) = image.canonicalize_with_map();
            let Some(&to) = index.get(&canon) else {
                return;
            };
            steps.push(Step {
                from: from as u32,
                to,
                map: maps.len(),
            });
            maps.extend(h.pairs().map(|(_, v)| m.apply(v).index() as u32));
        };
        for (i, e) in entries.iter().enumerate() {
            let t = &e.tree;
            if e.size < spec.max_nodes {
                for v in t.nodes() {
                    for l in &spec.alphabet {
                        let (bigger, _) = t.add_leaf(v, Label::element(l.clone())).expect("node exists");
                        push(i, &bigger, &NodeMapping::identity(t.len()), &mut maps);
                    }
                }
            }
            for v in t.nodes() {
                let kids = t.children(v);
                for (k, &x) in kids.iter().enumerate() {
                    for &y in &kids[k + 1..] {
                        if t.label(x) == t.label(y) {
                            let (merged, h) = t.merge_siblings(x, y).expect("same-label siblings");
                            push(i, &merged, &h, &mut maps);
                        }
                    }
                }
            }
        }
        ClosureTable {
            spec: spec.clone(),
            trees: entries.into_iter().map(|e| e.tree).collect(),
            steps,
            maps,
        }
    }

    pub fn spec(&self) -> &EnumSpec {
        &self.spec
    }

    pub fn tree_count(&self) -> usize {
        self.trees.len()
    }

    pub fn step_count(&self) -> usize {
        self.steps.len()
    }

    /// The first violation in (tree, step) order, over every kind and every
    /// payload root label in the alphabet, the policy's tests and text.
    /// Kinds without rules have a constant allowed set and are skipped.
    pub fn check(&self, p: &Policy) -> Option<ClosureViolation> {
        for kind in OpKind::ALL {
            if !p.allowed.iter().chain(&p.denied).any(|c| c.kind == kind) {
                continue;
            }
            for class in self.classes(p, kind) {
                if let Some(v) = self.check_slice(p, kind, class) {
                    return Some(v);
                }
            }
        }
        None
    }

    fn classes(&self, p: &Policy, kind: OpKind) -> Vec<Option<Label>> {
        if !kind.has_payload() {
            return vec![None];
        }
        let mut names = self.spec.alphabet.clone();
        for c in p.allowed.iter().chain(&p.denied) {
            if let Some(NodeTest::ElementName(n)) = &c.test {
                names.insert(n.clone());
            }
        }
        names
            .into_iter()
            .map(|n| Some(Label::Element(n)))
            .chain(std::iter::once(Some(Label::text(""))))
            .collect()
    }

    fn allowed_masks(&self, p: &Policy, kind: OpKind, class: &Option<Label>) -> Vec<u64> {
        let relevant = |caps: &[UpdateCapability]| -> Vec<PathExpr> {
            caps.iter()
                .filter(|c| {
                    c.kind == kind
                        && match (&c.test, class) {
                            (None, _) => true,
                            (Some(t), Some(l)) => test_matches(t, l),
                            (Some(_), None) => false,
                        }
                })
                .map(|c| c.path.clone())
                .collect()
        };
        let a_paths = relevant(&p.allowed);
        let d_paths = relevant(&p.denied);
        self.trees
            .iter()
            .map(|t| {
                let ev = Evaluator::new(t);
                let mask = |ps: &[PathExpr]| ps.iter().fold(0u64, |m, q| m | ev.eval(q).low_word());
                let all = if t.len() == 64 { u64::MAX } else { (1u64 << t.len()) - 1 };
                let (a, d) = (mask(&a_paths), mask(&d_paths));
                match (p.default, p.conflict) {
                    (Sign::Allow, Sign::Allow) => all & !(d & !a),
                    (Sign::Deny, Sign::Allow) => a,
                    (Sign::Allow, Sign::Deny) => all & !d,
                    (Sign::Deny, Sign::Deny) => a & !d,
                }
            })
            .collect()
    }

    fn check_slice(&self, p: &Policy, kind: OpKind, class: Option<Label>) -> Option<ClosureViolation> {
        let allowed = self.allowed_masks(p, kind, &class);
        for s in &self.steps {
            let (from, to) = (s.from as usize, s.to as usize);
            let mut bits = allowed[from];
            while bits != 0 {
                let n = bits.trailing_zeros() as usize;
                bits &= bits - 1;
                let image = self.maps[s.map + n] as usize;
                if allowed[to] & (1 << image) == 0 {
                    let len = self.trees[from].len();
                    let mapping = NodeMapping::new(
                        self.maps[s.map..s.map + len]
                            .iter()
                            .map(|v| NodeId::new(*v as usize))
                            .collect(),
                    );
                    return Some(ClosureViolation {
                        kind,
                        class,
                        from: MarkedTree {
                            tree: self.trees[from].clone(),
                            mark: NodeId::new(n),
                        },
                        to: MarkedTree {
                            tree: self.trees[to].clone(),
                            mark: NodeId::new(image),
                        },
                        mapping,
                    });
                }
            }
        }
        None
    }
}

/// Whether the policy's allowed sets are closed under marked homomorphic
/// images among the trees within `spec`, with a violation if not.
pub fn oracle_hom_closed(p: &Policy, spec: &EnumSpec) -> (bool, Option<ClosureViolation>) {
    let v = ClosureTable::new(spec).check(p);
    (v.is_none(), v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tree::{is_homomorphism, Tree};
    use crate::xpath::parse_path;

    fn strings(spec: &EnumSpec) -> Vec<String> {
        enumerate_trees(spec).map(|t| t.to_string()).collect()
    }

    /// Rooted unordered trees counted by the Euler transform recurrence,
    /// times label choices per node.
    fn count_trees(labels: u64, n: usize) -> u64 {
        let mut r = vec![0u64; n + 1];
        r[1] = labels;
        for m in 1..n {
            // r[m+1] = 1/m * sum_{k=1..m} (sum_{d|k} d r[d]) r[m-k+1]
            let mut s = 0;
            for k in 1..=m {
                let c: u64 = (1..=k).filter(|d| k % d == 0).map(|d| d as u64 * r[d]).sum();
                s += c * r[m - k + 1];
            }
            r[m + 1] = s / m as u64;
        }
        r[1..].iter().sum()
    }

    #[test]
    fn enumeration_counts() {
        assert_eq!(strings(&EnumSpec::new(["a"], 3)), ["a", "a(a)", "a(a(a))", "a(a,a)"]);
        assert_eq!(strings(&EnumSpec::new(["a", "b"], 1)), ["a", "b"]);
        for (labels, n) in [(1, 7), (2, 6), (3, 5)] {
            let alphabet: Vec<String> = ["a", "b", "c"][..labels].iter().map(|s| s.to_string()).collect();
            let trees: Vec<Tree> = enumerate_trees(&EnumSpec::new(alphabet, n)).collect();
            assert_eq!(trees.len() as u64, count_trees(labels as u64, n));
            let distinct: BTreeSet<String> = trees.iter().map(|t| t.to_string()).collect();
            assert_eq!(distinct.len(), trees.len());
            assert!(trees.iter().all(|t| t.is_canonical()));
            assert!(trees.windows(2).all(|w| w[0].len() <= w[1].len()));
        }
        let mut spec = EnumSpec::new(["a"], 4);
        spec.max_depth = Some(1);
        assert_eq!(strings(&spec), ["a", "a(a)", "a(a,a)", "a(a,a,a)"]);
    }

    #[test]
    fn path_enumeration() {
        let ab: BTreeSet<String> = ["a".to_string(), "b".to_string()].into();
        let one: Vec<String> = enumerate_paths(&ab, 1).iter().map(|p| p.to_string()).collect();
        assert_eq!(one, ["/*", "//*", "//a", "//b", "/a", "/b"]);
        // 6 single steps; 6*6 two-step spines and 6*6 one-filter steps.
        assert_eq!(enumerate_paths(&ab, 2).len(), 6 + 36 + 36);
        let three = enumerate_paths(&ab, 3);
        assert!(three.iter().all(|p| p.step_count() <= 3));
        for p in &three {
            assert_eq!(&crate::xpath::parse_path(&p.to_string()).unwrap(), p);
        }
    }

    #[test]
    fn bounded_containment() {
        let spec = EnumSpec::new(["a", "b", "z"], 4);
        let p = |s| parse_path(s).unwrap();
        assert!(!oracle_contains(&p("/a//b"), &p("/a/b"), &spec));
        assert!(oracle_contains(&p("/a//b"), &p("/a//b"), &spec));
        assert!(oracle_contains(&p("/a/b"), &p("//b"), &spec));
        let table = EvalTable::new(&spec);
        let (x, y) = (table.select(&p("/a//b")), table.select(&p("/a/b")));
        assert!(y.is_subset(&x));
        let w = table.difference_witness(&x, &y).unwrap();
        assert_eq!(w.to_string(), "a(a(b)) @ /a/a[1]/b[1]");
        let full = table.full();
        let nodes: usize = table.trees().iter().map(Tree::len).sum();
        assert_eq!(full.count(), nodes);
        assert_eq!(full.difference(&x).count(), nodes - x.count());
        assert_eq!(x.intersect(&y), y);
        assert_eq!(table.empty().count(), 0);
    }

    #[test]
    fn allowed_sets() {
        let t = Tree::parse("a(b)").unwrap();
        let p = Policy::parse("default: allow\nconflict: deny\n- delete //*").unwrap();
        let s = oracle_allowed_set(&p, &t);
        assert!(s.iter().all(|k| k.kind != OpKind::Delete));
        // two nodes, payload roots {a, b, text} for insert and update
        assert_eq!(s.len(), 2 * 2 * 3);
        let p = Policy::parse("default: deny\nconflict: allow\n+ delete /a\n- delete //*").unwrap();
        let a = Tree::parse("a").unwrap();
        let s: Vec<String> = oracle_allowed_set(&p, &a).iter().map(|k| k.describe(&a)).collect();
        assert_eq!(s, ["delete /a"]);
        let ex1 = Policy::parse("default: deny\nconflict: deny\n+ delete /a\n- delete /a[b]").unwrap();
        assert!(oracle_allowed_set(&ex1, &t).is_empty());
    }

    #[test]
    fn closure() {
        let spec = EnumSpec::new(["a", "b"], 3);
        let ex1 = Policy::parse("default: deny\nconflict: deny\n+ delete /a\n- delete /a[b]").unwrap();
        let (closed, v) = oracle_hom_closed(&ex1, &spec);
        assert!(!closed);
        let v = v.unwrap();
        assert_eq!(v.from.to_string(), "a @ /a");
        assert_eq!(v.to.to_string(), "a(b) @ /a");
        assert!(is_homomorphism(&v.from.tree, &v.to.tree, &v.mapping).unwrap());
        let ff = Policy::parse("default: deny\nconflict: deny\n+ delete //a\n- delete //b").unwrap();
        assert!(oracle_hom_closed(&ff, &spec).0);
        let empty = Policy::parse("default: deny\nconflict: deny").unwrap();
        assert!(oracle_hom_closed(&empty, &spec).0);
    }
}

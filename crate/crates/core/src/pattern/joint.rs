//! Simultaneous instances of one or two patterns sharing a root-to-mark
//! chain. A run places chain nodes one at a time; at each node every
//! pattern either advances to its next spine node or waits inside a pending
//! descendant edge.

use std::collections::{HashMap, VecDeque};
use std::ops::ControlFlow;

use super::{Edge, Odometer, PatternLabel, TreePattern};
use crate::nodeset::NodeSet;
use crate::tree::{Label, MarkedTree, NodeId, Tree};

/// Which patterns advance at a chain node: bit `i` is pattern `i`.
/// Zero is a filler node that belongs to no spine.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Move(pub u8);

impl Move {
    pub fn advances(self, i: usize) -> bool {
        self.0 & (1 << i) != 0
    }

    pub fn is_filler(self) -> bool {
        self.0 == 0
    }
}

#[derive(Debug, Clone)]
pub struct JointSpec<'a> {
    pub patterns: Vec<&'a TreePattern>,
    /// Longest run of consecutive filler chain nodes.
    pub max_fill: usize,
    /// Per pattern: extension bound for descendant edges off the spine;
    /// zero collapses them to child edges.
    pub side_fill: Vec<usize>,
    pub fresh: String,
}

impl<'a> JointSpec<'a> {
    pub fn single(p: &'a TreePattern, max_fill: usize, side_fill: usize, fresh: &str) -> Self {
        JointSpec {
            patterns: vec![p],
            max_fill,
            side_fill: vec![side_fill],
            fresh: fresh.to_string(),
        }
    }

    pub fn pair(
        p: &'a TreePattern,
        q: &'a TreePattern,
        max_fill: usize,
        side_fill: [usize; 2],
        fresh: &str,
    ) -> Self {
        JointSpec {
            patterns: vec![p, q],
            max_fill,
            side_fill: side_fill.to_vec(),
            fresh: fresh.to_string(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct JointInstance {
    pub tree: MarkedTree,
    /// Per pattern: the chain plus that pattern's side branches. Each part is
    /// closed under parents and is itself an instance of its pattern.
    pub parts: Vec<NodeSet>,
    pub run: Vec<Move>,
}

impl JointInstance {
    /// The subtree induced by `parts[i]`, mark preserved.
    pub fn part_tree(&self, i: usize) -> MarkedTree {
        let (tree, old) = self.tree.tree.restrict(&self.parts[i]).expect("parts are closed");
        let mark = old.iter().position(|v| *v == self.tree.mark).expect("chain kept");
        MarkedTree {
            tree,
            mark: NodeId::new(mark),
        }
    }
}

struct Spine {
    nodes: Vec<usize>,
    /// `edges[j]` is the edge into `nodes[j]`; `edges[0]` is unused.
    edges: Vec<Edge>,
}

impl Spine {
    fn of(p: &TreePattern) -> Self {
        let nodes = p.spine();
        let edges = nodes
            .iter()
            .map(|v| p.parent(*v).map_or(Edge::Child, |(_, e)| e))
            .collect();
        Spine { nodes, edges }
    }

    fn last(&self) -> usize {
        self.nodes.len() - 1
    }
}

fn meet(a: Option<&PatternLabel>, b: &PatternLabel) -> Option<Option<PatternLabel>> {
    match (a, b) {
        (None, l) | (Some(PatternLabel::Star), l) => Some(Some(l.clone())),
        (Some(l), PatternLabel::Star) => Some(Some(l.clone())),
        (Some(x), y) if x == y => Some(Some(x.clone())),
        _ => None,
    }
}

/// Position of each pattern on its spine, and whether it advanced at the
/// most recent chain node.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
struct State {
    pos: Vec<usize>,
    fresh: Vec<bool>,
}

struct Product<'a> {
    patterns: &'a [&'a TreePattern],
    spines: Vec<Spine>,
}

impl<'a> Product<'a> {
    fn new(patterns: &'a [&'a TreePattern]) -> Self {
        Product {
            patterns,
            spines: patterns.iter().map(|p| Spine::of(p)).collect(),
        }
    }

    fn start(&self) -> State {
        State {
            pos: vec![0; self.patterns.len()],
            fresh: vec![true; self.patterns.len()],
        }
    }

    fn is_final(&self, s: &State) -> bool {
        s.pos.iter().zip(&self.spines).all(|(p, sp)| *p == sp.last())
    }

    /// Successor state and chain label (`None` meaning unconstrained) for a
    /// move, if the move is legal.
    fn step(&self, s: &State, m: Move) -> Option<(State, Option<PatternLabel>)> {
        let mut label: Option<PatternLabel> = None;
        let mut next = s.clone();
        for (i, spine) in self.spines.iter().enumerate() {
            let pos = s.pos[i];
            if pos == spine.last() {
                return None;
            }
            let edge = spine.edges[pos + 1];
            if m.advances(i) {
                if edge == Edge::Child && !s.fresh[i] {
                    return None;
                }
                let l = self.patterns[i].label(spine.nodes[pos + 1]);
                label = meet(label.as_ref(), l)?;
                next.pos[i] = pos + 1;
                next.fresh[i] = true;
            } else {
                if edge == Edge::Child {
                    return None;
                }
                next.fresh[i] = false;
            }
        }
        Some((next, label))
    }

    fn moves(&self) -> Vec<Move> {
        let k = self.patterns.len();
        (1..(1u8 << k)).rev().map(Move).collect()
    }
}

/// A shortest run that places every spine on one chain, if any exists.
/// Runs never need filler nodes, so none are produced.
pub fn spine_product(patterns: &[&TreePattern]) -> Option<Vec<Move>> {
    let prod = Product::new(patterns);
    let start = prod.start();
    let mut prev: HashMap<State, (State, Move)> = HashMap::new();
    let mut queue = VecDeque::from([start.clone()]);
    let moves = prod.moves();
    while let Some(s) = queue.pop_front() {
        if prod.is_final(&s) {
            let mut run = Vec::new();
            let mut cur = s;
            while cur != start {
                let (p, m) = prev[&cur].clone();
                run.push(m);
                cur = p;
            }
            run.reverse();
            return Some(run);
        }
        for &m in &moves {
            if let Some((n, _)) = prod.step(&s, m) {
                if n != start && !prev.contains_key(&n) {
                    prev.insert(n.clone(), (s.clone(), m));
                    queue.push_back(n);
                }
            }
        }
    }
    None
}

/// Every run with at most `max_fill` consecutive fillers, depth first with
/// advancing moves tried before fillers.
fn runs(spec: &JointSpec<'_>, prod: &Product<'_>) -> Vec<Vec<Move>> {
    let mut out = Vec::new();
    let mut run = Vec::new();
    let mut moves = prod.moves();
    moves.push(Move(0));
    fn go(
        prod: &Product<'_>,
        moves: &[Move],
        max_fill: usize,
        s: &State,
        fill: usize,
        run: &mut Vec<Move>,
        out: &mut Vec<Vec<Move>>,
    ) {
        if prod.is_final(s) {
            out.push(run.clone());
            return;
        }
        for &m in moves {
            if m.is_filler() && fill == max_fill {
                continue;
            }
            if let Some((n, _)) = prod.step(s, m) {
                run.push(m);
                let f = if m.is_filler() { fill + 1 } else { 0 };
                go(prod, moves, max_fill, &n, f, run, out);
                run.pop();
            }
        }
    }
    go(prod, &moves, spec.max_fill, &prod.start(), 0, &mut run, &mut out);
    out
}

/// Builds the chain for a run and attaches every pattern's side branches
/// with the given side extensions.
fn build(
    spec: &JointSpec<'_>,
    prod: &Product<'_>,
    run: &[Move],
    side_u: &[Vec<usize>],
) -> JointInstance {
    let mut labels: Vec<Label> = Vec::new();
    let mut parents: Vec<Option<usize>> = Vec::new();
    let mut owner: Vec<Option<usize>> = Vec::new();
    // Chain index (into `labels`) of each pattern's spine nodes; the
    // document node maps to `None`.
    let mut at: Vec<Vec<Option<usize>>> =
        prod.spines.iter().map(|s| vec![None; s.nodes.len()]).collect();
    let mut state = prod.start();
    for (i, &m) in run.iter().enumerate() {
        let (next, label) = prod.step(&state, m).expect("runs are legal");
        let name = label.map_or_else(|| spec.fresh.clone(), |l| l.instantiate(&spec.fresh));
        labels.push(Label::Element(name));
        parents.push(i.checked_sub(1));
        owner.push(None);
        for (k, pos) in next.pos.iter().enumerate() {
            if m.advances(k) {
                at[k][*pos] = Some(i);
            }
        }
        state = next;
    }
    let chain_len = labels.len();
    for (k, p) in prod.patterns.iter().enumerate() {
        let spine = &prod.spines[k];
        let mut u = side_u[k].iter().copied();
        let side_desc: Vec<usize> = p
            .descendant_edges()
            .into_iter()
            .filter(|v| !spine.nodes.contains(v))
            .collect();
        let mut length = vec![0usize; p.len()];
        for v in side_desc {
            length[v] = u.next().expect("one length per side edge");
        }
        for (j, &s) in spine.nodes.iter().enumerate() {
            let anchor = at[k][j];
            for &c in p.children(s) {
                if spine.nodes.get(j + 1) == Some(&c) {
                    continue;
                }
                let anchor = anchor.expect("document node has no side branches");
                attach(p, c, anchor, &length, &spec.fresh, k, &mut labels, &mut parents, &mut owner);
            }
        }
    }
    let tree = Tree::from_parents(labels, parents).expect("joint instances are trees");
    let parts = (0..prod.patterns.len())
        .map(|k| {
            let mut set = NodeSet::empty(tree.len());
            for (v, o) in owner.iter().enumerate() {
                if o.map_or(true, |o| o == k) {
                    set.insert(NodeId::new(v));
                }
            }
            set
        })
        .collect();
    JointInstance {
        tree: MarkedTree {
            tree,
            mark: NodeId::new(chain_len - 1),
        },
        parts,
        run: run.to_vec(),
    }
}

#[allow(clippy::too_many_arguments)]
fn attach(
    p: &TreePattern,
    v: usize,
    parent: usize,
    length: &[usize],
    fresh: &str,
    owner_id: usize,
    labels: &mut Vec<Label>,
    parents: &mut Vec<Option<usize>>,
    owner: &mut Vec<Option<usize>>,
) {
    let mut at = parent;
    for _ in 0..length[v] {
        labels.push(Label::Element(fresh.to_string()));
        parents.push(Some(at));
        owner.push(Some(owner_id));
        at = labels.len() - 1;
    }
    labels.push(Label::Element(p.label(v).instantiate(fresh)));
    parents.push(Some(at));
    owner.push(Some(owner_id));
    let id = labels.len() - 1;
    for &c in p.children(v) {
        attach(p, c, id, length, fresh, owner_id, labels, parents, owner);
    }
}

/// Visits every joint instance: all runs, then every combination of side
/// extensions, patterns' side vectors varying in odometer order.
pub fn for_each_joint_instance<F>(spec: &JointSpec<'_>, mut f: F) -> ControlFlow<()>
where
    F: FnMut(JointInstance) -> ControlFlow<()>,
{
    let prod = Product::new(&spec.patterns);
    let side_counts: Vec<usize> = prod
        .patterns
        .iter()
        .zip(&prod.spines)
        .map(|(p, s)| {
            p.descendant_edges()
                .iter()
                .filter(|v| !s.nodes.contains(v))
                .count()
        })
        .collect();
    for run in runs(spec, &prod) {
        let bounds: Vec<usize> = side_counts
            .iter()
            .zip(&spec.side_fill)
            .flat_map(|(n, b)| std::iter::repeat(*b).take(*n))
            .collect();
        for flat in Odometer::with_bounds(bounds) {
            let mut split = Vec::new();
            let mut rest = flat.as_slice();
            for n in &side_counts {
                let (head, tail) = rest.split_at(*n);
                split.push(head.to_vec());
                rest = tail;
            }
            f(build(spec, &prod, &run, &split))?;
        }
    }
    ControlFlow::Continue(())
}

/// The instance of a run from [`spine_product`], side branches collapsed.
pub fn run_instance(patterns: &[&TreePattern], run: &[Move], fresh: &str) -> JointInstance {
    let spec = JointSpec {
        patterns: patterns.to_vec(),
        max_fill: 0,
        side_fill: vec![0; patterns.len()],
        fresh: fresh.to_string(),
    };
    let prod = Product::new(&spec.patterns);
    let zero: Vec<Vec<usize>> = prod
        .patterns
        .iter()
        .zip(&prod.spines)
        .map(|(p, s)| {
            let n = p.descendant_edges().iter().filter(|v| !s.nodes.contains(v)).count();
            vec![0; n]
        })
        .collect();
    build(&spec, &prod, run, &zero)
}

pub fn joint_instances(spec: &JointSpec<'_>) -> Vec<JointInstance> {
    let mut out = Vec::new();
    let _ = for_each_joint_instance(spec, |inst| {
        out.push(inst);
        ControlFlow::Continue(())
    });
    out
}

//! Fairness: whether the allowed set of every (kind, payload class) slice
//! is closed under homomorphic images of marked trees.
//!
//! Syntactic shortcuts settle the common cases. Otherwise each rule pair is
//! searched for a small counterexample `(T, n) -> (T', n)` where `T` is
//! allowed and `T'` is not. Candidates are joint instances of the pair whose
//! filler chains and side extensions are bounded by one more than the
//! largest star length in the policy; every candidate is re-validated
//! against the dynamic semantics, reduced greedily, and the smallest one
//! (by total size, then by rendering) is reported.

use std::ops::ControlFlow;

use rayon::prelude::*;

use super::{classes, OpKind, Policy, PolicyError, Rule, Sign, Slice, UpdateCapability};
use crate::analysis::AnalysisBudget;
use crate::nodeset::NodeSet;
use crate::pattern::{for_each_joint_instance, JointInstance, JointSpec, TreePattern};
use crate::tree::{Label, MarkedTree, NodeId, NodeMapping, Tree};
use crate::xpath::FragmentId;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Shortcut {
    /// No rule uses filters; reported for linear paths.
    FilterFree,
    /// Deny rules use no filters; allow rules may.
    DenyFilterFree,
    /// Deny by default, allow on conflict: only allow rules matter.
    AllowOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FairReason {
    Syntactic(Shortcut),
    SearchExhausted,
}

/// `allowed` is permitted, `denied` is not, and `mapping` is a marked
/// homomorphism from the first to the second.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Counterexample {
    pub kind: OpKind,
    pub class: Option<Label>,
    pub allowed: MarkedTree,
    pub denied: MarkedTree,
    pub mapping: NodeMapping,
    /// Deny rules matching the second tree at its mark.
    pub violated: Vec<Rule>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FairnessVerdict {
    Fair { reason: FairReason, bound: usize },
    Unfair(Box<Counterexample>),
}

impl FairnessVerdict {
    pub fn is_fair(&self) -> bool {
        matches!(self, FairnessVerdict::Fair { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FairnessReport {
    pub verdict: FairnessVerdict,
    /// Candidate pairs examined by the search.
    pub explored: usize,
    /// `(|p|+|p'|)(W+1)`, maximized over rule pairs.
    pub bound: usize,
}

/// Decides fairness with respect to linear paths or filter paths.
pub fn check_fairness(
    p: &Policy,
    fragment: &FragmentId,
    budget: &AnalysisBudget,
) -> Result<FairnessReport, PolicyError> {
    p.check_analyzable("fairness")?;
    let bound = search_bound(p)?;
    let fair = |s| FairnessReport {
        verdict: FairnessVerdict::Fair {
            reason: FairReason::Syntactic(s),
            bound,
        },
        explored: 0,
        bound,
    };
    let all: Vec<UpdateCapability> = p.allowed.iter().chain(&p.denied).cloned().collect();
    if *fragment == FragmentId::linear() {
        if !Policy::filter_free(&all) {
            return Err(PolicyError::Unsupported(format!(
                "fairness with respect to {fragment} needs rules in XP(/,//,*)"
            )));
        }
        return Ok(fair(Shortcut::FilterFree));
    }
    if *fragment != FragmentId::filter_paths() {
        return Err(PolicyError::UnsupportedFragment(fragment.clone()));
    }
    // Filter-free policies land here too: the weaker hypothesis is the one
    // that speaks about filter paths.
    if Policy::filter_free(&p.denied) {
        return Ok(fair(Shortcut::DenyFilterFree));
    }
    if p.default == Sign::Deny && p.conflict == Sign::Allow {
        return Ok(fair(Shortcut::AllowOnly));
    }
    search(p, budget, bound)
}

/// The bounded search alone, for filter paths, with no shortcuts.
pub fn check_fairness_exhaustive(
    p: &Policy,
    budget: &AnalysisBudget,
) -> Result<FairnessReport, PolicyError> {
    p.check_analyzable("fairness")?;
    let bound = search_bound(p)?;
    search(p, budget, bound)
}

fn star_bound(p: &Policy) -> Result<usize, PolicyError> {
    let mut w = 0;
    for c in p.allowed.iter().chain(&p.denied) {
        w = w.max(TreePattern::from_path(&c.path)?.star_length());
    }
    Ok(w)
}

fn search_bound(p: &Policy) -> Result<usize, PolicyError> {
    let w = star_bound(p)?;
    let mut best = 0;
    for d in &p.denied {
        let mut sizes: Vec<usize> = p
            .allowed
            .iter()
            .filter(|a| a.kind == d.kind)
            .map(|a| a.path.step_count())
            .collect();
        if p.default == Sign::Allow {
            // The default-allow universe, `//*`.
            sizes.push(1);
        }
        for s in sizes {
            best = best.max((s + d.path.step_count()) * (w + 1));
        }
    }
    Ok(best)
}

#[derive(Debug, Clone, Copy)]
enum Task {
    /// Allow rule `a` against deny rule `d`, by index within the slice.
    Pair(usize, usize),
    /// Deny rule `d` alone, with side branches extended up to the bound or
    /// collapsed.
    Single(usize, bool),
}

type Key = (usize, String, String);

struct Found {
    key: Key,
    cex: Counterexample,
}

struct TaskOutcome {
    best: Option<Found>,
    explored: usize,
}

fn search(p: &Policy, budget: &AnalysisBudget, bound: usize) -> Result<FairnessReport, PolicyError> {
    let l = star_bound(p)? + 1;
    let fresh = p.fresh_label();
    let mut work: Vec<(Slice, Task)> = Vec::new();
    for kind in OpKind::ALL {
        for class in classes(p, kind) {
            let slice = Slice::of(p, kind, class);
            let tasks: Vec<Task> = match (p.default, p.conflict) {
                (Sign::Deny, Sign::Allow) => Vec::new(),
                (Sign::Deny, Sign::Deny) => (0..slice.allowed.len())
                    .flat_map(|a| (0..slice.denied.len()).map(move |d| Task::Pair(a, d)))
                    .collect(),
                (Sign::Allow, c) => (0..slice.denied.len())
                    .map(|d| Task::Single(d, c == Sign::Allow))
                    .collect(),
            };
            work.extend(tasks.into_iter().map(|t| (slice.clone(), t)));
        }
    }
    let outcomes: Vec<Result<TaskOutcome, PolicyError>> = work
        .par_iter()
        .map(|(slice, task)| run_task(p, slice, *task, l, &fresh, budget, bound))
        .collect();
    let mut explored = 0;
    let mut best: Option<Found> = None;
    for o in outcomes {
        let o = o?;
        explored += o.explored;
        if let Some(f) = o.best {
            if best.as_ref().map_or(true, |b| f.key < b.key) {
                best = Some(f);
            }
        }
    }
    let verdict = match best {
        Some(f) => FairnessVerdict::Unfair(Box::new(f.cex)),
        None => FairnessVerdict::Fair {
            reason: FairReason::SearchExhausted,
            bound,
        },
    };
    Ok(FairnessReport {
        verdict,
        explored,
        bound,
    })
}

fn run_task(
    p: &Policy,
    slice: &Slice,
    task: Task,
    l: usize,
    fresh: &str,
    budget: &AnalysisBudget,
    bound: usize,
) -> Result<TaskOutcome, PolicyError> {
    let pattern = |c: &UpdateCapability| TreePattern::from_path(&c.path);
    let patterns = match task {
        Task::Pair(a, d) => vec![pattern(&slice.allowed[a])?, pattern(&slice.denied[d])?],
        Task::Single(d, _) => vec![pattern(&slice.denied[d])?],
    };
    let spec = match task {
        Task::Pair(..) => JointSpec::pair(&patterns[0], &patterns[1], l, [l, 0], fresh),
        Task::Single(_, sides) => JointSpec::single(&patterns[0], l, if sides { l } else { 0 }, fresh),
    };
    let mut explored = 0usize;
    let mut best: Option<Found> = None;
    let mut failure = None;
    let _ = for_each_joint_instance(&spec, |inst| {
        explored += 1;
        if explored as u64 > budget.max_expansions {
            failure = Some(format!("more than {} candidates", budget.max_expansions));
            return ControlFlow::Break(());
        }
        if let Some(cap) = budget.max_nodes {
            if inst.tree.tree.len() > cap {
                failure = Some(format!(
                    "a candidate has {} nodes, cap is {cap}",
                    inst.tree.tree.len()
                ));
                return ControlFlow::Break(());
            }
        }
        let (small, large, h) = candidate(&inst, task);
        if !slice.allows(p, &small.tree, small.mark) || slice.allows(p, &large.tree, large.mark) {
            return ControlFlow::Continue(());
        }
        let found = finish(p, slice, small, large, h);
        if best.as_ref().map_or(true, |b| found.key < b.key) {
            best = Some(found);
        }
        ControlFlow::Continue(())
    });
    if let Some(limit) = failure {
        return Err(PolicyError::SearchBudget {
            bound,
            explored,
            limit,
        });
    }
    Ok(TaskOutcome { best, explored })
}

/// The smaller tree of a candidate, the whole instance, and the inclusion.
fn candidate(inst: &JointInstance, task: Task) -> (MarkedTree, MarkedTree, Vec<NodeId>) {
    let keep = match task {
        Task::Pair(..) => inst.parts[0].clone(),
        Task::Single(..) => (0..inst.run.len()).map(NodeId::new).collect::<NodeSet>(),
    };
    let (tree, old) = inst.tree.tree.restrict(&keep).expect("parts are closed under parents");
    let mark = old.iter().position(|v| *v == inst.tree.mark).expect("chain kept");
    let small = MarkedTree {
        tree,
        mark: NodeId::new(mark),
    };
    (small, inst.tree.clone(), old)
}

/// Greedy reduction, canonical renaming, and the violated rules.
fn finish(p: &Policy, slice: &Slice, a: MarkedTree, b: MarkedTree, h: Vec<NodeId>) -> Found {
    let (a, b, h) = shrink(p, slice, a, b, h);
    let (ca, ma) = a.tree.canonicalize_with_map();
    let (cb, mb) = b.tree.canonicalize_with_map();
    let mut map = vec![NodeId::new(0); ca.len()];
    for v in a.tree.nodes() {
        map[ma.apply(v).index()] = mb.apply(h[v.index()]);
    }
    let allowed = MarkedTree {
        tree: ca,
        mark: ma.apply(a.mark),
    };
    let denied = MarkedTree {
        tree: cb,
        mark: mb.apply(b.mark),
    };
    let violated = violated_rules(slice, &denied);
    let key = (
        allowed.tree.len() + denied.tree.len(),
        allowed.to_string(),
        denied.to_string(),
    );
    Found {
        key,
        cex: Counterexample {
            kind: slice.kind,
            class: slice.class.clone(),
            allowed,
            denied,
            mapping: NodeMapping::new(map),
            violated,
        },
    }
}

fn violated_rules(slice: &Slice, t: &MarkedTree) -> Vec<Rule> {
    let ev = crate::xpath::Evaluator::new(&t.tree);
    slice
        .denied
        .iter()
        .filter(|c| ev.eval(&c.path).contains(t.mark))
        .map(|c| Rule {
            sign: Sign::Deny,
            capability: c.clone(),
        })
        .collect()
}

fn without(t: &Tree, v: NodeId) -> (Tree, Vec<Option<NodeId>>) {
    let mut keep = t.all_nodes();
    keep.remove(v);
    let (tree, old) = t.restrict(&keep).expect("removing a leaf keeps a tree");
    let mut new_of_old = vec![None; t.len()];
    for (new, o) in old.iter().enumerate() {
        new_of_old[o.index()] = Some(NodeId::new(new));
    }
    (tree, new_of_old)
}

/// Removes leaves and merges siblings while the pair stays a counterexample.
fn shrink(
    p: &Policy,
    slice: &Slice,
    mut a: MarkedTree,
    mut b: MarkedTree,
    mut h: Vec<NodeId>,
) -> (MarkedTree, MarkedTree, Vec<NodeId>) {
    'outer: loop {
        let image: NodeSet = h.iter().copied().collect();
        for v in b.tree.nodes() {
            if !b.tree.children(v).is_empty() || v == b.mark || image.contains(v) {
                continue;
            }
            let (tree, m) = without(&b.tree, v);
            let mark = m[b.mark.index()].expect("mark kept");
            if !slice.allows(p, &tree, mark) {
                h = h.iter().map(|x| m[x.index()].expect("image kept")).collect();
                b = MarkedTree { tree, mark };
                continue 'outer;
            }
        }
        for v in b.tree.nodes() {
            let kids = b.tree.children(v);
            for (i, &x) in kids.iter().enumerate() {
                for &y in &kids[i + 1..] {
                    if b.tree.label(x) != b.tree.label(y) {
                        continue;
                    }
                    let (tree, m) = b.tree.merge_siblings(x, y).expect("same-label siblings");
                    let mark = m.apply(b.mark);
                    if !slice.allows(p, &tree, mark) {
                        h = h.iter().map(|x| m.apply(*x)).collect();
                        b = MarkedTree { tree, mark };
                        continue 'outer;
                    }
                }
            }
        }
        for v in a.tree.nodes() {
            if !a.tree.children(v).is_empty() || v == a.mark {
                continue;
            }
            let (tree, m) = without(&a.tree, v);
            let mark = m[a.mark.index()].expect("mark kept");
            if slice.allows(p, &tree, mark) {
                let mut h2 = vec![NodeId::new(0); tree.len()];
                for (old, new) in m.iter().enumerate() {
                    if let Some(new) = new {
                        h2[new.index()] = h[old];
                    }
                }
                h = h2;
                a = MarkedTree { tree, mark };
                continue 'outer;
            }
        }
        return (a, b, h);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policy::tests::policy;
    use crate::tree::is_homomorphism;

    fn fairness(text: &str) -> FairnessReport {
        check_fairness(&policy(text), &FragmentId::filter_paths(), &AnalysisBudget::default()).unwrap()
    }

    #[test]
    fn unfair_example() {
        let rep = fairness("default: deny\nconflict: deny\n+ delete /a\n- delete /a[b]");
        let FairnessVerdict::Unfair(c) = rep.verdict else {
            panic!("expected unfair");
        };
        assert_eq!(c.allowed.to_string(), "a @ /a");
        assert_eq!(c.denied.to_string(), "a(b) @ /a");
        assert_eq!(c.mapping, NodeMapping::new(vec![NodeId::new(0)]));
        assert_eq!(c.violated.len(), 1);
        assert!(is_homomorphism(&c.allowed.tree, &c.denied.tree, &c.mapping).unwrap());
    }

    #[test]
    fn subsumed_filter_is_fair() {
        let rep = fairness("default: deny\nconflict: deny\n+ delete /a\n- delete /a[b]\n- delete //*");
        assert_eq!(
            rep.verdict,
            FairnessVerdict::Fair {
                reason: FairReason::SearchExhausted,
                bound: rep.bound
            }
        );
    }

    #[test]
    fn shortcuts() {
        let rep = fairness("default: deny\nconflict: deny\n+ delete //a[b]");
        assert!(matches!(
            rep.verdict,
            FairnessVerdict::Fair {
                reason: FairReason::Syntactic(Shortcut::DenyFilterFree),
                ..
            }
        ));
        let rep = fairness(
            "default: deny\nconflict: deny\n+ insert //patient//* :: *\n\
             - insert //* :: treatment\n- update //treatment :: *",
        );
        assert!(matches!(
            rep.verdict,
            FairnessVerdict::Fair {
                reason: FairReason::Syntactic(Shortcut::DenyFilterFree),
                ..
            }
        ));
        let rep = check_fairness(
            &policy("default: deny\nconflict: deny\n+ delete //a\n- delete /a/b"),
            &FragmentId::linear(),
            &AnalysisBudget::default(),
        )
        .unwrap();
        assert!(matches!(
            rep.verdict,
            FairnessVerdict::Fair {
                reason: FairReason::Syntactic(Shortcut::FilterFree),
                ..
            }
        ));
        let p = policy("default: deny\nconflict: deny\n+ delete /a\n- delete /a[b]");
        assert!(check_fairness(&p, &FragmentId::linear(), &AnalysisBudget::default()).is_err());
        assert!(matches!(
            check_fairness(&p, &FragmentId::patterns(), &AnalysisBudget::default()),
            Err(PolicyError::UnsupportedFragment(_))
        ));
    }

    #[test]
    fn other_modes() {
        // Default allow: the chain `a` is allowed, `a(b)` is denied.
        let rep = fairness("default: allow\nconflict: deny\n- delete /a[b]");
        assert!(!rep.verdict.is_fair());
        // An allow rule with the same filter repairs it on conflict.
        let rep = fairness("default: allow\nconflict: allow\n+ delete /a[b]\n- delete /a[b]");
        assert!(rep.verdict.is_fair());
        // ... but not when the deny rule reaches further.
        let rep = fairness("default: allow\nconflict: allow\n+ delete /a[b]\n- delete /a[//b]");
        let FairnessVerdict::Unfair(c) = rep.verdict else {
            panic!("expected unfair");
        };
        assert_eq!(c.denied.tree.to_string(), "a(z(b))");
    }

    #[test]
    fn insert_slices() {
        let rep = fairness("default: deny\nconflict: deny\n+ insert //a :: *\n- insert /a[b] :: c");
        let FairnessVerdict::Unfair(c) = rep.verdict else {
            panic!("expected unfair");
        };
        assert_eq!(c.kind, OpKind::Insert);
        assert_eq!(c.class, Some(Label::element("c")));
    }

    #[test]
    fn attribute_rules_are_rejected() {
        let p = policy("default: deny\nconflict: deny\n+ delete /a[@b=\"c\"]\n- delete /a[@b=\"d\"]");
        let err = check_fairness(&p, &FragmentId::filter_paths(), &AnalysisBudget::default()).unwrap_err();
        assert!(err.to_string().contains("attribute rules unsupported for fairness"));
    }
}

//! Decision procedures over paths: containment, union containment, overlap
//! and intersection.

use std::collections::BTreeSet;

use thiserror::Error;

use crate::pattern::{run_instance, spine_product, Odometer, PatternError, TreePattern};
use crate::tree::MarkedTree;
use crate::xpath::{labels, Axis, FilterExpr, NodeTest, PathExpr, Step};

pub const DEFAULT_MAX_EXPANSIONS: u64 = 1_000_000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AnalysisError {
    #[error(transparent)]
    Pattern(#[from] PatternError),
    #[error("budget exceeded: {needed} expansions needed, cap is {cap}")]
    BudgetExceeded { needed: u128, cap: u64 },
    #[error("{what} needs at least one path")]
    EmptyUnion { what: &'static str },
    #[error("unsupported fragment: {0}")]
    Unsupported(String),
}

/// Resource limits. Exceeding any of them is an error, never an approximation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AnalysisBudget {
    pub max_expansions: u64,
    /// Optional cap on the size of trees built by bounded searches.
    pub max_nodes: Option<usize>,
}

impl Default for AnalysisBudget {
    fn default() -> Self {
        AnalysisBudget {
            max_expansions: DEFAULT_MAX_EXPANSIONS,
            max_nodes: None,
        }
    }
}

impl AnalysisBudget {
    /// Fails unless `(k+1)^d` instances fit the expansion cap.
    pub fn check_instances(&self, k: usize, d: usize) -> Result<u128, AnalysisError> {
        let needed = (k as u128 + 1).checked_pow(d as u32).unwrap_or(u128::MAX);
        if needed > self.max_expansions as u128 {
            return Err(AnalysisError::BudgetExceeded {
                needed,
                cap: self.max_expansions,
            });
        }
        Ok(needed)
    }
}

/// First of `z`, `z1`, `z2`, ... not used as a label by any of the paths.
pub fn fresh_label<'a>(paths: impl IntoIterator<Item = &'a PathExpr>) -> String {
    let used: BTreeSet<String> = paths.into_iter().flat_map(labels).collect();
    fresh_from(&used)
}

pub(crate) fn fresh_from(used: &BTreeSet<String>) -> String {
    std::iter::once("z".to_string())
        .chain((1..).map(|i| format!("z{i}")))
        .find(|z| !used.contains(z))
        .expect("unbounded supply")
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContainmentReport {
    pub contained: bool,
    /// A canonical instance of the left path not selected by the right one.
    pub counterexample: Option<MarkedTree>,
    pub instances_checked: usize,
    /// Extension bound used for the canonical instances.
    pub bound: usize,
}

/// Decides `p ⊑ q` by checking every canonical instance of `p` whose
/// extensions are bounded by one more than the star length of `q`.
pub fn check_containment(
    p: &PathExpr,
    q: &PathExpr,
    budget: &AnalysisBudget,
) -> Result<ContainmentReport, AnalysisError> {
    let fresh = fresh_label([p, q]);
    let pp = TreePattern::from_path(p)?;
    let qp = TreePattern::from_path(q)?;
    pattern_containment(&pp, &[&qp], &fresh, budget)
}

pub fn contains(p: &PathExpr, q: &PathExpr) -> Result<bool, AnalysisError> {
    Ok(check_containment(p, q, &AnalysisBudget::default())?.contained)
}

/// Every instance of `p` up to the bound must match one of `rights`.
pub fn pattern_containment(
    p: &TreePattern,
    rights: &[&TreePattern],
    fresh: &str,
    budget: &AnalysisBudget,
) -> Result<ContainmentReport, AnalysisError> {
    let w = rights.iter().map(|r| r.star_length()).max().unwrap_or(0);
    let k = w + 1;
    let d = p.descendant_edges().len();
    budget.check_instances(k, d)?;
    let mut checked = 0;
    for u in Odometer::new(d, k) {
        let inst = p.extend(&u)?.instance(fresh)?;
        checked += 1;
        if !rights.iter().any(|r| r.matches(&inst)) {
            return Ok(ContainmentReport {
                contained: false,
                counterexample: Some(inst.canonicalize()),
                instances_checked: checked,
                bound: k,
            });
        }
    }
    Ok(ContainmentReport {
        contained: true,
        counterexample: None,
        instances_checked: checked,
        bound: k,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnionTier {
    /// Descendant-free left side: one right path must contain it alone.
    Decomposed,
    /// Bounded extensions of the left side, each checked against the union.
    Expanded,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnionReport {
    pub contained: bool,
    pub tier: UnionTier,
    pub counterexample: Option<MarkedTree>,
    pub instances_checked: usize,
    pub bound: usize,
}

/// Decides `p ⊑ r1 | ... | rn`.
pub fn contains_union(
    p: &PathExpr,
    rights: &[PathExpr],
    budget: &AnalysisBudget,
) -> Result<UnionReport, AnalysisError> {
    if rights.is_empty() {
        return Err(AnalysisError::EmptyUnion {
            what: "union containment",
        });
    }
    let fresh = fresh_label(std::iter::once(p).chain(rights));
    let pp = TreePattern::from_path(p)?;
    let rps: Vec<TreePattern> = rights
        .iter()
        .map(TreePattern::from_path)
        .collect::<Result<_, _>>()?;
    if pp.descendant_edges().is_empty() {
        let mut checked = 0;
        for r in &rps {
            let rep = pattern_containment(&pp, &[r], &fresh, budget)?;
            checked += rep.instances_checked;
            if rep.contained {
                return Ok(UnionReport {
                    contained: true,
                    tier: UnionTier::Decomposed,
                    counterexample: None,
                    instances_checked: checked,
                    bound: rep.bound,
                });
            }
        }
        let inst = pp.instance(&fresh)?.canonicalize();
        return Ok(UnionReport {
            contained: false,
            tier: UnionTier::Decomposed,
            counterexample: Some(inst),
            instances_checked: checked,
            bound: 1,
        });
    }
    let refs: Vec<&TreePattern> = rps.iter().collect();
    let rep = pattern_containment(&pp, &refs, &fresh, budget)?;
    Ok(UnionReport {
        contained: rep.contained,
        tier: UnionTier::Expanded,
        counterexample: rep.counterexample,
        instances_checked: rep.instances_checked,
        bound: rep.bound,
    })
}

/// A smallest common witness: a marked tree selected by both paths.
pub fn overlaps(p: &PathExpr, q: &PathExpr) -> Result<Option<MarkedTree>, AnalysisError> {
    let fresh = fresh_label([p, q]);
    let pp = TreePattern::from_path(p)?;
    let qp = TreePattern::from_path(q)?;
    Ok(pattern_overlap(&pp, &qp, &fresh))
}

pub fn pattern_overlap(p: &TreePattern, q: &TreePattern, fresh: &str) -> Option<MarkedTree> {
    let pats = [p, q];
    let run = spine_product(&pats)?;
    Some(run_instance(&pats, &run, fresh).tree.canonicalize())
}

/// A path selecting exactly the common nodes of two paths whose spines use
/// only child steps; `None` when they select disjoint sets.
pub fn intersect_paths(p: &PathExpr, q: &PathExpr) -> Result<Option<PathExpr>, AnalysisError> {
    let (ps, qs) = (p.spine(), q.spine());
    for s in ps.iter().chain(&qs) {
        if s.axis != Axis::Child {
            return Err(AnalysisError::Unsupported(format!(
                "{} step on the spine of an intersected path",
                s.axis.name()
            )));
        }
        if matches!(s.test, NodeTest::AttributeName(_)) {
            return Err(AnalysisError::Unsupported("attribute test".into()));
        }
    }
    if ps.len() != qs.len() {
        return Ok(None);
    }
    let mut steps = Vec::with_capacity(ps.len());
    for (a, b) in ps.iter().zip(&qs) {
        let test = match (&a.test, &b.test) {
            (NodeTest::Wildcard, t) | (t, NodeTest::Wildcard) if *t != NodeTest::Text => t.clone(),
            (x, y) if x == y => x.clone(),
            _ => return Ok(None),
        };
        let filters: Vec<FilterExpr> = a.filters.iter().chain(&b.filters).cloned().collect();
        let mut step = Step::new(Axis::Child, test);
        step.filters.extend(FilterExpr::conjoin(filters));
        steps.push(step);
    }
    Ok(PathExpr::from_steps(&steps))
}

//! Static enforcement: is every instance of a capability allowed on every
//! tree?

use std::ops::ControlFlow;

use super::{check_path_analyzable, classes_admitted, Policy, PolicyError, Rule, Sign, Slice, UpdateCapability};
use crate::analysis::{fresh_from, pattern_containment, pattern_overlap, AnalysisBudget, AnalysisError};
use crate::pattern::{for_each_joint_instance, JointSpec, TreePattern};
use crate::tree::{Label, MarkedTree};
use crate::xpath::labels;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BlockReason {
    /// Some instance is matched by no allow rule.
    NotCovered,
    /// Some instance is matched by this deny rule and, where the mode lets
    /// allow rules win, by no allow rule.
    Denied(Rule),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Blocker {
    /// Payload root label of the blocked updates; `None` for deletions.
    pub class: Option<Label>,
    pub reason: BlockReason,
    /// A marked tree whose marked update is an instance but not allowed.
    pub witness: MarkedTree,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StaticReport {
    pub allowed: bool,
    pub blocker: Option<Blocker>,
    pub instances_checked: usize,
}

pub fn statically_allowed(
    p: &Policy,
    u: &UpdateCapability,
    budget: &AnalysisBudget,
) -> Result<bool, PolicyError> {
    Ok(check_static(p, u, budget)?.allowed)
}

/// Decides static enforcement for each payload class the capability admits
/// and reports the first blocked one.
pub fn check_static(
    p: &Policy,
    u: &UpdateCapability,
    budget: &AnalysisBudget,
) -> Result<StaticReport, PolicyError> {
    p.check_analyzable("static enforcement")?;
    check_path_analyzable(&u.path, "static enforcement")?;
    let mut used = p.labels();
    used.extend(labels(&u.path));
    let fresh = fresh_from(&used);
    let up = TreePattern::from_path(&u.path)?;
    let mut checked = 0;
    for class in classes_admitted(p, u.kind, u.test.as_ref()) {
        let slice = Slice::of(p, u.kind, class);
        if let Some(reason_witness) = check_slice(p, &slice, &up, &fresh, budget, &mut checked)? {
            let (reason, witness) = reason_witness;
            return Ok(StaticReport {
                allowed: false,
                blocker: Some(Blocker {
                    class: slice.class,
                    reason,
                    witness,
                }),
                instances_checked: checked,
            });
        }
    }
    Ok(StaticReport {
        allowed: true,
        blocker: None,
        instances_checked: checked,
    })
}

fn patterns(caps: &[UpdateCapability]) -> Result<Vec<TreePattern>, PolicyError> {
    Ok(caps
        .iter()
        .map(|c| TreePattern::from_path(&c.path))
        .collect::<Result<_, _>>()?)
}

fn deny_rule(c: &UpdateCapability) -> Rule {
    Rule {
        sign: Sign::Deny,
        capability: c.clone(),
    }
}

fn check_slice(
    p: &Policy,
    slice: &Slice,
    up: &TreePattern,
    fresh: &str,
    budget: &AnalysisBudget,
    checked: &mut usize,
) -> Result<Option<(BlockReason, MarkedTree)>, PolicyError> {
    let allow = patterns(&slice.allowed)?;
    let deny = patterns(&slice.denied)?;
    let allow_refs: Vec<&TreePattern> = allow.iter().collect();
    let needs_cover = p.default == Sign::Deny;
    if needs_cover {
        if allow.is_empty() {
            *checked += 1;
            let shortest = up.extend(&vec![0; up.descendant_edges().len()])?;
            return Ok(Some((BlockReason::NotCovered, shortest.instance(fresh)?.canonicalize())));
        }
        let rep = pattern_containment(up, &allow_refs, fresh, budget)?;
        *checked += rep.instances_checked;
        if let Some(w) = rep.counterexample {
            return Ok(Some((BlockReason::NotCovered, w)));
        }
    }
    if p.conflict == Sign::Allow && p.default == Sign::Deny {
        return Ok(None);
    }
    for (d, cap) in deny.iter().zip(&slice.denied) {
        *checked += 1;
        let Some(w) = pattern_overlap(up, d, fresh) else {
            continue;
        };
        // Under deny-on-conflict, or with nothing that could override, any
        // common node is fatal.
        if p.conflict == Sign::Deny || allow.is_empty() {
            return Ok(Some((BlockReason::Denied(deny_rule(cap)), w)));
        }
        if let Some(w) = uncovered_overlap(up, d, &allow_refs, fresh, budget, checked)? {
            return Ok(Some((BlockReason::Denied(deny_rule(cap)), w)));
        }
    }
    Ok(None)
}

/// A tree selected by both `p` and `d` at the mark and by none of `allow`:
/// searches the joint instances of the pair with gaps and side branches up
/// to one more than the allow rules' star length.
fn uncovered_overlap(
    p: &TreePattern,
    d: &TreePattern,
    allow: &[&TreePattern],
    fresh: &str,
    budget: &AnalysisBudget,
    checked: &mut usize,
) -> Result<Option<MarkedTree>, PolicyError> {
    let w = allow.iter().map(|a| a.star_length()).max().unwrap_or(0);
    let l = w + 1;
    let spec = JointSpec::pair(p, d, l, [l, l], fresh);
    let mut found = None;
    let mut over = false;
    let mut seen = 0u64;
    let cap = budget.max_expansions;
    let flow = for_each_joint_instance(&spec, |inst| {
        *checked += 1;
        seen += 1;
        if seen > cap {
            over = true;
            return ControlFlow::Break(());
        }
        if !allow.iter().any(|a| a.matches(&inst.tree)) {
            found = Some(inst.tree.canonicalize());
            return ControlFlow::Break(());
        }
        ControlFlow::Continue(())
    });
    if over {
        return Err(AnalysisError::BudgetExceeded {
            needed: seen as u128,
            cap,
        }
        .into());
    }
    debug_assert!(flow.is_continue() || found.is_some());
    Ok(found)
}

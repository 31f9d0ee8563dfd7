//! Finding a statically allowed capability that covers a given update.

use super::{dynamically_allowed, statically_allowed, AtomicUpdate, Policy, PolicyError, UpdateCapability};
use crate::analysis::AnalysisBudget;
use crate::pattern::TreePattern;
use crate::tree::{Label, MarkedTree, Tree};
use crate::xpath::{Axis, FragmentId, NodeTest, PathExpr, Step};

/// A capability in `fragment` that the policy statically allows and whose
/// instances on `t` include `u`. Candidates, most general first: the
/// root-to-target label path, then (for filter paths) the whole element
/// context of the target as one filter path.
pub fn find_covering_capability(
    p: &Policy,
    u: &AtomicUpdate,
    t: &Tree,
    fragment: &FragmentId,
    budget: &AnalysisBudget,
) -> Result<Option<UpdateCapability>, PolicyError> {
    let with_filters = if *fragment == FragmentId::linear() {
        false
    } else if *fragment == FragmentId::filter_paths() {
        true
    } else {
        return Err(PolicyError::UnsupportedFragment(fragment.clone()));
    };
    if !dynamically_allowed(p, u, t)? {
        return Err(PolicyError::NotAllowed);
    }
    let test = match u.payload_root() {
        None => None,
        Some(Label::Element(n)) => Some(NodeTest::ElementName(n.clone())),
        Some(Label::Text(_)) => Some(NodeTest::Text),
        Some(Label::Attribute { .. }) => return Ok(None),
    };
    let mut candidates = Vec::new();
    candidates.extend(linear_path(t, u));
    if with_filters && t.label(u.target).is_element() {
        let mt = MarkedTree {
            tree: t.clone(),
            mark: u.target,
        }
        .canonicalize();
        let full = TreePattern::from_marked_tree(&mt)?.to_path()?;
        if !candidates.contains(&full) {
            candidates.push(full);
        }
    }
    for path in candidates {
        let cap = UpdateCapability {
            kind: u.kind,
            path,
            test: test.clone(),
        };
        if statically_allowed(p, &cap, budget)? {
            return Ok(Some(cap));
        }
    }
    Ok(None)
}

fn linear_path(t: &Tree, u: &AtomicUpdate) -> Option<PathExpr> {
    let steps: Option<Vec<Step>> = t
        .ancestors_or_self(u.target)
        .into_iter()
        .map(|v| {
            t.label(v)
                .element_name()
                .map(|n| Step::new(Axis::Child, NodeTest::element(n)))
        })
        .collect();
    PathExpr::from_steps(&steps?)
}

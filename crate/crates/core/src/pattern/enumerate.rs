//! Bounded enumeration of the linear paths and filter paths of a path.

use std::collections::BTreeSet;

use super::{Odometer, PatternError, PatternLabel, TreePattern};
use crate::tree::{Label, MarkedTree, NodeId, Tree};
use crate::xpath::{fragment_of, Axis, Feature, NodeTest, PathExpr, Step};

fn check_fragment(p: &PathExpr, allowed: &[Feature]) -> Result<(), PatternError> {
    let bad = fragment_of(p).features().find(|f| !allowed.contains(f));
    match bad {
        Some(f) => Err(PatternError::Unsupported(format!("{f:?} in {p}"))),
        None => Ok(()),
    }
}

fn linear_path(labels: &[String]) -> PathExpr {
    let steps: Vec<Step> = labels
        .iter()
        .map(|l| Step::new(Axis::Child, NodeTest::ElementName(l.clone())))
        .collect();
    PathExpr::from_steps(&steps).expect("nonempty")
}

/// Linear paths of `p` with at most `max_len` steps over `alphabet`, sorted
/// by length and then lexicographically.
pub fn lp_enumerate(
    p: &PathExpr,
    max_len: usize,
    alphabet: &BTreeSet<String>,
) -> Result<Vec<PathExpr>, PatternError> {
    use Feature::*;
    check_fragment(p, &[Child, Descendant, Wildcard])?;
    let steps = p.spine();
    let mut words: BTreeSet<(usize, Vec<String>)> = BTreeSet::new();
    fn go(
        steps: &[Step],
        max_len: usize,
        alphabet: &BTreeSet<String>,
        word: &mut Vec<String>,
        out: &mut BTreeSet<(usize, Vec<String>)>,
    ) {
        let Some((step, rest)) = steps.split_first() else {
            out.insert((word.len(), word.clone()));
            return;
        };
        // Fillers a descendant step may insert before its own position.
        let max_fill = if step.axis == Axis::Descendant {
            max_len.saturating_sub(word.len() + steps.len())
        } else {
            0
        };
        let own: Vec<&String> = alphabet
            .iter()
            .filter(|l| match &step.test {
                NodeTest::ElementName(n) => n == *l,
                _ => true,
            })
            .collect();
        for fill in 0..=max_fill {
            if word.len() + fill + steps.len() > max_len {
                break;
            }
            for fillers in words_over(alphabet, fill) {
                let base = word.len();
                word.extend(fillers);
                for l in &own {
                    word.push((*l).clone());
                    go(rest, max_len, alphabet, word, out);
                    word.pop();
                }
                word.truncate(base);
            }
        }
    }
    go(&steps, max_len, alphabet, &mut Vec::new(), &mut words);
    Ok(words.into_iter().map(|(_, w)| linear_path(&w)).collect())
}

fn words_over(alphabet: &BTreeSet<String>, len: usize) -> Vec<Vec<String>> {
    let mut out = vec![Vec::new()];
    for _ in 0..len {
        out = out
            .into_iter()
            .flat_map(|w| {
                alphabet.iter().map(move |l| {
                    let mut w = w.clone();
                    w.push(l.clone());
                    w
                })
            })
            .collect();
    }
    out
}

/// Filter paths of `p` with at most `max_size` steps over `alphabet`: every
/// extension of `p` with each `*` replaced by a letter, as a filter path.
pub fn fp_enumerate(
    p: &PathExpr,
    max_size: usize,
    alphabet: &BTreeSet<String>,
) -> Result<Vec<PathExpr>, PatternError> {
    use Feature::*;
    check_fragment(p, &[Child, Descendant, Wildcard, Filter])?;
    let pattern = TreePattern::from_path(p)?;
    if pattern.size() > max_size {
        return Ok(Vec::new());
    }
    let d = pattern.descendant_edges().len();
    let slack = max_size - pattern.size();
    let letters: Vec<&String> = alphabet.iter().collect();
    let mut out: BTreeSet<(usize, String, PathExpr)> = BTreeSet::new();
    for u in Odometer::new(d, slack) {
        if u.iter().sum::<usize>() > slack {
            continue;
        }
        let ext = pattern.extend(&u)?;
        let stars: Vec<usize> = (1..ext.len())
            .filter(|v| *ext.label(*v) == PatternLabel::Star)
            .collect();
        let names_ok = ext.names().iter().all(|n| alphabet.contains(n));
        if !names_ok || (!stars.is_empty() && letters.is_empty()) {
            continue;
        }
        for choice in Odometer::new(stars.len(), letters.len().saturating_sub(1)) {
            let labels = (1..ext.len())
                .map(|v| {
                    let name = match stars.iter().position(|s| *s == v) {
                        Some(i) => letters[choice[i]].clone(),
                        None => ext.label(v).instantiate(""),
                    };
                    Label::Element(name)
                })
                .collect();
            let parents = (1..ext.len())
                .map(|v| ext.parent(v).and_then(|(p, _)| p.checked_sub(1)))
                .collect();
            let tree = Tree::from_parents(labels, parents).expect("patterns are trees");
            let mt = MarkedTree {
                tree,
                mark: NodeId::new(ext.mark() - 1),
            };
            let path = TreePattern::from_marked_tree(&mt)?.to_path()?;
            out.insert((path.step_count(), path.to_string(), path));
        }
    }
    Ok(out.into_iter().map(|(_, _, p)| p).collect())
}

//! One function per subcommand. Each returns a verdict or a message for
//! standard error.

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use serde_json::json;
use xguard_core::analysis::{check_containment, fresh_label, overlaps, AnalysisBudget};
use xguard_core::oracle::{
    enumerate_trees, oracle_allowed_set, oracle_containment_witness, ClosureTable, EnumSpec,
};
use xguard_core::policy::{
    check_fairness, check_static, find_covering_capability, AtomicUpdate, BlockReason, FairReason,
    FairnessVerdict, Policy, Shortcut, UpdateCapability,
};
use xguard_core::tree::{Label, NodeMapping, Tree};
use xguard_core::xpath::{eval, labels, parse_path, FragmentId, PathExpr};

use crate::verdict::{marked_json, Answer, Verdict};

pub type Outcome = Result<Verdict, String>;

fn path(text: &str) -> Result<PathExpr, String> {
    parse_path(text).map_err(|e| format!("path `{text}`: {e}"))
}

fn read(file: &Path) -> Result<String, String> {
    fs::read_to_string(file).map_err(|e| format!("{}: {e}", file.display()))
}

fn policy(file: &Path) -> Result<Policy, String> {
    Policy::parse(&read(file)?).map_err(|e| format!("{}: {e}", file.display()))
}

fn tree(file: &Path) -> Result<Tree, String> {
    Tree::parse(read(file)?.trim()).map_err(|e| format!("{}: {e}", file.display()))
}

fn class_name(c: &Option<Label>) -> String {
    match c {
        None => "-".into(),
        Some(Label::Text(_)) => "text()".into(),
        Some(l) => l.to_string(),
    }
}

fn mapping_pairs(h: &NodeMapping) -> Vec<[usize; 2]> {
    h.pairs().map(|(a, b)| [a.index(), b.index()]).collect()
}

pub fn contains(p: &str, q: &str, budget: &AnalysisBudget) -> Outcome {
    let (p, q) = (path(p)?, path(q)?);
    let rep = check_containment(&p, &q, budget).map_err(|e| e.to_string())?;
    let mut v = Verdict::new(Answer::from_bool(rep.contained))
        .explored(rep.instances_checked)
        .bound(rep.bound);
    if let Some(w) = rep.counterexample {
        v = v
            .line(format!("witness: {}", w.tree))
            .line(format!("mark: {}", w.mark_path()))
            .witness(marked_json(&w));
    }
    Ok(v)
}

pub fn overlaps_cmd(p: &str, q: &str) -> Outcome {
    let (p, q) = (path(p)?, path(q)?);
    let w = overlaps(&p, &q).map_err(|e| e.to_string())?;
    Ok(match w {
        Some(w) => Verdict::new(Answer::Yes)
            .line(format!("witness: {}", w.tree))
            .line(format!("mark: {}", w.mark_path()))
            .witness(marked_json(&w)),
        None => Verdict::new(Answer::No),
    })
}

fn shortcut_name(s: Shortcut) -> &'static str {
    match s {
        Shortcut::FilterFree => "filter-free",
        Shortcut::DenyFilterFree => "deny-filter-free",
        Shortcut::AllowOnly => "allow-only",
    }
}

pub fn fairness(file: &Path, frag: &FragmentId, budget: &AnalysisBudget) -> Outcome {
    let p = policy(file)?;
    let rep = check_fairness(&p, frag, budget).map_err(|e| e.to_string())?;
    let v = match rep.verdict {
        FairnessVerdict::Fair { reason, bound } => {
            let (reason, detail) = match reason {
                FairReason::Syntactic(s) => ("syntactic", Some(shortcut_name(s))),
                FairReason::SearchExhausted => ("search-exhausted", None),
            };
            let mut v = Verdict::new(Answer::Yes).line(match detail {
                Some(d) => format!("reason: {reason} ({d})"),
                None => format!("reason: {reason}"),
            });
            v = v.line(format!("bound: {bound}"));
            v.witness(json!({ "reason": reason, "shortcut": detail, "bound": bound }))
        }
        FairnessVerdict::Unfair(cex) => {
            let violated: Vec<String> = cex.violated.iter().map(|r| r.to_string()).collect();
            let mut v = Verdict::new(Answer::No)
                .line(format!("kind: {}", cex.kind))
                .line(format!("class: {}", class_name(&cex.class)))
                .line(format!("allowed: {}", cex.allowed.tree))
                .line(format!("denied: {}", cex.denied.tree))
                .line(format!("mark: {} -> {}", cex.allowed.mark_path(), cex.denied.mark_path()))
                .line(format!(
                    "mapping: {}",
                    mapping_pairs(&cex.mapping)
                        .iter()
                        .map(|[a, b]| format!("{a}->{b}"))
                        .collect::<Vec<_>>()
                        .join(" ")
                ));
            for r in &violated {
                v = v.line(format!("violated: {r}"));
            }
            v.witness(json!({
                "kind": cex.kind.name(),
                "class": class_name(&cex.class),
                "allowed": marked_json(&cex.allowed),
                "denied": marked_json(&cex.denied),
                "mapping": mapping_pairs(&cex.mapping),
                "violated": violated,
            }))
        }
    };
    Ok(v.explored(rep.explored).bound(rep.bound))
}

pub fn enforce(file: &Path, capability: &str, budget: &AnalysisBudget) -> Outcome {
    let p = policy(file)?;
    let cap = UpdateCapability::parse(capability).map_err(|e| e.to_string())?;
    let rep = check_static(&p, &cap, budget).map_err(|e| e.to_string())?;
    let mut v = Verdict::new(Answer::from_bool(rep.allowed)).explored(rep.instances_checked);
    if let Some(b) = rep.blocker {
        let (reason, rule) = match &b.reason {
            BlockReason::NotCovered => ("not-covered", None),
            BlockReason::Denied(r) => ("denied", Some(r.to_string())),
        };
        v = v.line(format!("class: {}", class_name(&b.class)));
        v = match &rule {
            Some(r) => v.line(format!("blocked by: {r}")),
            None => v.line("blocked by: no allow rule covers"),
        };
        v = v
            .line(format!("witness: {}", b.witness.tree))
            .line(format!("mark: {}", b.witness.mark_path()))
            .witness(json!({
                "class": class_name(&b.class),
                "reason": reason,
                "rule": rule,
                "tree": b.witness.tree.to_string(),
                "mark": b.witness.mark_path(),
            }));
    }
    Ok(v)
}

pub fn dynamic(policy_file: &Path, tree_file: &Path) -> Outcome {
    let p = policy(policy_file)?;
    let t = tree(tree_file)?;
    let mut lines: Vec<String> = oracle_allowed_set(&p, &t).iter().map(|k| k.describe(&t)).collect();
    lines.sort();
    let n = lines.len();
    let mut v = Verdict::new(Answer::Yes).witness(json!(lines)).explored(n);
    v.lines = lines;
    Ok(v)
}

pub fn cover(policy_file: &Path, tree_file: &Path, update: &str, frag: &FragmentId, budget: &AnalysisBudget) -> Outcome {
    let p = policy(policy_file)?;
    let t = tree(tree_file)?;
    let u = AtomicUpdate::parse(update, &t).map_err(|e| e.to_string())?;
    let cap = find_covering_capability(&p, &u, &t, frag, budget).map_err(|e| e.to_string())?;
    Ok(match cap {
        Some(c) => Verdict::new(Answer::Yes)
            .line(format!("capability: {c}"))
            .witness(json!(c.to_string())),
        None => Verdict::new(Answer::No),
    })
}

pub fn eval_cmd(p: &str, tree_file: &Path) -> Outcome {
    let p = path(p)?;
    let t = tree(tree_file)?;
    let nodes: Vec<String> = eval(&p, &t).iter().map(|n| t.node_path(n)).collect();
    let n = nodes.len();
    let mut v = Verdict::new(Answer::Yes).witness(json!(nodes)).explored(n);
    v.lines = nodes;
    Ok(v)
}

fn oracle_spec(names: &BTreeSet<String>, alphabet: &Option<Vec<String>>, nodes: usize) -> EnumSpec {
    match alphabet {
        Some(a) => EnumSpec::new(a.iter().cloned(), nodes),
        None => EnumSpec::new(names.iter().cloned(), nodes),
    }
}

pub fn oracle_contains(p: &str, q: &str, alphabet: &Option<Vec<String>>, nodes: usize) -> Outcome {
    let (p, q) = (path(p)?, path(q)?);
    let mut names = labels(&p);
    names.extend(labels(&q));
    names.insert(fresh_label([&p, &q]));
    let spec = oracle_spec(&names, alphabet, nodes);
    let trees = enumerate_trees(&spec).count();
    let w = oracle_containment_witness(&p, &q, &spec);
    let mut v = Verdict::new(Answer::from_bool(w.is_none())).explored(trees).bound(nodes);
    if let Some(w) = w {
        v = v
            .line(format!("witness: {}", w.tree))
            .line(format!("mark: {}", w.mark_path()))
            .witness(marked_json(&w));
    }
    Ok(v)
}

pub fn oracle_fairness(file: &Path, alphabet: &Option<Vec<String>>, nodes: usize) -> Outcome {
    let p = policy(file)?;
    let mut names = p.labels();
    names.insert(p.fresh_label());
    let spec = oracle_spec(&names, alphabet, nodes);
    let table = ClosureTable::new(&spec);
    let violation = table.check(&p);
    let mut v = Verdict::new(Answer::from_bool(violation.is_none()))
        .explored(table.step_count())
        .bound(nodes);
    if let Some(c) = violation {
        v = v
            .line(format!("kind: {}", c.kind))
            .line(format!("class: {}", class_name(&c.class)))
            .line(format!("allowed: {}", c.from))
            .line(format!("denied: {}", c.to))
            .witness(json!({
                "kind": c.kind.name(),
                "class": class_name(&c.class),
                "allowed": marked_json(&c.from),
                "denied": marked_json(&c.to),
                "mapping": mapping_pairs(&c.mapping),
            }));
    }
    Ok(v)
}


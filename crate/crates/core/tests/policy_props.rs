mod common;

use std::collections::BTreeMap;
use std::sync::OnceLock;

use common::{arb_delete_policy, arb_mixed_policy, arb_path, arb_tree, build, tree, Shape};
use proptest::prelude::*;
use xguard_core::analysis::AnalysisBudget;
use xguard_core::oracle::{enumerate_trees, oracle_allowed_set, ClosureTable, EnumSpec};
use xguard_core::policy::{
    capability_instances, check_fairness, dynamically_allowed, find_covering_capability, statically_allowed,
    AtomicUpdate, FairnessVerdict, OpKind, Policy, Sign, UpdateCapability, UpdateKey,
};
use xguard_core::tree::{is_homomorphism, Label, Tree};
use xguard_core::xpath::{FragmentId, NodeTest};

fn budget() -> AnalysisBudget {
    AnalysisBudget::default()
}

fn trees(n: usize) -> &'static [Tree] {
    static CACHE: OnceLock<BTreeMap<usize, Vec<Tree>>> = OnceLock::new();
    let all = CACHE.get_or_init(|| {
        (3..=5)
            .map(|n| (n, enumerate_trees(&EnumSpec::new(["a", "b", "z"], n)).collect()))
            .collect()
    });
    &all[&n]
}

fn closure_table() -> &'static ClosureTable {
    static TABLE: OnceLock<ClosureTable> = OnceLock::new();
    TABLE.get_or_init(|| ClosureTable::new(&EnumSpec::new(["a", "b", "z"], 6)))
}

fn payload_roots() -> Vec<Label> {
    ["a", "b", "z"].iter().map(|n| Label::element(*n)).chain([Label::text("")]).collect()
}

/// Every update on `t` with payload roots over {a, b, z} and text.
fn updates(t: &Tree) -> Vec<AtomicUpdate> {
    let mut out = Vec::new();
    for n in t.nodes() {
        out.push(AtomicUpdate::delete(n));
        for r in payload_roots() {
            out.push(AtomicUpdate::insert(n, Tree::leaf(r.clone())));
            out.push(AtomicUpdate::update(n, Tree::leaf(r)));
        }
    }
    out
}

fn arb_capability() -> impl Strategy<Value = UpdateCapability> {
    let test = prop_oneof![
        Just(NodeTest::element("a")),
        Just(NodeTest::element("z")),
        Just(NodeTest::Wildcard),
        Just(NodeTest::Text),
    ];
    (any::<bool>(), arb_path(Shape::FULL, &["a", "b"]), test).prop_map(|(del, p, t)| {
        if del {
            UpdateCapability::delete(p)
        } else {
            UpdateCapability::new(OpKind::Insert, p, Some(t)).unwrap()
        }
    })
}

#[test]
fn degenerate_modes_coincide() {
    let ps = ["//a[b]", "/a//b", "//*[a]", "/a/*"];
    for i in 0..ps.len() {
        for j in i..ps.len() {
            let caps = [ps[i], ps[j]].map(|s| UpdateCapability::delete(common::path(s)));
            let deny_only = |cr| build(Sign::Allow, cr, caps.iter().map(|c| (Sign::Deny, c.clone())));
            let allow_only = |cr| build(Sign::Deny, cr, caps.iter().map(|c| (Sign::Allow, c.clone())));
            for t in trees(4) {
                for u in updates(t) {
                    let v = |p: &Policy| dynamically_allowed(p, &u, t).unwrap();
                    assert_eq!(v(&deny_only(Sign::Allow)), v(&deny_only(Sign::Deny)));
                    assert_eq!(v(&allow_only(Sign::Allow)), v(&allow_only(Sign::Deny)));
                }
            }
        }
    }
}

#[test]
fn example_verdicts() {
    let ex1 = Policy::parse("default: deny\nconflict: deny\n+ delete /a\n- delete /a[b]").unwrap();
    let root = AtomicUpdate::delete(tree("a").root());
    assert!(dynamically_allowed(&ex1, &root, &tree("a")).unwrap());
    assert!(!dynamically_allowed(&ex1, &root, &tree("a(b)")).unwrap());
    let rep = check_fairness(&ex1, &FragmentId::filter_paths(), &budget()).unwrap();
    let FairnessVerdict::Unfair(cex) = rep.verdict else {
        panic!("expected a counterexample");
    };
    assert_eq!((cex.allowed.to_string(), cex.denied.to_string()), ("a @ /a".into(), "a(b) @ /a".into()));
    let (closed, v) = xguard_core::oracle::oracle_hom_closed(&ex1, &EnumSpec::new(["a", "b"], 3));
    assert!(!closed);
    let v = v.unwrap();
    assert_eq!((v.from.to_string(), v.to.to_string()), ("a @ /a".into(), "a(b) @ /a".into()));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn dynamic_check_matches_materialized_set(p in arb_mixed_policy(4), t in arb_tree(5, &["a", "b", "z"])) {
        let set = oracle_allowed_set(&p, &t);
        for u in updates(&t) {
            let key = UpdateKey { kind: u.kind, target: u.target, root: u.payload_root().cloned() };
            // Payload roots outside the materialized universe are skipped.
            let listed = set.contains(&key);
            let dynamic = dynamically_allowed(&p, &u, &t).unwrap();
            if listed || set.iter().any(|k| k.kind == key.kind && k.root == key.root) {
                prop_assert_eq!(dynamic, listed, "{} on {}", u.describe(&t), t);
            }
        }
    }

    #[test]
    fn static_permission_is_sound(p in arb_mixed_policy(3), u in arb_capability()) {
        if !statically_allowed(&p, &u, &budget()).unwrap() {
            return Ok(());
        }
        for t in trees(5) {
            let inst = capability_instances(&u, t);
            for v in updates(t) {
                if inst.contains(&v) {
                    prop_assert!(dynamically_allowed(&p, &v, t).unwrap(), "{} allowed but {} on {} is not", u, v.describe(t), t);
                }
            }
        }
    }

    #[test]
    fn fairness_agrees_with_closure(p in arb_mixed_policy(3)) {
        let rep = check_fairness(&p, &FragmentId::filter_paths(), &budget()).unwrap();
        let violation = closure_table().check(&p);
        match rep.verdict {
            FairnessVerdict::Fair { .. } => prop_assert!(violation.is_none(), "fair but {:?}\n{}", violation, p),
            FairnessVerdict::Unfair(cex) => {
                let (a, d) = (&cex.allowed, &cex.denied);
                prop_assert!(is_homomorphism(&a.tree, &d.tree, &cex.mapping).unwrap());
                prop_assert_eq!(cex.mapping.apply(a.mark), d.mark);
                let at = |n| match &cex.class {
                    None => AtomicUpdate::delete(n),
                    Some(l) => AtomicUpdate { kind: cex.kind, target: n, payload: Some(Tree::leaf(l.clone())) },
                };
                prop_assert!(dynamically_allowed(&p, &at(a.mark), &a.tree).unwrap());
                prop_assert!(!dynamically_allowed(&p, &at(d.mark), &d.tree).unwrap());
                prop_assert!(!cex.violated.is_empty() || p.default == Sign::Deny);
                if a.tree.len().max(d.tree.len()) <= 6 {
                    prop_assert!(violation.is_some(), "unfair by {} -> {} but closed\n{}", a, d, p);
                }
            }
        }
    }

    #[test]
    fn fair_policies_cover_allowed_updates(p in arb_mixed_policy(3)) {
        let fragment = FragmentId::filter_paths();
        if !check_fairness(&p, &fragment, &budget()).unwrap().verdict.is_fair() {
            return Ok(());
        }
        for t in trees(3) {
            for u in updates(t) {
                if !dynamically_allowed(&p, &u, t).unwrap() {
                    continue;
                }
                let cap = find_covering_capability(&p, &u, t, &fragment, &budget()).unwrap();
                let Some(cap) = cap else {
                    return Err(TestCaseError::fail(format!("{} on {} uncovered\n{}", u.describe(t), t, p)));
                };
                prop_assert!(capability_instances(&cap, t).contains(&u));
            }
        }
    }

    #[test]
    fn filter_free_policies_are_fair_for_both_fragments(p in arb_delete_policy(Shape::FILTER_FREE, 4)) {
        for f in [FragmentId::linear(), FragmentId::filter_paths()] {
            prop_assert!(check_fairness(&p, &f, &budget()).unwrap().verdict.is_fair());
        }
        prop_assert!(closure_table().check(&p).is_none());
    }
}

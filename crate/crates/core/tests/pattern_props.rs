mod common;

use std::sync::OnceLock;

use common::{alphabet, arb_marked, arb_path, Shape};
use proptest::prelude::*;
use xguard_core::oracle::{enumerate_paths, enumerate_trees, EnumSpec, EvalTable};
use xguard_core::pattern::{fp_enumerate, intersect_marked, lp_enumerate, TreePattern};
use xguard_core::tree::MarkedTree;
use xguard_core::xpath::eval;

#[test]
fn patterns_select_what_paths_select() {
    let paths = enumerate_paths(&alphabet(&["a", "b"]), 2);
    let trees: Vec<_> = enumerate_trees(&EnumSpec::new(["a", "b", "z"], 4)).collect();
    for p in &paths {
        let pat = TreePattern::from_path(p).unwrap();
        for t in &trees {
            assert_eq!(pat.select(t), eval(p, t), "{p} on {t}");
        }
    }
}

/// Small trees over {a, b}: linear paths and filter paths of `p` that fit
/// the tree select the same nodes as `p`.
#[test]
fn linear_and_filter_expansions_at_bound() {
    let ab = alphabet(&["a", "b"]);
    let trees: Vec<_> = enumerate_trees(&EnumSpec::new(["a", "b"], 4)).collect();
    for p in enumerate_paths(&ab, 2) {
        let pat = TreePattern::from_path(&p).unwrap();
        // A gap below the document node can span a whole tree of height 3.
        let fp = fp_enumerate(&p, pat.size() + 3 * pat.descendant_edges().len(), &ab).unwrap();
        let lp = lp_enumerate(&p, 4, &ab).ok();
        for t in &trees {
            let selected = eval(&p, t);
            let mut by_fp = selected.clone();
            by_fp.difference_with(&selected);
            for a in &fp {
                by_fp.union_with(&eval(a, t));
            }
            assert_eq!(by_fp, selected, "filter paths of {p} on {t}");
            if let Some(lp) = &lp {
                let mut by_lp = by_fp.clone();
                by_lp.difference_with(&selected);
                for a in lp {
                    by_lp.union_with(&eval(a, t));
                }
                assert_eq!(by_lp, selected, "linear paths of {p} on {t}");
            }
        }
    }
}

fn abc_table() -> &'static EvalTable {
    static TABLE: OnceLock<EvalTable> = OnceLock::new();
    TABLE.get_or_init(|| EvalTable::new(&EnumSpec::new(["a", "b", "c"], 5)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn pattern_matching_agrees_with_evaluation(p in arb_path(Shape::FULL, &["a", "b"]), t in arb_marked(7, &["a", "b", "z"])) {
        let pat = TreePattern::from_path(&p).unwrap();
        prop_assert_eq!(pat.matches(&t), eval(&p, &t.tree).contains(t.mark));
    }

    #[test]
    fn canonical_instances_are_selected(p in arb_path(Shape::FULL, &["a", "b"]), k in 1usize..=2) {
        let pat = TreePattern::from_path(&p).unwrap();
        for inst in pat.instances(k, "z").unwrap() {
            prop_assert!(pat.matches(&inst));
            prop_assert!(eval(&p, &inst.tree).contains(inst.mark), "{} misses {}", p, inst);
        }
    }

    #[test]
    fn marked_intersection_law(
        p1 in arb_path(Shape::FILTER_PATHS, &["a", "b", "c"]),
        p2 in arb_path(Shape::FILTER_PATHS, &["a", "b", "c"]),
    ) {
        let t1 = TreePattern::from_path(&p1).unwrap().instance("z").unwrap();
        let t2 = TreePattern::from_path(&p2).unwrap().instance("z").unwrap();
        let table = abc_table();
        let both = table.select(&p1).intersect(&table.select(&p2));
        match intersect_marked(&t1, &t2) {
            Some(r) => {
                let rp = TreePattern::from_marked_tree(&r).unwrap().to_path().unwrap();
                prop_assert_eq!(table.select(&rp), both);
                // The glued tree is itself a common image.
                prop_assert!(xguard_core::tree::has_marked_homomorphism(&t1, &r));
                prop_assert!(xguard_core::tree::has_marked_homomorphism(&t2, &r));
            }
            None => prop_assert_eq!(both.count(), 0),
        }
    }
}

#[test]
fn intersection_example() {
    let t = |s: &str| MarkedTree::at_root(xguard_core::tree::Tree::parse(s).unwrap());
    let r = intersect_marked(&t("a(b)"), &t("a(c)")).unwrap();
    assert_eq!(r.tree.to_string(), "a(b,c)");
    assert!(intersect_marked(&t("a"), &t("b")).is_none());
}

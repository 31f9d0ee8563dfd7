mod common;

use std::collections::BTreeSet;

use common::{arb_marked, arb_tree, tree};
use proptest::prelude::*;
use xguard_core::oracle::{enumerate_trees, EnumSpec};
use xguard_core::tree::{
    compose, has_marked_homomorphism, is_homomorphism, marked_homomorphisms, Label, MarkedTree, NodeId,
    NodeMapping, Relabeling, Tree,
};

fn marked(s: &str) -> MarkedTree {
    MarkedTree::at_root(tree(s))
}

#[test]
fn homomorphism_counts() {
    assert_eq!(marked_homomorphisms(&marked("a(b)"), &marked("a(b,c)")).len(), 1);
    assert_eq!(marked_homomorphisms(&marked("a(b)"), &marked("a(b,b)")).len(), 2);
    assert!(marked_homomorphisms(&marked("a(c)"), &marked("a(b)")).is_empty());
    // Folding: a(b,b) maps onto a(b).
    assert_eq!(marked_homomorphisms(&marked("a(b,b)"), &marked("a(b)")).len(), 1);
}

#[test]
fn identity_is_always_a_marked_homomorphism() {
    for t in enumerate_trees(&EnumSpec::new(["a", "b"], 4)) {
        for m in t.nodes() {
            let x = MarkedTree::new(t.clone(), m).unwrap();
            assert!(marked_homomorphisms(&x, &x).contains(&NodeMapping::identity(t.len())), "{x}");
        }
    }
}

#[test]
fn hospital_term_round_trips() {
    let s = r#"hospital(patients(patient(@wardNo="3",treatment,"Bed \"7\"")))"#;
    let t = tree(s);
    assert_eq!(t.len(), 6);
    assert_eq!(Tree::parse(&t.to_string()).unwrap(), t);
    assert!(matches!(t.label(NodeId::new(3)), Label::Attribute { .. }));
}

/// Rebuilds `t` with node ids permuted by `perm` and children listed in
/// the resulting order.
fn permute(t: &Tree, perm: &[usize]) -> Tree {
    let mut inverse = vec![0; perm.len()];
    for (old, new) in perm.iter().enumerate() {
        inverse[*new] = old;
    }
    let labels = inverse.iter().map(|&old| t.label(NodeId::new(old)).clone()).collect();
    let parents = inverse
        .iter()
        .map(|&old| t.parent(NodeId::new(old)).map(|p| perm[p.index()]))
        .collect();
    Tree::from_parents(labels, parents).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn canonical_form_ignores_sibling_order(t in arb_tree(7, &["a", "b", "c"]), seed in any::<u64>()) {
        let mut perm: Vec<usize> = (0..t.len()).collect();
        let mut s = seed;
        for i in (1..perm.len()).rev() {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            perm.swap(i, (s >> 33) as usize % (i + 1));
        }
        let shuffled = permute(&t, &perm);
        prop_assert_eq!(t.canonicalize(), shuffled.canonicalize());
        prop_assert!(t.canonicalize().is_canonical());
        prop_assert_eq!(t.canonicalize().canonicalize(), t.canonicalize());
    }

    #[test]
    fn relabeling_commutes_with_canonical_form(t in arb_tree(6, &["a", "b", "c"]), to in prop::sample::select(vec!["a", "b", "c", "d"])) {
        let r = Relabeling::from_pairs([("a", to), ("c", "b")]);
        prop_assert_eq!(r.apply(&t.canonicalize()).canonicalize(), r.apply(&t).canonicalize());
    }

    #[test]
    fn term_syntax_round_trips(t in arb_tree(7, &["a", "b", "c"])) {
        // Parsing numbers nodes in preorder, so compare renderings.
        let back = Tree::parse(&t.to_string()).unwrap();
        prop_assert_eq!(back.to_string(), t.to_string());
        prop_assert_eq!(back.canonicalize(), t.canonicalize());
    }

    #[test]
    fn homomorphisms_compose(x in arb_marked(4, &["a", "b"]), y in arb_marked(4, &["a", "b"]), z in arb_marked(5, &["a", "b"])) {
        for h1 in marked_homomorphisms(&x, &y) {
            for h2 in marked_homomorphisms(&y, &z) {
                let h = compose(&h2, &h1);
                prop_assert!(is_homomorphism(&x.tree, &z.tree, &h).unwrap());
                prop_assert_eq!(h.apply(x.mark), z.mark);
            }
        }
        if has_marked_homomorphism(&x, &y) && has_marked_homomorphism(&y, &z) {
            prop_assert!(has_marked_homomorphism(&x, &z));
        }
    }

    #[test]
    fn enumeration_is_canonical_and_duplicate_free(n in 1usize..=5) {
        let spec = EnumSpec::new(["a", "b"], n);
        let mut seen = BTreeSet::new();
        for t in enumerate_trees(&spec) {
            prop_assert!(t.is_canonical());
            prop_assert!(t.len() <= n);
            prop_assert!(seen.insert(t.to_string()));
        }
    }
}

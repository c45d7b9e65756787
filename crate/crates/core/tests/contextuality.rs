use proptest::prelude::*;

use cyclectx::ncycle::{
    cycle_behavior, even_to_unified_mask, odd_to_unified_mask, relabel, rotate, CycleKind, FlipMask,
};
use cyclectx::scenario::{
    enumerate_global_assignments, is_logically_contextual, make_cycle_scenario, propagate_chain, PossibilisticBehavior,
};

/// Possible tuples that no support-respecting global assignment restricts to,
/// found by scanning all `2^n` assignments directly.
fn brute_force_witnesses(pb: &PossibilisticBehavior) -> Vec<(Vec<usize>, Vec<u8>)> {
    let s = pb.scenario();
    let n = s.measurements();
    let consistent: Vec<Vec<u8>> = (0u32..1 << n)
        .map(|bits| (0..n).map(|k| ((bits >> k) & 1) as u8).collect::<Vec<u8>>())
        .filter(|g| {
            s.contexts()
                .iter()
                .enumerate()
                .all(|(c, ctx)| pb.is_possible(c, &ctx.iter().map(|&l| g[l - 1]).collect::<Vec<_>>()))
        })
        .collect();
    let mut out = Vec::new();
    for (c, ctx) in s.contexts().iter().enumerate() {
        for idx in 0..s.tuple_count(c) {
            let t = s.tuple_at(c, idx);
            let reproduced = consistent.iter().any(|g| ctx.iter().zip(&t).all(|(&l, &o)| g[l - 1] == o));
            if pb.is_possible(c, &t) && !reproduced {
                out.push((ctx.clone(), t));
            }
        }
    }
    out
}

fn random_cycle_support() -> impl Strategy<Value = PossibilisticBehavior> {
    (3usize..=8).prop_flat_map(|n| {
        prop::collection::vec(1u8..16, n).prop_map(move |masks| {
            let s = make_cycle_scenario(n).unwrap();
            let supports = masks.iter().map(|m| (0..4).map(|k| (m >> k) & 1 == 1).collect()).collect();
            PossibilisticBehavior::new(s, supports).unwrap()
        })
    })
}

fn kind_and_n() -> impl Strategy<Value = (CycleKind, usize)> {
    prop_oneof![
        (4usize..=10).prop_map(|n| (CycleKind::Unified, n)),
        (2usize..=4).prop_map(|k| (CycleKind::Odd, 2 * k + 1)),
        (2usize..=5).prop_map(|k| (CycleKind::Even, 2 * k)),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn verdict_matches_brute_force(pb in random_cycle_support()) {
        let v = is_logically_contextual(&pb).unwrap();
        let expected = brute_force_witnesses(&pb);
        prop_assert_eq!(v.contextual, !expected.is_empty());
        prop_assert_eq!(&v.witnessing_tuples, &expected);
        if let Some(w) = &v.witness {
            prop_assert_eq!((&w.context, &w.tuple), (&expected[0].0, &expected[0].1));
            prop_assert_eq!(w.kills.len(), 1 << (pb.scenario().measurements() - w.context.len()));
            for k in &w.kills {
                let c = pb.scenario().context_index(&k.context).unwrap();
                prop_assert!(!pb.is_possible(c, &k.restricted));
            }
        }
    }

    #[test]
    fn relabeling_preserves_the_verdict(pb in random_cycle_support(), flips in prop::collection::vec(any::<bool>(), 8)) {
        let n = pb.scenario().measurements();
        let mask = FlipMask::new(flips[..n].to_vec());
        let a = is_logically_contextual(&pb).unwrap();
        let b = is_logically_contextual(&relabel(&pb, &mask).unwrap()).unwrap();
        prop_assert_eq!(a.contextual, b.contextual);
        prop_assert_eq!(a.witnessing_tuples.len(), b.witnessing_tuples.len());
        prop_assert_eq!(relabel(&relabel(&pb, &mask).unwrap(), &mask).unwrap(), pb);
    }

    #[test]
    fn rotation_preserves_the_verdict(pb in random_cycle_support(), k in 0usize..8) {
        let a = is_logically_contextual(&pb).unwrap();
        let b = is_logically_contextual(&rotate(&pb, k).unwrap()).unwrap();
        prop_assert_eq!(a.contextual, b.contextual);
    }

    #[test]
    fn cycle_families_are_contextual_through_their_required_tuple((kind, n) in kind_and_n()) {
        let b = cycle_behavior(kind, n).unwrap();
        let v = is_logically_contextual(b.support()).unwrap();
        prop_assert!(v.contextual);
        let req = &b.required()[0];
        prop_assert!(v.is_witness(&req.context, &req.tuple));
        prop_assert_eq!(&brute_force_witnesses(b.support()), &v.witnessing_tuples);
        let seeds: Vec<_> = req.context.iter().copied().zip(req.tuple.iter().copied()).collect();
        prop_assert!(propagate_chain(b.support(), &seeds).unwrap().is_conflict());
    }

    #[test]
    fn families_relabel_onto_unified((kind, n) in kind_and_n()) {
        let b = cycle_behavior(kind, n).unwrap();
        let mask = match kind {
            CycleKind::Unified => FlipMask::identity(n),
            CycleKind::Odd => odd_to_unified_mask(n).unwrap(),
            CycleKind::Even => even_to_unified_mask(n).unwrap(),
        };
        let u = cycle_behavior(CycleKind::Unified, n).unwrap();
        prop_assert!(b.relabel(&mask).unwrap().same_constraints(&u));
    }
}

#[test]
fn full_support_is_noncontextual() {
    for n in 3..=10 {
        let pb = PossibilisticBehavior::full(make_cycle_scenario(n).unwrap());
        assert!(!is_logically_contextual(&pb).unwrap().contextual);
    }
}

#[test]
fn global_assignments_are_counted_once() {
    let s = make_cycle_scenario(6).unwrap();
    let all: Vec<_> = enumerate_global_assignments(&s).unwrap().collect();
    assert_eq!(all.len(), 64);
    let mut sorted = all.clone();
    sorted.sort();
    sorted.dedup();
    assert_eq!(sorted.len(), 64);
}

#[test]
fn unified_chain_forces_every_label() {
    let b = cycle_behavior(CycleKind::Unified, 7).unwrap();
    let p = propagate_chain(b.support(), &[(1, 0)]).unwrap();
    assert!(!p.is_conflict());
    assert_eq!(p.forced().len(), 6);
    assert!((2..=7).all(|l| p.value(l) == Some(0)));
    let p = propagate_chain(b.support(), &[(1, 0), (7, 1)]).unwrap();
    assert!(p.is_conflict());
}

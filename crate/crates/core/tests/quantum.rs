use proptest::prelude::*;

use cyclectx::linalg::{StateVector, C64};
use cyclectx::oracles::{exhaustive_support_check, projection_sequential};
use cyclectx::quantum::{
    behavior_from_realization, born_pair, born_single, kcbs_realization, verify_compatibility, Projector,
    QuantumRealization,
};
use cyclectx::scenario::{make_cycle_scenario, Behavior, PossibilisticBehavior};
use cyclectx::Error;

/// Orthonormal columns from the rows of `raw` (`None` if nearly dependent).
fn orthonormal(raw: &[Vec<f64>]) -> Option<Vec<Vec<f64>>> {
    let mut out: Vec<Vec<f64>> = Vec::new();
    for v in raw {
        let mut w = v.clone();
        for u in &out {
            let d: f64 = w.iter().zip(u).map(|(a, b)| a * b).sum();
            w.iter_mut().zip(u).for_each(|(a, b)| *a -= d * b);
        }
        let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm < 1e-3 {
            return None;
        }
        out.push(w.into_iter().map(|x| x / norm).collect());
    }
    Some(out)
}

fn rotate(q: &[Vec<f64>], v: &StateVector) -> StateVector {
    let amps: Vec<C64> = q.iter().map(|row| row.iter().zip(v.amplitudes()).map(|(&a, &z)| z * a).sum()).collect();
    StateVector::new(amps).unwrap()
}

fn rotated_kcbs(q: &[Vec<f64>]) -> QuantumRealization {
    let r = kcbs_realization();
    let vectors = r.projectors().iter().map(|p| rotate(q, p.vector().unwrap())).collect();
    QuantumRealization::from_vectors(rotate(q, r.state()), vectors).unwrap()
}

fn rotation() -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec(-1.0f64..1.0, 3), 3).prop_filter_map("degenerate", |m| orthonormal(&m))
}

fn phase() -> impl Strategy<Value = f64> {
    0.0f64..std::f64::consts::TAU
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn statistics_are_rotation_invariant(q in rotation()) {
        let s = make_cycle_scenario(5).unwrap();
        let a = behavior_from_realization(&kcbs_realization(), &s).unwrap();
        let b = behavior_from_realization(&rotated_kcbs(&q), &s).unwrap();
        for c in 0..5 {
            for (x, y) in a.table(c).iter().zip(b.table(c)) {
                prop_assert!((x - y).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn global_phase_of_vectors_is_irrelevant(t in phase(), label in 1usize..=5) {
        let r = kcbs_realization();
        let v = r.projector(label).unwrap().vector().unwrap().scaled(C64::from_polar(1.0, t));
        let r2 = r.with_projector(label, Projector::rank_one(v).unwrap()).unwrap();
        let s = make_cycle_scenario(5).unwrap();
        let a = behavior_from_realization(&r, &s).unwrap();
        let b = behavior_from_realization(&r2, &s).unwrap();
        for c in 0..5 {
            for (x, y) in a.table(c).iter().zip(b.table(c)) {
                prop_assert!((x - y).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn born_pairs_agree_with_sequential_projection(q in rotation(), i in 1usize..=5) {
        let r = rotated_kcbs(&q);
        let j = i % 5 + 1;
        let p = born_pair(&r, i, j).unwrap();
        let seq = projection_sequential(&r, &[i, j]).unwrap();
        for a in 0..2u8 {
            for b in 0..2u8 {
                prop_assert!((p.prob(a, b) - seq.prob(&[a, b])).abs() < 1e-12);
            }
        }
        prop_assert!((p.marginal_first(1) - born_single(&r, i).unwrap()).abs() < 1e-12);
    }
}

#[test]
fn qutrit_five_cycle_statistics() {
    let r = kcbs_realization();
    let expected = [1.0 / 9.0, 2.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0, 2.0 / 3.0];
    for (l, e) in (1..=5).zip(expected) {
        assert!((born_single(&r, l).unwrap() - e).abs() < 1e-12);
    }
    let s = make_cycle_scenario(5).unwrap();
    let b = behavior_from_realization(&r, &s).unwrap();
    assert!(b.check_no_disturbance(1e-12));
    let c15 = s.context_index(&[1, 5]).unwrap();
    assert!((b.prob(c15, &[1, 0]) - 1.0 / 9.0).abs() < 1e-12);
    for c in 0..5 {
        assert!(b.prob(c, &[1, 1]) < 1e-12);
    }
    assert!(verify_compatibility(&r, &s, 1e-12).unwrap().pass());
    let oracle = exhaustive_support_check(&r, &s, 1e-12).unwrap();
    assert!(oracle.supports_agree && oracle.max_abs_diff < 1e-12);
}

#[test]
fn noncommuting_pairs_are_rejected() {
    let r = kcbs_realization();
    assert!(matches!(born_pair(&r, 1, 3), Err(Error::NonCommuting { .. })));
    assert!(born_pair(&r, 1, 1).is_err());
    assert!(matches!(born_pair(&r, 1, 9), Err(Error::UnknownLabel(9))));
}

#[test]
fn realization_json_round_trip() {
    let r = kcbs_realization();
    let back = QuantumRealization::from_json(&r.to_json()).unwrap();
    assert_eq!(back.dim(), 3);
    for l in 1..=5 {
        for m in (l + 1)..=5 {
            assert!((back.commutator(l, m).unwrap() - r.commutator(l, m).unwrap()).abs() < 1e-15);
        }
    }

    let e = |k| StateVector::basis(4, k);
    let plane = Projector::from_basis(vec![e(0), e(1)]).unwrap();
    let mixed = QuantumRealization::new(e(0), vec![plane.clone(), Projector::rank_one(e(2)).unwrap()]).unwrap();
    let json = mixed.to_json();
    assert!(json.get("subspaces").is_some());
    let back = QuantumRealization::from_json(&json).unwrap();
    assert_eq!(back.projectors()[0].rank(), 2);
    assert_eq!(back.projectors()[1].rank(), 1);
}

#[test]
fn behavior_json_round_trip() {
    let s = make_cycle_scenario(5).unwrap();
    let b = behavior_from_realization(&kcbs_realization(), &s).unwrap();
    let back = Behavior::from_json(&b.to_json()).unwrap();
    for c in 0..5 {
        assert_eq!(b.table(c), back.table(c));
    }
    let pb = b.possibilistic_collapse(1e-9);
    assert_eq!(PossibilisticBehavior::from_json(&pb.to_json()).unwrap(), pb);
}

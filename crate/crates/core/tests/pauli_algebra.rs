mod common;

use common::{cx, dense_of, dense_pauli, jacobi_sum, max_diff};
use pauligeo::pauli::decompose_hermitian;
use pauligeo::{HermitianCoeffs, PauliString, Phase};
use proptest::prelude::*;

fn string(n: usize) -> impl Strategy<Value = PauliString> {
    (0..(1u64 << (2 * n))).prop_map(move |k| PauliString::from_index(k, n).unwrap())
}

fn pair(max_n: usize) -> impl Strategy<Value = (PauliString, PauliString)> {
    (1..=max_n).prop_flat_map(|n| (string(n), string(n)))
}

fn triple(max_n: usize) -> impl Strategy<Value = (PauliString, PauliString, PauliString)> {
    (1..=max_n).prop_flat_map(|n| (string(n), string(n), string(n)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2000))]

    #[test]
    fn product_is_associative((p, q, r) in triple(8)) {
        let pq = p.product(&q).unwrap();
        let left = pq.string.product(&r).unwrap();
        let qr = q.product(&r).unwrap();
        let right = p.product(&qr.string).unwrap();
        prop_assert_eq!(left.string, right.string);
        prop_assert_eq!(pq.phase * left.phase, qr.phase * right.phase);
    }

    #[test]
    fn commutator_is_antisymmetric((p, q) in pair(8)) {
        let a = p.commutator(&q).unwrap();
        let b = q.commutator(&p).unwrap();
        match (a, b) {
            (None, None) => prop_assert!(p.commutes_with(&q)),
            (Some(a), Some(b)) => {
                prop_assert_eq!(a.string, b.string);
                prop_assert_eq!(a.scale, 2);
                prop_assert_eq!(a.phase, -b.phase);
            }
            _ => prop_assert!(false, "one-sided commutator"),
        }
    }

    #[test]
    fn jacobi_identity((p, q, r) in triple(8)) {
        prop_assert!(jacobi_sum(p, q, r).is_empty());
    }

    #[test]
    fn materialization_is_a_homomorphism((p, q) in pair(5)) {
        let pq = p.product(&q).unwrap();
        let lhs = dense_pauli(&p.to_string()) * dense_pauli(&q.to_string());
        let rhs = dense_pauli(&pq.string.to_string()) * pq.phase.to_complex();
        prop_assert!(max_diff(&lhs, &rhs) < 1e-12);
        prop_assert!(max_diff(&p.materialize().unwrap(), &dense_pauli(&p.to_string())) == 0.0);
    }

    #[test]
    fn index_roundtrip((n, k) in (1usize..=8).prop_flat_map(|n| (Just(n), 0..(1u64 << (2 * n))))) {
        let p = PauliString::from_index(k, n).unwrap();
        prop_assert_eq!(p.index(), k);
        let text = p.to_string();
        prop_assert_eq!(text.parse::<PauliString>().unwrap(), p);
        prop_assert_eq!(p.weight(), text.chars().filter(|&c| c != 'I').count());
    }

    #[test]
    fn weight_is_subadditive((p, q) in pair(8)) {
        let r = p.product(&q).unwrap().string;
        prop_assert!(r.weight() <= p.weight() + q.weight());
    }
}

fn coeffs(n: usize) -> impl Strategy<Value = HermitianCoeffs> {
    prop::collection::vec((string(n), -2.0f64..2.0), 0..6)
        .prop_map(move |terms| HermitianCoeffs::from_terms(n, terms).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn lie_bracket_matches_dense((a, b) in (1usize..=3).prop_flat_map(|n| (coeffs(n), coeffs(n)))) {
        let (da, db) = (dense_of(&a), dense_of(&b));
        let expect = (&da * &db - &db * &da) * cx(0.0, -1.0);
        prop_assert!(max_diff(&dense_of(&a.lie_bracket(&b)), &expect) < 1e-10);
    }

    #[test]
    fn decomposition_inverts_materialization(a in (1usize..=3).prop_flat_map(coeffs)) {
        let back = decompose_hermitian(&a.to_dense().unwrap()).unwrap();
        prop_assert!(back.axpy(-1.0, &a).max_abs() < 1e-12);
        prop_assert!(max_diff(&a.to_dense().unwrap(), &dense_of(&a)) < 1e-12);
    }

    #[test]
    fn dot_is_normalized_trace((a, b) in (1usize..=3).prop_flat_map(|n| (coeffs(n), coeffs(n)))) {
        let d = (1usize << a.n()) as f64;
        let tr = common::trace_product(&dense_of(&a), &dense_of(&b));
        prop_assert!((a.dot(&b) - tr.re / d).abs() < 1e-10);
    }
}

#[test]
fn named_products() {
    let p = |s: &str| s.parse::<PauliString>().unwrap();
    let xy = p("X").product(&p("Y")).unwrap();
    assert_eq!((xy.phase, xy.string), (Phase::PlusI, p("Z")));
    let yx = p("Y").product(&p("X")).unwrap();
    assert_eq!((yx.phase, yx.string), (Phase::MinusI, p("Z")));
    let c = p("XX").commutator(&p("ZI")).unwrap().unwrap();
    assert_eq!((c.phase, c.scale, c.string), (Phase::MinusI, 2, p("YX")));
    assert!(p("XX").commutator(&p("ZZ")).unwrap().is_none());
}

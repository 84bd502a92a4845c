mod common;

use common::{forward, lemmas, phi, random_tensor, rel, rel_scalar, rng};
use proptest::prelude::*;
use tsvd_core::*;

const KINDS: [TransformKind; 2] = [TransformKind::Dft, TransformKind::Dct];

fn spec(kind: TransformKind, n3: usize) -> TransformSpec {
    make_transform(kind, n3).unwrap()
}

fn kind_strategy() -> impl Strategy<Value = TransformKind> {
    prop_oneof![Just(TransformKind::Dft), Just(TransformKind::Dct)]
}

fn tensor_strategy(n1: usize, n2: usize, n3: usize) -> impl Strategy<Value = Tensor3> {
    proptest::collection::vec(-1.0f64..1.0, n1 * n2 * n3)
        .prop_map(move |v| Tensor3::from_vec(n1, n2, n3, v).unwrap())
}

#[test]
fn product_matches_block_diagonal_oracle() {
    let mut g = rng(1);
    for kind in KINDS {
        let s = spec(kind, 2);
        let a = random_tensor(2, 3, 2, &mut g);
        let b = random_tensor(3, 2, 2, &mut g);
        let got = t_product(&a, &b, &s).unwrap();
        assert!(rel(&got, &common::t_product(&a, &b, kind)) < 1e-12);
    }
}

#[test]
fn n3_one_is_matrix_algebra() {
    let mut g = rng(2);
    let s = spec(TransformKind::Dft, 1);
    let a = random_tensor(3, 4, 1, &mut g);
    let b = random_tensor(4, 2, 1, &mut g);
    let ab = t_product(&a, &b, &s).unwrap();
    let m = a.frontal_slice(0) * b.frontal_slice(0);
    assert!((ab.frontal_slice(0) - m).amax() < 1e-14);
    let at = conj_transpose(&a, &s).unwrap();
    assert_eq!(at.frontal_slice(0), a.frontal_slice(0).transpose());
}

#[test]
fn identity_under_dft_is_first_slice() {
    let s = spec(TransformKind::Dft, 4);
    let i = identity_tensor(2, &s).unwrap();
    for k in 0..4 {
        for r in 0..2 {
            for c in 0..2 {
                let expect = if k == 0 && r == c { 1.0 } else { 0.0 };
                assert!((i.get(r, c, k) - expect).abs() < 1e-15);
            }
        }
    }
}

#[test]
fn truncation_error_is_tail_of_oracle_spectrum() {
    let mut g = rng(3);
    for kind in KINDS {
        let s = spec(kind, 2);
        let a = random_tensor(5, 5, 2, &mut g);
        let f = truncate(&t_svd(&a, &s).unwrap(), 3).unwrap();
        let err = (&f.reconstruct(&s).unwrap() - &a).fro_norm();
        // tail of each slice's spectrum from the oracle's slice SVDs
        let (p, ell) = phi(kind, 2);
        let tail: f64 = forward(&a, &p)
            .iter()
            .map(|m| {
                let mut sv: Vec<f64> = m.singular_values().iter().copied().collect();
                sv.sort_by(|x, y| y.partial_cmp(x).unwrap());
                sv[3..].iter().map(|x| x * x).sum::<f64>()
            })
            .sum();
        assert!(rel_scalar(err, (tail / ell).sqrt()) < 1e-10);
    }
}

#[test]
fn multi_rank_of_synthetic_truth() {
    let s = spec(TransformKind::Dft, 4);
    let gt = synth::gen_ground_truth(9, 8, 4, 4, 5.0, &s, 3).unwrap();
    let mr = multi_rank(&gt.x, &s, 1e-9).unwrap();
    assert_eq!((mr.tubal, mr.s_r), (4, 16));
    let id = identity_tensor(3, &spec(TransformKind::Dct, 2)).unwrap();
    let mr = multi_rank(&id, &spec(TransformKind::Dct, 2), 1e-9).unwrap();
    assert_eq!((mr.ranks.clone(), mr.s_r, mr.tubal), (vec![3, 3], 6, 3));
}

#[test]
fn norms_of_identity_and_zero() {
    for kind in KINDS {
        let s = spec(kind, 3);
        let id = identity_tensor(4, &s).unwrap();
        assert!((norm(&id, NormKind::Spectral, &s).unwrap() - 1.0).abs() < 1e-12);
        let z = Tensor3::zeros(2, 3, 3);
        for k in NormKind::ALL {
            assert_eq!(norm(&z, k, &s).unwrap(), 0.0);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn product_is_associative_and_bilinear(
        kind in kind_strategy(),
        a in tensor_strategy(3, 2, 3),
        b in tensor_strategy(2, 4, 3),
        b2 in tensor_strategy(2, 4, 3),
        c in tensor_strategy(4, 2, 3),
        x in -2.0f64..2.0,
    ) {
        let s = spec(kind, 3);
        let left = t_product(&t_product(&a, &b, &s).unwrap(), &c, &s).unwrap();
        let right = t_product(&a, &t_product(&b, &c, &s).unwrap(), &s).unwrap();
        prop_assert!((&left - &right).fro_norm() <= 1e-10 * (1.0 + right.fro_norm()));
        let lin = t_product(&a, &(&b.scale(x) + &b2), &s).unwrap();
        let sum = &t_product(&a, &b, &s).unwrap().scale(x) + &t_product(&a, &b2, &s).unwrap();
        prop_assert!((&lin - &sum).fro_norm() <= 1e-10 * (1.0 + sum.fro_norm()));
    }

    #[test]
    fn transpose_reverses_products(
        kind in kind_strategy(),
        a in tensor_strategy(2, 3, 2),
        b in tensor_strategy(3, 2, 2),
    ) {
        let s = spec(kind, 2);
        let ct = |t: &Tensor3| conj_transpose(t, &s).unwrap();
        let lhs = ct(&t_product(&a, &b, &s).unwrap());
        let rhs = t_product(&ct(&b), &ct(&a), &s).unwrap();
        prop_assert!((&lhs - &rhs).fro_norm() <= 1e-10 * (1.0 + rhs.fro_norm()));
        prop_assert!((&ct(&ct(&a)) - &a).max_abs() <= 1e-12);
    }

    #[test]
    fn svd_reconstructs_with_orthogonal_factors(
        kind in kind_strategy(),
        a in tensor_strategy(6, 4, 3),
    ) {
        let s = spec(kind, 3);
        let f = t_svd(&a, &s).unwrap();
        prop_assert!(rel(&f.reconstruct(&s).unwrap(), &a) <= 1e-9);
        let id = identity_tensor(4, &s).unwrap();
        let uu = t_product(&conj_transpose(&f.u, &s).unwrap(), &f.u, &s).unwrap();
        let vv = t_product(&conj_transpose(&f.v, &s).unwrap(), &f.v, &s).unwrap();
        prop_assert!((&uu - &id).max_abs() <= 1e-9);
        prop_assert!((&vv - &id).max_abs() <= 1e-9);
        for sv in f.transformed_singular_values(&s).unwrap() {
            prop_assert!(sv.windows(2).all(|w| w[0] >= w[1]) && sv.iter().all(|x| *x >= 0.0));
        }
    }

    #[test]
    fn inverse_and_sqrt_multiply_back(kind in kind_strategy(), a in tensor_strategy(3, 3, 4)) {
        let s = spec(kind, 4);
        let id = identity_tensor(3, &s).unwrap();
        let m = &a + &id.scale(4.0);
        let mi = t_inverse(&m, &s).unwrap();
        prop_assert!((&t_product(&m, &mi, &s).unwrap() - &id).max_abs() <= 1e-8);
        let gram = t_product(&conj_transpose(&a, &s).unwrap(), &a, &s).unwrap();
        let root = t_sqrt(&gram, &s).unwrap();
        prop_assert!((&t_product(&root, &root, &s).unwrap() - &gram).max_abs() <= 1e-8 * (1.0 + gram.max_abs()));
    }

    #[test]
    fn tsr3_round_trip(a in tensor_strategy(2, 3, 4)) {
        let bytes = tsr3::encode(&a).unwrap();
        prop_assert_eq!(tsr3::decode(&bytes).unwrap(), a);
    }
}

// --- norm inequalities ---------------------------------------------------

fn assert_holds(b: &lemmas::Bound) {
    assert!(b.slack() >= 0.0, "{}: {} > {}", b.name, b.small, b.big);
}

#[test]
fn sparse_tensor_norm_bounds() {
    let mut g = rng(13);
    for kind in KINDS {
        for trial in 0..100 {
            lemmas::sparse_bounds(kind, trial, &mut g).iter().for_each(assert_holds);
        }
    }
}

#[test]
fn infinity_norm_of_products_is_bounded_by_row_norms() {
    let mut g = rng(10);
    for kind in KINDS {
        for _ in 0..100 {
            assert_holds(&lemmas::infnorm_bound(kind, &mut g));
        }
    }
}

#[test]
fn frobenius_and_row_norms_of_products_are_sandwiched() {
    let mut g = rng(11);
    for kind in KINDS {
        for _ in 0..100 {
            lemmas::sandwich_bounds(kind, &mut g).iter().for_each(assert_holds);
        }
    }
}

#[test]
fn row_norm_of_products_is_bounded() {
    let mut g = rng(12);
    for kind in KINDS {
        for _ in 0..100 {
            assert_holds(&lemmas::row_product_bound(kind, &mut g));
        }
    }
}

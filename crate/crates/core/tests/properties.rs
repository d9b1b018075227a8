use num_complex::Complex64 as C64;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use spinflow::clifford::{act_form, build_gamma};
use spinflow::diagnostics::symbol_operator;
use spinflow::exterior::{d, hodge_star, wedge};
use spinflow::geometry::Metric;
use spinflow::grid::{sbp_check, Grid, RealField};
use spinflow::linalg::{det, inverse, matmul};
use spinflow::multi_index::{binomial, sort_sign, IndexSet};
use spinflow::scenario::{random_form, random_metric, random_state};
use spinflow::snapshot::{from_bytes, to_bytes};

fn spinor(values: &[(f64, f64)]) -> Vec<C64> {
    values.iter().map(|&(a, b)| C64::new(a, b)).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn vector_squares_to_its_norm(n in 1usize..8, seed in any::<u64>()) {
        let basis = build_gamma(n).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        use rand::Rng;
        let v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let psi: Vec<C64> = (0..basis.dim_s()).map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
        let vv = act_form(&basis, 1, &v, &act_form(&basis, 1, &v, &psi).unwrap()).unwrap();
        let norm: f64 = v.iter().map(|x| x * x).sum();
        for (a, b) in vv.iter().zip(&psi) {
            prop_assert!((a - b * norm).norm() < 1e-13);
        }
    }

    #[test]
    fn gamma_products_are_antisymmetric(n in 2usize..7, i in 0usize..7, j in 0usize..7, k in 0usize..7) {
        let basis = build_gamma(n).unwrap();
        let (i, j, k) = (i % n, j % n, k % n);
        let a = basis.gamma_anti(&[i, j, k]).unwrap();
        let b = basis.gamma_anti(&[j, i, k]).unwrap();
        for (x, y) in a.data.iter().zip(&b.data) {
            prop_assert!((x + y).norm() < 1e-14);
        }
    }

    #[test]
    fn sort_sign_matches_inversion_parity(idx in proptest::collection::vec(0usize..10, 0..7)) {
        let inversions = (0..idx.len()).flat_map(|a| (a + 1..idx.len()).map(move |b| (a, b))).filter(|&(a, b)| idx[a] > idx[b]).count();
        match sort_sign(&idx) {
            None => {
                let mut s = idx.clone();
                s.sort();
                s.dedup();
                prop_assert!(s.len() < idx.len());
            }
            Some((sorted, sign)) => {
                prop_assert!(sorted.windows(2).all(|w| w[0] < w[1]));
                prop_assert_eq!(sign, if inversions % 2 == 0 { 1.0 } else { -1.0 });
            }
        }
    }

    #[test]
    fn index_set_size_is_binomial(n in 1usize..9, p in 0usize..9) {
        let set = IndexSet::new(n, p.min(n));
        prop_assert_eq!(set.len(), binomial(n, p.min(n)));
        for (i, idx) in set.iter().enumerate() {
            prop_assert_eq!(set.locate(idx).map(|l| l.0), Some(i));
        }
    }

    #[test]
    fn inverse_and_determinant_agree(n in 1usize..6, seed in any::<u64>()) {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a: Vec<f64> = (0..n * n).map(|i| rng.gen_range(-1.0..1.0) + if i % (n + 1) == 0 { 3.0 } else { 0.0 }).collect();
        let b: Vec<f64> = (0..n * n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let inv = inverse(&a, n).unwrap();
        let id = matmul(&a, &inv, n);
        for i in 0..n {
            for j in 0..n {
                let target = if i == j { 1.0 } else { 0.0 };
                prop_assert!((id[i * n + j] - target).abs() < 1e-12);
            }
        }
        let ab = det(&matmul(&a, &b, n), n);
        prop_assert!((ab - det(&a, n) * det(&b, n)).abs() < 1e-10 * ab.abs().max(1.0));
    }

    #[test]
    fn partials_are_skew_adjoint(size in 5usize..12, order in prop_oneof![Just(2usize), Just(4usize)], seed in any::<u64>()) {
        use rand::Rng;
        let grid = Grid::new(vec![size, size + 1], vec![1.0, 2.5], order).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut a = RealField::from_nodes(&grid, 1, |_, o| o[0] = 0.0);
        let mut b = a.clone();
        for v in a.data.iter_mut().chain(b.data.iter_mut()) {
            *v = rng.gen_range(-1.0..1.0);
        }
        for axis in 0..2 {
            prop_assert!(sbp_check(&a, &b, axis).unwrap().abs() < 1e-10);
        }
    }

    #[test]
    fn exterior_derivative_squares_to_zero(n in 2usize..5, p in 0usize..3, seed in any::<u64>()) {
        prop_assume!(p + 2 <= n);
        let grid = Grid::cubic(n, 5, 2).unwrap();
        let w = random_form(&grid, p, &mut ChaCha8Rng::seed_from_u64(seed), 1.0).unwrap();
        prop_assert!(d(&d(&w).unwrap()).unwrap().field.max_abs() < 1e-11);
    }

    #[test]
    fn wedge_is_graded_commutative(p in 0usize..4, q in 0usize..4, seed in any::<u64>()) {
        prop_assume!(p + q <= 4);
        let grid = Grid::cubic(4, 5, 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random_form(&grid, p, &mut rng, 1.0).unwrap();
        let b = random_form(&grid, q, &mut rng, 1.0).unwrap();
        let sign = if (p * q) % 2 == 0 { 1.0 } else { -1.0 };
        let ab = wedge(&a, &b).unwrap();
        let ba = wedge(&b, &a).unwrap();
        prop_assert!(ab.sub(&ba.scaled(sign)).field.max_abs() < 1e-13);
    }

    #[test]
    fn double_star_is_signed_identity(n in 2usize..5, p in 0usize..5, seed in any::<u64>()) {
        prop_assume!(p <= n);
        let grid = Grid::cubic(n, 5, 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let metric: Metric = random_metric(&grid, &mut rng, 0.3).unwrap();
        let w = random_form(&grid, p, &mut rng, 1.0).unwrap();
        let sign = if (p * (n - p)) % 2 == 0 { 1.0 } else { -1.0 };
        let ss = hodge_star(&hodge_star(&w, &metric).unwrap(), &metric).unwrap();
        prop_assert!(ss.sub(&w.scaled(sign)).field.max_abs() < 1e-11);
    }

    #[test]
    fn gauged_pairing_matches_closed_form(
        n in 2usize..5,
        psi in proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 4),
        sigma in proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 4),
        xi in proptest::collection::vec(-1.0f64..1.0, 4),
        u in proptest::collection::vec(-1.0f64..1.0, 16),
        phi in -1.0f64..1.0,
    ) {
        let basis = build_gamma(n).unwrap();
        let d = basis.dim_s();
        let xi = &xi[..n];
        prop_assume!(xi.iter().map(|x| x * x).sum::<f64>() > 1e-6);
        let mut us = vec![0.0; n * n];
        for p in 0..n {
            for l in 0..n {
                us[p * n + l] = 0.5 * (u[p * 4 + l] + u[l * 4 + p]);
            }
        }
        let s = symbol_operator(&basis, &spinor(&psi[..d]), phi, xi, true).unwrap();
        let sig = spinor(&sigma[..d]);
        let a = s.pairing(&us, &sig);
        let b = s.derived_pairing(&us, &sig);
        prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
        prop_assert!(a >= 0.0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn snapshot_round_trip_is_bit_exact(n in 1usize..4, k in 1usize..4, size in 5usize..7, seed in any::<u64>(), t in any::<f64>()) {
        prop_assume!(k <= n && t.is_finite());
        let grid = Grid::cubic(n, size, 2).unwrap();
        let mut s = random_state(&grid, &build_gamma(n).unwrap(), k, seed, 0.2).unwrap();
        s.t = t;
        let back = from_bytes(&to_bytes(&s)).unwrap();
        prop_assert!(back == s);
        prop_assert_eq!(back.t.to_bits(), s.t.to_bits());
    }
}

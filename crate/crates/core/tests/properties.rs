use gknock::filter::knockoff_threshold;
use gknock::linalg::{cholesky, inverse_sqrt, min_eigenvalue, symmetric_eigen};
use gknock::metrics::hypergeom_tail;
use gknock::partition::GroupPartition;
use nalgebra::DMatrix;
use proptest::prelude::*;

/// Smallest candidate `t` among the nonzero magnitudes whose estimated FDP
/// is at most `q`, by direct enumeration.
fn brute_threshold(w: &[f64], q: f64) -> (f64, Vec<usize>) {
    let mut tau = f64::INFINITY;
    for &t in w.iter().map(|v| v.abs()).filter(|&t| t > 0.0).collect::<Vec<_>>().iter() {
        let pos = w.iter().filter(|&&v| v >= t).count();
        let neg = w.iter().filter(|&&v| v <= -t).count();
        if pos > 0 && (1 + neg) as f64 / pos as f64 <= q && t < tau {
            tau = t;
        }
    }
    let selected = (0..w.len()).filter(|&j| w[j] >= tau).collect();
    (tau, selected)
}

fn binom(n: u64, k: u64) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut c: u128 = 1;
    for i in 0..k {
        c = c * (n - i) as u128 / (i + 1) as u128;
    }
    c
}

fn exact_tail(successes: u64, failures: u64, draws: u64, threshold: u64) -> f64 {
    let total = binom(successes + failures, draws);
    let hits: u128 = (threshold..=draws.min(successes))
        .map(|k| binom(successes, k) * binom(failures, draws - k))
        .sum();
    hits as f64 / total as f64
}

fn statistic_vector() -> impl Strategy<Value = Vec<f64>> {
    // Small integer grid so ties and zeros are common.
    prop::collection::vec((-8i32..=8).prop_map(|v| v as f64 * 0.5), 1..30)
}

fn symmetric_matrix(dim: usize) -> impl Strategy<Value = DMatrix<f64>> {
    (prop::collection::vec(-1.0f64..1.0, dim * dim), -1.5f64..1.5).prop_map(move |(v, shift)| {
        let b = DMatrix::from_vec(dim, dim, v);
        let mut a = &b * b.transpose() / dim as f64;
        for i in 0..dim {
            a[(i, i)] += shift;
        }
        a
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(400))]

    #[test]
    fn threshold_matches_enumeration(w in statistic_vector(), q in 0.0f64..=1.0) {
        let got = knockoff_threshold(&w, q).unwrap();
        let (tau, selected) = brute_threshold(&w, q);
        prop_assert_eq!(got.tau, tau);
        prop_assert_eq!(got.selected, selected);
    }

    #[test]
    fn raising_the_level_never_drops_a_selection(w in statistic_vector(), a in 0.0f64..=1.0, b in 0.0f64..=1.0) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let small = knockoff_threshold(&w, lo).unwrap();
        let large = knockoff_threshold(&w, hi).unwrap();
        prop_assert!(large.tau <= small.tau);
        prop_assert!(small.selected.iter().all(|j| large.selected.contains(j)));
    }

    #[test]
    fn threshold_ignores_order(w in statistic_vector(), q in 0.0f64..=1.0, rot in 0usize..30) {
        let mut shifted = w.clone();
        let r = rot % w.len();
        shifted.rotate_left(r);
        let a = knockoff_threshold(&w, q).unwrap();
        let b = knockoff_threshold(&shifted, q).unwrap();
        prop_assert_eq!(a.tau, b.tau);
        let mapped: Vec<usize> = b.selected.iter().map(|&j| (j + r) % w.len()).collect();
        let mut mapped = mapped;
        mapped.sort_unstable();
        prop_assert_eq!(a.selected, mapped);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn cholesky_succeeds_exactly_for_positive_definite(a in (2usize..7).prop_flat_map(symmetric_matrix)) {
        let lambda = min_eigenvalue(&a).unwrap();
        prop_assume!(lambda.abs() > 1e-8);
        match cholesky(&a) {
            Ok(l) => {
                prop_assert!(lambda > 0.0);
                let gap = (l.reconstruct() - &a).abs().max();
                prop_assert!(gap < 1e-10);
            }
            Err(_) => prop_assert!(lambda < 0.0),
        }
    }

    #[test]
    fn eigen_decomposition_reconstructs(a in (1usize..8).prop_flat_map(symmetric_matrix)) {
        let eig = symmetric_eigen(&a, true).unwrap();
        let v = eig.vectors.unwrap();
        let d = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(eig.values.clone()));
        prop_assert!((&v * d * v.transpose() - &a).abs().max() < 1e-10);
        prop_assert!((v.transpose() * &v - DMatrix::identity(a.nrows(), a.nrows())).abs().max() < 1e-10);
        prop_assert!(eig.values.windows(2).all(|p| p[0] <= p[1]));
    }

    #[test]
    fn inverse_sqrt_whitens(a in (1usize..7).prop_flat_map(symmetric_matrix)) {
        let lambda = min_eigenvalue(&a).unwrap();
        prop_assume!(lambda > 0.05);
        let m = inverse_sqrt(&a).unwrap();
        let n = a.nrows();
        prop_assert!((&m * &a * &m - DMatrix::identity(n, n)).abs().max() < 1e-8);
        prop_assert!((&m - m.transpose()).abs().max() < 1e-12);
    }

    #[test]
    fn hypergeom_matches_exact_enumeration(
        successes in 0u64..=20,
        failures in 0u64..=20,
        draw_frac in 0.0f64..=1.0,
        thr_frac in 0.0f64..=1.0,
    ) {
        let population = successes + failures;
        let draws = (draw_frac * population as f64).round() as u64;
        let threshold = (thr_frac * (draws.min(successes) + 1) as f64).floor().min(draws.min(successes) as f64) as u64;
        let got = hypergeom_tail(successes, failures, draws, threshold).unwrap();
        let want = exact_tail(successes, failures, draws, threshold);
        prop_assert!((got - want).abs() < 1e-9, "{got} vs {want}");
    }

    #[test]
    fn partition_from_labels_covers_every_feature(labels in prop::collection::vec(0u8..6, 1..40)) {
        let part = GroupPartition::from_labels(&labels).unwrap();
        prop_assert_eq!(part.p(), labels.len());
        let mut seen = vec![0; labels.len()];
        for (g, members) in part.groups().iter().enumerate() {
            for &i in members {
                seen[i] += 1;
                prop_assert_eq!(part.group_of(i), g);
                prop_assert_eq!(labels[i], labels[members[0]]);
            }
        }
        prop_assert!(seen.iter().all(|&c| c == 1));
    }
}

#[test]
fn hypergeom_is_monotone_on_grids() {
    let (k, u) = (21, 85);
    for s in 0..=(k + u) {
        for q in 0..=s.min(k) {
            let here = hypergeom_tail(k, u, s, q).unwrap();
            if q < s.min(k) {
                let next_q = hypergeom_tail(k, u, s, q + 1).unwrap();
                assert!(next_q <= here + 1e-12, "s={s} q={q}");
            }
            if s < k + u {
                let next_s = hypergeom_tail(k, u, s + 1, q).unwrap();
                assert!(next_s + 1e-12 >= here, "s={s} q={q}");
            }
        }
    }
}

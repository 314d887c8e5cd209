use embclust::kmeans::{inertia_of, run_restart};
use embclust::{kmeans_fit, DenseMatrix, KMeansConfig, RowMatrix, SparseMatrix};
use proptest::prelude::*;

/// Minimum inertia over every assignment of rows to `k` non-empty clusters.
fn brute_force_inertia(points: &[Vec<f64>], k: usize) -> f64 {
    let n = points.len();
    let d = points[0].len();
    let mut best = f64::INFINITY;
    let mut labels = vec![0usize; n];
    loop {
        let mut sums = vec![vec![0.0; d]; k];
        let mut counts = vec![0usize; k];
        for (p, &l) in points.iter().zip(&labels) {
            counts[l] += 1;
            for (s, v) in sums[l].iter_mut().zip(p) {
                *s += v;
            }
        }
        if counts.iter().all(|&c| c > 0) {
            let inertia: f64 = points
                .iter()
                .zip(&labels)
                .map(|(p, &l)| {
                    p.iter()
                        .zip(&sums[l])
                        .map(|(v, s)| (v - s / counts[l] as f64).powi(2))
                        .sum::<f64>()
                })
                .sum();
            best = best.min(inertia);
        }
        let mut i = 0;
        loop {
            if i == n {
                return best;
            }
            labels[i] += 1;
            if labels[i] < k {
                break;
            }
            labels[i] = 0;
            i += 1;
        }
    }
}

#[test]
fn oracle_on_worked_example() {
    let pts = vec![vec![0.0], vec![1.0], vec![10.0], vec![11.0]];
    assert_eq!(brute_force_inertia(&pts, 2), 1.0);
}

fn dataset() -> impl Strategy<Value = (Vec<Vec<f64>>, usize)> {
    (1usize..=3, 1usize..=3).prop_flat_map(|(k, d)| {
        let pts = prop::collection::vec(prop::collection::vec(-10.0f64..10.0, d), k.max(2)..=8);
        (pts, Just(k))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn inertia_never_increases_within_a_restart((pts, k) in dataset(), seed in any::<u64>()) {
        let x = DenseMatrix::from_rows(&pts).unwrap();
        let cfg = KMeansConfig { seed, ..KMeansConfig::new(k) };
        for r in 0..3 {
            let run = run_restart(&x, &cfg, r).unwrap();
            for w in run.inertia_trace.windows(2) {
                prop_assert!(w[1] <= w[0] * (1.0 + 1e-12) + 1e-12, "{:?}", run.inertia_trace);
            }
        }
    }

    #[test]
    fn result_invariants((pts, k) in dataset(), seed in any::<u64>()) {
        let x = DenseMatrix::from_rows(&pts).unwrap();
        let cfg = KMeansConfig { seed, n_init: 4, ..KMeansConfig::new(k) };
        let r = kmeans_fit(&x, &cfg).unwrap();
        for c in 0..k {
            prop_assert!(r.assignments.contains(&c));
        }
        let recomputed = inertia_of(&x, &r.centroids, &r.assignments);
        prop_assert!(r.inertia >= 0.0);
        prop_assert!((r.inertia - recomputed).abs() <= 1e-6 * recomputed.max(1e-12));
        let min = r.restart_inertias.iter().copied().fold(f64::INFINITY, f64::min);
        prop_assert_eq!(r.inertia, min);
        prop_assert_eq!(&r, &kmeans_fit(&x, &cfg).unwrap());
    }

    #[test]
    fn sparse_distances_match_dense(
        rows in prop::collection::vec(prop::collection::vec(-5.0f64..5.0, 6), 1..10),
        c in prop::collection::vec(-5.0f64..5.0, 6),
    ) {
        let sparse_rows = rows
            .iter()
            .map(|r| r.iter().enumerate().filter(|(j, _)| j % 2 == 0).map(|(j, &v)| (j, v)).collect())
            .collect();
        let s = SparseMatrix::from_rows(6, sparse_rows).unwrap();
        let d = s.to_dense();
        let cn: f64 = c.iter().map(|v| v * v).sum();
        for i in 0..s.n_rows() {
            let a = s.sq_dist(i, &c, cn);
            let b = d.sq_dist(i, &c, cn);
            prop_assert!((a - b).abs() <= 1e-6 * b.max(1e-9));
        }
    }
}

#[test]
fn matches_brute_force_optimum_mostly() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2024);
    let trials = 100;
    let mut hits = 0;
    for t in 0..trials {
        let n = rng.random_range(3..=8);
        let k = rng.random_range(1..=3);
        let pts: Vec<Vec<f64>> = (0..n)
            .map(|_| vec![rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0)])
            .collect();
        let x = DenseMatrix::from_rows(&pts).unwrap();
        let cfg = KMeansConfig {
            seed: t,
            n_init: 20,
            ..KMeansConfig::new(k)
        };
        let got = kmeans_fit(&x, &cfg).unwrap().inertia;
        let best = brute_force_inertia(&pts, k);
        if (got - best).abs() <= 1e-9 * best.max(1.0) {
            hits += 1;
        }
    }
    assert!(hits * 100 >= 95 * trials, "{hits}/{trials}");
}

//! k-means with k-means++ seeding, Lloyd iterations and best-of-n restarts.
//!
//! Distances are squared Euclidean on the rows as given. Nearest-centroid
//! ties go to the lowest cluster index. Each restart draws from its own
//! seeded stream, so results do not depend on how restarts are scheduled.

use rand::Rng as _;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::matrix::{sq_norm, DenseMatrix, RowMatrix};
use crate::rng::{self, Rng};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansConfig {
    pub k: usize,
    pub max_iter: usize,
    /// Convergence threshold on the Frobenius norm of the centroid update.
    pub tol: f64,
    pub n_init: usize,
    pub seed: u64,
}

impl KMeansConfig {
    pub fn new(k: usize) -> Self {
        KMeansConfig {
            k,
            max_iter: 300,
            tol: 1e-4,
            n_init: 10,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::Config("k must be at least 1".into()));
        }
        if self.max_iter == 0 {
            return Err(Error::Config("max_iter must be at least 1".into()));
        }
        if self.tol.is_nan() || self.tol < 0.0 {
            return Err(Error::Config("tol must be non-negative".into()));
        }
        if self.n_init == 0 {
            return Err(Error::Config("n_init must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansResult<T> {
    pub centroids: DenseMatrix<T>,
    pub assignments: Vec<usize>,
    /// Sum of squared distances from rows to their assigned centroids.
    pub inertia: T,
    pub iterations_run: usize,
    /// Final inertia of every restart, in restart order.
    pub restart_inertias: Vec<T>,
}

/// Outcome of one Lloyd run from fixed initial centroids.
#[derive(Debug, Clone, PartialEq)]
pub struct LloydRun<T> {
    pub centroids: DenseMatrix<T>,
    pub assignments: Vec<usize>,
    pub inertia: T,
    pub iterations_run: usize,
    /// Inertia after the initial assignment and after every iteration.
    pub inertia_trace: Vec<T>,
}

fn check_input<T: Scalar, M: RowMatrix<T>>(x: &M, k: usize) -> Result<()> {
    if x.n_rows() < k {
        return Err(Error::TooFewRows {
            needed: k,
            found: x.n_rows(),
        });
    }
    if let Some((row, col)) = x.find_non_finite() {
        return Err(Error::NonFinite { row, col });
    }
    Ok(())
}

/// k-means++ seeding: the first centroid is a uniform row, each further one a
/// row drawn with probability proportional to its squared distance to the
/// nearest chosen centroid. If every remaining weight is zero, the next
/// centroid is a uniform pick among rows not yet chosen.
pub fn kmeanspp_init<T: Scalar, M: RowMatrix<T>>(
    x: &M,
    k: usize,
    rng: &mut Rng,
) -> Result<DenseMatrix<T>> {
    if k == 0 {
        return Err(Error::Config("k must be at least 1".into()));
    }
    let n = x.n_rows();
    if n < k {
        return Err(Error::TooFewRows {
            needed: k,
            found: n,
        });
    }
    let mut centroids = DenseMatrix::zeros(k, x.n_cols());
    let mut chosen = vec![false; n];
    let first = rng.random_range(0..n);
    chosen[first] = true;
    centroids.row_mut(0).copy_from_slice(&x.row_dense(first));

    let mut nearest: Vec<T> = vec![T::infinity(); n];
    for j in 1..k {
        let last = centroids.row(j - 1).to_vec();
        let last_norm = sq_norm(&last);
        nearest.par_iter_mut().enumerate().for_each(|(i, d)| {
            let di = x.sq_dist(i, &last, last_norm);
            if di < *d {
                *d = di;
            }
        });
        let weights: Vec<f64> = nearest
            .iter()
            .zip(&chosen)
            .map(|(d, &c)| if c { 0.0 } else { d.as_f64() })
            .collect();
        let total: f64 = weights.iter().sum();
        let pick = if total > 0.0 && total.is_finite() {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut pick = None;
            let mut last_positive = 0;
            for (i, &w) in weights.iter().enumerate() {
                if w <= 0.0 {
                    continue;
                }
                last_positive = i;
                acc += w;
                if target < acc {
                    pick = Some(i);
                    break;
                }
            }
            pick.unwrap_or(last_positive)
        } else {
            let free: Vec<usize> = (0..n).filter(|&i| !chosen[i]).collect();
            free[rng.random_range(0..free.len())]
        };
        chosen[pick] = true;
        centroids.row_mut(j).copy_from_slice(&x.row_dense(pick));
    }
    Ok(centroids)
}

/// Nearest centroid and its squared distance for every row.
pub fn assign_nearest<T: Scalar, M: RowMatrix<T>>(
    x: &M,
    centroids: &DenseMatrix<T>,
) -> (Vec<usize>, Vec<T>) {
    let norms: Vec<T> = centroids.rows_iter().map(sq_norm).collect();
    (0..x.n_rows())
        .into_par_iter()
        .map(|i| {
            let mut best = (0, T::infinity());
            for (j, c) in centroids.rows_iter().enumerate() {
                let d = x.sq_dist(i, c, norms[j]);
                if d < best.1 {
                    best = (j, d);
                }
            }
            best
        })
        .unzip()
}

fn total<T: Scalar>(dist: &[T]) -> T {
    dist.iter().copied().fold(T::zero(), |a, b| a + b)
}

/// Assigns rows and then repairs empty clusters: an empty cluster's centroid
/// moves onto the row farthest from its centroid (among clusters with more
/// than one member) and assignments are recomputed. When every such row sits
/// exactly on its centroid (duplicate points) the row is moved directly.
fn assign_and_repair<T: Scalar, M: RowMatrix<T>>(
    x: &M,
    centroids: &mut DenseMatrix<T>,
) -> (Vec<usize>, Vec<T>) {
    let k = centroids.n_rows();
    let (mut assign, mut dist) = assign_nearest(x, centroids);
    // Every pass either strictly lowers inertia or fills an empty cluster.
    for _ in 0..(x.n_rows() + k) * (k + 1) {
        let mut counts = vec![0usize; k];
        assign.iter().for_each(|&a| counts[a] += 1);
        let Some(empty) = counts.iter().position(|&c| c == 0) else {
            break;
        };
        let donor = (0..x.n_rows())
            .filter(|&i| counts[assign[i]] > 1)
            .fold(None, |best: Option<usize>, i| match best {
                Some(b) if dist[b] >= dist[i] => Some(b),
                _ => Some(i),
            })
            .expect("n >= k leaves a cluster with two members");
        centroids
            .row_mut(empty)
            .copy_from_slice(&x.row_dense(donor));
        if dist[donor] > T::zero() {
            (assign, dist) = assign_nearest(x, centroids);
        } else {
            assign[donor] = empty;
        }
    }
    (assign, dist)
}

fn update_centroids<T: Scalar, M: RowMatrix<T>>(
    x: &M,
    assign: &[usize],
    centroids: &mut DenseMatrix<T>,
) -> T {
    let (k, d) = (centroids.n_rows(), centroids.n_cols());
    let mut sums = DenseMatrix::zeros(k, d);
    let mut counts = vec![0usize; k];
    for (i, &a) in assign.iter().enumerate() {
        counts[a] += 1;
        x.add_row_scaled(i, T::one(), sums.row_mut(a));
    }
    let mut shift = T::zero();
    for (j, &count) in counts.iter().enumerate() {
        if count == 0 {
            continue;
        }
        let cnt = T::of_usize(count);
        let old = centroids.row_mut(j);
        for (o, &s) in old.iter_mut().zip(sums.row(j)) {
            let new = s / cnt;
            shift += (new - *o) * (new - *o);
            *o = new;
        }
    }
    shift.sqrt()
}

/// Lloyd iterations from the given centroids until the centroid update is at
/// most `tol` (Frobenius norm) or `max_iter` updates have run.
pub fn lloyd<T: Scalar, M: RowMatrix<T>>(
    x: &M,
    mut centroids: DenseMatrix<T>,
    max_iter: usize,
    tol: f64,
) -> LloydRun<T> {
    let tol = T::of(tol);
    let (mut assign, mut dist) = assign_and_repair(x, &mut centroids);
    let mut trace = vec![total(&dist)];
    let mut iterations = 0;
    for it in 1..=max_iter {
        let shift = update_centroids(x, &assign, &mut centroids);
        (assign, dist) = assign_and_repair(x, &mut centroids);
        trace.push(total(&dist));
        iterations = it;
        if shift <= tol {
            break;
        }
    }
    LloydRun {
        inertia: *trace.last().expect("trace is never empty"),
        centroids,
        assignments: assign,
        iterations_run: iterations,
        inertia_trace: trace,
    }
}

/// Runs one restart: seeding from the restart's own stream, then Lloyd.
pub fn run_restart<T: Scalar, M: RowMatrix<T>>(
    x: &M,
    config: &KMeansConfig,
    restart: usize,
) -> Result<LloydRun<T>> {
    let mut rng = rng::stream_indexed(config.seed, "kmeans-restart", restart as u64);
    let init = kmeanspp_init(x, config.k, &mut rng)?;
    Ok(lloyd(x, init, config.max_iter, config.tol))
}

/// Best-of-`n_init` k-means; ties in inertia go to the earliest restart.
pub fn kmeans_fit<T: Scalar, M: RowMatrix<T>>(
    x: &M,
    config: &KMeansConfig,
) -> Result<KMeansResult<T>> {
    config.validate()?;
    check_input(x, config.k)?;
    let runs: Vec<LloydRun<T>> = (0..config.n_init)
        .into_par_iter()
        .map(|r| run_restart(x, config, r))
        .collect::<Result<_>>()?;
    let restart_inertias: Vec<T> = runs.iter().map(|r| r.inertia).collect();
    let best =
        restart_inertias
            .iter()
            .enumerate()
            .fold(0, |b, (i, &v)| if v < restart_inertias[b] { i } else { b });
    let run = runs.into_iter().nth(best).expect("n_init >= 1");
    Ok(KMeansResult {
        centroids: run.centroids,
        assignments: run.assignments,
        inertia: run.inertia,
        iterations_run: run.iterations_run,
        restart_inertias,
    })
}

/// Sum of squared distances from each row to its assigned centroid.
pub fn inertia_of<T: Scalar, M: RowMatrix<T>>(
    x: &M,
    centroids: &DenseMatrix<T>,
    assignments: &[usize],
) -> T {
    assignments
        .iter()
        .enumerate()
        .map(|(i, &a)| {
            let c = centroids.row(a);
            x.sq_dist(i, c, sq_norm(c))
        })
        .fold(T::zero(), |a, b| a + b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::SparseMatrix;
    use rand::SeedableRng;

    fn col(v: &[f64]) -> DenseMatrix<f64> {
        DenseMatrix::from_vec(v.len(), 1, v.to_vec()).unwrap()
    }

    #[test]
    fn two_clusters_on_a_line() {
        let x = col(&[0.0, 1.0, 10.0, 11.0]);
        let r = kmeans_fit(&x, &KMeansConfig::new(2)).unwrap();
        let mut c: Vec<f64> = r.centroids.as_slice().to_vec();
        c.sort_by(f64::total_cmp);
        assert_eq!(c, vec![0.5, 10.5]);
        assert_eq!(r.inertia, 1.0);
    }

    #[test]
    fn k_equals_n_gives_zero_inertia() {
        let x = DenseMatrix::from_rows(&[vec![0.0, 1.0], vec![3.0, -2.0], vec![5.0, 5.0]]).unwrap();
        let r = kmeans_fit(&x, &KMeansConfig::new(3)).unwrap();
        assert_eq!(r.inertia, 0.0);
        let mut seen = r.assignments.clone();
        seen.sort();
        assert_eq!(seen, vec![0, 1, 2]);
    }

    #[test]
    fn single_cluster_is_the_mean() {
        let x =
            DenseMatrix::from_rows(&[vec![1.0f64, 2.0], vec![3.0, 6.0], vec![5.0, 1.0]]).unwrap();
        let r = kmeans_fit(&x, &KMeansConfig::new(1)).unwrap();
        assert!((r.centroids.get(0, 0) - 3.0).abs() < 1e-12);
        assert!((r.centroids.get(0, 1) - 3.0).abs() < 1e-12);
    }

    #[test]
    fn init_with_n_equal_k_picks_every_row() {
        let x = col(&[1.0, 2.0, 4.0, 8.0]);
        let mut rng = Rng::seed_from_u64(5);
        let c = kmeanspp_init(&x, 4, &mut rng).unwrap();
        let mut v = c.as_slice().to_vec();
        v.sort_by(f64::total_cmp);
        assert_eq!(v, vec![1.0, 2.0, 4.0, 8.0]);
    }

    #[test]
    fn init_on_identical_rows_falls_back() {
        let x = col(&[3.0; 5]);
        let mut rng = Rng::seed_from_u64(1);
        let c = kmeanspp_init(&x, 2, &mut rng).unwrap();
        assert_eq!(c.as_slice(), &[3.0, 3.0]);
        let r = kmeans_fit(&x, &KMeansConfig::new(2)).unwrap();
        assert!(r.assignments.contains(&0) && r.assignments.contains(&1));
        assert_eq!(r.inertia, 0.0);
    }

    #[test]
    fn too_few_rows_and_bad_input() {
        let x = col(&[1.0]);
        assert!(matches!(
            kmeans_fit(&x, &KMeansConfig::new(2)),
            Err(Error::TooFewRows { .. })
        ));
        let x = col(&[1.0, f64::INFINITY]);
        assert!(matches!(
            kmeans_fit(&x, &KMeansConfig::new(1)),
            Err(Error::NonFinite { row: 1, col: 0 })
        ));
        let mut cfg = KMeansConfig::new(1);
        cfg.n_init = 0;
        assert!(kmeans_fit(&col(&[1.0]), &cfg).is_err());
    }

    #[test]
    fn empty_cluster_is_repaired() {
        // Centroid 1 starts far away from every row.
        let x = col(&[0.0, 0.1, 0.2, 5.0]);
        let init = col(&[0.0, 100.0]);
        let run = lloyd(&x, init, 50, 1e-9);
        assert!(run.assignments.contains(&1));
        assert!((run.inertia - inertia_of(&x, &run.centroids, &run.assignments)).abs() < 1e-12);
    }

    #[test]
    fn deterministic_for_same_seed() {
        let x = DenseMatrix::from_vec(30, 2, (0..60).map(|i| ((i * 37) % 11) as f64).collect())
            .unwrap();
        let cfg = KMeansConfig {
            seed: 11,
            ..KMeansConfig::new(3)
        };
        assert_eq!(kmeans_fit(&x, &cfg).unwrap(), kmeans_fit(&x, &cfg).unwrap());
    }

    #[test]
    fn sparse_input_matches_dense() {
        let rows: Vec<Vec<(usize, f64)>> = (0..20)
            .map(|i| vec![(i % 3, 1.0 + i as f64), ((i * 7) % 5 + 3, 0.5)])
            .map(|mut r| {
                r.dedup_by_key(|e| e.0);
                r
            })
            .collect();
        let s = SparseMatrix::from_rows(8, rows).unwrap();
        let d = s.to_dense();
        let cfg = KMeansConfig {
            seed: 3,
            ..KMeansConfig::new(3)
        };
        let rs = kmeans_fit(&s, &cfg).unwrap();
        let rd = kmeans_fit(&d, &cfg).unwrap();
        assert_eq!(rs.assignments, rd.assignments);
        assert!((rs.inertia - rd.inertia).abs() <= 1e-6 * rd.inertia.max(1.0));
    }

    #[test]
    fn works_in_single_precision() {
        let x = DenseMatrix::from_vec(4, 1, vec![0.0f32, 1.0, 10.0, 11.0]).unwrap();
        let r = kmeans_fit(&x, &KMeansConfig::new(2)).unwrap();
        assert_eq!(r.inertia, 1.0f32);
    }
}

//! Unsupervised classifier: cluster with k-means, label each cluster with the
//! most frequent class among its members, predict through the nearest centroid.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::kmeans::{assign_nearest, kmeans_fit, KMeansConfig, KMeansResult};
use crate::matrix::RowMatrix;
use crate::scalar::Scalar;

/// Designated class of every cluster, indexed by cluster.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClusterClassMap {
    classes: Vec<String>,
}

impl ClusterClassMap {
    pub fn class_of(&self, cluster: usize) -> &str {
        &self.classes[cluster]
    }

    pub fn k(&self) -> usize {
        self.classes.len()
    }

    pub fn as_slice(&self) -> &[String] {
        &self.classes
    }
}

/// Modal class per cluster; ties go to the lexicographically smallest class.
pub fn majority_map<S: AsRef<str>>(
    assignments: &[usize],
    labels: &[S],
    k: usize,
) -> Result<ClusterClassMap> {
    if assignments.len() != labels.len() {
        return Err(Error::Length {
            left: assignments.len(),
            right: labels.len(),
        });
    }
    let mut counts: Vec<BTreeMap<&str, usize>> = vec![BTreeMap::new(); k];
    for (&a, l) in assignments.iter().zip(labels) {
        if a >= k {
            return Err(Error::Invalid(format!(
                "cluster index {a} out of range 0..{k}"
            )));
        }
        *counts[a].entry(l.as_ref()).or_insert(0) += 1;
    }
    let classes = counts
        .into_iter()
        .enumerate()
        .map(|(j, c)| {
            // BTreeMap iterates in ascending name order, so keeping the first
            // strict maximum implements the tie-break.
            c.into_iter()
                .fold(None, |best: Option<(&str, usize)>, (name, n)| match best {
                    Some((_, m)) if m >= n => best,
                    _ => Some((name, n)),
                })
                .map(|(name, _)| name.to_owned())
                .ok_or(Error::EmptyCluster(j))
        })
        .collect::<Result<_>>()?;
    Ok(ClusterClassMap { classes })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterModel<T> {
    pub kmeans: KMeansResult<T>,
    pub map: ClusterClassMap,
    /// Rows were L2-normalized before clustering and are normalized again
    /// before prediction.
    pub normalize: bool,
}

impl<T: Scalar> ClusterModel<T> {
    pub fn fit<M: RowMatrix<T>, S: AsRef<str>>(
        x: &M,
        labels: &[S],
        config: &KMeansConfig,
        normalize: bool,
    ) -> Result<Self> {
        if x.n_rows() != labels.len() {
            return Err(Error::Length {
                left: x.n_rows(),
                right: labels.len(),
            });
        }
        let kmeans = if normalize {
            kmeans_fit(&x.l2_normalized(), config)?
        } else {
            kmeans_fit(x, config)?
        };
        let map = majority_map(&kmeans.assignments, labels, config.k)?;
        Ok(ClusterModel {
            kmeans,
            map,
            normalize,
        })
    }

    pub fn predict_clusters<M: RowMatrix<T>>(&self, x: &M) -> Result<Vec<usize>> {
        let d = self.kmeans.centroids.n_cols();
        if x.n_cols() != d {
            return Err(Error::Dimension {
                expected: d,
                found: x.n_cols(),
            });
        }
        let (assign, _) = if self.normalize {
            assign_nearest(&x.l2_normalized(), &self.kmeans.centroids)
        } else {
            assign_nearest(x, &self.kmeans.centroids)
        };
        Ok(assign)
    }

    pub fn predict<M: RowMatrix<T>>(&self, x: &M) -> Result<Vec<String>> {
        Ok(self
            .predict_clusters(x)?
            .into_iter()
            .map(|c| self.map.class_of(c).to_owned())
            .collect())
    }
}

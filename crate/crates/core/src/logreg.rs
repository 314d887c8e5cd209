//! Multinomial logistic regression trained by full-batch gradient descent.
//!
//! Objective: mean softmax cross-entropy plus `(λ/2)·‖W‖²_F`; the bias is not
//! penalized. Training starts from zero and halves the step until the
//! objective decreases, so a run is fully determined by its inputs.

use std::collections::BTreeSet;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::matrix::{DenseMatrix, RowMatrix};
use crate::scalar::Scalar;

const CHUNK: usize = 512;
const MIN_STEP: f64 = 1e-20;

#[derive(Debug, Clone, PartialEq)]
pub struct LogRegConfig {
    pub l2: f64,
    pub max_epochs: usize,
    pub grad_tol: f64,
    pub learning_rate: f64,
}

impl Default for LogRegConfig {
    fn default() -> Self {
        LogRegConfig {
            l2: 1e-4,
            max_epochs: 1000,
            grad_tol: 1e-5,
            learning_rate: 0.5,
        }
    }
}

impl LogRegConfig {
    pub fn validate(&self) -> Result<()> {
        if self.l2.is_nan() || self.l2 < 0.0 {
            return Err(Error::Config("l2 must be non-negative".into()));
        }
        if self.max_epochs == 0 {
            return Err(Error::Config("max_epochs must be at least 1".into()));
        }
        if self.learning_rate <= 0.0 || !self.learning_rate.is_finite() {
            return Err(Error::Config("learning_rate must be positive".into()));
        }
        if self.grad_tol.is_nan() || self.grad_tol < 0.0 {
            return Err(Error::Config("grad_tol must be non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogRegModel<T> {
    /// Sorted class names; row `c` of `weights` scores `classes[c]`.
    pub classes: Vec<String>,
    pub weights: DenseMatrix<T>,
    pub bias: Vec<T>,
}

/// Optimization history of one training run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainTrace<T> {
    pub epochs_run: usize,
    /// Objective at the start and after every accepted step.
    pub objective: Vec<T>,
    pub final_grad_norm: T,
    pub converged: bool,
}

/// Objective value and gradients at `(weights, bias)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ObjectiveGrad<T> {
    pub value: T,
    pub grad_weights: DenseMatrix<T>,
    pub grad_bias: Vec<T>,
}

impl<T: Scalar> ObjectiveGrad<T> {
    fn norm(&self) -> T {
        let w: T = self.grad_weights.as_slice().iter().map(|&g| g * g).sum();
        let b: T = self.grad_bias.iter().map(|&g| g * g).sum();
        (w + b).sqrt()
    }
}

fn log_softmax_in_place<T: Scalar>(z: &mut [T]) -> T {
    let max = z.iter().copied().fold(T::neg_infinity(), T::max);
    let sum: T = z.iter().map(|&v| (v - max).exp()).sum();
    let lse = max + sum.ln();
    z.iter_mut().for_each(|v| *v -= lse);
    lse
}

fn logits<T: Scalar, M: RowMatrix<T>>(
    x: &M,
    i: usize,
    weights: &DenseMatrix<T>,
    bias: &[T],
    out: &mut [T],
) {
    for (c, o) in out.iter_mut().enumerate() {
        *o = x.row_dot(i, weights.row(c)) + bias[c];
    }
}

/// Mean cross-entropy plus L2 penalty, with gradients. Rows are processed in
/// fixed-size chunks whose partial sums are combined in order, so the result
/// is independent of thread scheduling.
pub fn objective_and_gradient<T: Scalar, M: RowMatrix<T>>(
    x: &M,
    y: &[usize],
    weights: &DenseMatrix<T>,
    bias: &[T],
    l2: f64,
) -> ObjectiveGrad<T> {
    let (c, d, n) = (weights.n_rows(), weights.n_cols(), x.n_rows());
    let partials: Vec<(T, DenseMatrix<T>, Vec<T>)> = (0..n.div_ceil(CHUNK))
        .into_par_iter()
        .map(|chunk| {
            let mut loss = T::zero();
            let mut gw = DenseMatrix::zeros(c, d);
            let mut gb = vec![T::zero(); c];
            let mut z = vec![T::zero(); c];
            for i in chunk * CHUNK..((chunk + 1) * CHUNK).min(n) {
                logits(x, i, weights, bias, &mut z);
                log_softmax_in_place(&mut z);
                loss -= z[y[i]];
                for (k, &lp) in z.iter().enumerate() {
                    let mut r = lp.exp();
                    if k == y[i] {
                        r -= T::one();
                    }
                    gb[k] += r;
                    x.add_row_scaled(i, r, gw.row_mut(k));
                }
            }
            (loss, gw, gb)
        })
        .collect();

    let mut loss = T::zero();
    let mut gw = DenseMatrix::zeros(c, d);
    let mut gb = vec![T::zero(); c];
    for (l, w, b) in partials {
        loss += l;
        for (a, &v) in gw.as_mut_slice().iter_mut().zip(w.as_slice()) {
            *a += v;
        }
        for (a, &v) in gb.iter_mut().zip(&b) {
            *a += v;
        }
    }
    let inv_n = T::one() / T::of_usize(n.max(1));
    let lambda = T::of(l2);
    let penalty: T = weights.as_slice().iter().map(|&w| w * w).sum();
    for (g, &w) in gw.as_mut_slice().iter_mut().zip(weights.as_slice()) {
        *g = *g * inv_n + lambda * w;
    }
    gb.iter_mut().for_each(|g| *g *= inv_n);
    ObjectiveGrad {
        value: loss * inv_n + lambda * penalty / T::of(2.0),
        grad_weights: gw,
        grad_bias: gb,
    }
}

/// Class indices into the sorted distinct label set.
pub fn encode_labels<S: AsRef<str>>(labels: &[S]) -> (Vec<String>, Vec<usize>) {
    let classes: Vec<String> = labels
        .iter()
        .map(|s| s.as_ref().to_owned())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let y = labels
        .iter()
        .map(|s| {
            classes
                .binary_search_by(|c| c.as_str().cmp(s.as_ref()))
                .expect("label is in its own class set")
        })
        .collect();
    (classes, y)
}

pub fn train_logreg<T: Scalar, M: RowMatrix<T>, S: AsRef<str>>(
    x: &M,
    labels: &[S],
    config: &LogRegConfig,
) -> Result<LogRegModel<T>> {
    train_logreg_traced(x, labels, config).map(|(m, _)| m)
}

pub fn train_logreg_traced<T: Scalar, M: RowMatrix<T>, S: AsRef<str>>(
    x: &M,
    labels: &[S],
    config: &LogRegConfig,
) -> Result<(LogRegModel<T>, TrainTrace<T>)> {
    config.validate()?;
    if x.n_rows() != labels.len() {
        return Err(Error::Length {
            left: x.n_rows(),
            right: labels.len(),
        });
    }
    if let Some((row, col)) = x.find_non_finite() {
        return Err(Error::NonFinite { row, col });
    }
    let (classes, y) = encode_labels(labels);
    if classes.len() < 2 {
        return Err(Error::Invalid(
            "logistic regression needs at least two classes".into(),
        ));
    }
    let (c, d) = (classes.len(), x.n_cols());
    let mut weights = DenseMatrix::zeros(c, d);
    let mut bias = vec![T::zero(); c];
    let mut current = objective_and_gradient(x, &y, &weights, &bias, config.l2);
    if !current.value.is_finite() {
        return Err(Error::Diverged(0));
    }
    let mut trace = vec![current.value];
    let mut epochs_run = 0;
    let mut converged = false;

    'epochs: for epoch in 1..=config.max_epochs {
        if current.norm() <= T::of(config.grad_tol) {
            converged = true;
            break;
        }
        let mut step = config.learning_rate;
        loop {
            let t = T::of(step);
            let mut w_try = weights.clone();
            for (w, &g) in w_try
                .as_mut_slice()
                .iter_mut()
                .zip(current.grad_weights.as_slice())
            {
                *w -= t * g;
            }
            let b_try: Vec<T> = bias
                .iter()
                .zip(&current.grad_bias)
                .map(|(&b, &g)| b - t * g)
                .collect();
            let trial = objective_and_gradient(x, &y, &w_try, &b_try, config.l2);
            if !trial.value.is_finite() {
                return Err(Error::Diverged(epoch));
            }
            if trial.value < current.value {
                weights = w_try;
                bias = b_try;
                current = trial;
                trace.push(current.value);
                epochs_run = epoch;
                break;
            }
            step /= 2.0;
            if step < MIN_STEP {
                // No representable descent step remains.
                converged = true;
                break 'epochs;
            }
        }
    }
    if !converged && current.norm() <= T::of(config.grad_tol) {
        converged = true;
    }
    let final_grad_norm = current.norm();
    Ok((
        LogRegModel {
            classes,
            weights,
            bias,
        },
        TrainTrace {
            epochs_run,
            objective: trace,
            final_grad_norm,
            converged,
        },
    ))
}

#[derive(Serialize)]
struct ModelDump<'a> {
    classes: &'a [String],
    weights: Vec<Vec<f64>>,
    bias: Vec<f64>,
}

impl<T: Scalar> LogRegModel<T> {
    /// Class probabilities per row, via max-subtracted softmax.
    pub fn predict_proba<M: RowMatrix<T>>(&self, x: &M) -> Result<Vec<Vec<T>>> {
        if x.n_cols() != self.weights.n_cols() {
            return Err(Error::Dimension {
                expected: self.weights.n_cols(),
                found: x.n_cols(),
            });
        }
        Ok((0..x.n_rows())
            .into_par_iter()
            .map(|i| {
                let mut z = vec![T::zero(); self.classes.len()];
                logits(x, i, &self.weights, &self.bias, &mut z);
                softmax(&mut z);
                z
            })
            .collect())
    }

    /// Most probable class per row (ties to the smallest class name) and the
    /// probability vectors.
    pub fn predict<M: RowMatrix<T>>(&self, x: &M) -> Result<(Vec<String>, Vec<Vec<T>>)> {
        let proba = self.predict_proba(x)?;
        let names = proba
            .iter()
            .map(|p| self.classes[argmax(p)].clone())
            .collect();
        Ok((names, proba))
    }

    pub fn to_json(&self) -> String {
        let dump = ModelDump {
            classes: &self.classes,
            weights: self
                .weights
                .rows_iter()
                .map(|r| r.iter().map(|v| v.as_f64()).collect())
                .collect(),
            bias: self.bias.iter().map(|v| v.as_f64()).collect(),
        };
        serde_json::to_string_pretty(&dump).expect("model serializes")
    }
}

pub fn softmax<T: Scalar>(z: &mut [T]) {
    let max = z.iter().copied().fold(T::neg_infinity(), T::max);
    z.iter_mut().for_each(|v| *v = (*v - max).exp());
    let sum: T = z.iter().copied().sum();
    z.iter_mut().for_each(|v| *v /= sum);
}

/// Index of the first maximum.
pub fn argmax<T: Scalar>(v: &[T]) -> usize {
    v.iter()
        .enumerate()
        .fold(0, |b, (i, &x)| if x > v[b] { i } else { b })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn separable_line() {
        let mut rows = vec![vec![-1.0]; 10];
        rows.extend(vec![vec![1.0]; 10]);
        let x = DenseMatrix::from_rows(&rows).unwrap();
        let labels: Vec<&str> = (0..20).map(|i| if i < 10 { "A" } else { "B" }).collect();
        let model = train_logreg(&x, &labels, &LogRegConfig::default()).unwrap();
        let (pred, _) = model.predict(&x).unwrap();
        assert_eq!(pred, labels);
    }

    #[test]
    fn zero_features_learn_priors() {
        let x = DenseMatrix::<f64>::zeros(6, 3);
        let labels = ["A", "B", "A", "B", "A", "B"];
        let model = train_logreg(&x, &labels, &LogRegConfig::default()).unwrap();
        for p in model.predict_proba(&x).unwrap() {
            assert!((p[0] - 0.5).abs() < 1e-12 && (p[1] - 0.5).abs() < 1e-12);
        }
        assert!(model.weights.as_slice().iter().all(|&w| w == 0.0));
    }

    #[test]
    fn uniform_probabilities_at_zero_parameters() {
        let model = LogRegModel {
            classes: vec!["a".into(), "b".into(), "c".into()],
            weights: DenseMatrix::<f64>::zeros(3, 2),
            bias: vec![0.0; 3],
        };
        let x = DenseMatrix::from_rows(&[vec![4.0, -2.0]]).unwrap();
        let (names, p) = model.predict(&x).unwrap();
        assert_eq!(names, vec!["a"]);
        assert!(p[0].iter().all(|&v| (v - 1.0 / 3.0).abs() < 1e-15));
    }

    #[test]
    fn softmax_is_stable() {
        let mut z = vec![1000.0f64, 0.0];
        softmax(&mut z);
        assert!((z[0] - 1.0).abs() < 1e-12 && z[1] >= 0.0 && z[1] < 1e-300);
        let mut z = vec![1000.0f32, 0.0];
        softmax(&mut z);
        assert!(z.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn single_class_rejected() {
        let x = DenseMatrix::<f64>::zeros(3, 1);
        assert!(train_logreg(&x, &["A", "A", "A"], &LogRegConfig::default()).is_err());
    }

    #[test]
    fn dimension_mismatch_on_predict() {
        let x = DenseMatrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let model = train_logreg(&x, &["A", "B"], &LogRegConfig::default()).unwrap();
        let bad = DenseMatrix::from_rows(&[vec![1.0]]).unwrap();
        assert!(model.predict(&bad).is_err());
    }

    #[test]
    fn objective_never_increases() {
        let x = DenseMatrix::from_rows(&[
            vec![0.0, 1.0],
            vec![1.0, 0.5],
            vec![2.0, -1.0],
            vec![-1.0, 0.3],
            vec![0.5, 0.5],
        ])
        .unwrap();
        let labels = ["a", "b", "c", "a", "b"];
        let (_, trace) = train_logreg_traced(&x, &labels, &LogRegConfig::default()).unwrap();
        assert!(trace.objective.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn json_dump_lists_classes() {
        let x = DenseMatrix::from_rows(&[vec![1.0], vec![-1.0]]).unwrap();
        let model = train_logreg(&x, &["yes", "no"], &LogRegConfig::default()).unwrap();
        let v: serde_json::Value = serde_json::from_str(&model.to_json()).unwrap();
        assert_eq!(v["classes"], serde_json::json!(["no", "yes"]));
        assert_eq!(v["weights"].as_array().unwrap().len(), 2);
    }
}

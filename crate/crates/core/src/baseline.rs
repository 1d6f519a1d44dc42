//! Multinomial logistic regression used as the reference conformity measure:
//! `A(x, y) = P(Y = y | x)`.

use ndarray::{Array2, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::conformity::{softmax_in_place, ConformityMeasure};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::icp::IcpModel;

/// Fitted softmax model. `weights` is `m × C`; the last column is pinned to
/// zero for identifiability.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbModel {
    pub weights: Array2<f64>,
    pub iterations: usize,
    /// Mean negative log-likelihood on the training data at the final weights.
    pub final_nll: f64,
}

impl ProbModel {
    pub fn from_weights(weights: Array2<f64>) -> Result<Self> {
        if weights.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("weights"));
        }
        Ok(Self {
            weights,
            iterations: 0,
            final_nll: f64::NAN,
        })
    }

    /// Class probabilities for every row of `x`.
    pub fn probabilities(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        self.score_matrix(x)
    }
}

impl ConformityMeasure for ProbModel {
    fn n_features(&self) -> usize {
        self.weights.nrows()
    }

    fn n_classes(&self) -> usize {
        self.weights.ncols()
    }

    fn scores_into(&self, x: ArrayView1<'_, f64>, out: &mut [f64]) {
        for (o, col) in out.iter_mut().zip(self.weights.columns()) {
            *o = col.dot(&x);
        }
        softmax_in_place(out);
    }
}

fn mean_log_likelihood(weights: &Array2<f64>, x: ArrayView2<'_, f64>, labels: &[usize]) -> (f64, Array2<f64>) {
    let logits = x.dot(weights);
    let mut probs = logits.clone();
    let mut ll = 0.0;
    for (i, mut row) in probs.rows_mut().into_iter().enumerate() {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let log_norm = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
        ll += logits[[i, labels[i]]] - log_norm;
        row.mapv_inplace(|v| (v - log_norm).exp());
    }
    (ll / labels.len() as f64, probs)
}

const MAX_STEP: f64 = 64.0;

/// Fits the model by full-batch gradient ascent on the mean log-likelihood.
/// The step doubles (up to a cap) after each accepted move and halves until the
/// likelihood does not decrease, so the likelihood is monotone over
/// iterations. Stops once the gradient max-norm is at most `tol` or after
/// `max_iters` accepted steps.
pub fn train_multinomial(train: &Dataset, max_iters: usize, tol: f64) -> Result<ProbModel> {
    if train.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if train.features().iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("training features"));
    }
    if let Some(c) = train.class_counts().iter().position(|&n| n == 0) {
        return Err(Error::ClassAbsent(train.label_names()[c].clone()));
    }
    let x = train.features();
    let labels = train.labels();
    let (m, c) = (train.n_features(), train.n_classes());
    let k = labels.len() as f64;

    let mut weights = Array2::<f64>::zeros((m, c));
    let (mut ll, mut probs) = mean_log_likelihood(&weights, x, labels);
    let mut step = 1.0;
    let mut iterations = 0;
    while iterations < max_iters {
        let mut residual = -&probs;
        for (i, &y) in labels.iter().enumerate() {
            residual[[i, y]] += 1.0;
        }
        let mut grad = x.t().dot(&residual) / k;
        grad.column_mut(c - 1).fill(0.0);
        let grad_norm = grad.iter().fold(0.0f64, |acc, g| acc.max(g.abs()));
        if grad_norm <= tol {
            break;
        }
        let mut accepted = false;
        for _ in 0..60 {
            let candidate = &weights + &(&grad * step);
            let (cand_ll, cand_probs) = mean_log_likelihood(&candidate, x, labels);
            if cand_ll >= ll && cand_ll.is_finite() {
                weights = candidate;
                ll = cand_ll;
                probs = cand_probs;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            break;
        }
        iterations += 1;
        step = (step * 2.0).min(MAX_STEP);
    }
    Ok(ProbModel {
        weights,
        iterations,
        final_nll: -ll,
    })
}

/// Calibrates the probability conformity measure on `calib`.
pub fn baseline_icp(model: ProbModel, calib: &Dataset, epsilon: f64) -> Result<IcpModel<ProbModel>> {
    IcpModel::fit(model, calib, epsilon)
}

/// Column sums of class indicators; handy for checking intercept-only fits.
pub fn class_frequencies(train: &Dataset) -> Vec<f64> {
    let k = train.n_rows() as f64;
    train.class_counts().iter().map(|&n| n as f64 / k).collect()
}

/// Row sums of a probability matrix.
pub fn row_sums(probs: &Array2<f64>) -> Vec<f64> {
    probs.sum_axis(Axis(1)).to_vec()
}

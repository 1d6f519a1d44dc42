//! Differentiable surrogate of the ICP training objective.
//!
//! Indicators `I[a > 0]` in the inefficiency/validity objective are replaced
//! by sigmoids `σ(γa)` and the calibration quantile is pinned to the constant
//! `q`. For training data `(x_i, y_i)`, `i = 1..k`, and linear scores
//! `A = X·T`:
//!
//! ```text
//! s_i = Σ_y σ(γ(A_iy - q))                      soft set size
//! V   = (1/k) Σ_i σ(γ(A_{i,y_i} - q)) - (1 - ε)  soft validity gap
//! L   = (1/k) Σ_i f(s_i) + λ V²
//! ```
//!
//! The gradient is evaluated in matrix form as `∂L/∂T = Xᵀ W` with
//!
//! ```text
//! W_iy = (γ/k) σ_iy (1 - σ_iy) (f'(s_i) + 2λV · I[y = y_i])
//! ```

use std::fmt;
use std::str::FromStr;

use ndarray::{Array2, Zip};
use serde::{Deserialize, Serialize};

use crate::conformity::ThetaMatrix;
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::icp::check_epsilon;
use crate::metrics::InefficiencyMeasure;

/// Fixed score threshold standing in for the calibration quantile.
pub const DEFAULT_Q: f64 = 1.0;

/// Monotone reparameterization of the loss applied before descent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Transform {
    /// `L`
    Identity,
    /// `ln L`
    Log,
    /// `-1/L`
    NegInverse,
    /// `-1/L²`
    NegInverseSquare,
}

impl Transform {
    pub const ALL: [Transform; 4] = [
        Transform::Identity,
        Transform::Log,
        Transform::NegInverse,
        Transform::NegInverseSquare,
    ];

    pub fn value(self, loss: f64) -> f64 {
        match self {
            Self::Identity => loss,
            Self::Log => loss.ln(),
            Self::NegInverse => -1.0 / loss,
            Self::NegInverseSquare => -1.0 / (loss * loss),
        }
    }

    /// `d transform(L) / dL`.
    pub fn derivative(self, loss: f64) -> f64 {
        match self {
            Self::Identity => 1.0,
            Self::Log => 1.0 / loss,
            Self::NegInverse => 1.0 / (loss * loss),
            Self::NegInverseSquare => 2.0 / (loss * loss * loss),
        }
    }

    fn name(self) -> &'static str {
        match self {
            Self::Identity => "identity",
            Self::Log => "log",
            Self::NegInverse => "neg-inverse",
            Self::NegInverseSquare => "neg-inverse-square",
        }
    }
}

impl fmt::Display for Transform {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Transform {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|t| t.name() == s || t.name().replace('-', "_") == s)
            .ok_or_else(|| Error::invalid("loss transform", s))
    }
}

/// One training configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hyperparams {
    pub epsilon: f64,
    /// Weight of the squared validity gap.
    pub lambda: f64,
    /// Sigmoid sharpness.
    pub gamma: f64,
    /// Learning rate.
    pub eta: f64,
    pub transform: Transform,
    pub q: f64,
    pub max_iters: usize,
    pub rel_tol: f64,
}

impl Hyperparams {
    pub const DEFAULT_MAX_ITERS: usize = 2000;
    pub const DEFAULT_REL_TOL: f64 = 1e-7;

    pub fn new(epsilon: f64, lambda: f64, gamma: f64, eta: f64, transform: Transform) -> Self {
        Self {
            epsilon,
            lambda,
            gamma,
            eta,
            transform,
            q: DEFAULT_Q,
            max_iters: Self::DEFAULT_MAX_ITERS,
            rel_tol: Self::DEFAULT_REL_TOL,
        }
    }

    pub fn with_iters(mut self, max_iters: usize) -> Self {
        self.max_iters = max_iters;
        self
    }

    /// Checks ranges. A zero learning rate is accepted so that an untrained
    /// parameter set can be produced deliberately.
    pub fn validate(&self) -> Result<()> {
        check_epsilon(self.epsilon)?;
        let positive = |name, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::invalid(name, v))
            }
        };
        positive("lambda", self.lambda)?;
        positive("gamma", self.gamma)?;
        if !(self.eta >= 0.0 && self.eta.is_finite()) {
            return Err(Error::invalid("eta", self.eta));
        }
        if !self.q.is_finite() {
            return Err(Error::invalid("q", self.q));
        }
        if self.max_iters == 0 {
            return Err(Error::invalid("max_iters", self.max_iters));
        }
        if self.rel_tol.is_nan() || self.rel_tol < 0.0 {
            return Err(Error::invalid("rel_tol", self.rel_tol));
        }
        Ok(())
    }
}

/// Loss, its ingredients and its gradient at one parameter value.
#[derive(Debug, Clone, PartialEq)]
pub struct SurrogateEval {
    /// Untransformed `L(θ)`.
    pub loss: f64,
    pub soft_sizes: Vec<f64>,
    pub validity_gap: f64,
    /// `∂L/∂θ` in flat (column-major) order.
    pub gradient: Vec<f64>,
}

/// Increasing logistic `1 / (1 + exp(-γa))`, evaluated without overflow.
pub fn sigmoid(a: f64, gamma: f64) -> f64 {
    logistic(gamma * a)
}

fn logistic(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Evaluates `L(θ)` and `∂L/∂θ` on `train`.
pub fn evaluate(
    theta: &ThetaMatrix,
    train: &Dataset,
    hp: &Hyperparams,
    ineff: InefficiencyMeasure,
) -> Result<SurrogateEval> {
    if train.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if theta.n_classes() != train.n_classes() {
        return Err(Error::DimensionMismatch {
            expected: train.n_classes(),
            actual: theta.n_classes(),
        });
    }
    if theta.entries().iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("theta"));
    }
    let x = train.features();
    let labels = train.labels();
    let k = train.n_rows() as f64;
    let (gamma, q) = (hp.gamma, hp.q);

    let scores = theta.linear_scores_batch(x)?;
    // σ and σ(1-σ), the latter as σ(z)σ(-z) to keep precision when saturated
    let mut sig = Array2::zeros(scores.raw_dim());
    let mut slope = Array2::zeros(scores.raw_dim());
    Zip::from(&mut sig).and(&mut slope).and(&scores).for_each(|s, d, &a| {
        let z = gamma * (a - q);
        let e = (-z.abs()).exp();
        let upper = 1.0 / (1.0 + e);
        let lower = e * upper;
        *s = if z >= 0.0 { upper } else { lower };
        *d = upper * lower;
    });

    let soft_sizes: Vec<f64> = sig.rows().into_iter().map(|r| r.sum()).collect();
    let soft_coverage: f64 = labels.iter().enumerate().map(|(i, &y)| sig[[i, y]]).sum::<f64>() / k;
    let validity_gap = soft_coverage - (1.0 - hp.epsilon);
    let mean_cost = soft_sizes.iter().map(|&s| ineff.f(s)).sum::<f64>() / k;
    let loss = mean_cost + hp.lambda * validity_gap * validity_gap;

    let penalty = 2.0 * hp.lambda * validity_gap;
    let mut weights = slope;
    for (i, mut row) in weights.rows_mut().into_iter().enumerate() {
        let fp = ineff.f_prime(soft_sizes[i]);
        let yi = labels[i];
        for (y, w) in row.iter_mut().enumerate() {
            let outer = if y == yi { fp + penalty } else { fp };
            *w *= gamma / k * outer;
        }
    }
    let grad = x.t().dot(&weights);
    let gradient = grad.t().iter().copied().collect();

    Ok(SurrogateEval {
        loss,
        soft_sizes,
        validity_gap,
        gradient,
    })
}

/// Applies a monotone transform to a loss value and its gradient.
pub fn transform_loss(loss: f64, gradient: &[f64], kind: Transform) -> Result<(f64, Vec<f64>)> {
    if kind != Transform::Identity && (loss.is_nan() || loss <= 0.0) {
        return Err(Error::NonPositiveLoss(loss, kind.name()));
    }
    let scale = kind.derivative(loss);
    Ok((kind.value(loss), gradient.iter().map(|g| g * scale).collect()))
}

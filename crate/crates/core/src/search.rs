//! Gradient descent on the transformed surrogate loss and hyperparameter
//! selection by grid search.
//!
//! Each grid cell trains from `θ = 0`. Cells are scored with a *training ICP*
//! that uses the training set for calibration and evaluation alike. That ICP
//! is not valid and serves only to rank cells.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::conformity::ThetaMatrix;
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::icp::IcpModel;
use crate::metrics::{evaluate_icp, InefficiencyMeasure};
use crate::surrogate::{evaluate, transform_loss, Hyperparams, Transform};

/// Window over which the relative change of the transformed loss is measured.
pub const STOP_WINDOW: usize = 10;

/// Outcome of one descent run.
#[derive(Debug, Clone)]
pub struct Descent {
    /// Final parameters; the last finite iterate if the run diverged.
    pub theta: ThetaMatrix,
    /// Untransformed loss at every visited iterate, starting with `θ = 0`.
    pub trace: Vec<f64>,
    pub iterations: usize,
    pub diverged: bool,
}

impl Descent {
    pub fn final_loss(&self) -> f64 {
        if self.diverged {
            f64::NAN
        } else {
            self.trace.last().copied().unwrap_or(f64::NAN)
        }
    }
}

/// `θ ← θ - η ∇ transform(L)(θ)` from `θ = 0`.
///
/// Stops after `max_iters` steps, or once the transformed loss changed by
/// less than `rel_tol` (relative) over the last [`STOP_WINDOW`] steps. A
/// non-finite loss or gradient ends the run with `diverged` set.
pub fn gradient_descent(train: &Dataset, hp: &Hyperparams, ineff: InefficiencyMeasure) -> Result<Descent> {
    hp.validate()?;
    if train.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let (m, c) = (train.n_features(), train.n_classes());
    descend_from(ThetaMatrix::zeros(m, c), train, hp, ineff)
}

fn descend_from(
    start: ThetaMatrix,
    train: &Dataset,
    hp: &Hyperparams,
    ineff: InefficiencyMeasure,
) -> Result<Descent> {
    let (m, c) = (train.n_features(), train.n_classes());
    let mut theta = start;
    let mut flat = theta.flatten();
    let mut trace = Vec::with_capacity(hp.max_iters + 1);
    let mut objective = Vec::with_capacity(hp.max_iters + 1);
    let mut iterations = 0;

    let diverged = loop {
        let eval = evaluate(&theta, train, hp, ineff)?;
        let step = transform_loss(eval.loss, &eval.gradient, hp.transform);
        let (value, grad) = match step {
            Ok((v, g)) if v.is_finite() && eval.loss.is_finite() && g.iter().all(|x| x.is_finite()) => (v, g),
            _ => break true,
        };
        trace.push(eval.loss);
        objective.push(value);

        let t = objective.len() - 1;
        if t >= STOP_WINDOW {
            let past = objective[t - STOP_WINDOW];
            if (value - past).abs() <= hp.rel_tol * past.abs().max(f64::MIN_POSITIVE) {
                break false;
            }
        }
        if iterations == hp.max_iters {
            break false;
        }

        for (p, g) in flat.iter_mut().zip(&grad) {
            *p -= hp.eta * g;
        }
        match ThetaMatrix::unflatten(&flat, m, c) {
            Ok(next) => theta = next,
            Err(_) => break true,
        }
        iterations += 1;
    };

    Ok(Descent {
        theta,
        trace,
        iterations,
        diverged,
    })
}

/// Inefficiency and accuracy of a training ICP.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainingIcpScore {
    pub ineff: f64,
    pub accuracy: f64,
}

/// Calibrates on `train` and evaluates on `train`.
pub fn training_icp_score(
    theta: &ThetaMatrix,
    train: &Dataset,
    epsilon: f64,
    ineff: InefficiencyMeasure,
) -> Result<TrainingIcpScore> {
    let icp = IcpModel::fit(theta, train, epsilon)?;
    let report = evaluate_icp(&icp, train, ineff)?;
    Ok(TrainingIcpScore {
        ineff: report.mean_ineff,
        accuracy: report.accuracy,
    })
}

/// Hyperparameter grid for one significance level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub lambdas: Vec<f64>,
    pub gammas: Vec<f64>,
    pub etas: Vec<f64>,
    pub transform: Transform,
    pub epsilon: f64,
    pub ineff: InefficiencyMeasure,
    pub max_iters: usize,
    pub rel_tol: f64,
}

impl GridSpec {
    pub const DEFAULT_LAMBDAS: [f64; 6] = [10.0, 100.0, 500.0, 1000.0, 5000.0, 10000.0];
    pub const DEFAULT_GAMMAS: [f64; 4] = [1.0, 2.0, 5.0, 10.0];
    pub const DEFAULT_ETAS: [f64; 4] = [1.0, 10.0, 100.0, 1000.0];

    /// The default 6 × 4 × 4 grid.
    pub fn default_for(epsilon: f64, transform: Transform, ineff: InefficiencyMeasure) -> Self {
        Self {
            lambdas: Self::DEFAULT_LAMBDAS.to_vec(),
            gammas: Self::DEFAULT_GAMMAS.to_vec(),
            etas: Self::DEFAULT_ETAS.to_vec(),
            transform,
            epsilon,
            ineff,
            max_iters: Hyperparams::DEFAULT_MAX_ITERS,
            rel_tol: Hyperparams::DEFAULT_REL_TOL,
        }
    }

    /// One hyperparameter set per `(λ, γ, η)` cell, in nested order.
    pub fn cells(&self) -> Vec<Hyperparams> {
        let mut out = Vec::with_capacity(self.lambdas.len() * self.gammas.len() * self.etas.len());
        for &lambda in &self.lambdas {
            for &gamma in &self.gammas {
                for &eta in &self.etas {
                    out.push(Hyperparams {
                        max_iters: self.max_iters,
                        rel_tol: self.rel_tol,
                        ..Hyperparams::new(self.epsilon, lambda, gamma, eta, self.transform)
                    });
                }
            }
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        for (name, list) in [("lambdas", &self.lambdas), ("gammas", &self.gammas), ("etas", &self.etas)] {
            if list.is_empty() {
                return Err(Error::invalid(name, "empty list"));
            }
            if let Some(v) = list.iter().find(|v| !(**v > 0.0 && v.is_finite())) {
                return Err(Error::invalid(name, v));
            }
        }
        Ok(())
    }
}

/// Result of training one grid cell.
#[derive(Debug, Clone)]
pub struct TrainedCandidate {
    pub theta: ThetaMatrix,
    pub hp: Hyperparams,
    pub final_loss: f64,
    pub train_icp_ineff: f64,
    pub train_icp_acc: f64,
    pub iterations: usize,
    pub diverged: bool,
}

impl TrainedCandidate {
    /// Trains and scores one cell. Divergence is recorded, not returned as an
    /// error.
    pub fn train(train: &Dataset, hp: Hyperparams, ineff: InefficiencyMeasure) -> Result<Self> {
        let run = gradient_descent(train, &hp, ineff)?;
        let (train_icp_ineff, train_icp_acc) = if run.diverged {
            (f64::NAN, f64::NAN)
        } else {
            let score = training_icp_score(&run.theta, train, hp.epsilon, ineff)?;
            (score.ineff, score.accuracy)
        };
        Ok(Self {
            final_loss: run.final_loss(),
            theta: run.theta,
            hp,
            train_icp_ineff,
            train_icp_acc,
            iterations: run.iterations,
            diverged: run.diverged,
        })
    }

    fn selection_key(&self) -> (f64, f64, f64, f64) {
        (self.train_icp_ineff, self.hp.lambda, self.hp.gamma, self.hp.eta)
    }
}

/// Every trained cell plus the selected winner.
#[derive(Debug, Clone)]
pub struct GridResult {
    pub cells: Vec<TrainedCandidate>,
    winner: usize,
}

impl GridResult {
    pub fn winner(&self) -> &TrainedCandidate {
        &self.cells[self.winner]
    }

    pub fn winner_index(&self) -> usize {
        self.winner
    }

    pub fn into_winner(mut self) -> TrainedCandidate {
        self.cells.swap_remove(self.winner)
    }

    pub const CSV_HEADER: &'static str =
        "lambda,gamma,eta,transform,final_loss,train_ineff,train_acc,iterations,diverged";

    /// One row per cell, in grid order.
    pub fn write_csv(&self, mut out: impl Write) -> std::io::Result<()> {
        writeln!(out, "{}", Self::CSV_HEADER)?;
        for c in &self.cells {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                c.hp.lambda,
                c.hp.gamma,
                c.hp.eta,
                c.hp.transform,
                c.final_loss,
                c.train_icp_ineff,
                c.train_icp_acc,
                c.iterations,
                c.diverged
            )?;
        }
        Ok(())
    }
}

/// Trains every cell (in parallel on the current rayon pool) and selects the
/// lowest training-ICP inefficiency, breaking ties by smaller `λ`, then `γ`,
/// then `η`, then grid position.
pub fn grid_search(train: &Dataset, grid: &GridSpec) -> Result<GridResult> {
    grid.validate()?;
    let cells = grid
        .cells()
        .into_par_iter()
        .map(|hp| TrainedCandidate::train(train, hp, grid.ineff))
        .collect::<Result<Vec<_>>>()?;
    let winner = select_winner(&cells).ok_or(Error::AllDiverged)?;
    Ok(GridResult { cells, winner })
}

/// [`grid_search`] on a dedicated pool of `jobs` threads.
pub fn grid_search_with_jobs(train: &Dataset, grid: &GridSpec, jobs: usize) -> Result<GridResult> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::invalid("jobs", e))?;
    pool.install(|| grid_search(train, grid))
}

fn select_winner(cells: &[TrainedCandidate]) -> Option<usize> {
    cells
        .iter()
        .enumerate()
        .filter(|(_, c)| !c.diverged && c.train_icp_ineff.is_finite())
        .min_by(|(ia, a), (ib, b)| {
            let (ka, kb) = (a.selection_key(), b.selection_key());
            ka.0.total_cmp(&kb.0)
                .then(ka.1.total_cmp(&kb.1))
                .then(ka.2.total_cmp(&kb.2))
                .then(ka.3.total_cmp(&kb.3))
                .then(ia.cmp(ib))
        })
        .map(|(i, _)| i)
}

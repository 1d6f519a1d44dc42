//! Inductive conformal prediction over an arbitrary conformity measure.
//!
//! With `n` calibration scores `α_1..α_n`, label `y` enters the prediction set
//! for `x` when
//!
//! ```text
//! #{ i : A(x, y) >= α_i } + 1  >  ε (n + 1)
//! ```
//!
//! Under exchangeability of calibration and test data the resulting sets
//! contain the true label with probability at least `1 - ε`.

use std::fmt;

use ndarray::ArrayView2;

use crate::conformity::{ConformityMeasure, ScoreRow};
use crate::data::{Dataset, MAX_CLASSES};
use crate::error::{Error, Result};

/// Calibration conformity scores, kept both in input order and sorted.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationScores {
    alphas: Vec<f64>,
    sorted: Vec<f64>,
}

impl CalibrationScores {
    pub fn new(alphas: Vec<f64>) -> Result<Self> {
        if alphas.is_empty() {
            return Err(Error::EmptyDataset);
        }
        if alphas.iter().any(|a| !a.is_finite()) {
            return Err(Error::NonFinite("calibration scores"));
        }
        let mut sorted = alphas.clone();
        sorted.sort_by(f64::total_cmp);
        Ok(Self { alphas, sorted })
    }

    /// `α_i = A(x_i, y_i)` over a calibration dataset.
    pub fn from_measure<M: ConformityMeasure + ?Sized>(measure: &M, calib: &Dataset) -> Result<Self> {
        Self::new(measure.true_label_scores(calib.features(), calib.labels())?)
    }

    pub fn alphas(&self) -> &[f64] {
        &self.alphas
    }

    pub fn sorted(&self) -> &[f64] {
        &self.sorted
    }

    pub fn len(&self) -> usize {
        self.alphas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alphas.is_empty()
    }

    /// Number of calibration scores `α_i <= score`.
    pub fn count_at_most(&self, score: f64) -> usize {
        self.sorted.partition_point(|&a| a <= score)
    }

    /// Whether a label with conformity `score` is included at significance
    /// `epsilon`.
    pub fn admits(&self, score: f64, epsilon: f64) -> bool {
        (self.count_at_most(score) + 1) as f64 > rank_threshold(epsilon, self.len())
    }

    /// Threshold form of the prediction set: `α_(j)` with
    /// `j = floor(ε(n+1)) - 1` (one-based), or [`Quantile::AllLabels`] when
    /// `j < 1`.
    ///
    /// This is the value the surrogate loss stands in for; the count rule in
    /// [`CalibrationScores::admits`] remains authoritative and the two can
    /// differ by one rank at ties or boundary values of `ε`.
    pub fn quantile(&self, epsilon: f64) -> Quantile {
        let j = rank_threshold(epsilon, self.len()).floor() as i64 - 1;
        if j < 1 {
            Quantile::AllLabels
        } else {
            let idx = (j as usize - 1).min(self.len() - 1);
            Quantile::Value(self.sorted[idx])
        }
    }
}

/// `ε(n+1)`, snapped to the nearest integer when it is within rounding noise
/// of one, so that decimal `ε` such as 0.29 with `n = 99` gives exactly 29.
fn rank_threshold(epsilon: f64, n: usize) -> f64 {
    let t = epsilon * (n + 1) as f64;
    let r = t.round();
    if (t - r).abs() <= 1e-9 * t.max(1.0) {
        r
    } else {
        t
    }
}

/// Result of [`calibration_quantile`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Quantile {
    /// Degenerate quantile: every label is admitted.
    AllLabels,
    Value(f64),
}

pub fn calibration_quantile(calib: &CalibrationScores, epsilon: f64) -> Quantile {
    calib.quantile(epsilon)
}

/// Subset of `{0..C-1}` stored as a bit mask.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct PredictionSet(u64);

impl PredictionSet {
    pub fn empty() -> Self {
        Self(0)
    }

    pub fn full(n_classes: usize) -> Self {
        assert!(n_classes <= MAX_CLASSES);
        if n_classes == 64 {
            Self(u64::MAX)
        } else {
            Self((1u64 << n_classes) - 1)
        }
    }

    pub fn from_labels(labels: impl IntoIterator<Item = usize>) -> Self {
        let mut set = Self::empty();
        for y in labels {
            set.insert(y);
        }
        set
    }

    pub fn insert(&mut self, label: usize) {
        assert!(label < MAX_CLASSES);
        self.0 |= 1 << label;
    }

    pub fn contains(&self, label: usize) -> bool {
        label < MAX_CLASSES && self.0 & (1 << label) != 0
    }

    pub fn len(&self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(&self) -> bool {
        self.0 == 0
    }

    pub fn is_subset(&self, other: &Self) -> bool {
        self.0 & !other.0 == 0
    }

    pub fn bits(&self) -> u64 {
        self.0
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        (0..MAX_CLASSES).filter(|&y| self.contains(y))
    }
}

impl fmt::Debug for PredictionSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter()).finish()
    }
}

/// Prediction set for one score row.
pub fn prediction_set(calib: &CalibrationScores, epsilon: f64, scores: &[f64]) -> PredictionSet {
    let mut set = PredictionSet::empty();
    for (y, &s) in scores.iter().enumerate() {
        if calib.admits(s, epsilon) {
            set.insert(y);
        }
    }
    set
}

/// Fraction of examples whose label lies in its prediction set.
pub fn coverage(sets: &[PredictionSet], labels: &[usize]) -> Result<f64> {
    if sets.len() != labels.len() {
        return Err(Error::LengthMismatch {
            left: sets.len(),
            right: labels.len(),
        });
    }
    if sets.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let hits = sets.iter().zip(labels).filter(|(s, &y)| s.contains(y)).count();
    Ok(hits as f64 / sets.len() as f64)
}

pub(crate) fn check_epsilon(epsilon: f64) -> Result<()> {
    if epsilon > 0.0 && epsilon < 1.0 {
        Ok(())
    } else {
        Err(Error::invalid("epsilon", epsilon))
    }
}

/// A calibrated conformal classifier.
#[derive(Debug, Clone)]
pub struct IcpModel<M> {
    scorer: M,
    calibration: CalibrationScores,
    epsilon: f64,
}

impl<M: ConformityMeasure> IcpModel<M> {
    pub fn new(scorer: M, calibration: CalibrationScores, epsilon: f64) -> Result<Self> {
        check_epsilon(epsilon)?;
        Ok(Self {
            scorer,
            calibration,
            epsilon,
        })
    }

    /// Calibrates `scorer` on `calib`.
    pub fn fit(scorer: M, calib: &Dataset, epsilon: f64) -> Result<Self> {
        let calibration = CalibrationScores::from_measure(&scorer, calib)?;
        Self::new(scorer, calibration, epsilon)
    }

    pub fn scorer(&self) -> &M {
        &self.scorer
    }

    pub fn calibration(&self) -> &CalibrationScores {
        &self.calibration
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// Same scorer and calibration at another significance level.
    pub fn with_epsilon(mut self, epsilon: f64) -> Result<Self> {
        check_epsilon(epsilon)?;
        self.epsilon = epsilon;
        Ok(self)
    }

    pub fn n_classes(&self) -> usize {
        self.scorer.n_classes()
    }

    pub fn prediction_set(&self, scores: &ScoreRow) -> Result<PredictionSet> {
        if scores.len() != self.n_classes() {
            return Err(Error::DimensionMismatch {
                expected: self.n_classes(),
                actual: scores.len(),
            });
        }
        Ok(prediction_set(&self.calibration, self.epsilon, scores))
    }

    /// Prediction sets for every row of `x`.
    pub fn predict(&self, x: ArrayView2<'_, f64>) -> Result<Vec<PredictionSet>> {
        let scores = self.scorer.score_matrix(x)?;
        Ok(scores
            .outer_iter()
            .map(|row| prediction_set(&self.calibration, self.epsilon, row.as_slice().expect("standard layout")))
            .collect())
    }
}

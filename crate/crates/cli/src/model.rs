//! On-disk model files: versioned JSON holding everything needed to turn a raw
//! CSV row into a prediction set.

use std::fs;
use std::path::Path;

use ndarray::{Array2, ArrayView1};
use serde::{Deserialize, Serialize};

use scpo::baseline::ProbModel;
use scpo::conformity::{ConformityMeasure, ThetaMatrix};
use scpo::data::{add_intercept, apply_normalizer, impute_matrix, impute_with, with_intercept, Dataset, Normalizer, Schema};
use scpo::icp::{CalibrationScores, IcpModel};
use scpo::metrics::InefficiencyMeasure;
use scpo::surrogate::Hyperparams;

use crate::error::{CliError, CliResult};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    ScpoLinear,
    Multinomial,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub schema_version: u32,
    pub model_kind: ModelKind,
    /// `θ` or the softmax weights, `(features + 1) × classes`; the last row
    /// belongs to the intercept.
    pub matrix: Array2<f64>,
    /// Fitted on raw training features; its means double as imputation values.
    pub normalizer: Normalizer,
    pub label_column: String,
    pub label_names: Vec<String>,
    pub feature_names: Vec<String>,
    pub q: f64,
    /// Training configuration; absent for multinomial models.
    pub hyperparams: Option<Hyperparams>,
    pub ineff: InefficiencyMeasure,
    /// Sorted calibration scores, once calibrated.
    pub calibration_alphas: Option<Vec<f64>>,
}

/// Conformity measure stored in a model file.
#[derive(Debug, Clone)]
pub enum Scorer {
    Linear(ThetaMatrix),
    Prob(ProbModel),
}

impl ConformityMeasure for Scorer {
    fn n_features(&self) -> usize {
        match self {
            Self::Linear(t) => t.n_features(),
            Self::Prob(p) => p.n_features(),
        }
    }

    fn n_classes(&self) -> usize {
        match self {
            Self::Linear(t) => t.n_classes(),
            Self::Prob(p) => p.n_classes(),
        }
    }

    fn scores_into(&self, x: ArrayView1<'_, f64>, out: &mut [f64]) {
        match self {
            Self::Linear(t) => t.scores_into(x, out),
            Self::Prob(p) => p.scores_into(x, out),
        }
    }
}

impl ModelFile {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = fs::read_to_string(path).map_err(CliError::io(path))?;
        let model: Self = serde_json::from_str(&text).map_err(|source| CliError::ModelFormat {
            path: path.to_path_buf(),
            source,
        })?;
        if model.schema_version != SCHEMA_VERSION {
            return Err(CliError::SchemaVersion {
                path: path.to_path_buf(),
                found: model.schema_version,
                expected: SCHEMA_VERSION,
            });
        }
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> CliResult<()> {
        let mut text = serde_json::to_string_pretty(self).expect("model serializes");
        text.push('\n');
        fs::write(path, text).map_err(CliError::io(path))
    }

    pub fn schema(&self) -> Schema {
        Schema {
            feature_names: self.feature_names.clone(),
            label_names: self.label_names.clone(),
        }
    }

    pub fn scorer(&self) -> CliResult<Scorer> {
        Ok(match self.model_kind {
            ModelKind::ScpoLinear => Scorer::Linear(ThetaMatrix::from_matrix(self.matrix.clone())?),
            ModelKind::Multinomial => Scorer::Prob(ProbModel::from_weights(self.matrix.clone())?),
        })
    }

    /// Imputes, normalizes and appends the intercept, as at training time.
    pub fn prepare(&self, raw: &Dataset) -> CliResult<Dataset> {
        let filled = impute_with(raw, &self.normalizer.means)?;
        Ok(add_intercept(&apply_normalizer(&self.normalizer, &filled)?)?)
    }

    /// [`ModelFile::prepare`] for an unlabelled feature matrix.
    pub fn prepare_matrix(&self, mut raw: Array2<f64>) -> CliResult<Array2<f64>> {
        impute_matrix(&mut raw, &self.normalizer.means);
        self.normalizer.apply_matrix(&mut raw)?;
        Ok(with_intercept(&raw))
    }

    pub fn icp(&self, epsilon: f64) -> CliResult<IcpModel<Scorer>> {
        let alphas = self.calibration_alphas.clone().ok_or(CliError::Uncalibrated)?;
        Ok(IcpModel::new(self.scorer()?, CalibrationScores::new(alphas)?, epsilon)?)
    }
}

//! Tabular classification data: CSV ingestion, label encoding, missing-value
//! imputation, random splits and train-only z-score normalization.
//!
//! Labels are stored as zero-based class indices into [`Dataset::label_names`].
//! Missing feature cells are held as `NaN` until [`impute_means`] or
//! [`impute_with`] fills them.

use std::collections::BTreeSet;
use std::fs::File;
use std::path::Path;

use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Name given to the column appended by [`add_intercept`].
pub const INTERCEPT_NAME: &str = "(intercept)";

/// Largest label alphabet a [`crate::icp::PredictionSet`] can hold.
pub const MAX_CLASSES: usize = 64;

const MISSING_MARKERS: [&str; 2] = ["", "NA"];

/// Feature matrix with integer-encoded labels and column metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Array2<f64>,
    labels: Vec<usize>,
    label_names: Vec<String>,
    feature_names: Vec<String>,
    has_intercept: bool,
}

impl Dataset {
    /// Builds a dataset without an intercept column. `features` may contain
    /// `NaN` for missing cells.
    pub fn new(
        features: Array2<f64>,
        labels: Vec<usize>,
        label_names: Vec<String>,
        feature_names: Vec<String>,
    ) -> Result<Self> {
        if features.nrows() != labels.len() {
            return Err(Error::LengthMismatch {
                left: features.nrows(),
                right: labels.len(),
            });
        }
        if features.ncols() != feature_names.len() {
            return Err(Error::DimensionMismatch {
                expected: feature_names.len(),
                actual: features.ncols(),
            });
        }
        if label_names.len() < 2 {
            return Err(Error::TooFewClasses(label_names.len()));
        }
        if label_names.len() > MAX_CLASSES {
            return Err(Error::TooManyClasses(label_names.len()));
        }
        let classes = label_names.len();
        if let Some(&label) = labels.iter().find(|&&y| y >= classes) {
            return Err(Error::LabelOutOfRange { label, classes });
        }
        if features.iter().any(|v| v.is_infinite()) {
            return Err(Error::NonFinite("features"));
        }
        Ok(Self {
            features,
            labels,
            label_names,
            feature_names,
            has_intercept: false,
        })
    }

    /// Convenience constructor naming features `x1..xm` and classes `0..C-1`.
    pub fn from_parts(features: Array2<f64>, labels: Vec<usize>, n_classes: usize) -> Result<Self> {
        let feature_names = (1..=features.ncols()).map(|j| format!("x{j}")).collect();
        let label_names = (0..n_classes).map(|c| c.to_string()).collect();
        Self::new(features, labels, label_names, feature_names)
    }

    pub fn features(&self) -> ArrayView2<'_, f64> {
        self.features.view()
    }

    pub fn row(&self, i: usize) -> ArrayView1<'_, f64> {
        self.features.row(i)
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn label_names(&self) -> &[String] {
        &self.label_names
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn has_intercept(&self) -> bool {
        self.has_intercept
    }

    pub fn n_rows(&self) -> usize {
        self.features.nrows()
    }

    pub fn n_features(&self) -> usize {
        self.features.ncols()
    }

    pub fn n_classes(&self) -> usize {
        self.label_names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.n_rows() == 0
    }

    /// Number of rows per class.
    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.n_classes()];
        for &y in &self.labels {
            counts[y] += 1;
        }
        counts
    }

    /// Number of missing (`NaN`) cells.
    pub fn missing_count(&self) -> usize {
        self.features.iter().filter(|v| v.is_nan()).count()
    }

    /// Rows at `indices`, in that order.
    pub fn select_rows(&self, indices: &[usize]) -> Self {
        Self {
            features: self.features.select(Axis(0), indices),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            label_names: self.label_names.clone(),
            feature_names: self.feature_names.clone(),
            has_intercept: self.has_intercept,
        }
    }

    /// Drops feature columns with more than `max_missing` missing cells and
    /// returns the names of the removed columns.
    pub fn drop_sparse_columns(&self, max_missing: usize) -> (Self, Vec<String>) {
        let mut keep = Vec::new();
        let mut dropped = Vec::new();
        for (j, name) in self.feature_names.iter().enumerate() {
            let missing = self.features.column(j).iter().filter(|v| v.is_nan()).count();
            if missing > max_missing {
                dropped.push(name.clone());
            } else {
                keep.push(j);
            }
        }
        let out = Self {
            features: self.features.select(Axis(1), &keep),
            labels: self.labels.clone(),
            label_names: self.label_names.clone(),
            feature_names: keep.iter().map(|&j| self.feature_names[j].clone()).collect(),
            has_intercept: self.has_intercept,
        };
        (out, dropped)
    }

    /// Columns subject to imputation and normalization.
    fn data_columns(&self) -> usize {
        self.n_features() - usize::from(self.has_intercept)
    }
}

/// Column order and label alphabet a dataset must conform to, typically taken
/// from a trained model.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schema {
    pub feature_names: Vec<String>,
    pub label_names: Vec<String>,
}

impl Schema {
    pub fn of(data: &Dataset) -> Self {
        let feature_names = data
            .feature_names()
            .iter()
            .filter(|n| !(data.has_intercept() && n.as_str() == INTERCEPT_NAME))
            .cloned()
            .collect();
        Self {
            feature_names,
            label_names: data.label_names().to_vec(),
        }
    }
}

struct RawTable {
    header: Vec<String>,
    rows: Vec<csv::StringRecord>,
}

impl RawTable {
    fn read(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(file);
        let header = reader.headers()?.iter().map(|h| h.trim().to_string()).collect();
        let rows = reader.records().collect::<std::result::Result<Vec<_>, _>>()?;
        Ok(Self { header, rows })
    }

    fn column(&self, name: &str) -> Result<usize> {
        self.header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    }

    fn numeric_matrix(&self, columns: &[usize]) -> Result<Array2<f64>> {
        let mut out = Array2::zeros((self.rows.len(), columns.len()));
        for (i, record) in self.rows.iter().enumerate() {
            for (j, &col) in columns.iter().enumerate() {
                let cell = record.get(col).unwrap_or("").trim();
                out[[i, j]] = parse_cell(cell).ok_or_else(|| Error::NonNumeric {
                    row: i + 1,
                    column: self.header[col].clone(),
                    value: cell.to_string(),
                })?;
            }
        }
        Ok(out)
    }

    fn label_strings(&self, col: usize) -> Vec<String> {
        self.rows
            .iter()
            .map(|r| r.get(col).unwrap_or("").trim().to_string())
            .collect()
    }
}

fn parse_cell(cell: &str) -> Option<f64> {
    if MISSING_MARKERS.contains(&cell) {
        return Some(f64::NAN);
    }
    cell.parse::<f64>().ok().filter(|v| v.is_finite())
}

/// Loads a CSV with a header row. Every column except `label_column` is a
/// numeric feature; labels are encoded by lexicographic order of their
/// distinct strings.
pub fn load_csv(path: impl AsRef<Path>, label_column: &str) -> Result<Dataset> {
    let table = RawTable::read(path.as_ref())?;
    let label_col = table.column(label_column)?;
    let raw_labels = table.label_strings(label_col);
    let label_names: Vec<String> = raw_labels
        .iter()
        .cloned()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    if label_names.len() < 2 {
        return Err(Error::TooFewClasses(label_names.len()));
    }
    let labels = raw_labels
        .iter()
        .map(|l| label_names.binary_search(l).expect("label drawn from the same set"))
        .collect();

    let feature_cols: Vec<usize> = (0..table.header.len()).filter(|&c| c != label_col).collect();
    let features = table.numeric_matrix(&feature_cols)?;
    let feature_names = feature_cols.iter().map(|&c| table.header[c].clone()).collect();
    Dataset::new(features, labels, label_names, feature_names)
}

/// Loads a labelled CSV against a fixed schema: features are picked by name
/// (extra columns are ignored) and labels must belong to the schema alphabet.
pub fn load_csv_with_schema(
    path: impl AsRef<Path>,
    label_column: &str,
    schema: &Schema,
) -> Result<Dataset> {
    let table = RawTable::read(path.as_ref())?;
    let label_col = table.column(label_column)?;
    let labels = table
        .label_strings(label_col)
        .into_iter()
        .map(|l| {
            schema
                .label_names
                .iter()
                .position(|n| *n == l)
                .ok_or(Error::UnknownLabel(l))
        })
        .collect::<Result<Vec<_>>>()?;
    let cols = schema
        .feature_names
        .iter()
        .map(|n| table.column(n))
        .collect::<Result<Vec<_>>>()?;
    let features = table.numeric_matrix(&cols)?;
    Dataset::new(
        features,
        labels,
        schema.label_names.clone(),
        schema.feature_names.clone(),
    )
}

/// Loads only the named feature columns, for unlabelled prediction inputs.
pub fn load_features_csv(path: impl AsRef<Path>, feature_names: &[String]) -> Result<Array2<f64>> {
    let table = RawTable::read(path.as_ref())?;
    let cols = feature_names
        .iter()
        .map(|n| table.column(n))
        .collect::<Result<Vec<_>>>()?;
    table.numeric_matrix(&cols)
}

/// Output of [`impute_means`].
#[derive(Debug, Clone)]
pub struct Imputed {
    pub train: Dataset,
    pub others: Vec<Dataset>,
    /// Train-column means used as fill values.
    pub means: Vec<f64>,
    /// Rows removed because every feature was missing, over all datasets.
    pub dropped_rows: usize,
}

/// Fills missing cells in `train` and every dataset in `others` with the
/// train-column mean of observed values. Rows with no observed feature are
/// dropped first.
pub fn impute_means(train: &Dataset, others: &[Dataset]) -> Result<Imputed> {
    let (train, mut dropped_rows) = drop_empty_rows(train);
    let cols = train.data_columns();
    let mut means = Vec::with_capacity(cols);
    for j in 0..cols {
        let (sum, n) = train
            .features
            .column(j)
            .iter()
            .filter(|v| !v.is_nan())
            .fold((0.0, 0usize), |(s, n), &v| (s + v, n + 1));
        if n == 0 {
            return Err(Error::ColumnAllMissing(train.feature_names[j].clone()));
        }
        means.push(sum / n as f64);
    }
    let train = impute_with(&train, &means)?;
    let others = others
        .iter()
        .map(|d| {
            let (d, dropped) = drop_empty_rows(d);
            dropped_rows += dropped;
            impute_with(&d, &means)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Imputed {
        train,
        others,
        means,
        dropped_rows,
    })
}

fn drop_empty_rows(data: &Dataset) -> (Dataset, usize) {
    let cols = data.data_columns();
    if cols == 0 {
        return (data.clone(), 0);
    }
    let keep: Vec<usize> = (0..data.n_rows())
        .filter(|&i| {
            data.features
                .slice(s![i, ..cols])
                .iter()
                .any(|v| !v.is_nan())
        })
        .collect();
    let dropped = data.n_rows() - keep.len();
    if dropped == 0 {
        (data.clone(), 0)
    } else {
        (data.select_rows(&keep), dropped)
    }
}

/// Replaces missing cells of column `j` with `fill[j]`.
pub fn impute_with(data: &Dataset, fill: &[f64]) -> Result<Dataset> {
    if fill.len() != data.data_columns() {
        return Err(Error::DimensionMismatch {
            expected: data.data_columns(),
            actual: fill.len(),
        });
    }
    let mut out = data.clone();
    impute_matrix(&mut out.features, fill);
    Ok(out)
}

/// In-place variant of [`impute_with`] for bare feature matrices.
pub fn impute_matrix(features: &mut Array2<f64>, fill: &[f64]) {
    for (j, &mean) in fill.iter().enumerate() {
        for v in features.column_mut(j) {
            if v.is_nan() {
                *v = mean;
            }
        }
    }
}

/// Sizes of a train / calibration / test partition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_count: usize,
    pub calib_count: usize,
    pub test_count: usize,
    pub seed: u64,
}

impl SplitSpec {
    pub fn new(train_count: usize, calib_count: usize, test_count: usize, seed: u64) -> Self {
        Self {
            train_count,
            calib_count,
            test_count,
            seed,
        }
    }

    /// Near-equal thirds of `n` rows, with the remainder going to train.
    pub fn thirds(n: usize, seed: u64) -> Self {
        let third = n / 3;
        Self::new(n - 2 * third, third, third, seed)
    }

    pub fn total(&self) -> usize {
        self.train_count + self.calib_count + self.test_count
    }
}

/// Partitions `data` by a seeded uniform permutation. Rows keep their
/// original relative order inside each part.
pub fn split(data: &Dataset, spec: SplitSpec) -> Result<(Dataset, Dataset, Dataset)> {
    if spec.total() != data.n_rows() {
        return Err(Error::SplitMismatch {
            requested: spec.total(),
            available: data.n_rows(),
        });
    }
    if spec.train_count == 0 {
        return Err(Error::EmptySplit("train"));
    }
    if spec.calib_count == 0 {
        return Err(Error::EmptySplit("calibration"));
    }
    let mut order: Vec<usize> = (0..data.n_rows()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    order.shuffle(&mut rng);

    let (train, rest) = order.split_at_mut(spec.train_count);
    let (calib, test) = rest.split_at_mut(spec.calib_count);
    let take = |idx: &mut [usize]| {
        idx.sort_unstable();
        data.select_rows(idx)
    };
    Ok((take(train), take(calib), take(test)))
}

/// Per-column z-score statistics fitted on training data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    pub means: Vec<f64>,
    /// Sample standard deviations; `0` marks a constant column.
    pub stds: Vec<f64>,
    /// The last column is an intercept and passes through untouched.
    #[serde(default)]
    pub excludes_intercept: bool,
}

impl Normalizer {
    pub fn is_constant(&self, j: usize) -> bool {
        self.stds[j] == 0.0
    }

    fn scale(&self, j: usize) -> f64 {
        if self.is_constant(j) {
            1.0
        } else {
            self.stds[j]
        }
    }

    fn active_columns(&self) -> usize {
        self.means.len() - usize::from(self.excludes_intercept)
    }

    /// Applies the transform to a bare matrix with the same column layout.
    pub fn apply_matrix(&self, features: &mut Array2<f64>) -> Result<()> {
        if features.ncols() != self.means.len() {
            return Err(Error::DimensionMismatch {
                expected: self.means.len(),
                actual: features.ncols(),
            });
        }
        for j in 0..self.active_columns() {
            let (mean, scale) = (self.means[j], self.scale(j));
            features.column_mut(j).mapv_inplace(|v| (v - mean) / scale);
        }
        Ok(())
    }

    /// Undoes [`apply_normalizer`].
    pub fn invert(&self, data: &Dataset) -> Result<Dataset> {
        self.check(data)?;
        let mut out = data.clone();
        for j in 0..self.active_columns() {
            let (mean, scale) = (self.means[j], self.scale(j));
            out.features.column_mut(j).mapv_inplace(|v| v * scale + mean);
        }
        Ok(out)
    }

    fn check(&self, data: &Dataset) -> Result<()> {
        if data.n_features() != self.means.len() {
            return Err(Error::DimensionMismatch {
                expected: self.means.len(),
                actual: data.n_features(),
            });
        }
        if data.has_intercept() != self.excludes_intercept {
            return Err(Error::invalid(
                "intercept layout",
                format!("data has_intercept={}", data.has_intercept()),
            ));
        }
        Ok(())
    }
}

/// Fits per-column mean and sample standard deviation (denominator `k-1`).
pub fn fit_normalizer(train: &Dataset) -> Result<Normalizer> {
    if train.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if train.features.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("training features"));
    }
    let k = train.n_rows() as f64;
    let mut means = Vec::with_capacity(train.n_features());
    let mut stds = Vec::with_capacity(train.n_features());
    for (j, col) in train.features.axis_iter(Axis(1)).enumerate() {
        let mean = col.sum() / k;
        let is_intercept = train.has_intercept && j + 1 == train.n_features();
        let var = if train.n_rows() < 2 || is_intercept {
            0.0
        } else {
            col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1.0)
        };
        let tiny = 1e-12 * mean.abs().max(1.0);
        means.push(mean);
        stds.push(if var.sqrt() <= tiny { 0.0 } else { var.sqrt() });
    }
    Ok(Normalizer {
        means,
        stds,
        excludes_intercept: train.has_intercept,
    })
}

/// `x' = (x - mean) / std` per column; constant columns are only shifted and
/// an intercept column is left as is.
pub fn apply_normalizer(norm: &Normalizer, data: &Dataset) -> Result<Dataset> {
    norm.check(data)?;
    let mut out = data.clone();
    norm.apply_matrix(&mut out.features)?;
    Ok(out)
}

/// Appends a constant-1 column.
pub fn add_intercept(data: &Dataset) -> Result<Dataset> {
    if data.has_intercept {
        return Err(Error::InterceptPresent);
    }
    let mut out = data.clone();
    out.features
        .push_column(Array1::ones(data.n_rows()).view())
        .expect("row count matches");
    out.feature_names.push(INTERCEPT_NAME.to_string());
    out.has_intercept = true;
    Ok(out)
}

/// Appends a constant-1 column to a bare matrix.
pub fn with_intercept(features: &Array2<f64>) -> Array2<f64> {
    let mut out = features.clone();
    out.push_column(Array1::ones(features.nrows()).view())
        .expect("row count matches");
    out
}

#[cfg(test)]
mod tests {
    use std::io::Write;

    use approx::assert_abs_diff_eq;
    use ndarray::array;
    use rand::{Rng, SeedableRng};

    use super::*;

    fn csv_file(body: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(body.as_bytes()).unwrap();
        f
    }

    fn toy(features: Array2<f64>) -> Dataset {
        let n = features.nrows();
        Dataset::from_parts(features, (0..n).map(|i| i % 2).collect(), 2).unwrap()
    }

    #[test]
    fn labels_encoded_lexicographically() {
        let f = csv_file("x,y\n1,b\n2,a\n3,b\n4,a\n");
        let d = load_csv(f.path(), "y").unwrap();
        assert_eq!(d.labels(), &[1, 0, 1, 0]);
        assert_eq!(d.label_names(), &["a", "b"]);
        assert_eq!(d.feature_names(), &["x"]);
        // reloading is stable
        assert_eq!(load_csv(f.path(), "y").unwrap(), d);
    }

    #[test]
    fn single_class_rejected() {
        let f = csv_file("x,y\n1,a\n2,a\n");
        assert!(matches!(load_csv(f.path(), "y"), Err(Error::TooFewClasses(1))));
    }

    #[test]
    fn load_errors() {
        assert!(matches!(
            load_csv("/nonexistent/file.csv", "y"),
            Err(Error::Io { .. })
        ));
        let f = csv_file("x,y\n1,a\n2,b\n");
        assert!(matches!(load_csv(f.path(), "label"), Err(Error::MissingColumn(_))));
        let f = csv_file("x,y\n1,a\nfoo,b\n");
        assert!(matches!(
            load_csv(f.path(), "y"),
            Err(Error::NonNumeric { row: 2, .. })
        ));
    }

    #[test]
    fn missing_markers_become_nan() {
        let f = csv_file("x,z,y\n1,,a\nNA,2,b\n3,4,a\n");
        let d = load_csv(f.path(), "y").unwrap();
        assert!(d.row(0)[1].is_nan());
        assert!(d.row(1)[0].is_nan());
        assert_eq!(d.missing_count(), 2);
    }

    #[test]
    fn schema_loading_uses_model_alphabet() {
        let f = csv_file("extra,x,y\n0,1,b\n0,2,b\n");
        let schema = Schema {
            feature_names: vec!["x".into()],
            label_names: vec!["a".into(), "b".into()],
        };
        let d = load_csv_with_schema(f.path(), "y", &schema).unwrap();
        assert_eq!(d.labels(), &[1, 1]);
        assert_eq!(d.features(), array![[1.0], [2.0]]);

        let f = csv_file("x,y\n1,c\n");
        assert!(matches!(
            load_csv_with_schema(f.path(), "y", &schema),
            Err(Error::UnknownLabel(_))
        ));
    }

    #[test]
    fn impute_uses_train_means() {
        let nan = f64::NAN;
        let train = toy(array![[1.0, 5.0], [nan, 6.0], [3.0, 7.0]]);
        let test = toy(array![[nan, 1.0], [0.0, nan]]);
        let out = impute_means(&train, &[test]).unwrap();
        assert_eq!(out.train.features(), array![[1.0, 5.0], [2.0, 6.0], [3.0, 7.0]]);
        assert_eq!(out.others[0].features(), array![[2.0, 1.0], [0.0, 6.0]]);
        assert_eq!(out.dropped_rows, 0);
    }

    #[test]
    fn impute_identity_without_missing() {
        let train = toy(array![[1.0, 2.0], [3.0, 4.0]]);
        let other = toy(array![[5.0, 6.0]]);
        let out = impute_means(&train, std::slice::from_ref(&other)).unwrap();
        assert_eq!(out.train, train);
        assert_eq!(out.others[0], other);
    }

    #[test]
    fn impute_drops_fully_missing_rows() {
        let nan = f64::NAN;
        let train = toy(array![[1.0, 2.0], [nan, nan], [3.0, 4.0]]);
        let other = toy(array![[nan, nan], [1.0, nan]]);
        let out = impute_means(&train, &[other]).unwrap();
        assert_eq!(out.train.n_rows(), 2);
        assert_eq!(out.others[0].n_rows(), 1);
        assert_eq!(out.dropped_rows, 2);
    }

    #[test]
    fn impute_rejects_all_missing_column() {
        let nan = f64::NAN;
        let train = toy(array![[1.0, nan], [2.0, nan]]);
        assert!(matches!(
            impute_means(&train, &[]),
            Err(Error::ColumnAllMissing(name)) if name == "x2"
        ));
    }

    #[test]
    fn drop_sparse_columns_by_threshold() {
        let nan = f64::NAN;
        let d = toy(array![[1.0, nan, nan], [2.0, nan, 1.0], [3.0, 1.0, 1.0]]);
        let (out, dropped) = d.drop_sparse_columns(1);
        assert_eq!(dropped, vec!["x2".to_string()]);
        assert_eq!(out.feature_names(), &["x1", "x3"]);
    }

    #[test]
    fn split_is_deterministic_partition() {
        let d = toy(Array2::from_shape_fn((10, 1), |(i, _)| i as f64));
        let spec = SplitSpec::new(6, 2, 2, 42);
        let a = split(&d, spec).unwrap();
        let b = split(&d, spec).unwrap();
        assert_eq!(a, b);
        let mut rows: Vec<f64> = [&a.0, &a.1, &a.2]
            .iter()
            .flat_map(|p| p.features().column(0).to_vec())
            .collect();
        rows.sort_by(f64::total_cmp);
        assert_eq!(rows, (0..10).map(f64::from).collect::<Vec<_>>());
        assert_eq!((a.0.n_rows(), a.1.n_rows(), a.2.n_rows()), (6, 2, 2));
    }

    #[test]
    fn split_errors() {
        let d = toy(Array2::zeros((10, 1)));
        assert!(matches!(
            split(&d, SplitSpec::new(10, 0, 0, 1)),
            Err(Error::EmptySplit("calibration"))
        ));
        assert!(matches!(
            split(&d, SplitSpec::new(5, 2, 2, 1)),
            Err(Error::SplitMismatch { .. })
        ));
    }

    #[test]
    fn split_sizes_at_scale() {
        let d = toy(Array2::zeros((20867, 1)));
        let (tr, ca, te) = split(&d, SplitSpec::new(6954, 3476, 10437, 7)).unwrap();
        assert_eq!((tr.n_rows(), ca.n_rows(), te.n_rows()), (6954, 3476, 10437));
    }

    #[test]
    fn normalizer_basic_statistics() {
        let d = toy(array![[1.0, 5.0], [2.0, 5.0], [3.0, 5.0]]);
        let n = fit_normalizer(&d).unwrap();
        assert_eq!(n.means, vec![2.0, 5.0]);
        assert_eq!(n.stds, vec![1.0, 0.0]);
        assert!(n.is_constant(1));
        let out = apply_normalizer(&n, &d).unwrap();
        assert_eq!(out.features(), array![[-1.0, 0.0], [0.0, 0.0], [1.0, 0.0]]);
        assert!(matches!(fit_normalizer(&toy(Array2::zeros((0, 2)))), Err(Error::EmptyDataset)));
    }

    #[test]
    fn normalizer_centres_random_data() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = Array2::from_shape_fn((100, 5), |(_, j)| rng.random::<f64>() * (j + 1) as f64 * 10.0 - 3.0);
        let d = toy(x);
        let norm = fit_normalizer(&d).unwrap();
        let z = apply_normalizer(&norm, &d).unwrap();
        for col in z.features().axis_iter(Axis(1)) {
            let mean = col.sum() / 100.0;
            let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 99.0;
            assert!(mean.abs() < 1e-9);
            assert_abs_diff_eq!(var, 1.0, epsilon = 1e-9);
        }
        let back = norm.invert(&z).unwrap();
        for (a, b) in back.features().iter().zip(d.features().iter()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn normalizer_uses_train_statistics_only() {
        let train = toy(array![[1.0], [2.0], [3.0]]);
        let test = toy(array![[3.0], [5.0]]);
        let norm = fit_normalizer(&train).unwrap();
        let out = apply_normalizer(&norm, &test).unwrap();
        assert_eq!(out.features(), array![[1.0], [3.0]]);
        assert!(apply_normalizer(&norm, &toy(array![[1.0, 2.0]])).is_err());
    }

    #[test]
    fn intercept_column() {
        let d = toy(array![[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]]);
        let di = add_intercept(&d).unwrap();
        assert_eq!(di.n_features(), 3);
        assert_eq!(di.features().column(2).to_vec(), vec![1.0; 3]);
        assert!(di.has_intercept());
        assert!(matches!(add_intercept(&di), Err(Error::InterceptPresent)));

        let norm = fit_normalizer(&di).unwrap();
        assert!(norm.is_constant(2));
        let z = apply_normalizer(&norm, &di).unwrap();
        assert_eq!(z.features().column(2).to_vec(), vec![1.0; 3]);
        assert_eq!(Schema::of(&di).feature_names, vec!["x1", "x2"]);
    }

    #[test]
    fn imputation_preserves_observed_values() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let x = Array2::from_shape_fn((40, 3), |_| {
            if rng.random::<f64>() < 0.2 {
                f64::NAN
            } else {
                rng.random::<f64>()
            }
        });
        let d = toy(x.clone());
        let out = impute_means(&d, &[]).unwrap();
        assert_eq!(out.dropped_rows, 0);
        for (orig, new) in x.iter().zip(out.train.features().iter()) {
            if !orig.is_nan() {
                assert_eq!(orig, new);
            }
            assert!(new.is_finite());
        }
    }
}

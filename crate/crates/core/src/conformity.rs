//! Parametric conformity measures.
//!
//! A conformity measure maps an input `x` to one score per label. The
//! multiclass linear measure scores label `y` as `θ_[y] · x`, where `θ_[y]` is
//! column `y` of an `m × C` [`ThetaMatrix`].

use std::ops::Deref;

use ndarray::{Array2, ArrayView1, ArrayView2, ShapeBuilder};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Conformity scores of one input, one entry per label.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreRow(pub Vec<f64>);

impl Deref for ScoreRow {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

/// Anything that scores `(x, y)` pairs without looking at other examples.
pub trait ConformityMeasure: Sync {
    fn n_features(&self) -> usize;

    fn n_classes(&self) -> usize;

    /// Writes one score per label into `out` (length `n_classes`).
    fn scores_into(&self, x: ArrayView1<'_, f64>, out: &mut [f64]);

    fn scores(&self, x: ArrayView1<'_, f64>) -> Result<ScoreRow> {
        check_len(self.n_features(), x.len())?;
        let mut out = vec![0.0; self.n_classes()];
        self.scores_into(x, &mut out);
        Ok(ScoreRow(out))
    }

    /// Scores every row of `x`; row `i` of the result is the score row of
    /// `x[i]`.
    fn score_matrix(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        check_len(self.n_features(), x.ncols())?;
        let mut out = Array2::zeros((x.nrows(), self.n_classes()));
        for (xi, mut row) in x.outer_iter().zip(out.outer_iter_mut()) {
            let slice = row.as_slice_mut().expect("standard layout");
            self.scores_into(xi, slice);
        }
        Ok(out)
    }

    /// Score of the true label for each row, i.e. the calibration `α_i`.
    fn true_label_scores(&self, x: ArrayView2<'_, f64>, labels: &[usize]) -> Result<Vec<f64>> {
        if x.nrows() != labels.len() {
            return Err(Error::LengthMismatch {
                left: x.nrows(),
                right: labels.len(),
            });
        }
        let scores = self.score_matrix(x)?;
        labels
            .iter()
            .enumerate()
            .map(|(i, &y)| {
                scores
                    .get((i, y))
                    .copied()
                    .ok_or(Error::LabelOutOfRange {
                        label: y,
                        classes: self.n_classes(),
                    })
            })
            .collect()
    }
}

impl<M: ConformityMeasure + ?Sized> ConformityMeasure for &M {
    fn n_features(&self) -> usize {
        (**self).n_features()
    }

    fn n_classes(&self) -> usize {
        (**self).n_classes()
    }

    fn scores_into(&self, x: ArrayView1<'_, f64>, out: &mut [f64]) {
        (**self).scores_into(x, out)
    }

    fn score_matrix(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        (**self).score_matrix(x)
    }
}

fn check_len(expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, actual })
    }
}

/// `m × C` parameters of the multiclass linear conformity measure.
///
/// The flat parameter vector `θ` of length `p = C·m` is laid out column by
/// column: entry `(row, class)` sits at flat index `row + m·class`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThetaMatrix(Array2<f64>);

impl ThetaMatrix {
    pub fn zeros(n_features: usize, n_classes: usize) -> Self {
        Self(Array2::zeros((n_features, n_classes)))
    }

    pub fn from_matrix(entries: Array2<f64>) -> Result<Self> {
        if entries.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("theta"));
        }
        Ok(Self(entries))
    }

    /// Inverse of [`ThetaMatrix::flatten`].
    pub fn unflatten(flat: &[f64], n_features: usize, n_classes: usize) -> Result<Self> {
        let entries = Array2::from_shape_vec((n_features, n_classes).f(), flat.to_vec()).map_err(
            |_| Error::DimensionMismatch {
                expected: n_features * n_classes,
                actual: flat.len(),
            },
        )?;
        Self::from_matrix(entries.as_standard_layout().into_owned())
    }

    pub fn flatten(&self) -> Vec<f64> {
        self.0.t().iter().copied().collect()
    }

    pub fn flat_index(&self, row: usize, class: usize) -> usize {
        row + self.n_features() * class
    }

    pub fn n_features(&self) -> usize {
        self.0.nrows()
    }

    pub fn n_classes(&self) -> usize {
        self.0.ncols()
    }

    pub fn n_params(&self) -> usize {
        self.0.len()
    }

    pub fn entries(&self) -> &Array2<f64> {
        &self.0
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self(&self.0 * c)
    }

    /// `A = X·T`, the `k × C` score matrix.
    pub fn linear_scores_batch(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        check_len(self.n_features(), x.ncols())?;
        Ok(x.dot(&self.0))
    }
}

impl ConformityMeasure for ThetaMatrix {
    fn n_features(&self) -> usize {
        ThetaMatrix::n_features(self)
    }

    fn n_classes(&self) -> usize {
        ThetaMatrix::n_classes(self)
    }

    fn scores_into(&self, x: ArrayView1<'_, f64>, out: &mut [f64]) {
        for (o, col) in out.iter_mut().zip(self.0.columns()) {
            *o = col.dot(&x);
        }
    }

}

/// `A(x, y) = θ_[y] · x` for every label.
pub fn linear_scores(theta: &ThetaMatrix, x: ArrayView1<'_, f64>) -> Result<ScoreRow> {
    theta.scores(x)
}

/// Sparse vector over the flat parameter index.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseGrad {
    pub len: usize,
    pub entries: Vec<(usize, f64)>,
}

impl SparseGrad {
    pub fn to_dense(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.len];
        for &(j, v) in &self.entries {
            out[j] += v;
        }
        out
    }
}

/// `∂A(x, y)/∂θ`: equals `x_a` at flat index `a + m·y`, zero elsewhere.
pub fn linear_score_grad(theta: &ThetaMatrix, x: ArrayView1<'_, f64>, y: usize) -> Result<SparseGrad> {
    check_len(theta.n_features(), x.len())?;
    if y >= theta.n_classes() {
        return Err(Error::LabelOutOfRange {
            label: y,
            classes: theta.n_classes(),
        });
    }
    let entries = x
        .iter()
        .enumerate()
        .filter(|(_, &v)| v != 0.0)
        .map(|(a, &v)| (theta.flat_index(a, y), v))
        .collect();
    Ok(SparseGrad {
        len: theta.n_params(),
        entries,
    })
}

/// Numerically stable in-place softmax.
pub fn softmax_in_place(logits: &mut [f64]) {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for v in logits.iter_mut() {
        *v = (*v - max).exp();
        total += *v;
    }
    for v in logits.iter_mut() {
        *v /= total;
    }
}

#[cfg(test)]
mod tests {
    use ndarray::{array, Array1};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;

    fn random_theta(rng: &mut impl Rng, m: usize, c: usize) -> ThetaMatrix {
        ThetaMatrix::from_matrix(Array2::from_shape_fn((m, c), |_| rng.random_range(-2.0..2.0))).unwrap()
    }

    #[test]
    fn zero_theta_scores_zero() {
        let theta = ThetaMatrix::zeros(3, 4);
        let s = linear_scores(&theta, array![1.0, -2.0, 5.0].view()).unwrap();
        assert_eq!(s.0, vec![0.0; 4]);
    }

    #[test]
    fn unit_columns_pick_coordinates() {
        let theta = ThetaMatrix::from_matrix(array![[1.0, 0.0], [0.0, 1.0]]).unwrap();
        let s = linear_scores(&theta, array![3.0, -4.0].view()).unwrap();
        assert_eq!(s.0, vec![3.0, -4.0]);
        assert!(matches!(
            linear_scores(&theta, array![1.0].view()),
            Err(Error::DimensionMismatch { expected: 2, actual: 1 })
        ));
    }

    #[test]
    fn batch_matches_per_element_dot_products() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let theta = random_theta(&mut rng, 4, 3);
        let x = Array2::from_shape_fn((25, 4), |_| rng.random_range(-3.0..3.0));
        let batch = theta.score_matrix(x.view()).unwrap();
        for i in 0..25 {
            for y in 0..3 {
                let mut dot = 0.0;
                for a in 0..4 {
                    dot += theta.entries()[[a, y]] * x[[i, a]];
                }
                assert!((batch[[i, y]] - dot).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn flat_index_convention() {
        let theta = ThetaMatrix::zeros(2, 3);
        let g = linear_score_grad(&theta, array![5.0, 7.0].view(), 1).unwrap();
        // zero-based class 1, rows 0 and 1
        assert_eq!(g.entries, vec![(2, 5.0), (3, 7.0)]);
        assert_eq!(g.len, 6);
        let g = linear_score_grad(&theta, array![0.0, 7.0].view(), 2).unwrap();
        assert_eq!(g.entries, vec![(5, 7.0)]);
        assert!(matches!(
            linear_score_grad(&theta, array![1.0, 1.0].view(), 3),
            Err(Error::LabelOutOfRange { label: 3, classes: 3 })
        ));
    }

    #[test]
    fn flatten_round_trip() {
        let t = ThetaMatrix::from_matrix(array![[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]]).unwrap();
        let flat = t.flatten();
        assert_eq!(flat, vec![1.0, 4.0, 2.0, 5.0, 3.0, 6.0]);
        assert_eq!(ThetaMatrix::unflatten(&flat, 2, 3).unwrap(), t);
        assert!(ThetaMatrix::unflatten(&flat, 2, 2).is_err());
        assert!(ThetaMatrix::from_matrix(array![[f64::NAN]]).is_err());
    }

    #[test]
    fn grad_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let h = 1e-5;
        for _ in 0..20 {
            let theta = random_theta(&mut rng, 3, 4);
            let x = Array1::from_shape_fn(3, |_| rng.random_range(-3.0..3.0));
            let y = rng.random_range(0..4);
            let analytic = linear_score_grad(&theta, x.view(), y).unwrap().to_dense();
            let flat = theta.flatten();
            for j in 0..flat.len() {
                let mut plus = flat.clone();
                let mut minus = flat.clone();
                plus[j] += h;
                minus[j] -= h;
                let fp = linear_scores(&ThetaMatrix::unflatten(&plus, 3, 4).unwrap(), x.view()).unwrap()[y];
                let fm = linear_scores(&ThetaMatrix::unflatten(&minus, 3, 4).unwrap(), x.view()).unwrap()[y];
                let numeric = (fp - fm) / (2.0 * h);
                let rel = (analytic[j] - numeric).abs() / analytic[j].abs().max(numeric.abs()).max(1.0);
                assert!(rel < 1e-8, "j={j} analytic={} numeric={numeric}", analytic[j]);
            }
            // independent of theta
            let other = random_theta(&mut rng, 3, 4);
            assert_eq!(linear_score_grad(&other, x.view(), y).unwrap().to_dense(), analytic);
        }
    }

    #[test]
    fn linear_scores_scale_with_theta() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let theta = random_theta(&mut rng, 3, 3);
        let x = array![0.5, -1.5, 2.0];
        let base = linear_scores(&theta, x.view()).unwrap();
        let scaled = linear_scores(&theta.scaled(3.0), x.view()).unwrap();
        for (a, b) in base.iter().zip(scaled.iter()) {
            assert!((3.0 * a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn softmax_sums_to_one() {
        let mut v = vec![1000.0, 1001.0, -5.0];
        softmax_in_place(&mut v);
        assert!((v.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(v.iter().all(|p| p.is_finite()));
    }
}

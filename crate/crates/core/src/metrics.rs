//! Accuracy, inefficiency and paired comparison of conformal predictors.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use statrs::distribution::{Binomial, DiscreteCDF};

use crate::conformity::ConformityMeasure;
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::icp::{coverage, IcpModel, PredictionSet};

/// Cost of a prediction set as a function of its size `w`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InefficiencyMeasure {
    /// `f(w) = w`, the set size itself.
    Identity,
    /// `f(w) = ln(w + 1)`.
    #[serde(rename = "log")]
    Log1p,
}

impl InefficiencyMeasure {
    pub fn f(self, w: f64) -> f64 {
        match self {
            Self::Identity => w,
            Self::Log1p => w.ln_1p(),
        }
    }

    pub fn f_prime(self, w: f64) -> f64 {
        match self {
            Self::Identity => 1.0,
            Self::Log1p => 1.0 / (w + 1.0),
        }
    }
}

impl fmt::Display for InefficiencyMeasure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Identity => "identity",
            Self::Log1p => "log",
        })
    }
}

impl FromStr for InefficiencyMeasure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "identity" => Ok(Self::Identity),
            "log" | "log1p" => Ok(Self::Log1p),
            other => Err(Error::invalid("inefficiency measure", other)),
        }
    }
}

/// Mean of `f(|Γ|)` over the sets.
pub fn inefficiency(sets: &[PredictionSet], measure: InefficiencyMeasure) -> Result<f64> {
    if sets.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let total: f64 = sets.iter().map(|s| measure.f(s.len() as f64)).sum();
    Ok(total / sets.len() as f64)
}

/// Paired sign test on set sizes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BinomialComparison {
    /// Examples where the first predictor gave the strictly smaller set.
    pub wins_a: usize,
    pub wins_b: usize,
    /// Two-sided exact binomial p-value; `None` when every pair tied.
    pub p_value: Option<f64>,
}

/// Two-sided exact binomial test of `P(win) = 1/2` on the non-tied pairs.
pub fn binomial_compare(sets_a: &[PredictionSet], sets_b: &[PredictionSet]) -> Result<BinomialComparison> {
    if sets_a.len() != sets_b.len() {
        return Err(Error::LengthMismatch {
            left: sets_a.len(),
            right: sets_b.len(),
        });
    }
    let (mut wins_a, mut wins_b) = (0, 0);
    for (a, b) in sets_a.iter().zip(sets_b) {
        match a.len().cmp(&b.len()) {
            std::cmp::Ordering::Less => wins_a += 1,
            std::cmp::Ordering::Greater => wins_b += 1,
            std::cmp::Ordering::Equal => {}
        }
    }
    Ok(BinomialComparison {
        wins_a,
        wins_b,
        p_value: sign_test_p_value(wins_a, wins_b),
    })
}

/// `min(1, 2 P(X <= min(a, b)))` with `X ~ Binomial(a + b, 1/2)`.
pub fn sign_test_p_value(wins_a: usize, wins_b: usize) -> Option<f64> {
    let n = wins_a + wins_b;
    if n == 0 {
        return None;
    }
    let dist = Binomial::new(0.5, n as u64).expect("valid binomial parameters");
    let tail = dist.cdf(wins_a.min(wins_b) as u64);
    Some((2.0 * tail).min(1.0))
}

/// Summary of an ICP on a test set.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub epsilon: f64,
    pub accuracy: f64,
    pub mean_ineff: f64,
    /// `set_size_histogram[s]` counts sets of size `s`, for `s` in `0..=C`.
    pub set_size_histogram: Vec<usize>,
    pub n_test: usize,
}

impl EvalReport {
    pub fn from_sets(
        sets: &[PredictionSet],
        labels: &[usize],
        n_classes: usize,
        epsilon: f64,
        measure: InefficiencyMeasure,
    ) -> Result<Self> {
        let accuracy = coverage(sets, labels)?;
        let mean_ineff = inefficiency(sets, measure)?;
        let mut set_size_histogram = vec![0; n_classes + 1];
        for s in sets {
            set_size_histogram[s.len()] += 1;
        }
        Ok(Self {
            epsilon,
            accuracy,
            mean_ineff,
            set_size_histogram,
            n_test: sets.len(),
        })
    }

    /// Mean set size recovered from the histogram.
    pub fn mean_size(&self) -> f64 {
        let total: usize = self.set_size_histogram.iter().enumerate().map(|(s, c)| s * c).sum();
        total as f64 / self.n_test as f64
    }

    pub fn csv_header() -> &'static str {
        "epsilon,accuracy,mean_ineff,n_test,size_histogram"
    }

    pub fn csv_row(&self) -> String {
        let hist: Vec<String> = self.set_size_histogram.iter().map(usize::to_string).collect();
        format!(
            "{},{},{},{},{}",
            self.epsilon,
            self.accuracy,
            self.mean_ineff,
            self.n_test,
            hist.join("|")
        )
    }
}

/// Builds prediction sets for all test rows and aggregates them.
pub fn evaluate_icp<M: ConformityMeasure>(
    model: &IcpModel<M>,
    test: &Dataset,
    measure: InefficiencyMeasure,
) -> Result<EvalReport> {
    if test.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let sets = model.predict(test.features())?;
    EvalReport::from_sets(&sets, test.labels(), model.n_classes(), model.epsilon(), measure)
}

/// `100 (1 - scpo / baseline)`.
pub fn change_in_inefficiency(scpo: f64, baseline: f64) -> Result<f64> {
    if baseline <= 0.0 || !baseline.is_finite() {
        return Err(Error::invalid("baseline inefficiency", baseline));
    }
    Ok(100.0 * (1.0 - scpo / baseline))
}

/// One line of a results table comparing a trained ICP with the baseline.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    pub dataset: String,
    pub lambda: f64,
    pub gamma: f64,
    pub scpo: EvalReport,
    pub baseline: EvalReport,
    pub test: BinomialComparison,
}

impl ComparisonRow {
    pub fn change(&self) -> f64 {
        change_in_inefficiency(self.scpo.mean_ineff, self.baseline.mean_ineff).unwrap_or(f64::NAN)
    }

    pub fn header() -> String {
        format!(
            "{:<10} {:>6} {:>7} {:>5} | {:>6} {:>7} | {:>6} {:>7} | {:>6} | {:>6} {:>6} {:>9}",
            "dataset", "conf", "lambda", "gamma", "acc", "ineff", "acc", "ineff", "ch", "wins", "losses", "p"
        )
    }
}

impl fmt::Display for ComparisonRow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let p = self
            .test
            .p_value
            .map_or_else(|| "-".to_string(), |p| format!("{p:.3e}"));
        write!(
            f,
            "{:<10} {:>6.1} {:>7} {:>5} | {:>6.1} {:>7.3} | {:>6.1} {:>7.3} | {:>6.1} | {:>6} {:>6} {:>9}",
            self.dataset,
            100.0 * (1.0 - self.scpo.epsilon),
            self.lambda,
            self.gamma,
            100.0 * self.scpo.accuracy,
            self.scpo.mean_ineff,
            100.0 * self.baseline.accuracy,
            self.baseline.mean_ineff,
            self.change(),
            self.test.wins_a,
            self.test.wins_b,
            p
        )
    }
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    fn sized(sizes: &[usize]) -> Vec<PredictionSet> {
        sizes.iter().map(|&n| PredictionSet::from_labels(0..n)).collect()
    }

    /// Tail sum of binomial coefficients, computed in exact integer arithmetic.
    fn exact_two_sided(a: u32, b: u32) -> f64 {
        let n = a + b;
        let k = a.min(b);
        let mut coef: u128 = 1;
        let mut tail: u128 = 0;
        for i in 0..=k {
            if i > 0 {
                coef = coef * u128::from(n - i + 1) / u128::from(i);
            }
            tail += coef;
        }
        (2.0 * tail as f64 / 2f64.powi(n as i32)).min(1.0)
    }

    #[test]
    fn inefficiency_means() {
        assert_eq!(inefficiency(&sized(&[1, 1, 1]), InefficiencyMeasure::Identity).unwrap(), 1.0);
        assert_eq!(inefficiency(&sized(&[1, 2, 3]), InefficiencyMeasure::Identity).unwrap(), 2.0);
        let log = inefficiency(&sized(&[1, 2, 3]), InefficiencyMeasure::Log1p).unwrap();
        let expected = (2f64.ln() + 3f64.ln() + 4f64.ln()) / 3.0;
        assert!((log - expected).abs() < 1e-15);
        assert!((log - 1.059351).abs() < 1e-6);
        assert!(inefficiency(&[], InefficiencyMeasure::Identity).is_err());
    }

    #[test]
    fn measure_derivatives() {
        for m in [InefficiencyMeasure::Identity, InefficiencyMeasure::Log1p] {
            for w in [0.1, 1.0, 2.5, 7.0] {
                let h = 1e-6;
                let numeric = (m.f(w + h) - m.f(w - h)) / (2.0 * h);
                assert!((numeric - m.f_prime(w)).abs() < 1e-8);
            }
            assert_eq!(m.to_string().parse::<InefficiencyMeasure>().unwrap(), m);
        }
        assert!("square".parse::<InefficiencyMeasure>().is_err());
    }

    #[test]
    fn binomial_reference_values() {
        let a = sized(&[1; 10]);
        let b = sized(&[2; 10]);
        let cmp = binomial_compare(&a, &b).unwrap();
        assert_eq!((cmp.wins_a, cmp.wins_b), (10, 0));
        assert!((cmp.p_value.unwrap() - 2.0 * 0.5f64.powi(10)).abs() < 1e-12);

        let a = sized(&[1, 1, 1, 1, 1, 2, 2, 2, 2, 2]);
        let b = sized(&[2, 2, 2, 2, 2, 1, 1, 1, 1, 1]);
        let cmp = binomial_compare(&a, &b).unwrap();
        assert_eq!((cmp.wins_a, cmp.wins_b), (5, 5));
        assert!((cmp.p_value.unwrap() - 1.0).abs() < 1e-12);

        let cmp = binomial_compare(&a, &a).unwrap();
        assert_eq!((cmp.wins_a, cmp.wins_b, cmp.p_value), (0, 0, None));
        assert!(binomial_compare(&a, &b[..3]).is_err());
    }

    #[test]
    fn p_values_match_exact_tail_sums() {
        for (a, b) in [(0, 1), (3, 9), (20, 31), (7, 7), (45, 60), (0, 100)] {
            let p = sign_test_p_value(a, b).unwrap();
            let oracle = exact_two_sided(a as u32, b as u32);
            assert!((p - oracle).abs() < 1e-9 * oracle.max(1e-3), "{a},{b}: {p} vs {oracle}");
        }
    }

    #[test]
    fn change_percent() {
        assert!((change_in_inefficiency(3.04, 4.84).unwrap() - 37.19).abs() < 0.01);
        assert_eq!(change_in_inefficiency(2.0, 2.0).unwrap(), 0.0);
        let ch = change_in_inefficiency(1.19, 1.16).unwrap();
        assert!((ch - -2.586).abs() < 1e-3);
        assert!(change_in_inefficiency(1.0, 0.0).is_err());
    }

    #[test]
    fn report_histogram() {
        let sets = sized(&[0, 1, 1, 3]);
        let r = EvalReport::from_sets(&sets, &[0, 0, 1, 2], 3, 0.1, InefficiencyMeasure::Identity).unwrap();
        assert_eq!(r.set_size_histogram, vec![1, 2, 0, 1]);
        assert_eq!(r.accuracy, 0.5);
        assert_eq!(r.mean_size(), r.mean_ineff);
        assert_eq!(r.csv_row(), "0.1,0.5,1.25,4,1|2|0|1");
    }

    proptest! {
        #[test]
        fn comparison_is_antisymmetric(sizes in prop::collection::vec((0usize..5, 0usize..5), 1..80)) {
            let a: Vec<_> = sizes.iter().map(|&(x, _)| PredictionSet::from_labels(0..x)).collect();
            let b: Vec<_> = sizes.iter().map(|&(_, y)| PredictionSet::from_labels(0..y)).collect();
            let ab = binomial_compare(&a, &b).unwrap();
            let ba = binomial_compare(&b, &a).unwrap();
            prop_assert_eq!((ab.wins_a, ab.wins_b), (ba.wins_b, ba.wins_a));
            prop_assert_eq!(ab.p_value, ba.p_value);
        }

        #[test]
        fn identity_inefficiency_is_histogram_mean(sizes in prop::collection::vec(0usize..6, 1..50)) {
            let sets = sized(&sizes);
            let labels = vec![0; sets.len()];
            let r = EvalReport::from_sets(&sets, &labels, 5, 0.1, InefficiencyMeasure::Identity).unwrap();
            prop_assert_eq!(r.mean_size(), r.mean_ineff);
            prop_assert_eq!(r.set_size_histogram.iter().sum::<usize>(), r.n_test);
        }
    }
}

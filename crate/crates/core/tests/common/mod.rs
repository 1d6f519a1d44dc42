//! Synthetic data shared by the integration suites.
#![allow(dead_code)]

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use scpo::data::{add_intercept, apply_normalizer, fit_normalizer, Dataset};

/// One Gaussian component: mean plus a 2×2 linear map applied to standard
/// normal noise.
#[derive(Debug, Clone, Copy)]
pub struct Component {
    pub mean: [f64; 2],
    pub mix: [[f64; 2]; 2],
}

impl Component {
    pub fn isotropic(mean: [f64; 2], sd: f64) -> Self {
        Self {
            mean,
            mix: [[sd, 0.0], [0.0, sd]],
        }
    }

    /// Elongated noise: `sd_major` along `angle` (radians), `sd_minor` across.
    pub fn elongated(mean: [f64; 2], angle: f64, sd_major: f64, sd_minor: f64) -> Self {
        let (s, c) = angle.sin_cos();
        Self {
            mean,
            mix: [[c * sd_major, -s * sd_minor], [s * sd_major, c * sd_minor]],
        }
    }
}

/// Draws `n` labelled points; labels drawn uniformly over the components.
pub fn sample(components: &[Component], n: usize, rng: &mut impl Rng) -> Dataset {
    let normal = Normal::new(0.0, 1.0).unwrap();
    let mut x = Array2::zeros((n, 2));
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let y = rng.random_range(0..components.len());
        let comp = &components[y];
        let (z0, z1) = (normal.sample(rng), normal.sample(rng));
        x[[i, 0]] = comp.mean[0] + comp.mix[0][0] * z0 + comp.mix[0][1] * z1;
        x[[i, 1]] = comp.mean[1] + comp.mix[1][0] * z0 + comp.mix[1][1] * z1;
        labels.push(y);
    }
    Dataset::from_parts(x, labels, components.len()).unwrap()
}

/// Well-mixed 3-class Gaussian problem.
pub fn three_class() -> Vec<Component> {
    vec![
        Component::isotropic([0.0, 1.2], 1.0),
        Component::isotropic([-1.0, -0.6], 1.0),
        Component::isotropic([1.0, -0.6], 1.0),
    ]
}

/// Two classes whose noise differs in scale and orientation.
pub fn heteroscedastic_two_class() -> Vec<Component> {
    vec![
        Component::elongated([-1.0, 0.0], std::f64::consts::FRAC_PI_2, 2.5, 0.4),
        Component::elongated([1.0, 0.0], std::f64::consts::FRAC_PI_4, 2.5, 0.4),
    ]
}

/// Train / calibration / test splits drawn independently from the same
/// distribution, normalized with train statistics, with an intercept.
pub struct Splits {
    pub train: Dataset,
    pub calib: Dataset,
    pub test: Dataset,
}

pub fn draw_splits(components: &[Component], sizes: (usize, usize, usize), seed: u64) -> Splits {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let train = sample(components, sizes.0, &mut rng);
    let calib = sample(components, sizes.1, &mut rng);
    let test = sample(components, sizes.2, &mut rng);
    let norm = fit_normalizer(&train).unwrap();
    let prep = |d: &Dataset| add_intercept(&apply_normalizer(&norm, d).unwrap()).unwrap();
    Splits {
        train: prep(&train),
        calib: prep(&calib),
        test: prep(&test),
    }
}

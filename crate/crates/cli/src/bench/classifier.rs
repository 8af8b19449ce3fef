//! Ridge linear classifier on standardized features and balanced accuracy.

use chanadapt::{DMatrix, DVector};

use crate::error::{CliError, Result};

/// Features are standardized with training statistics; a feature whose
/// training spread is below this is dropped (set to zero).
const MIN_FEATURE_STD: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct RidgeClassifier {
    mean: DVector<f64>,
    scale: DVector<f64>,
    weights: DVector<f64>,
    intercept: f64,
}

impl RidgeClassifier {
    /// Fits `±1` targets (class 1 → +1) by ridge regression. Rows of
    /// `features` are samples.
    pub fn fit(features: &DMatrix<f64>, classes: &[usize], ridge: f64) -> Result<Self> {
        let (n, p) = features.shape();
        if n != classes.len() || n < 2 {
            return Err(CliError::Config(format!("{n} feature rows for {} labels", classes.len())));
        }
        let mean = DVector::from_iterator(p, features.column_iter().map(|c| c.mean()));
        let scale = DVector::from_iterator(
            p,
            features.column_iter().zip(mean.iter()).map(|(c, m)| {
                let var = c.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n as f64;
                let s = var.sqrt();
                if s < MIN_FEATURE_STD {
                    0.0
                } else {
                    1.0 / s
                }
            }),
        );
        let z = standardize(features, &mean, &scale);
        let y = DVector::from_iterator(n, classes.iter().map(|&c| if c == 1 { 1.0 } else { -1.0 }));
        let intercept = y.mean();
        let yc = y.add_scalar(-intercept);
        let gram = z.transpose() * &z + DMatrix::identity(p, p) * ridge.max(1e-12);
        let weights = gram
            .cholesky()
            .ok_or_else(|| CliError::Core(chanadapt::Error::Singular("ridge classifier".into())))?
            .solve(&(z.transpose() * yc));
        Ok(Self {
            mean,
            scale,
            weights,
            intercept,
        })
    }

    pub fn predict(&self, features: &DMatrix<f64>) -> Vec<usize> {
        let z = standardize(features, &self.mean, &self.scale);
        (z * &self.weights)
            .iter()
            .map(|s| usize::from(s + self.intercept > 0.0))
            .collect()
    }
}

fn standardize(x: &DMatrix<f64>, mean: &DVector<f64>, scale: &DVector<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(x.nrows(), x.ncols(), |i, j| (x[(i, j)] - mean[j]) * scale[j])
}

/// Mean per-class recall over the classes present in `truth`.
pub fn balanced_accuracy(truth: &[usize], predicted: &[usize]) -> f64 {
    let mut classes: Vec<usize> = truth.to_vec();
    classes.sort_unstable();
    classes.dedup();
    let recalls: Vec<f64> = classes
        .iter()
        .map(|&c| {
            let total = truth.iter().filter(|&&t| t == c).count();
            let hit = truth.iter().zip(predicted).filter(|(&t, &p)| t == c && p == c).count();
            hit as f64 / total as f64
        })
        .collect();
    recalls.iter().sum::<f64>() / recalls.len() as f64
}

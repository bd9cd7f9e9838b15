use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::MetricsError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OlsFit {
    /// Intercept first, then one coefficient per design column.
    pub coefficients: Vec<f64>,
    pub r2: f64,
    pub adjusted_r2: f64,
    pub mse: f64,
    pub n: usize,
    pub p: usize,
}

impl OlsFit {
    pub fn predict(&self, row: &[f64]) -> f64 {
        predict(&self.coefficients, row)
    }
}

fn predict(coefficients: &[f64], row: &[f64]) -> f64 {
    coefficients[0] + coefficients[1..].iter().zip(row).map(|(b, x)| b * x).sum::<f64>()
}

fn width(x: &[Vec<f64>], y: &[f64]) -> Result<usize, MetricsError> {
    if x.len() != y.len() {
        return Err(MetricsError::DegenerateInput(format!("{} rows but {} targets", x.len(), y.len())));
    }
    let p = x.first().map_or(0, Vec::len);
    if x.iter().any(|r| r.len() != p) {
        return Err(MetricsError::DegenerateInput("ragged design matrix".into()));
    }
    if x.iter().flatten().chain(y).any(|v| !v.is_finite()) {
        return Err(MetricsError::DegenerateInput("non-finite value".into()));
    }
    Ok(p)
}

fn with_intercept(x: &[Vec<f64>], p: usize) -> DMatrix<f64> {
    DMatrix::from_fn(x.len(), p + 1, |i, j| if j == 0 { 1.0 } else { x[i][j - 1] })
}

fn tolerance(sv: &DVector<f64>, rows: usize, cols: usize) -> f64 {
    sv.max() * rows.max(cols) as f64 * f64::EPSILON
}

/// Ordinary least squares with an intercept. `x` holds one row per
/// observation.
pub fn ols_fit(x: &[Vec<f64>], y: &[f64]) -> Result<OlsFit, MetricsError> {
    let p = width(x, y)?;
    let n = y.len();
    if n <= p + 1 {
        return Err(MetricsError::InsufficientData(format!("n = {n} must exceed p + 1 = {}", p + 1)));
    }
    let design = with_intercept(x, p);
    let svd = design.clone().svd(true, true);
    let tol = tolerance(&svd.singular_values, n, p + 1);
    if svd.singular_values.iter().any(|&s| s <= tol) {
        return Err(MetricsError::SingularDesign);
    }
    let beta = svd
        .solve(&DVector::from_column_slice(y), tol)
        .map_err(|_| MetricsError::SingularDesign)?;
    let coefficients: Vec<f64> = beta.iter().copied().collect();

    let mean_y = y.iter().sum::<f64>() / n as f64;
    let mut ss_res = 0.0;
    let mut ss_tot = 0.0;
    for (row, &yi) in x.iter().zip(y) {
        let r = yi - predict(&coefficients, row);
        ss_res += r * r;
        ss_tot += (yi - mean_y).powi(2);
    }
    if ss_tot == 0.0 {
        return Err(MetricsError::DegenerateInput("target has zero variance".into()));
    }
    let r2 = 1.0 - ss_res / ss_tot;
    let adjusted_r2 = 1.0 - (1.0 - r2) * (n as f64 - 1.0) / (n as f64 - p as f64 - 1.0);
    Ok(OlsFit { coefficients, r2, adjusted_r2, mse: ss_res / n as f64, n, p })
}

/// Minimum-norm least squares with an intercept; tolerates rank deficiency.
/// Returns intercept first.
pub fn lstsq(x: &[Vec<f64>], y: &[f64]) -> Result<Vec<f64>, MetricsError> {
    let p = width(x, y)?;
    if y.is_empty() {
        return Err(MetricsError::InsufficientData("no observations".into()));
    }
    let design = with_intercept(x, p);
    let svd = design.svd(true, true);
    let tol = tolerance(&svd.singular_values, y.len(), p + 1);
    let beta = svd
        .solve(&DVector::from_column_slice(y), tol)
        .map_err(|e| MetricsError::DegenerateInput(e.to_string()))?;
    Ok(beta.iter().copied().collect())
}

/// Shuffle `0..n` once with a seeded ChaCha8 stream and cut it into `k`
/// folds; the first `n % k` folds get one extra element.
pub fn fold_assignment(n: usize, k: usize, seed: u64) -> Result<Vec<Vec<usize>>, MetricsError> {
    if k < 2 {
        return Err(MetricsError::InsufficientData(format!("k = {k} must be at least 2")));
    }
    if n < k {
        return Err(MetricsError::InsufficientData(format!("{n} records cannot fill {k} folds")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let (base, extra) = (n / k, n % k);
    let mut folds = Vec::with_capacity(k);
    let mut start = 0;
    for f in 0..k {
        let size = base + usize::from(f < extra);
        folds.push(order[start..start + size].to_vec());
        start += size;
    }
    Ok(folds)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvSummary {
    pub k: usize,
    pub seed: u64,
    pub fold_sizes: Vec<usize>,
    pub fold_mse: Vec<f64>,
    pub mean_mse: f64,
    /// Population standard deviation across folds.
    pub std_mse: f64,
}

/// k-fold cross-validated test MSE of the least-squares fit.
pub fn cross_validate(x: &[Vec<f64>], y: &[f64], k: usize, seed: u64) -> Result<CvSummary, MetricsError> {
    width(x, y)?;
    let folds = fold_assignment(y.len(), k, seed)?;
    let mut fold_mse = Vec::with_capacity(k);
    for (f, test) in folds.iter().enumerate() {
        let mut train_x = Vec::new();
        let mut train_y = Vec::new();
        for (g, fold) in folds.iter().enumerate() {
            if g != f {
                for &i in fold {
                    train_x.push(x[i].clone());
                    train_y.push(y[i]);
                }
            }
        }
        let beta = lstsq(&train_x, &train_y)?;
        let sse: f64 = test.iter().map(|&i| (y[i] - predict(&beta, &x[i])).powi(2)).sum();
        fold_mse.push(sse / test.len() as f64);
    }
    let mean_mse = fold_mse.iter().sum::<f64>() / k as f64;
    let var = fold_mse.iter().map(|m| (m - mean_mse).powi(2)).sum::<f64>() / k as f64;
    Ok(CvSummary {
        k,
        seed,
        fold_sizes: folds.iter().map(Vec::len).collect(),
        fold_mse,
        mean_mse,
        std_mse: var.sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn noiseless_plane() {
        let x: Vec<Vec<f64>> = vec![
            vec![0.0, 1.0],
            vec![1.0, 0.0],
            vec![2.0, 3.0],
            vec![3.0, 1.0],
            vec![4.0, 5.0],
            vec![5.0, 2.0],
        ];
        let y: Vec<f64> = x.iter().map(|r| 3.0 * r[0] - 2.0 * r[1] + 1.0).collect();
        let fit = ols_fit(&x, &y).unwrap();
        for (got, want) in fit.coefficients.iter().zip([1.0, 3.0, -2.0]) {
            assert!((got - want).abs() < 1e-9);
        }
        assert!((fit.r2 - 1.0).abs() < 1e-12);
        assert!(fit.mse < 1e-20);
    }

    #[test]
    fn insufficient_and_singular() {
        let x = vec![vec![1.0], vec![2.0]];
        assert!(matches!(ols_fit(&x, &[1.0, 2.0]), Err(MetricsError::InsufficientData(_))));
        let x = vec![vec![1.0, 2.0], vec![2.0, 4.0], vec![3.0, 6.0], vec![4.0, 8.0]];
        assert_eq!(ols_fit(&x, &[1.0, 3.0, 2.0, 5.0]), Err(MetricsError::SingularDesign));
        let x = vec![vec![1.0], vec![1.0], vec![1.0], vec![1.0]];
        assert_eq!(ols_fit(&x, &[1.0, 3.0, 2.0, 5.0]), Err(MetricsError::SingularDesign));
    }

    #[test]
    fn fold_sizes_near_equal() {
        let folds = fold_assignment(103, 5, 1).unwrap();
        let sizes: Vec<usize> = folds.iter().map(Vec::len).collect();
        assert_eq!(sizes, vec![21, 21, 21, 20, 20]);
        let mut all: Vec<usize> = folds.concat();
        all.sort_unstable();
        assert_eq!(all, (0..103).collect::<Vec<_>>());
        assert!(fold_assignment(3, 5, 1).is_err());
        assert!(fold_assignment(10, 1, 1).is_err());
    }

    #[test]
    fn identical_records_zero_error() {
        let x = vec![vec![2.0, 1.0]; 10];
        let y = vec![7.0; 10];
        let cv = cross_validate(&x, &y, 5, 3).unwrap();
        assert!(cv.mean_mse.abs() < 1e-18);
        assert!(cv.std_mse.abs() < 1e-18);
    }

    #[test]
    fn cv_deterministic() {
        let x: Vec<Vec<f64>> = (0..30).map(|i| vec![i as f64, ((i * 7) % 5) as f64]).collect();
        let y: Vec<f64> = (0..30).map(|i| (i as f64).sin() * 3.0 + i as f64).collect();
        assert_eq!(cross_validate(&x, &y, 5, 9).unwrap(), cross_validate(&x, &y, 5, 9).unwrap());
        assert_ne!(cross_validate(&x, &y, 5, 9).unwrap(), cross_validate(&x, &y, 5, 10).unwrap());
    }
}

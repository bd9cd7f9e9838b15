use statrs::distribution::{ContinuousCDF, StudentsT};

use super::MetricsError;

fn check_lengths(x: &[f64], y: &[f64]) -> Result<(), MetricsError> {
    if x.len() != y.len() {
        return Err(MetricsError::DegenerateInput(format!(
            "length mismatch: {} vs {}",
            x.len(),
            y.len()
        )));
    }
    if x.len() < 3 {
        return Err(MetricsError::DegenerateInput(format!("need at least 3 points, got {}", x.len())));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(MetricsError::DegenerateInput("non-finite value".into()));
    }
    Ok(())
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Pearson's r.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64, MetricsError> {
    check_lengths(x, y)?;
    let (mx, my) = (mean(x), mean(y));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(MetricsError::DegenerateInput("zero variance".into()));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// 1-based ranks with ties sharing their mean rank.
pub fn average_ranks(v: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..v.len()).collect();
    order.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut ranks = vec![0.0; v.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && v[order[j + 1]] == v[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = rank;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman's rho: Pearson on average ranks.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64, MetricsError> {
    check_lengths(x, y)?;
    pearson(&average_ranks(x), &average_ranks(y))
}

/// Two-sided p-value for H0: rho = 0, from t = r·sqrt((n−2)/(1−r²)) on n−2
/// degrees of freedom.
pub fn pearson_p_value(r: f64, n: usize) -> Result<f64, MetricsError> {
    if n < 3 {
        return Err(MetricsError::InsufficientData(format!("need n >= 3, got {n}")));
    }
    if !(-1.0..=1.0).contains(&r) {
        return Err(MetricsError::DegenerateInput(format!("r = {r} outside [-1, 1]")));
    }
    let df = (n - 2) as f64;
    let denom = 1.0 - r * r;
    if denom <= 0.0 {
        return Ok(0.0);
    }
    let t = r.abs() * (df / denom).sqrt();
    let dist = StudentsT::new(0.0, 1.0, df).expect("positive degrees of freedom");
    Ok((2.0 * (1.0 - dist.cdf(t))).clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_relations() {
        let x = [1.0, 4.0, 2.0, 8.0, 5.0];
        let y: Vec<f64> = x.iter().map(|v| 2.0 * v + 1.0).collect();
        assert!((pearson(&x, &y).unwrap() - 1.0).abs() < 1e-12);
        assert!((spearman(&x, &y).unwrap() - 1.0).abs() < 1e-12);
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        assert!((pearson(&x, &neg).unwrap() + 1.0).abs() < 1e-12);
    }

    #[test]
    fn ties_get_mean_rank() {
        assert_eq!(average_ranks(&[10.0, 20.0, 10.0, 30.0]), vec![1.5, 3.0, 1.5, 4.0]);
    }

    #[test]
    fn degenerate_inputs() {
        assert!(matches!(pearson(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]), Err(MetricsError::DegenerateInput(_))));
        assert!(matches!(pearson(&[1.0, 2.0], &[1.0, 2.0]), Err(MetricsError::DegenerateInput(_))));
        assert!(matches!(spearman(&[1.0, 2.0, 3.0], &[5.0, 5.0, 5.0]), Err(MetricsError::DegenerateInput(_))));
    }

    #[test]
    fn p_values() {
        // r = 0.5, n = 12: t = 0.5·sqrt(10/0.75) = 1.8257, two-sided p ≈ 0.0979.
        let p = pearson_p_value(0.5, 12).unwrap();
        assert!((p - 0.0979).abs() < 5e-4, "{p}");
        assert_eq!(pearson_p_value(1.0, 10).unwrap(), 0.0);
        assert!((pearson_p_value(0.0, 10).unwrap() - 1.0).abs() < 1e-12);
    }
}

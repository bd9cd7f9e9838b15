use std::fmt::Write;

use super::study::StatsReport;
use super::Target;

fn cell(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".to_string(), |v| format!("{v:+.4}"))
}

/// Plain-text summary: a feature × target grid of Pearson / Spearman
/// coefficients, then fit quality per target and the hypothesis checks.
pub fn render_table(report: &StatsReport) -> String {
    let mut out = String::new();
    let features: Vec<&str> = {
        let mut seen = Vec::new();
        for c in &report.correlations {
            if !seen.contains(&c.feature.as_str()) {
                seen.push(c.feature.as_str());
            }
        }
        seen
    };
    let width = features.iter().map(|f| f.len()).max().unwrap_or(7).max(7);
    let _ = writeln!(out, "n = {}, alpha = {}, k = {}, seed = {}", report.n, report.alpha, report.k, report.seed);
    let _ = writeln!(out);
    let _ = write!(out, "{:width$}", "feature");
    for t in Target::ALL {
        let _ = write!(out, "  {:>21}", format!("{} r / rho", t.key()));
    }
    let _ = writeln!(out);
    for f in &features {
        let _ = write!(out, "{f:width$}");
        for t in Target::ALL {
            let c = report.correlation(f, t);
            let r = cell(c.and_then(|c| c.pearson));
            let rho = cell(c.and_then(|c| c.spearman));
            let _ = write!(out, "  {:>21}", format!("{r} / {rho}"));
        }
        let _ = writeln!(out);
    }
    let _ = writeln!(out);
    let _ = writeln!(out, "{:12}  {:>12}  {:>10}  {:>22}", "target", "adjusted R2", "MSE", "CV MSE (mean ± std)");
    for t in Target::ALL {
        if let (Some(ols), Some(cv)) = (report.ols.get(&t), report.cv.get(&t)) {
            let _ = writeln!(
                out,
                "{:12}  {:>12.4}  {:>10.4}  {:>22}",
                t.key(),
                ols.adjusted_r2,
                ols.mse,
                format!("{:.4} ± {:.4}", cv.mean_mse, cv.std_mse)
            );
        }
    }
    let _ = writeln!(out);
    for (label, h) in &report.hypothesis_checks {
        let _ = writeln!(
            out,
            "{label}: r({}, {}) = {:+.4}, p = {:.4}, expected sign {:+}, {}",
            h.feature,
            h.target.key(),
            h.pearson,
            h.p_value,
            h.expected_sign,
            if h.supported { "supported" } else { "not supported" }
        );
    }
    out
}

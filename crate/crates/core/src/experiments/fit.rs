use super::ExperimentError;
use serde::{Deserialize, Serialize};

/// Ordinary least-squares line with its correlation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    /// `None` when either coordinate is constant.
    pub pearson: Option<f64>,
    pub n_points: usize,
    /// Points left out: zero, non-finite or (for log fits) nonpositive abscissae.
    pub n_dropped: usize,
    /// Negative ordinates whose absolute value entered a log fit.
    #[serde(default)]
    pub n_negative: usize,
    pub domain: String,
}

/// Pearson correlation; `None` when either series has zero variance.
pub fn pearson(xs: &[f64], ys: &[f64]) -> Result<Option<f64>, ExperimentError> {
    if xs.len() != ys.len() {
        return Err(ExperimentError::Length(xs.len(), ys.len()));
    }
    if xs.len() < 2 {
        return Err(ExperimentError::TooFewPoints(xs.len()));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Ok(None);
    }
    Ok(Some((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0)))
}

pub fn linear_fit(xs: &[f64], ys: &[f64]) -> Result<LinearFit, ExperimentError> {
    let r = pearson(xs, ys)?;
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return Err(ExperimentError::DegenerateAbscissa);
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    Ok(LinearFit {
        slope,
        intercept: my - slope * mx,
        pearson: r,
        n_points: xs.len(),
        n_dropped: 0,
        n_negative: 0,
        domain: "linear".into(),
    })
}

/// OLS of `log|y|` on `log x`. Points with `y = 0`, non-finite values or
/// `x ≤ 0` are dropped and counted; negative `y` enter through `|y|` and are counted.
pub fn loglog_fit(points: &[(f64, f64)]) -> Result<LinearFit, ExperimentError> {
    let mut xs = Vec::with_capacity(points.len());
    let mut ys = Vec::with_capacity(points.len());
    let mut dropped = 0;
    let mut negative = 0;
    for &(x, y) in points {
        if !(x > 0.0 && x.is_finite() && y.is_finite() && y != 0.0) {
            dropped += 1;
            continue;
        }
        if y < 0.0 {
            negative += 1;
        }
        xs.push(x.ln());
        ys.push(y.abs().ln());
    }
    if xs.len() < 2 {
        return Err(ExperimentError::TooFewPoints(xs.len()));
    }
    let mut fit = linear_fit(&xs, &ys)?;
    fit.n_dropped = dropped;
    fit.n_negative = negative;
    fit.domain = "log|y| vs log x".into();
    Ok(fit)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn inverse_square_root() {
        let pts: Vec<(f64, f64)> = [10.0, 100.0, 1000.0, 5000.0]
            .iter()
            .map(|&n: &f64| (n, n.powf(-0.5)))
            .collect();
        let fit = loglog_fit(&pts).unwrap();
        assert_relative_eq!(fit.slope, -0.5, max_relative = 1e-12);
        assert_relative_eq!(fit.pearson.unwrap(), -1.0, max_relative = 1e-12);
    }

    #[test]
    fn constant_series_is_degenerate() {
        let pts = [(1.0, 3.0), (2.0, 3.0), (4.0, 3.0)];
        let fit = loglog_fit(&pts).unwrap();
        assert_eq!(fit.slope, 0.0);
        assert_eq!(fit.pearson, None);
    }

    #[test]
    fn hand_computed_pearson() {
        // means 2 and 7/3; cov sum 2, var sums 2 and 14/3.
        let r = pearson(&[1.0, 2.0, 3.0], &[2.0, 1.0, 4.0])
            .unwrap()
            .unwrap();
        let want = 2.0 / (2.0f64 * 14.0 / 3.0).sqrt();
        assert_relative_eq!(r, want, max_relative = 1e-14);
        assert!((r - 0.6547).abs() < 1e-4);
    }

    #[test]
    fn zeros_dropped_negatives_counted() {
        let fit = loglog_fit(&[(1.0, 1.0), (2.0, 0.0), (4.0, -0.25), (8.0, 0.125)]).unwrap();
        assert_eq!(fit.n_points, 3);
        assert_eq!(fit.n_dropped, 1);
        assert_eq!(fit.n_negative, 1);
        assert!(loglog_fit(&[(1.0, 1.0), (2.0, 0.0)]).is_err());
    }

    #[test]
    fn collinear_points_fit_exactly() {
        let xs = [0.0, 1.0, 2.5, 4.0];
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 - 2.0 * x).collect();
        let fit = linear_fit(&xs, &ys).unwrap();
        assert_relative_eq!(fit.slope, -2.0, max_relative = 1e-14);
        assert_relative_eq!(fit.intercept, 3.0, max_relative = 1e-14);
    }
}

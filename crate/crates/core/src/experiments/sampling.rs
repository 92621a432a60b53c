use super::{
    linear_fit, run_grid, CellOutput, ConvergenceReport, ExperimentError, LinearFit, SweepConfig,
};
use crate::manifold::{
    evaluate_signal, make_manifold, sample_points, ManifoldKind, SpectralSignal,
};
use std::collections::BTreeMap;

/// Discrete inner products of a sampled signal with sampled eigenfunctions
/// against its spectral coefficients.
///
/// Metrics per cell: `ip_err_i = |⟨P_N f, P_N φ_i⟩_N − f̂_i|` for `i < M`,
/// and the primary `ip_err`, the Euclidean norm of that error vector.
pub fn run_sampling_consistency(
    config: &SweepConfig,
) -> Result<ConvergenceReport, ExperimentError> {
    config.validate()?;
    let manifold = make_manifold(config.manifold, config.bandwidth)?;
    let m = manifold.bandwidth();
    let coeffs = config
        .signal
        .clone()
        .unwrap_or_else(|| super::default_signal(config.bandwidth));
    let signal = SpectralSignal::new(&manifold, coeffs)?;

    let (records, warnings) = run_grid(config, |n, _s, seed| {
        let points = sample_points(&manifold, n, seed)?;
        let f = evaluate_signal(&signal, &points)?;
        let basis = manifold.basis_at(&points)?;
        let mut ip = vec![0.0; m];
        for (fv, row) in f.iter().zip(basis.chunks(m)) {
            for (acc, phi) in ip.iter_mut().zip(row) {
                *acc += fv * phi;
            }
        }
        let errs: Vec<f64> = ip
            .iter()
            .zip(signal.coeffs())
            .map(|(s, c)| (s / n as f64 - c).abs())
            .collect();
        let mut values = vec![(
            "ip_err".to_string(),
            errs.iter().map(|e| e * e).sum::<f64>().sqrt(),
        )];
        values.extend(
            errs.iter()
                .enumerate()
                .map(|(i, &e)| (format!("ip_err_{i}"), e)),
        );
        Ok(CellOutput {
            values,
            warnings: Vec::new(),
        })
    })?;
    Ok(ConvergenceReport::assemble(
        "sampling",
        "ip_err",
        config,
        records,
        warnings,
        BTreeMap::new(),
    ))
}

/// Regression of `log λ_i` on `log i` (1-based `i`) over `i ∈ [count/4, count]`,
/// skipping zero eigenvalues.
pub fn weyl_fit(eigenvalues: &[f64]) -> Result<LinearFit, ExperimentError> {
    let count = eigenvalues.len();
    let start = (count / 4).max(1);
    let (xs, ys): (Vec<f64>, Vec<f64>) = (start..=count)
        .filter(|&i| eigenvalues[i - 1] > 0.0)
        .map(|i| ((i as f64).ln(), eigenvalues[i - 1].ln()))
        .unzip();
    if xs.len() < 2 {
        return Err(ExperimentError::TooFewPoints(xs.len()));
    }
    let mut fit = linear_fit(&xs, &ys)?;
    fit.n_dropped = count + 1 - start - xs.len();
    fit.domain = format!("log lambda_i vs log i, i in [{start}, {count}]");
    Ok(fit)
}

/// Weyl exponent of the analytic spectrum: the slope should approach `2/d`.
pub fn check_weyl(kind: ManifoldKind, count: usize) -> Result<LinearFit, ExperimentError> {
    let manifold = make_manifold(kind, count)?;
    weyl_fit(manifold.eigenvalues())
}

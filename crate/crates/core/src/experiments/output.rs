use super::{run_grid, CellOutput, ConvergenceReport, ExperimentError, SweepConfig};
use crate::filter::{check_low_pass, FilterBasis, FilterCoeffs, LowPassGrid};
use crate::graph::{build_epsilon_graph_with, discrete_norm, epsilon_schedule};
use crate::manifold::{evaluate_signal, make_manifold, mnn_forward, sample_points, SpectralSignal};
use crate::nn::{gnn_forward, Activation, GnnModel, NodeFeatures};
use crate::training::OwnedShift;
use std::collections::BTreeMap;

/// Default input signal: `f̂_i = (−1)^i / (1 + i)`.
pub fn default_signal(bandwidth: usize) -> Vec<f64> {
    (0..bandwidth)
        .map(|i| if i % 2 == 0 { 1.0 } else { -1.0 } / (1.0 + i as f64))
        .collect()
}

/// Width-1 model of `depth` layers, every layer using `taps`.
fn chain_model(depth: usize, taps: &[f64], activation: Activation) -> GnnModel {
    let mut model = GnnModel::zeros(
        vec![1; depth + 1],
        taps.len(),
        FilterBasis::Heat,
        activation,
    );
    for chunk in model.coeffs.chunks_mut(taps.len()) {
        chunk.copy_from_slice(taps);
    }
    model
}

/// GNN on sampled ε-graphs against the exact MNN sampled at the same points.
///
/// Metrics per cell: `error = ‖Φ(H, L_N, P_N f) − P_N Φ(H, 𝓛, f)‖_N` with the
/// configured activation, and `filter_error`, the same quantity with the
/// identity activation. The primary metric is `error`, or `filter_error`
/// when `config.filter_only` is set.
pub fn run_output_convergence(
    config: &SweepConfig,
    depth: usize,
) -> Result<ConvergenceReport, ExperimentError> {
    config.validate()?;
    if depth == 0 {
        return Err(ExperimentError::Config("depth must be at least 1".into()));
    }
    if config.taps.is_empty() {
        return Err(ExperimentError::Config(
            "filter needs at least one tap".into(),
        ));
    }
    let manifold = make_manifold(config.manifold, config.bandwidth)?;
    let d = manifold.dim();
    let h = FilterCoeffs::new(FilterBasis::Heat, config.taps.clone());
    let low_pass = check_low_pass(&h, d, &LowPassGrid::default())?;
    let coeffs = config
        .signal
        .clone()
        .unwrap_or_else(|| default_signal(config.bandwidth));
    let signal = SpectralSignal::new(&manifold, coeffs)?;
    let model = chain_model(depth, &config.taps, config.activation);
    let linear = chain_model(depth, &config.taps, Activation::Identity);
    let c = config.epsilon_c();

    let (records, warnings) = run_grid(config, |n, _s, seed| {
        let points = sample_points(&manifold, n, seed)?;
        let eps = epsilon_schedule(n, d, c)?;
        let graph = build_epsilon_graph_with(&points, d, eps, config.kernel)?;
        let shift = OwnedShift::build(graph.laplacian(), FilterBasis::Heat, config.backend)?;
        let x = NodeFeatures::from_columns(&[evaluate_signal(&signal, &points)?]);
        let mut values = Vec::with_capacity(2);
        for (name, m) in [("error", &model), ("filter_error", &linear)] {
            let y = gnn_forward(m, &shift, &x)?;
            let exact = mnn_forward(m, std::slice::from_ref(&signal), &points, config.quadrature)?;
            let diff: Vec<f64> = (0..n).map(|i| y[(i, 0)] - exact.values[0][i]).collect();
            values.push((name.to_string(), discrete_norm(&diff)));
        }
        Ok(CellOutput {
            values,
            warnings: graph.warnings().iter().map(|w| w.to_string()).collect(),
        })
    })?;

    let mut extras = BTreeMap::new();
    extras.insert("depth".to_string(), depth as f64);
    extras.insert("low_pass_sup".to_string(), low_pass.sup);
    let metric = if config.filter_only {
        "filter_error"
    } else {
        "error"
    };
    Ok(ConvergenceReport::assemble(
        "output", metric, config, records, warnings, extras,
    ))
}

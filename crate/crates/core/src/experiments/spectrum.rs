use super::{run_grid, CellOutput, ConvergenceReport, ExperimentError, SweepConfig};
use crate::graph::{build_epsilon_graph_with, eigendecompose, epsilon_schedule};
use crate::manifold::{make_manifold, sample_points, Manifold};
use faer::Mat;
use std::collections::BTreeMap;

/// Rejects eigenpair counts that end inside an eigenspace.
fn check_resolved(manifold_k: &Manifold, k: usize) -> Result<(), ExperimentError> {
    let next = make_manifold(manifold_k.kind(), k + 1)?;
    let modes = next.modes();
    if modes[k].degree() != modes[k - 1].degree() {
        return Ok(());
    }
    // An eigenspace of degree l has at most 2l + 1 members.
    let degree = modes[k - 1].degree() as usize;
    let wide = make_manifold(manifold_k.kind(), k + 2 * degree + 1)?;
    let groups = wide.eigenspaces();
    let split = groups
        .iter()
        .find(|g| g.contains(&(k - 1)))
        .expect("index inside range");
    let (lower, upper) = (split.start, split.end);
    Err(ExperimentError::SplitEigenspace { k, lower, upper })
}

/// sin of the largest principal angle between the column spans of `a` and `b`
/// (both N × g, `a` with orthonormal columns).
fn subspace_distance(a: &Mat<f64>, b: &Mat<f64>) -> f64 {
    let q = b.qr().compute_thin_Q();
    let m = a.transpose() * &q;
    let sv = m.singular_values().unwrap_or_default();
    let smallest = sv.iter().copied().fold(f64::INFINITY, f64::min).min(1.0);
    if !smallest.is_finite() {
        return 1.0;
    }
    (1.0 - smallest * smallest).max(0.0).sqrt()
}

/// Graph-Laplacian eigenvalues and eigenvectors against the analytic spectrum.
///
/// Metrics per cell:
/// * `rel_err_i` (`i ≥ 1`): `|κλ_i − λ_{i,N}| / κλ_i`, κ the kernel's limit factor;
/// * `null_eigenvalue`: `λ_{0,N}`;
/// * `subspace_g`: sin of the largest principal angle between the discrete
///   eigenvectors of eigenspace `g` and the sampled analytic eigenfunctions;
/// * `vector_err_g` for one-dimensional eigenspaces: `min_{a=±1} ‖φ_N − a P_N φ‖_N`;
/// * `ratio_g` (`g ≥ 1`): mean discrete eigenvalue of eigenspace `g` over its
///   Laplace–Beltrami eigenvalue (k² or l(l+1)).
///
/// The primary metric is `rel_err_1`, the first nonzero eigenvalue.
pub fn run_spectrum_convergence(
    config: &SweepConfig,
) -> Result<ConvergenceReport, ExperimentError> {
    config.validate()?;
    let k = config.k;
    if k < 2 {
        return Err(ExperimentError::Config("spectrum sweeps need k ≥ 2".into()));
    }
    if k > config.n_list[0] {
        return Err(ExperimentError::TooManyEigenpairs {
            requested: k,
            n: config.n_list[0],
        });
    }
    let manifold = make_manifold(config.manifold, k)?;
    check_resolved(&manifold, k)?;
    let d = manifold.dim();
    let kappa = config.kernel.limit_factor(d);
    let c = config.epsilon_c();
    let groups = manifold.eigenspaces();

    let (records, warnings) = run_grid(config, |n, _s, seed| {
        let points = sample_points(&manifold, n, seed)?;
        let eps = epsilon_schedule(n, d, c)?;
        let graph = build_epsilon_graph_with(&points, d, eps, config.kernel)?;
        let spec = eigendecompose(graph.laplacian(), k)?;
        let lam = spec.eigenvalues();
        let mut values = Vec::new();
        values.push(("null_eigenvalue".to_string(), lam[0]));
        for i in 1..k {
            let exact = kappa * manifold.eigenvalues()[i];
            values.push((format!("rel_err_{i}"), (exact - lam[i]).abs() / exact));
        }
        let basis = manifold.basis_at(&points)?;
        let sqrt_n = (n as f64).sqrt();
        for (g, range) in groups.iter().enumerate() {
            let discrete = Mat::from_fn(n, range.len(), |r, j| {
                spec.eigenvector(range.start + j)[r] / sqrt_n
            });
            let analytic = Mat::from_fn(n, range.len(), |r, j| basis[r * k + range.start + j]);
            values.push((
                format!("subspace_{g}"),
                subspace_distance(&discrete, &analytic),
            ));
            if range.len() == 1 {
                let phi = spec.eigenvector(range.start);
                let err = |sign: f64| {
                    let s: f64 = (0..n)
                        .map(|r| (phi[r] - sign * basis[r * k + range.start]).powi(2))
                        .sum();
                    (s / n as f64).sqrt()
                };
                values.push((format!("vector_err_{g}"), err(1.0).min(err(-1.0))));
            }
        }
        for (g, range) in groups.iter().enumerate().skip(1) {
            let lb = manifold.modes()[range.start].laplace_beltrami();
            let mean = range.clone().map(|i| lam[i]).sum::<f64>() / range.len() as f64;
            values.push((format!("ratio_{g}"), mean / lb));
        }
        Ok(CellOutput {
            values,
            warnings: graph.warnings().iter().map(|w| w.to_string()).collect(),
        })
    })?;

    let mut extras = BTreeMap::new();
    extras.insert("limit_factor".to_string(), kappa);
    extras.insert("c_rho".to_string(), config.manifold.density_scale());
    extras.insert(
        "expected_ratio".to_string(),
        kappa * config.manifold.density_scale(),
    );
    Ok(ConvergenceReport::assemble(
        "spectrum",
        "rel_err_1",
        config,
        records,
        warnings,
        extras,
    ))
}

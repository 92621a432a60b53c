use super::sample::sample_kind;
use super::{ManifoldError, ManifoldKind, PointSample, SpectralSignal};
use crate::nn::GnnModel;
use std::f64::consts::PI;

const SPHERE_QUADRATURE_SEED: u64 = 0x5a11_5eed;

/// Default quadrature size for multilayer MNNs: `max(4096, 32·M)`.
pub fn default_quadrature(bandwidth: usize) -> usize {
    (32 * bandwidth).max(4096)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MnnOutput {
    /// One vector per output feature, sampled at the evaluation points.
    pub values: Vec<Vec<f64>>,
    /// Largest relative quadrature norm of the part of a hidden signal
    /// discarded by re-projection onto the first M eigenfunctions (0 for one layer).
    pub projection_residual: f64,
}

fn quadrature_points(kind: ManifoldKind, q: usize) -> Result<PointSample, ManifoldError> {
    match kind {
        ManifoldKind::Circle => PointSample::from_intrinsic(
            kind,
            (0..q).map(|j| 2.0 * PI * j as f64 / q as f64).collect(),
        ),
        ManifoldKind::Sphere => sample_kind(kind, q, SPHERE_QUADRATURE_SEED),
    }
}

/// Manifold neural network sharing the filter coefficients of `model`,
/// returned sampled at `eval_points`.
///
/// The first layer is exact: spectral filtering, evaluation, then σ. Each
/// deeper layer projects the previous activation back onto the first M
/// eigenfunctions by quadrature with `Q` nodes (uniform grid on the circle,
/// fixed-seed Monte-Carlo on the sphere), `Q ≥ 16·M` required.
pub fn mnn_forward(
    model: &GnnModel,
    inputs: &[SpectralSignal],
    eval_points: &PointSample,
    quadrature: Option<usize>,
) -> Result<MnnOutput, crate::Error> {
    model.validate()?;
    if inputs.len() != model.input_features() {
        return Err(ManifoldError::FeatureCount {
            expected: model.input_features(),
            got: inputs.len(),
        }
        .into());
    }
    let manifold = inputs[0].manifold();
    for signal in inputs {
        if signal.manifold().kind() != manifold.kind() || signal.bandwidth() != manifold.bandwidth()
        {
            return Err(ManifoldError::ManifoldMismatch {
                signal: signal.manifold().kind(),
                points: manifold.kind(),
            }
            .into());
        }
    }
    if eval_points.kind() != manifold.kind() {
        return Err(ManifoldError::ManifoldMismatch {
            signal: manifold.kind(),
            points: eval_points.kind(),
        }
        .into());
    }
    let m = manifold.bandwidth();
    let depth = model.layers();
    let q = quadrature.unwrap_or_else(|| default_quadrature(m));
    let quad_basis = if depth > 1 {
        if q < 16 * m {
            return Err(ManifoldError::QuadratureTooSmall {
                q,
                depth,
                m,
                min: 16 * m,
            }
            .into());
        }
        Some(manifold.basis_at(&quadrature_points(manifold.kind(), q)?)?)
    } else {
        None
    };
    let eigenvalues = manifold.eigenvalues();
    let mut coeffs: Vec<Vec<f64>> = inputs.iter().map(|s| s.coeffs().to_vec()).collect();
    let mut residual: f64 = 0.0;
    for l in 0..depth {
        let f_out = model.dims[l + 1];
        let pre: Vec<Vec<f64>> = (0..f_out)
            .map(|p| {
                let mut out = vec![0.0; m];
                for (qi, c) in coeffs.iter().enumerate() {
                    let h = model.filter(l, p, qi);
                    for i in 0..m {
                        out[i] += h.response(eigenvalues[i]) * c[i];
                    }
                }
                out
            })
            .collect();
        let activate = model.activates(l);
        if l + 1 == depth {
            let basis = manifold.basis_at(eval_points)?;
            let values = pre
                .iter()
                .map(|c| {
                    basis
                        .chunks(m)
                        .map(|row| {
                            let v: f64 = row.iter().zip(c).map(|(a, b)| a * b).sum();
                            if activate {
                                model.activation.apply(v)
                            } else {
                                v
                            }
                        })
                        .collect()
                })
                .collect();
            return Ok(MnnOutput {
                values,
                projection_residual: residual,
            });
        }
        let basis = quad_basis.as_deref().unwrap_or_default();
        coeffs = pre
            .iter()
            .map(|c| {
                let mut proj = vec![0.0; m];
                let mut norm2 = 0.0;
                for row in basis.chunks(m) {
                    let mut v: f64 = row.iter().zip(c).map(|(a, b)| a * b).sum();
                    if activate {
                        v = model.activation.apply(v);
                    }
                    norm2 += v * v;
                    for (pj, phi) in proj.iter_mut().zip(row) {
                        *pj += v * phi;
                    }
                }
                proj.iter_mut().for_each(|v| *v /= q as f64);
                norm2 /= q as f64;
                let kept: f64 = proj.iter().map(|v| v * v).sum();
                if norm2 > 0.0 {
                    residual = residual.max(((norm2 - kept).max(0.0) / norm2).sqrt());
                }
                proj
            })
            .collect();
    }
    unreachable!("validated models have at least one layer")
}

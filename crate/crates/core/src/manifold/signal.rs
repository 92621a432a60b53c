use super::{Manifold, ManifoldError, PointSample};
use crate::filter::FilterCoeffs;

/// A bandlimited manifold signal: coefficients on the first `M` eigenfunctions.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralSignal {
    manifold: Manifold,
    coeffs: Vec<f64>,
}

impl SpectralSignal {
    /// Coefficients beyond `coeffs.len()` are zero. Fewer coefficients than the
    /// manifold bandwidth are zero-padded.
    pub fn new(manifold: &Manifold, mut coeffs: Vec<f64>) -> Result<Self, ManifoldError> {
        if coeffs.len() > manifold.bandwidth() {
            return Err(ManifoldError::BandwidthExceeded {
                coeffs: coeffs.len(),
                available: manifold.bandwidth(),
            });
        }
        coeffs.resize(manifold.bandwidth(), 0.0);
        Ok(SpectralSignal {
            manifold: manifold.clone(),
            coeffs,
        })
    }

    pub fn zero(manifold: &Manifold) -> Self {
        SpectralSignal {
            manifold: manifold.clone(),
            coeffs: vec![0.0; manifold.bandwidth()],
        }
    }

    pub fn manifold(&self) -> &Manifold {
        &self.manifold
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn bandwidth(&self) -> usize {
        self.coeffs.len()
    }

    /// ‖f‖_M by Parseval.
    pub fn norm(&self) -> f64 {
        self.coeffs.iter().map(|c| c * c).sum::<f64>().sqrt()
    }

    /// α·self + β·other (same manifold assumed).
    pub fn combine(&self, alpha: f64, other: &SpectralSignal, beta: f64) -> SpectralSignal {
        let coeffs = self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| alpha * a + beta * b)
            .collect();
        SpectralSignal {
            manifold: self.manifold.clone(),
            coeffs,
        }
    }
}

/// The sampling operator: `v_i = Σ_j f̂_j φ_j(x_i)`.
pub fn evaluate_signal(
    signal: &SpectralSignal,
    points: &PointSample,
) -> Result<Vec<f64>, ManifoldError> {
    let manifold = signal.manifold();
    if points.kind() != manifold.kind() {
        return Err(ManifoldError::ManifoldMismatch {
            signal: manifold.kind(),
            points: points.kind(),
        });
    }
    let mut vals = vec![0.0; manifold.bandwidth()];
    let out = (0..points.len())
        .map(|i| {
            manifold.eval_modes(points.intrinsic(i), &mut vals);
            vals.iter().zip(signal.coeffs()).map(|(p, c)| p * c).sum()
        })
        .collect();
    Ok(out)
}

/// Spectral manifold filter: `ĝ_i = ĥ(λ_i) f̂_i`.
pub fn manifold_filter_apply(h: &FilterCoeffs, signal: &SpectralSignal) -> SpectralSignal {
    let coeffs = signal
        .manifold
        .eigenvalues()
        .iter()
        .zip(&signal.coeffs)
        .map(|(&lambda, &c)| h.response(lambda) * c)
        .collect();
    SpectralSignal {
        manifold: signal.manifold.clone(),
        coeffs,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::filter::FilterBasis;
    use crate::manifold::{make_manifold, ManifoldKind};
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use std::f64::consts::{PI, SQRT_2};

    fn circle(m: usize) -> Manifold {
        make_manifold(ManifoldKind::Circle, m).unwrap()
    }

    #[test]
    fn zero_signal_evaluates_to_zero() {
        let m = circle(5);
        let pts = super::super::sample_points(&m, 10, 2).unwrap();
        let v = evaluate_signal(&SpectralSignal::zero(&m), &pts).unwrap();
        assert!(v.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn constant_mode_is_constant() {
        let m = circle(3);
        let pts = super::super::sample_points(&m, 10, 2).unwrap();
        let v = evaluate_signal(&SpectralSignal::new(&m, vec![1.0]).unwrap(), &pts).unwrap();
        assert!(v.iter().all(|&x| x == 1.0));
    }

    #[test]
    fn cosine_mode_at_zero_angle() {
        let m = circle(3);
        let pts = PointSample::from_intrinsic(ManifoldKind::Circle, vec![0.0]).unwrap();
        let v =
            evaluate_signal(&SpectralSignal::new(&m, vec![0.0, 1.0, 0.0]).unwrap(), &pts).unwrap();
        assert_relative_eq!(v[0], SQRT_2, max_relative = 1e-15);
    }

    #[test]
    fn mismatched_manifold_rejected() {
        let m = circle(3);
        let sphere = make_manifold(ManifoldKind::Sphere, 4).unwrap();
        let pts = super::super::sample_points(&sphere, 3, 0).unwrap();
        assert!(matches!(
            evaluate_signal(&SpectralSignal::zero(&m), &pts),
            Err(ManifoldError::ManifoldMismatch { .. })
        ));
        assert!(SpectralSignal::new(&m, vec![0.0; 4]).is_err());
    }

    #[test]
    fn identity_filter_keeps_coefficients() {
        let m = circle(7);
        let f = SpectralSignal::new(&m, vec![0.3, -1.0, 2.0, 0.5, 0.0, 1.5, -0.25]).unwrap();
        let g = manifold_filter_apply(&FilterCoeffs::new(FilterBasis::Heat, vec![1.0, 0.0]), &f);
        assert_eq!(g.coeffs(), f.coeffs());
    }

    #[test]
    fn heat_tap_halves_at_ln2() {
        let m = circle(3)
            .with_eigenvalues(vec![0.0, 2f64.ln(), 2f64.ln()])
            .unwrap();
        let f = SpectralSignal::new(&m, vec![0.0, 1.0, 0.0]).unwrap();
        let g = manifold_filter_apply(&FilterCoeffs::new(FilterBasis::Heat, vec![0.0, 1.0]), &f);
        assert_relative_eq!(g.coeffs()[1], 0.5, max_relative = 1e-15);
    }

    #[test]
    fn parseval_on_dense_grid() {
        let m = circle(9);
        let f = SpectralSignal::new(&m, vec![0.5, -1.0, 0.25, 2.0, 0.0, -0.75, 1.25, 0.1, -0.3])
            .unwrap();
        let q = 4096;
        let grid = PointSample::from_intrinsic(
            ManifoldKind::Circle,
            (0..q).map(|j| 2.0 * PI * j as f64 / q as f64).collect(),
        )
        .unwrap();
        let v = evaluate_signal(&f, &grid).unwrap();
        let quad_norm = (v.iter().map(|x| x * x).sum::<f64>() / q as f64).sqrt();
        assert!((quad_norm - f.norm()).abs() <= 1e-6);
    }

    proptest! {
        #[test]
        fn filter_matches_scalar_loop(
            taps in prop::collection::vec(-2.0f64..2.0, 1..6),
            coeffs in prop::collection::vec(-3.0f64..3.0, 11),
        ) {
            let m = circle(11);
            let f = SpectralSignal::new(&m, coeffs.clone()).unwrap();
            let g = manifold_filter_apply(&FilterCoeffs::new(FilterBasis::Heat, taps.clone()), &f);
            for (i, &lambda) in m.eigenvalues().iter().enumerate() {
                let mut resp = 0.0;
                for (k, h) in taps.iter().enumerate() {
                    resp += h * (-(k as f64) * lambda).exp();
                }
                prop_assert!((g.coeffs()[i] - resp * coeffs[i]).abs() <= 1e-12 * (1.0 + (resp * coeffs[i]).abs()));
            }
        }

        #[test]
        fn filter_is_linear(
            taps in prop::collection::vec(-2.0f64..2.0, 1..6),
            a in prop::collection::vec(-3.0f64..3.0, 9),
            b in prop::collection::vec(-3.0f64..3.0, 9),
            alpha in -2.0f64..2.0,
            beta in -2.0f64..2.0,
        ) {
            let m = circle(9);
            let h = FilterCoeffs::new(FilterBasis::Heat, taps);
            let f = SpectralSignal::new(&m, a).unwrap();
            let g = SpectralSignal::new(&m, b).unwrap();
            let lhs = manifold_filter_apply(&h, &f.combine(alpha, &g, beta));
            let rhs = manifold_filter_apply(&h, &f).combine(alpha, &manifold_filter_apply(&h, &g), beta);
            for (x, y) in lhs.coeffs().iter().zip(rhs.coeffs()) {
                prop_assert!((x - y).abs() <= 1e-12 * (1.0 + x.abs()));
            }
        }
    }
}

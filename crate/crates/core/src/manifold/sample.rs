use super::{Manifold, ManifoldError, ManifoldKind};
use crate::seed;
use rand::Rng;
use std::f64::consts::PI;

/// Points on the unit circle or sphere with both ambient and intrinsic coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct PointSample {
    kind: ManifoldKind,
    /// Row-major N × (d+1) ambient coordinates.
    coords: Vec<f64>,
    /// Row-major N × d angles: θ on the circle, (polar, azimuth) on the sphere.
    intrinsic: Vec<f64>,
    seed: u64,
}

/// Draws `n` points i.i.d. from the uniform measure.
pub fn sample_points(
    manifold: &Manifold,
    n: usize,
    seed: u64,
) -> Result<PointSample, ManifoldError> {
    sample_kind(manifold.kind(), n, seed)
}

pub(crate) fn sample_kind(
    kind: ManifoldKind,
    n: usize,
    seed: u64,
) -> Result<PointSample, ManifoldError> {
    if n == 0 {
        return Err(ManifoldError::EmptySample);
    }
    let mut rng = seed::rng(seed);
    let mut intrinsic = Vec::with_capacity(n * kind.dim());
    for _ in 0..n {
        match kind {
            ManifoldKind::Circle => intrinsic.push(2.0 * PI * rng.random::<f64>()),
            ManifoldKind::Sphere => {
                // Uniform on the sphere: z = cos(polar) uniform on [-1, 1].
                let z: f64 = 2.0 * rng.random::<f64>() - 1.0;
                let azimuth = 2.0 * PI * rng.random::<f64>();
                intrinsic.push(z.clamp(-1.0, 1.0).acos());
                intrinsic.push(azimuth);
            }
        }
    }
    let mut sample = PointSample::from_intrinsic(kind, intrinsic)?;
    sample.seed = seed;
    Ok(sample)
}

impl PointSample {
    /// Builds a sample from explicit angles (θ per point on the circle,
    /// (polar, azimuth) pairs on the sphere). The seed is recorded as 0.
    pub fn from_intrinsic(kind: ManifoldKind, intrinsic: Vec<f64>) -> Result<Self, ManifoldError> {
        let d = kind.dim();
        if intrinsic.is_empty() || !intrinsic.len().is_multiple_of(d) {
            return Err(ManifoldError::EmptySample);
        }
        let n = intrinsic.len() / d;
        let mut coords = Vec::with_capacity(n * kind.ambient_dim());
        for angles in intrinsic.chunks(d) {
            match kind {
                ManifoldKind::Circle => {
                    let (s, c) = angles[0].sin_cos();
                    coords.extend_from_slice(&[c, s]);
                }
                ManifoldKind::Sphere => {
                    let (sp, cp) = angles[0].sin_cos();
                    let (sa, ca) = angles[1].sin_cos();
                    coords.extend_from_slice(&[sp * ca, sp * sa, cp]);
                }
            }
        }
        Ok(PointSample {
            kind,
            coords,
            intrinsic,
            seed: 0,
        })
    }

    pub fn kind(&self) -> ManifoldKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.intrinsic.len() / self.kind.dim()
    }

    pub fn is_empty(&self) -> bool {
        self.intrinsic.is_empty()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn ambient_dim(&self) -> usize {
        self.kind.ambient_dim()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        let a = self.kind.ambient_dim();
        &self.coords[i * a..(i + 1) * a]
    }

    pub fn intrinsic(&self, i: usize) -> &[f64] {
        let d = self.kind.dim();
        &self.intrinsic[i * d..(i + 1) * d]
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    /// Same points in a new order: point `i` of the result is point `perm[i]` of `self`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let (a, d) = (self.kind.ambient_dim(), self.kind.dim());
        let mut coords = Vec::with_capacity(self.coords.len());
        let mut intrinsic = Vec::with_capacity(self.intrinsic.len());
        for &p in perm {
            coords.extend_from_slice(&self.coords[p * a..(p + 1) * a]);
            intrinsic.extend_from_slice(&self.intrinsic[p * d..(p + 1) * d]);
        }
        PointSample {
            kind: self.kind,
            coords,
            intrinsic,
            seed: self.seed,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifold::make_manifold;

    #[test]
    fn same_seed_same_points() {
        let m = make_manifold(ManifoldKind::Circle, 3).unwrap();
        let a = sample_points(&m, 4, 7).unwrap();
        let b = sample_points(&m, 4, 7).unwrap();
        assert_eq!(a.coords(), b.coords());
        assert_ne!(a.coords(), sample_points(&m, 4, 8).unwrap().coords());
    }

    #[test]
    fn sphere_points_have_unit_norm() {
        let m = make_manifold(ManifoldKind::Sphere, 4).unwrap();
        let s = sample_points(&m, 100, 0).unwrap();
        for i in 0..s.len() {
            let norm = s.point(i).iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!((norm - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn circle_x_mean_within_clt_bound() {
        let m = make_manifold(ManifoldKind::Circle, 3).unwrap();
        let n = 100_000;
        let s = sample_points(&m, n, 1).unwrap();
        let mean = (0..n).map(|i| s.point(i)[0]).sum::<f64>() / n as f64;
        assert!(mean.abs() <= 3.0 * std::f64::consts::FRAC_1_SQRT_2 / (n as f64).sqrt());
    }

    #[test]
    fn sphere_z_is_uniform_on_average() {
        let m = make_manifold(ManifoldKind::Sphere, 4).unwrap();
        let n = 50_000;
        let s = sample_points(&m, n, 3).unwrap();
        // E[z²] = 1/3 under the uniform measure, Var(z²) = 1/5 − 1/9.
        let mean_z2 = (0..n).map(|i| s.point(i)[2].powi(2)).sum::<f64>() / n as f64;
        let se = ((1.0 / 5.0 - 1.0 / 9.0) / n as f64).sqrt();
        assert!((mean_z2 - 1.0 / 3.0).abs() < 4.0 * se);
    }

    #[test]
    fn rejects_empty() {
        let m = make_manifold(ManifoldKind::Circle, 3).unwrap();
        assert_eq!(sample_points(&m, 0, 1), Err(ManifoldError::EmptySample));
    }
}

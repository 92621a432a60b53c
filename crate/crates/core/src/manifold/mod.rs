//! Analytic manifolds with closed-form weighted-Laplacian spectra.
//!
//! With a uniform density ρ = 1/vol the weighted Laplacian
//! `L_ρ f = -(1/(2ρ)) div(ρ² ∇f)` reduces to `(ρ/2) Δ`, so its eigenpairs are
//! the Laplace–Beltrami eigenpairs with eigenvalues rescaled by
//! `c_ρ = ρ/2`. Eigenfunctions are orthonormal under the probability measure
//! μ (not under arc length / surface area).

mod harmonics;
mod mnn;
mod sample;
mod signal;

use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, SQRT_2};
use std::fmt;
use thiserror::Error;

pub use harmonics::{normalized_legendre, MAX_SPHERE_DEGREE};
pub use mnn::{default_quadrature, mnn_forward, MnnOutput};
pub use sample::{sample_points, PointSample};
pub use signal::{evaluate_signal, manifold_filter_apply, SpectralSignal};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ManifoldError {
    #[error("bandwidth must be at least 1")]
    EmptyBandwidth,
    #[error("sphere bandwidth {requested} exceeds the implemented harmonic table ({max} eigenpairs, degree ≤ {degree})")]
    HarmonicTableExceeded {
        requested: usize,
        max: usize,
        degree: usize,
    },
    #[error("sample size must be at least 1")]
    EmptySample,
    #[error("signal lives on a {signal} but the points were sampled from a {points}")]
    ManifoldMismatch {
        signal: ManifoldKind,
        points: ManifoldKind,
    },
    #[error(
        "signal has {coeffs} coefficients but the manifold only carries {available} eigenpairs"
    )]
    BandwidthExceeded { coeffs: usize, available: usize },
    #[error("eigenvalue override has {got} entries, manifold has {expected}")]
    OverrideLength { got: usize, expected: usize },
    #[error("quadrature of {q} points is too small for depth {depth} at bandwidth {m}: need at least {min}")]
    QuadratureTooSmall {
        q: usize,
        depth: usize,
        m: usize,
        min: usize,
    },
    #[error("model expects {expected} input features, got {got} signals")]
    FeatureCount { expected: usize, got: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ManifoldKind {
    Circle,
    Sphere,
}

impl ManifoldKind {
    /// Intrinsic dimension d.
    pub fn dim(self) -> usize {
        match self {
            ManifoldKind::Circle => 1,
            ManifoldKind::Sphere => 2,
        }
    }

    pub fn ambient_dim(self) -> usize {
        self.dim() + 1
    }

    /// Arc length / surface area of the unit embedding.
    pub fn volume(self) -> f64 {
        match self {
            ManifoldKind::Circle => 2.0 * PI,
            ManifoldKind::Sphere => 4.0 * PI,
        }
    }

    /// Uniform density ρ = 1/vol.
    pub fn density(self) -> f64 {
        1.0 / self.volume()
    }

    /// c_ρ = ρ/2: factor between Laplace–Beltrami and weighted-Laplacian eigenvalues.
    pub fn density_scale(self) -> f64 {
        self.density() / 2.0
    }
}

impl fmt::Display for ManifoldKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ManifoldKind::Circle => f.write_str("circle"),
            ManifoldKind::Sphere => f.write_str("sphere"),
        }
    }
}

impl std::str::FromStr for ManifoldKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "circle" => Ok(ManifoldKind::Circle),
            "sphere" => Ok(ManifoldKind::Sphere),
            other => Err(format!(
                "unsupported manifold kind `{other}` (expected circle or sphere)"
            )),
        }
    }
}

/// An analytic eigenfunction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Constant,
    /// √2 cos kθ on the circle.
    Cos(u32),
    /// √2 sin kθ on the circle.
    Sin(u32),
    /// Real spherical harmonic of degree l; m > 0 is the cosine branch, m < 0 the sine branch.
    Harmonic {
        l: u32,
        m: i32,
    },
}

impl Mode {
    /// Laplace–Beltrami eigenvalue (before the c_ρ rescaling).
    pub fn laplace_beltrami(self) -> f64 {
        match self {
            Mode::Constant => 0.0,
            Mode::Cos(k) | Mode::Sin(k) => f64::from(k * k),
            Mode::Harmonic { l, .. } => f64::from(l * (l + 1)),
        }
    }

    /// Index of the eigenspace this mode belongs to (k on the circle, l on the sphere).
    pub fn degree(self) -> u32 {
        match self {
            Mode::Constant => 0,
            Mode::Cos(k) | Mode::Sin(k) => k,
            Mode::Harmonic { l, .. } => l,
        }
    }
}

/// Analytic manifold with its first `M` eigenpairs.
#[derive(Debug, Clone, PartialEq)]
pub struct Manifold {
    kind: ManifoldKind,
    modes: Vec<Mode>,
    eigenvalues: Vec<f64>,
}

/// Builds the manifold with its first `bandwidth` eigenpairs populated.
pub fn make_manifold(kind: ManifoldKind, bandwidth: usize) -> Result<Manifold, ManifoldError> {
    if bandwidth == 0 {
        return Err(ManifoldError::EmptyBandwidth);
    }
    let modes = match kind {
        ManifoldKind::Circle => {
            let mut modes = Vec::with_capacity(bandwidth);
            modes.push(Mode::Constant);
            let mut k = 1;
            while modes.len() < bandwidth {
                modes.push(Mode::Cos(k));
                if modes.len() < bandwidth {
                    modes.push(Mode::Sin(k));
                }
                k += 1;
            }
            modes
        }
        ManifoldKind::Sphere => {
            let max = (MAX_SPHERE_DEGREE + 1) * (MAX_SPHERE_DEGREE + 1);
            if bandwidth > max {
                return Err(ManifoldError::HarmonicTableExceeded {
                    requested: bandwidth,
                    max,
                    degree: MAX_SPHERE_DEGREE,
                });
            }
            let mut modes = Vec::with_capacity(bandwidth);
            'outer: for l in 0..=MAX_SPHERE_DEGREE as u32 {
                let l_i = l as i32;
                let order = std::iter::once(0).chain((1..=l_i).flat_map(|m| [m, -m]));
                for m in order {
                    if modes.len() == bandwidth {
                        break 'outer;
                    }
                    modes.push(if l == 0 {
                        Mode::Constant
                    } else {
                        Mode::Harmonic { l, m }
                    });
                }
            }
            modes
        }
    };
    let scale = kind.density_scale();
    let eigenvalues = modes.iter().map(|m| scale * m.laplace_beltrami()).collect();
    Ok(Manifold {
        kind,
        modes,
        eigenvalues,
    })
}

impl Manifold {
    pub fn kind(&self) -> ManifoldKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.kind.dim()
    }

    /// Number of populated eigenpairs.
    pub fn bandwidth(&self) -> usize {
        self.modes.len()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn modes(&self) -> &[Mode] {
        &self.modes
    }

    /// Replaces the eigenvalues (the eigenfunctions are kept). Only meant for
    /// exercising filters at chosen frequencies.
    pub fn with_eigenvalues(mut self, eigenvalues: Vec<f64>) -> Result<Self, ManifoldError> {
        if eigenvalues.len() != self.modes.len() {
            return Err(ManifoldError::OverrideLength {
                got: eigenvalues.len(),
                expected: self.modes.len(),
            });
        }
        self.eigenvalues = eigenvalues;
        Ok(self)
    }

    /// Groups of indices sharing one eigenvalue, in ascending order.
    pub fn eigenspaces(&self) -> Vec<std::ops::Range<usize>> {
        let mut groups = Vec::new();
        let mut start = 0;
        for i in 1..=self.modes.len() {
            if i == self.modes.len() || self.modes[i].degree() != self.modes[start].degree() {
                groups.push(start..i);
                start = i;
            }
        }
        groups
    }

    /// Evaluates every populated eigenfunction at one point given by its
    /// intrinsic coordinates (θ on the circle, (polar, azimuth) on the sphere).
    pub fn eval_modes(&self, intrinsic: &[f64], out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.modes.len());
        match self.kind {
            ManifoldKind::Circle => {
                let theta = intrinsic[0];
                for (o, mode) in out.iter_mut().zip(&self.modes) {
                    *o = match *mode {
                        Mode::Constant => 1.0,
                        Mode::Cos(k) => SQRT_2 * (f64::from(k) * theta).cos(),
                        Mode::Sin(k) => SQRT_2 * (f64::from(k) * theta).sin(),
                        Mode::Harmonic { .. } => unreachable!("harmonic mode on a circle"),
                    };
                }
            }
            ManifoldKind::Sphere => {
                let (polar, azimuth) = (intrinsic[0], intrinsic[1]);
                let max_l = self.modes.last().map_or(0, |m| m.degree()) as usize;
                let table = normalized_legendre(max_l, polar.cos(), polar.sin());
                for (o, mode) in out.iter_mut().zip(&self.modes) {
                    *o = match *mode {
                        Mode::Constant => 1.0,
                        Mode::Harmonic { l, m } => {
                            let p = table.get(l as usize, m.unsigned_abs() as usize);
                            match m.cmp(&0) {
                                std::cmp::Ordering::Equal => p,
                                std::cmp::Ordering::Greater => {
                                    SQRT_2 * p * (f64::from(m) * azimuth).cos()
                                }
                                std::cmp::Ordering::Less => {
                                    SQRT_2 * p * (f64::from(-m) * azimuth).sin()
                                }
                            }
                        }
                        Mode::Cos(_) | Mode::Sin(_) => unreachable!("circle mode on a sphere"),
                    };
                }
            }
        }
    }

    /// Row-major N × M matrix of eigenfunction values at the sample points.
    pub fn basis_at(&self, points: &PointSample) -> Result<Vec<f64>, ManifoldError> {
        if points.kind() != self.kind {
            return Err(ManifoldError::ManifoldMismatch {
                signal: self.kind,
                points: points.kind(),
            });
        }
        let m = self.bandwidth();
        let mut out = vec![0.0; points.len() * m];
        for (i, row) in out.chunks_mut(m).enumerate() {
            self.eval_modes(points.intrinsic(i), row);
        }
        Ok(out)
    }
}

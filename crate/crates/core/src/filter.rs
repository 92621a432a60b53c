//! Filter taps, frequency responses and spectral graph filtering.

use crate::graph::{discrete_inner_product, SpectralDecomposition};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FilterError {
    #[error("low-pass check needs a heat-basis filter")]
    NotHeat,
    #[error("heat filter is not low-pass: h_0 = {h0} (must be 0)")]
    NonzeroDc { h0: f64 },
    #[error("|ĥ(a)|·a^d = {value} at a = {a} violates the low-pass envelope ({reason})")]
    LowPassViolation {
        a: f64,
        value: f64,
        reason: &'static str,
    },
    #[error("signal has length {got}, decomposition has {expected} nodes")]
    Length { got: usize, expected: usize },
    #[error("a filter needs at least one tap")]
    NoTaps,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FilterBasis {
    /// ĥ(λ) = Σ h_k e^{−kλ}
    Heat,
    /// h(λ) = Σ h_k λ^k
    Polynomial,
}

impl FilterBasis {
    /// Spectral multiplier of one shift: e^{−λ} or λ.
    pub fn shift_response(self, lambda: f64) -> f64 {
        match self {
            FilterBasis::Heat => (-lambda).exp(),
            FilterBasis::Polynomial => lambda,
        }
    }
}

impl std::str::FromStr for FilterBasis {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "heat" => Ok(FilterBasis::Heat),
            "polynomial" | "poly" => Ok(FilterBasis::Polynomial),
            other => Err(format!(
                "unknown filter basis `{other}` (expected heat or polynomial)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterCoeffs {
    pub basis: FilterBasis,
    pub taps: Vec<f64>,
}

impl FilterCoeffs {
    pub fn new(basis: FilterBasis, taps: Vec<f64>) -> Self {
        FilterCoeffs { basis, taps }
    }

    /// Heat filter with the low-pass constraint h_0 = 0 checked.
    pub fn low_pass(taps: Vec<f64>) -> Result<Self, FilterError> {
        match taps.first() {
            None => Err(FilterError::NoTaps),
            Some(&h0) if h0 != 0.0 => Err(FilterError::NonzeroDc { h0 }),
            Some(_) => Ok(FilterCoeffs::new(FilterBasis::Heat, taps)),
        }
    }

    /// Frequency response at λ, by Horner's rule in the shift response.
    pub fn response(&self, lambda: f64) -> f64 {
        let t = self.basis.shift_response(lambda);
        self.taps.iter().rev().fold(0.0, |acc, h| acc * t + h)
    }
}

pub fn frequency_response(h: &FilterCoeffs, lambda: f64) -> f64 {
    h.response(lambda)
}

/// Evaluation grid for the low-pass check: `points` log-spaced values on `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LowPassGrid {
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
}

impl Default for LowPassGrid {
    fn default() -> Self {
        LowPassGrid {
            lo: 1.0,
            hi: 100.0,
            points: 2000,
        }
    }
}

impl LowPassGrid {
    pub fn values(&self) -> Vec<f64> {
        let n = self.points.max(2);
        let (l0, l1) = (self.lo.ln(), self.hi.ln());
        (0..n)
            .map(|i| (l0 + (l1 - l0) * i as f64 / (n - 1) as f64).exp())
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LowPassReport {
    /// sup over the grid of |ĥ(a)|·a^d.
    pub sup: f64,
    pub argsup: f64,
    /// First grid value from which the envelope is required to be nonincreasing.
    pub tail_start: f64,
}

/// Checks the envelope |ĥ(a)| = O(a^{−d}) on a finite grid: the scaled
/// response must be finite, nonincreasing on the tail (see [`tail_start`]),
/// and the filter must carry no DC tap.
pub fn check_low_pass(
    h: &FilterCoeffs,
    d: usize,
    grid: &LowPassGrid,
) -> Result<LowPassReport, FilterError> {
    if h.basis != FilterBasis::Heat {
        return Err(FilterError::NotHeat);
    }
    match h.taps.first() {
        None => return Err(FilterError::NoTaps),
        Some(&h0) if h0 != 0.0 => {
            let a = grid.hi;
            return Err(FilterError::LowPassViolation {
                a,
                value: h.response(a).abs() * a.powi(d as i32),
                reason: "response does not vanish at high frequency",
            });
        }
        _ => {}
    }
    let tail_start = tail_start(&h.taps, d);
    let mut sup = 0.0;
    let mut argsup = grid.lo;
    let mut prev: Option<f64> = None;
    for a in grid.values() {
        let value = h.response(a).abs() * a.powi(d as i32);
        if !value.is_finite() {
            return Err(FilterError::LowPassViolation {
                a,
                value,
                reason: "not finite",
            });
        }
        if value > sup {
            sup = value;
            argsup = a;
        }
        if a >= tail_start {
            if let Some(p) = prev {
                if value > p * (1.0 + 1e-12) + f64::MIN_POSITIVE {
                    return Err(FilterError::LowPassViolation {
                        a,
                        value,
                        reason: "increasing on the tail",
                    });
                }
            }
            prev = Some(value);
        }
    }
    Ok(LowPassReport {
        sup,
        argsup,
        tail_start,
    })
}

/// Point beyond which the envelope must be nonincreasing: at least
/// max(K, 2d), and far enough out that the lowest nonzero tap h_j dominates,
/// i.e. every higher tap satisfies |h_k|(k−j) e^{−(k−j)a} ≤ |h_j| / (4·#taps).
/// Past that point the log-derivative of |ĥ(a)| a^d is at most −j + d/a + j/3 < 0.
fn tail_start(taps: &[f64], d: usize) -> f64 {
    let base = taps.len().max(2 * d) as f64;
    let Some(j) = taps.iter().position(|&h| h != 0.0) else {
        return base;
    };
    let hj = taps[j].abs();
    let n = taps.len() as f64;
    taps.iter()
        .enumerate()
        .skip(j + 1)
        .filter(|(_, h)| **h != 0.0)
        .map(|(k, h)| {
            let gap = (k - j) as f64;
            (4.0 * n * h.abs() * gap / hj).ln() / gap
        })
        .fold(base, f64::max)
}

/// `Σ_i ĥ(λ_i) ⟨x, φ_i⟩_N φ_i` over the eigenpairs held by `decomposition`.
pub fn graph_filter_apply(
    h: &FilterCoeffs,
    decomposition: &SpectralDecomposition,
    x: &[f64],
) -> Result<Vec<f64>, FilterError> {
    let n = decomposition.n();
    if x.len() != n {
        return Err(FilterError::Length {
            got: x.len(),
            expected: n,
        });
    }
    let mut out = vec![0.0; n];
    for i in 0..decomposition.count() {
        let phi = decomposition.eigenvector(i);
        let weight = h.response(decomposition.eigenvalues()[i])
            * discrete_inner_product(x, phi).unwrap_or(0.0);
        for (o, p) in out.iter_mut().zip(phi) {
            *o += weight * p;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn responses() {
        let heat = FilterCoeffs::new(FilterBasis::Heat, vec![0.0, 1.0]);
        assert_relative_eq!(heat.response(2f64.ln()), 0.5, max_relative = 1e-15);
        let h = FilterCoeffs::new(FilterBasis::Heat, vec![0.3, -1.2, 2.5, 0.7]);
        assert_relative_eq!(h.response(0.0), 0.3 - 1.2 + 2.5 + 0.7, max_relative = 1e-15);
        let poly = FilterCoeffs::new(FilterBasis::Polynomial, vec![1.0, 2.0]);
        assert_eq!(frequency_response(&poly, 3.0), 7.0);
    }

    #[test]
    fn low_pass_single_tap() {
        let h = FilterCoeffs::low_pass(vec![0.0, 1.0]).unwrap();
        let report = check_low_pass(&h, 1, &LowPassGrid::default()).unwrap();
        assert_relative_eq!(report.sup, (-1.0f64).exp(), max_relative = 1e-12);
        assert_eq!(report.argsup, 1.0);
    }

    #[test]
    fn identity_is_not_low_pass() {
        let h = FilterCoeffs::new(FilterBasis::Heat, vec![1.0, 0.0]);
        assert!(matches!(
            check_low_pass(&h, 1, &LowPassGrid::default()),
            Err(FilterError::LowPassViolation { .. })
        ));
        assert!(FilterCoeffs::low_pass(vec![1.0, 0.0]).is_err());
        let poly = FilterCoeffs::new(FilterBasis::Polynomial, vec![0.0, 1.0]);
        assert_eq!(
            check_low_pass(&poly, 1, &LowPassGrid::default()),
            Err(FilterError::NotHeat)
        );
    }

    proptest! {
        #[test]
        fn random_dc_free_filters_pass(
            rest in prop::collection::vec(-3.0f64..3.0, 1..6),
            d in 1usize..3,
        ) {
            let mut taps = vec![0.0];
            taps.extend(rest);
            let h = FilterCoeffs::low_pass(taps.clone()).unwrap();
            let grid = LowPassGrid::default();
            let report = check_low_pass(&h, d, &grid);
            prop_assert!(report.is_ok(), "{:?}", report);
            // Tail values evaluated independently.
            let start = report.unwrap().tail_start;
            prop_assert!(start >= taps.len() as f64);
            let tail: Vec<f64> = grid
                .values()
                .into_iter()
                .filter(|&a| a >= start)
                .map(|a| {
                    let r: f64 = taps.iter().enumerate().map(|(k, h)| h * (-(k as f64) * a).exp()).sum();
                    r.abs() * a.powi(d as i32)
                })
                .collect();
            for w in tail.windows(2) {
                prop_assert!(w[1] <= w[0] * (1.0 + 1e-12) + f64::MIN_POSITIVE);
            }
        }
    }
}

//! Associated Legendre functions normalized for real spherical harmonics
//! orthonormal under the uniform probability measure on the unit sphere.

/// Highest harmonic degree the sphere tables support.
pub const MAX_SPHERE_DEGREE: usize = 40;

/// Triangular table of `Q_l^m(x) = √((2l+1)(l−m)!/(l+m)!) P_l^m(x)` for
/// `0 ≤ m ≤ l ≤ max_l` (no Condon–Shortley phase).
#[derive(Debug, Clone)]
pub struct LegendreTable {
    values: Vec<f64>,
}

impl LegendreTable {
    pub fn get(&self, l: usize, m: usize) -> f64 {
        debug_assert!(m <= l);
        self.values[l * (l + 1) / 2 + m]
    }
}

/// Evaluates the normalized table at `x = cos ϑ`, `s = sin ϑ ≥ 0`.
pub fn normalized_legendre(max_l: usize, x: f64, s: f64) -> LegendreTable {
    let idx = |l: usize, m: usize| l * (l + 1) / 2 + m;
    let mut values = vec![0.0; (max_l + 1) * (max_l + 2) / 2];
    values[0] = 1.0;
    for m in 1..=max_l {
        let mf = m as f64;
        values[idx(m, m)] = ((2.0 * mf + 1.0) / (2.0 * mf)).sqrt() * s * values[idx(m - 1, m - 1)];
    }
    for m in 0..max_l {
        values[idx(m + 1, m)] = (2.0 * m as f64 + 3.0).sqrt() * x * values[idx(m, m)];
    }
    for m in 0..=max_l {
        let mf = m as f64;
        for l in (m + 2)..=max_l {
            let lf = l as f64;
            let a = ((4.0 * lf * lf - 1.0) / (lf * lf - mf * mf)).sqrt();
            let lm1 = lf - 1.0;
            let b = ((lm1 * lm1 - mf * mf) / (4.0 * lm1 * lm1 - 1.0)).sqrt();
            values[idx(l, m)] = a * (x * values[idx(l - 1, m)] - b * values[idx(l - 2, m)]);
        }
    }
    LegendreTable { values }
}

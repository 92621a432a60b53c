use crate::filter::FilterBasis;
use crate::graph::{sparse_matvec, SparseMat, SpectralDecomposition};
use faer::{Mat, MatRef};

/// A family of symmetric operators `A_0, A_1, …` built from one graph shift:
/// `A_k = T^k` with `T = e^{−L}` (heat) or `T = L` (polynomial).
///
/// A filter with taps `h` acts as `Σ_k h_k A_k`. Signals are N × F blocks
/// with one column per feature.
pub trait GraphShift: Sync {
    fn n(&self) -> usize;

    fn basis(&self) -> FilterBasis;

    /// `Σ_k A_k Y_k`.
    fn combine(&self, ys: &[Mat<f64>]) -> Mat<f64>;

    /// `[A_0 X, …, A_{taps−1} X]`.
    fn powers(&self, x: &Mat<f64>, taps: usize) -> Vec<Mat<f64>>;
}

/// Filters through a (possibly truncated) eigendecomposition:
/// `A_k = Σ_i τ(λ_i)^k ⟨·, φ_i⟩_N φ_i`.
#[derive(Debug, Clone, Copy)]
pub struct SpectralShift<'a> {
    spec: &'a SpectralDecomposition,
    basis: FilterBasis,
}

impl<'a> SpectralShift<'a> {
    pub fn new(spec: &'a SpectralDecomposition, basis: FilterBasis) -> Self {
        SpectralShift { spec, basis }
    }

    fn phi(&self) -> MatRef<'a, f64> {
        self.spec.basis_matrix()
    }

    fn shift_responses(&self) -> Vec<f64> {
        self.spec
            .eigenvalues()
            .iter()
            .map(|&l| self.basis.shift_response(l))
            .collect()
    }
}

impl GraphShift for SpectralShift<'_> {
    fn n(&self) -> usize {
        self.spec.n()
    }

    fn basis(&self) -> FilterBasis {
        self.basis
    }

    fn combine(&self, ys: &[Mat<f64>]) -> Mat<f64> {
        let phi = self.phi();
        let tau = self.shift_responses();
        let inv_n = 1.0 / self.n() as f64;
        let f = ys.first().map_or(0, |y| y.ncols());
        let mut acc = Mat::<f64>::zeros(phi.ncols(), f);
        let mut pow = vec![1.0; tau.len()];
        for y in ys {
            let c = phi.transpose() * y;
            for j in 0..f {
                for i in 0..tau.len() {
                    acc[(i, j)] += pow[i] * c[(i, j)] * inv_n;
                }
            }
            pow.iter_mut().zip(&tau).for_each(|(p, t)| *p *= t);
        }
        phi * &acc
    }

    fn powers(&self, x: &Mat<f64>, taps: usize) -> Vec<Mat<f64>> {
        let phi = self.phi();
        let tau = self.shift_responses();
        let inv_n = 1.0 / self.n() as f64;
        let mut c = phi.transpose() * x;
        c = c * faer::Scale(inv_n);
        let mut out = Vec::with_capacity(taps);
        for _ in 0..taps {
            out.push(phi * &c);
            for j in 0..c.ncols() {
                for (i, t) in tau.iter().enumerate() {
                    c[(i, j)] *= t;
                }
            }
        }
        out
    }
}

/// Filters by sparse products with the Laplacian; the heat shift `e^{−L}` is
/// applied as a Chebyshev expansion on `[0, b]`, `b` a Gershgorin bound.
#[derive(Debug, Clone)]
pub struct SparseShift {
    op: SparseMat,
    basis: FilterBasis,
    bound: f64,
    cheb: Vec<f64>,
}

impl SparseShift {
    pub fn new(op: SparseMat, basis: FilterBasis) -> Self {
        let bound = (0..op.nrows())
            .map(|i| op.val_of_row(i).iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max);
        let cheb = match basis {
            FilterBasis::Heat => exp_chebyshev_coeffs(bound / 2.0),
            FilterBasis::Polynomial => Vec::new(),
        };
        SparseShift {
            op,
            basis,
            bound,
            cheb,
        }
    }

    pub fn operator(&self) -> &SparseMat {
        &self.op
    }

    /// Number of sparse products per heat step.
    pub fn chebyshev_degree(&self) -> usize {
        self.cheb.len().saturating_sub(1)
    }

    fn step(&self, x: &[f64], out: &mut [f64]) {
        match self.basis {
            FilterBasis::Polynomial => sparse_matvec(&self.op, x, out),
            FilterBasis::Heat => chebyshev_apply(&self.op, self.bound, &self.cheb, x, out),
        }
    }

    fn step_mat(&self, x: &Mat<f64>) -> Mat<f64> {
        let mut out = Mat::<f64>::zeros(x.nrows(), x.ncols());
        for j in 0..x.ncols() {
            let src = x.col_as_slice(j).to_vec();
            self.step(&src, out.col_as_slice_mut(j));
        }
        out
    }
}

impl GraphShift for SparseShift {
    fn n(&self) -> usize {
        self.op.nrows()
    }

    fn basis(&self) -> FilterBasis {
        self.basis
    }

    fn combine(&self, ys: &[Mat<f64>]) -> Mat<f64> {
        let mut iter = ys.iter().rev();
        let Some(last) = iter.next() else {
            return Mat::zeros(self.n(), 0);
        };
        let mut acc = last.clone();
        for y in iter {
            acc = self.step_mat(&acc);
            acc += y;
        }
        acc
    }

    fn powers(&self, x: &Mat<f64>, taps: usize) -> Vec<Mat<f64>> {
        let mut out: Vec<Mat<f64>> = Vec::with_capacity(taps);
        if taps == 0 {
            return out;
        }
        out.push(x.clone());
        for k in 1..taps {
            let next = self.step_mat(&out[k - 1]);
            out.push(next);
        }
        out
    }
}

/// Coefficients `a_j` with `e^{−λ} = Σ_j a_j T_j(2λ/b − 1)` on `[0, b]`, `z = b/2`:
/// `a_j = (2 − δ_j0) (−1)^j e^{−z} I_j(z)`. The scaled Bessel values come from
/// Miller's backward recurrence normalized by `I_0 + 2 Σ I_j = e^z`.
fn exp_chebyshev_coeffs(z: f64) -> Vec<f64> {
    if z <= 0.0 {
        return vec![1.0];
    }
    let start = (12.0 * z.sqrt() + 60.0).ceil() as usize;
    let mut vals = vec![0.0; start + 2];
    vals[start] = 1e-300;
    for j in (1..=start).rev() {
        vals[j - 1] = vals[j + 1] + (2.0 * j as f64 / z) * vals[j];
        if vals[j - 1] > 1e250 {
            vals.iter_mut().for_each(|v| *v *= 1e-250);
        }
    }
    let norm = vals[0] + 2.0 * vals[1..].iter().sum::<f64>();
    let mut coeffs: Vec<f64> = vals[..=start]
        .iter()
        .enumerate()
        .map(|(j, v)| {
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            let c = if j == 0 { 1.0 } else { 2.0 };
            c * sign * v / norm
        })
        .collect();
    while coeffs.len() > 1 && coeffs.last().is_some_and(|c| c.abs() < 1e-18) {
        coeffs.pop();
    }
    coeffs
}

fn chebyshev_apply(l: &SparseMat, bound: f64, coeffs: &[f64], x: &[f64], out: &mut [f64]) {
    let n = x.len();
    out.iter_mut().zip(x).for_each(|(o, v)| *o = coeffs[0] * v);
    if coeffs.len() == 1 {
        return;
    }
    let s = 2.0 / bound;
    let mut prev = x.to_vec();
    let mut cur = vec![0.0; n];
    sparse_matvec(l, x, &mut cur);
    cur.iter_mut().zip(x).for_each(|(c, v)| *c = s * *c - v);
    out.iter_mut()
        .zip(&cur)
        .for_each(|(o, c)| *o += coeffs[1] * c);
    let mut lx = vec![0.0; n];
    for &a in &coeffs[2..] {
        sparse_matvec(l, &cur, &mut lx);
        for i in 0..n {
            let next = 2.0 * (s * lx[i] - cur[i]) - prev[i];
            prev[i] = cur[i];
            cur[i] = next;
            out[i] += a * next;
        }
    }
}

/// `e^{−L} x` by Chebyshev expansion.
pub fn expm_neg_chebyshev(l: &SparseMat, x: &[f64]) -> Vec<f64> {
    let shift = SparseShift::new(l.clone(), FilterBasis::Heat);
    let mut out = vec![0.0; x.len()];
    shift.step(x, &mut out);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{eigendecompose, Graph};

    fn path_graph(n: usize, w: f64) -> Graph {
        let edges: Vec<_> = (0..n - 1)
            .map(|i| (i, i + 1, w * (1.0 + i as f64 / n as f64)))
            .collect();
        Graph::from_edges(n, &edges).unwrap()
    }

    #[test]
    fn chebyshev_scalar_exp() {
        // 1×1 "Laplacian" is not available; check the series on the interval directly.
        for z in [0.01, 0.5, 3.0, 40.0, 400.0] {
            let c = exp_chebyshev_coeffs(z);
            for lam in [0.0, 0.3 * z, z, 1.7 * z, 2.0 * z] {
                let t: f64 = lam / z - 1.0;
                let (mut t0, mut t1) = (1.0, t);
                let mut s = c[0] + c.get(1).map_or(0.0, |a| a * t1);
                for a in c.iter().skip(2) {
                    let t2 = 2.0 * t * t1 - t0;
                    t0 = t1;
                    t1 = t2;
                    s += a * t2;
                }
                assert!(
                    (s - (-lam).exp()).abs() < 1e-13,
                    "z={z} λ={lam}: {s} vs {}",
                    (-lam).exp()
                );
            }
        }
    }

    #[test]
    fn sparse_heat_matches_spectral() {
        for w in [0.05, 1.0, 12.0] {
            let g = path_graph(30, w);
            let spec = eigendecompose(g.laplacian(), 30).unwrap();
            let x = Mat::from_fn(30, 2, |i, j| ((i * 7 + j * 3) % 11) as f64 - 5.0);
            let a = SpectralShift::new(&spec, FilterBasis::Heat).powers(&x, 4);
            let b = SparseShift::new(g.laplacian().clone(), FilterBasis::Heat).powers(&x, 4);
            for (p, q) in a.iter().zip(&b) {
                assert!((p - q).norm_max() < 1e-11, "w={w}");
            }
        }
    }

    #[test]
    fn combine_is_sum_of_powers() {
        let g = path_graph(12, 0.7);
        let spec = eigendecompose(g.laplacian(), 12).unwrap();
        let ys: Vec<Mat<f64>> = (0..3)
            .map(|k| Mat::from_fn(12, 2, |i, j| ((i + 2 * j + 5 * k) % 7) as f64 - 3.0))
            .collect();
        for basis in [FilterBasis::Heat, FilterBasis::Polynomial] {
            let shifts: [Box<dyn GraphShift>; 2] = [
                Box::new(SpectralShift::new(&spec, basis)),
                Box::new(SparseShift::new(g.laplacian().clone(), basis)),
            ];
            for s in &shifts {
                let combined = s.combine(&ys);
                let mut direct = Mat::<f64>::zeros(12, 2);
                for (k, y) in ys.iter().enumerate() {
                    direct += &s.powers(y, 3)[k];
                }
                assert!((combined - direct).norm_max() < 1e-10);
            }
        }
    }
}

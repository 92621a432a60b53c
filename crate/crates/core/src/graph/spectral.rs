use super::{sparse_matvec, GraphError, MatrixDiagnostics, SparseMat};
use crate::seed;
use faer::dyn_stack::{MemBuffer, MemStack, StackReq};
use faer::matrix_free::eigen::{partial_eigen, partial_eigen_scratch, PartialEigenParams};
use faer::matrix_free::LinOp;
use faer::{Mat, MatMut, MatRef, Par, Side};
use rand::Rng;
use serde::Serialize;

/// Largest N handled by the dense solver under [`EigenSolver::Auto`].
pub const DENSE_LIMIT: usize = 4000;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum EigenSolver {
    #[default]
    Auto,
    Dense,
    /// Krylov–Schur on the shifted operator `bI − L`.
    Iterative,
}

/// The K smallest eigenpairs of a graph operator.
///
/// Eigenvectors are scaled to unit discrete norm (`Σ φ² = N`) and signed so
/// that their first nonzero entry is positive.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectralDecomposition {
    n: usize,
    eigenvalues: Vec<f64>,
    /// K blocks of N entries.
    vectors: Vec<f64>,
    eigengaps: Vec<f64>,
    max_residual: f64,
    solver: EigenSolver,
}

impl SpectralDecomposition {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn count(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn eigenvector(&self, i: usize) -> &[f64] {
        &self.vectors[i * self.n..(i + 1) * self.n]
    }

    /// N × K matrix whose columns are the eigenvectors.
    pub fn basis_matrix(&self) -> MatRef<'_, f64> {
        MatRef::from_column_major_slice(&self.vectors, self.n, self.count())
    }

    /// θ_i: distance from λ_i to the nearest other computed eigenvalue.
    pub fn eigengaps(&self) -> &[f64] {
        &self.eigengaps
    }

    /// Largest `‖L φ − λ φ‖₂` over unit-2-norm eigenvectors.
    pub fn max_residual(&self) -> f64 {
        self.max_residual
    }

    pub fn solver(&self) -> EigenSolver {
        self.solver
    }

    /// Keeps only the first `k` eigenpairs.
    pub fn truncated(&self, k: usize) -> SpectralDecomposition {
        let k = k.min(self.count());
        SpectralDecomposition {
            n: self.n,
            eigenvalues: self.eigenvalues[..k].to_vec(),
            vectors: self.vectors[..k * self.n].to_vec(),
            eigengaps: self.eigengaps[..k].to_vec(),
            max_residual: self.max_residual,
            solver: self.solver,
        }
    }

    /// Coefficients `⟨x, φ_i⟩_N` for every held eigenvector.
    pub fn analysis(&self, x: &[f64]) -> Vec<f64> {
        let inv_n = 1.0 / self.n as f64;
        (0..self.count())
            .map(|i| {
                self.eigenvector(i)
                    .iter()
                    .zip(x)
                    .map(|(p, v)| p * v)
                    .sum::<f64>()
                    * inv_n
            })
            .collect()
    }

    /// `Σ c_i φ_i`.
    pub fn synthesis(&self, coeffs: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        for (i, &c) in coeffs.iter().enumerate() {
            if c != 0.0 {
                for (o, p) in out.iter_mut().zip(self.eigenvector(i)) {
                    *o += c * p;
                }
            }
        }
        out
    }
}

/// K smallest eigenpairs of the symmetric operator `l` (dense solver up to
/// 4000 nodes, iterative above).
pub fn eigendecompose(l: &SparseMat, k: usize) -> Result<SpectralDecomposition, GraphError> {
    eigendecompose_with(l, k, EigenSolver::Auto)
}

pub fn eigendecompose_with(
    l: &SparseMat,
    k: usize,
    solver: EigenSolver,
) -> Result<SpectralDecomposition, GraphError> {
    let n = l.nrows();
    if k > n || l.ncols() != n {
        return Err(GraphError::TooManyEigenpairs { k, n });
    }
    let solver = match solver {
        EigenSolver::Auto if n <= DENSE_LIMIT => EigenSolver::Dense,
        EigenSolver::Auto => EigenSolver::Iterative,
        s => s,
    };
    // One extra eigenvalue, when it exists, sizes the last eigengap.
    let want = (k + 1).min(n);
    let (values, vectors) = match solver {
        EigenSolver::Dense => dense(l, want)?,
        _ => iterative(l, want)?,
    };
    finish(l, values, vectors, k, solver)
}

fn solver_error(l: &SparseMat, message: impl Into<String>) -> GraphError {
    GraphError::Solver {
        message: message.into(),
        diagnostics: MatrixDiagnostics::of(l),
    }
}

fn dense(l: &SparseMat, want: usize) -> Result<(Vec<f64>, Mat<f64>), GraphError> {
    let a = l.to_dense();
    let evd = a
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| solver_error(l, format!("dense symmetric eigensolver: {e:?}")))?;
    let s = evd.S().column_vector();
    let mut order: Vec<usize> = (0..a.nrows()).collect();
    order.sort_by(|&i, &j| s[i].total_cmp(&s[j]));
    let u = evd.U();
    let values = order[..want].iter().map(|&i| s[i]).collect();
    let vectors = Mat::from_fn(a.nrows(), want, |r, c| u[(r, order[c])]);
    Ok((values, vectors))
}

/// `bI − L`: its largest eigenvalues are the smallest of L when b ≥ λ_max(L).
#[derive(Debug)]
struct Shifted<'a> {
    l: &'a SparseMat,
    shift: f64,
}

impl LinOp<f64> for Shifted<'_> {
    fn apply_scratch(&self, _rhs_ncols: usize, _par: Par) -> StackReq {
        StackReq::EMPTY
    }

    fn nrows(&self) -> usize {
        self.l.nrows()
    }

    fn ncols(&self) -> usize {
        self.l.ncols()
    }

    fn apply(
        &self,
        mut out: MatMut<'_, f64>,
        rhs: MatRef<'_, f64>,
        _par: Par,
        _stack: &mut MemStack,
    ) {
        for c in 0..rhs.ncols() {
            for i in 0..self.l.nrows() {
                let lx: f64 = self
                    .l
                    .col_idx_of_row(i)
                    .zip(self.l.val_of_row(i))
                    .map(|(j, v)| v * rhs[(j, c)])
                    .sum();
                out[(i, c)] = self.shift * rhs[(i, c)] - lx;
            }
        }
    }

    fn conj_apply(
        &self,
        out: MatMut<'_, f64>,
        rhs: MatRef<'_, f64>,
        par: Par,
        stack: &mut MemStack,
    ) {
        self.apply(out, rhs, par, stack)
    }
}

fn gershgorin_bound(l: &SparseMat) -> f64 {
    (0..l.nrows())
        .map(|i| l.val_of_row(i).iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

fn iterative(l: &SparseMat, want: usize) -> Result<(Vec<f64>, Mat<f64>), GraphError> {
    let n = l.nrows();
    let op = Shifted {
        l,
        shift: gershgorin_bound(l).max(f64::MIN_POSITIVE),
    };
    let params = PartialEigenParams {
        min_dim: (2 * want).max(32),
        max_dim: (4 * want).max(64),
        max_restarts: 2000,
        ..Default::default()
    };
    let mut rng = seed::rng(0x5eed_e16e);
    let v0 = faer::Col::<f64>::from_fn(n, |_| rng.random::<f64>() - 0.5);
    let mut vecs = Mat::<faer::c64>::zeros(n, want);
    let mut vals = vec![faer::c64::new(0.0, 0.0); want];
    let mut mem = MemBuffer::new(partial_eigen_scratch(&op, want, Par::Seq, params));
    let info = partial_eigen(
        vecs.as_mut(),
        &mut vals,
        &op,
        v0.as_ref(),
        1e-12,
        Par::Seq,
        MemStack::new(&mut mem),
        params,
    );
    if info.n_converged_eigen < want {
        return Err(solver_error(
            l,
            format!(
                "Krylov–Schur converged {} of {} eigenpairs",
                info.n_converged_eigen, want
            ),
        ));
    }
    // Rayleigh–Ritz on the (real part of the) converged subspace restores exact orthonormality.
    let basis = Mat::from_fn(n, want, |r, c| vecs[(r, c)].re);
    let q = basis.qr().compute_thin_Q();
    let mut lq = Mat::<f64>::zeros(n, want);
    let mut col = vec![0.0; n];
    for c in 0..want {
        let qc: Vec<f64> = (0..n).map(|r| q[(r, c)]).collect();
        sparse_matvec(l, &qc, &mut col);
        for r in 0..n {
            lq[(r, c)] = col[r];
        }
    }
    let small = q.transpose() * &lq;
    let small = Mat::from_fn(want, want, |i, j| 0.5 * (small[(i, j)] + small[(j, i)]));
    let evd = small
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| solver_error(l, format!("Rayleigh–Ritz eigensolver: {e:?}")))?;
    let s = evd.S().column_vector();
    let mut order: Vec<usize> = (0..want).collect();
    order.sort_by(|&i, &j| s[i].total_cmp(&s[j]));
    let rotated = &q * evd.U();
    let values = order.iter().map(|&i| s[i]).collect();
    let vectors = Mat::from_fn(n, want, |r, c| rotated[(r, order[c])]);
    Ok((values, vectors))
}

fn finish(
    l: &SparseMat,
    all_values: Vec<f64>,
    all_vectors: Mat<f64>,
    k: usize,
    solver: EigenSolver,
) -> Result<SpectralDecomposition, GraphError> {
    let n = l.nrows();
    let norm_l = gershgorin_bound(l);
    let scale = (n as f64).sqrt();
    let mut vectors = Vec::with_capacity(n * k);
    let mut max_residual: f64 = 0.0;
    let mut lv = vec![0.0; n];
    for c in 0..k {
        let mut v: Vec<f64> = (0..n).map(|r| all_vectors[(r, c)]).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(solver_error(l, format!("eigenvector {c} has norm {norm}")));
        }
        v.iter_mut().for_each(|x| *x /= norm);
        sparse_matvec(l, &v, &mut lv);
        let residual = lv
            .iter()
            .zip(&v)
            .map(|(a, b)| (a - all_values[c] * b).powi(2))
            .sum::<f64>()
            .sqrt();
        max_residual = max_residual.max(residual);
        let sign = v
            .iter()
            .find(|x| x.abs() > 1e-10)
            .map_or(1.0, |x| x.signum());
        vectors.extend(v.iter().map(|x| sign * scale * x));
    }
    if max_residual > 1e-8 * norm_l.max(1.0) {
        return Err(solver_error(
            l,
            format!(
                "eigenpair residual {max_residual:e} exceeds 1e-8·‖L‖ = {:e}",
                1e-8 * norm_l
            ),
        ));
    }
    let eigengaps = (0..k)
        .map(|i| {
            let below = if i > 0 {
                all_values[i] - all_values[i - 1]
            } else {
                f64::INFINITY
            };
            let above = all_values
                .get(i + 1)
                .map_or(f64::INFINITY, |v| v - all_values[i]);
            below.min(above)
        })
        .collect();
    Ok(SpectralDecomposition {
        n,
        eigenvalues: all_values[..k].to_vec(),
        vectors,
        eigengaps,
        max_residual,
        solver,
    })
}

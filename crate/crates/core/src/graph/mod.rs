//! Weighted graphs, ε-graph construction, Laplacians and their spectra.

mod epsilon;
mod export;
mod spectral;

use faer::sparse::{SparseRowMat, Triplet};
use serde::Serialize;
use thiserror::Error;

pub use epsilon::{
    build_epsilon_graph, build_epsilon_graph_with, epsilon_schedule, unit_ball_volume,
    EpsilonGraph, GraphWarning, KernelScale,
};
pub use export::{write_eigenvalues_csv, write_eigenvectors_csv, write_weights_csv};
pub use spectral::{eigendecompose, eigendecompose_with, EigenSolver, SpectralDecomposition};

pub type SparseMat = SparseRowMat<usize, f64>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GraphError {
    #[error("weight matrix is not square ({rows} × {cols})")]
    NotSquare { rows: usize, cols: usize },
    #[error("weight matrix is not symmetric: W[{i},{j}] = {wij} but W[{j},{i}] = {wji}")]
    Asymmetric {
        i: usize,
        j: usize,
        wij: f64,
        wji: f64,
    },
    #[error("negative or non-finite weight {w} at ({i},{j})")]
    BadWeight { i: usize, j: usize, w: f64 },
    #[error("nonzero diagonal weight {w} at node {i}")]
    SelfLoop { i: usize, w: f64 },
    #[error("edge endpoint {index} out of range for {n} nodes")]
    NodeOutOfRange { index: usize, n: usize },
    #[error("epsilon must be positive and finite, got {0}")]
    BadEpsilon(f64),
    #[error("intrinsic dimension must be at least 1")]
    BadDimension,
    #[error("epsilon schedule needs N ≥ 2 and c > 0 (got N = {n}, c = {c})")]
    BadSchedule { n: usize, c: f64 },
    #[error("requested {k} eigenpairs from a {n}-node graph")]
    TooManyEigenpairs { k: usize, n: usize },
    #[error("vectors have lengths {0} and {1}")]
    Length(usize, usize),
    #[error("eigensolver failed: {message}; {diagnostics}")]
    Solver {
        message: String,
        diagnostics: MatrixDiagnostics,
    },
    #[error("sparse matrix assembly failed: {0}")]
    Assembly(String),
    #[error("csv export failed: {0}")]
    Export(String),
}

/// Summary of a matrix attached to solver failures.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MatrixDiagnostics {
    pub n: usize,
    pub nnz: usize,
    pub max_abs: f64,
    pub trace: f64,
    pub max_asymmetry: f64,
    pub non_finite: usize,
}

impl std::fmt::Display for MatrixDiagnostics {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "n={} nnz={} max|a|={:e} trace={:e} max asymmetry={:e} non-finite={}",
            self.n, self.nnz, self.max_abs, self.trace, self.max_asymmetry, self.non_finite
        )
    }
}

impl MatrixDiagnostics {
    pub fn of(m: &SparseMat) -> Self {
        let n = m.nrows();
        let mut max_abs: f64 = 0.0;
        let mut trace = 0.0;
        let mut non_finite = 0;
        let mut max_asymmetry: f64 = 0.0;
        for i in 0..n {
            for (j, &v) in m.col_idx_of_row(i).zip(m.val_of_row(i)) {
                if !v.is_finite() {
                    non_finite += 1;
                }
                max_abs = max_abs.max(v.abs());
                if i == j {
                    trace += v;
                }
                max_asymmetry = max_asymmetry.max((v - entry(m, j, i)).abs());
            }
        }
        MatrixDiagnostics {
            n,
            nnz: m.val().len(),
            max_abs,
            trace,
            max_asymmetry,
            non_finite,
        }
    }
}

/// `m[i, j]`, zero when not stored. Column indices within a row are sorted.
pub(crate) fn entry(m: &SparseMat, i: usize, j: usize) -> f64 {
    let cols = &m.symbolic().col_idx()[m.symbolic().row_range(i)];
    match cols.binary_search(&j) {
        Ok(pos) => m.val_of_row(i)[pos],
        Err(_) => 0.0,
    }
}

/// `out = m · x`.
pub fn sparse_matvec(m: &SparseMat, x: &[f64], out: &mut [f64]) {
    for (i, o) in out.iter_mut().enumerate() {
        *o = m
            .col_idx_of_row(i)
            .zip(m.val_of_row(i))
            .map(|(j, v)| v * x[j])
            .sum();
    }
}

fn assemble(n: usize, triplets: &[Triplet<usize, usize, f64>]) -> Result<SparseMat, GraphError> {
    SparseMat::try_new_from_triplets(n, n, triplets)
        .map_err(|e| GraphError::Assembly(format!("{e:?}")))
}

/// A weighted undirected graph with its combinatorial Laplacian.
#[derive(Debug, Clone)]
pub struct Graph {
    weights: SparseMat,
    laplacian: SparseMat,
    degrees: Vec<f64>,
}

/// `L = diag(W·1) − W`. Rejects non-square, asymmetric, negative or
/// self-loop weights.
pub fn graph_laplacian(w: &SparseMat) -> Result<SparseMat, GraphError> {
    validate_weights(w)?;
    let degrees = row_sums(w);
    laplacian_from(w, &degrees)
}

fn validate_weights(w: &SparseMat) -> Result<(), GraphError> {
    if w.nrows() != w.ncols() {
        return Err(GraphError::NotSquare {
            rows: w.nrows(),
            cols: w.ncols(),
        });
    }
    for i in 0..w.nrows() {
        for (j, &wij) in w.col_idx_of_row(i).zip(w.val_of_row(i)) {
            if !(wij.is_finite() && wij >= 0.0) {
                return Err(GraphError::BadWeight { i, j, w: wij });
            }
            if i == j && wij != 0.0 {
                return Err(GraphError::SelfLoop { i, w: wij });
            }
            let wji = entry(w, j, i);
            if (wij - wji).abs() > 1e-12 * wij.abs().max(wji.abs()) {
                return Err(GraphError::Asymmetric { i, j, wij, wji });
            }
        }
    }
    Ok(())
}

fn row_sums(w: &SparseMat) -> Vec<f64> {
    (0..w.nrows())
        .map(|i| w.val_of_row(i).iter().sum())
        .collect()
}

fn laplacian_from(w: &SparseMat, degrees: &[f64]) -> Result<SparseMat, GraphError> {
    let n = w.nrows();
    let mut triplets = Vec::with_capacity(w.val().len() + n);
    for (i, &d) in degrees.iter().enumerate() {
        triplets.push(Triplet::new(i, i, d));
        for (j, &v) in w.col_idx_of_row(i).zip(w.val_of_row(i)) {
            if j != i && v != 0.0 {
                triplets.push(Triplet::new(i, j, -v));
            }
        }
    }
    assemble(n, &triplets)
}

impl Graph {
    pub fn from_weights(weights: SparseMat) -> Result<Self, GraphError> {
        validate_weights(&weights)?;
        let degrees = row_sums(&weights);
        let laplacian = laplacian_from(&weights, &degrees)?;
        Ok(Graph {
            weights,
            laplacian,
            degrees,
        })
    }

    /// Builds from undirected edges `(i, j, w)`, each listed once (either
    /// orientation). Repeated pairs are summed.
    pub fn from_edges(n: usize, edges: &[(usize, usize, f64)]) -> Result<Self, GraphError> {
        let mut triplets = Vec::with_capacity(2 * edges.len());
        for &(i, j, w) in edges {
            for index in [i, j] {
                if index >= n {
                    return Err(GraphError::NodeOutOfRange { index, n });
                }
            }
            if i == j {
                return Err(GraphError::SelfLoop { i, w });
            }
            triplets.push(Triplet::new(i, j, w));
            triplets.push(Triplet::new(j, i, w));
        }
        Graph::from_weights(assemble(n, &triplets)?)
    }

    pub fn n(&self) -> usize {
        self.weights.nrows()
    }

    pub fn weights(&self) -> &SparseMat {
        &self.weights
    }

    pub fn laplacian(&self) -> &SparseMat {
        &self.laplacian
    }

    pub fn degrees(&self) -> &[f64] {
        &self.degrees
    }

    pub fn max_degree(&self) -> f64 {
        self.degrees.iter().copied().fold(0.0, f64::max)
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        entry(&self.weights, i, j)
    }

    /// Nodes without any incident edge; their Laplacian rows are zero.
    pub fn isolated_nodes(&self) -> Vec<usize> {
        (0..self.n()).filter(|&i| self.degrees[i] == 0.0).collect()
    }

    /// Undirected edges `(i, j, w)` with `i < j`, in row-major order.
    pub fn edges(&self) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::new();
        for i in 0..self.n() {
            for (j, &w) in self
                .weights
                .col_idx_of_row(i)
                .zip(self.weights.val_of_row(i))
            {
                if i < j && w != 0.0 {
                    out.push((i, j, w));
                }
            }
        }
        out
    }

    pub fn edge_count(&self) -> usize {
        self.edges().len()
    }

    /// Number of connected components (isolated nodes count as components).
    pub fn component_count(&self) -> usize {
        let n = self.n();
        let mut seen = vec![false; n];
        let mut stack = Vec::new();
        let mut count = 0;
        for start in 0..n {
            if seen[start] {
                continue;
            }
            count += 1;
            seen[start] = true;
            stack.push(start);
            while let Some(i) = stack.pop() {
                for j in self.weights.col_idx_of_row(i) {
                    if !seen[j] {
                        seen[j] = true;
                        stack.push(j);
                    }
                }
            }
        }
        count
    }

    /// `I − D^{−1/2} W D^{−1/2}`, with zero rows at isolated nodes.
    pub fn normalized_laplacian(&self) -> Result<SparseMat, GraphError> {
        let n = self.n();
        let inv_sqrt: Vec<f64> = self
            .degrees
            .iter()
            .map(|&d| if d > 0.0 { 1.0 / d.sqrt() } else { 0.0 })
            .collect();
        let mut triplets = Vec::with_capacity(self.weights.val().len() + n);
        for i in 0..n {
            if self.degrees[i] > 0.0 {
                triplets.push(Triplet::new(i, i, 1.0));
            }
            for (j, &w) in self
                .weights
                .col_idx_of_row(i)
                .zip(self.weights.val_of_row(i))
            {
                triplets.push(Triplet::new(i, j, -w * inv_sqrt[i] * inv_sqrt[j]));
            }
        }
        assemble(n, &triplets)
    }

    pub fn dense_laplacian(&self) -> faer::Mat<f64> {
        self.laplacian.to_dense()
    }
}

/// `(1/N) Σ u_i v_i`.
pub fn discrete_inner_product(u: &[f64], v: &[f64]) -> Result<f64, GraphError> {
    if u.len() != v.len() {
        return Err(GraphError::Length(u.len(), v.len()));
    }
    if u.is_empty() {
        return Ok(0.0);
    }
    Ok(u.iter().zip(v).map(|(a, b)| a * b).sum::<f64>() / u.len() as f64)
}

/// `‖u‖_N = √⟨u, u⟩_N`.
pub fn discrete_norm(u: &[f64]) -> f64 {
    if u.is_empty() {
        return 0.0;
    }
    (u.iter().map(|a| a * a).sum::<f64>() / u.len() as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn two_node_laplacian() {
        let g = Graph::from_edges(2, &[(0, 1, 0.7)]).unwrap();
        let l = g.dense_laplacian();
        assert_eq!(
            (l[(0, 0)], l[(0, 1)], l[(1, 0)], l[(1, 1)]),
            (0.7, -0.7, -0.7, 0.7)
        );
    }

    #[test]
    fn laplacian_annihilates_constants() {
        let g =
            Graph::from_edges(4, &[(0, 1, 0.3), (1, 2, 1.7), (0, 3, 2.2), (2, 3, 0.05)]).unwrap();
        let mut out = vec![1.0; 4];
        sparse_matvec(g.laplacian(), &[1.0; 4], &mut out);
        assert!(out.iter().all(|v| v.abs() <= 1e-10));
    }

    #[test]
    fn asymmetric_weights_rejected() {
        let w = assemble(2, &[Triplet::new(0, 1, 1.0), Triplet::new(1, 0, 2.0)]).unwrap();
        assert!(matches!(
            graph_laplacian(&w),
            Err(GraphError::Asymmetric { .. })
        ));
        let w = assemble(2, &[Triplet::new(0, 1, 1.0)]).unwrap();
        assert!(matches!(
            graph_laplacian(&w),
            Err(GraphError::Asymmetric { .. })
        ));
        let w = assemble(2, &[Triplet::new(0, 0, 1.0)]).unwrap();
        assert!(matches!(
            graph_laplacian(&w),
            Err(GraphError::SelfLoop { .. })
        ));
    }

    #[test]
    fn isolated_and_components() {
        let g = Graph::from_edges(5, &[(0, 1, 1.0), (2, 3, 1.0)]).unwrap();
        assert_eq!(g.isolated_nodes(), vec![4]);
        assert_eq!(g.component_count(), 3);
        assert_eq!(g.edge_count(), 2);
    }

    #[test]
    fn inner_product_basics() {
        assert_relative_eq!(discrete_inner_product(&[1.0; 17], &[1.0; 17]).unwrap(), 1.0);
        assert_eq!(
            discrete_inner_product(&[1.0, 0.0], &[0.0, 3.0]).unwrap(),
            0.0
        );
        assert!(discrete_inner_product(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn normalized_laplacian_has_unit_diagonal() {
        let g = Graph::from_edges(3, &[(0, 1, 2.0), (1, 2, 2.0)]).unwrap();
        let l = g.normalized_laplacian().unwrap().to_dense();
        assert_relative_eq!(l[(0, 0)], 1.0);
        assert_relative_eq!(l[(0, 1)], -2.0 / (2.0f64 * 4.0).sqrt());
    }
}

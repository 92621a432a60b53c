use super::loss::{loss_and_grad, LossKind, Targets};
use super::{Activation, GraphShift, NnError, SpectralShift};
use crate::filter::{FilterBasis, FilterCoeffs};
use crate::graph::{SparseMat, SpectralDecomposition};
use crate::seed;
use faer::Mat;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::path::Path;

/// Node signals: N × F, one column per feature.
#[derive(Debug, Clone)]
pub enum NodeFeatures {
    Dense(Mat<f64>),
    /// Sparse rows, e.g. bag-of-words features.
    Sparse(SparseMat),
}

impl NodeFeatures {
    /// One feature per vector, all of the same length.
    pub fn from_columns(columns: &[Vec<f64>]) -> Self {
        let n = columns.first().map_or(0, |c| c.len());
        NodeFeatures::Dense(Mat::from_fn(n, columns.len(), |i, j| columns[j][i]))
    }

    pub fn n(&self) -> usize {
        match self {
            NodeFeatures::Dense(m) => m.nrows(),
            NodeFeatures::Sparse(m) => m.nrows(),
        }
    }

    pub fn features(&self) -> usize {
        match self {
            NodeFeatures::Dense(m) => m.ncols(),
            NodeFeatures::Sparse(m) => m.ncols(),
        }
    }

    /// `X · H` for an F × F′ matrix H.
    fn mul(&self, h: &Mat<f64>) -> Mat<f64> {
        match self {
            NodeFeatures::Dense(x) => x * h,
            NodeFeatures::Sparse(x) => {
                let mut out = Mat::<f64>::zeros(x.nrows(), h.ncols());
                for i in 0..x.nrows() {
                    for (q, &v) in x.col_idx_of_row(i).zip(x.val_of_row(i)) {
                        for p in 0..h.ncols() {
                            out[(i, p)] += v * h[(q, p)];
                        }
                    }
                }
                out
            }
        }
    }

    /// `Xᵀ · D` for an N × F′ matrix D.
    fn transpose_mul(&self, d: &Mat<f64>) -> Mat<f64> {
        match self {
            NodeFeatures::Dense(x) => x.transpose() * d,
            NodeFeatures::Sparse(x) => {
                let mut out = Mat::<f64>::zeros(x.ncols(), d.ncols());
                for i in 0..x.nrows() {
                    for (q, &v) in x.col_idx_of_row(i).zip(x.val_of_row(i)) {
                        for p in 0..d.ncols() {
                            out[(q, p)] += v * d[(i, p)];
                        }
                    }
                }
                out
            }
        }
    }
}

fn default_true() -> bool {
    true
}

/// Layered spectral GNN: `x_l^p = σ(Σ_q h^{lpq}(S) x_{l−1}^q)`.
///
/// `coeffs` is flat in (layer, out-feature, in-feature, tap) order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GnnModel {
    pub basis: FilterBasis,
    pub activation: Activation,
    /// Feature counts F_0, …, F_L.
    pub dims: Vec<usize>,
    pub taps: usize,
    /// Apply σ after the last layer too. Off for classification logits.
    #[serde(default = "default_true")]
    pub activate_output: bool,
    pub coeffs: Vec<f64>,
}

fn coeff_count(dims: &[usize], taps: usize) -> usize {
    dims.windows(2).map(|w| w[0] * w[1] * taps).sum()
}

impl GnnModel {
    /// All-zero coefficients.
    pub fn zeros(
        dims: Vec<usize>,
        taps: usize,
        basis: FilterBasis,
        activation: Activation,
    ) -> Self {
        let coeffs = vec![0.0; coeff_count(&dims, taps)];
        GnnModel {
            basis,
            activation,
            dims,
            taps,
            activate_output: true,
            coeffs,
        }
    }

    /// Uniform initialization on `±scale/√(F_in·K)` per layer.
    pub fn random(
        dims: Vec<usize>,
        taps: usize,
        basis: FilterBasis,
        activation: Activation,
        scale: f64,
        seed: u64,
    ) -> Self {
        let mut model = GnnModel::zeros(dims, taps, basis, activation);
        let mut rng = seed::rng(seed);
        for l in 0..model.layers() {
            let bound = scale / ((model.dims[l] * taps) as f64).sqrt();
            let range = model.layer_range(l);
            for c in &mut model.coeffs[range] {
                *c = bound * (2.0 * rng.random::<f64>() - 1.0);
            }
        }
        model
    }

    pub fn with_output_activation(mut self, on: bool) -> Self {
        self.activate_output = on;
        self
    }

    pub fn layers(&self) -> usize {
        self.dims.len().saturating_sub(1)
    }

    pub fn input_features(&self) -> usize {
        self.dims[0]
    }

    pub fn output_features(&self) -> usize {
        *self.dims.last().unwrap_or(&0)
    }

    pub fn layer_range(&self, l: usize) -> std::ops::Range<usize> {
        let start = coeff_count(&self.dims[..=l], self.taps);
        start..start + self.dims[l] * self.dims[l + 1] * self.taps
    }

    pub fn index(&self, l: usize, p: usize, q: usize, k: usize) -> usize {
        self.layer_range(l).start + (p * self.dims[l] + q) * self.taps + k
    }

    pub fn coeff(&self, l: usize, p: usize, q: usize, k: usize) -> f64 {
        self.coeffs[self.index(l, p, q, k)]
    }

    /// Filter from input feature q to output feature p of layer l.
    pub fn filter(&self, l: usize, p: usize, q: usize) -> FilterCoeffs {
        let start = self.index(l, p, q, 0);
        FilterCoeffs::new(self.basis, self.coeffs[start..start + self.taps].to_vec())
    }

    pub fn validate(&self) -> Result<(), NnError> {
        if self.dims.len() < 2 || self.taps == 0 || self.dims.contains(&0) {
            return Err(NnError::EmptyModel {
                dims: self.dims.clone(),
                taps: self.taps,
            });
        }
        let expected = coeff_count(&self.dims, self.taps);
        if self.coeffs.len() != expected {
            return Err(NnError::CoeffCount {
                expected,
                got: self.coeffs.len(),
                dims: self.dims.clone(),
                taps: self.taps,
            });
        }
        Ok(())
    }

    /// Whether layer l applies σ.
    pub fn activates(&self, l: usize) -> bool {
        l + 1 < self.layers() || self.activate_output
    }

    /// Tap matrix `H_k` of layer l: F_in × F_out with `[q, p] = h^{lpq}_k`.
    fn tap_matrix(&self, l: usize, k: usize) -> Mat<f64> {
        Mat::from_fn(self.dims[l], self.dims[l + 1], |q, p| {
            self.coeff(l, p, q, k)
        })
    }

    pub fn to_json(&self) -> Result<String, NnError> {
        serde_json::to_string_pretty(self).map_err(|e| NnError::Json(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self, NnError> {
        let model: GnnModel =
            serde_json::from_str(text).map_err(|e| NnError::Json(e.to_string()))?;
        model.validate()?;
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<(), NnError> {
        std::fs::write(path, self.to_json()?)
            .map_err(|e| NnError::Json(format!("{}: {e}", path.display())))
    }

    pub fn load(path: &Path) -> Result<Self, NnError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| NnError::Json(format!("{}: {e}", path.display())))?;
        GnnModel::from_json(&text)
    }
}

struct Trace {
    /// Inputs of layers 1.. (layer 0 reads the caller's features).
    hidden: Vec<Mat<f64>>,
    pre: Vec<Mat<f64>>,
    output: Mat<f64>,
}

fn check(model: &GnnModel, shift: &dyn GraphShift, inputs: &NodeFeatures) -> Result<(), NnError> {
    model.validate()?;
    if shift.basis() != model.basis {
        return Err(NnError::BasisMismatch {
            shift: shift.basis(),
            model: model.basis,
        });
    }
    if inputs.features() != model.input_features() {
        return Err(NnError::InputFeatures {
            expected: model.input_features(),
            got: inputs.features(),
        });
    }
    if inputs.n() != shift.n() {
        return Err(NnError::NodeCount {
            expected: shift.n(),
            got: inputs.n(),
        });
    }
    Ok(())
}

fn forward_trace(model: &GnnModel, shift: &dyn GraphShift, inputs: &NodeFeatures) -> Trace {
    let mut hidden = Vec::with_capacity(model.layers());
    let mut pre_all = Vec::with_capacity(model.layers());
    let mut current: Option<Mat<f64>> = None;
    for l in 0..model.layers() {
        let ys: Vec<Mat<f64>> = (0..model.taps)
            .map(|k| {
                let h = model.tap_matrix(l, k);
                match &current {
                    None => inputs.mul(&h),
                    Some(x) => x * &h,
                }
            })
            .collect();
        let pre = shift.combine(&ys);
        let out = if model.activates(l) {
            Mat::from_fn(pre.nrows(), pre.ncols(), |i, j| {
                model.activation.apply(pre[(i, j)])
            })
        } else {
            pre.clone()
        };
        if let Some(x) = current.take() {
            hidden.push(x);
        }
        pre_all.push(pre);
        current = Some(out);
    }
    Trace {
        hidden,
        pre: pre_all,
        output: current.unwrap_or_else(|| Mat::zeros(inputs.n(), 0)),
    }
}

/// Output features (N × F_L) of the model on the given shift.
pub fn gnn_forward(
    model: &GnnModel,
    shift: &dyn GraphShift,
    inputs: &NodeFeatures,
) -> Result<Mat<f64>, NnError> {
    check(model, shift, inputs)?;
    Ok(forward_trace(model, shift, inputs).output)
}

impl GnnModel {
    /// Forward pass through the spectral filters of a decomposition.
    pub fn forward_spectral(
        &self,
        spec: &SpectralDecomposition,
        inputs: &NodeFeatures,
    ) -> Result<Mat<f64>, NnError> {
        gnn_forward(self, &SpectralShift::new(spec, self.basis), inputs)
    }
}

#[derive(Debug, Clone)]
pub struct Gradient {
    pub loss: f64,
    /// Same layout as [`GnnModel::coeffs`].
    pub coeffs: Vec<f64>,
    pub output: Mat<f64>,
}

/// Loss and its exact gradient with respect to every filter coefficient.
pub fn gnn_gradient(
    model: &GnnModel,
    shift: &dyn GraphShift,
    inputs: &NodeFeatures,
    targets: &Targets,
    loss: LossKind,
) -> Result<Gradient, NnError> {
    check(model, shift, inputs)?;
    let trace = forward_trace(model, shift, inputs);
    let (value, mut delta) = loss_and_grad(loss, &trace.output, targets)?;
    let mut grad = vec![0.0; model.coeffs.len()];
    for l in (0..model.layers()).rev() {
        if model.activates(l) {
            let pre = &trace.pre[l];
            for j in 0..delta.ncols() {
                for i in 0..delta.nrows() {
                    delta[(i, j)] *= model.activation.derivative(pre[(i, j)]);
                }
            }
        }
        let ds = shift.powers(&delta, model.taps);
        let (f_in, f_out) = (model.dims[l], model.dims[l + 1]);
        for (k, d) in ds.iter().enumerate() {
            let g = if l == 0 {
                inputs.transpose_mul(d)
            } else {
                trace.hidden[l - 1].transpose() * d
            };
            for p in 0..f_out {
                for q in 0..f_in {
                    grad[model.index(l, p, q, k)] = g[(q, p)];
                }
            }
        }
        if l > 0 {
            let mut next = Mat::<f64>::zeros(delta.nrows(), f_in);
            for (k, d) in ds.iter().enumerate() {
                next += d * model.tap_matrix(l, k).transpose();
            }
            delta = next;
        }
    }
    Ok(Gradient {
        loss: value,
        coeffs: grad,
        output: trace.output,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{eigendecompose, Graph};
    use crate::nn::SparseShift;

    fn ring(n: usize) -> Graph {
        let edges: Vec<_> = (0..n)
            .map(|i| (i, (i + 1) % n, 0.3 + 0.1 * (i % 3) as f64))
            .collect();
        Graph::from_edges(n, &edges).unwrap()
    }

    #[test]
    fn identity_filter_relu_passes_nonnegative_input() {
        let g = ring(10);
        let spec = eigendecompose(g.laplacian(), 10).unwrap();
        let mut model = GnnModel::zeros(vec![1, 1], 2, FilterBasis::Heat, Activation::Relu);
        model.coeffs[0] = 1.0;
        let x: Vec<f64> = (0..10).map(|i| (i as f64 * 0.37).sin().abs()).collect();
        let y = model
            .forward_spectral(&spec, &NodeFeatures::from_columns(&[x.clone()]))
            .unwrap();
        for i in 0..10 {
            assert!((y[(i, 0)] - x[i]).abs() < 1e-10);
        }
    }

    #[test]
    fn zero_model_zero_output_and_gradient() {
        let g = ring(8);
        let shift = SparseShift::new(g.laplacian().clone(), FilterBasis::Heat);
        let model = GnnModel::zeros(vec![2, 3, 1], 3, FilterBasis::Heat, Activation::Tanh);
        let x = NodeFeatures::Dense(Mat::from_fn(8, 2, |i, j| (i + j) as f64));
        let t = Targets::Regression(Mat::zeros(8, 1));
        let grad = gnn_gradient(&model, &shift, &x, &t, LossKind::L2).unwrap();
        assert!(grad.output.norm_max() == 0.0);
        assert!(grad.coeffs.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn json_round_trip() {
        let model = GnnModel::random(
            vec![3, 4, 2],
            3,
            FilterBasis::Polynomial,
            Activation::Abs,
            1.0,
            5,
        );
        let back = GnnModel::from_json(&model.to_json().unwrap()).unwrap();
        assert_eq!(model, back);
        let mut broken = model.clone();
        broken.coeffs.pop();
        assert!(GnnModel::from_json(&serde_json::to_string(&broken).unwrap()).is_err());
    }

    #[test]
    fn sparse_and_dense_features_agree() {
        let g = ring(9);
        let shift = SparseShift::new(g.laplacian().clone(), FilterBasis::Polynomial);
        let model = GnnModel::random(
            vec![4, 3, 2],
            2,
            FilterBasis::Polynomial,
            Activation::Relu,
            1.0,
            1,
        );
        let dense = Mat::from_fn(9, 4, |i, j| {
            if (i + j) % 3 == 0 {
                1.0 + j as f64
            } else {
                0.0
            }
        });
        let triplets: Vec<_> = (0..9)
            .flat_map(|i| (0..4).map(move |j| (i, j)))
            .filter(|&(i, j)| dense[(i, j)] != 0.0)
            .map(|(i, j)| faer::sparse::Triplet::new(i, j, dense[(i, j)]))
            .collect();
        let sparse = SparseMat::try_new_from_triplets(9, 4, &triplets).unwrap();
        let targets = Targets::classes(&[0, 1, 0, 1, 1, 0, 0, 1, 0]);
        let a = gnn_gradient(
            &model,
            &shift,
            &NodeFeatures::Dense(dense),
            &targets,
            LossKind::CrossEntropy,
        )
        .unwrap();
        let b = gnn_gradient(
            &model,
            &shift,
            &NodeFeatures::Sparse(sparse),
            &targets,
            LossKind::CrossEntropy,
        )
        .unwrap();
        assert!((a.loss - b.loss).abs() < 1e-12);
        for (x, y) in a.coeffs.iter().zip(&b.coeffs) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn dimension_errors() {
        let g = ring(5);
        let shift = SparseShift::new(g.laplacian().clone(), FilterBasis::Heat);
        let model = GnnModel::zeros(vec![2, 1], 2, FilterBasis::Heat, Activation::Relu);
        let x = NodeFeatures::Dense(Mat::zeros(5, 3));
        assert!(matches!(
            gnn_forward(&model, &shift, &x),
            Err(NnError::InputFeatures { .. })
        ));
        let x = NodeFeatures::Dense(Mat::zeros(4, 2));
        assert!(matches!(
            gnn_forward(&model, &shift, &x),
            Err(NnError::NodeCount { .. })
        ));
        let poly = GnnModel::zeros(vec![2, 1], 2, FilterBasis::Polynomial, Activation::Relu);
        let x = NodeFeatures::Dense(Mat::zeros(5, 2));
        assert!(matches!(
            gnn_forward(&poly, &shift, &x),
            Err(NnError::BasisMismatch { .. })
        ));
    }
}

//! Activations, graph shift backends, the GNN forward pass and its gradient.

mod loss;
mod model;
mod shift;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use loss::{loss_value, LossKind, Targets};
pub use model::{gnn_forward, gnn_gradient, GnnModel, Gradient, NodeFeatures};
pub use shift::{expm_neg_chebyshev, GraphShift, SparseShift, SpectralShift};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NnError {
    #[error("model expects {expected} input features, got {got}")]
    InputFeatures { expected: usize, got: usize },
    #[error("inputs have {got} nodes, graph has {expected}")]
    NodeCount { expected: usize, got: usize },
    #[error("model has {got} coefficients, dims {dims:?} with {taps} taps need {expected}")]
    CoeffCount {
        expected: usize,
        got: usize,
        dims: Vec<usize>,
        taps: usize,
    },
    #[error("model needs at least one layer and one tap (dims {dims:?}, taps {taps})")]
    EmptyModel { dims: Vec<usize>, taps: usize },
    #[error("targets have shape {got:?}, model output is {expected:?}")]
    TargetShape {
        expected: (usize, usize),
        got: (usize, usize),
    },
    #[error("{loss:?} loss needs {needs} targets")]
    LossTargetMismatch { loss: LossKind, needs: &'static str },
    #[error("class label {label} out of range for {classes} outputs")]
    LabelOutOfRange { label: usize, classes: usize },
    #[error("no labelled nodes to evaluate the loss on")]
    NoLabels,
    #[error("shift basis {shift:?} does not match model basis {model:?}")]
    BasisMismatch {
        shift: crate::filter::FilterBasis,
        model: crate::filter::FilterBasis,
    },
    #[error("model json: {0}")]
    Json(String),
}

/// Pointwise nonlinearities with σ(0) = 0 and Lipschitz constant 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Abs,
    Tanh,
    Identity,
}

impl Activation {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::Abs => x.abs(),
            Activation::Tanh => x.tanh(),
            Activation::Identity => x,
        }
    }

    /// Derivative at x; the subgradient at the kinks of relu and abs is 0.
    pub fn derivative(self, x: f64) -> f64 {
        match self {
            Activation::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Abs => {
                if x > 0.0 {
                    1.0
                } else if x < 0.0 {
                    -1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - x.tanh().powi(2),
            Activation::Identity => 1.0,
        }
    }
}

impl std::str::FromStr for Activation {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "relu" => Ok(Activation::Relu),
            "abs" => Ok(Activation::Abs),
            "tanh" => Ok(Activation::Tanh),
            "identity" | "linear" | "none" => Ok(Activation::Identity),
            other => Err(format!(
                "unknown activation `{other}` (expected relu, abs, tanh or identity)"
            )),
        }
    }
}

pub fn activation_apply(kind: Activation, x: &[f64]) -> Vec<f64> {
    x.iter().map(|&v| kind.apply(v)).collect()
}

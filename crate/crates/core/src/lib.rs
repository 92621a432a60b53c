//! Numerical laboratory for graph neural networks on ε-graphs sampled from
//! manifolds.
//!
//! Points are drawn i.i.d. from an analytic manifold (unit circle or unit
//! sphere) whose weighted-Laplacian spectrum is known in closed form. The
//! sampled points become an ε-graph whose Laplacian acts as the graph shift
//! operator of a spectral GNN, and the same filter coefficients define a
//! manifold neural network (MNN) evaluated exactly in the analytic
//! eigenbasis. The [`experiments`] module compares the two side by side and
//! measures convergence rates and generalization gaps; [`datasets`] replays
//! the transductive node-classification protocol on the Cora citation graph.
//!
//! Module map:
//!
//! * [`manifold`]: analytic manifolds, bandlimited signals, sampling, MNN.
//! * [`graph`]: ε-graph kernel, Laplacian, eigendecomposition, discrete
//!   inner product.
//! * [`filter`]: frequency responses, low-pass check, spectral graph filter.
//! * [`nn`]: activations, graph shifts, GNN forward pass and gradient.
//! * [`training`]: SGD on the empirical risk, Monte-Carlo statistical risk.
//! * [`experiments`]: convergence sweeps, Weyl check, gap sweeps, log-log fits.
//! * [`datasets`]: Cora loader, induced subgraphs, transductive gap sweep.
//! * [`run`]: run configuration, dispatch and CSV/JSON emission for the CLI.

pub mod datasets;
pub mod experiments;
pub mod filter;
pub mod graph;
pub mod manifold;
pub mod nn;
pub mod run;
pub mod seed;
pub mod training;

mod error;

pub use error::{Error, Result};

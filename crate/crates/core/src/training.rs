//! Full-batch SGD on the empirical risk and Monte-Carlo estimates of the
//! statistical risk over freshly sampled graphs.

use crate::filter::FilterBasis;
use crate::graph::{
    build_epsilon_graph_with, eigendecompose, epsilon_schedule, GraphError, KernelScale,
    SpectralDecomposition,
};
use crate::manifold::{evaluate_signal, sample_points, ManifoldError, PointSample, SpectralSignal};
use crate::nn::{
    gnn_forward, gnn_gradient, loss_value, GnnModel, GraphShift, LossKind, NnError, NodeFeatures,
    SparseShift, SpectralShift, Targets,
};
use faer::Mat;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::Write;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid training config: {0}")]
    Config(String),
    #[error("training diverged at epoch {epoch} (loss {loss})")]
    Diverged {
        epoch: usize,
        loss: f64,
        trace: Vec<f64>,
    },
    #[error("statistical risk needs at least one resample")]
    NoResamples,
    #[error("regression problem needs input and target signals on one manifold")]
    Problem,
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Manifold(#[from] ManifoldError),
    #[error("csv export failed: {0}")]
    Export(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub lr: f64,
    pub epochs: usize,
    /// Seeds model initialization in the experiments; SGD itself is full-batch.
    pub seed: u64,
    pub loss: LossKind,
    /// Heavy-ball momentum μ: `v ← μv + g`, `H ← H − lr·v`. Zero is plain descent.
    #[serde(default)]
    pub momentum: f64,
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(TrainError::Config(format!(
                "lr must be positive, got {}",
                self.lr
            )));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(TrainError::Config(format!(
                "momentum must lie in [0, 1), got {}",
                self.momentum
            )));
        }
        if self.epochs == 0 {
            return Err(TrainError::Config("epochs must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Last iterate H_E.
    pub model: GnnModel,
    /// Loss before each update, one entry per epoch.
    pub losses: Vec<f64>,
    /// Empirical risk of the returned model.
    pub final_loss: f64,
}

/// Full-batch gradient descent on every filter coefficient, with optional
/// heavy-ball momentum.
pub fn train(
    model: &GnnModel,
    shift: &dyn GraphShift,
    inputs: &NodeFeatures,
    targets: &Targets,
    config: &TrainConfig,
) -> Result<TrainOutcome, TrainError> {
    config.validate()?;
    let mut model = model.clone();
    let mut losses = Vec::with_capacity(config.epochs);
    let mut velocity = vec![0.0; model.coeffs.len()];
    for epoch in 0..config.epochs {
        let grad = gnn_gradient(&model, shift, inputs, targets, config.loss)?;
        if !grad.loss.is_finite() || grad.coeffs.iter().any(|g| !g.is_finite()) {
            losses.push(grad.loss);
            return Err(TrainError::Diverged {
                epoch,
                loss: grad.loss,
                trace: losses,
            });
        }
        losses.push(grad.loss);
        for ((c, v), g) in model.coeffs.iter_mut().zip(&mut velocity).zip(&grad.coeffs) {
            *v = config.momentum * *v + g;
            *c -= config.lr * *v;
        }
    }
    let final_loss = loss_value(config.loss, &gnn_forward(&model, shift, inputs)?, targets)?;
    if !final_loss.is_finite() {
        return Err(TrainError::Diverged {
            epoch: config.epochs,
            loss: final_loss,
            trace: losses,
        });
    }
    Ok(TrainOutcome {
        model,
        losses,
        final_loss,
    })
}

/// How graph filters are evaluated on sampled graphs.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Backend {
    /// Eigendecomposition with `k` eigenpairs (all when `None`).
    Spectral { k: Option<usize> },
    /// Sparse products with the Laplacian (Chebyshev for the heat basis).
    #[default]
    Sparse,
}

/// A graph shift that owns its data.
#[derive(Debug, Clone)]
pub enum OwnedShift {
    Spectral(SpectralDecomposition, FilterBasis),
    Sparse(SparseShift),
}

impl OwnedShift {
    pub fn build(
        laplacian: &crate::graph::SparseMat,
        basis: FilterBasis,
        backend: Backend,
    ) -> Result<Self, GraphError> {
        Ok(match backend {
            Backend::Spectral { k } => {
                let k = k.unwrap_or(laplacian.nrows()).min(laplacian.nrows());
                OwnedShift::Spectral(eigendecompose(laplacian, k)?, basis)
            }
            Backend::Sparse => OwnedShift::Sparse(SparseShift::new(laplacian.clone(), basis)),
        })
    }
}

impl GraphShift for OwnedShift {
    fn n(&self) -> usize {
        match self {
            OwnedShift::Spectral(s, _) => s.n(),
            OwnedShift::Sparse(s) => s.n(),
        }
    }

    fn basis(&self) -> FilterBasis {
        match self {
            OwnedShift::Spectral(_, b) => *b,
            OwnedShift::Sparse(s) => s.basis(),
        }
    }

    fn combine(&self, ys: &[Mat<f64>]) -> Mat<f64> {
        match self {
            OwnedShift::Spectral(s, b) => SpectralShift::new(s, *b).combine(ys),
            OwnedShift::Sparse(s) => s.combine(ys),
        }
    }

    fn powers(&self, x: &Mat<f64>, taps: usize) -> Vec<Mat<f64>> {
        match self {
            OwnedShift::Spectral(s, b) => SpectralShift::new(s, *b).powers(x, taps),
            OwnedShift::Sparse(s) => s.powers(x, taps),
        }
    }
}

/// Regression of target signals g from input signals f on ε-graphs sampled
/// from one manifold, with `ε = c (ln N / N)^{1/(d+4)}`.
#[derive(Debug, Clone)]
pub struct RegressionProblem {
    pub inputs: Vec<SpectralSignal>,
    pub targets: Vec<SpectralSignal>,
    pub epsilon_c: f64,
    pub kernel: KernelScale,
    pub backend: Backend,
    pub basis: FilterBasis,
}

/// One sampled instance of a [`RegressionProblem`].
#[derive(Debug, Clone)]
pub struct SampledTask {
    pub points: PointSample,
    pub epsilon: f64,
    pub shift: OwnedShift,
    pub inputs: NodeFeatures,
    pub targets: Targets,
    pub graph_warnings: Vec<String>,
}

impl RegressionProblem {
    pub fn sample(&self, n: usize, seed: u64) -> Result<SampledTask, TrainError> {
        let manifold = self.inputs.first().ok_or(TrainError::Problem)?.manifold();
        if self.targets.is_empty()
            || self
                .inputs
                .iter()
                .chain(&self.targets)
                .any(|s| s.manifold().kind() != manifold.kind())
        {
            return Err(TrainError::Problem);
        }
        let points = sample_points(manifold, n, seed)?;
        let epsilon = epsilon_schedule(n, manifold.dim(), self.epsilon_c)?;
        let graph = build_epsilon_graph_with(&points, manifold.dim(), epsilon, self.kernel)?;
        let shift = OwnedShift::build(graph.laplacian(), self.basis, self.backend)?;
        let columns = |signals: &[SpectralSignal]| -> Result<Vec<Vec<f64>>, ManifoldError> {
            signals
                .iter()
                .map(|s| evaluate_signal(s, &points))
                .collect()
        };
        let inputs = NodeFeatures::from_columns(&columns(&self.inputs)?);
        let target_cols = columns(&self.targets)?;
        let targets =
            Targets::Regression(Mat::from_fn(n, target_cols.len(), |i, j| target_cols[j][i]));
        Ok(SampledTask {
            points,
            epsilon,
            shift,
            inputs,
            targets,
            graph_warnings: graph.warnings().iter().map(|w| w.to_string()).collect(),
        })
    }
}

impl SampledTask {
    pub fn loss(&self, model: &GnnModel, loss: LossKind) -> Result<f64, TrainError> {
        let y = gnn_forward(model, &self.shift, &self.inputs)?;
        Ok(loss_value(loss, &y, &self.targets)?)
    }

    pub fn train(
        &self,
        model: &GnnModel,
        config: &TrainConfig,
    ) -> Result<TrainOutcome, TrainError> {
        train(model, &self.shift, &self.inputs, &self.targets, config)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StatisticalRisk {
    pub mean: f64,
    /// Losses in the order of `seeds`.
    pub losses: Vec<f64>,
    pub seeds: Vec<u64>,
    pub warnings: Vec<String>,
}

/// Mean loss of a trained model over freshly sampled N-point graphs, one per seed.
/// The mean sums sorted losses, so it does not depend on the seed order.
pub fn statistical_risk_mc(
    model: &GnnModel,
    problem: &RegressionProblem,
    n: usize,
    seeds: &[u64],
    loss: LossKind,
) -> Result<StatisticalRisk, TrainError> {
    if seeds.is_empty() {
        return Err(TrainError::NoResamples);
    }
    let results: Vec<Result<(f64, Vec<String>), TrainError>> = seeds
        .par_iter()
        .map(|&seed| {
            let task = problem.sample(n, seed)?;
            Ok((task.loss(model, loss)?, task.graph_warnings))
        })
        .collect();
    let mut losses = Vec::with_capacity(seeds.len());
    let mut warnings = Vec::new();
    for r in results {
        let (l, w) = r?;
        losses.push(l);
        warnings.extend(w);
    }
    Ok(StatisticalRisk {
        mean: sorted_mean(&losses),
        losses,
        seeds: seeds.to_vec(),
        warnings,
    })
}

/// Mean of the values summed in ascending order.
pub fn sorted_mean(values: &[f64]) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted.iter().sum::<f64>() / sorted.len() as f64
}

/// GA = statistical − empirical, signed.
pub fn generalization_gap(empirical: f64, statistical: f64) -> f64 {
    statistical - empirical
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RiskReport {
    pub empirical: f64,
    pub statistical_estimate: f64,
    pub resample_losses: Vec<f64>,
    pub resample_seeds: Vec<u64>,
    pub gap: f64,
}

impl RiskReport {
    pub fn new(empirical: f64, statistical: StatisticalRisk) -> Self {
        RiskReport {
            empirical,
            statistical_estimate: statistical.mean,
            gap: generalization_gap(empirical, statistical.mean),
            resample_losses: statistical.losses,
            resample_seeds: statistical.seeds,
        }
    }

    pub fn resamples(&self) -> usize {
        self.resample_losses.len()
    }

    /// Columns `resample,seed,loss`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), TrainError> {
        let err = |e: csv::Error| TrainError::Export(e.to_string());
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["resample", "seed", "loss"]).map_err(err)?;
        for (r, (seed, loss)) in self
            .resample_seeds
            .iter()
            .zip(&self.resample_losses)
            .enumerate()
        {
            w.serialize((r, seed, loss)).map_err(err)?;
        }
        w.flush().map_err(|e| TrainError::Export(e.to_string()))
    }
}

/// Columns `epoch,loss`.
pub fn write_loss_trace_csv<W: Write>(losses: &[f64], out: W) -> Result<(), TrainError> {
    let err = |e: csv::Error| TrainError::Export(e.to_string());
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["epoch", "loss"]).map_err(err)?;
    for (e, l) in losses.iter().enumerate() {
        w.serialize((e, l)).map_err(err)?;
    }
    w.flush().map_err(|e| TrainError::Export(e.to_string()))
}

use thiserror::Error;

use crate::datasets::DatasetError;
use crate::experiments::ExperimentError;
use crate::filter::FilterError;
use crate::graph::GraphError;
use crate::manifold::ManifoldError;
use crate::nn::NnError;
use crate::run::RunError;
use crate::training::TrainError;

/// Crate-level error: one variant per module.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Manifold(#[from] ManifoldError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Filter(#[from] FilterError),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Experiment(#[from] ExperimentError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Run(#[from] RunError),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

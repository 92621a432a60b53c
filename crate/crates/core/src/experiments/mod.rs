//! Runnable convergence experiments: spectrum and output convergence of
//! ε-graph GNNs towards their manifold limits, sampling consistency of the
//! discrete inner product, Weyl scaling, and the generalization-gap sweep.
//!
//! Every sweep is a grid of independent `(N, seed)` cells. Cells run on the
//! rayon pool and are merged in grid order, so reports depend only on the
//! configuration and its master seed.

mod fit;
mod gap;
mod output;
mod sampling;
mod spectrum;

pub use fit::{linear_fit, loglog_fit, pearson, LinearFit};
pub use gap::{run_gap_sweep_synthetic, GapConfig, GapReport, GapRow, GapSummaryRow, TaskSignals};
pub use output::{default_signal, run_output_convergence};
pub use sampling::{check_weyl, run_sampling_consistency, weyl_fit};
pub use spectrum::run_spectrum_convergence;

use crate::filter::FilterError;
use crate::graph::{GraphError, KernelScale};
use crate::manifold::{ManifoldError, ManifoldKind};
use crate::nn::{Activation, NnError};
use crate::training::{Backend, TrainError};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::io::Write;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("N list must be strictly increasing with at least two entries, got {0:?}")]
    NList(Vec<usize>),
    #[error("at least one seed per N is required")]
    NoSeeds,
    #[error("a fit needs at least two usable points, got {0}")]
    TooFewPoints(usize),
    #[error("length mismatch: {0} vs {1}")]
    Length(usize, usize),
    #[error("all abscissae are equal, the slope is undefined")]
    DegenerateAbscissa,
    #[error("{k} eigenpairs split an eigenspace; use {lower} or {upper}")]
    SplitEigenspace {
        k: usize,
        lower: usize,
        upper: usize,
    },
    #[error("{requested} eigenpairs requested but the smallest graph has {n} nodes")]
    TooManyEigenpairs { requested: usize, n: usize },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("report is inconsistent: {0}")]
    Inconsistent(String),
    #[error("export: {0}")]
    Export(String),
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
}

impl From<crate::Error> for ExperimentError {
    fn from(e: crate::Error) -> Self {
        match e {
            crate::Error::Manifold(e) => e.into(),
            crate::Error::Graph(e) => e.into(),
            crate::Error::Filter(e) => e.into(),
            crate::Error::Nn(e) => e.into(),
            crate::Error::Train(e) => e.into(),
            crate::Error::Experiment(e) => e,
            other => ExperimentError::Config(other.to_string()),
        }
    }
}

fn default_kernel() -> KernelScale {
    KernelScale::LimitMatched
}

/// Parameters shared by the manifold sweeps. Fields not used by a given
/// experiment are ignored by it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub n_list: Vec<usize>,
    /// Seeds per N.
    pub seeds: usize,
    pub manifold: ManifoldKind,
    /// Signal bandwidth M.
    pub bandwidth: usize,
    /// ε constant c; `None` picks 1.5 for d = 1 and 1.0 for d = 2.
    pub epsilon_c: Option<f64>,
    #[serde(default = "default_kernel")]
    pub kernel: KernelScale,
    pub master_seed: u64,
    /// Eigenpairs compared in spectrum sweeps.
    pub k: usize,
    /// Heat-basis filter taps.
    pub taps: Vec<f64>,
    pub activation: Activation,
    /// Spectral coefficients of the input signal; `None` uses [`default_signal`].
    pub signal: Option<Vec<f64>>,
    pub backend: Backend,
    /// Makes the filter-only error the primary metric of output sweeps.
    pub filter_only: bool,
    /// Quadrature nodes for multilayer MNNs.
    pub quadrature: Option<usize>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            n_list: vec![250, 500, 1000, 2000],
            seeds: 10,
            manifold: ManifoldKind::Circle,
            bandwidth: 5,
            epsilon_c: None,
            kernel: KernelScale::LimitMatched,
            master_seed: 1,
            k: 9,
            taps: vec![0.0, 1.0],
            activation: Activation::Relu,
            signal: None,
            backend: Backend::Sparse,
            filter_only: false,
            quadrature: None,
        }
    }
}

/// Default ε constant for a manifold dimension.
pub fn default_epsilon_c(d: usize) -> f64 {
    if d <= 1 {
        1.5
    } else {
        1.0
    }
}

impl SweepConfig {
    pub fn epsilon_c(&self) -> f64 {
        self.epsilon_c
            .unwrap_or_else(|| default_epsilon_c(self.manifold.dim()))
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        if self.n_list.len() < 2
            || self.n_list.windows(2).any(|w| w[0] >= w[1])
            || self.n_list[0] == 0
        {
            return Err(ExperimentError::NList(self.n_list.clone()));
        }
        if self.seeds == 0 {
            return Err(ExperimentError::NoSeeds);
        }
        if self.bandwidth == 0 {
            return Err(ExperimentError::Config(
                "bandwidth must be at least 1".into(),
            ));
        }
        let c = self.epsilon_c();
        if !(c.is_finite() && c > 0.0) {
            return Err(ExperimentError::Config(format!(
                "epsilon constant must be positive, got {c}"
            )));
        }
        Ok(())
    }

    /// Sample seed of cell `(n, s)`.
    pub fn cell_seed(&self, n: usize, s: usize) -> u64 {
        crate::seed::derive(self.master_seed, &[n as u64, s as u64])
    }
}

/// One measured value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Record {
    #[serde(rename = "N")]
    pub n: usize,
    pub seed: usize,
    pub metric: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    #[serde(rename = "N")]
    pub n: usize,
    pub mean: f64,
    /// Sample standard deviation over seeds divided by √seeds (0 for one seed).
    pub stderr: f64,
}

/// Mean and standard error of `values`, summed in the given order.
pub fn mean_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Per-N summary of one metric, in the order the records list the seeds.
pub fn summarize(records: &[Record], metric: &str) -> Vec<SummaryRow> {
    let mut by_n: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    for r in records.iter().filter(|r| r.metric == metric) {
        by_n.entry(r.n).or_default().push(r.value);
    }
    by_n.into_iter()
        .map(|(n, v)| {
            let (mean, stderr) = mean_stderr(&v);
            SummaryRow { n, mean, stderr }
        })
        .collect()
}

/// Raw records of a sweep with the per-N summary and log-log fit of its
/// primary metric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub experiment: String,
    pub metric: String,
    pub config: SweepConfig,
    /// Resolved ε constant.
    pub epsilon_c: f64,
    pub records: Vec<Record>,
    pub summary: Vec<SummaryRow>,
    /// `None` when fewer than two summary means are usable.
    pub fit: Option<LinearFit>,
    pub warnings: Vec<String>,
    /// Experiment-specific scalars (limit constants and the like).
    pub extras: BTreeMap<String, f64>,
}

impl ConvergenceReport {
    fn assemble(
        experiment: &str,
        metric: &str,
        config: &SweepConfig,
        records: Vec<Record>,
        warnings: Vec<String>,
        extras: BTreeMap<String, f64>,
    ) -> Self {
        let summary = summarize(&records, metric);
        let mut warnings = warnings;
        let fit = fit_summary(&summary, &mut warnings);
        ConvergenceReport {
            experiment: experiment.to_string(),
            metric: metric.to_string(),
            config: config.clone(),
            epsilon_c: config.epsilon_c(),
            records,
            summary,
            fit,
            warnings,
            extras,
        }
    }

    /// Summary of any recorded metric.
    pub fn summary_of(&self, metric: &str) -> Vec<SummaryRow> {
        summarize(&self.records, metric)
    }

    /// Log-log fit of the per-N means of any recorded metric.
    pub fn fit_of(&self, metric: &str) -> Result<LinearFit, ExperimentError> {
        let pts: Vec<(f64, f64)> = self
            .summary_of(metric)
            .iter()
            .map(|r| (r.n as f64, r.mean))
            .collect();
        loglog_fit(&pts)
    }

    /// Raw values of one metric at one N, in seed order.
    pub fn values(&self, n: usize, metric: &str) -> Vec<f64> {
        self.records
            .iter()
            .filter(|r| r.n == n && r.metric == metric)
            .map(|r| r.value)
            .collect()
    }

    pub fn metrics(&self) -> Vec<String> {
        let mut seen: Vec<String> = Vec::new();
        for r in &self.records {
            if !seen.contains(&r.metric) {
                seen.push(r.metric.clone());
            }
        }
        seen
    }

    /// Recomputes the summary and fit from the raw records and compares them
    /// bit for bit with the stored ones.
    pub fn check_consistency(&self) -> Result<(), ExperimentError> {
        let summary = summarize(&self.records, &self.metric);
        if summary != self.summary {
            return Err(ExperimentError::Inconsistent(
                "summary differs from raw records".into(),
            ));
        }
        let fit = fit_summary(&summary, &mut Vec::new());
        if fit != self.fit {
            return Err(ExperimentError::Inconsistent(
                "fit differs from summary".into(),
            ));
        }
        Ok(())
    }

    /// Columns `N,seed,metric,value`.
    pub fn write_records_csv<W: Write>(&self, out: W) -> Result<(), ExperimentError> {
        write_records_csv(&self.records, out)
    }

    /// Columns `N,mean,stderr` for the primary metric.
    pub fn write_summary_csv<W: Write>(&self, out: W) -> Result<(), ExperimentError> {
        write_summary_csv(&self.summary, out)
    }

    pub fn to_json(&self) -> Result<String, ExperimentError> {
        serde_json::to_string_pretty(self).map_err(|e| ExperimentError::Export(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self, ExperimentError> {
        serde_json::from_str(text).map_err(|e| ExperimentError::Export(e.to_string()))
    }
}

fn fit_summary(summary: &[SummaryRow], warnings: &mut Vec<String>) -> Option<LinearFit> {
    let pts: Vec<(f64, f64)> = summary.iter().map(|r| (r.n as f64, r.mean)).collect();
    match loglog_fit(&pts) {
        Ok(fit) => {
            if fit.n_dropped > 0 {
                warnings.push(format!(
                    "log-log fit dropped {} zero or non-finite means",
                    fit.n_dropped
                ));
            }
            Some(fit)
        }
        Err(e) => {
            warnings.push(format!("no log-log fit: {e}"));
            None
        }
    }
}

pub fn write_records_csv<W: Write>(records: &[Record], out: W) -> Result<(), ExperimentError> {
    let mut w = csv::Writer::from_writer(out);
    for r in records {
        w.serialize(r)
            .map_err(|e| ExperimentError::Export(e.to_string()))?;
    }
    w.flush()
        .map_err(|e| ExperimentError::Export(e.to_string()))
}

pub fn write_summary_csv<W: Write>(rows: &[SummaryRow], out: W) -> Result<(), ExperimentError> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)
            .map_err(|e| ExperimentError::Export(e.to_string()))?;
    }
    w.flush()
        .map_err(|e| ExperimentError::Export(e.to_string()))
}

/// Output of one cell: named values plus warnings.
pub(crate) struct CellOutput {
    pub values: Vec<(String, f64)>,
    pub warnings: Vec<String>,
}

/// Runs `cell(n, s, seed)` over the whole grid on the rayon pool and merges
/// the outputs in grid order.
pub(crate) fn run_grid<F>(
    config: &SweepConfig,
    cell: F,
) -> Result<(Vec<Record>, Vec<String>), ExperimentError>
where
    F: Fn(usize, usize, u64) -> Result<CellOutput, ExperimentError> + Sync,
{
    let outputs = run_cells(&config.n_list, config.seeds, config.master_seed, cell)?;
    let mut records = Vec::new();
    let mut warnings = Vec::new();
    for ((n, s), out) in outputs {
        records.extend(out.values.into_iter().map(|(metric, value)| Record {
            n,
            seed: s,
            metric,
            value,
        }));
        warnings.extend(
            out.warnings
                .into_iter()
                .map(|w| format!("N={n} seed={s}: {w}")),
        );
    }
    Ok((records, warnings))
}

/// Evaluates `cell` on every `(n, s)` pair with seed `derive(master, [n, s])`,
/// in parallel, returning the outputs in grid order.
pub(crate) fn run_cells<T, F>(
    n_list: &[usize],
    seeds: usize,
    master: u64,
    cell: F,
) -> Result<Vec<((usize, usize), T)>, ExperimentError>
where
    T: Send,
    F: Fn(usize, usize, u64) -> Result<T, ExperimentError> + Sync,
{
    let cells: Vec<(usize, usize)> = n_list
        .iter()
        .flat_map(|&n| (0..seeds).map(move |s| (n, s)))
        .collect();
    let outputs: Vec<Result<T, ExperimentError>> = cells
        .par_iter()
        .map(|&(n, s)| cell(n, s, crate::seed::derive(master, &[n as u64, s as u64])))
        .collect();
    cells
        .into_iter()
        .zip(outputs)
        .map(|(c, o)| o.map(|o| (c, o)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_validation() {
        let mut c = SweepConfig::default();
        assert!(c.validate().is_ok());
        c.n_list = vec![100];
        assert!(matches!(c.validate(), Err(ExperimentError::NList(_))));
        c.n_list = vec![100, 100];
        assert!(c.validate().is_err());
        c.n_list = vec![100, 200];
        c.seeds = 0;
        assert!(matches!(c.validate(), Err(ExperimentError::NoSeeds)));
    }

    #[test]
    fn epsilon_defaults_by_dimension() {
        let mut c = SweepConfig::default();
        assert_eq!(c.epsilon_c(), 1.5);
        c.manifold = ManifoldKind::Sphere;
        assert_eq!(c.epsilon_c(), 1.0);
        c.epsilon_c = Some(2.0);
        assert_eq!(c.epsilon_c(), 2.0);
    }

    #[test]
    fn summary_by_hand() {
        let rec = |n, seed, value| Record {
            n,
            seed,
            metric: "e".into(),
            value,
        };
        let records = vec![rec(10, 0, 1.0), rec(10, 1, 3.0), rec(20, 0, 0.5)];
        let s = summarize(&records, "e");
        assert_eq!(
            s[0],
            SummaryRow {
                n: 10,
                mean: 2.0,
                stderr: 1.0
            }
        );
        assert_eq!(
            s[1],
            SummaryRow {
                n: 20,
                mean: 0.5,
                stderr: 0.0
            }
        );
    }

    #[test]
    fn seeds_differ_between_cells() {
        let c = SweepConfig::default();
        assert_ne!(c.cell_seed(250, 1), c.cell_seed(250, 2));
        assert_ne!(c.cell_seed(250, 1), c.cell_seed(500, 1));
    }
}

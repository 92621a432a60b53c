use super::{
    default_epsilon_c, loglog_fit, mean_stderr, run_cells, ExperimentError, LinearFit, Record,
};
use crate::filter::FilterBasis;
use crate::graph::KernelScale;
use crate::manifold::{make_manifold, ManifoldKind, SpectralSignal};
use crate::nn::{Activation, GnnModel, LossKind};
use crate::training::{
    sorted_mean, statistical_risk_mc, Backend, RegressionProblem, RiskReport, TrainConfig,
};
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::io::Write;

/// Input and target signals of the synthetic regression task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TaskSignals {
    /// `input_features` inputs with coefficients drawn uniformly with unit
    /// expected energy on the first `input_bandwidth` eigenfunctions, and a
    /// target drawn the same way on the first `target_bandwidth`.
    Random {
        input_features: usize,
        input_bandwidth: usize,
        target_bandwidth: usize,
        seed: u64,
    },
    /// Spectral coefficients given explicitly.
    Explicit {
        inputs: Vec<Vec<f64>>,
        target: Vec<f64>,
    },
}

impl Default for TaskSignals {
    fn default() -> Self {
        TaskSignals::Random {
            input_features: 16,
            input_bandwidth: 25,
            target_bandwidth: 33,
            seed: 7,
        }
    }
}

fn random_coeffs(rng: &mut crate::seed::Rng, m: usize) -> Vec<f64> {
    let a = (3.0 / m as f64).sqrt();
    (0..m).map(|_| rng.random_range(-a..=a)).collect()
}

impl TaskSignals {
    /// Builds `(inputs, target)` on `kind`.
    pub fn build(
        &self,
        kind: ManifoldKind,
    ) -> Result<(Vec<SpectralSignal>, SpectralSignal), ExperimentError> {
        match self {
            TaskSignals::Random {
                input_features,
                input_bandwidth,
                target_bandwidth,
                seed,
            } => {
                if *input_features == 0 {
                    return Err(ExperimentError::Config(
                        "at least one input feature is required".into(),
                    ));
                }
                let m = (*input_bandwidth).max(*target_bandwidth);
                let manifold = make_manifold(kind, m)?;
                let mut rng = crate::seed::rng(*seed);
                let inputs = (0..*input_features)
                    .map(|_| {
                        SpectralSignal::new(&manifold, random_coeffs(&mut rng, *input_bandwidth))
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                let target =
                    SpectralSignal::new(&manifold, random_coeffs(&mut rng, *target_bandwidth))?;
                Ok((inputs, target))
            }
            TaskSignals::Explicit { inputs, target } => {
                if inputs.is_empty() {
                    return Err(ExperimentError::Config(
                        "at least one input signal is required".into(),
                    ));
                }
                let m = inputs
                    .iter()
                    .map(Vec::len)
                    .chain([target.len()])
                    .max()
                    .unwrap_or(1)
                    .max(1);
                let manifold = make_manifold(kind, m)?;
                let inputs = inputs
                    .iter()
                    .map(|c| SpectralSignal::new(&manifold, c.clone()))
                    .collect::<Result<Vec<_>, _>>()?;
                Ok((inputs, SpectralSignal::new(&manifold, target.clone())?))
            }
        }
    }

    pub fn input_features(&self) -> usize {
        match self {
            TaskSignals::Random { input_features, .. } => *input_features,
            TaskSignals::Explicit { inputs, .. } => inputs.len(),
        }
    }
}

/// Synthetic generalization-gap sweep on one manifold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GapConfig {
    pub n_list: Vec<usize>,
    /// Training graphs per N.
    pub seeds: usize,
    /// Fresh graphs per trained model for the statistical risk.
    pub resamples: usize,
    pub manifold: ManifoldKind,
    pub epsilon_c: Option<f64>,
    pub kernel: KernelScale,
    pub backend: Backend,
    pub master_seed: u64,
    pub signals: TaskSignals,
    /// Hidden layer widths (empty for a single layer).
    pub hidden: Vec<usize>,
    pub taps: usize,
    pub basis: FilterBasis,
    pub activation: Activation,
    /// Uniform initialization half-width factor; 0 starts from zero coefficients.
    pub init_scale: f64,
    pub lr: f64,
    pub epochs: usize,
}

impl Default for GapConfig {
    fn default() -> Self {
        GapConfig {
            n_list: vec![64, 128, 256, 512, 1024, 2048],
            seeds: 5,
            resamples: 50,
            manifold: ManifoldKind::Circle,
            epsilon_c: None,
            kernel: KernelScale::LimitMatched,
            backend: Backend::Sparse,
            master_seed: 1,
            signals: TaskSignals::default(),
            hidden: Vec::new(),
            taps: 3,
            basis: FilterBasis::Heat,
            activation: Activation::Identity,
            init_scale: 0.0,
            lr: 0.1,
            epochs: 1000,
        }
    }
}

impl GapConfig {
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
        if self.resamples == 0 {
            return Err(ExperimentError::Config(
                "at least one resample is required".into(),
            ));
        }
        if self.taps == 0 || self.hidden.contains(&0) {
            return Err(ExperimentError::Config(
                "taps and hidden widths must be positive".into(),
            ));
        }
        if !self.hidden.is_empty() && self.init_scale == 0.0 {
            return Err(ExperimentError::Config(
                "hidden layers need a nonzero init_scale (zero coefficients have zero gradient)"
                    .into(),
            ));
        }
        self.train_config(0).validate()?;
        Ok(())
    }

    fn train_config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            lr: self.lr,
            epochs: self.epochs,
            seed,
            loss: LossKind::L2,
            momentum: 0.0,
        }
    }

    fn initial_model(&self, seed: u64) -> GnnModel {
        let mut dims = vec![self.signals.input_features()];
        dims.extend(&self.hidden);
        dims.push(1);
        if self.init_scale == 0.0 {
            GnnModel::zeros(dims, self.taps, self.basis, self.activation)
        } else {
            GnnModel::random(
                dims,
                self.taps,
                self.basis,
                self.activation,
                self.init_scale,
                seed,
            )
        }
    }
}

/// One trained model: its empirical risk and the Monte-Carlo statistical risk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapRow {
    #[serde(rename = "N")]
    pub n: usize,
    pub seed: usize,
    pub sample_seed: u64,
    pub empirical: f64,
    pub statistical: f64,
    /// `statistical − empirical`.
    pub gap: f64,
    pub resample_seeds: Vec<u64>,
    pub resample_losses: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapSummaryRow {
    #[serde(rename = "N")]
    pub n: usize,
    /// Mean gap over training seeds.
    pub mean: f64,
    pub stderr: f64,
    pub empirical: f64,
    pub statistical: f64,
    /// Same value as `mean`.
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapReport {
    pub config: GapConfig,
    pub epsilon_c: f64,
    pub rows: Vec<GapRow>,
    pub summary: Vec<GapSummaryRow>,
    /// `log|mean gap|` against `log N`; `slope = −a`.
    pub fit: Option<LinearFit>,
    /// The same fit over every `(N, seed)` gap.
    pub per_seed_fit: Option<LinearFit>,
    pub warnings: Vec<String>,
}

fn gap_summary(rows: &[GapRow]) -> Vec<GapSummaryRow> {
    let mut ns: Vec<usize> = rows.iter().map(|r| r.n).collect();
    ns.dedup();
    ns.into_iter()
        .map(|n| {
            let sel: Vec<&GapRow> = rows.iter().filter(|r| r.n == n).collect();
            let gaps: Vec<f64> = sel.iter().map(|r| r.gap).collect();
            let (mean, stderr) = mean_stderr(&gaps);
            let k = sel.len() as f64;
            GapSummaryRow {
                n,
                mean,
                stderr,
                empirical: sel.iter().map(|r| r.empirical).sum::<f64>() / k,
                statistical: sel.iter().map(|r| r.statistical).sum::<f64>() / k,
                gap: mean,
            }
        })
        .collect()
}

impl GapReport {
    fn from_rows(config: &GapConfig, rows: Vec<GapRow>, mut warnings: Vec<String>) -> Self {
        let summary = gap_summary(&rows);
        let (fit, per_seed_fit) = gap_fits(&rows, &summary, &mut warnings);
        GapReport {
            config: config.clone(),
            epsilon_c: config.epsilon_c(),
            rows,
            summary,
            fit,
            per_seed_fit,
            warnings,
        }
    }

    /// Decay exponent `a` of `|GA| ≈ e^b N^{−a}`.
    pub fn decay_exponent(&self) -> Option<f64> {
        self.fit.as_ref().map(|f| -f.slope)
    }

    /// Rows flattened to `N,seed,metric,value` records.
    pub fn records(&self) -> Vec<Record> {
        self.rows
            .iter()
            .flat_map(|r| {
                [
                    ("empirical", r.empirical),
                    ("statistical", r.statistical),
                    ("gap", r.gap),
                ]
                .into_iter()
                .map(move |(m, v)| Record {
                    n: r.n,
                    seed: r.seed,
                    metric: m.to_string(),
                    value: v,
                })
            })
            .collect()
    }

    /// Recomputes every statistical risk from the stored resample losses,
    /// every gap, the summary and the fits, and compares bit for bit.
    pub fn check_consistency(&self) -> Result<(), ExperimentError> {
        for r in &self.rows {
            let stat = sorted_mean(&r.resample_losses);
            if stat != r.statistical || stat - r.empirical != r.gap {
                return Err(ExperimentError::Inconsistent(format!(
                    "row N={} seed={}",
                    r.n, r.seed
                )));
            }
        }
        let summary = gap_summary(&self.rows);
        if summary != self.summary {
            return Err(ExperimentError::Inconsistent(
                "gap summary differs from rows".into(),
            ));
        }
        let fits = gap_fits(&self.rows, &summary, &mut Vec::new());
        if fits != (self.fit.clone(), self.per_seed_fit.clone()) {
            return Err(ExperimentError::Inconsistent(
                "fit differs from summary".into(),
            ));
        }
        Ok(())
    }

    /// Columns `N,seed,metric,value`.
    pub fn write_records_csv<W: Write>(&self, out: W) -> Result<(), ExperimentError> {
        super::write_records_csv(&self.records(), out)
    }

    /// Columns `N,mean,stderr,empirical,statistical,gap`.
    pub fn write_summary_csv<W: Write>(&self, out: W) -> Result<(), ExperimentError> {
        let mut w = csv::Writer::from_writer(out);
        for r in &self.summary {
            w.serialize(r)
                .map_err(|e| ExperimentError::Export(e.to_string()))?;
        }
        w.flush()
            .map_err(|e| ExperimentError::Export(e.to_string()))
    }

    /// Columns `N,seed,resample,resample_seed,loss`.
    pub fn write_resamples_csv<W: Write>(&self, out: W) -> Result<(), ExperimentError> {
        let err = |e: csv::Error| ExperimentError::Export(e.to_string());
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["N", "seed", "resample", "resample_seed", "loss"])
            .map_err(err)?;
        for r in &self.rows {
            for (i, (s, l)) in r.resample_seeds.iter().zip(&r.resample_losses).enumerate() {
                w.serialize((r.n, r.seed, i, s, l)).map_err(err)?;
            }
        }
        w.flush()
            .map_err(|e| ExperimentError::Export(e.to_string()))
    }
}

fn gap_fits(
    rows: &[GapRow],
    summary: &[GapSummaryRow],
    warnings: &mut Vec<String>,
) -> (Option<LinearFit>, Option<LinearFit>) {
    let mut fit_or_warn = |pts: Vec<(f64, f64)>, what: &str| match loglog_fit(&pts) {
        Ok(f) => {
            if f.n_negative > 0 || f.n_dropped > 0 {
                warnings.push(format!(
                    "{what}: {} negative gaps entered through |GA|, {} zero or non-finite dropped",
                    f.n_negative, f.n_dropped
                ));
            }
            Some(f)
        }
        Err(e) => {
            warnings.push(format!("{what}: no fit ({e})"));
            None
        }
    };
    let fit = fit_or_warn(
        summary.iter().map(|r| (r.n as f64, r.mean)).collect(),
        "mean-gap fit",
    );
    let per_seed = fit_or_warn(
        rows.iter().map(|r| (r.n as f64, r.gap)).collect(),
        "per-seed fit",
    );
    (fit, per_seed)
}

/// For each N and training seed: sample a graph, train the model on it with
/// full-batch SGD on the l2 loss, and estimate the statistical risk of the
/// trained model on `resamples` fresh graphs of the same size. The gap is
/// the statistical minus the empirical risk of the last iterate.
pub fn run_gap_sweep_synthetic(config: &GapConfig) -> Result<GapReport, ExperimentError> {
    config.validate()?;
    let (inputs, target) = config.signals.build(config.manifold)?;
    let problem = RegressionProblem {
        inputs,
        targets: vec![target],
        epsilon_c: config.epsilon_c(),
        kernel: config.kernel,
        backend: config.backend,
        basis: config.basis,
    };
    let cells = run_cells(
        &config.n_list,
        config.seeds,
        config.master_seed,
        |n, s, seed| {
            let task = problem.sample(n, seed)?;
            let outcome = task.train(&config.initial_model(seed), &config.train_config(seed))?;
            let empirical = task.loss(&outcome.model, LossKind::L2)?;
            let resample_seeds: Vec<u64> = (0..config.resamples)
                .map(|r| crate::seed::derive(seed, &[r as u64 + 1]))
                .collect();
            let stat =
                statistical_risk_mc(&outcome.model, &problem, n, &resample_seeds, LossKind::L2)?;
            let mut warnings = task.graph_warnings.clone();
            warnings.extend(stat.warnings.iter().cloned());
            warnings.dedup();
            let risk = RiskReport::new(empirical, stat);
            let row = GapRow {
                n,
                seed: s,
                sample_seed: seed,
                empirical,
                statistical: risk.statistical_estimate,
                gap: risk.gap,
                resample_seeds: risk.resample_seeds,
                resample_losses: risk.resample_losses,
            };
            Ok((row, warnings))
        },
    )?;
    let mut rows = Vec::with_capacity(cells.len());
    let mut warnings = Vec::new();
    for ((n, s), (row, w)) in cells {
        rows.push(row);
        warnings.extend(w.into_iter().map(|w| format!("N={n} seed={s}: {w}")));
    }
    Ok(GapReport::from_rows(config, rows, warnings))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn realizable_task_has_no_gap() {
        // g = f/2 with a positive f: one identity tap recovers it on every graph.
        let config = GapConfig {
            n_list: vec![64, 128],
            seeds: 2,
            resamples: 5,
            signals: TaskSignals::Explicit {
                inputs: vec![vec![2.0, 0.5, 0.2, -0.3, 0.1]],
                target: vec![1.0, 0.25, 0.1, -0.15, 0.05],
            },
            taps: 1,
            epochs: 200,
            ..GapConfig::default()
        };
        let report = run_gap_sweep_synthetic(&config).unwrap();
        for row in &report.rows {
            assert!(row.gap.abs() < 1e-6, "{row:?}");
            assert!(row.empirical < 1e-12);
        }
        report.check_consistency().unwrap();
    }

    #[test]
    fn random_signals_are_deterministic() {
        let s = TaskSignals::default();
        let (a, ga) = s.build(ManifoldKind::Circle).unwrap();
        let (b, gb) = s.build(ManifoldKind::Circle).unwrap();
        assert_eq!(a, b);
        assert_eq!(ga, gb);
        assert_eq!(a.len(), 16);
        assert_eq!(ga.bandwidth(), 33);
        assert!(a[0].coeffs()[25..].iter().all(|&c| c == 0.0));
    }

    #[test]
    fn hidden_layers_need_initialization() {
        let config = GapConfig {
            hidden: vec![4],
            ..GapConfig::default()
        };
        assert!(config.validate().is_err());
    }

    #[test]
    fn small_sweep_is_consistent_and_reproducible() {
        let config = GapConfig {
            n_list: vec![40, 80],
            seeds: 2,
            resamples: 3,
            epochs: 20,
            signals: TaskSignals::Random {
                input_features: 3,
                input_bandwidth: 5,
                target_bandwidth: 7,
                seed: 1,
            },
            ..GapConfig::default()
        };
        let a = run_gap_sweep_synthetic(&config).unwrap();
        a.check_consistency().unwrap();
        let b = run_gap_sweep_synthetic(&config).unwrap();
        assert_eq!(a, b);
        let json = serde_json::to_string(&a).unwrap();
        let back: GapReport = serde_json::from_str(&json).unwrap();
        back.check_consistency().unwrap();
    }
}

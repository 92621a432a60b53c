//! Experiment dispatch: a [`RunConfig`] names one experiment with its fully
//! resolved parameters, and [`execute`] writes its CSV and JSON outputs plus a
//! `manifest.json` from which the run can be repeated.

use crate::datasets::{load_cora_dir, run_gap_sweep_dataset, DatasetError, DatasetGapConfig};
use crate::experiments::{
    check_weyl, loglog_fit, run_gap_sweep_synthetic, run_output_convergence,
    run_sampling_consistency, run_spectrum_convergence, ConvergenceReport, ExperimentError,
    GapConfig, LinearFit, SweepConfig,
};
use crate::manifold::{make_manifold, ManifoldKind};
use serde::{Deserialize, Serialize};
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum RunError {
    #[error("dataset not found: {0} (expected cora.content and cora.cites)")]
    MissingDataset(PathBuf),
    #[error("output directory {path} is not writable")]
    OutputDir {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot read {path}")]
    Read {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{path}: {message}")]
    Input { path: PathBuf, message: String },
    #[error(transparent)]
    Experiment(#[from] ExperimentError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
}

impl RunError {
    /// Whether the error comes from the configuration rather than the run.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            RunError::Config(_)
                | RunError::Experiment(
                    ExperimentError::Config(_)
                        | ExperimentError::NList(_)
                        | ExperimentError::NoSeeds
                )
                | RunError::Experiment(
                    ExperimentError::SplitEigenspace { .. }
                        | ExperimentError::TooManyEigenpairs { .. }
                )
                | RunError::Dataset(DatasetError::Config(_) | DatasetError::TooLarge { .. })
        )
    }
}

/// One experiment and its parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum Experiment {
    Spectrum {
        params: SweepConfig,
    },
    /// GNN against MNN outputs, `depth` layers.
    Converge {
        params: SweepConfig,
        depth: usize,
    },
    Sampling {
        params: SweepConfig,
    },
    /// Weyl exponent of the first `count` analytic eigenvalues.
    Weyl {
        manifold: ManifoldKind,
        count: usize,
    },
    GapSynthetic {
        params: GapConfig,
    },
    GapDataset {
        data_dir: PathBuf,
        params: DatasetGapConfig,
    },
    /// Log-log fit of column `y` against column `x` of a CSV file.
    Fit {
        input: PathBuf,
        x: String,
        y: String,
    },
}

impl Experiment {
    pub fn name(&self) -> &'static str {
        match self {
            Experiment::Spectrum { .. } => "spectrum",
            Experiment::Converge { .. } => "converge",
            Experiment::Sampling { .. } => "sampling",
            Experiment::Weyl { .. } => "weyl",
            Experiment::GapSynthetic { .. } => "gap-synthetic",
            Experiment::GapDataset { .. } => "gap-dataset",
            Experiment::Fit { .. } => "fit",
        }
    }

    fn master_seed_mut(&mut self) -> Option<&mut u64> {
        match self {
            Experiment::Spectrum { params }
            | Experiment::Converge { params, .. }
            | Experiment::Sampling { params } => Some(&mut params.master_seed),
            Experiment::GapSynthetic { params } => Some(&mut params.master_seed),
            Experiment::GapDataset { params, .. } => Some(&mut params.master_seed),
            Experiment::Weyl { .. } | Experiment::Fit { .. } => None,
        }
    }
}

/// A resolved run: written verbatim to `manifest.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    #[serde(flatten)]
    pub experiment: Experiment,
    pub out_dir: PathBuf,
    pub master_seed: u64,
}

impl RunConfig {
    /// Takes the master seed from the parameters, or `seed` when given.
    pub fn new(mut experiment: Experiment, out_dir: PathBuf, seed: Option<u64>) -> Self {
        let master_seed = match experiment.master_seed_mut() {
            Some(s) => {
                if let Some(seed) = seed {
                    *s = seed;
                }
                *s
            }
            None => seed.unwrap_or(0),
        };
        RunConfig {
            experiment,
            out_dir,
            master_seed,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("run configs serialize")
    }

    pub fn from_json(text: &str) -> Result<Self, RunError> {
        let mut cfg: RunConfig =
            serde_json::from_str(text).map_err(|e| RunError::Config(e.to_string()))?;
        let seed = cfg.master_seed;
        if let Some(s) = cfg.experiment.master_seed_mut() {
            *s = seed;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, RunError> {
        let text = std::fs::read_to_string(path).map_err(|source| RunError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text)
    }
}

/// What a run produced.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    /// Files written, in order.
    pub files: Vec<PathBuf>,
    pub fit: Option<LinearFit>,
    pub warnings: Vec<String>,
}

struct Outputs {
    dir: PathBuf,
    files: Vec<PathBuf>,
}

impl Outputs {
    fn create(dir: &Path) -> Result<Self, RunError> {
        let fail = |source| RunError::OutputDir {
            path: dir.to_path_buf(),
            source,
        };
        std::fs::create_dir_all(dir).map_err(fail)?;
        // Probe before any work is done.
        let probe = dir.join(".write-probe");
        File::create(&probe).map_err(fail)?;
        std::fs::remove_file(&probe).map_err(fail)?;
        Ok(Outputs {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        })
    }

    fn write<F>(&mut self, name: &str, body: F) -> Result<(), RunError>
    where
        F: FnOnce(&mut BufWriter<File>) -> Result<(), RunError>,
    {
        let path = self.dir.join(name);
        let fail = |source| RunError::OutputDir {
            path: path.clone(),
            source,
        };
        let mut w = BufWriter::new(File::create(&path).map_err(fail)?);
        body(&mut w)?;
        w.flush().map_err(fail)?;
        self.files.push(path);
        Ok(())
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), RunError> {
        let text =
            serde_json::to_string_pretty(value).map_err(|e| RunError::Config(e.to_string()))?;
        self.write(name, |w| writeln!(w, "{text}").map_err(export))
    }
}

fn export<E: std::fmt::Display>(e: E) -> RunError {
    RunError::Experiment(ExperimentError::Export(e.to_string()))
}

fn convergence_outputs(
    out: &mut Outputs,
    name: &str,
    report: &ConvergenceReport,
) -> Result<(), RunError> {
    out.write(&format!("{name}.csv"), |w| Ok(report.write_records_csv(w)?))?;
    out.write(&format!("{name}_summary.csv"), |w| {
        Ok(report.write_summary_csv(w)?)
    })?;
    out.json("fit.json", &report.fit)?;
    out.json("report.json", report)
}

/// Columns `x`, `y` of a CSV file with a header row.
pub fn read_columns(path: &Path, x: &str, y: &str) -> Result<Vec<(f64, f64)>, RunError> {
    let input = |message: String| RunError::Input {
        path: path.to_path_buf(),
        message,
    };
    let file = File::open(path).map_err(|source| RunError::Read {
        path: path.to_path_buf(),
        source,
    })?;
    let mut reader = csv::Reader::from_reader(file);
    let headers = reader.headers().map_err(|e| input(e.to_string()))?.clone();
    let column = |name: &str| {
        headers.iter().position(|h| h == name).ok_or_else(|| {
            input(format!(
                "no column `{name}` (have {})",
                headers.iter().collect::<Vec<_>>().join(", ")
            ))
        })
    };
    let (ix, iy) = (column(x)?, column(y)?);
    let mut points = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(|e| input(e.to_string()))?;
        let parse = |i: usize| -> Result<f64, RunError> {
            let s = record.get(i).unwrap_or("");
            s.trim()
                .parse()
                .map_err(|_| input(format!("row {}: `{s}` is not a number", row + 2)))
        };
        points.push((parse(ix)?, parse(iy)?));
    }
    Ok(points)
}

/// Runs the experiment and writes its outputs and `manifest.json` to `out_dir`.
pub fn execute(config: &RunConfig) -> Result<RunOutcome, RunError> {
    if let Experiment::GapDataset { data_dir, .. } = &config.experiment {
        if !data_dir.join("cora.content").is_file() || !data_dir.join("cora.cites").is_file() {
            return Err(RunError::MissingDataset(data_dir.clone()));
        }
    }
    if let Experiment::Fit { input, .. } = &config.experiment {
        if !input.is_file() {
            return Err(RunError::Read {
                path: input.clone(),
                source: std::io::Error::new(std::io::ErrorKind::NotFound, "no such file"),
            });
        }
    }
    let mut out = Outputs::create(&config.out_dir)?;
    let mut warnings = Vec::new();
    let fit = match &config.experiment {
        Experiment::Spectrum { params } => {
            let r = run_spectrum_convergence(params)?;
            convergence_outputs(&mut out, "spectrum", &r)?;
            warnings = r.warnings;
            r.fit
        }
        Experiment::Converge { params, depth } => {
            let r = run_output_convergence(params, *depth)?;
            convergence_outputs(&mut out, "converge", &r)?;
            warnings = r.warnings;
            r.fit
        }
        Experiment::Sampling { params } => {
            let r = run_sampling_consistency(params)?;
            convergence_outputs(&mut out, "sampling", &r)?;
            warnings = r.warnings;
            r.fit
        }
        Experiment::Weyl { manifold, count } => {
            let fit = check_weyl(*manifold, *count)?;
            let m = make_manifold(*manifold, *count).map_err(ExperimentError::from)?;
            out.write("weyl.csv", |w| {
                let mut c = csv::Writer::from_writer(w);
                c.write_record(["i", "eigenvalue"]).map_err(export)?;
                for (i, l) in m.eigenvalues().iter().enumerate() {
                    c.serialize((i, l)).map_err(export)?;
                }
                c.flush().map_err(export)
            })?;
            out.json("fit.json", &fit)?;
            Some(fit)
        }
        Experiment::GapSynthetic { params } => {
            let r = run_gap_sweep_synthetic(params)?;
            out.write("gap.csv", |w| Ok(r.write_records_csv(w)?))?;
            out.write("gap_summary.csv", |w| Ok(r.write_summary_csv(w)?))?;
            out.write("gap_resamples.csv", |w| Ok(r.write_resamples_csv(w)?))?;
            out.json("fit.json", &r.fit)?;
            out.json("report.json", &r)?;
            warnings = r.warnings.clone();
            r.fit
        }
        Experiment::GapDataset { data_dir, params } => {
            let data = load_cora_dir(data_dir)?;
            let r = run_gap_sweep_dataset(&data, params)?;
            out.write("gap_dataset.csv", |w| Ok(r.write_records_csv(w)?))?;
            out.write("gap_summary.csv", |w| Ok(r.write_summary_csv(w)?))?;
            out.write("predictions.csv", |w| Ok(r.write_predictions_csv(w)?))?;
            out.json("fit.json", &r.acc_fit)?;
            out.json("fit_loss.json", &r.loss_fit)?;
            warnings = r.warnings.clone();
            r.acc_fit
        }
        Experiment::Fit { input, x, y } => {
            let fit = loglog_fit(&read_columns(input, x, y)?)?;
            out.json("fit.json", &fit)?;
            Some(fit)
        }
    };
    out.json("manifest.json", config)?;
    Ok(RunOutcome {
        files: out.files,
        fit,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn manifest_round_trip_keeps_seed() {
        let params = SweepConfig {
            n_list: vec![50, 100],
            seeds: 2,
            ..SweepConfig::default()
        };
        let cfg = RunConfig::new(Experiment::Sampling { params }, "out".into(), Some(42));
        assert_eq!(cfg.master_seed, 42);
        let back = RunConfig::from_json(&cfg.to_json()).unwrap();
        assert_eq!(back, cfg);
        match back.experiment {
            Experiment::Sampling { params } => assert_eq!(params.master_seed, 42),
            other => panic!("unexpected {other:?}"),
        }
        assert!(cfg.to_json().contains("\"command\": \"sampling\""));
    }

    #[test]
    fn unknown_fields_rejected() {
        let text = r#"{"command":"sampling","params":{"n_list":[1,2],"bogus":1},"out_dir":"o","master_seed":1}"#;
        assert!(matches!(
            RunConfig::from_json(text),
            Err(RunError::Config(_))
        ));
    }

    #[test]
    fn fit_reads_named_columns() {
        let dir = tempfile::tempdir().unwrap();
        let csv = dir.path().join("g.csv");
        let mut body = String::from("N,mean,gap\n");
        for n in [100.0f64, 200.0, 400.0, 800.0] {
            body.push_str(&format!("{n},0,{}\n", n.powf(-0.5)));
        }
        std::fs::write(&csv, body).unwrap();
        let cfg = RunConfig::new(
            Experiment::Fit {
                input: csv.clone(),
                x: "N".into(),
                y: "gap".into(),
            },
            dir.path().join("out"),
            None,
        );
        let outcome = execute(&cfg).unwrap();
        assert!((outcome.fit.unwrap().slope + 0.5).abs() < 1e-12);
        assert!(dir.path().join("out/fit.json").is_file());
        assert!(dir.path().join("out/manifest.json").is_file());
        let missing = Experiment::Fit {
            input: csv,
            x: "N".into(),
            y: "nope".into(),
        };
        assert!(matches!(
            execute(&RunConfig::new(missing, dir.path().join("o2"), None)),
            Err(RunError::Input { .. })
        ));
    }

    #[test]
    fn missing_dataset_detected_first() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = RunConfig::new(
            Experiment::GapDataset {
                data_dir: dir.path().join("nowhere"),
                params: DatasetGapConfig::default(),
            },
            dir.path().join("out"),
            None,
        );
        assert!(matches!(execute(&cfg), Err(RunError::MissingDataset(_))));
        assert!(!dir.path().join("out").exists());
    }

    #[test]
    fn rerun_from_manifest_is_byte_identical() {
        let dir = tempfile::tempdir().unwrap();
        let params = SweepConfig {
            n_list: vec![100, 200],
            seeds: 2,
            ..SweepConfig::default()
        };
        let first = RunConfig::new(
            Experiment::Sampling { params },
            dir.path().join("a"),
            Some(5),
        );
        let a = execute(&first).unwrap();
        let mut again = RunConfig::load(&dir.path().join("a/manifest.json")).unwrap();
        again.out_dir = dir.path().join("b");
        let b = execute(&again).unwrap();
        for (fa, fb) in a.files.iter().zip(&b.files) {
            if fa.file_name().unwrap() == "manifest.json" {
                continue;
            }
            assert_eq!(
                std::fs::read(fa).unwrap(),
                std::fs::read(fb).unwrap(),
                "{}",
                fa.display()
            );
        }
    }
}

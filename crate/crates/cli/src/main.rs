use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use geognn::datasets::{write_cora_surrogate, DatasetGapConfig, SurrogateSpec, TrainingMode};
use geognn::experiments::{GapConfig, SweepConfig};
use geognn::filter::FilterBasis;
use geognn::graph::KernelScale;
use geognn::manifold::ManifoldKind;
use geognn::nn::Activation;
use geognn::run::{execute, Experiment, RunConfig, RunError};
use serde::de::DeserializeOwned;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

const EXIT_MISSING_DATASET: u8 = 3;
const EXIT_OUTPUT_DIR: u8 = 4;
const EXIT_CONFIG: u8 = 5;

/// Epsilon-graph GNN convergence and generalization-gap experiments.
#[derive(Debug, Parser)]
#[command(name = "geognn", version)]
struct Cli {
    /// Output directory.
    #[arg(long, global = true, env = "GEOGNN_OUT_DIR", default_value = "results")]
    out: PathBuf,
    /// JSON file with the command's parameters; flags override its fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed (overrides the config).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads.
    #[arg(long, global = true, default_value_t = 1)]
    jobs: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Graph Laplacian eigenpairs against the analytic spectrum.
    Spectrum(SweepArgs),
    /// GNN outputs on sampled graphs against the manifold network.
    Converge {
        #[command(flatten)]
        sweep: SweepArgs,
        /// Layers of the chain model.
        #[arg(long, default_value_t = 1)]
        depth: usize,
    },
    /// Discrete inner products against spectral coefficients.
    Sampling(SweepArgs),
    /// Weyl exponent of the analytic spectrum.
    Weyl {
        #[arg(long, value_parser = parse_enum::<ManifoldKind>, default_value = "circle")]
        manifold: ManifoldKind,
        #[arg(long, default_value_t = 200)]
        count: usize,
    },
    /// Generalization gap of a regression GNN on sampled graphs.
    GapSynthetic(GapArgs),
    /// Generalization gap of node classification on a Cora-format dataset.
    GapDataset(DatasetArgs),
    /// Log-log fit of one CSV column against another.
    Fit {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        x: String,
        #[arg(long)]
        y: String,
    },
    /// Write a synthetic citation network in the Cora file layout to --out.
    Surrogate,
    /// Repeat a run from its manifest.json.
    Rerun { manifest: PathBuf },
}

fn parse_enum<T: DeserializeOwned>(s: &str) -> Result<T, String> {
    serde_json::from_value(serde_json::Value::String(s.replace('-', "_")))
        .map_err(|e| e.to_string())
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[arg(long, value_parser = parse_enum::<ManifoldKind>)]
    manifold: Option<ManifoldKind>,
    /// Comma-separated node counts.
    #[arg(long = "n", value_delimiter = ',')]
    n_list: Option<Vec<usize>>,
    #[arg(long)]
    seeds: Option<usize>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    bandwidth: Option<usize>,
    #[arg(long)]
    epsilon_c: Option<f64>,
    /// as_printed or limit_matched.
    #[arg(long, value_parser = parse_enum::<KernelScale>)]
    kernel: Option<KernelScale>,
    /// Comma-separated heat-basis taps.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    taps: Option<Vec<f64>>,
    #[arg(long, value_parser = parse_enum::<Activation>)]
    activation: Option<Activation>,
    #[arg(long)]
    filter_only: bool,
}

impl SweepArgs {
    fn apply(self, c: &mut SweepConfig) {
        set(&mut c.manifold, self.manifold);
        set(&mut c.n_list, self.n_list);
        set(&mut c.seeds, self.seeds);
        set(&mut c.k, self.k);
        set(&mut c.bandwidth, self.bandwidth);
        if self.epsilon_c.is_some() {
            c.epsilon_c = self.epsilon_c;
        }
        set(&mut c.kernel, self.kernel);
        set(&mut c.taps, self.taps);
        set(&mut c.activation, self.activation);
        c.filter_only |= self.filter_only;
    }
}

#[derive(Debug, Args)]
struct GapArgs {
    #[arg(long = "n", value_delimiter = ',')]
    n_list: Option<Vec<usize>>,
    #[arg(long)]
    seeds: Option<usize>,
    #[arg(long)]
    resamples: Option<usize>,
    #[arg(long, value_parser = parse_enum::<ManifoldKind>)]
    manifold: Option<ManifoldKind>,
    #[arg(long)]
    taps: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    hidden: Option<Vec<usize>>,
    #[arg(long)]
    init_scale: Option<f64>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
}

#[derive(Debug, Args)]
struct DatasetArgs {
    /// Directory holding cora.content and cora.cites.
    #[arg(long, env = "CORA_DIR")]
    data: PathBuf,
    #[arg(long = "n", value_delimiter = ',')]
    n_list: Option<Vec<usize>>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    hidden: Option<Vec<usize>>,
    #[arg(long)]
    taps: Option<usize>,
    /// heat or polynomial.
    #[arg(long, value_parser = parse_enum::<FilterBasis>)]
    basis: Option<FilterBasis>,
    /// induced or masked.
    #[arg(long, value_parser = parse_enum::<TrainingMode>)]
    mode: Option<TrainingMode>,
    #[arg(long)]
    normalized_gso: bool,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
}

fn set<T>(field: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *field = v;
    }
}

fn load_params<T: DeserializeOwned + Default>(path: Option<&Path>) -> Result<T, RunError> {
    let Some(path) = path else {
        return Ok(T::default());
    };
    let text = std::fs::read_to_string(path).map_err(|source| RunError::Read {
        path: path.to_path_buf(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|e| RunError::Config(format!("{}: {e}", path.display())))
}

fn resolve(cli: Cli) -> Result<RunConfig, RunError> {
    let cfg = cli.config.as_deref();
    let experiment = match cli.command {
        Command::Spectrum(a) => {
            let mut params = load_params(cfg)?;
            a.apply(&mut params);
            Experiment::Spectrum { params }
        }
        Command::Converge { sweep, depth } => {
            let mut params = load_params(cfg)?;
            sweep.apply(&mut params);
            Experiment::Converge { params, depth }
        }
        Command::Sampling(a) => {
            let mut params = load_params(cfg)?;
            a.apply(&mut params);
            Experiment::Sampling { params }
        }
        Command::Weyl { manifold, count } => Experiment::Weyl { manifold, count },
        Command::GapSynthetic(a) => {
            let mut p: GapConfig = load_params(cfg)?;
            set(&mut p.n_list, a.n_list);
            set(&mut p.seeds, a.seeds);
            set(&mut p.resamples, a.resamples);
            set(&mut p.manifold, a.manifold);
            set(&mut p.taps, a.taps);
            set(&mut p.hidden, a.hidden);
            set(&mut p.init_scale, a.init_scale);
            set(&mut p.lr, a.lr);
            set(&mut p.epochs, a.epochs);
            Experiment::GapSynthetic { params: p }
        }
        Command::GapDataset(a) => {
            let mut p: DatasetGapConfig = load_params(cfg)?;
            set(&mut p.n_list, a.n_list);
            set(&mut p.trials, a.trials);
            set(&mut p.hidden, a.hidden);
            set(&mut p.taps, a.taps);
            set(&mut p.basis, a.basis);
            set(&mut p.mode, a.mode);
            p.normalized_gso |= a.normalized_gso;
            set(&mut p.lr, a.lr);
            set(&mut p.epochs, a.epochs);
            Experiment::GapDataset {
                data_dir: a.data,
                params: p,
            }
        }
        Command::Fit { input, x, y } => Experiment::Fit { input, x, y },
        Command::Surrogate => unreachable!("handled before resolution"),
        Command::Rerun { manifest } => {
            let mut run = RunConfig::load(&manifest)?;
            run.out_dir = cli.out;
            return Ok(run);
        }
    };
    Ok(RunConfig::new(experiment, cli.out, cli.seed))
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<RunError>() {
        Some(RunError::MissingDataset(_)) => EXIT_MISSING_DATASET,
        Some(RunError::OutputDir { .. }) => EXIT_OUTPUT_DIR,
        Some(e) if e.is_config() => EXIT_CONFIG,
        _ => 1,
    }
}

fn run(cli: Cli) -> Result<()> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(cli.jobs.max(1))
        .build_global()
        .context("cannot start the worker pool")?;
    if let Command::Surrogate = cli.command {
        let spec: SurrogateSpec = load_params(cli.config.as_deref())?;
        let spec = SurrogateSpec {
            seed: cli.seed.unwrap_or(spec.seed),
            ..spec
        };
        write_cora_surrogate(&cli.out, &spec).map_err(RunError::from)?;
        println!("wrote {}", cli.out.display());
        return Ok(());
    }
    let config = resolve(cli)?;
    log::info!(
        "running {} into {}",
        config.experiment.name(),
        config.out_dir.display()
    );
    let outcome = execute(&config)?;
    for w in &outcome.warnings {
        eprintln!("warning: {w}");
    }
    if let Some(fit) = &outcome.fit {
        let r = fit
            .pearson
            .map_or("undefined".to_string(), |p| format!("{p:.6}"));
        println!(
            "slope {:.6} intercept {:.6} pearson {r} points {}",
            fit.slope, fit.intercept, fit.n_points
        );
    }
    for f in &outcome.files {
        println!("wrote {}", f.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

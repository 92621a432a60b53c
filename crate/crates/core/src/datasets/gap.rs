use super::{induced_subgraph, DatasetError, NodeClassificationDataset};
use crate::experiments::{loglog_fit, mean_stderr, LinearFit, Record};
use crate::filter::FilterBasis;
use crate::graph::{Graph, SparseMat};
use crate::nn::{gnn_forward, Activation, GnnModel, LossKind, NodeFeatures, Targets};
use crate::seed;
use crate::training::{train, Backend, OwnedShift, TrainConfig};
use faer::Mat;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::Write;

/// Which graph the model sees during training and evaluation.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrainingMode {
    /// Train on the subgraph induced by the training nodes, evaluate on the
    /// subgraph induced by the held-out nodes.
    #[default]
    Induced,
    /// Propagate over the full graph and restrict the loss to each node set.
    Masked,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetGapConfig {
    pub n_list: Vec<usize>,
    /// Random splits per N.
    pub trials: usize,
    pub hidden: Vec<usize>,
    pub taps: usize,
    pub basis: FilterBasis,
    pub activation: Activation,
    pub mode: TrainingMode,
    /// Use `D^{-1/2} L D^{-1/2}` instead of `L` as the shift.
    pub normalized_gso: bool,
    /// Scale feature rows to unit l1 norm.
    pub normalize_features: bool,
    pub init_scale: f64,
    pub lr: f64,
    pub momentum: f64,
    pub epochs: usize,
    pub master_seed: u64,
}

impl Default for DatasetGapConfig {
    fn default() -> Self {
        DatasetGapConfig {
            n_list: vec![270, 405, 608, 911, 1367, 2050],
            trials: 10,
            hidden: vec![16],
            taps: 2,
            basis: FilterBasis::Polynomial,
            activation: Activation::Relu,
            mode: TrainingMode::Induced,
            normalized_gso: true,
            normalize_features: false,
            init_scale: 1.0,
            lr: 0.005,
            momentum: 0.9,
            epochs: 1000,
            master_seed: 1,
        }
    }
}

impl DatasetGapConfig {
    pub fn validate(&self, n_nodes: usize) -> Result<(), DatasetError> {
        if self.n_list.is_empty()
            || self.n_list.windows(2).any(|w| w[0] >= w[1])
            || self.n_list[0] == 0
        {
            return Err(DatasetError::Config(format!(
                "n_list must be strictly increasing and positive, got {:?}",
                self.n_list
            )));
        }
        let largest = *self.n_list.last().expect("nonempty");
        if largest >= n_nodes {
            return Err(DatasetError::TooLarge {
                n: largest,
                nodes: n_nodes,
            });
        }
        if self.trials == 0 {
            return Err(DatasetError::Config(
                "at least one trial is required".into(),
            ));
        }
        if self.taps == 0 || self.hidden.contains(&0) {
            return Err(DatasetError::Config(
                "taps and hidden widths must be positive".into(),
            ));
        }
        if !self.hidden.is_empty() && self.init_scale == 0.0 {
            return Err(DatasetError::Config(
                "hidden layers need a nonzero init_scale".into(),
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
            loss: LossKind::CrossEntropy,
            momentum: self.momentum,
        }
    }

    fn initial_model(&self, features: usize, classes: usize, seed: u64) -> GnnModel {
        let mut dims = vec![features];
        dims.extend(&self.hidden);
        dims.push(classes);
        let model = if self.init_scale == 0.0 {
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
        };
        model.with_output_activation(false)
    }

    fn shift(&self, graph: &Graph) -> Result<OwnedShift, DatasetError> {
        let op: SparseMat = if self.normalized_gso {
            graph.normalized_laplacian()?
        } else {
            graph.laplacian().clone()
        };
        Ok(OwnedShift::build(&op, self.basis, Backend::Sparse)?)
    }
}

/// The model's output on one node.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    /// Index in the full dataset.
    pub node: usize,
    pub label: usize,
    pub predicted: usize,
    /// `−log softmax(y)[label]`.
    pub nll: f64,
}

fn predictions(
    logits: &Mat<f64>,
    rows: &[usize],
    nodes: &[usize],
    labels: &[usize],
) -> Vec<Prediction> {
    rows.iter()
        .zip(nodes)
        .map(|(&r, &node)| {
            let row: Vec<f64> = (0..logits.ncols()).map(|p| logits[(r, p)]).collect();
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
            // First maximum wins ties.
            let predicted = row
                .iter()
                .enumerate()
                .fold(0, |best, (p, &v)| if v > row[best] { p } else { best });
            Prediction {
                node,
                label: labels[node],
                predicted,
                nll: lse - row[labels[node]],
            }
        })
        .collect()
}

/// Mean negative log-likelihood and accuracy in percent.
pub fn score(predictions: &[Prediction]) -> (f64, f64) {
    let k = predictions.len() as f64;
    let loss = predictions.iter().map(|p| p.nll).sum::<f64>() / k;
    let correct = predictions
        .iter()
        .filter(|p| p.predicted == p.label)
        .count();
    (loss, 100.0 * correct as f64 / k)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetGapRow {
    #[serde(rename = "N")]
    pub n: usize,
    pub trial: usize,
    pub seed: u64,
    pub train_loss: f64,
    pub test_loss: f64,
    pub train_acc: f64,
    pub test_acc: f64,
    /// `test_loss − train_loss`.
    pub loss_gap: f64,
    /// `train_acc − test_acc`, in percentage points.
    pub acc_gap: f64,
    /// Training objective before each update.
    pub losses: Vec<f64>,
    pub train: Vec<Prediction>,
    pub test: Vec<Prediction>,
}

impl DatasetGapRow {
    fn from_predictions(
        n: usize,
        trial: usize,
        seed: u64,
        losses: Vec<f64>,
        train: Vec<Prediction>,
        test: Vec<Prediction>,
    ) -> Self {
        let (train_loss, train_acc) = score(&train);
        let (test_loss, test_acc) = score(&test);
        DatasetGapRow {
            n,
            trial,
            seed,
            train_loss,
            test_loss,
            train_acc,
            test_acc,
            loss_gap: test_loss - train_loss,
            acc_gap: train_acc - test_acc,
            losses,
            train,
            test,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetGapSummaryRow {
    #[serde(rename = "N")]
    pub n: usize,
    pub loss_gap: f64,
    pub loss_gap_stderr: f64,
    pub acc_gap: f64,
    pub acc_gap_stderr: f64,
    pub train_loss: f64,
    pub test_loss: f64,
    pub train_acc: f64,
    pub test_acc: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetGapReport {
    pub config: DatasetGapConfig,
    pub n_nodes: usize,
    pub rows: Vec<DatasetGapRow>,
    pub summary: Vec<DatasetGapSummaryRow>,
    /// `log|mean loss gap|` against `log N`.
    pub loss_fit: Option<LinearFit>,
    /// `log|mean accuracy gap|` against `log N`.
    pub acc_fit: Option<LinearFit>,
    pub warnings: Vec<String>,
}

fn summarize(rows: &[DatasetGapRow]) -> Vec<DatasetGapSummaryRow> {
    let mut ns: Vec<usize> = rows.iter().map(|r| r.n).collect();
    ns.dedup();
    ns.into_iter()
        .map(|n| {
            let sel: Vec<&DatasetGapRow> = rows.iter().filter(|r| r.n == n).collect();
            let col = |f: fn(&DatasetGapRow) -> f64| sel.iter().map(|r| f(r)).collect::<Vec<f64>>();
            let mean = |f: fn(&DatasetGapRow) -> f64| mean_stderr(&col(f)).0;
            let (loss_gap, loss_gap_stderr) = mean_stderr(&col(|r| r.loss_gap));
            let (acc_gap, acc_gap_stderr) = mean_stderr(&col(|r| r.acc_gap));
            DatasetGapSummaryRow {
                n,
                loss_gap,
                loss_gap_stderr,
                acc_gap,
                acc_gap_stderr,
                train_loss: mean(|r| r.train_loss),
                test_loss: mean(|r| r.test_loss),
                train_acc: mean(|r| r.train_acc),
                test_acc: mean(|r| r.test_acc),
            }
        })
        .collect()
}

fn fits(
    summary: &[DatasetGapSummaryRow],
    warnings: &mut Vec<String>,
) -> (Option<LinearFit>, Option<LinearFit>) {
    let mut fit = |pts: Vec<(f64, f64)>, what: &str| match loglog_fit(&pts) {
        Ok(f) => {
            if f.n_negative > 0 || f.n_dropped > 0 {
                warnings.push(format!(
                    "{what}: {} negative gaps entered through their magnitude, {} zero or non-finite dropped",
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
    let loss = fit(
        summary.iter().map(|r| (r.n as f64, r.loss_gap)).collect(),
        "loss-gap fit",
    );
    let acc = fit(
        summary.iter().map(|r| (r.n as f64, r.acc_gap)).collect(),
        "accuracy-gap fit",
    );
    (loss, acc)
}

impl DatasetGapReport {
    /// Recomputes losses, accuracies and gaps from the stored predictions,
    /// then the summary and fits, and compares bit for bit.
    pub fn check_consistency(&self) -> Result<(), DatasetError> {
        for r in &self.rows {
            let again = DatasetGapRow::from_predictions(
                r.n,
                r.trial,
                r.seed,
                r.losses.clone(),
                r.train.clone(),
                r.test.clone(),
            );
            if &again != r {
                return Err(DatasetError::Config(format!(
                    "row N={} trial={} disagrees with its predictions",
                    r.n, r.trial
                )));
            }
            let mut seen = vec![false; self.n_nodes];
            for p in r.train.iter().chain(&r.test) {
                if p.node >= self.n_nodes || std::mem::replace(&mut seen[p.node], true) {
                    return Err(DatasetError::Config(format!(
                        "row N={} trial={} reuses node {}",
                        r.n, r.trial, p.node
                    )));
                }
            }
        }
        let summary = summarize(&self.rows);
        if summary != self.summary
            || fits(&summary, &mut Vec::new()) != (self.loss_fit.clone(), self.acc_fit.clone())
        {
            return Err(DatasetError::Config(
                "summary or fits differ from the rows".into(),
            ));
        }
        Ok(())
    }

    /// Per-trial metrics as `N,seed,metric,value` records (`seed` is the trial index).
    pub fn records(&self) -> Vec<Record> {
        self.rows
            .iter()
            .flat_map(|r| {
                [
                    ("train_loss", r.train_loss),
                    ("test_loss", r.test_loss),
                    ("loss_gap", r.loss_gap),
                    ("train_acc", r.train_acc),
                    ("test_acc", r.test_acc),
                    ("acc_gap", r.acc_gap),
                ]
                .into_iter()
                .map(move |(m, v)| Record {
                    n: r.n,
                    seed: r.trial,
                    metric: m.to_string(),
                    value: v,
                })
            })
            .collect()
    }

    pub fn write_records_csv<W: Write>(&self, out: W) -> Result<(), DatasetError> {
        Ok(crate::experiments::write_records_csv(&self.records(), out)?)
    }

    /// Columns `N,loss_gap,loss_gap_stderr,acc_gap,acc_gap_stderr,train_loss,test_loss,train_acc,test_acc`.
    pub fn write_summary_csv<W: Write>(&self, out: W) -> Result<(), DatasetError> {
        let err = |e: csv::Error| DatasetError::Export(e.to_string());
        let mut w = csv::Writer::from_writer(out);
        for r in &self.summary {
            w.serialize(r).map_err(err)?;
        }
        w.flush().map_err(|e| DatasetError::Export(e.to_string()))
    }

    /// Columns `N,trial,split,node,label,predicted,nll`.
    pub fn write_predictions_csv<W: Write>(&self, out: W) -> Result<(), DatasetError> {
        let err = |e: csv::Error| DatasetError::Export(e.to_string());
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["N", "trial", "split", "node", "label", "predicted", "nll"])
            .map_err(err)?;
        for r in &self.rows {
            for (split, preds) in [("train", &r.train), ("test", &r.test)] {
                for p in preds {
                    w.serialize((r.n, r.trial, split, p.node, p.label, p.predicted, p.nll))
                        .map_err(err)?;
                }
            }
        }
        w.flush().map_err(|e| DatasetError::Export(e.to_string()))
    }
}

/// Sorted training nodes and the sorted complement.
fn split(n_nodes: usize, n: usize, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut train = rand::seq::index::sample(&mut seed::rng(seed), n_nodes, n).into_vec();
    train.sort_unstable();
    let mut chosen = vec![false; n_nodes];
    train.iter().for_each(|&i| chosen[i] = true);
    let test = (0..n_nodes).filter(|&i| !chosen[i]).collect();
    (train, test)
}

/// For each N and trial: draw N training nodes uniformly without
/// replacement, train with full-batch SGD on the cross-entropy, and score
/// loss and accuracy on the training nodes and on the held-out nodes.
pub fn run_gap_sweep_dataset(
    dataset: &NodeClassificationDataset,
    config: &DatasetGapConfig,
) -> Result<DatasetGapReport, DatasetError> {
    config.validate(dataset.n_nodes())?;
    let normalized;
    let data = if config.normalize_features {
        normalized = dataset.row_normalized();
        &normalized
    } else {
        dataset
    };
    let all: Vec<usize> = (0..data.n_nodes()).collect();
    let full = match config.mode {
        TrainingMode::Masked => Some((
            config.shift(&data.graph()?)?,
            NodeFeatures::Sparse(data.feature_matrix(&all)?),
        )),
        TrainingMode::Induced => None,
    };
    let cells: Vec<(usize, usize)> = config
        .n_list
        .iter()
        .flat_map(|&n| (0..config.trials).map(move |t| (n, t)))
        .collect();
    let rows = cells
        .par_iter()
        .map(|&(n, t)| -> Result<DatasetGapRow, DatasetError> {
            let cell_seed = seed::derive(config.master_seed, &[n as u64, t as u64]);
            let (train_nodes, test_nodes) = split(data.n_nodes(), n, cell_seed);
            let model = config.initial_model(
                data.n_features,
                data.n_classes(),
                seed::derive(cell_seed, &[1]),
            );
            let tc = config.train_config(cell_seed);
            let (outcome, train, test) = match &full {
                None => {
                    let tr = induced_subgraph(data, &train_nodes)?;
                    let te = induced_subgraph(data, &test_nodes)?;
                    let shift = config.shift(&tr.graph)?;
                    let outcome = train(
                        &model,
                        &shift,
                        &tr.features,
                        &Targets::classes(&tr.labels),
                        &tc,
                    )?;
                    let rows: Vec<usize> = (0..n).collect();
                    let train_logits = gnn_forward(&outcome.model, &shift, &tr.features)?;
                    let test_shift = config.shift(&te.graph)?;
                    let test_logits = gnn_forward(&outcome.model, &test_shift, &te.features)?;
                    let test_rows: Vec<usize> = (0..test_nodes.len()).collect();
                    let train = predictions(&train_logits, &rows, &train_nodes, &data.labels);
                    let test = predictions(&test_logits, &test_rows, &test_nodes, &data.labels);
                    (outcome, train, test)
                }
                Some((shift, features)) => {
                    let mut mask = vec![None; data.n_nodes()];
                    train_nodes
                        .iter()
                        .for_each(|&i| mask[i] = Some(data.labels[i]));
                    let outcome = train(&model, shift, features, &Targets::Classes(mask), &tc)?;
                    let logits = gnn_forward(&outcome.model, shift, features)?;
                    let train = predictions(&logits, &train_nodes, &train_nodes, &data.labels);
                    let test = predictions(&logits, &test_nodes, &test_nodes, &data.labels);
                    (outcome, train, test)
                }
            };
            Ok(DatasetGapRow::from_predictions(
                n,
                t,
                cell_seed,
                outcome.losses,
                train,
                test,
            ))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let summary = summarize(&rows);
    let mut warnings = Vec::new();
    let (loss_fit, acc_fit) = fits(&summary, &mut warnings);
    Ok(DatasetGapReport {
        config: config.clone(),
        n_nodes: data.n_nodes(),
        rows,
        summary,
        loss_fit,
        acc_fit,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datasets::{load_cora_dir, write_cora_surrogate, SurrogateSpec};

    fn small_dataset() -> NodeClassificationDataset {
        let dir = tempfile::tempdir().unwrap();
        let spec = SurrogateSpec {
            classes: vec![("a".into(), 40), ("b".into(), 50), ("c".into(), 30)],
            n_features: 60,
            citations: 300,
            topic_words: 12,
            words: (3, 8),
            topic_weight: 0.6,
            ..SurrogateSpec::default()
        };
        write_cora_surrogate(dir.path(), &spec).unwrap();
        load_cora_dir(dir.path()).unwrap()
    }

    fn small_config() -> DatasetGapConfig {
        DatasetGapConfig {
            n_list: vec![30, 60],
            trials: 2,
            hidden: vec![4],
            epochs: 30,
            lr: 0.05,
            ..DatasetGapConfig::default()
        }
    }

    #[test]
    fn splits_are_disjoint_and_cover() {
        let (train, test) = split(50, 20, 9);
        assert_eq!(train.len(), 20);
        assert!(train.windows(2).all(|w| w[0] < w[1]));
        let mut all: Vec<usize> = train.iter().chain(&test).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..50).collect::<Vec<_>>());
        assert_ne!(split(50, 20, 10).0, train);
    }

    #[test]
    fn gaps_follow_predictions() {
        let d = small_dataset();
        for mode in [TrainingMode::Induced, TrainingMode::Masked] {
            let cfg = DatasetGapConfig {
                mode,
                ..small_config()
            };
            let r = run_gap_sweep_dataset(&d, &cfg).unwrap();
            r.check_consistency().unwrap();
            for row in &r.rows {
                assert_eq!(row.train.len(), row.n);
                assert_eq!(row.test.len(), d.n_nodes() - row.n);
                assert!(
                    (0.0..=100.0).contains(&row.train_acc) && (0.0..=100.0).contains(&row.test_acc)
                );
                assert_eq!(row.losses.len(), cfg.epochs);
            }
            let mut tampered = r.clone();
            tampered.rows[0].train[0].predicted = (tampered.rows[0].train[0].predicted + 1) % 3;
            assert!(tampered.check_consistency().is_err());
        }
    }

    #[test]
    fn reruns_are_identical() {
        let d = small_dataset();
        let cfg = DatasetGapConfig {
            n_list: vec![d.n_nodes() - 1],
            trials: 1,
            ..small_config()
        };
        let a = run_gap_sweep_dataset(&d, &cfg).unwrap();
        let b = run_gap_sweep_dataset(&d, &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.rows[0].test.len(), 1);
    }

    #[test]
    fn rejects_oversized_n() {
        let d = small_dataset();
        let cfg = DatasetGapConfig {
            n_list: vec![30, d.n_nodes()],
            ..small_config()
        };
        assert!(matches!(
            run_gap_sweep_dataset(&d, &cfg),
            Err(DatasetError::TooLarge { .. })
        ));
    }
}

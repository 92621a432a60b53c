//! Node-classification datasets in the Cora file layout, induced subgraphs,
//! and the transductive generalization-gap sweep.

mod gap;
mod surrogate;

pub use gap::{
    run_gap_sweep_dataset, DatasetGapConfig, DatasetGapReport, DatasetGapRow, DatasetGapSummaryRow,
    Prediction, TrainingMode,
};
pub use surrogate::{write_cora_surrogate, SurrogateSpec};

use crate::experiments::ExperimentError;
use crate::graph::{Graph, GraphError, SparseMat};
use crate::nn::{NnError, NodeFeatures};
use crate::training::TrainError;
use faer::sparse::Triplet;
use std::collections::{BTreeSet, HashMap};
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("cannot read {path}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Malformed {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("empty node selection")]
    EmptySelection,
    #[error("node index {index} out of range for {n} nodes")]
    IndexOutOfRange { index: usize, n: usize },
    #[error("node index {0} selected twice")]
    DuplicateIndex(usize),
    #[error("largest N ({n}) must be below the node count ({nodes})")]
    TooLarge { n: usize, nodes: usize },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("export: {0}")]
    Export(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Experiment(#[from] ExperimentError),
}

/// Counts of what the loader discarded.
#[derive(Debug, Clone, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct LoadStats {
    pub citation_rows: usize,
    pub self_loops_removed: usize,
    pub duplicate_edges_removed: usize,
    pub unknown_ids_skipped: usize,
}

/// Nodes with sparse real features, one class each, and an undirected edge set.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeClassificationDataset {
    pub node_ids: Vec<String>,
    pub n_features: usize,
    /// Nonzero `(feature, value)` pairs of each node, feature-sorted.
    pub features: Vec<Vec<(usize, f64)>>,
    pub labels: Vec<usize>,
    /// Class names in index order (sorted).
    pub class_names: Vec<String>,
    /// Undirected edges `(i, j)` with `i < j`, sorted, without duplicates.
    pub edges: Vec<(usize, usize)>,
    pub stats: LoadStats,
}

fn read(path: &Path) -> Result<String, DatasetError> {
    std::fs::read_to_string(path).map_err(|source| DatasetError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Reads `cora.content` (`<id> <features…> <class>`) and `cora.cites`
/// (`<cited> <citing>`), tab or space separated.
///
/// Class names map to indices in sorted order. Citations naming unknown ids
/// are skipped and counted; self-citations and repeated pairs (in either
/// direction) are dropped and counted.
pub fn load_cora(
    content_path: &Path,
    cites_path: &Path,
) -> Result<NodeClassificationDataset, DatasetError> {
    let content = read(content_path)?;
    let malformed = |line: usize, message: String| DatasetError::Malformed {
        path: content_path.to_path_buf(),
        line,
        message,
    };
    let mut node_ids = Vec::new();
    let mut index: HashMap<String, usize> = HashMap::new();
    let mut features = Vec::new();
    let mut raw_labels = Vec::new();
    let mut n_features = None;
    for (lineno, line) in content.lines().enumerate().map(|(i, l)| (i + 1, l)) {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() < 3 {
            return Err(malformed(
                lineno,
                format!(
                    "expected id, features and class, got {} fields",
                    fields.len()
                ),
            ));
        }
        let width = fields.len() - 2;
        match n_features {
            None => n_features = Some(width),
            Some(w) if w != width => {
                return Err(malformed(
                    lineno,
                    format!("{width} features, earlier rows have {w}"),
                ))
            }
            Some(_) => {}
        }
        let id = fields[0].to_string();
        if index.insert(id.clone(), node_ids.len()).is_some() {
            return Err(malformed(lineno, format!("duplicate node id {id}")));
        }
        let mut row = Vec::new();
        for (q, s) in fields[1..=width].iter().enumerate() {
            let v: f64 = s.parse().map_err(|_| {
                malformed(lineno, format!("feature {} is not a number: {s:?}", q + 1))
            })?;
            if !v.is_finite() {
                return Err(malformed(
                    lineno,
                    format!("feature {} is not finite", q + 1),
                ));
            }
            if v != 0.0 {
                row.push((q, v));
            }
        }
        node_ids.push(id);
        features.push(row);
        raw_labels.push(fields[width + 1].to_string());
    }
    if node_ids.is_empty() {
        return Err(malformed(0, "no nodes".into()));
    }
    let class_names: Vec<String> = raw_labels
        .iter()
        .cloned()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let labels = raw_labels
        .iter()
        .map(|c| class_names.binary_search(c).expect("class collected above"))
        .collect();

    let cites = read(cites_path)?;
    let mut stats = LoadStats::default();
    let mut edges = BTreeSet::new();
    for (lineno, line) in cites.lines().enumerate().map(|(i, l)| (i + 1, l)) {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 2 {
            return Err(DatasetError::Malformed {
                path: cites_path.to_path_buf(),
                line: lineno,
                message: format!("expected two ids, got {} fields", fields.len()),
            });
        }
        stats.citation_rows += 1;
        let (Some(&a), Some(&b)) = (index.get(fields[0]), index.get(fields[1])) else {
            log::warn!(
                "{}:{lineno}: unknown node id, citation skipped",
                cites_path.display()
            );
            stats.unknown_ids_skipped += 1;
            continue;
        };
        if a == b {
            stats.self_loops_removed += 1;
        } else if !edges.insert((a.min(b), a.max(b))) {
            stats.duplicate_edges_removed += 1;
        }
    }
    if stats.self_loops_removed + stats.duplicate_edges_removed + stats.unknown_ids_skipped > 0 {
        log::info!(
            "citations: {} self loops and {} duplicates removed, {} with unknown ids skipped",
            stats.self_loops_removed,
            stats.duplicate_edges_removed,
            stats.unknown_ids_skipped
        );
    }
    Ok(NodeClassificationDataset {
        node_ids,
        n_features: n_features.unwrap_or(0),
        features,
        labels,
        class_names,
        edges: edges.into_iter().collect(),
        stats,
    })
}

/// Loads `cora.content` and `cora.cites` from one directory.
pub fn load_cora_dir(dir: &Path) -> Result<NodeClassificationDataset, DatasetError> {
    load_cora(&dir.join("cora.content"), &dir.join("cora.cites"))
}

/// The subgraph on a node selection, renumbered in selection order.
#[derive(Debug, Clone)]
pub struct InducedSubgraph {
    /// Original indices of the kept nodes.
    pub nodes: Vec<usize>,
    /// Unit-weight graph on the kept edges.
    pub graph: Graph,
    pub features: NodeFeatures,
    pub labels: Vec<usize>,
}

impl NodeClassificationDataset {
    pub fn n_nodes(&self) -> usize {
        self.node_ids.len()
    }

    pub fn n_classes(&self) -> usize {
        self.class_names.len()
    }

    /// Copy with every nonzero feature row scaled to unit l1 norm.
    pub fn row_normalized(&self) -> Self {
        let mut out = self.clone();
        for row in &mut out.features {
            let s: f64 = row.iter().map(|(_, v)| v.abs()).sum();
            if s > 0.0 {
                row.iter_mut().for_each(|(_, v)| *v /= s);
            }
        }
        out
    }

    /// Sparse feature matrix of the given rows.
    pub fn feature_matrix(&self, rows: &[usize]) -> Result<SparseMat, DatasetError> {
        let triplets: Vec<Triplet<usize, usize, f64>> = rows
            .iter()
            .enumerate()
            .flat_map(|(r, &i)| {
                self.features[i]
                    .iter()
                    .map(move |&(q, v)| Triplet::new(r, q, v))
            })
            .collect();
        SparseMat::try_new_from_triplets(rows.len(), self.n_features, &triplets)
            .map_err(|e| DatasetError::Graph(GraphError::Assembly(format!("{e:?}"))))
    }

    /// Unit-weight graph on the full node set.
    pub fn graph(&self) -> Result<Graph, DatasetError> {
        let edges: Vec<(usize, usize, f64)> =
            self.edges.iter().map(|&(i, j)| (i, j, 1.0)).collect();
        Ok(Graph::from_edges(self.n_nodes(), &edges)?)
    }
}

fn check_selection(
    dataset: &NodeClassificationDataset,
    nodes: &[usize],
) -> Result<Vec<usize>, DatasetError> {
    if nodes.is_empty() {
        return Err(DatasetError::EmptySelection);
    }
    let n = dataset.n_nodes();
    let mut position = vec![usize::MAX; n];
    for (p, &i) in nodes.iter().enumerate() {
        if i >= n {
            return Err(DatasetError::IndexOutOfRange { index: i, n });
        }
        if position[i] != usize::MAX {
            return Err(DatasetError::DuplicateIndex(i));
        }
        position[i] = p;
    }
    Ok(position)
}

/// Keeps the edges with both endpoints selected, renumbers the nodes in the
/// order of `nodes`, and builds the Laplacian from unit weights.
pub fn induced_subgraph(
    dataset: &NodeClassificationDataset,
    nodes: &[usize],
) -> Result<InducedSubgraph, DatasetError> {
    let position = check_selection(dataset, nodes)?;
    let edges: Vec<(usize, usize, f64)> = dataset
        .edges
        .iter()
        .filter_map(|&(i, j)| {
            let (a, b) = (position[i], position[j]);
            (a != usize::MAX && b != usize::MAX).then_some((a, b, 1.0))
        })
        .collect();
    Ok(InducedSubgraph {
        nodes: nodes.to_vec(),
        graph: Graph::from_edges(nodes.len(), &edges)?,
        features: NodeFeatures::Sparse(dataset.feature_matrix(nodes)?),
        labels: nodes.iter().map(|&i| dataset.labels[i]).collect(),
    })
}
